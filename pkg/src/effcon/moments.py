"""The quantum phase space: expectation values and central Weyl moments.

A :class:`MomentSpace` owns the symbol table for a fixed set of canonical
pairs.  Moment symbols follow the text form ``G[a,b]`` (one pair) and
``G[a,b;c,d]`` (two pairs), with the first index of each group the momentum
exponent and the second the position exponent.

Poisson brackets are computed in F-coordinates, the expectation values of
unsymmetrized normal-ordered products: there the bracket of two generators
is (i*hbar)^(-1) times the expectation of the operator commutator, extended
to rational functions by the Leibniz rule.  The closed single-pair formula
``gbracket_closed_form`` is kept as an independent cross-check of the same
bracket; the algebra is normalized so that {q, p} = +1.
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .gaussrat import GaussRat, I, ONE
from .grammar import GrammarError, eval_ast, format_expr, parse_ast
from .operators import (OperatorPoly, commutator, op_mul, shift_by_expectations,
                        uncenter, weyl_monomial)
from .ring import RingError, ScalarExpr, SymbolTable, scalar_sum


class MomentError(ValueError):
    pass


class MomentSpace:
    """Symbol universe for a fixed list of canonical pairs plus parameters."""

    def __init__(self, pairs, parameters=("M",)):
        self.pair_labels = [tuple(p) for p in pairs]
        self.npairs = len(self.pair_labels)
        if self.npairs < 1:
            raise MomentError("need at least one canonical pair")
        self.table = SymbolTable()
        self._exp_idx = []
        for n, (ql, pl) in enumerate(self.pair_labels):
            qi = self.table.declare(ql, "expectation", 0, ("expectation", n, "q"))
            pi = self.table.declare(pl, "expectation", 0, ("expectation", n, "p"))
            self._exp_idx.append((qi, pi))
        self.hbar = self.table.declare("hbar", "parameter", 2)
        self.params = {}
        for name in parameters:
            self.params[name] = self.table.declare(name, "parameter", 0)
        self._moment_idx: dict[tuple, int] = {}
        self._fvar_idx: dict[tuple, int] = {}
        self._weyl_cache: dict = {}
        self._n2w_cache: dict = {}
        self._delta_exp_cache: dict = {}
        self._g2f_cache: dict = {}
        self._f2g_cache: dict = {}
        self._eb_cache: dict = {}
        self._gen_bracket_cache: dict = {}
        self._nihp_cache: dict = {}

    # -- scalar atom helpers -------------------------------------------------

    def const(self, value) -> ScalarExpr:
        return ScalarExpr.const(self.table, value)

    def wrap(self, x) -> ScalarExpr:
        return x if isinstance(x, ScalarExpr) else self.const(x)

    def sym(self, idx: int) -> ScalarExpr:
        return ScalarExpr.symbol(self.table, idx)

    def named(self, name: str) -> ScalarExpr:
        return self.sym(self.table.index(name))

    @property
    def hbar_expr(self) -> ScalarExpr:
        return self.sym(self.hbar)

    @property
    def i_expr(self) -> ScalarExpr:
        return self.const(I)

    def neg_i_hbar_pow(self, k: int) -> ScalarExpr:
        out = self._nihp_cache.get(k)
        if out is None:
            out = (self.const(-I) * self.hbar_expr) ** k
            self._nihp_cache[k] = out
        return out

    def expectation_exprs(self, pair: int):
        qi, pi = self._exp_idx[pair]
        return self.sym(qi), self.sym(pi)

    def expectation_index(self, pair: int, which: str) -> int:
        qi, pi = self._exp_idx[pair]
        return qi if which == "q" else pi

    def add_aux_symbol(self, name: str, grade: int = 0, kind: str = "aux") -> int:
        return self.table.declare(name, kind, grade)

    # -- moment and F symbols -------------------------------------------------

    def moment_name(self, exps) -> str:
        return "G[" + ";".join(f"{a},{b}" for a, b in exps) + "]"

    def moment_index(self, exps) -> int:
        """exps per pair: (momentum exponent, position exponent)."""
        exps = tuple((int(a), int(b)) for a, b in exps)
        if len(exps) != self.npairs:
            raise MomentError(f"moment needs {self.npairs} index groups")
        if any(a < 0 or b < 0 for a, b in exps):
            raise MomentError("negative moment exponent")
        total = sum(a + b for a, b in exps)
        if total < 2:
            raise MomentError("moments need total order >= 2")
        idx = self._moment_idx.get(exps)
        if idx is None:
            idx = self.table.declare(self.moment_name(exps), "moment", total,
                                     ("moment", exps))
            self._moment_idx[exps] = idx
        return idx

    def moment(self, exps) -> ScalarExpr:
        return self.sym(self.moment_index(exps))

    def moment_exps(self, idx: int):
        payload = self.table.symbols[idx].payload
        if not payload or payload[0] != "moment":
            raise MomentError(f"{self.table.name(idx)} is not a moment symbol")
        return payload[1]

    def moment_symbols(self):
        return [self.table.index(self.moment_name(e))
                for e in sorted(self._moment_idx)]

    def moments_up_to(self, order: int):
        """Declare and return all moment indices of total order 2..order."""
        out = []
        for total in range(2, order + 1):
            for exps in _exponent_groups(self.npairs, total):
                out.append(self.moment_index(exps))
        return out

    def fvar_name(self, exps) -> str:
        return "F[" + ";".join(f"{a},{b}" for a, b in exps) + "]"

    def fvar_index(self, exps) -> int:
        """exps per pair: (position exponent, momentum exponent), normal order."""
        exps = tuple((int(a), int(b)) for a, b in exps)
        total = sum(a + b for a, b in exps)
        if total < 2:
            raise MomentError("F symbols need total degree >= 2")
        idx = self._fvar_idx.get(exps)
        if idx is None:
            idx = self.table.declare(self.fvar_name(exps), "fvar", total,
                                     ("fvar", exps))
            self._fvar_idx[exps] = idx
        return idx

    def fvar(self, exps) -> ScalarExpr:
        """Expectation of the normal monomial with (q_exp, p_exp) per pair."""
        exps = tuple((int(a), int(b)) for a, b in exps)
        total = sum(a + b for a, b in exps)
        if total == 0:
            return self.const(1)
        if total == 1:
            for pair, (a, b) in enumerate(exps):
                if a:
                    return self.expectation_exprs(pair)[0]
                if b:
                    return self.expectation_exprs(pair)[1]
        return self.sym(self.fvar_index(exps))

    # -- parsing and printing ------------------------------------------------

    def parse_expr(self, text: str) -> ScalarExpr:
        return eval_ast(parse_ast(text), _ScalarContext(self))

    def parse_operator(self, text: str) -> OperatorPoly:
        return eval_ast(parse_ast(text), _OperatorContext(self))

    def format(self, e: ScalarExpr) -> str:
        return format_expr(e)

    def pair_of_label(self, label: str) -> int:
        for n, (ql, pl) in enumerate(self.pair_labels):
            if label in (ql, pl):
                return n
        raise MomentError(f"unknown pair label {label!r}")

    # -- expectation map --------------------------------------------------------

    def expectation(self, op: OperatorPoly) -> ScalarExpr:
        """Expectation value as a function of expectation symbols and moments."""
        cop = op if op.centered else shift_by_expectations(op)
        return scalar_sum(self.table, [coeff * self._delta_expectation(mono)
                                       for mono, coeff in cop.terms.items()])

    def _delta_expectation(self, mono) -> ScalarExpr:
        hit = self._delta_exp_cache.get(mono)
        if hit is not None:
            return hit
        # rewrite the normal-ordered centered monomial in the Weyl basis,
        # pair by pair, then read off moments
        partial = [((), self.const(1))]
        for pair in range(self.npairs):
            a, b = mono[2 * pair], mono[2 * pair + 1]
            choices = self._normal_to_weyl(a, b)
            nxt = []
            for shapes, c in partial:
                for (a2, b2), c2 in choices:
                    nxt.append((shapes + ((a2, b2),), c * c2))
            partial = nxt
        out = self.const(0)
        for shapes, c in partial:
            total = sum(a + b for a, b in shapes)
            if total == 0:
                out = out + c
            elif total == 1:
                continue
            else:
                # operator shape is (q_exp, p_exp); moments store (p_exp, q_exp)
                out = out + c * self.moment(tuple((b, a) for a, b in shapes))
        self._delta_exp_cache[mono] = out
        return out

    def _normal_to_weyl(self, a: int, b: int):
        """Coefficients of the normal monomial q^a p^b over Weyl monomials.

        Returns a list of ((a', b'), ScalarExpr) with a' <= a, b' <= b and the
        coefficients polynomials in hbar; computed by triangular inversion of
        the Weyl recursion and memoized per shape.
        """
        key = (a, b)
        hit = self._n2w_cache.get(key)
        if hit is not None:
            return hit
        if a + b <= 1:
            out = [((a, b), self.const(1))]
            self._n2w_cache[key] = out
            return out
        shape = [(0, 0)] * self.npairs
        shape[0] = (a, b)
        w = weyl_monomial(self, shape)
        # w = N(a,b) + sum of lower normal monomials; so
        # N(a,b) = W(a,b) - sum_lower coeff * N(a',b')
        combo: dict[tuple, ScalarExpr] = {(a, b): self.const(1)}
        for mono, coeff in w.terms.items():
            a2, b2 = mono[0], mono[1]
            if (a2, b2) == (a, b):
                continue
            for shape2, c2 in self._normal_to_weyl(a2, b2):
                cur = combo.get(shape2, self.const(0))
                combo[shape2] = cur - coeff * c2
        out = [(s, c) for s, c in sorted(combo.items()) if not c.is_zero()]
        self._n2w_cache[key] = out
        return out

    # -- G <-> F conversion ----------------------------------------------------

    def g_to_f(self, e: ScalarExpr) -> ScalarExpr:
        bindings = {}
        for s in e.symbols():
            if self.table.symbols[s].kind == "moment":
                bindings[s] = self._moment_in_f(s)
        return e.substitute(bindings)

    def f_to_g(self, e: ScalarExpr) -> ScalarExpr:
        bindings = {}
        for s in e.symbols():
            if self.table.symbols[s].kind == "fvar":
                bindings[s] = self._fvar_in_g(s)
        return e.substitute(bindings)

    def _moment_in_f(self, idx: int) -> ScalarExpr:
        hit = self._g2f_cache.get(idx)
        if hit is not None:
            return hit
        exps = self.moment_exps(idx)
        shapes = tuple((b, a) for a, b in exps)  # to operator (q_exp, p_exp)
        w = weyl_monomial(self, shapes, centered=True)
        plain = uncenter(w)
        out = self.const(0)
        for mono, coeff in plain.terms.items():
            out = out + coeff * self.fvar(tuple(
                (mono[2 * k], mono[2 * k + 1]) for k in range(self.npairs)))
        self._g2f_cache[idx] = out
        return out

    def _fvar_in_g(self, idx: int) -> ScalarExpr:
        hit = self._f2g_cache.get(idx)
        if hit is not None:
            return hit
        payload = self.table.symbols[idx].payload
        exps = payload[1]
        mono = []
        for a, b in exps:
            mono.extend((a, b))
        out = self.expectation(OperatorPoly.monomial(self, tuple(mono)))
        self._f2g_cache[idx] = out
        return out

    def _op_of_generator(self, idx: int) -> OperatorPoly:
        symbol = self.table.symbols[idx]
        if symbol.kind == "expectation":
            _, pair, which = symbol.payload
            return OperatorPoly.basic(self, which, pair)
        if symbol.kind == "fvar":
            exps = symbol.payload[1]
            mono = []
            for a, b in exps:
                mono.extend((a, b))
            return OperatorPoly.monomial(self, tuple(mono))
        raise MomentError(f"{symbol.name} has no operator realization")

    # -- Poisson bracket ----------------------------------------------------------

    def poisson_bracket(self, u: ScalarExpr, v: ScalarExpr) -> ScalarExpr:
        """Bracket with {q,p} = +1, extended to rational functions by Leibniz.

        Generator-pair brackets are computed once through F-coordinates and
        cached; general expressions reduce to them by the chain rule.
        """
        u, v = self.f_to_g(u), self.f_to_g(v)
        gens_u = sorted(s for s in u.symbols()
                        if self.table.symbols[s].kind in ("expectation", "moment"))
        gens_v = sorted(s for s in v.symbols()
                        if self.table.symbols[s].kind in ("expectation", "moment"))
        out = self.const(0)
        for x in gens_u:
            du = u.diff(x)
            if du.is_zero():
                continue
            for y in gens_v:
                eb = self.generator_bracket(x, y)
                if eb.is_zero():
                    continue
                dv = v.diff(y)
                if dv.is_zero():
                    continue
                out = out + du * dv * eb
        return out

    def generator_bracket(self, x: int, y: int) -> ScalarExpr:
        """Cached bracket of two phase-space generator symbols."""
        if x == y:
            return self.const(0)
        key = (x, y)
        hit = self._gen_bracket_cache.get(key)
        if hit is not None:
            return hit
        out = self._bracket_via_f(self.sym(x), self.sym(y))
        self._gen_bracket_cache[key] = out
        self._gen_bracket_cache[(y, x)] = -out
        return out

    def _bracket_via_f(self, u: ScalarExpr, v: ScalarExpr) -> ScalarExpr:
        uf, vf = self.g_to_f(u), self.g_to_f(v)
        gens_u = sorted(s for s in uf.symbols()
                        if self.table.symbols[s].kind in ("expectation", "fvar"))
        gens_v = sorted(s for s in vf.symbols()
                        if self.table.symbols[s].kind in ("expectation", "fvar"))
        out = self.const(0)
        for x in gens_u:
            du = uf.diff(x)
            if du.is_zero():
                continue
            for y in gens_v:
                eb = self._elementary_bracket(x, y)
                if eb.is_zero():
                    continue
                dv = vf.diff(y)
                if dv.is_zero():
                    continue
                out = out + du * dv * eb
        return self.f_to_g(out)

    def _elementary_bracket(self, x: int, y: int) -> ScalarExpr:
        if x == y:
            return self.const(0)
        key = (x, y)
        hit = self._eb_cache.get(key)
        if hit is not None:
            return hit
        comm = commutator(self._op_of_generator(x), self._op_of_generator(y))
        acc = self.const(0)
        for mono, coeff in comm.terms.items():
            acc = acc + coeff * self.fvar(tuple(
                (mono[2 * k], mono[2 * k + 1]) for k in range(self.npairs)))
        out = acc / (self.i_expr * self.hbar_expr)
        self._eb_cache[key] = out
        self._eb_cache[(y, x)] = -out
        return out

    # -- closed single-pair bracket formula ------------------------------------

    def gbracket_closed_form(self, a: int, b: int, c: int, d: int) -> ScalarExpr:
        """Direct evaluation of the closed bracket formula for one pair.

        Convention fixed so that the result equals
        poisson_bracket(G[a,b], G[c,d]) with {q,p} = +1; full contractions
        contribute through the order-zero moment, which is 1.
        """
        if self.npairs != 1:
            raise MomentError("closed formula applies to a single pair")
        if a + b < 2 or c + d < 2:
            raise MomentError("moments need total order >= 2")

        def g(m, n):
            if m < 0 or n < 0 or m + n == 1:
                return self.const(0)
            if m + n == 0:
                return self.const(1)
            return self.moment(((m, n),))

        minus_h2_4 = -(self.hbar_expr ** 2) * self.const(Fraction(1, 4))
        out = self.const(0)
        for j in range(0, min(a, d) + 1):
            for k in range(0, min(b, c) + 1):
                if (j + k) % 2 == 0:
                    continue
                sign = -1 if j % 2 == 1 else 1
                coeff = (_fact(j) * _fact(k)
                         * comb(a, j) * comb(b, k) * comb(c, k) * comb(d, j) * sign)
                out = out + (self.const(coeff) * (minus_h2_4 ** ((j + k - 1) // 2))
                             * g(a + c - j - k, b + d - j - k))
        out = out + self.const(a * d) * g(a - 1, b) * g(c, d - 1)
        out = out - self.const(b * c) * g(a, b - 1) * g(c - 1, d)
        return out

    # -- dynamics -----------------------------------------------------------------

    def quantum_hamiltonian(self, h_op: OperatorPoly, order=None) -> ScalarExpr:
        return self.expectation(h_op).truncate_by_grade(order)

    def equations_of_motion(self, h_q: ScalarExpr, generators):
        out = {}
        for idx in generators:
            out[idx] = self.poisson_bracket(self.sym(idx), h_q)
        return out


def _fact(n: int) -> int:
    out = 1
    for j in range(2, n + 1):
        out *= j
    return out


def _exponent_groups(npairs: int, total: int):
    """All per-pair (a, b) exponent tuples with the given total order."""
    slots = 2 * npairs
    out = []

    def rec(left, acc):
        if len(acc) == slots - 1:
            acc = acc + [left]
            out.append(tuple((acc[2 * k], acc[2 * k + 1]) for k in range(npairs)))
            return
        for e in range(left + 1):
            rec(left - e, acc + [e])

    rec(total, [])
    return sorted(out)


class _ScalarContext:
    def __init__(self, space: MomentSpace):
        self.space = space

    def number(self, n):
        return self.space.const(n)

    def imag_unit(self):
        return self.space.i_expr

    def symbol(self, name):
        idx = self.space.table.get(name)
        if idx is None:
            raise GrammarError(f"unknown symbol {name!r}")
        return self.space.sym(idx)

    def moment(self, groups):
        for g in groups:
            if len(g) != 2:
                raise GrammarError("moment index groups must be pairs")
        return self.space.moment(groups)

    def fvar(self, groups):
        for g in groups:
            if len(g) != 2:
                raise GrammarError("F index groups must be pairs")
        return self.space.fvar(groups)

    def basic_op(self, kind, ref):
        raise GrammarError("operators are not allowed in scalar expressions")


class _OperatorContext:
    def __init__(self, space: MomentSpace):
        self.space = space

    def number(self, n):
        return OperatorPoly.identity(self.space).scale(n)

    def imag_unit(self):
        return OperatorPoly.identity(self.space).scale(self.space.i_expr)

    def symbol(self, name):
        idx = self.space.table.get(name)
        if idx is None:
            raise GrammarError(f"unknown symbol {name!r}")
        kind = self.space.table.symbols[idx].kind
        if kind not in ("parameter", "aux"):
            raise GrammarError(f"symbol {name!r} cannot appear in an operator")
        return OperatorPoly.identity(self.space).scale(self.space.sym(idx))

    def moment(self, groups):
        raise GrammarError("moments are not allowed in operator expressions")

    fvar = moment

    def basic_op(self, kind, ref):
        try:
            pair = int(ref)
        except ValueError:
            pair = self.space.pair_of_label(ref)
        if not 0 <= pair < self.space.npairs:
            raise GrammarError(f"pair index {ref!r} out of range")
        return OperatorPoly.basic(self.space, kind, pair)
