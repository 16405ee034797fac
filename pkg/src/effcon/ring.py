"""Exact scalar arithmetic: multivariate rational functions over Gaussian rationals.

Symbols live in an append-only :class:`SymbolTable`; a monomial is a sorted
tuple of ``(symbol_index, exponent)`` pairs, a polynomial a dict from monomial
to :class:`~effcon.gaussrat.GaussRat`, and a :class:`ScalarExpr` a normalized
numerator/denominator pair.  Equality is decided by cross-multiplication, so
it never depends on how much simplification happened.
"""

from __future__ import annotations

import functools
from fractions import Fraction
from typing import Iterable, Optional

from .gaussrat import GaussRat, ONE, ZERO

Mono = tuple  # tuple[tuple[int, int], ...] sorted by symbol index
Poly = dict  # dict[Mono, GaussRat]

MONO_ONE: Mono = ()

# full multivariate GCD is attempted only below this combined term count
GCD_TERM_LIMIT = 400


class RingError(ValueError):
    pass


class Symbol:
    __slots__ = ("name", "kind", "grade", "payload", "index")

    def __init__(self, name: str, kind: str, grade: int, payload, index: int):
        self.name = name
        self.kind = kind
        self.grade = grade
        self.payload = payload
        self.index = index

    def __repr__(self):
        return f"Symbol({self.name!r}, {self.kind}, grade={self.grade})"


class SymbolTable:
    """Ordered symbol registry; declaration order fixes the monomial order."""

    def __init__(self):
        self.symbols: list[Symbol] = []
        self._by_name: dict[str, int] = {}

    def declare(self, name: str, kind: str, grade: int = 0, payload=None) -> int:
        if name in self._by_name:
            raise RingError(f"symbol {name!r} already declared")
        idx = len(self.symbols)
        self.symbols.append(Symbol(name, kind, grade, payload, idx))
        self._by_name[name] = idx
        return idx

    def index(self, name: str) -> int:
        try:
            return self._by_name[name]
        except KeyError:
            raise RingError(f"unknown symbol {name!r}") from None

    def get(self, name: str) -> Optional[int]:
        return self._by_name.get(name)

    def name(self, idx: int) -> str:
        return self.symbols[idx].name

    def grade(self, idx: int) -> int:
        return self.symbols[idx].grade

    def __len__(self):
        return len(self.symbols)


# ---------------------------------------------------------------------------
# monomial helpers


def mono_mul(a: Mono, b: Mono) -> Mono:
    if not a:
        return b
    if not b:
        return a
    out = []
    ia = ib = 0
    while ia < len(a) and ib < len(b):
        sa, ea = a[ia]
        sb, eb = b[ib]
        if sa == sb:
            out.append((sa, ea + eb))
            ia += 1
            ib += 1
        elif sa < sb:
            out.append(a[ia])
            ia += 1
        else:
            out.append(b[ib])
            ib += 1
    out.extend(a[ia:])
    out.extend(b[ib:])
    return tuple(out)


def mono_divides(a: Mono, b: Mono) -> bool:
    """True when monomial a divides b."""
    db = dict(b)
    return all(db.get(s, 0) >= e for s, e in a)


def mono_div(b: Mono, a: Mono) -> Mono:
    da = dict(a)
    out = []
    for s, e in b:
        r = e - da.get(s, 0)
        if r < 0:
            raise RingError("monomial division underflow")
        if r > 0:
            out.append((s, r))
    return tuple(out)


def mono_degree(m: Mono) -> int:
    return sum(e for _, e in m)


def mono_grade(table: SymbolTable, m: Mono) -> int:
    return sum(e * table.symbols[s].grade for s, e in m)


def mono_cmp(a: Mono, b: Mono) -> int:
    """Graded lexicographic order over the declaration order."""
    da, db = mono_degree(a), mono_degree(b)
    if da != db:
        return -1 if da < db else 1
    ia = ib = 0
    while ia < len(a) and ib < len(b):
        sa, ea = a[ia]
        sb, eb = b[ib]
        if sa != sb:
            # the earlier symbol is present with positive exponent in one only
            return 1 if sa < sb else -1
        if ea != eb:
            return 1 if ea > eb else -1
        ia += 1
        ib += 1
    if ia < len(a):
        return 1
    if ib < len(b):
        return -1
    return 0


_mono_key = functools.cmp_to_key(mono_cmp)


def sorted_monos(p: Poly) -> list:
    return sorted(p, key=_mono_key, reverse=True)


def leading_mono(p: Poly) -> Mono:
    return max(p, key=_mono_key)


# ---------------------------------------------------------------------------
# polynomial helpers (plain dicts, zero coefficients never stored)


def poly_const(c: GaussRat) -> Poly:
    return {} if c.is_zero() else {MONO_ONE: c}


def poly_add(a: Poly, b: Poly) -> Poly:
    out = dict(a)
    for m, c in b.items():
        s = out.get(m, ZERO) + c
        if s.is_zero():
            out.pop(m, None)
        else:
            out[m] = s
    return out


def poly_neg(a: Poly) -> Poly:
    return {m: -c for m, c in a.items()}


def poly_sub(a: Poly, b: Poly) -> Poly:
    return poly_add(a, poly_neg(b))


def poly_mul(a: Poly, b: Poly) -> Poly:
    if not a or not b:
        return {}
    out: Poly = {}
    for ma, ca in a.items():
        for mb, cb in b.items():
            m = mono_mul(ma, mb)
            s = out.get(m, ZERO) + ca * cb
            if s.is_zero():
                out.pop(m, None)
            else:
                out[m] = s
    return out


def poly_scale(a: Poly, c: GaussRat) -> Poly:
    if c.is_zero():
        return {}
    return {m: v * c for m, v in a.items()}


def poly_is_const(a: Poly):
    """Return the constant value if a is constant, else None."""
    if not a:
        return ZERO
    if len(a) == 1 and MONO_ONE in a:
        return a[MONO_ONE]
    return None


def poly_divmod(num: Poly, den: Poly):
    """Single-divisor multivariate division; returns (quotient, remainder)."""
    if not den:
        raise ZeroDivisionError("polynomial division by zero")
    lm = leading_mono(den)
    lc = den[lm]
    quo: Poly = {}
    rem = dict(num)
    while rem:
        m = leading_mono(rem)
        if not mono_divides(lm, m):
            break
        qm = mono_div(m, lm)
        qc = rem[m] / lc
        quo[qm] = quo.get(qm, ZERO) + qc
        for dm, dc in den.items():
            t = mono_mul(dm, qm)
            s = rem.get(t, ZERO) - dc * qc
            if s.is_zero():
                rem.pop(t, None)
            else:
                rem[t] = s
    return quo, rem


def poly_exact_div(num: Poly, den: Poly):
    quo, rem = poly_divmod(num, den)
    return quo if not rem else None


def poly_diff(a: Poly, sym: int) -> Poly:
    out: Poly = {}
    for m, c in a.items():
        for i, (s, e) in enumerate(m):
            if s == sym:
                nm = m[:i] + (((s, e - 1),) if e > 1 else ()) + m[i + 1:]
                nc = c * e
                v = out.get(nm, ZERO) + nc
                if v.is_zero():
                    out.pop(nm, None)
                else:
                    out[nm] = v
                break
    return out


def _mono_content(p: Poly) -> Mono:
    """Largest monomial dividing every term of p."""
    it = iter(p)
    try:
        common = dict(next(it))
    except StopIteration:
        return MONO_ONE
    for m in it:
        dm = dict(m)
        common = {s: min(e, dm[s]) for s, e in common.items() if s in dm and dm[s] > 0}
        if not common:
            return MONO_ONE
    return tuple(sorted(common.items()))


def poly_symbols(p: Poly) -> set:
    out = set()
    for m in p:
        for s, _ in m:
            out.add(s)
    return out


# -- multivariate GCD (primitive PRS over the Gaussian-rational field) -------


def _as_univariate(p: Poly, var: int) -> dict:
    """View p as a univariate poly in var with Poly coefficients."""
    out: dict[int, Poly] = {}
    for m, c in p.items():
        deg = 0
        rest = []
        for s, e in m:
            if s == var:
                deg = e
            else:
                rest.append((s, e))
        coef = out.setdefault(deg, {})
        rest_m = tuple(rest)
        v = coef.get(rest_m, ZERO) + c
        if v.is_zero():
            coef.pop(rest_m, None)
        else:
            coef[rest_m] = v
    return {d: c for d, c in out.items() if c}


def _from_univariate(u: dict, var: int) -> Poly:
    out: Poly = {}
    for d, coef in u.items():
        vm = ((var, d),) if d else MONO_ONE
        for m, c in coef.items():
            t = mono_mul(m, vm)
            v = out.get(t, ZERO) + c
            if v.is_zero():
                out.pop(t, None)
            else:
                out[t] = v
    return out


def _poly_gcd(a: Poly, b: Poly, depth: int = 0) -> Poly:
    if not a:
        return dict(b)
    if not b:
        return dict(a)
    if poly_is_const(a) is not None or poly_is_const(b) is not None:
        return {MONO_ONE: ONE}
    syms = poly_symbols(a) | poly_symbols(b)
    var = max(syms)
    ua, ub = _as_univariate(a, var), _as_univariate(b, var)

    def content(u):
        g: Poly = {}
        for coef in u.values():
            g = _poly_gcd(g, coef, depth + 1)
            if poly_is_const(g) is not None:
                return {MONO_ONE: ONE}
        return g

    def primitive(u, cont):
        return {d: poly_exact_div(c, cont) for d, c in u.items()}

    ca, cb = content(ua), content(ub)
    gc = _poly_gcd(ca, cb, depth + 1)
    pa, pb = primitive(ua, ca), primitive(ub, cb)

    # primitive pseudo-remainder sequence in var
    def udeg(u):
        return max(u)

    if udeg(pa) < udeg(pb):
        pa, pb = pb, pa
    while pb:
        # pseudo-remainder of pa by pb (leading terms cancel exactly)
        r = pa
        lb = pb[udeg(pb)]
        while r and udeg(r) >= udeg(pb):
            dr = udeg(r)
            lr = r[dr]
            shift = dr - udeg(pb)
            nr: dict[int, Poly] = {}
            for d, c in r.items():
                nr[d] = poly_mul(c, lb)
            for d, c in pb.items():
                t = poly_mul(c, lr)
                nr[d + shift] = poly_sub(nr.get(d + shift, {}), t)
            r = {d: c for d, c in nr.items() if c}
        if r:
            r = primitive(r, content(r))
        pa, pb = pb, r
    g = _from_univariate(pa, var)
    cont_g = content(_as_univariate(g, var))
    g = _from_univariate(primitive(_as_univariate(g, var), cont_g), var)
    return poly_mul(g, gc)


def poly_gcd(a: Poly, b: Poly) -> Poly:
    if len(a) + len(b) > GCD_TERM_LIMIT:
        return {MONO_ONE: ONE}
    return _poly_gcd(a, b)


# ---------------------------------------------------------------------------


class ScalarExpr:
    """A rational function num/den over a symbol table, kept canonical.

    The denominator is nonzero, shares no monomial content with the
    numerator, and is monic in the graded-lexicographic order.  Symbols that
    appeared in any denominator along the way are accumulated in
    ``assumptions`` (asserted nonzero, reported, never discharged).
    """

    __slots__ = ("table", "num", "den", "assumptions")

    def __init__(self, table: SymbolTable, num: Poly, den: Poly,
                 assumptions: frozenset = frozenset(), _normalized=False):
        self.table = table
        if not den:
            raise RingError("zero divisor")
        if _normalized:
            self.num, self.den = num, den
        else:
            self.num, self.den = _normalize(num, den)
        self.assumptions = assumptions

    # -- constructors ------------------------------------------------------

    @staticmethod
    def const(table: SymbolTable, value) -> "ScalarExpr":
        c = GaussRat.of(value) if not isinstance(value, GaussRat) else value
        return ScalarExpr(table, poly_const(c), {MONO_ONE: ONE}, _normalized=True)

    @staticmethod
    def symbol(table: SymbolTable, idx: int) -> "ScalarExpr":
        return ScalarExpr(table, {((idx, 1),): ONE}, {MONO_ONE: ONE}, _normalized=True)

    @staticmethod
    def from_poly(table: SymbolTable, p: Poly, assumptions=frozenset()) -> "ScalarExpr":
        return ScalarExpr(table, dict(p), {MONO_ONE: ONE}, assumptions, _normalized=True)

    # -- predicates ----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.num

    def is_polynomial(self) -> bool:
        return poly_is_const(self.den) is not None

    def const_value(self):
        """The GaussRat value if the expression is constant, else None."""
        dc = poly_is_const(self.den)
        if dc is None:
            return None
        nc = poly_is_const(self.num)
        if nc is None:
            return None
        return nc / dc

    # -- arithmetic ------------------------------------------------------------

    def _check(self, other: "ScalarExpr"):
        if self.table is not other.table:
            raise RingError("mixed symbol tables")

    def __add__(self, other):
        other = self._coerce(other)
        self._check(other)
        num = poly_add(poly_mul(self.num, other.den), poly_mul(other.num, self.den))
        den = poly_mul(self.den, other.den)
        return ScalarExpr(self.table, num, den, self.assumptions | other.assumptions)

    __radd__ = __add__

    def __neg__(self):
        return ScalarExpr(self.table, poly_neg(self.num), self.den,
                          self.assumptions, _normalized=True)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        other = self._coerce(other)
        self._check(other)
        return ScalarExpr(self.table, poly_mul(self.num, other.num),
                          poly_mul(self.den, other.den),
                          self.assumptions | other.assumptions)

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = self._coerce(other)
        self._check(other)
        if other.is_zero():
            raise RingError("zero divisor")
        assumptions = self.assumptions | other.assumptions
        if poly_is_const(other.num) is None:
            assumptions = assumptions | frozenset(poly_symbols(other.num))
        return ScalarExpr(self.table, poly_mul(self.num, other.den),
                          poly_mul(self.den, other.num), assumptions)

    def __rtruediv__(self, other):
        return self._coerce(other) / self

    def __pow__(self, n: int):
        if n < 0:
            return ScalarExpr.const(self.table, 1) / (self ** (-n))
        out = ScalarExpr.const(self.table, 1)
        base = self
        while n:
            if n & 1:
                out = out * base
            base = base * base
            n >>= 1
        return out.with_assumptions(self.assumptions)

    def _coerce(self, other):
        if isinstance(other, ScalarExpr):
            return other
        return ScalarExpr.const(self.table, other)

    def with_assumptions(self, extra: frozenset) -> "ScalarExpr":
        if extra <= self.assumptions:
            return self
        return ScalarExpr(self.table, self.num, self.den,
                          self.assumptions | extra, _normalized=True)

    # -- equality -----------------------------------------------------------

    def equals(self, other) -> bool:
        other = self._coerce(other)
        self._check(other)
        return poly_mul(self.num, other.den) == poly_mul(other.num, self.den)

    # -- calculus / structure ----------------------------------------------

    def diff(self, sym: int) -> "ScalarExpr":
        num = poly_sub(poly_mul(poly_diff(self.num, sym), self.den),
                       poly_mul(self.num, poly_diff(self.den, sym)))
        den = poly_mul(self.den, self.den)
        return ScalarExpr(self.table, num, den, self.assumptions)

    def substitute(self, bindings: dict) -> "ScalarExpr":
        """Simultaneous substitution symbol-index -> ScalarExpr."""
        if not bindings:
            return self
        relevant = poly_symbols(self.num) | poly_symbols(self.den)
        if not (relevant & set(bindings)):
            return self
        num = _poly_eval(self.table, self.num, bindings)
        den = _poly_eval(self.table, self.den, bindings)
        if den.is_zero():
            raise RingError("binding introduces zero denominator")
        out = num / den
        return out.with_assumptions(self.assumptions)

    def symbols(self) -> set:
        return poly_symbols(self.num) | poly_symbols(self.den)

    def grade_check_den(self):
        for s in poly_symbols(self.den):
            if self.table.symbols[s].grade > 0:
                raise RingError("non-polynomial in graded symbols")

    def truncate_by_grade(self, max_grade) -> "ScalarExpr":
        """Drop numerator terms of grade above max_grade (None means keep all)."""
        if max_grade is None:
            return self
        self.grade_check_den()
        num = {m: c for m, c in self.num.items()
               if mono_grade(self.table, m) <= max_grade}
        return ScalarExpr(self.table, num, dict(self.den), self.assumptions)

    def max_grade(self) -> int:
        self.grade_check_den()
        if not self.num:
            return 0
        return max(mono_grade(self.table, m) for m in self.num)

    def terms(self):
        """Numerator terms in descending monomial order (mono, coeff)."""
        return [(m, self.num[m]) for m in sorted_monos(self.num)]

    # printing lives in effcon.grammar; str() delegates for convenience
    def __str__(self):
        from .grammar import format_expr
        return format_expr(self)

    def __repr__(self):
        return f"<ScalarExpr {self}>"


def scalar_sum(table: SymbolTable, exprs) -> ScalarExpr:
    """Balanced sum; keeps intermediate denominators small."""
    items = list(exprs)
    if not items:
        return ScalarExpr.const(table, 0)
    while len(items) > 1:
        nxt = []
        for k in range(0, len(items) - 1, 2):
            nxt.append(items[k] + items[k + 1])
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def _poly_eval(table: SymbolTable, p: Poly, bindings: dict) -> ScalarExpr:
    cache: dict = {}
    terms = []
    for m, c in p.items():
        term = ScalarExpr.const(table, c)
        for s, e in m:
            key = (s, e)
            if key not in cache:
                base = bindings.get(s)
                if base is None:
                    cache[key] = ScalarExpr(table, {((s, e),): ONE}, {MONO_ONE: ONE},
                                            _normalized=True)
                else:
                    cache[key] = base ** e
            term = term * cache[key]
        terms.append(term)
    return scalar_sum(table, terms)


def _normalize(num: Poly, den: Poly):
    if not den:
        raise RingError("zero divisor")
    if not num:
        return {}, {MONO_ONE: ONE}
    # cancel common monomial content
    cn, cd = _mono_content(num), _mono_content(den)
    common = {}
    dn, dd = dict(cn), dict(cd)
    for s, e in dn.items():
        if s in dd:
            common[s] = min(e, dd[s])
    if common:
        cm = tuple(sorted(common.items()))
        num = {mono_div(m, cm): c for m, c in num.items()}
        den = {mono_div(m, cm): c for m, c in den.items()}
    # a single-monomial denominator is fully reduced after content removal;
    # only multi-term denominators need the division / gcd attempts
    if poly_is_const(den) is None and len(den) > 1:
        q = poly_exact_div(num, den)
        if q is not None:
            num, den = q, {MONO_ONE: ONE}
        else:
            g = poly_gcd(num, den)
            if poly_is_const(g) is None:
                qn = poly_exact_div(num, g)
                qd = poly_exact_div(den, g)
                if qn is not None and qd is not None:
                    num, den = qn, qd
    # monic denominator under the monomial order
    lc = den[leading_mono(den)]
    if not lc.is_one():
        inv = lc.inverse()
        num = poly_scale(num, inv)
        den = poly_scale(den, inv)
    return num, den
