"""Noncommutative polynomials over K canonical pairs with [qhat_i, phat_j] = i*hbar*delta_ij.

A monomial is stored in normal order: within each pair all position factors
stand to the left of all momentum factors, and distinct pairs commute.  The
monomial key is a flat tuple ``(q_exp0, p_exp0, q_exp1, p_exp1, ...)``.
Coefficients are :class:`~effcon.ring.ScalarExpr`, so operators may carry
expectation-value prefactors (used for centered operators).
"""

from __future__ import annotations

from fractions import Fraction
from math import comb

from .gaussrat import GaussRat
from .ring import ScalarExpr

_HALF = GaussRat(Fraction(1, 2))


class OperatorError(ValueError):
    pass


class OperatorPoly:
    __slots__ = ("space", "terms", "centered")

    def __init__(self, space, terms=None, centered: bool = False):
        self.space = space
        self.terms: dict = {}
        self.centered = centered
        if terms:
            for mono, coeff in terms.items():
                self._accum(mono, coeff)

    # -- constructors --------------------------------------------------------

    @staticmethod
    def zero(space, centered=False) -> "OperatorPoly":
        return OperatorPoly(space, centered=centered)

    @staticmethod
    def identity(space, centered=False) -> "OperatorPoly":
        op = OperatorPoly(space, centered=centered)
        op.terms[(0,) * (2 * space.npairs)] = space.const(1)
        return op

    @staticmethod
    def monomial(space, mono, coeff=None, centered=False) -> "OperatorPoly":
        op = OperatorPoly(space, centered=centered)
        c = coeff if coeff is not None else space.const(1)
        if not c.is_zero():
            op.terms[tuple(mono)] = c
        return op

    @staticmethod
    def basic(space, kind: str, pair: int, centered=False) -> "OperatorPoly":
        """qhat(pair) for kind 'q', phat(pair) for kind 'p'."""
        if not 0 <= pair < space.npairs:
            raise OperatorError(f"pair index {pair} out of range")
        mono = [0] * (2 * space.npairs)
        mono[2 * pair + (0 if kind == "q" else 1)] = 1
        return OperatorPoly.monomial(space, tuple(mono), centered=centered)

    # -- bookkeeping ----------------------------------------------------------

    def _accum(self, mono, coeff):
        if coeff.is_zero():
            return
        cur = self.terms.get(mono)
        if cur is None:
            self.terms[mono] = coeff
        else:
            s = cur + coeff
            if s.is_zero():
                del self.terms[mono]
            else:
                self.terms[mono] = s

    def _check(self, other):
        if self.space is not other.space:
            raise OperatorError("mismatched pair tables")
        if self.centered != other.centered:
            raise OperatorError("mixed centered and uncentered operators")

    def is_zero(self) -> bool:
        return not self.terms

    def degree(self) -> int:
        return max((sum(m) for m in self.terms), default=0)

    def copy(self) -> "OperatorPoly":
        op = OperatorPoly(self.space, centered=self.centered)
        op.terms = dict(self.terms)
        return op

    # -- linear structure -----------------------------------------------------

    def __add__(self, other):
        self._check(other)
        out = self.copy()
        for m, c in other.terms.items():
            out._accum(m, c)
        return out

    def __sub__(self, other):
        return self + (-other)

    def __neg__(self):
        out = OperatorPoly(self.space, centered=self.centered)
        out.terms = {m: -c for m, c in self.terms.items()}
        return out

    def scale(self, coeff) -> "OperatorPoly":
        if not isinstance(coeff, ScalarExpr):
            coeff = self.space.const(coeff)
        out = OperatorPoly(self.space, centered=self.centered)
        if coeff.is_zero():
            return out
        out.terms = {m: c * coeff for m, c in self.terms.items()}
        return out

    # -- products -------------------------------------------------------------

    def __mul__(self, other):
        if isinstance(other, OperatorPoly):
            return op_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other):
        # scalars commute with everything, so this is unambiguous
        return self.scale(other)

    def __pow__(self, n: int):
        if n < 0:
            raise OperatorError("negative operator power")
        out = OperatorPoly.identity(self.space, centered=self.centered)
        for _ in range(n):
            out = op_mul(out, self)
        return out

    def __truediv__(self, other):
        if isinstance(other, OperatorPoly):
            value = other.scalar_part()
            if value is None:
                raise OperatorError("division by an operator")
            other = value
        return self.scale(self.space.const(1) / self.space.wrap(other))

    def scalar_part(self):
        """The coefficient when this is a multiple of the identity, else None."""
        if not self.terms:
            return self.space.const(0)
        if len(self.terms) != 1:
            return None
        mono, coeff = next(iter(self.terms.items()))
        return coeff if not any(mono) else None

    def equals(self, other) -> bool:
        self._check(other)
        return (self - other).is_zero()

    def map_coeffs(self, fn) -> "OperatorPoly":
        out = OperatorPoly(self.space, centered=self.centered)
        for m, c in self.terms.items():
            out._accum(m, fn(c))
        return out

    def __str__(self):
        from .grammar import format_operator
        return format_operator(self)

    __repr__ = __str__


# ---------------------------------------------------------------------------
# products and commutators


def _pair_product_terms(space, a1, b1, a2, b2):
    """Normal ordering of (q^a1 p^b1)(q^a2 p^b2) within one pair.

    Swapping each p across each q costs one factor -i*hbar:
    sum_k k! C(b1,k) C(a2,k) (-i*hbar)^k q^(a1+a2-k) p^(b1+b2-k).
    """
    out = []
    for k in range(min(b1, a2) + 1):
        coeff = space.neg_i_hbar_pow(k) * (
            comb(b1, k) * comb(a2, k) * _factorial(k))
        out.append((a1 + a2 - k, b1 + b2 - k, coeff))
    return out


def _factorial(k: int) -> int:
    out = 1
    for j in range(2, k + 1):
        out *= j
    return out


def op_mul(A: OperatorPoly, B: OperatorPoly) -> OperatorPoly:
    A._check(B)
    space = A.space
    npairs = space.npairs
    out = OperatorPoly(space, centered=A.centered)
    for ma, ca in A.terms.items():
        for mb, cb in B.terms.items():
            base = ca * cb
            # cartesian product of per-pair reorderings
            partial = [((), space.const(1))]
            for pair in range(npairs):
                a1, b1 = ma[2 * pair], ma[2 * pair + 1]
                a2, b2 = mb[2 * pair], mb[2 * pair + 1]
                choices = _pair_product_terms(space, a1, b1, a2, b2)
                nxt = []
                for mono, coeff in partial:
                    for qa, pb, extra in choices:
                        nxt.append((mono + (qa, pb), coeff * extra))
                partial = nxt
            for mono, coeff in partial:
                out._accum(mono, base * coeff)
    return out


def commutator(A: OperatorPoly, B: OperatorPoly) -> OperatorPoly:
    return op_mul(A, B) - op_mul(B, A)


def anticommutator(A: OperatorPoly, B: OperatorPoly) -> OperatorPoly:
    return op_mul(A, B) + op_mul(B, A)


# ---------------------------------------------------------------------------
# Weyl symmetrization


def weyl_monomial(space, exponents, centered=False) -> OperatorPoly:
    """Totally symmetrized product, in normal order.

    ``exponents`` gives (q_exp, p_exp) per pair.  Built by the recursion
    W(X*x) = (W(X)*xhat + xhat*W(X))/2 with a fixed peel order; distinct
    pairs commute, so the recursion symmetrizes pair by pair.
    """
    key = tuple(tuple(e) for e in exponents)
    op = space._weyl_cache.get(key)
    if op is None:
        flat = []
        for q, p in key:
            flat.extend((q, p))
        op = _weyl_build(space, tuple(flat))
        space._weyl_cache[key] = op
    out = op.copy()
    out.centered = centered
    return out


def _weyl_build(space, mono) -> OperatorPoly:
    if sum(mono) <= 1:
        return OperatorPoly.monomial(space, mono)
    # peel the highest pair, momentum factor first
    peel = None
    for pair in range(space.npairs - 1, -1, -1):
        if mono[2 * pair + 1] > 0:
            peel = ("p", pair)
            break
        if mono[2 * pair] > 0:
            peel = ("q", pair)
            break
    kind, pair = peel
    rest = list(mono)
    rest[2 * pair + (0 if kind == "q" else 1)] -= 1
    inner = _weyl_build(space, tuple(rest))
    x = OperatorPoly.basic(space, kind, pair)
    return (op_mul(inner, x) + op_mul(x, inner)).scale(space.const(_HALF))


# ---------------------------------------------------------------------------
# centering


def shift_by_expectations(op: OperatorPoly) -> OperatorPoly:
    """Rewrite in centered generators: qhat = q + (qhat - q) per pair."""
    if op.centered:
        return op.copy()
    return _shift(op, sign=+1, centered=True)


def uncenter(op: OperatorPoly) -> OperatorPoly:
    """Inverse of shift_by_expectations."""
    if not op.centered:
        return op.copy()
    return _shift(op, sign=-1, centered=False)


def _shift(op: OperatorPoly, sign: int, centered: bool) -> OperatorPoly:
    space = op.space
    out = OperatorPoly(space, centered=centered)
    for mono, coeff in op.terms.items():
        partial = [((), space.const(1))]
        for pair in range(space.npairs):
            qx, px = space.expectation_exprs(pair)
            if sign < 0:
                qx, px = -qx, -px
            a, b = mono[2 * pair], mono[2 * pair + 1]
            choices = []
            for j in range(a + 1):
                cj = space.const(comb(a, j)) * (qx ** (a - j))
                for k in range(b + 1):
                    ck = cj * space.const(comb(b, k)) * (px ** (b - k))
                    choices.append((j, k, ck))
            nxt = []
            for m, c in partial:
                for j, k, ck in choices:
                    if ck.is_zero():
                        continue
                    nxt.append((m + (j, k), c * ck))
            partial = nxt
        for m, c in partial:
            out._accum(m, coeff * c)
    return out
