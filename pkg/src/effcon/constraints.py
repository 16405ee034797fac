"""Effective constraints <fhat * Chat^n> generated from a classical constraint.

The multiplier word fhat is an unsymmetrized normal-ordered monomial: a
symmetrized variant would not vanish on physical states and the resulting
set fails to close (a negative test keeps that fact checked).  Closure works
with the identity

    [f C^n, g C^m] = [f, g] C^(n+m) + f [C^n, g] C^m + g [f, C^m] C^n

so a bracket that does not reduce to zero weakly decomposes into new
constraints of the same <word * C^power> shape.
"""

from __future__ import annotations

from math import comb

from .moments import MomentSpace
from .operators import OperatorPoly, commutator, op_mul
from .ring import ScalarExpr


class ConstraintError(ValueError):
    pass


def word_text(space: MomentSpace, mono) -> str:
    if not any(mono):
        return "1"
    parts = []
    for pair in range(space.npairs):
        ql, pl = space.pair_labels[pair]
        a, b = mono[2 * pair], mono[2 * pair + 1]
        if a:
            parts.append(ql if a == 1 else f"{ql}^{a}")
        if b:
            parts.append(pl if b == 1 else f"{pl}^{b}")
    return "*".join(parts)


class EffectiveConstraint:
    __slots__ = ("word", "power", "expression", "provenance")

    def __init__(self, word, power: int, expression: ScalarExpr,
                 provenance: str = "declared"):
        self.word = tuple(word)
        self.power = power
        self.expression = expression
        self.provenance = provenance

    def label(self, space: MomentSpace) -> str:
        return f"C[f={word_text(space, self.word)},n={self.power}]"

    def sort_key(self):
        return (self.power, sum(self.word), self.word)


class ConstraintSet:
    """Ordered collection of effective constraints for one classical constraint."""

    def __init__(self, space: MomentSpace, constraint_op: OperatorPoly):
        self.space = space
        self.constraint_op = constraint_op
        self.constraints: list[EffectiveConstraint] = []
        self._labels: set[str] = set()
        self._cpow_cache: dict[int, OperatorPoly] = {0: OperatorPoly.identity(space)}

    def cpow(self, n: int) -> OperatorPoly:
        out = self._cpow_cache.get(n)
        if out is None:
            out = op_mul(self.cpow(n - 1), self.constraint_op)
            self._cpow_cache[n] = out
        return out

    def add(self, word, power: int, provenance: str = "declared"):
        con = generate_constraint(self.space, self, word, power, provenance)
        label = con.label(self.space)
        if label in self._labels:
            return None
        self._labels.add(label)
        self.constraints.append(con)
        self.constraints.sort(key=EffectiveConstraint.sort_key)
        return con

    def has(self, word, power: int) -> bool:
        probe = EffectiveConstraint(word, power, None)
        return probe.label(self.space) in self._labels

    def labels(self):
        return [c.label(self.space) for c in self.constraints]

    def __iter__(self):
        return iter(self.constraints)

    def __len__(self):
        return len(self.constraints)


def generate_constraint(space: MomentSpace, cset: ConstraintSet, word,
                        n: int, provenance: str = "declared") -> EffectiveConstraint:
    if n < 1:
        raise ConstraintError("constraint power must be >= 1")
    word = tuple(word)
    if len(word) != 2 * space.npairs or any(e < 0 for e in word):
        raise ConstraintError(f"bad multiplier word {word!r}")
    op = op_mul(OperatorPoly.monomial(space, word), cset.cpow(n))
    return EffectiveConstraint(word, n, space.expectation(op), provenance)


def default_words(space: MomentSpace, kmax: int, power_pair: int = 0):
    """{1} plus single generators, each optionally right-multiplied by p^k.

    The momentum powers attach to the momentum of power_pair; k runs to kmax.
    """
    slots = 2 * space.npairs
    singles = [tuple(0 if i != j else 1 for i in range(slots)) for j in range(slots)]
    words = {(0,) * slots}
    words.update(singles)
    pslot = 2 * power_pair + 1
    for base in [(0,) * slots] + singles:
        for k in range(1, kmax + 1):
            w = list(base)
            w[pslot] += k
            words.add(tuple(w))
    return sorted(words, key=lambda w: (sum(w), w))


def seed_constraint_set(space: MomentSpace, constraint_op: OperatorPoly,
                        nmax: int, kmax: int, power_pair: int = 0,
                        words=None) -> ConstraintSet:
    cset = ConstraintSet(space, constraint_op)
    word_list = words if words is not None else default_words(space, kmax, power_pair)
    for n in range(1, nmax + 1):
        for w in word_list:
            cset.add(w, n)
    return cset


def close_constraint_set(cset: ConstraintSet, N, max_rounds: int = 6,
                         options=None):
    """Iterate brackets until weakly closed at grade N.

    Returns (cset, report).  A round brackets all pairs against the solved
    truncated system; any bracket with a nonzero weak reduction is decomposed
    through the commutator identity and the generated constraints are added.
    Termination at max_rounds with growth remaining is reported, not raised.
    """
    from .reduction import build_system  # circular at import time only

    space = cset.space
    report = {"rounds": 0, "added": [], "closed": True}
    for round_no in range(1, max_rounds + 1):
        system = build_system(cset, N, "graded", options)
        system.solve(strict=False)
        new_items = []
        cons = list(cset.constraints)
        for i in range(len(cons)):
            for j in range(i + 1, len(cons)):
                br = space.poisson_bracket(cons[i].expression, cons[j].expression)
                residue = system.weak_reduce(br.truncate_by_grade(N) if N is not None else br)
                if residue.is_zero():
                    continue
                pair_label = (cons[i].label(space), cons[j].label(space))
                for word, power in _closure_candidates(space, cset, cons[i], cons[j]):
                    if cset.has(word, power):
                        continue
                    con = generate_constraint(
                        space, cset, word, power,
                        provenance=f"closure({pair_label[0]},{pair_label[1]})")
                    reduced = system.weak_reduce(
                        con.expression.truncate_by_grade(N) if N is not None
                        else con.expression)
                    if reduced.is_zero():
                        continue
                    new_items.append((word, power, con.provenance))
        report["rounds"] = round_no
        if not new_items:
            return cset, report
        for word, power, provenance in new_items:
            added = cset.add(word, power, provenance)
            if added is not None:
                report["added"].append(added.label(space))
    report["closed"] = False
    return cset, report


def _closure_candidates(space, cset, c1, c2):
    f_op = OperatorPoly.monomial(space, c1.word)
    g_op = OperatorPoly.monomial(space, c2.word)
    n, m = c1.power, c2.power
    parts = [
        (commutator(f_op, g_op), n + m),
        (op_mul(f_op, commutator(cset.cpow(n), g_op)), m),
        (op_mul(g_op, commutator(f_op, cset.cpow(m))), n),
    ]
    out = []
    for L, power in parts:
        for mono in sorted(L.terms):
            out.append((mono, power))
    return out


def check_first_class(cset: ConstraintSet, system) -> dict:
    """Reduce every pairwise bracket on the constraint surface at grade N."""
    space = cset.space
    failures = []
    cons = list(cset.constraints)
    for i in range(len(cons)):
        for j in range(i + 1, len(cons)):
            br = space.poisson_bracket(cons[i].expression, cons[j].expression)
            if system.N is not None:
                br = br.truncate_by_grade(system.N)
            residue = system.weak_reduce(br)
            if not residue.is_zero():
                failures.append((cons[i].label(space), cons[j].label(space),
                                 residue))
    return {"first_class": not failures, "failures": failures}


def check_first_class_exprs(space, exprs, system) -> dict:
    """First-class check for plain labeled expressions (e.g. negative tests)."""
    failures = []
    items = list(exprs)
    for i in range(len(items)):
        for j in range(i + 1, len(items)):
            li, ei = items[i]
            lj, ej = items[j]
            br = space.poisson_bracket(ei, ej)
            if system.N is not None:
                br = br.truncate_by_grade(system.N)
            residue = system.weak_reduce(br)
            if not residue.is_zero():
                failures.append((li, lj, residue))
    return {"first_class": not failures, "failures": failures}


# ---------------------------------------------------------------------------
# degree-of-freedom counting


def count_moments(order: int, pairs: int) -> int:
    """Number of independent moments of a given total order for P pairs."""
    if order < 2 or pairs < 1:
        raise ConstraintError("need order >= 2 and pairs >= 1")
    return comb(order + 2 * pairs - 1, 2 * pairs - 1)


def count_unrestricted(order: int, pairs: int) -> int:
    """Moments of one order left unrestricted by the constraint tower."""
    if order < 2 or pairs < 1:
        raise ConstraintError("need order >= 2 and pairs >= 1")
    num = (2 * pairs - 1) * comb(order + 2 * pairs - 2, 2 * pairs - 1)
    if num % order:
        raise ConstraintError("counting identity failed")
    return num // order
