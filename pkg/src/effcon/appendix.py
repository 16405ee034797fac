"""Transcribed expansion blocks for the parametrized-free-particle constraints.

Each family below is the leading part of the machine constraint C_f^(n),
rewritten in powers of the classical constraint (the aux symbol ``Cc``) by
eliminating the time momentum, and listed through every block whose
prefactor n(n-1)... survives for n <= 3.  Terms of accumulated moment order
four and higher are covered by remainder symbols in the source display, so
comparisons drop them from both sides.
"""

from __future__ import annotations

from .moments import MomentSpace
from .reduction import drop_moment_order_at_least

CUTOFF = 4

# family -> list of (prefactor kind, block expression); prefactors are the
# falling factorials n, n(n-1), n(n-1)(n-2) applied to Cc^(n-k)
FAMILY_BLOCKS = {
    "1": [
        "(1/(2*M))*G[2,0;0,0]",
        ("p^2/(2*M^2)*G[2,0;0,0] + p/M*G[1,0;1,0] + 1/2*G[0,0;2,0]"
         " + 1/(2*M)*G[2,0;1,0] + p/(2*M^2)*G[3,0;0,0] + 1/(8*M^2)*G[4,0;0,0]"),
        ("p^2/(2*M^2)*G[2,0;1,0] + p/(2*M)*G[1,0;2,0] + 1/6*G[0,0;3,0]"
         " + p^3/(6*M^3)*G[3,0;0,0]"),
    ],
    "q": [
        "p/M*(1/2*i*hbar) + p/M*G[1,1;0,0] + G[0,1;1,0] + 1/(2*M)*G[2,1;0,0]",
        ("(1/2*i*hbar)*(1/M)*(G[1,0;1,0] + 3*p/(2*M)*G[2,0;0,0])"
         " + p^2/(2*M^2)*G[2,1;0,0] + p/M*G[1,1;1,0] + 1/2*G[0,1;2,0]"
         " + (1/2*i*hbar)*(1/(2*M^2))*G[3,0;0,0]"),
        ("(1/2*i*hbar)*(p^2/M^2*G[1,0;1,0] + p^3/(2*M^3)*G[2,0;0,0]"
         " + p/(2*M)*G[0,0;2,0] + 3*p/(2*M^2)*G[2,0;1,0]"
         " + p^2/M^3*G[3,0;0,0] + 1/(2*M)*G[1,0;2,0])"),
    ],
    "t": [
        "1/2*i*hbar + p/M*G[1,0;0,1] + G[0,0;1,1] + 1/(2*M)*G[2,0;0,1]",
        ("(1/2*i*hbar)*(1/(2*M))*G[2,0;0,0] + p^2/(2*M^2)*G[2,0;0,1]"
         " + p/M*G[1,0;1,1] + 1/2*G[0,0;2,1]"),
        ("(1/2*i*hbar)*(p/M*G[1,0;1,0] + 1/2*G[0,0;2,0]"
         " + p^2/(2*M^2)*G[2,0;0,0] + p/(2*M^2)*G[3,0;0,0]"
         " + 1/(2*M)*G[2,0;1,0])"),
    ],
    "pt": [
        "p/M*G[1,0;1,0] + G[0,0;2,0] + 1/(2*M)*G[2,0;1,0]",
        "p^2/(2*M^2)*G[2,0;1,0] + p/M*G[1,0;2,0] + 1/2*G[0,0;3,0]",
    ],
    "p": [
        "G[1,0;1,0] + 1/(2*M)*G[3,0;0,0] + p/M*G[2,0;0,0]",
        "p^2/(2*M^2)*G[3,0;0,0] + p/M*G[2,0;1,0] + 1/2*G[1,0;2,0]",
    ],
}

# expectation-value prefactor multiplying the whole C^(n) tower per family
FAMILY_PREFIX = {"1": None, "q": "q", "t": "t", "pt": "pt", "p": "p"}


class AppendixChecker:
    """Compares machine-generated free-particle constraints with the
    transcribed expansions, modulo moments of accumulated order >= 4."""

    def __init__(self, space: MomentSpace, cset):
        self.space = space
        self.cset = cset
        name = "Cc"
        idx = space.table.get(name)
        self.cc = idx if idx is not None else space.add_aux_symbol(name)
        pt = space.table.index("pt")
        self.binding = {pt: space.sym(self.cc) - space.parse_expr("p^2/(2*M)")}

    def _clip(self, e):
        return drop_moment_order_at_least(self.space, e.substitute(self.binding),
                                          CUTOFF)

    def _tower(self, family: str, n: int):
        space = self.space
        cc = space.sym(self.cc)
        out = space.const(0)
        prefactor = 1
        for k, block in enumerate(FAMILY_BLOCKS[family], start=1):
            prefactor *= n - (k - 1)
            if prefactor == 0:
                break
            out = out + (space.const(prefactor) * cc ** (n - k)
                         * space.parse_expr(block))
        return out

    def transcribed(self, family: str, n: int):
        space = self.space
        cn = space.sym(self.cc) ** n + self._tower("1", n)
        if family == "1":
            return self._clip(cn)
        prefix = space.named(FAMILY_PREFIX[family])
        return self._clip(prefix * cn + self._tower(family, n))

    def machine(self, family: str, n: int):
        word = "1" if family == "1" else family
        label = f"C[f={word},n={n}]"
        for con in self.cset:
            if con.label(self.space) == label:
                return self._clip(con.expression)
        raise KeyError(f"constraint {label} not generated")

    def verify(self, family: str, n: int) -> dict:
        got = self.machine(family, n)
        want = self.transcribed(family, n)
        ok = got.equals(want)
        return {"family": family, "n": n, "match": ok,
                "difference": None if ok else got - want}

    def verify_all(self, nmax: int = 3):
        out = []
        for family in ("1", "q", "t", "pt", "p"):
            for n in range(1, nmax + 1):
                out.append(self.verify(family, n))
        return out
