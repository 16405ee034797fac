"""Exact linear algebra helpers.

Two flavors are needed: nullspaces of matrices over the Gaussian rationals
(observable search) and Gauss-Jordan elimination over the rational-function
field of ScalarExpr entries (Dirac matrix inversion, flow ranks).  Pivoting
is deterministic so reports are byte-stable.
"""

from __future__ import annotations

from .gaussrat import GaussRat, ONE, ZERO
from .ring import ScalarExpr


class LinAlgError(ValueError):
    pass


def nullspace_gq(rows, ncols: int):
    """Nullspace basis of a sparse matrix over the Gaussian rationals.

    rows: iterable of dicts column-index -> GaussRat.  Returns reduced basis
    vectors (lists of GaussRat), each normalized to leading coefficient 1 at
    its first nonzero column; columns are eliminated in ascending order so
    the basis is the reduced echelon one (minimal support tie-break).
    """
    work = [dict(r) for r in rows if r]
    pivots: dict[int, dict] = {}
    for row in work:
        row = dict(row)
        while row:
            lead = min(row)
            piv = pivots.get(lead)
            if piv is None:
                inv = row[lead].inverse()
                row = {c: v * inv for c, v in row.items()}
                pivots[lead] = row
                break
            factor = row[lead]
            for c, v in piv.items():
                nv = row.get(c, ZERO) - factor * v
                if nv.is_zero():
                    row.pop(c, None)
                else:
                    row[c] = nv
    # back-substitute to reduced echelon form
    for lead in sorted(pivots, reverse=True):
        piv = pivots[lead]
        for lead2, row2 in pivots.items():
            if lead2 == lead:
                continue
            factor = row2.get(lead)
            if factor is None or factor.is_zero():
                continue
            for c, v in piv.items():
                nv = row2.get(c, ZERO) - factor * v
                if nv.is_zero():
                    row2.pop(c, None)
                else:
                    row2[c] = nv
    free_cols = [c for c in range(ncols) if c not in pivots]
    basis = []
    for fc in free_cols:
        vec = [ZERO] * ncols
        vec[fc] = ONE
        for lead, row in pivots.items():
            coef = row.get(fc)
            if coef is not None:
                vec[lead] = -coef
        basis.append(vec)
    return basis


def _pivot_order(entry: ScalarExpr):
    # prefer simple nonzero pivots: fewer numerator terms first
    return len(entry.num)


def invert_matrix(space, mat):
    """Inverse of a square ScalarExpr matrix by Gauss-Jordan elimination.

    Raises LinAlgError with a null-vector witness when singular.
    """
    n = len(mat)
    aug = []
    for i in range(n):
        row = [mat[i][j] for j in range(n)]
        row += [space.const(1 if j == i else 0) for j in range(n)]
        aug.append(row)
    row_perm = list(range(n))
    for col in range(n):
        pivot_row = None
        best = None
        for r in range(col, n):
            e = aug[r][col]
            if not e.is_zero():
                score = (_pivot_order(e), r)
                if best is None or score < best:
                    best = score
                    pivot_row = r
        if pivot_row is None:
            witness = _null_vector(space, [[mat[i][j] for j in range(n)]
                                           for i in range(n)])
            raise LinAlgError(("singular matrix", witness))
        if pivot_row != col:
            aug[col], aug[pivot_row] = aug[pivot_row], aug[col]
            row_perm[col], row_perm[pivot_row] = row_perm[pivot_row], row_perm[col]
        inv = space.const(1) / aug[col][col]
        aug[col] = [e * inv for e in aug[col]]
        for r in range(n):
            if r == col:
                continue
            f = aug[r][col]
            if f.is_zero():
                continue
            aug[r] = [aug[r][k] - f * aug[col][k] for k in range(2 * n)]
    return [[aug[i][n + j] for j in range(n)] for i in range(n)]


def _null_vector(space, mat):
    """A nonzero vector v with mat @ v = 0, for singular-matrix reporting."""
    n = len(mat)
    cols = list(range(n))
    rows = [list(r) for r in mat]
    pivots = {}
    r = 0
    for c in cols:
        pr = None
        for k in range(r, n):
            if not rows[k][c].is_zero():
                pr = k
                break
        if pr is None:
            continue
        rows[r], rows[pr] = rows[pr], rows[r]
        inv = space.const(1) / rows[r][c]
        rows[r] = [e * inv for e in rows[r]]
        for k in range(n):
            if k != r and not rows[k][c].is_zero():
                f = rows[k][c]
                rows[k] = [rows[k][j] - f * rows[r][j] for j in range(n)]
        pivots[c] = r
        r += 1
    free = [c for c in cols if c not in pivots]
    if not free:
        return None
    fc = free[0]
    vec = [space.const(0)] * n
    vec[fc] = space.const(1)
    for c, pr in pivots.items():
        vec[c] = -rows[pr][fc]
    return vec


def matrix_rank(space, mat) -> int:
    """Rank over the rational-function field (generic rank)."""
    if not mat:
        return 0
    rows = [list(r) for r in mat]
    ncols = len(rows[0])
    rank = 0
    for col in range(ncols):
        pr = None
        for k in range(rank, len(rows)):
            if not rows[k][col].is_zero():
                pr = k
                break
        if pr is None:
            continue
        rows[rank], rows[pr] = rows[pr], rows[rank]
        inv = space.const(1) / rows[rank][col]
        rows[rank] = [e * inv for e in rows[rank]]
        for k in range(len(rows)):
            if k != rank and not rows[k][col].is_zero():
                f = rows[k][col]
                rows[k] = [rows[k][j] - f * rows[rank][j] for j in range(ncols)]
        rank += 1
    return rank


def expr_span_membership(space, basis_exprs, target) -> bool:
    """Whether target lies in the Gaussian-rational span of basis_exprs."""
    from .ring import ScalarExpr, poly_is_const

    exprs = list(basis_exprs) + [target]
    dens = []
    for e in exprs:
        if poly_is_const(e.den) is None and not any(d == e.den for d in dens):
            dens.append(e.den)
    lcd = space.const(1)
    for d in dens:
        lcd = lcd * ScalarExpr.from_poly(space.table, d)
    cleared = []
    for e in exprs:
        v = e * lcd
        if poly_is_const(v.den) is None:
            raise LinAlgError("could not clear denominators")
        cleared.append(v)
    monos = set()
    for v in cleared:
        monos.update(v.num)
    rows = []
    for mono in sorted(monos):
        row = {}
        for j, v in enumerate(cleared):
            c = v.num.get(mono)
            if c is not None and not c.is_zero():
                row[j] = c
        if row:
            rows.append(row)
    for vec in nullspace_gq(rows, len(exprs)):
        if not vec[-1].is_zero():
            return True
    return False


def matmul(space, a, b):
    n, m, p = len(a), len(b), len(b[0])
    out = []
    for i in range(n):
        row = []
        for j in range(p):
            acc = space.const(0)
            for k in range(m):
                acc = acc + a[i][k] * b[k][j]
            row.append(acc)
        out.append(row)
    return out
