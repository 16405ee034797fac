"""Order-by-order reduction of a truncated effective constraint system.

Two truncation modes exist.  In graded mode a term's order is its lambda
grade: moment orders plus twice the hbar power; expressions are re-truncated
after every substitution, so products of solved quantities fall out of grade
automatically.  In sharp mode every moment above the cutoff is set to zero
outright and nothing else is dropped, which is exactly the reduction that
fails for the parametrized free particle.

Weak reduction is substitution against the triangular solved table (plus
grade truncation in graded mode); no polynomial ideal machinery is needed
because constraints are linear in moments at leading grade.
"""

from __future__ import annotations

from .constraints import ConstraintSet, EffectiveConstraint
from .gaussrat import GaussRat
from .linsolve import LinAlgError, invert_matrix, matrix_rank, nullspace_gq
from .moments import MomentSpace
from .ring import RingError, ScalarExpr, poly_is_const


class ReductionError(ValueError):
    pass


class SystemOptions:
    __slots__ = ("time_pair", "eliminate_expectation", "prefer_pivots",
                 "physical", "sharp_admission")

    def __init__(self, time_pair=None, eliminate_expectation=None,
                 prefer_pivots=(), physical=(), sharp_admission="all"):
        self.time_pair = time_pair
        self.eliminate_expectation = eliminate_expectation
        self.prefer_pivots = list(prefer_pivots)
        self.physical = set(physical)
        self.sharp_admission = sharp_admission


class ConstraintRecord:
    __slots__ = ("label", "word", "power", "exact", "truncated", "status",
                 "pivot", "residue")

    def __init__(self, label, word, power, exact, truncated):
        self.label = label
        self.word = word
        self.power = power
        self.exact = exact
        self.truncated = truncated
        self.status = "pending"
        self.pivot = None
        self.residue = None


def moment_order_of_expr(space: MomentSpace, e: ScalarExpr) -> int:
    """Largest total moment order appearing in any numerator term."""
    table = space.table
    worst = 0
    for mono, _ in e.num.items():
        order = sum(exp * table.symbols[s].grade for s, exp in mono
                    if table.symbols[s].kind == "moment")
        worst = max(worst, order)
    return worst


def drop_moment_order_at_least(space: MomentSpace, e: ScalarExpr, cutoff: int) -> ScalarExpr:
    """Drop numerator terms whose accumulated moment order reaches cutoff."""
    table = space.table
    num = {}
    for mono, c in e.num.items():
        order = sum(exp * table.symbols[s].grade for s, exp in mono
                    if table.symbols[s].kind == "moment")
        if order < cutoff:
            num[mono] = c
    return ScalarExpr(space.table, num, dict(e.den), e.assumptions)


def build_system(cset: ConstraintSet, N, mode: str = "graded",
                 options: SystemOptions = None) -> "TruncatedSystem":
    return TruncatedSystem(cset, N, mode, options or SystemOptions())


class TruncatedSystem:
    def __init__(self, cset: ConstraintSet, N, mode: str, options: SystemOptions):
        if mode not in ("graded", "sharp"):
            raise ReductionError(f"unknown truncation mode {mode!r}")
        self.cset = cset
        self.space = cset.space
        self.N = N
        self.mode = mode
        self.options = options
        self.table: dict[int, ScalarExpr] = {}
        self.solved_order: list[int] = []
        self.assumptions: set[int] = set()
        self.hard: list[tuple[str, ScalarExpr]] = []
        self.forced: list[tuple[str, int]] = []
        self.unresolved: list[str] = []
        self.gauge_conditions: list[tuple[int, ScalarExpr]] = []
        self.records: list[ConstraintRecord] = []
        self._solved = False
        if N is not None:
            self.space.moments_up_to(N)
        for con in cset:
            label = con.label(self.space)
            if mode == "sharp" and options.sharp_admission == "order_filter":
                if N is not None and moment_order_of_expr(self.space, con.expression) > N:
                    continue
            self.records.append(ConstraintRecord(
                label, con.word, con.power, con.expression,
                self._truncate(con.expression)))

    # -- truncation and weak reduction ------------------------------------------

    def _truncate(self, e: ScalarExpr) -> ScalarExpr:
        if self.N is None:
            return e
        if self.mode == "graded":
            return e.truncate_by_grade(self.N)
        return self._sharp_zero(e)

    def _sharp_zero(self, e: ScalarExpr) -> ScalarExpr:
        table = self.space.table
        bindings = {}
        for s in e.symbols():
            sym = table.symbols[s]
            if sym.kind == "moment" and sym.grade > self.N:
                bindings[s] = self.space.const(0)
        return e.substitute(bindings)

    def weak_reduce(self, e: ScalarExpr, truncate: bool = True) -> ScalarExpr:
        """Fixpoint of substitute-solved-table (and re-truncate, in grade mode).

        The table is triangular, so one substitution round removes all solved
        symbols; the loop only re-runs when truncation or sharp zeroing can
        expose further work.
        """
        grade_cut = (self.N if truncate and self.N is not None
                     and self.mode == "graded" else None)
        for _ in range(6):
            if grade_cut is not None:
                e = e.truncate_by_grade(grade_cut)
            syms = e.symbols()
            bindings = {}
            table = self.space.table
            for s in syms:
                hit = self.table.get(s)
                if hit is not None:
                    bindings[s] = hit
                elif (self.mode == "sharp" and self.N is not None
                      and table.symbols[s].kind == "moment"
                      and table.symbols[s].grade > self.N):
                    bindings[s] = self.space.const(0)
            if not bindings:
                break
            e = e.substitute(bindings)
        if grade_cut is not None:
            e = e.truncate_by_grade(grade_cut)
        return e

    # -- solving ------------------------------------------------------------------

    def solve(self, strict: bool = True) -> "TruncatedSystem":
        """Triangular order-by-order solve along the constraint hierarchy."""
        for rec in self.records:
            residue = self.weak_reduce(rec.truncated)
            rec.residue = residue
            if residue.is_zero():
                rec.status = "dependent"
                continue
            if self._parameter_only(residue):
                # nonzero function of parameters alone: nothing left to solve
                rec.status = "hard"
                self.hard.append((rec.label, residue))
                continue
            if self._solve_one(rec, residue, strict):
                continue
            # residue had no linear moment pivot
            forced = self._forced_zero(residue)
            if forced is not None:
                self._add_binding(forced, self.space.const(0))
                rec.status = "forced"
                rec.pivot = forced
                self.forced.append((rec.label, forced))
                continue
            if strict:
                raise ReductionError(f"nonlinear leading term in {rec.label}")
            rec.status = "unresolved"
            self.unresolved.append(rec.label)
        # final residues for the report
        for rec in self.records:
            rec.residue = self.weak_reduce(rec.truncated)
            if rec.status == "pending":
                rec.status = "dependent" if rec.residue.is_zero() else "unresolved"
        self._solved = True
        return self

    def _parameter_only(self, e: ScalarExpr) -> bool:
        table = self.space.table
        return all(table.symbols[s].kind == "parameter" for s in e.symbols())

    def _linear_candidates(self, residue: ScalarExpr, kinds=("moment",)):
        table = self.space.table
        out = {}
        syms = sorted(residue.symbols())
        for s in syms:
            if table.symbols[s].kind not in kinds:
                continue
            if s in self.table:
                continue
            linear = True
            for mono, _ in residue.num.items():
                for si, e in mono:
                    if si == s and e > 1:
                        linear = False
                        break
                if not linear:
                    break
            if not linear:
                continue
            coeff = residue.diff(s)
            if coeff.is_zero():
                continue
            if any(table.symbols[x].kind == "moment" for x in coeff.symbols()):
                continue
            out[s] = coeff
        return out

    def _solve_one(self, rec, residue, strict) -> bool:
        space = self.space
        pivot = None
        elim = self.options.eliminate_expectation
        if elim is not None and elim not in self.table:
            exp_cands = self._linear_candidates(residue, kinds=("expectation",))
            if elim in exp_cands:
                pivot = elim
        if pivot is None:
            cands = self._linear_candidates(residue)
            if not cands:
                return False
            pivot = self._choose_pivot(cands)
        coeff = residue.diff(pivot)
        rest = residue - coeff * space.sym(pivot)
        value = -rest / coeff
        self._add_binding(pivot, self.weak_reduce(value))
        rec.status = "solved"
        rec.pivot = pivot
        return True

    def _choose_pivot(self, cands: dict) -> int:
        for p in self.options.prefer_pivots:
            if p in cands:
                return p
        table = self.space.table

        def key(s):
            exps = table.symbols[s].payload[1]
            involves_time = (self.options.time_pair is not None
                             and any(exps[self.options.time_pair]))
            coeff_const = cands[s].const_value() is not None
            return (not involves_time, not coeff_const, exps)

        return min(cands, key=key)

    def _forced_zero(self, residue: ScalarExpr):
        """Detect a residue of the form coeff * x^k for a single moment x."""
        table = self.space.table
        if len(residue.num) != 1:
            return None
        (mono, _), = residue.num.items()
        moments = [(s, e) for s, e in mono if table.symbols[s].kind == "moment"]
        if len(moments) != 1:
            return None
        s, e = moments[0]
        if e < 2 or s in self.table:
            return None
        return s

    def _add_binding(self, sym: int, value: ScalarExpr):
        value = self.weak_reduce(value)
        self.assumptions |= value.assumptions
        self.table[sym] = value
        self.solved_order.append(sym)
        # keep the table triangular: no solved symbol in any right-hand side
        for s, e in list(self.table.items()):
            if s == sym:
                continue
            if sym in e.symbols():
                self.table[s] = self.weak_reduce(e.substitute({sym: value}))

    # -- inspection -----------------------------------------------------------------

    def independent_records(self):
        return [r for r in self.records
                if r.status in ("solved", "forced", "hard", "unresolved")]

    def record(self, label: str) -> ConstraintRecord:
        for rec in self.records:
            if rec.label == label:
                return rec
        raise ReductionError(f"no constraint {label!r}")

    def generators(self):
        """Expectation symbols plus declared moments of order <= N."""
        table = self.space.table
        gens = []
        for pair in range(self.space.npairs):
            qi, pi = self.space._exp_idx[pair]
            gens.extend((qi, pi))
        for sym in self.space.moment_symbols():
            if self.N is None or table.symbols[sym].grade <= self.N:
                gens.append(sym)
        return gens

    def residual_generators(self):
        return [g for g in self.generators() if g not in self.table]

    def inconsistency_report(self) -> dict:
        soft = []
        for label, sym in self.forced:
            if sym in self.options.physical:
                soft.append((label, sym))
        for sym, val in self.table.items():
            if sym in self.options.physical and val.is_zero():
                entry = ("<table>", sym)
                if entry not in soft and not any(s == sym for _, s in soft):
                    soft.append(entry)
        return {
            "hard": list(self.hard),
            "soft": soft,
            "consistent": not self.hard and not soft,
        }

    # -- gauge flows ------------------------------------------------------------------

    def gauge_flow(self, expr: ScalarExpr, name: str = "", generators=None) -> dict:
        """Flow generated on the constraint surface: g -> {g, expr}, reduced."""
        flows = {}
        gens = self.residual_generators() if generators is None else generators
        for g in gens:
            val = self.space.poisson_bracket(self.space.sym(g), expr)
            val = self.weak_reduce(val)
            if not val.is_zero():
                flows[g] = val
        return {"name": name, "flows": flows}

    def flow_rank(self, exprs) -> int:
        gens = self.residual_generators()
        rows = []
        for e in exprs:
            fl = self.gauge_flow(e)["flows"]
            rows.append([fl.get(g, self.space.const(0)) for g in gens])
        return matrix_rank(self.space, rows)

    # -- observables --------------------------------------------------------------------

    def default_observable_candidates(self):
        """Residual moments plus hbar, the baseline observable ansatz."""
        table = self.space.table
        out = []
        for g in self.residual_generators():
            if table.symbols[g].kind == "moment":
                out.append((table.name(g), self.space.sym(g)))
        out.append(("hbar", self.space.hbar_expr))
        return out

    def find_observables(self, candidates=None, names_prefix: str = "O",
                         keep_trivial: bool = False):
        """Basis of candidate-span elements weakly commuting with all constraints.

        candidates: list of (label, ScalarExpr).  Unknown coefficients are
        Gaussian rationals; the linear system collects, per constraint and
        per ring monomial, the reduced bracket coefficients.  Combinations
        that vanish on the constraint surface (i.e. constraint combinations)
        are dropped unless keep_trivial is set.
        """
        space = self.space
        if candidates is None:
            candidates = self.default_observable_candidates()
        deduped = []
        for label, expr in candidates:
            if expr.is_zero():
                continue
            if any(expr.equals(e) for _, e in deduped):
                continue
            deduped.append((label, expr))
        candidates = deduped
        active = [r for r in self.records if r.status != "dependent"]
        rows = []
        for rec in active:
            brs = []
            for _, cand in candidates:
                br = space.poisson_bracket(cand, rec.truncated)
                brs.append(self.weak_reduce(br))
            dens = []
            for b in brs:
                if poly_is_const(b.den) is None and not any(
                        d == b.den for d in dens):
                    dens.append(b.den)
            lcd = space.const(1)
            for d in dens:
                lcd = lcd * ScalarExpr.from_poly(space.table, d)
            cleared = []
            for b in brs:
                v = b * lcd
                if poly_is_const(v.den) is None:
                    raise ReductionError("could not clear denominators")
                cleared.append(v)
            monos = set()
            for v in cleared:
                monos.update(v.num)
            for mono in sorted(monos):
                row = {}
                for j, v in enumerate(cleared):
                    c = v.num.get(mono)
                    if c is not None and not c.is_zero():
                        row[j] = c
                if row:
                    rows.append(row)
        basis = nullspace_gq(rows, len(candidates))
        out = []
        count = 0
        for vec in basis:
            expr = space.const(0)
            support = []
            for j, coef in enumerate(vec):
                if not coef.is_zero():
                    expr = expr + space.const(coef) * candidates[j][1]
                    support.append(candidates[j][0])
            if expr.is_zero():
                continue
            reduced = self.weak_reduce(expr)
            if reduced.is_zero() and not keep_trivial:
                continue
            count += 1
            out.append({"name": f"{names_prefix}{count}", "expression": expr,
                        "reduced": reduced, "support": support,
                        "verified": self.verify_observable(expr)})
        return out

    def verify_observable(self, expr: ScalarExpr) -> bool:
        for rec in self.records:
            br = self.space.poisson_bracket(expr, rec.truncated)
            if not self.weak_reduce(br).is_zero():
                return False
        return True

    def observable_membership(self, expr: ScalarExpr) -> bool:
        """Whether expr weakly commutes with every constraint (is observable)."""
        return self.verify_observable(expr)

    # -- gauge fixing and Dirac structure ---------------------------------------------

    def gauge_fix(self, conditions):
        """Append gauge conditions (sym == value) to the solved table."""
        for sym, value in conditions:
            expr = self.space.sym(sym) - value
            residue = self.weak_reduce(expr)
            if residue.is_zero():
                self.gauge_conditions.append((sym, value))
                continue
            cands = self._linear_candidates(residue)
            pick = sym if sym in cands else (min(cands) if cands else None)
            if pick is None:
                raise ReductionError("gauge condition is not solvable")
            coeff = residue.diff(pick)
            rest = residue - coeff * self.space.sym(pick)
            self._add_binding(pick, self.weak_reduce(-rest / coeff))
            self.gauge_conditions.append((sym, value))
        return self

    def dirac_structure(self, phis):
        """Second-class matrix Delta_ij = {phi_i, phi_j} on the surface, inverted."""
        space = self.space
        labels = [lbl for lbl, _ in phis]
        exprs = [e for _, e in phis]
        n = len(exprs)
        delta = [[space.const(0)] * n for _ in range(n)]
        for i in range(n):
            for j in range(i + 1, n):
                val = self.weak_reduce(space.poisson_bracket(exprs[i], exprs[j]))
                delta[i][j] = val
                delta[j][i] = -val
        try:
            inv = invert_matrix(space, delta)
        except LinAlgError as err:
            kind, witness = err.args[0]
            text = None
            if witness is not None:
                text = [str(w) for w in witness]
            raise ReductionError(
                ("gauge conditions do not fix second-class set", text)) from None
        return DiracStructure(self, labels, exprs, delta, inv)

    # -- reality and uncertainty ------------------------------------------------------

    def uncertainty_report(self, pair: int) -> dict:
        """G^qq G^pp - (G^qp)^2 - hbar^2/4 for one pair, evaluated on the surface."""
        space = self.space
        zeros = [(0, 0)] * space.npairs

        def mom(a, b):
            exps = list(zeros)
            exps[pair] = (a, b)
            return space.moment(tuple(exps))

        combo = (mom(0, 2) * mom(2, 0) - mom(1, 1) ** 2
                 - space.hbar_expr ** 2 / space.const(4))
        value = self.weak_reduce(combo, truncate=False)
        if value.is_zero():
            verdict = "saturated"
        else:
            verdict = "satisfied-conditionally"
            if value.is_polynomial() and len(value.num) == 1:
                (mono, c), = value.num.items()
                only_hbar = all(space.table.symbols[s].kind == "parameter"
                                for s, _ in mono)
                if only_hbar and c.is_real() and c.re < 0:
                    verdict = "violated-as-real"
        return {"pair": pair, "value": value, "verdict": verdict}

    def reality_report(self, named_exprs) -> list:
        """Imaginary parts kinematical variables must carry for real observables."""
        out = []
        table = self.space.table
        for name, expr in named_exprs:
            reduced = self.weak_reduce(expr, truncate=False)
            real_num, imag_num = {}, {}
            for mono, c in reduced.num.items():
                if c.re != 0:
                    real_num[mono] = GaussRat(c.re)
                if c.im != 0:
                    imag_num[mono] = GaussRat(c.im)
            real_part = ScalarExpr(table, real_num, dict(reduced.den))
            imag_part = ScalarExpr(table, imag_num, dict(reduced.den))
            has_moment = any(table.symbols[s].kind == "moment"
                             for s in imag_part.symbols())
            if imag_part.is_zero():
                condition = None
            elif not has_moment:
                # Re(expr) is manifestly real only if the kinematical part
                # carries the opposite imaginary value
                condition = ("imag-of", real_part, -imag_part)
            else:
                condition = ("mixed", real_part, imag_part)
            out.append({"name": name, "reduced": reduced, "condition": condition})
        return out

    # -- relational solutions -----------------------------------------------------------

    def relational_solution(self, observables, target: ScalarExpr,
                            internal_time=None) -> ScalarExpr:
        """Express target through internal time and named observables.

        observables: list of (aux symbol index, defining expression, preferred
        symbol to eliminate).  Each definition O = expr is reduced on the
        surface (gauge included) and solved for its preferred kinematical
        symbol, falling back to the first linear one still present; the
        internal time itself is never eliminated.  The target is rewritten to
        a fixpoint, so table substitutions that reintroduce eliminated
        symbols are chased through.
        """
        space = self.space
        table = space.table
        subs: dict[int, ScalarExpr] = {}
        eliminated: set[int] = set()
        for aux, definition, preferred in observables:
            expr = self.weak_reduce(definition, truncate=False)
            expr = self._apply_subs(expr, subs)
            pick = None
            if (preferred is not None and preferred not in eliminated
                    and preferred != internal_time):
                if self._appears_linearly(expr, preferred):
                    pick = preferred
            if pick is None:
                for s in sorted(expr.symbols()):
                    kind = table.symbols[s].kind
                    if kind not in ("expectation", "moment"):
                        continue
                    if s in eliminated or s == internal_time:
                        continue
                    if self._appears_linearly(expr, s):
                        pick = s
                        break
            if pick is None:
                raise ReductionError(
                    f"observable {table.name(aux)} resolves no new symbol")
            coeff = expr.diff(pick)
            rest = expr - coeff * space.sym(pick)
            subs[pick] = (space.sym(aux) - rest) / coeff
            eliminated.add(pick)
        work = target
        for _ in range(16):
            nxt = self._apply_subs(self.weak_reduce(work, truncate=False), subs)
            if nxt.equals(work):
                break
            work = nxt
        return work

    def _apply_subs(self, e: ScalarExpr, subs: dict) -> ScalarExpr:
        for _ in range(16):
            hit = {s: v for s, v in subs.items() if s in e.symbols()}
            if not hit:
                return e
            e = e.substitute(hit)
        return e

    def _appears_linearly(self, e: ScalarExpr, s: int) -> bool:
        if s not in e.symbols():
            return False
        for mono, _ in e.num.items():
            for si, ex in mono:
                if si == s and ex > 1:
                    return False
        for mono in e.den:
            for si, _ in mono:
                if si == s:
                    return False
        coeff = e.diff(s)
        return not coeff.is_zero() and s not in coeff.symbols()


class DiracStructure:
    def __init__(self, system: TruncatedSystem, labels, exprs, delta, inverse):
        self.system = system
        self.labels = labels
        self.exprs = exprs
        self.delta = delta
        self.inverse = inverse

    def check_inverse(self) -> bool:
        space = self.system.space
        n = len(self.delta)
        for i in range(n):
            for j in range(n):
                acc = space.const(0)
                for k in range(n):
                    acc = acc + self.delta[i][k] * self.inverse[k][j]
                want = space.const(1 if i == j else 0)
                if not acc.equals(want):
                    return False
        return True

    def dirac_bracket(self, f: ScalarExpr, g: ScalarExpr) -> ScalarExpr:
        space = self.system.space
        sysr = self.system
        raw = sysr.weak_reduce(space.poisson_bracket(f, g), truncate=False)
        fb = [sysr.weak_reduce(space.poisson_bracket(f, phi), truncate=False)
              for phi in self.exprs]
        gb = [sysr.weak_reduce(space.poisson_bracket(phi, g), truncate=False)
              for phi in self.exprs]
        corr = space.const(0)
        for i in range(len(self.exprs)):
            if fb[i].is_zero():
                continue
            for j in range(len(self.exprs)):
                if gb[j].is_zero() or self.inverse[i][j].is_zero():
                    continue
                corr = corr + fb[i] * self.inverse[i][j] * gb[j]
        return sysr.weak_reduce(raw - corr, truncate=False)
