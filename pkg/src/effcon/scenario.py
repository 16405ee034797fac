"""Scenario files: declarative setup for a constrained system.

A scenario is a flat sectioned text file (``key = value`` lines).  Unknown
sections or keys are rejected; the file's sha256 goes into every report so
outputs are traceable to their inputs.
"""

from __future__ import annotations

import hashlib
from importlib import resources

from .constraints import seed_constraint_set
from .moments import MomentSpace
from .reduction import SystemOptions, build_system


class ScenarioError(ValueError):
    pass


_SECTIONS = {
    "system": {"name", "pair", "time_pair", "parameters", "constraint"},
    "generation": {"nmax", "kmax", "power_word"},
    "truncation": {"order", "mode", "sharp_admission"},
    "solve": {"eliminate", "prefer_pivots"},
    "physical": {"moments"},
    "gauge": None,          # any "moment = expression" line
    "second_class": None,   # any "label = expression" line
    "observables": {"generators", "coefficients", "extra"},
    "named": None,          # any "name = expression" line
    "relational": {"observables", "time", "targets"},
    "checks": {"uncertainty_pairs", "reality"},
}


class Scenario:
    def __init__(self, raw: str, source: str = "<memory>"):
        self.raw = raw
        self.source = source
        self.sha256 = hashlib.sha256(raw.encode()).hexdigest()
        self.sections: dict[str, list[tuple[str, str]]] = {}
        self._parse(raw)

    def _parse(self, raw: str):
        current = None
        for lineno, line in enumerate(raw.splitlines(), start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if text.startswith("[") and text.endswith("]"):
                current = text[1:-1].strip()
                if current not in _SECTIONS:
                    raise ScenarioError(f"line {lineno}: unknown section [{current}]")
                self.sections.setdefault(current, [])
                continue
            if current is None:
                raise ScenarioError(f"line {lineno}: key outside any section")
            if "=" not in text:
                raise ScenarioError(f"line {lineno}: expected key = value")
            key, value = text.split("=", 1)
            key, value = key.strip(), value.strip()
            allowed = _SECTIONS[current]
            if allowed is not None and key not in allowed:
                raise ScenarioError(
                    f"line {lineno}: unknown key {key!r} in [{current}]")
            self.sections[current].append((key, value))

    # -- typed accessors ----------------------------------------------------

    def _all(self, section: str, key: str):
        return [v for k, v in self.sections.get(section, []) if k == key]

    def _one(self, section: str, key: str, default=None, required=False):
        vals = self._all(section, key)
        if not vals:
            if required:
                raise ScenarioError(f"missing {key!r} in [{section}]")
            return default
        if len(vals) > 1:
            raise ScenarioError(f"duplicate {key!r} in [{section}]")
        return vals[0]

    @property
    def name(self) -> str:
        return self._one("system", "name", required=True)

    def pairs(self):
        out = []
        for v in self._all("system", "pair"):
            parts = v.split()
            if len(parts) != 2:
                raise ScenarioError(f"pair needs two labels, got {v!r}")
            out.append((parts[0], parts[1]))
        if not out:
            raise ScenarioError("scenario declares no canonical pairs")
        return out

    def parameters(self):
        v = self._one("system", "parameters", default="")
        return [p.strip() for p in v.split(",") if p.strip()]

    def pair_items(self, section, wildcard=True):
        return list(self.sections.get(section, []))


def parse_scenario(text: str, source: str = "<memory>") -> Scenario:
    return Scenario(text, source)


def load_scenario(path: str) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return Scenario(fh.read(), source=path)


def shipped_scenario(name: str) -> Scenario:
    ref = resources.files("effcon") / "scenarios" / f"{name}.scn"
    return Scenario(ref.read_text(encoding="utf-8"), source=f"shipped:{name}")


def shipped_golden(name: str) -> str:
    ref = resources.files("effcon") / "scenarios" / f"{name}.golden"
    return ref.read_text(encoding="utf-8")


class Runtime:
    """A scenario bound to its symbol universe and constraint tower."""

    def __init__(self, scenario: Scenario, order=None, mode=None,
                 kmax=None, time_pair=None):
        self.scenario = scenario
        sc = scenario
        self.space = MomentSpace(sc.pairs(), parameters=sc.parameters())
        self.constraint_op = self.space.parse_operator(
            sc._one("system", "constraint", required=True))
        self.nmax = int(sc._one("generation", "nmax", default="3"))
        self.kmax = int(kmax if kmax is not None
                        else sc._one("generation", "kmax", default="3"))
        power_word = sc._one("generation", "power_word")
        if power_word is None:
            self.power_pair = 0
        else:
            self.power_pair = self.space.pair_of_label(power_word)
        order_s = sc._one("truncation", "order", default="2")
        self.order = (None if str(order_s) == "inf" else int(order_s)) \
            if order is None else order
        self.mode = mode or sc._one("truncation", "mode", default="graded")
        self.sharp_admission = sc._one("truncation", "sharp_admission",
                                       default="all")
        tp = time_pair or sc._one("system", "time_pair")
        self.time_pair = None if tp is None else self.space.pair_of_label(tp)
        self._cset = None
        self._named = None

    # -- pieces ------------------------------------------------------------------

    @property
    def cset(self):
        if self._cset is None:
            self._cset = seed_constraint_set(
                self.space, self.constraint_op, nmax=self.nmax,
                kmax=self.kmax, power_pair=self.power_pair)
        return self._cset

    def options(self) -> SystemOptions:
        sc = self.scenario
        eliminate = sc._one("solve", "eliminate")
        elim_idx = None if eliminate is None else self.space.table.index(eliminate)
        prefer = []
        pv = sc._one("solve", "prefer_pivots", default="")
        for item in pv.split(","):
            item = item.strip()
            if item:
                e = self.space.parse_expr(item)
                prefer.append(_single_symbol(self.space, e, item))
        physical = set()
        for v in sc._all("physical", "moments"):
            for item in v.split(","):
                item = item.strip()
                if item:
                    e = self.space.parse_expr(item)
                    physical.add(_single_symbol(self.space, e, item))
        return SystemOptions(time_pair=self.time_pair,
                             eliminate_expectation=elim_idx,
                             prefer_pivots=prefer, physical=physical,
                             sharp_admission=self.sharp_admission)

    def system(self, order=None, mode=None, solved=True, strict=False):
        sysm = build_system(self.cset,
                            self.order if order is None else order,
                            self.mode if mode is None else mode,
                            self.options())
        if solved:
            sysm.solve(strict=strict)
        return sysm

    def named_expressions(self) -> dict:
        if self._named is None:
            out = {}
            for key, value in self.scenario.sections.get("named", []):
                out[key] = self.space.parse_expr(value)
            self._named = out
        return self._named

    def named(self, name: str):
        try:
            return self.named_expressions()[name]
        except KeyError:
            raise ScenarioError(f"no named expression {name!r}") from None

    def gauge_conditions(self):
        out = []
        for key, value in self.scenario.sections.get("gauge", []):
            sym = _single_symbol(self.space, self.space.parse_expr(key), key)
            out.append((sym, self.space.parse_expr(value)))
        return out

    def second_class(self):
        out = []
        for key, value in self.scenario.sections.get("second_class", []):
            out.append((key, self.space.parse_expr(value)))
        return out

    def observable_candidates(self, system):
        sc = self.scenario
        gens = [g.strip() for g in
                sc._one("observables", "generators", default="").split(",")
                if g.strip()]
        coeffs = [c.strip() for c in
                  sc._one("observables", "coefficients", default="1").split(",")
                  if c.strip()]
        extra = [e.strip() for e in
                 sc._one("observables", "extra", default="").split(",")
                 if e.strip()]
        table = self.space.table
        gen_exprs = [(g, self.space.parse_expr(g)) for g in gens]
        for m in self.space.moment_symbols():
            if system.N is None or table.symbols[m].grade <= system.N:
                gen_exprs.append((table.name(m), self.space.sym(m)))
        out = []
        for cf in coeffs:
            ce = self.space.parse_expr(cf)
            for glabel, ge in gen_exprs:
                label = glabel if cf == "1" else f"({cf})*{glabel}"
                out.append((label, ce * ge))
        for e in extra:
            out.append((e, self.space.parse_expr(e)))
        return out

    def relational_setup(self):
        sc = self.scenario
        spec = sc._one("relational", "observables", default="")
        out = []
        for item in spec.split(","):
            item = item.strip()
            if not item:
                continue
            if ":" not in item:
                raise ScenarioError(f"relational observable needs name:symbol, got {item!r}")
            name, prefer = item.split(":", 1)
            name, prefer = name.strip(), prefer.strip()
            defn = self.named(name)
            aux = self.space.table.get(name)
            if aux is None:
                aux = self.space.add_aux_symbol(name)
            prefer_sym = _single_symbol(self.space, self.space.parse_expr(prefer),
                                        prefer)
            out.append((aux, defn, prefer_sym))
        time_label = sc._one("relational", "time")
        time_sym = None
        if time_label is not None:
            time_sym = self.space.table.index(time_label)
        targets = [t.strip() for t in
                   sc._one("relational", "targets", default="").split(",")
                   if t.strip()]
        return out, time_sym, targets

    def uncertainty_pairs(self):
        v = self.scenario._one("checks", "uncertainty_pairs", default="")
        return [self.space.pair_of_label(x.strip())
                for x in v.split(",") if x.strip()]

    def reality_names(self):
        v = self.scenario._one("checks", "reality", default="")
        return [x.strip() for x in v.split(",") if x.strip()]


def _single_symbol(space, expr, text: str) -> int:
    syms = expr.symbols()
    if len(syms) != 1:
        raise ScenarioError(f"{text!r} does not name a single symbol")
    (sym,) = syms
    want = {((sym, 1),): True}
    if len(expr.num) != 1 or set(expr.num) != set(want) \
            or not expr.num[((sym, 1),)].is_one() or not expr.is_polynomial():
        raise ScenarioError(f"{text!r} does not name a single symbol")
    return sym
