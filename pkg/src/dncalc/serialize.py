"""Versioned JSON encoding of scenarios, jets, symbols, DN data and reports.

Rational scalars travel as "p/q" strings so exactness survives the round
trip; jets are sparse lists of index/value records carrying their truncation
orders.  Scenario files declare the geometry once and a list of tasks; the
schema is documented in the README and validated here with field-level
messages.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any

from .dn import DNSymbolData
from .errors import ScenarioError
from .geometry import BoundaryMetricJet
from .jets import Jet, JetSpace
from .randomgen import random_metric, random_weight
from .symbols import CJet, FormalSymbol, HomSymbol, SymbolContext, XiPoly

SCHEMA_VERSION = 1


# ---------------------------------------------------------------------------
# scalars and jets


def scalar_to_json(space: JetSpace, value) -> Any:
    return space.backend.to_str(value)


def scalar_from_json(space: JetSpace, data) -> Any:
    if isinstance(data, str):
        return space.backend.from_str(data)
    return space.backend.coerce(data)


def jet_to_json(jet: Jet) -> dict:
    terms = []
    for idx in sorted(jet.c):
        terms.append({"index": list(idx), "value": jet.space.backend.to_str(jet.c[idx])})
    return {
        "radial_order": jet.kr,
        "tangential_order": jet.ky,
        "terms": terms,
    }


def jet_from_json(space: JetSpace, data: dict) -> Jet:
    try:
        kr = int(data["radial_order"])
        ky = int(data["tangential_order"])
        coeffs = {
            tuple(term["index"]): space.backend.from_str(str(term["value"]))
            for term in data.get("terms", [])
        }
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError("malformed jet record: %s" % exc) from None
    return space.jet(coeffs, kr, ky)


def cjet_to_json(v: CJet) -> dict:
    out = {"re": jet_to_json(v.re)}
    if not v.im.is_zero:
        out["im"] = jet_to_json(v.im)
    return out


def cjet_from_json(space: JetSpace, data: dict) -> CJet:
    re = jet_from_json(space, data["re"])
    im = jet_from_json(space, data["im"]) if "im" in data else None
    return CJet(re, im)


# ---------------------------------------------------------------------------
# symbols and DN data


def _poly_to_json(poly: XiPoly) -> dict:
    return {
        "degree": poly.deg,
        "terms": [
            {"xi": list(e), "coeff": cjet_to_json(poly.c[e])} for e in sorted(poly.c)
        ],
    }


def _poly_from_json(space: JetSpace, nxi: int, data: dict) -> XiPoly:
    coeffs = {
        tuple(term["xi"]): cjet_from_json(space, term["coeff"])
        for term in data.get("terms", [])
    }
    return XiPoly(nxi, int(data["degree"]), coeffs)


def homsymbol_to_json(sym: HomSymbol) -> dict:
    return {
        "degree": sym.degree,
        "denominator_power": sym.p,
        "even": _poly_to_json(sym.a),
        "odd": _poly_to_json(sym.b),
    }


def homsymbol_from_json(ctx: SymbolContext, data: dict) -> HomSymbol:
    space = ctx.space
    return HomSymbol(
        ctx,
        int(data["degree"]),
        _poly_from_json(space, ctx.nxi, data["even"]),
        _poly_from_json(space, ctx.nxi, data["odd"]),
        int(data["denominator_power"]),
    )


def metric_upper_to_json(metric: BoundaryMetricJet) -> list:
    nt = metric.n - 1
    return [[jet_to_json(metric.g_upper[a][b]) for b in range(nt)] for a in range(nt)]


def dn_to_json(dn: DNSymbolData) -> dict:
    return {
        "map": dn.map_kind,
        "gauge": dn.gauge_tag,
        "dimension": dn.n,
        "depth": dn.depth,
        "backend": dn.ctx.space.backend.name,
        "base_point": dn.ctx.space.base_point,
        "boundary_metric_upper": metric_upper_to_json(dn.boundary_metric),
        "density_sq": jet_to_json(dn.density_sq),
        "grades": {
            str(j): homsymbol_to_json(dn.symbol.grade(j)) for j in dn.symbol.grades()
        },
    }


def dn_from_json(data: dict) -> DNSymbolData:
    n = int(data["dimension"])
    space = JetSpace(n, data.get("base_point", "p0"), data.get("backend", "rational"))
    upper = [
        [jet_from_json(space, cell) for cell in row]
        for row in data["boundary_metric_upper"]
    ]
    bmetric = BoundaryMetricJet.from_upper(upper)
    depth = int(data["depth"])
    comps = {}
    for key, rec in data["grades"].items():
        comps[int(key)] = homsymbol_from_json(bmetric.ctx, rec)
    symbol = FormalSymbol(bmetric.ctx, comps, 1, 2 - depth)
    density_sq = jet_from_json(space, data["density_sq"])
    return DNSymbolData(
        data["map"], data.get("gauge"), symbol, density_sq, bmetric, n, depth
    )


# ---------------------------------------------------------------------------
# scenarios


VALID_TASK_KINDS = (
    "factorize",
    "dn",
    "reconstruct",
    "counterexample",
    "validate-disk",
)

RECONSTRUCTION_METHODS = (
    "first-order",
    "metric-known-weight",
    "weight-scalar",
    "weight-gauge",
    "volume-gauge",
    "volume-scalar",
)


class Scenario:
    """Validated scenario: geometry plus an ordered task list."""

    def __init__(self, raw: dict, backend_override: str | None = None):
        if not isinstance(raw, dict):
            raise ScenarioError("scenario must be a JSON object")
        version = raw.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ScenarioError(
                "unsupported schema_version %r (expected %d)" % (version, SCHEMA_VERSION)
            )
        self.raw = raw
        self.n = self._int_field(raw, "dimension", minimum=2)
        trunc = raw.get("truncation")
        if not isinstance(trunc, dict):
            raise ScenarioError("field 'truncation' must be an object")
        self.kr = self._int_field(trunc, "radial", minimum=0, where="truncation")
        self.ky = self._int_field(trunc, "tangential", minimum=0, where="truncation")
        self.depth = self._int_field(raw, "depth", minimum=1)
        backend = backend_override or raw.get("backend", "rational")
        if backend not in ("rational", "float"):
            raise ScenarioError("backend must be 'rational' or 'float'")
        self.backend = backend
        self.base_point = str(raw.get("base_point", "p0"))
        self.seed = int(raw.get("seed", 0))
        self.space = JetSpace(self.n, self.base_point, backend)
        self.metric = self._parse_metric(raw.get("metric", "flat"))
        self.weight = self._parse_weight(raw.get("weight", "zero"))
        tasks = raw.get("tasks")
        if not isinstance(tasks, list) or not tasks:
            raise ScenarioError("field 'tasks' must be a non-empty list")
        self.tasks = []
        for i, task in enumerate(tasks):
            self.tasks.append(self._validate_task(task, i))

    @staticmethod
    def _int_field(obj, name, minimum=None, where=None):
        label = "%s.%s" % (where, name) if where else name
        try:
            value = int(obj[name])
        except KeyError:
            raise ScenarioError("missing field %r" % label) from None
        except (TypeError, ValueError):
            raise ScenarioError("field %r must be an integer" % label) from None
        if minimum is not None and value < minimum:
            raise ScenarioError("field %r must be >= %d" % (label, minimum))
        return value

    def _rng(self):
        import random as _random

        return _random.Random(self.seed)

    def _parse_metric(self, spec) -> BoundaryMetricJet:
        sp = self.space
        nt = self.n - 1
        if spec == "flat":
            rows = [
                [sp.one(self.kr, self.ky) if a == b else sp.zero(self.kr, self.ky) for b in range(nt)]
                for a in range(nt)
            ]
            return BoundaryMetricJet(rows)
        if spec == "random":
            return random_metric(self._rng(), sp, self.kr, self.ky)
        if isinstance(spec, dict):
            rows = [[None] * nt for _ in range(nt)]
            for key, rec in spec.items():
                try:
                    a, b = (int(x) for x in key.split(","))
                except ValueError:
                    raise ScenarioError(
                        "metric keys must look like 'a,b', got %r" % key
                    ) from None
                if not (1 <= a <= nt and 1 <= b <= nt):
                    raise ScenarioError("metric index %r out of range" % key)
                jet = jet_from_json(sp, rec)
                rows[a - 1][b - 1] = jet
                rows[b - 1][a - 1] = jet
            for a in range(nt):
                for b in range(nt):
                    if rows[a][b] is None:
                        rows[a][b] = (
                            sp.one(self.kr, self.ky) if a == b else sp.zero(self.kr, self.ky)
                        )
            return BoundaryMetricJet(rows)
        raise ScenarioError("metric must be 'flat', 'random' or a coefficient table")

    def _parse_weight(self, spec) -> Jet:
        sp = self.space
        if spec == "zero":
            return sp.zero(self.kr, self.ky)
        if spec == "random":
            rng = self._rng()
            rng.random()  # decouple from the metric stream
            return random_weight(rng, sp, self.kr, self.ky)
        if isinstance(spec, dict):
            return jet_from_json(sp, spec)
        raise ScenarioError("weight must be 'zero', 'random' or a jet record")

    def _validate_task(self, task, index) -> dict:
        where = "tasks[%d]" % index
        if not isinstance(task, dict):
            raise ScenarioError("%s must be an object" % where)
        kind = task.get("kind")
        if kind not in VALID_TASK_KINDS:
            raise ScenarioError(
                "%s.kind must be one of %s, got %r" % (where, VALID_TASK_KINDS, kind)
            )
        task = dict(task)
        if kind == "factorize":
            mode = task.setdefault("mode", "scalar")
            if mode not in ("gauge", "scalar"):
                raise ScenarioError("%s.mode must be 'gauge' or 'scalar'" % where)
            gauge = task.setdefault("gauge", "s" if mode == "gauge" else None)
            if mode == "gauge" and gauge not in ("s", "sigma"):
                raise ScenarioError("%s.gauge must be 's' or 'sigma'" % where)
            task.setdefault("verify", True)
        elif kind == "dn":
            map_kind = task.setdefault("map", "lambda0")
            if map_kind not in ("lambda0", "lambda1"):
                raise ScenarioError("%s.map must be 'lambda0' or 'lambda1'" % where)
            gauge = task.setdefault("gauge", "s" if map_kind == "lambda1" else None)
            if map_kind == "lambda1" and gauge not in ("s", "sigma"):
                raise ScenarioError("%s.gauge must be 's' or 'sigma'" % where)
        elif kind == "reconstruct":
            method = task.get("method")
            if method not in RECONSTRUCTION_METHODS:
                raise ScenarioError(
                    "%s.method must be one of %s" % (where, RECONSTRUCTION_METHODS)
                )
            task.setdefault("order", min(3, self.depth - 1))
            presc = task.get("prescribe")
            if method in ("weight-gauge", "volume-gauge"):
                if not isinstance(presc, dict) or len(presc) != 1:
                    raise ScenarioError(
                        "%s.prescribe must fix exactly one of d1V, d2V" % where
                    )
                key = next(iter(presc))
                if key not in ("d1V", "d2V"):
                    raise ScenarioError("%s.prescribe key must be d1V or d2V" % where)
            elif presc is not None:
                raise ScenarioError("%s.prescribe only applies to gauge methods" % where)
        elif kind == "counterexample":
            task.setdefault("depth", self.depth)
        elif kind == "validate-disk":
            task.setdefault("depth", 2)
            modes = task.get("modes", "8:64")
            task["modes"] = _parse_modes(modes, where)
            task.setdefault("weight_rho", ["1/2", "-1", "1/2"])
        return task


def _parse_modes(spec, where) -> list:
    if isinstance(spec, str):
        try:
            lo, hi = (int(x) for x in spec.split(":"))
        except ValueError:
            raise ScenarioError(
                "%s.modes must be 'lo:hi' or a list of integers" % where
            ) from None
        if lo < 1 or hi <= lo:
            raise ScenarioError("%s.modes range is empty" % where)
        modes = []
        k = lo
        while k < hi:
            modes.append(k)
            k = max(k + 1, int(round(k * 2 ** 0.5)))
        modes.append(hi)
        return modes
    if isinstance(spec, list) and all(isinstance(k, int) for k in spec):
        return list(spec)
    raise ScenarioError("%s.modes must be 'lo:hi' or a list of integers" % where)


def load_scenario(path: str, backend_override: str | None = None) -> tuple:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ScenarioError("cannot read scenario file: %s" % exc) from None
    try:
        raw = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ScenarioError(
            "scenario is not valid JSON (line %d column %d): %s"
            % (exc.lineno, exc.colno, exc.msg)
        ) from None
    digest = hashlib.sha256(blob).hexdigest()
    return Scenario(raw, backend_override), digest


def dump_report(report: dict, path: str | None) -> str:
    text = json.dumps(report, indent=2, sort_keys=True) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    return text
