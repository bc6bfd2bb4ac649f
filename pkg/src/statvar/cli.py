"""Command-line front end: ``statvar run | list | roots``.

Scenario files are TOML.  Minimal example::

    seed = 0
    checks = ["classify", "codazzi"]

    [subject]
    chart = "normal_distributions"

    [expect]
    chc = 2.0

See README.md for every key.
"""
from __future__ import annotations

import argparse
import json
import math
import re
import sys
import time
import warnings
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, catalog
from . import manifold as mf
from . import maps as mp
from . import variation as vr
from .errors import BiharmonicityViolation, ConfigError, StatVarError, UnknownEntry
from .expr import parse_expr
from .jets import Box
from .quadrature import QuadratureRule

CHECKS = ("classify", "codazzi", "biharmonicity", "first_variation", "second_variation",
          "oracle_compare", "stability_probe")
DEFAULT_TOLERANCES = {
    "codazzi": 1e-8,
    "classification": 1e-6,
    "biharmonicity": 1e-5,
    "oracle": 1e-3,
}
_TOP_KEYS = {"seed", "checks", "subject", "omega", "quadrature", "tolerances", "mode", "probes",
             "expect", "grid", "description"}


# --- config -----------------------------------------------------------------------

def _line_of(text: str, key: str):
    """1-based line of the first assignment or table header naming ``key``."""
    assign = re.compile(rf'^\s*"?{re.escape(key)}"?\s*=')
    header = re.compile(rf'^\s*\[+\s*([\w."]+\.)?"?{re.escape(key)}"?\s*\]')
    inline = re.compile(rf'[{{,]\s*"?{re.escape(key)}"?\s*=')
    lines = text.splitlines()
    for pat in (assign, header, inline):
        for i, line in enumerate(lines, 1):
            if pat.search(line):
                return i
    return None


class Scenario:
    """Validated scenario built from a parsed config mapping."""

    def __init__(self, data: dict, text: str = ""):
        self.raw = data
        self.text = text
        unknown = set(data) - _TOP_KEYS
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"unknown key '{key}'", key, _line_of(text, key))
        self.seed = self._int("seed", data.get("seed", 0))
        self.grid = self._int("grid", data.get("grid", 5))
        self.checks = self._checks(data.get("checks", []))
        self.tolerances = dict(DEFAULT_TOLERANCES)
        tol = data.get("tolerances", {})
        if not isinstance(tol, dict):
            raise ConfigError("tolerances must be a table", "tolerances", _line_of(text, "tolerances"))
        for k, v in tol.items():
            if k not in DEFAULT_TOLERANCES:
                raise ConfigError(f"unknown tolerance '{k}'", f"tolerances.{k}", _line_of(text, k))
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0:
                raise ConfigError(f"tolerance '{k}' must be a positive number", f"tolerances.{k}",
                                  _line_of(text, k))
            self.tolerances[k] = float(v)
        try:
            self.mode = vr.HMode.parse(data.get("mode", "general"))
        except ValueError as exc:
            raise ConfigError(str(exc), "mode", _line_of(text, "mode")) from None
        self.expect = data.get("expect", {})
        self.probes = self._probes(data.get("probes", {}))
        self.subject_kind, self.subject = self._subject(data.get("subject"))
        self.omega = self._omega(data.get("omega"))
        q = data.get("quadrature", {})
        order = self._int("quadrature.order", q.get("order", 8))
        panels = q.get("panels", 4)
        try:
            self.quad = QuadratureRule.gauss_legendre(self.omega, order, panels)
            self.quad_shape = (order, panels)
        except StatVarError as exc:
            raise ConfigError(str(exc), "quadrature", _line_of(text, "quadrature")) from None

    def _int(self, field, v):
        if not isinstance(v, int) or isinstance(v, bool):
            raise ConfigError(f"'{field}' must be an integer", field, _line_of(self.text, field.split(".")[-1]))
        return v

    def _checks(self, checks):
        if not isinstance(checks, list):
            raise ConfigError("checks must be a list", "checks", _line_of(self.text, "checks"))
        out = []
        for i, c in enumerate(checks):
            name = c if isinstance(c, str) else (c.get("name") if isinstance(c, dict) else None)
            if name not in CHECKS:
                raise ConfigError(f"unknown check {name!r}; expected one of {', '.join(CHECKS)}",
                                  f"checks[{i}]", _line_of(self.text, "checks"))
            out.append(name)
        return out

    def _probes(self, p):
        if not isinstance(p, dict):
            raise ConfigError("probes must be a table", "probes", _line_of(self.text, "probes"))
        allowed = {"count", "profile", "max_degree", "exponents", "min_fraction"}
        for k in p:
            if k not in allowed:
                raise ConfigError(f"unknown probes key '{k}'", f"probes.{k}", _line_of(self.text, k))
        return {"count": self._int("probes.count", p.get("count", 5)),
                "profile": p.get("profile", "poly_window"),
                "max_degree": self._int("probes.max_degree", p.get("max_degree", 4)),
                "exponents": [float(v) for v in p.get("exponents", [])],
                "min_fraction": float(p.get("min_fraction", 0.3))}

    def _subject(self, s):
        if not isinstance(s, dict):
            raise ConfigError("missing [subject] table", "subject", None)
        kinds = [k for k in ("chart", "map", "immersion", "inline_chart", "inline_map") if k in s]
        if len(kinds) != 1:
            raise ConfigError("subject needs exactly one of chart, map, immersion, inline_chart, inline_map",
                              "subject", _line_of(self.text, "subject"))
        kind = kinds[0]
        params = s.get("params", {})
        try:
            if kind == "chart":
                return "chart", catalog.chart(s["chart"], params)
            if kind == "map":
                return "map", catalog.map(s["map"], params)
            if kind == "immersion":
                return "immersion", catalog.immersion(s["immersion"], params)
            if kind == "inline_chart":
                return "chart", _inline_chart(s["inline_chart"], "subject.inline_chart")
            return "map", _inline_map(s["inline_map"], "subject.inline_map")
        except UnknownEntry:
            raise
        except _InlineError as exc:
            raise ConfigError(str(exc), exc.field, _line_of(self.text, exc.field.split(".")[-1])) from None
        except StatVarError as exc:
            raise ConfigError(str(exc), f"subject.{kind}", _line_of(self.text, kind)) from None
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid subject: {exc}", f"subject.{kind}", _line_of(self.text, kind)) from None

    @property
    def chart(self) -> mf.ChartModel:
        if self.subject_kind == "chart":
            return self.subject
        if self.subject_kind == "map":
            return self.subject.target
        return self.subject.induced

    @property
    def map(self) -> mp.MapModel | None:
        if self.subject_kind == "map":
            return self.subject
        if self.subject_kind == "immersion":
            return self.subject.map
        return None

    def _omega(self, om):
        base = self.map.source.domain if self.map is not None else self.chart.domain
        if om is None:
            return base.inset(0.1)
        try:
            box = Box(tuple(float(v) for v in om["lower"]), tuple(float(v) for v in om["upper"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"omega needs numeric lower/upper: {exc}", "omega",
                              _line_of(self.text, "omega")) from None
        if box.dim != base.dim or not base.contains_box(box):
            raise ConfigError(f"omega {box} must lie inside the domain {base}", "omega",
                              _line_of(self.text, "omega"))
        return box


class _InlineError(Exception):
    def __init__(self, message, field):
        super().__init__(message)
        self.field = field


def _inline_chart(spec: dict, field: str) -> mf.ChartModel:
    try:
        box = Box(tuple(float(v) for v in spec["lower"]), tuple(float(v) for v in spec["upper"]))
        if "dim" in spec and int(spec["dim"]) != box.dim:
            raise _InlineError(f"dim {spec['dim']} does not match the box", f"{field}.dim")
        for key in ("g", "gamma"):
            try:
                np.vectorize(lambda e: parse_expr(str(e), box.dim, box), otypes=[object])(spec[key])
            except StatVarError as exc:
                raise _InlineError(f"inline chart {key}: {exc}", f"{field}.{key}") from None
        return catalog._expr_chart(spec["g"], spec["gamma"], box, spec.get("name", "inline"))
    except KeyError as exc:
        raise _InlineError(f"inline chart is missing {exc}", field) from None
    except StatVarError as exc:
        raise _InlineError(f"inline chart: {exc}", field) from None


def _inline_map(spec: dict, field: str) -> mp.MapModel:
    try:
        src_box = Box(tuple(float(v) for v in spec["lower"]), tuple(float(v) for v in spec["upper"]))
        m = src_box.dim
        source = mp.euclidean_chart(m, src_box)
        if "target" in spec:
            target = catalog.chart(spec["target"], spec.get("target_params", {}))
        else:
            target = _inline_chart(spec["target_inline"], f"{field}.target_inline")
        comps = [parse_expr(str(e), m, src_box) for e in spec["u"]]
        return mp.MapModel(source, target, comps, name=spec.get("name", "inline"))
    except KeyError as exc:
        raise _InlineError(f"inline map is missing {exc}", field) from None
    except StatVarError as exc:
        if isinstance(exc, UnknownEntry):
            raise
        raise _InlineError(f"inline map: {exc}", field) from None


def load_config(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config: {exc}", line=getattr(exc, "lineno", None)) from None
    return Scenario(data, text)


# --- checks ---------------------------------------------------------------------------

def _record(name, status, measured, tolerance):
    return {"name": name, "status": status, "measured": measured, "tolerance": tolerance}


def _grid(sc: Scenario, box: Box):
    return box.grid(sc.grid, inset=0.05)


def _need_map(sc: Scenario, check: str):
    if sc.map is None:
        raise ConfigError(f"check '{check}' needs a map or immersion subject", "checks")
    return sc.map


def _check_classify(sc: Scenario):
    tol = sc.tolerances["classification"]
    rep = mf.classify(sc.chart, _grid(sc, sc.chart.domain), tol)
    measured = {k: v for k, v in rep.to_dict().items() if k not in ("tol", "n_points")}
    failures = []
    exp = sc.expect
    if not rep.codazzi_ok:
        failures.append("codazzi")
    for key, attr in (("hessian", "hessian"), ("conjugate_symmetric", "conjugate_symmetric")):
        if key in exp and bool(exp[key]) != getattr(rep, attr):
            failures.append(key)
    if "chc" in exp and not (rep.chc and abs(rep.chc_constant - float(exp["chc"])) <= tol):
        failures.append("chc")
    if "sectional" in exp and not (rep.constant_sectional
                                   and abs(rep.sectional_constant - float(exp["sectional"])) <= tol):
        failures.append("sectional")
    if "metric_sectional" in exp:
        vals = [mf.sectional_curvature(sc.chart, x) for x in _grid(sc, sc.chart.domain)]
        measured["metric_sectional"] = [min(vals), max(vals)]
        if max(abs(v - float(exp["metric_sectional"])) for v in vals) > tol:
            failures.append("metric_sectional")
    measured["failed"] = failures
    return _record("classify", "fail" if failures else "pass", measured, tol)


def _check_codazzi(sc: Scenario):
    tol = sc.tolerances["codazzi"]
    res = max(mf.codazzi_residual(sc.chart, x) for x in _grid(sc, sc.chart.domain))
    ok = res < tol
    if sc.expect.get("codazzi_broken"):
        ok = res > tol
    return _record("codazzi", "pass" if ok else "fail", res, tol)


def _check_biharmonicity(sc: Scenario):
    u = _need_map(sc, "biharmonicity")
    tol = sc.tolerances["biharmonicity"]
    res = max(float(np.max(np.abs(mp.bitension(u, x)))) for x in _grid(sc, sc.omega))
    ok = res < tol
    if sc.expect.get("non_biharmonic"):
        ok = res > tol
    return _record("biharmonicity", "pass" if ok else "fail", res, tol)


def _probes(sc: Scenario, u):
    p = sc.probes
    return vr.random_probes(u, sc.omega, p["count"], np.random.default_rng(sc.seed),
                            p["max_degree"], p["profile"], p["exponents"], p["min_fraction"])


def _probe_quad(sc: Scenario, V):
    # the energy density is t-independent off supp V, so integrate over the support
    # only; its edges then sit on panel boundaries where the bump loses smoothness
    if V.support is None:
        return sc.omega, sc.quad
    return V.support, QuadratureRule.gauss_legendre(V.support, *sc.quad_shape)


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def _check_first_variation(sc: Scenario):
    u = _need_map(sc, "first_variation")
    tol = sc.tolerances["oracle"]
    gaps, rows = [], []
    for V in _probes(sc, u):
        fam = vr.additive_family(u, V)
        box, q = _probe_quad(sc, V)
        fd = 0.5 * vr.fd_energy_derivatives(fam, box, q, 1)
        fv = vr.first_variation(u, V, box, q)
        gaps.append(_rel(fd, fv))
        rows.append({"fd": fd, "formula": fv})
    worst = max(gaps, default=0.0)
    return _record("first_variation", "pass" if worst < tol else "fail",
                   {"max_relative_gap": worst, "probes": rows}, tol)


def _second_variations(sc: Scenario, u, probes):
    status, vals = "pass", []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", BiharmonicityViolation)
        for V in probes:
            box, q = _probe_quad(sc, V)
            vals.append(vr.second_variation(u, V, box, q, sc.mode,
                                            tol=sc.tolerances["biharmonicity"]))
    if any(issubclass(w.category, BiharmonicityViolation) for w in caught):
        status = "warn"
    return status, vals


def _check_second_variation(sc: Scenario):
    u = _need_map(sc, "second_variation")
    status, vals = _second_variations(sc, u, _probes(sc, u))
    if not all(math.isfinite(v) for v in vals):
        status = "fail"
    return _record("second_variation", status, {"values": vals, "mode": str(sc.mode)}, None)


def _check_oracle(sc: Scenario):
    u = _need_map(sc, "oracle_compare")
    tol = sc.tolerances["oracle"]
    probes = _probes(sc, u)
    status, vals = _second_variations(sc, u, probes)
    rows, gaps = [], []
    for V, sv in zip(probes, vals):
        box, q = _probe_quad(sc, V)
        fd = 0.5 * vr.fd_energy_derivatives(vr.additive_family(u, V), box, q, 2)
        gaps.append(_rel(fd, sv))
        rows.append({"fd": fd, "formula": sv})
    worst = max(gaps, default=0.0)
    if worst >= tol:
        status = "fail"
    return _record("oracle_compare", status, {"max_relative_gap": worst, "probes": rows}, tol)


def _check_stability(sc: Scenario):
    u = _need_map(sc, "stability_probe")
    probes = _probes(sc, u)
    verdict = vr.stability_verdict(u, sc.omega, probes, sc.quad, sc.mode,
                                   tol=sc.tolerances["biharmonicity"])
    status = "fail" if verdict.negative else "pass"
    return _record("stability_probe", status,
                   {"verdict": verdict.status, "min_value": verdict.min_value,
                    "values": verdict.values}, 0.0)


_RUNNERS = {
    "classify": _check_classify,
    "codazzi": _check_codazzi,
    "biharmonicity": _check_biharmonicity,
    "first_variation": _check_first_variation,
    "second_variation": _check_second_variation,
    "oracle_compare": _check_oracle,
    "stability_probe": _check_stability,
}


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer, int)) and not isinstance(obj, bool):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def run_scenario(sc: Scenario) -> dict:
    records = []
    for name in sc.checks:
        t0 = time.perf_counter()
        try:
            rec = _RUNNERS[name](sc)
        except ConfigError:
            raise
        except StatVarError as exc:
            rec = _record(name, "fail", {"error": f"{type(exc).__name__}: {exc}"}, None)
        rec["seconds"] = round(time.perf_counter() - t0, 6)
        records.append(_plain(rec))
    return {"toolkit": f"statvar {__version__}", "seed": sc.seed, "config": _plain(sc.raw),
            "checks": records}


def format_machine(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, dict):
        keys = [k for k in ("max_relative_gap", "min_value", "chc_constant", "sectional_constant",
                            "verdict", "mode", "error", "failed") if k in v]
        return ", ".join(f"{k}={_short(v[k])}" for k in keys) or "…"
    return str(v)


def format_human(report: dict) -> str:
    lines = [f"{report['toolkit']}  seed={report['seed']}"]
    for r in report["checks"]:
        tol = "" if r["tolerance"] is None else f"  tol={_short(r['tolerance'])}"
        lines.append(f"{r['status'].upper():5s} {r['name']:18s} {_short(r['measured'])}{tol}"
                     f"  ({r['seconds']:.2f}s)")
    failed = sum(r["status"] == "fail" for r in report["checks"])
    lines.append(f"{len(report['checks'])} checks, {failed} failed")
    return "\n".join(lines) + "\n"


# --- entry point -------------------------------------------------------------------------

def _cmd_run(args) -> int:
    sc = load_config(args.config)
    report = run_scenario(sc)
    text = format_machine(report) if args.format == "machine" else format_human(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 1 if any(r["status"] == "fail" for r in report["checks"]) else 0


def _cmd_list(args) -> int:
    for e in catalog.entries():
        params = ", ".join(f"{k}={v!r}" for k, v in e.params.items())
        print(f"{e.kind:10s} {e.name:26s} ({params})")
        if e.description:
            print(f"{'':37s}{e.description}")
    return 0


def _cmd_roots(args) -> int:
    hi, lo = vr.characteristic_roots(args.p, args.q)
    print(f"{hi:.17g} {lo:.17g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="statvar", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"statvar {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the checks of a scenario file")
    run.add_argument("config")
    run.add_argument("--out", help="write the report here instead of stdout")
    run.add_argument("--format", choices=("human", "machine"), default="human")
    run.set_defaults(func=_cmd_run)
    ls = sub.add_parser("list", help="list catalog entries")
    ls.set_defaults(func=_cmd_list)
    rt = sub.add_parser("roots", help="roots of μ(μ−1) + pμ + q = 0")
    rt.add_argument("p", type=float)
    rt.add_argument("q", type=float)
    rt.set_defaults(func=_cmd_roots)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, UnknownEntry) as exc:
        print(f"statvar: error: {exc}", file=sys.stderr)
        return 2
    except StatVarError as exc:
        print(f"statvar: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
