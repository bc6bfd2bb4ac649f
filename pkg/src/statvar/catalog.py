"""Named charts, maps, immersions and variation families with analytic jets."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import BadParams, UnknownEntry
from .expr import parse_expr
from .jets import Box, JetFn, constant, coordinate, zero
from .manifold import ChartModel
from .maps import GraphImmersion, MapModel, Section, euclidean_chart, induce_from_graph
from .variation import VariationFamily, additive_family, bump


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    kind: str
    params: dict
    builder: Callable = field(repr=False, compare=False)
    description: str = ""


_ENTRIES: dict = {}


def _register(name, kind, params, description=""):
    def deco(fn):
        _ENTRIES[(kind, name)] = CatalogEntry(name, kind, dict(params), fn, description)
        return fn
    return deco


def entries(kind: str | None = None) -> list:
    return [e for (k, _), e in sorted(_ENTRIES.items()) if kind is None or k == kind]


def _lookup(kind, name):
    try:
        return _ENTRIES[(kind, name)]
    except KeyError:
        known = ", ".join(e.name for e in entries(kind))
        raise UnknownEntry(f"unknown {kind} {name!r}; known: {known}") from None


def _build(kind, name, params):
    entry = _lookup(kind, name)
    params = dict(params or {})
    extra = set(params) - set(entry.params)
    if extra:
        raise BadParams(f"{kind} {name!r} does not take parameter(s) {sorted(extra)}; "
                        f"expected {sorted(entry.params)}")
    merged = {**entry.params, **params}
    return entry.builder(**merged)


def chart(name: str, params: dict | None = None, **kw) -> ChartModel:
    return _build("chart", name, {**(params or {}), **kw})


def map(name: str, params: dict | None = None, **kw) -> MapModel:  # noqa: A001 - catalog verb
    return _build("map", name, {**(params or {}), **kw})


def immersion(name: str, params: dict | None = None, **kw) -> GraphImmersion:
    return _build("immersion", name, {**(params or {}), **kw})


def family(name: str, params: dict | None = None, **kw) -> VariationFamily:
    return _build("family", name, {**(params or {}), **kw})


# --- helpers ------------------------------------------------------------------------

def _dim(m):
    if int(m) != m or m < 1:
        raise BadParams(f"dimension must be a positive integer, got {m}")
    return int(m)


def _box(lower, upper, what="domain"):
    try:
        b = Box(tuple(float(v) for v in lower), tuple(float(v) for v in upper))
    except (TypeError, ValueError) as exc:
        raise BadParams(f"invalid {what}: {exc}") from exc
    return b


def _num(v) -> str:
    """Expression-grammar literal for a real parameter."""
    return f"({float(v)!r})"


def _expr_chart(g_src, gamma_src, domain, name, meta=None):
    m = domain.dim
    g = [[parse_expr(s, m, domain) for s in row] for row in g_src]
    gam = [[[parse_expr(s, m, domain) for s in row] for row in plane] for plane in gamma_src]
    return ChartModel(g, gam, domain, name, meta)


def _orthant_gamma(m, sign):
    sym = "" if sign > 0 else "-"
    return [[[f"{sym}1/x{k + 1}" if i == j == k else "0" for j in range(m)] for i in range(m)]
            for k in range(m)]


# --- charts ----------------------------------------------------------------------------

@_register("euclidean", "chart", {"m": 2, "lower": None, "upper": None},
           "flat metric with its Levi-Civita connection (Hessian, CHC 0)")
def _euclidean(m, lower, upper):
    m = _dim(m)
    lower = [-2.0] * m if lower is None else lower
    upper = [2.0] * m if upper is None else upper
    return euclidean_chart(m, _box(lower, upper))


@_register("positive_orthant", "chart", {"m": 2, "lower": 0.25, "upper": 4.0},
           "Euclidean metric with ∇_{∂i}∂j = δ_ij/y^i ∂i on the positive orthant (Hessian)")
def _positive_orthant(m, lower, upper):
    m = _dim(m)
    if lower <= 0:
        raise BadParams("positive orthant needs lower > 0")
    g = [["1" if i == j else "0" for j in range(m)] for i in range(m)]
    return _expr_chart(g, _orthant_gamma(m, +1), _box([lower] * m, [upper] * m),
                       f"positive_orthant({m})", {"labels": ["hessian"]})


@_register("positive_orthant_conj", "chart", {"m": 2, "lower": 0.25, "upper": 4.0},
           "conjugate of positive_orthant: Γ^i_ii = −1/y^i (Hessian, CHC 0)")
def _positive_orthant_conj(m, lower, upper):
    m = _dim(m)
    if lower <= 0:
        raise BadParams("positive orthant needs lower > 0")
    g = [["1" if i == j else "0" for j in range(m)] for i in range(m)]
    return _expr_chart(g, _orthant_gamma(m, -1), _box([lower] * m, [upper] * m),
                       f"positive_orthant_conj({m})", {"labels": ["hessian", "chc 0"]})


_FISHER_G = [["1/x2^2", "0"], ["0", "2/x2^2"]]
_MIXTURE = [[["0", "0"], ["0", "0"]], [["1/x2", "0"], ["0", "1/x2"]]]
_EXPONENTIAL = [[["0", "-2/x2"], ["-2/x2", "0"]], [["0", "0"], ["0", "-3/x2"]]]


def _normal_box(xlim, ylower, yupper):
    if ylower <= 0:
        raise BadParams("normal-distribution charts need sigma lower bound > 0")
    return _box([-xlim, ylower], [xlim, yupper])


@_register("normal_distributions", "chart", {"xlim": 2.0, "ylower": 0.25, "yupper": 4.0},
           "normal family (μ, σ) with Fisher metric (dμ² + 2dσ²)/σ² and mixture connection (CHC 2)")
def _normal(xlim, ylower, yupper):
    return _expr_chart(_FISHER_G, _MIXTURE, _normal_box(xlim, ylower, yupper),
                       "normal_distributions", {"labels": ["hessian", "chc 2"]})


@_register("normal_distributions_exp", "chart", {"xlim": 2.0, "ylower": 0.25, "yupper": 4.0},
           "normal family with Fisher metric and exponential connection (Hessian; conjugate CHC 2)")
def _normal_exp(xlim, ylower, yupper):
    return _expr_chart(_FISHER_G, _EXPONENTIAL, _normal_box(xlim, ylower, yupper),
                       "normal_distributions_exp", {"labels": ["hessian"]})


@_register("hyperbolic", "chart", {"xlim": 2.0, "ylower": 0.25, "yupper": 4.0},
           "upper half plane (dx² + dy²)/y² with its Levi-Civita connection (Riemannian, curvature −1)")
def _hyperbolic(xlim, ylower, yupper):
    g = [["1/x2^2", "0"], ["0", "1/x2^2"]]
    gam = [[["0", "-1/x2"], ["-1/x2", "0"]], [["1/x2", "0"], ["0", "-1/x2"]]]
    return _expr_chart(g, gam, _normal_box(xlim, ylower, yupper), "hyperbolic",
                       {"labels": ["riemannian"]})


@_register("perturbed_fisher", "chart", {"a": 0.3, "b": 0.2, "xlim": 2.0, "ylower": 0.25, "yupper": 4.0},
           "Fisher metric with Γ = Γ^g + g⁻¹C for the cubic form C = a dx³/y³ + b x dy³/y³ "
           "(statistical, not conjugate symmetric)")
def _perturbed_fisher(a, b, xlim, ylower, yupper):
    a, b = float(a), float(b)
    gam = [[[f"{_num(a)}/x2", "-1/x2"], ["-1/x2", "0"]],
           [["1/(2*x2)", "0"], ["0", f"-1/x2 + {_num(b)}*x1/(2*x2)"]]]
    return _expr_chart(_FISHER_G, gam, _normal_box(xlim, ylower, yupper), "perturbed_fisher")


@_register("broken_fisher", "chart", {"lower": 0.25, "upper": 4.0},
           "Fisher metric paired with the positive-orthant connection (fails Codazzi; negative control)")
def _broken_fisher(lower, upper):
    return _expr_chart(_FISHER_G, _orthant_gamma(2, +1), _box([lower, lower], [upper, upper]),
                       "broken_fisher")


# --- maps --------------------------------------------------------------------------------

def _interval(a, b):
    return _box([a], [b], "interval")


def _lams(lam):
    lam = [float(lam)] if np.isscalar(lam) else [float(v) for v in lam]
    if not lam:
        raise BadParams("need at least one λ")
    return lam


def _orthant_for(images_lo, images_hi, m, conj=False):
    lo = min(0.25, 0.2 * min(images_lo))
    hi = max(4.0, 5.0 * max(images_hi))
    return chart("positive_orthant_conj" if conj else "positive_orthant", m=m, lower=lo, upper=hi)


@_register("parabola_curve", "map", {"lam": [1.0, 1.0], "a": 0.5, "b": 2.0},
           "γ(t) = (λ₁t², …, λ_m t²) into positive_orthant(m), t ∈ [a, b] (biharmonic)")
def _parabola(lam, a, b):
    lam = _lams(lam)
    if any(v <= 0 for v in lam):
        raise BadParams("parabola_curve needs every λ > 0")
    if a <= 0:
        raise BadParams("parabola_curve needs a > 0")
    I = _interval(a, b)
    target = _orthant_for([v * a * a for v in lam], [v * b * b for v in lam], len(lam))
    comps = [parse_expr(f"{_num(v)}*x1^2", 1, I) for v in lam]
    return MapModel(euclidean_chart(1, I), target, comps, name="parabola_curve")


@_register("perturbed_parabola", "map", {"lam": [1.0, 1.0], "delta": 0.3, "a": 0.5, "b": 2.0},
           "γ(t) = (λᵢ(t² + δt³)) into positive_orthant(m) (not biharmonic; negative control)")
def _perturbed_parabola(lam, delta, a, b):
    lam = _lams(lam)
    if any(v <= 0 for v in lam) or a <= 0 or delta < 0:
        raise BadParams("perturbed_parabola needs λ > 0, a > 0, δ ≥ 0")
    I = _interval(a, b)
    lo = [v * (a * a + delta * a ** 3) for v in lam]
    hi = [v * (b * b + delta * b ** 3) for v in lam]
    target = _orthant_for(lo, hi, len(lam))
    comps = [parse_expr(f"{_num(v)}*(x1^2 + {_num(delta)}*x1^3)", 1, I) for v in lam]
    return MapModel(euclidean_chart(1, I), target, comps, name="perturbed_parabola")


@_register("exp_curve", "map", {"lam": 1.0, "connection": "mixture", "a": -1.0, "b": 1.0},
           "γ(t) = (0, e^{λt}) into the normal family with mixture or exponential connection")
def _exp_curve(lam, connection, a, b):
    lam = float(lam)
    if lam == 0:
        raise BadParams("exp_curve needs λ ≠ 0")
    names = {"mixture": "normal_distributions", "exponential": "normal_distributions_exp"}
    if connection not in names:
        raise BadParams(f"connection must be one of {sorted(names)}")
    I = _interval(a, b)
    ylo, yhi = sorted((math.exp(lam * a), math.exp(lam * b)))
    target = chart(names[connection], ylower=min(0.25, 0.5 * ylo), yupper=max(4.0, 2.0 * yhi))
    comps = [zero(1, I), parse_expr(f"exp({_num(lam)}*x1)", 1, I)]
    return MapModel(euclidean_chart(1, I), target, comps, name=f"exp_curve[{connection}]")


@_register("line", "map", {"p": [0.0, 0.0], "q": [1.0, 1.0]},
           "straight segment t ↦ p + t(q − p), t ∈ [0, 1], in Euclidean space (harmonic)")
def _line(p, q):
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape or p.ndim != 1:
        raise BadParams("line endpoints must be vectors of equal length")
    I = _interval(0.0, 1.0)
    m = p.size
    lo = np.minimum(p, q) - 1.0 - np.abs(q - p)
    hi = np.maximum(p, q) + 1.0 + np.abs(q - p)
    target = euclidean_chart(m, Box(tuple(lo), tuple(hi)))
    comps = [parse_expr(f"{_num(p[i])} + {_num(q[i] - p[i])}*x1", 1, I) for i in range(m)]
    return MapModel(euclidean_chart(1, I), target, comps, name="line")


@_register("identity", "map", {"chart": "euclidean", "chart_params": {}},
           "identity map of a catalog chart")
def _identity(chart, chart_params):  # noqa: F811 - param named after the catalog verb
    c = _build("chart", chart, chart_params)
    m = c.dim
    return MapModel(c, c, [coordinate(i, m) for i in range(m)], name=f"identity[{c.name}]")


# --- immersions --------------------------------------------------------------------------

@_register("paraboloid", "immersion", {"m": 2, "radius": 1.0},
           "graph of F(x) = |x|²/2 over [−r, r]^m (improper affine sphere)")
def _paraboloid(m, radius):
    m = _dim(m)
    if radius <= 0:
        raise BadParams("radius must be positive")
    dom = _box([-radius] * m, [radius] * m)
    src = "0.5*(" + " + ".join(f"x{i + 1}^2" for i in range(m)) + ")"
    return induce_from_graph(parse_expr(src, m, dom), dom, name=f"paraboloid({m})")


# --- sections and families ----------------------------------------------------------------

def coordinate_section(u: MapModel, phis, support: Box, name: str = "") -> Section:
    """``V = Σ φⁱ ∂ᵢ`` in target coordinates."""
    return Section(u, list(phis), support, name=name)


def exp_curve_section(u: MapModel, phi: JetFn, psi: JetFn, lam: float, support: Box) -> Section:
    """``V = φγ̇ + ψX`` along γ(t) = (0, e^{λt}) with ``X = e^{λt}∂_x``."""
    e = parse_expr(f"exp({_num(lam)}*x1)", 1)
    return Section(u, [psi * e, (phi * e) * float(lam)], support, name="phi*gamma_dot + psi*X")


def _support_box(support, default: Box):
    if support is None:
        lo = np.asarray(default.lower)
        w = default.widths
        return Box(tuple(lo + 0.2 * w), tuple(lo + 0.8 * w))
    return _box(support[0], support[1], "support")


@_register("line_bump", "family", {"p": [0.0, 0.0], "q": [1.0, 1.0], "direction": [0.0, 1.0],
                                   "support": None, "profile": "poly_window"},
           "straight line plus t·bump·direction")
def _line_bump(p, q, direction, support, profile):
    u = _line(p, q)
    box = _support_box(support, u.source.domain)
    b = bump(box, profile)
    V = Section(u, [b * float(c) for c in direction], box)
    return additive_family(u, V)


@_register("parabola_bump", "family", {"lam": [1.0, 1.0], "direction": [1.0, 0.0],
                                       "support": [[0.6], [1.8]], "profile": "poly_window"},
           "parabola_curve plus t·bump·direction")
def _parabola_bump(lam, direction, support, profile):
    u = _parabola(lam, 0.5, 2.0)
    box = _support_box(support, u.source.domain)
    b = bump(box, profile)
    if len(direction) != u.target.dim:
        raise BadParams("direction must have one entry per λ")
    V = Section(u, [b * float(c) for c in direction], box)
    return additive_family(u, V)


@_register("exp_curve_section", "family", {"lam": 1.0, "connection": "mixture", "phi": 1.0,
                                           "psi": 0.5, "support": [[-0.7], [0.8]],
                                           "profile": "poly_window"},
           "exp_curve plus t·(φγ̇ + ψX) with φ, ψ multiples of a bump")
def _exp_family(lam, connection, phi, psi, support, profile):
    u = _exp_curve(lam, connection, -1.0, 1.0)
    box = _support_box(support, u.source.domain)
    b = bump(box, profile)
    V = exp_curve_section(u, b * float(phi), b * float(psi), lam, box)
    return additive_family(u, V)
