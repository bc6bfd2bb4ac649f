"""Maps between charts: tension, connection Laplacians, bi-tension, bi-energy,
and graph immersions into Euclidean space."""
from __future__ import annotations

import threading
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import EmptyQuadrature, NotConvex, OutOfDomain, SupportViolation
from .jets import Box, JetFn, component_jets, constant, coordinate, fd_jets, partial, zero
from .manifold import (ChartModel, _interchange, frame_trace_weights, tchebychev_divergence)
from .quadrature import QuadratureRule

FLAVORS = {
    # flavor -> (source connection, target connection)
    "standard": ("nabla", "nabla"),
    "conjugate": ("conjugate", "conjugate"),
    "riemannian": ("levi_civita", "levi_civita"),
}
_CACHE_SIZE = 4096


def _flavor(flavor: str):
    try:
        return FLAVORS[flavor]
    except KeyError:
        raise ValueError(f"unknown flavor {flavor!r}; expected one of {sorted(FLAVORS)}") from None


def _jet_list(fns, n, what):
    fns = list(fns)
    if len(fns) != n:
        raise ValueError(f"{what} needs {n} components, got {len(fns)}")
    for f in fns:
        if not isinstance(f, JetFn):
            raise TypeError(f"{what} components must be JetFn")
    return fns


class MapModel:
    """A smooth map ``u`` from ``source`` to ``target`` in coordinates."""

    def __init__(self, source: ChartModel, target: ChartModel, u, name: str = "",
                 check_points: int | None = 5):
        self.source = source
        self.target = target
        self.u = _jet_list(u, target.dim, "u")
        self.name = name
        self._cache: OrderedDict = OrderedDict()
        self._lock = threading.Lock()
        if check_points:
            for x in source.domain.grid(check_points):
                y = self.value(x)
                if not target.domain.contains(y):
                    raise OutOfDomain(f"u({x.tolist()}) = {y.tolist()} leaves the target domain")

    def __repr__(self):
        return f"MapModel({self.name or 'custom'}: {self.source.name} -> {self.target.name})"

    def jets(self, x, order: int = 2):
        """``[u, ∂u (n,m), ∂²u (n,m,m), ...]`` at ``x``."""
        key = tuple(np.asarray(x, dtype=float).reshape(-1).tolist())
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None and len(hit) > order:
                return hit[: order + 1]
        if not self.source.domain.contains(key):
            raise OutOfDomain(f"point {list(key)} outside source domain {self.source.domain}")
        out = component_jets(self.u, np.array(key), order)
        with self._lock:
            self._cache[key] = out
            if len(self._cache) > _CACHE_SIZE:
                self._cache.popitem(last=False)
        return out

    def value(self, x) -> np.ndarray:
        return self.jets(x, 0)[0]


class Section:
    """A vector field ``V`` along ``base`` (components in target coordinates).

    ``support``, when given, is a box strictly inside the source domain outside
    which V vanishes; this is spot-checked on the support boundary.
    """

    def __init__(self, base: MapModel, V, support: Box | None = None, name: str = "",
                 check: bool = True):
        self.base = base
        self.V = _jet_list(V, base.target.dim, "V")
        self.support = support
        self.name = name
        if support is not None and check:
            if not base.source.domain.contains_box(support):
                raise SupportViolation(f"support {support} not inside the source domain")
            for x in _boundary_samples(support):
                vals = component_jets(self.V, x, 1)
                if max(np.max(np.abs(v)) for v in vals) > 1e-10:
                    raise SupportViolation(f"section does not vanish on its support boundary at {x.tolist()}")

    @property
    def is_zero(self) -> bool:
        return all(f.is_zero for f in self.V)

    def jets(self, x, order: int = 2):
        return component_jets(self.V, x, order)


def _boundary_samples(box: Box, n: int = 3):
    pts = []
    for x in box.grid(n):
        on_face = np.isclose(x, box.lower) | np.isclose(x, box.upper)
        if np.any(on_face):
            pts.append(x)
    return pts


# --- pointwise operators -------------------------------------------------------

def pushforward(u: MapModel, x) -> np.ndarray:
    return u.jets(x, 1)[1]


def _tension(u: MapModel, x, flavor: str, frame=None):
    src_w, tgt_w = _flavor(flavor)
    uj = u.jets(x, 2)
    P = frame_trace_weights(u.source, x, frame)
    gm = u.source.jets(x).connection(src_w, 0)[0]
    gn = u.target.jets(uj[0]).connection(tgt_w, 0)[0]
    return kernels.tension(P, gm, gn, uj[1], uj[2])


def tension(u: MapModel, x, flavor: str = "standard", frame=None) -> np.ndarray:
    """Trace in a g-orthonormal frame of ``∇^u_X u_*Y − u_*∇^M_X Y``."""
    return _tension(u, np.asarray(x, dtype=float), flavor, frame)


def laplacian(u: MapModel, V: Section, x, flavor: str = "standard", frame=None) -> np.ndarray:
    """Connection Laplacian ``tr_g(∇^u∇^u V − ∇^u_{∇^M} V)`` of a section."""
    x = np.asarray(x, dtype=float)
    return _laplacian_from_jets(u, x, V.jets(x, 2), flavor, frame)


def _laplacian_from_jets(u: MapModel, x, vjets, flavor, frame=None):
    src_w, tgt_w = _flavor(flavor)
    uj = u.jets(x, 2)
    P = frame_trace_weights(u.source, x, frame)
    gm = u.source.jets(x).connection(src_w, 0)[0]
    gn, dgn = u.target.jets(uj[0], 1).connection(tgt_w, 1)
    return kernels.section_laplacian(P, gm, gn, dgn, uj[1], uj[2], *vjets)


def tension_jets(u: MapModel, x, flavor: str = "standard", step=None):
    """Value, first and second derivatives of ``x ↦ τ(u)(x)`` by finite differences.

    Central differences at steps h and h/2 with one Richardson step (default
    ``h = ε^{1/6}·max(1,|x|)``); the error is O(h⁴) in exact arithmetic.
    """
    x = np.asarray(x, dtype=float)
    return fd_jets(lambda p: _tension(u, p, flavor), x, 2, step, u.source.domain)


def bitension(u: MapModel, x, step=None, parts: bool = False):
    """``τ₂(u) = Δ̄ᵘτ + div^g(T^M)τ − Σ L^N(u_*e_i, τ)u_*e_i − K^N(τ, τ)``."""
    x = np.asarray(x, dtype=float)
    tj = tension_jets(u, x, "standard", step)
    tau = tj[0]
    lap = _laplacian_from_jets(u, x, tj, "conjugate")
    div_t = tchebychev_divergence(u.source, x)
    uj = u.jets(x, 1)
    P = frame_trace_weights(u.source, x)
    tj_n = u.target.jets(uj[0], 1)
    R = kernels.riemann(tj_n.gamma, tj_n.dgamma)
    L = _interchange(tj_n.g, tj_n.G, R)
    Lterm = np.einsum("ij,lzwx,zi,w,xj->l", P, L, uj[1], tau, uj[1])
    Kn = tj_n.gamma - tj_n.lc
    Kterm = np.einsum("lab,a,b->l", Kn, tau, tau)
    out = lap + div_t * tau - Lterm - Kterm
    if parts:
        return out, {"laplacian": lap, "divergence": div_t * tau, "interchange": -Lterm,
                     "difference": -Kterm, "tension": tau}
    return out


def volume_density(c: ChartModel, x) -> float:
    """``√det g`` from the Cholesky factor."""
    return float(np.prod(np.diag(c.jets(x).chol)))


def bienergy(u: MapModel, omega: Box, quad: QuadratureRule) -> float:
    """``∫_Ω h(τ(u), τ(u)) dμ_g`` by quadrature."""
    _check_quad(u.source, omega, quad)
    total = 0.0
    for x, w in zip(quad.nodes, quad.weights):
        tau = _tension(u, x, "standard")
        h = u.target.jets(u.value(x)).g
        total += w * float(tau @ h @ tau) * volume_density(u.source, x)
    return total


def _check_quad(c: ChartModel, omega: Box, quad: QuadratureRule):
    if len(quad.weights) == 0:
        raise EmptyQuadrature("quadrature rule has no nodes")
    if not c.domain.contains_box(omega):
        raise OutOfDomain(f"integration box {omega} not inside the chart domain {c.domain}")


def ibp_residual(c: ChartModel, xi: Section, eta: Section, omega: Box, quad: QuadratureRule,
                 return_sides: bool = False):
    """``|∫⟨Δξ, η⟩ − ∫⟨ξ, Δ̄η⟩ − ∫ div^g(T)⟨ξ, η⟩|`` over ``omega``.

    One of the sections must be supported inside ``omega``.
    """
    if xi.base is not eta.base:
        raise ValueError("sections must live along the same map")
    u = xi.base
    if u.source is not c:
        raise ValueError("chart must be the source of the sections' base map")

    def inside(s):
        return s.is_zero or (s.support is not None and omega.contains_box(s.support))

    if not (inside(xi) or inside(eta)):
        raise SupportViolation("neither section is compactly supported in the integration box")
    _check_quad(c, omega, quad)
    if xi.is_zero or eta.is_zero:
        return (0.0, 0.0, 0.0) if return_sides else 0.0
    lhs = rhs = 0.0
    for x, w in zip(quad.nodes, quad.weights):
        xj, ej = xi.jets(x, 2), eta.jets(x, 2)
        h = u.target.jets(u.value(x)).g
        dmu = w * volume_density(c, x)
        lhs += dmu * float(_laplacian_from_jets(u, x, xj, "standard") @ h @ ej[0])
        rhs += dmu * (float(xj[0] @ h @ _laplacian_from_jets(u, x, ej, "conjugate"))
                      + tchebychev_divergence(c, x) * float(xj[0] @ h @ ej[0]))
    res = abs(lhs - rhs)
    return (res, lhs, rhs) if return_sides else res


# --- graph immersions --------------------------------------------------------------

def euclidean_chart(m: int, domain: Box, name: str | None = None) -> ChartModel:
    one, nil = constant(1.0, m), zero(m)
    g = [[one if i == j else nil for j in range(m)] for i in range(m)]
    gam = [[[nil] * m for _ in range(m)] for _ in range(m)]
    return ChartModel(g, gam, domain, name or f"euclidean({m})",
                      meta={"labels": ["riemannian", "hessian", "chc 0"]})


@dataclass
class GraphImmersion:
    """``f(x) = (x, F(x))`` into Euclidean space with transversal ``ξ = e_{m+1}``."""
    F: JetFn
    induced: ChartModel
    map: MapModel
    xi: np.ndarray
    improper_affine_sphere: bool
    det_residual: float

    @property
    def dim(self) -> int:
        return self.induced.dim


def induce_from_graph(F: JetFn, domain: Box, grid: int = 5, name: str = "graph",
                      affine_tol: float = 1e-8) -> GraphImmersion:
    """Blaschke-type graph immersion: induced metric Hess F and flat induced connection."""
    m = domain.dim
    if F.max_order < 4:
        raise ValueError("graph function needs jets to order 4")
    hess = [[partial(F, (i, j)) for j in range(m)] for i in range(m)]
    det_res = 0.0
    fvals = []
    for x in domain.grid(grid):
        H = np.array([[h.d(x) for h in row] for row in hess])
        if np.any(np.linalg.eigvalsh(0.5 * (H + H.T)) <= 0):
            raise NotConvex(f"Hess F not positive definite at {x.tolist()}")
        det_res = max(det_res, abs(np.linalg.det(H) - 1.0))
        fvals.append(F.d(x))
    nil = zero(m)
    induced = ChartModel(hess, [[[nil] * m for _ in range(m)] for _ in range(m)], domain,
                         name=f"{name}:induced")
    lo, hi = min(fvals), max(fvals)
    pad = max(1.0, hi - lo)
    tdom = Box(tuple(domain.lower) + (lo - 10 * pad,), tuple(domain.upper) + (hi + 10 * pad,))
    target = euclidean_chart(m + 1, tdom)
    comps = [coordinate(i, m) for i in range(m)] + [F]
    f = MapModel(induced, target, comps, name=name)
    xi = np.zeros(m + 1)
    xi[-1] = 1.0
    return GraphImmersion(F, induced, f, xi, det_res < affine_tol, det_res)


def shape_operator(gi: GraphImmersion, x) -> np.ndarray:
    """Weingarten ``D_X ξ = −f_*(S X)``; ξ is constant so S vanishes."""
    # D_{∂i} ξ = ∂_i ξ = 0 and f_* is injective, hence S = 0.
    return np.zeros((gi.dim, gi.dim))


def affine_bitension(gi: GraphImmersion, x) -> np.ndarray:
    """``m·(−f_*(tr_g ∇S) − tr S·ξ − div^g(T^M)·ξ)`` for the graph immersion."""
    m = gi.dim
    S = shape_operator(gi, x)
    # S ≡ 0 on the chart, so its coordinate derivatives vanish too.
    dS = np.zeros((m, m, m))
    pj = gi.induced.jets(x)
    nablaS = dS + np.einsum("lap,pi->lia", pj.gamma, S) - np.einsum("pai,lp->lia", pj.gamma, S)
    trS_grad = np.einsum("ia,lia->l", pj.G, nablaS)
    df = pushforward(gi.map, x)
    return m * (-df @ trS_grad - np.trace(S) * gi.xi - tchebychev_divergence(gi.induced, x) * gi.xi)


def gauss_residual(gi: GraphImmersion, x) -> float:
    """``max |D_{∂i} f_*∂j − f_*∇_{∂i}∂j − g_ij ξ|``."""
    uj = gi.map.jets(x, 2)
    pj = gi.induced.jets(x)
    lhs = uj[2]                                        # flat target: D = ∂
    rhs = np.einsum("al,lij->aij", uj[1], pj.gamma) + np.einsum("a,ij->aij", gi.xi, pj.g)
    return float(np.max(np.abs(lhs - rhs)))
