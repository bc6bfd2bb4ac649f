"""Statistical manifolds on a single coordinate chart.

A :class:`ChartModel` holds metric components ``g_ij`` and connection
coefficients ``Γ^k_ij`` as :class:`~statvar.jets.JetFn` arrays.  Everything
else (Levi-Civita connection, difference tensor, conjugate connection,
curvatures, Hessian curvature, classification) is derived pointwise.

Index layout used throughout:

* ``gamma[k, i, j] = Γ^k_ij``, ``∇_{∂i} ∂j = Γ^k_ij ∂k``
* ``K[k, i, j]`` = components of ``K(∂i, ∂j)``
* ``R[l, i, j, k] = (R(∂i, ∂j) ∂k)^l``
* ``L[l, z, w, x] = (L(∂z, ∂w) ∂x)^l``
* ``H[l, i, j, k] = ((∇_{∂k} K)(∂i, ∂j))^l`` (derivative slot last)
"""
from __future__ import annotations

import threading
import warnings
from collections import OrderedDict
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import EmptyGrid, NotHessianWarning, OutOfDomain, SingularMetric
from .jets import Box, JetFn, component_jets

CONNECTIONS = ("nabla", "conjugate", "levi_civita")
_CACHE_SIZE = 4096


@dataclass(frozen=True)
class PointTensor:
    """Components of an (r, s) tensor at ``basepoint``; upper indices first."""
    valence: tuple
    components: np.ndarray
    basepoint: np.ndarray

    def __post_init__(self):
        r, s = self.valence
        comps = np.asarray(self.components, dtype=float)
        if comps.ndim != r + s:
            raise ValueError(f"valence {self.valence} needs {r + s} indices, got {comps.ndim}")
        if comps.ndim and len(set(comps.shape)) != 1:
            raise ValueError(f"components must be square, got shape {comps.shape}")
        object.__setattr__(self, "components", comps)
        object.__setattr__(self, "basepoint", np.asarray(self.basepoint, dtype=float))

    def __array__(self, dtype=None, copy=None):
        return self.components if dtype is None else self.components.astype(dtype)

    @property
    def dim(self) -> int:
        return self.components.shape[0] if self.components.ndim else 0


class TensorField:
    """An (r, s) tensor field given by an array of JetFn components."""

    def __init__(self, valence, components):
        self.valence = tuple(valence)
        arr = np.empty(np.shape(components), dtype=object) if np.ndim(components) else None
        if arr is None:
            raise ValueError("a tensor field needs at least one index")
        for idx in np.ndindex(arr.shape):
            item = components
            for i in idx:
                item = item[i]
            if not isinstance(item, JetFn):
                raise TypeError("tensor field components must be JetFn")
            arr[idx] = item
        if arr.ndim != sum(self.valence):
            raise ValueError("component array rank does not match valence")
        self.components = arr

    def jets(self, x, order: int = 1):
        return component_jets(self.components, x, order)


@dataclass
class PointJets:
    """Cached coordinate jets of a chart at one point (``level`` = Γ derivative order)."""
    level: int
    g: np.ndarray
    G: np.ndarray
    chol: np.ndarray
    dg: np.ndarray
    gamma: np.ndarray
    lc: np.ndarray
    d2g: np.ndarray | None = None
    dgamma: np.ndarray | None = None
    dlc: np.ndarray | None = None
    d3g: np.ndarray | None = None
    d2gamma: np.ndarray | None = None
    d2lc: np.ndarray | None = None

    def connection(self, which: str, order: int = 0):
        """``[Γ, ∂Γ, ∂²Γ][:order+1]`` for the requested connection."""
        if order > self.level:
            raise ValueError("jets computed to a lower level than requested")
        nab = [self.gamma, self.dgamma, self.d2gamma][: order + 1]
        if which == "nabla":
            return nab
        lc = [self.lc, self.dlc, self.d2lc][: order + 1]
        if which == "levi_civita":
            return lc
        if which == "conjugate":
            return [2.0 * a - b for a, b in zip(lc, nab)]
        raise ValueError(f"unknown connection {which!r}; expected one of {CONNECTIONS}")


class ChartModel:
    """A statistical structure (g, ∇) on one coordinate box.

    ``g`` is an m×m array of JetFn (symmetric), ``gamma`` an m×m×m array of
    JetFn with ``gamma[k][i][j] = Γ^k_ij`` (symmetric in i, j).  Derived
    quantities need metric jets one order above the connection jets they use:
    curvature needs ∂²g and ∂Γ, covariant derivatives of curvature need ∂³g
    and ∂²Γ.  Jets are computed on demand and cached per point.
    """

    def __init__(self, g, gamma, domain: Box, name: str = "", meta: dict | None = None):
        m = domain.dim
        g_arr = _object_array(g, (m, m), "g")
        gam_arr = _object_array(gamma, (m, m, m), "gamma")
        self.dim = m
        self.domain = domain
        self.g = g_arr
        self.gamma = gam_arr
        self.name = name
        self.meta = dict(meta or {})
        self._cache: OrderedDict = OrderedDict()
        self._lock = threading.Lock()

    def __repr__(self):
        return f"ChartModel({self.name or 'custom'}, dim={self.dim}, domain={self.domain})"

    # --- jets ------------------------------------------------------------------
    def jets(self, x, level: int = 0) -> PointJets:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.dim:
            raise ValueError(f"point has {x.size} coordinates, chart has dimension {self.dim}")
        key = tuple(x.tolist())
        with self._lock:
            hit = self._cache.get(key)
            if hit is not None and hit.level >= level:
                self._cache.move_to_end(key)
                return hit
        if not self.domain.contains(x):
            raise OutOfDomain(f"point {x.tolist()} outside chart domain {self.domain}")
        pj = self._compute(x, level)
        with self._lock:
            self._cache[key] = pj
            if len(self._cache) > _CACHE_SIZE:
                self._cache.popitem(last=False)
        return pj

    def _compute(self, x, level: int) -> PointJets:
        gj = component_jets(self.g, x, level + 1, symmetric_axes=[(0, 1)])
        cj = component_jets(self.gamma, x, level, symmetric_axes=[(1, 2)])
        g = gj[0]
        try:
            chol = np.linalg.cholesky(g)
        except np.linalg.LinAlgError as exc:
            raise SingularMetric(f"metric not positive definite at {x.tolist()}") from exc
        if not np.all(np.isfinite(chol)):
            raise SingularMetric(f"metric not finite at {x.tolist()}")
        G = np.linalg.inv(g)
        G = 0.5 * (G + G.T)
        dg = gj[1]
        pj = PointJets(level, g, G, chol, dg, cj[0], kernels.christoffel(G, dg))
        if level >= 1:
            pj.d2g, pj.dgamma = gj[2], cj[1]
            pj.dlc = kernels.christoffel_d1(G, dg, gj[2])
        if level >= 2:
            pj.d3g, pj.d2gamma = gj[3], cj[2]
            pj.d2lc = kernels.christoffel_d2(G, dg, gj[2], gj[3])
        return pj

    def connection(self, x, which: str = "nabla", order: int = 0):
        return self.jets(x, order).connection(which, order)

    def metric(self, x) -> np.ndarray:
        return self.jets(x).g

    def inverse_metric(self, x) -> np.ndarray:
        return self.jets(x).G

    def with_connection(self, which: str, name: str | None = None) -> "ChartModel":
        """Chart with the same metric and Γ replaced by ``2Γ^g − Γ`` or ``Γ^g``."""
        if which == "nabla":
            return self
        m = self.dim
        comps = [[[_DerivedGamma(self, which, k, i, j).jet() for j in range(m)]
                  for i in range(m)] for k in range(m)]
        return ChartModel(self.g, comps, self.domain, name or f"{self.name}:{which}", self.meta)


class _DerivedGamma:
    """Γ component of the conjugate or Levi-Civita connection as a JetFn (order ≤ 2)."""

    def __init__(self, chart: ChartModel, which: str, k, i, j):
        self.chart, self.which, self.idx = chart, which, (k, i, j)

    def jet(self) -> JetFn:
        m = self.chart.dim
        k, i, j = self.idx

        def ev(x, axes):
            n = len(axes)
            arr = self.chart.jets(x, n).connection(self.which, n)[n]
            return arr[(k, i, j) + tuple(axes)]

        return JetFn(ev, m, 2, None, label=f"{self.which}[{k},{i},{j}]")


def _object_array(obj, shape, what):
    arr = np.empty(shape, dtype=object)
    for idx in np.ndindex(shape):
        item = obj
        try:
            for i in idx:
                item = item[i]
        except (IndexError, TypeError) as exc:
            raise ValueError(f"{what} must have shape {shape}") from exc
        if not isinstance(item, JetFn):
            raise TypeError(f"{what}{list(idx)} is not a JetFn")
        arr[idx] = item
    return arr


def _pt(valence, comps, x):
    return PointTensor(valence, comps, np.asarray(x, dtype=float))


# --- first-order objects ------------------------------------------------------

def levi_civita(c: ChartModel, x) -> PointTensor:
    return _pt((1, 2), c.jets(x).lc, x)


def difference_tensor(c: ChartModel, x) -> PointTensor:
    pj = c.jets(x)
    return _pt((1, 2), pj.gamma - pj.lc, x)


def conjugate_connection(c: ChartModel, x) -> PointTensor:
    pj = c.jets(x)
    return _pt((1, 2), 2.0 * pj.lc - pj.gamma, x)


def tchebychev(c: ChartModel, x) -> PointTensor:
    pj = c.jets(x)
    return _pt((1, 0), np.einsum("ij,kij->k", pj.G, pj.gamma - pj.lc), x)


def _nabla_g(pj: PointJets, gamma):
    """``(∇_k g)_ij`` stored as ``[k, i, j]``."""
    dgk = np.moveaxis(pj.dg, 2, 0)
    return (dgk - np.einsum("pki,pj->kij", gamma, pj.g) - np.einsum("pkj,ip->kij", gamma, pj.g))


def codazzi_residual(c: ChartModel, x) -> float:
    """``max |(∇_X g)(Y, Z) − (∇_Y g)(X, Z)|`` over coordinate fields."""
    pj = c.jets(x)
    ng = _nabla_g(pj, pj.gamma)
    return float(np.max(np.abs(ng - np.transpose(ng, (1, 0, 2))), initial=0.0))


# --- curvature -------------------------------------------------------------------

def _curvature_array(c: ChartModel, x, which: str) -> np.ndarray:
    gam, dgam = c.jets(x, 1).connection(which, 1)
    return kernels.riemann(gam, dgam)


def curvature(c: ChartModel, x, which: str = "nabla") -> PointTensor:
    if which not in CONNECTIONS:
        raise ValueError(f"unknown connection {which!r}")
    return _pt((1, 3), _curvature_array(c, x, which), x)


def sectional_curvature(c: ChartModel, x, i: int = 0, j: int = 1, which: str = "levi_civita") -> float:
    """``g(R(∂i,∂j)∂j, ∂i) / (g_ii g_jj − g_ij²)`` on the coordinate plane (i, j)."""
    if c.dim < 2:
        raise ValueError("sectional curvature needs dimension ≥ 2")
    pj = c.jets(x, 1)
    R = _curvature_array(c, x, which)
    num = pj.g[i] @ R[:, i, j, j]
    den = pj.g[i, i] * pj.g[j, j] - pj.g[i, j] ** 2
    return float(num / den)


def _interchange(g, G, R):
    # g(L(Z,W)X, Y) = g(R(X,Y)Z, W)  →  L[l,z,w,x] = G^{ly} g_{wp} R^p_{xyz}
    return np.einsum("ly,wp,pxyz->lzwx", G, g, R)


def curvature_interchange(c: ChartModel, x, conj: bool = False) -> PointTensor:
    pj = c.jets(x, 1)
    R = _curvature_array(c, x, "conjugate" if conj else "nabla")
    return _pt((1, 3), _interchange(pj.g, pj.G, R), x)


def _dK(pj: PointJets):
    return pj.dgamma - pj.dlc


def hessian_curvature(c: ChartModel, x, conj: bool = False, tol: float = 1e-7) -> PointTensor:
    """``(∇_X K)(Y, Z)``; with ``conj`` the Hessian curvature of (g, ∇̄), i.e. ``∇̄K̄ = −∇̄K``.

    Emits :class:`NotHessianWarning` when the relevant curvature exceeds ``tol``
    at ``x``; the value is returned regardless.
    """
    pj = c.jets(x, 1)
    which = "conjugate" if conj else "nabla"
    gam, dgam = pj.connection(which, 1)
    R = kernels.riemann(gam, dgam)
    rmax = float(np.max(np.abs(R), initial=0.0))
    if rmax > tol:
        warnings.warn(f"{which} curvature {rmax:.3e} exceeds {tol:.1e} at {np.asarray(x).tolist()}; "
                      "structure is not Hessian", NotHessianWarning, stacklevel=2)
    K, dK = pj.gamma - pj.lc, _dK(pj)
    if conj:
        K, dK = -K, -dK
    return _pt((1, 3), kernels.covd12(gam, K, dK), x)


def covariant_derivative_array(gamma, T, dT, upper: int):
    """Covariant derivative of a tensor with ``upper`` leading contravariant slots.

    ``dT`` carries the coordinate derivative in its last axis; the result
    does too.
    """
    T = np.asarray(T, dtype=float)
    out = np.array(dT, dtype=float, copy=True)
    rank = T.ndim
    for s in range(rank):
        # move slot s to the front, contract, move back
        Ts = np.moveaxis(T, s, 0)
        if s < upper:
            corr = np.einsum("uap,p...->u...a", gamma, Ts)
            out += np.moveaxis(corr, 0, s)
        else:
            corr = np.einsum("pad,p...->d...a", gamma, Ts)
            out -= np.moveaxis(corr, 0, s)
    return out


def covariant_derivative(c: ChartModel, fld: TensorField, x, which: str = "nabla") -> PointTensor:
    """∇ of a tensor field; the new covariant slot is appended last."""
    r, s = fld.valence
    vals, d1 = fld.jets(x, 1)
    gam = c.jets(x).connection(which, 0)[0]
    return _pt((r, s + 1), covariant_derivative_array(gam, vals, d1, r), x)


def divergence(c: ChartModel, v, x) -> float:
    """``tr(∇^g v)`` for a vector field given as JetFn components (or TensorField)."""
    fld = v if isinstance(v, TensorField) else TensorField((1, 0), list(v))
    vals, d1 = fld.jets(x, 1)
    lc = c.jets(x).lc
    return float(np.trace(d1) + np.einsum("iip,p->", lc, vals))


def tchebychev_divergence(c: ChartModel, x) -> float:
    """``div^g T`` computed from ∂T = ∂(G^{ij} K^k_ij)."""
    pj = c.jets(x, 1)
    K, dK = pj.gamma - pj.lc, _dK(pj)
    dG = -np.einsum("kp,pqa,ql->kla", pj.G, pj.dg, pj.G)
    T = np.einsum("ij,kij->k", pj.G, K)
    dT = np.einsum("ija,kij->ka", dG, K) + np.einsum("ij,kija->ka", pj.G, dK)
    return float(np.trace(dT) + np.einsum("iip,p->", pj.lc, T))


def orthonormal_frame(c: ChartModel, x) -> np.ndarray:
    """Columns ``e_i`` with ``g(e_i, e_j) = δ_ij``: ``E = L^{-T}`` for ``g = L Lᵀ``."""
    chol = c.jets(x).chol
    return np.linalg.inv(chol).T


def frame_trace_weights(c: ChartModel, x, frame: np.ndarray | None = None) -> np.ndarray:
    """``P = Σ_a e_a e_aᵀ``; contracting a bilinear form with P takes its g-trace."""
    E = orthonormal_frame(c, x) if frame is None else frame
    return E @ E.T


# --- identities ----------------------------------------------------------------------

def identity_residuals(c: ChartModel, x) -> dict:
    """Residuals of the standard identities of a statistical structure at ``x``.

    ``conjugate_formula``: ∇̄ obtained from the duality relation against ∇^g − K;
    ``levi_civita_mean``: ∇^g = (∇ + ∇̄)/2; ``curvature_duality``:
    g(R̄(X,Y)Z, W) + g(Z, R(X,Y)W); ``interchange_swap``: L(X,Y)Z + L̄(Y,X)Z;
    ``interchange_difference``: L(X,Z)Y − L(Y,Z)X − R̄(X,Y)Z;
    ``total_symmetry``: g(K(∂i,∂j),∂k) under permutations; ``duality``:
    ∂_i g_jk − g(∇_i ∂j, ∂k) − g(∂j, ∇̄_i ∂k); ``assembly_lc``/``assembly_nabla``:
    R rebuilt from R^g, ∇^g K (resp. ∇K) and [K, K].
    """
    pj = c.jets(x, 1)
    g, G = pj.g, pj.G
    gam, dgam = pj.gamma, pj.dgamma
    lc, dlc = pj.lc, pj.dlc
    K, dK = gam - lc, dgam - dlc
    # ∇̄ from the defining duality relation: Γ̄^p_{xz} = G^{py}(∂_x g_yz − Γ^q_xy g_qz)
    dual = np.einsum("py,yzx->pxz", G, pj.dg) - np.einsum("py,qxy,qz->pxz", G, gam, g)
    conj = lc - K
    R = kernels.riemann(gam, dgam)
    Rb = kernels.riemann(2.0 * lc - gam, 2.0 * dlc - dgam)
    Rg = kernels.riemann(lc, dlc)
    L = _interchange(g, G, R)
    Lb = _interchange(g, G, Rb)
    low = np.einsum("pk,pij->ijk", g, K)
    sym = max(float(np.max(np.abs(low - np.transpose(low, perm)), initial=0.0))
              for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0), (1, 2, 0), (2, 0, 1)])
    dualres = (np.moveaxis(pj.dg, 2, 0)
               - np.einsum("pij,pk->ijk", gam, g) - np.einsum("jp,pik->ijk", g, dual))
    KK = np.einsum("lip,pjk->lijk", K, K) - np.einsum("ljp,pik->lijk", K, K)
    Dg = kernels.covd12(lc, K, dK)   # [l, j, k, i] = (∇^g_i K)(∂j, ∂k)
    Dn = kernels.covd12(gam, K, dK)
    alt_g = np.einsum("ljki->lijk", Dg) - np.einsum("likj->lijk", Dg)
    alt_n = np.einsum("ljki->lijk", Dn) - np.einsum("likj->lijk", Dn)

    def mx(a):
        return float(np.max(np.abs(a), initial=0.0))

    return {
        "conjugate_formula": mx(dual - conj),
        "levi_civita_mean": mx(lc - 0.5 * (gam + dual)),
        "curvature_duality": mx(np.einsum("wl,lxyz->xyzw", g, Rb) + np.einsum("zl,lxyw->xyzw", g, R)),
        "interchange_swap": mx(L + np.transpose(Lb, (0, 2, 1, 3))),
        "interchange_difference": mx(np.einsum("lxzy->lxyz", L) - np.einsum("lyzx->lxyz", L) - Rb),
        "total_symmetry": sym,
        "duality": mx(dualres),
        "assembly_lc": mx(R - (Rg + alt_g + KK)),
        "assembly_nabla": mx(R - (Rg + alt_n - KK)),
    }


# --- classification ---------------------------------------------------------------------

@dataclass
class StructureReport:
    """Classification of a chart over a sample grid (residuals are grid maxima)."""
    n_points: int
    tol: float
    codazzi_residual: float
    codazzi_ok: bool
    conjugate_symmetric_residual: float
    conjugate_symmetric: bool
    sectional_constant: float
    sectional_residual: float
    constant_sectional: bool
    hessian_residual: float
    hessian: bool
    chc_constant: float
    chc_residual: float
    chc: bool
    labels: list = field(default_factory=list)

    def to_dict(self) -> dict:
        d = dict(self.__dict__)
        d["labels"] = list(self.labels)
        return d


def _fit(targets, designs):
    """Least-squares scalar ``a`` minimising Σ‖T − aD‖²; returns (a, max residual)."""
    num = sum(float(np.sum(t * d)) for t, d in zip(targets, designs))
    den = sum(float(np.sum(d * d)) for d in designs)
    a = num / den if den > 0 else 0.0
    res = max((float(np.max(np.abs(t - a * d), initial=0.0)) for t, d in zip(targets, designs)),
              default=0.0)
    return a, res


def classify(c: ChartModel, sample_grid, tol: float = 1e-6) -> StructureReport:
    pts = np.asarray(sample_grid, dtype=float)
    if pts.size == 0:
        raise EmptyGrid("classification needs at least one sample point")
    pts = pts.reshape(-1, c.dim)
    m = c.dim
    eye = np.eye(m)
    cod = csym = hes = 0.0
    Rs, Bs, Hs, As = [], [], [], []
    for x in pts:
        pj = c.jets(x, 1)
        cod = max(cod, codazzi_residual(c, x))
        R = kernels.riemann(pj.gamma, pj.dgamma)
        L = _interchange(pj.g, pj.G, R)
        csym = max(csym, float(np.max(np.abs(R - L), initial=0.0)))
        hes = max(hes, float(np.max(np.abs(R), initial=0.0)))
        Rs.append(R)
        # R(X,Y)Z = λ (g(Y,Z)X − g(X,Z)Y)
        Bs.append(np.einsum("jk,li->lijk", pj.g, eye) - np.einsum("ik,lj->lijk", pj.g, eye))
        K, dK = pj.gamma - pj.lc, _dK(pj)
        Hs.append(kernels.covd12(pj.gamma, K, dK))
        # H(Y,Z;X) = −(c/2)(g(X,Y)Z + g(X,Z)Y): H[l,i,j,k] with X=∂k, Y=∂i, Z=∂j
        As.append(-0.5 * (np.einsum("ki,lj->lijk", pj.g, eye) + np.einsum("kj,li->lijk", pj.g, eye)))
    lam, lam_res = _fit(Rs, Bs)
    cc, cc_res = _fit(Hs, As)
    rep = StructureReport(
        n_points=len(pts), tol=tol,
        codazzi_residual=cod, codazzi_ok=cod < tol,
        conjugate_symmetric_residual=csym, conjugate_symmetric=csym < tol,
        sectional_constant=lam, sectional_residual=lam_res, constant_sectional=lam_res < tol,
        hessian_residual=hes, hessian=hes < tol,
        chc_constant=cc, chc_residual=cc_res, chc=(hes < tol and cc_res < tol),
    )
    for name in ("codazzi_ok", "conjugate_symmetric", "constant_sectional", "hessian", "chc"):
        if getattr(rep, name):
            rep.labels.append(name)
    return rep
