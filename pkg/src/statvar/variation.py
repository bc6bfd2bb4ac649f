"""Second-order variational machinery for the statistical bi-energy.

Normalisation: with ``E(u) = ∫ h(τ, τ) dμ_g`` (see :func:`statvar.maps.bienergy`)
the first and second variations satisfy

    d/dt E(u_t)|₀   = 2 ∫ ⟨V, τ₂(u)⟩ dμ_g
    d²/dt² E(u_t)|₀ = 2 · second_variation(u, V)

i.e. :func:`first_variation` and :func:`second_variation` are the variations
of ``½E``.  :func:`fd_energy_derivatives` differentiates ``E`` itself, so oracle
comparisons carry the factor 2 explicitly.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import (BiharmonicityViolation, ComplexRoots, DegenerateSupport, DomainEscape,
                     ModeMismatch, OutOfDomain, SupportViolation)
from .expr import parse_expr
from .jets import Box, JetFn, jet_product
from .maps import (MapModel, Section, _check_quad, _laplacian_from_jets, bienergy, bitension,
                   tension, tension_jets, volume_density)
from .manifold import _interchange, frame_trace_weights
from .quadrature import QuadratureRule

__all__ = [
    "HMode", "VariationFamily", "Verdict", "additive_family", "bump", "characteristic_roots",
    "fd_energy_derivatives", "first_variation", "h_operator", "jacobi_term", "random_probes",
    "reduction_inequality", "second_variation", "stability_verdict", "QuadratureRule",
]

_MODES = ("general", "conjugate_symmetric", "hessian", "chc_conjugate", "chc")


@dataclass(frozen=True)
class HMode:
    """Which form of the curvature operator to use; ``c`` only for the CHC modes."""
    kind: str = "general"
    c: float | None = None

    def __post_init__(self):
        if self.kind not in _MODES:
            raise ValueError(f"unknown mode {self.kind!r}; expected one of {_MODES}")
        if self.kind.startswith("chc") and self.c is None:
            raise ValueError(f"mode {self.kind} needs the constant c")
        if not self.kind.startswith("chc") and self.c is not None:
            raise ValueError(f"mode {self.kind} takes no constant")

    @classmethod
    def parse(cls, text) -> "HMode":
        """``"hessian"``, ``"chc(2)"``, ``"chc_conjugate(0)"``, or an HMode."""
        if isinstance(text, HMode):
            return text
        text = str(text).strip()
        if "(" in text:
            name, _, rest = text.partition("(")
            return cls(name.strip(), float(rest.rstrip(") ")))
        return cls(text)

    @property
    def scalar(self) -> bool:
        return self.kind in ("conjugate_symmetric", "chc_conjugate", "chc")

    def __str__(self):
        return f"{self.kind}({self.c:g})" if self.c is not None else self.kind


GENERAL = HMode("general")


# --- bumps ------------------------------------------------------------------------

def _mollifier_1d(s: float, k: int) -> float:
    """k-th derivative in s of exp(−1/(1−s²)), zero for |s| ≥ 1."""
    if abs(s) >= 1.0:
        return 0.0
    q0 = 1.0 / (s * s - 1.0)
    base = math.exp(q0)
    if k == 0:
        return base
    # q^{(j)} = ½(−1)^j j! [(s−1)^{−j−1} − (s+1)^{−j−1}]
    q = [0.5 * (-1) ** j * math.factorial(j) * ((s - 1.0) ** (-j - 1) - (s + 1.0) ** (-j - 1))
         for j in range(k + 1)]
    q1, q2 = q[1], q[2] if k >= 2 else 0.0
    q3 = q[3] if k >= 3 else 0.0
    q4 = q[4] if k >= 4 else 0.0
    bell = {1: q1,
            2: q1 ** 2 + q2,
            3: q1 ** 3 + 3 * q1 * q2 + q3,
            4: q1 ** 4 + 6 * q1 ** 2 * q2 + 4 * q1 * q3 + 3 * q2 ** 2 + q4}[k]
    return base * bell


_WINDOW = np.polynomial.Polynomial([1.0, 0.0, -1.0]) ** 6
_WINDOW_D = [_WINDOW.deriv(k) if k else _WINDOW for k in range(5)]


def _window_1d(s: float, k: int) -> float:
    """k-th derivative in s of (1 − s²)⁶, zero for |s| ≥ 1."""
    if abs(s) >= 1.0:
        return 0.0
    return float(_WINDOW_D[k](s))


_PROFILES = {"mollifier": _mollifier_1d, "poly_window": _window_1d}


def bump(support: Box, degree_profile: str = "poly_window", scale: float = 1.0) -> JetFn:
    """Tensor-product bump vanishing with all derivatives outside ``support``.

    ``mollifier`` is exp(−1/(1−s²)) per axis (C^∞); ``poly_window`` is (1−s²)⁶
    (C⁵, polynomial inside the support, so Gauss rules aligned with the support
    integrate it exactly).  ``s`` rescales each axis of the support to (−1, 1).
    """
    if degree_profile not in _PROFILES:
        raise ValueError(f"unknown profile {degree_profile!r}; expected one of {sorted(_PROFILES)}")
    if support.volume <= 0 or np.any(support.widths <= 0):
        raise DegenerateSupport(f"support {support} has zero volume")
    prof = _PROFILES[degree_profile]
    lo = np.asarray(support.lower, dtype=float)
    half = 0.5 * support.widths
    mid = lo + half
    m = support.dim

    def ev(x, axes):
        counts = [0] * m
        for a in axes:
            counts[a] += 1
        val = scale
        for i in range(m):
            s = (x[i] - mid[i]) / half[i]
            if abs(s) >= 1.0:
                return 0.0
            val *= prof(s, counts[i]) / half[i] ** counts[i]
            if val == 0.0:
                return 0.0
        return val

    return JetFn(ev, m, 4, None, label=f"bump[{degree_profile}]")


# --- variation families --------------------------------------------------------------

class VariationFamily:
    """``F(x, t)`` with ``F(·, 0) = u``; components are JetFns of arity m+1 (t last)."""

    def __init__(self, base: MapModel, Ft, epsilon: float, support: Box | None = None,
                 name: str = ""):
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        self.base = base
        self.Ft = list(Ft)
        self.epsilon = float(epsilon)
        self.support = support
        self.name = name
        m = base.source.dim
        for f in self.Ft:
            if f.arity != m + 1:
                raise ValueError("family components take (x, t)")

    def at(self, t: float) -> MapModel:
        if abs(t) > self.epsilon * (1 + 1e-12):
            raise ValueError(f"|t| = {abs(t)} exceeds epsilon = {self.epsilon}")
        comps = [_slice_t(f, t) for f in self.Ft]
        return MapModel(self.base.source, self.base.target, comps,
                        name=f"{self.base.name}@t={t:g}", check_points=None)

    def variation_field(self) -> Section:
        m = self.base.source.dim
        comps = [_t_derivative(f, m) for f in self.Ft]
        return Section(self.base, comps, self.support, check=False)


def _slice_t(F: JetFn, t: float) -> JetFn:
    def ev(x, axes):
        return F.d(np.append(x, t), axes)

    return JetFn(ev, F.arity - 1, F.max_order, None, label=f"{F.label}@t")


def _t_derivative(F: JetFn, m: int) -> JetFn:
    def ev(x, axes):
        return F.d(np.append(x, 0.0), tuple(axes) + (m,))

    return JetFn(ev, m, F.max_order - 1, None, label=f"d/dt {F.label}")


def _additive_component(u: JetFn, v: JetFn, m: int) -> JetFn:
    # u(x) + t v(x): t-derivatives of order ≥ 2 vanish
    def ev(xt, axes):
        nt = sum(1 for a in axes if a == m)
        xa = tuple(a for a in axes if a != m)
        x = xt[:m]
        if nt == 0:
            val = u.d(x, xa)
            return val + xt[m] * v.d(x, xa) if not v.is_zero else val
        if nt == 1:
            return v.d(x, xa)
        return 0.0

    return JetFn(ev, m + 1, min(4, max(u.max_order, v.max_order)), None,
                 label=f"({u.label}) + t({v.label})")


def _escape_margin(u: MapModel, V: Section, pts) -> float:
    """Largest |t| for which u ± tV stays inside the target box at every sample point."""
    dom = u.target.domain
    lo, hi = np.asarray(dom.lower), np.asarray(dom.upper)
    best = np.inf
    for x in pts:
        y = u.value(x)
        v = V.jets(x, 0)[0]
        for a in range(len(v)):
            if v[a] != 0:
                # |t| must keep y ± t·v inside [lo, hi] for both signs of t
                best = min(best, (hi[a] - y[a]) / abs(v[a]), (y[a] - lo[a]) / abs(v[a]))
    return best


def _jet_scale(jets) -> float:
    return max(float(np.max(np.abs(j), initial=0.0)) for j in jets)


def _stiffness_ratio(u: MapModel, V: Section, pts) -> float:
    """Ratio of the 2-jet sizes of u and V on the sample points."""
    su = max(_jet_scale(u.jets(x, 2)) for x in pts)
    sv = max(_jet_scale(V.jets(x, 2)) for x in pts)
    return su / sv if sv > 0 else np.inf


def additive_family(u: MapModel, V: Section, epsilon: float | None = None,
                    grid: int = 41) -> VariationFamily:
    """``F(x, t) = u(x) + t·V(x)`` in target coordinates.

    ``epsilon`` defaults to 0.1 of the escape margin (the largest |t| keeping
    the image inside the target box), capped at 1 and at 0.1 of the ratio of
    the 2-jet sizes of u and V, so that εV is a small perturbation of u in
    value and in its first two derivatives.  Raises
    :class:`DomainEscape` if ``u ± εV`` leaves the target box on the sample grid.
    """
    if V.base is not u:
        raise ValueError("section must live along the base map")
    m = u.source.dim
    box = V.support if V.support is not None else u.source.domain
    n = max(3, int(round(grid ** (1.0 / m))) if m > 1 else grid)
    pts = box.grid(n)
    margin = _escape_margin(u, V, pts)
    if epsilon is None:
        epsilon = min(1.0, 0.1 * margin, 0.1 * _stiffness_ratio(u, V, pts))
        if epsilon <= 0:
            raise DomainEscape("the base map touches the target boundary on the support")
    elif epsilon > margin:
        raise DomainEscape(f"u + tV leaves the target domain for |t| ≈ {margin:.3g} < epsilon = {epsilon}")
    for t in (-epsilon, epsilon):
        for x in pts:
            y = u.value(x) + t * V.jets(x, 0)[0]
            if not u.target.domain.contains(y):
                raise DomainEscape(f"u + {t:g}V leaves the target domain at x = {x.tolist()}")
    comps = [_additive_component(uf, vf, m) for uf, vf in zip(u.u, V.V)]
    return VariationFamily(u, comps, epsilon, V.support, name=f"{u.name}+tV")


# --- pointwise operators -------------------------------------------------------------

def jacobi_term(u: MapModel, V: Section, x, tau=None) -> np.ndarray:
    """``ΔᵘV + Σ R^N(V, u_*e_i)u_*e_i − 2K^N_{τ(u)}V``."""
    x = np.asarray(x, dtype=float)
    vj = V.jets(x, 2)
    lap = _laplacian_from_jets(u, x, vj, "standard")
    uj = u.jets(x, 1)
    tj = u.target.jets(uj[0], 1)
    if tau is None:
        tau = tension(u, x)
    P = frame_trace_weights(u.source, x)
    R = kernels.riemann(tj.gamma, tj.dgamma)
    curv = np.einsum("ij,labc,a,bi,cj->l", P, R, vj[0], uj[1], uj[1])
    K = tj.gamma - tj.lc
    return lap + curv - 2.0 * np.einsum("lab,a,b->l", K, tau, vj[0])


def _target_level2(u: MapModel, y):
    return u.target.jets(y, 2)


def _h_general(u: MapModel, vj, x, tj_tau):
    tau, dtau = tj_tau[0], tj_tau[1]
    V, dV = vj[0], vj[1]
    uj = u.jets(x, 1)
    du = uj[1]
    P = frame_trace_weights(u.source, x)
    pj = _target_level2(u, uj[0])
    gb, dgb, d2gb = pj.connection("conjugate", 2)
    Rb = kernels.riemann(gb, dgb)
    dRb = kernels.riemann_d1(gb, dgb, d2gb)
    DRb = kernels.covd13(gb, Rb, dRb)                       # [l,a,b,c,x] = ((∇̄_x R̄)(a,b)c)^l
    g, G = pj.g, pj.G
    R = kernels.riemann(pj.gamma, pj.dgamma)
    L = _interchange(g, G, R)
    Lb = _interchange(g, G, Rb)
    dG = -np.einsum("kp,pqa,ql->kla", G, pj.dg, G)
    dLb = (np.einsum("lya,wp,pxyz->lzwxa", dG, g, Rb)
           + np.einsum("ly,wpa,pxyz->lzwxa", G, pj.dg, Rb)
           + np.einsum("ly,wp,pxyza->lzwxa", G, g, dRb))
    DLb = kernels.covd13(gb, Lb, dLb)
    K = pj.gamma - pj.lc
    dK = pj.dgamma - pj.dlc
    DK = kernels.covd12(gb, K, dK)                           # [l,a,b,x] = ((∇̄_x K)(a,b))^l
    tau_bar = tension(u, x, "conjugate")
    # ∇̄^u_{e_i} τ and ∇̄^u_{e_i} V in coordinates: ∂_i τ + Γ̄(u_*∂_i, τ)
    Dtau = dtau + np.einsum("kab,ai,b->ki", gb, du, tau)
    DV = dV + np.einsum("kab,ai,b->ki", gb, du, V)
    t1 = np.einsum("labc,a,b,c->l", Rb, V, tau_bar, tau)
    t2 = np.einsum("ij,labcx,a,bi,c,xj->l", P, DRb, V, du, tau, du)
    t3 = 2.0 * np.einsum("ij,labc,a,bi,cj->l", P, Rb, V, du, Dtau)
    t4 = np.einsum("ij,lzwxa,z,wi,xj,a->l", P, DLb, tau, du, du, V)
    t5 = -2.0 * np.einsum("ij,lzwx,zi,w,xj->l", P, L, du, tau, DV)
    t6 = -np.einsum("labx,a,b,x->l", DK, tau, tau, V)
    return t1 + t2 + t3 + t4 + t5 + t6, (t1, t2, t3, t4, t5, t6)


def _h_conjugate_symmetric(u: MapModel, vj, x, tj_tau):
    tau, dtau = tj_tau[0], tj_tau[1]
    V, dV = vj[0], vj[1]
    uj = u.jets(x, 1)
    du = uj[1]
    P = frame_trace_weights(u.source, x)
    pj = _target_level2(u, uj[0])
    R = kernels.riemann(pj.gamma, pj.dgamma)
    dR = kernels.riemann_d1(pj.gamma, pj.dgamma, pj.d2gamma)
    DhR = kernels.covd13(pj.lc, R, dR)
    gb = 2.0 * pj.lc - pj.gamma
    K = pj.gamma - pj.lc
    DK = kernels.covd12(gb, K, pj.dgamma - pj.dlc)
    tau_bar = tension(u, x, "conjugate")
    Htau = dtau + np.einsum("kab,ai,b->ki", pj.lc, du, tau)
    HV = dV + np.einsum("kab,ai,b->ki", pj.lc, du, V)
    vec = (np.einsum("labc,a,b,c->l", R, V, tau_bar, tau)
           + 2.0 * np.einsum("ij,labc,a,bi,cj->l", P, R, V, du, Htau)
           + np.einsum("ij,labcx,a,bi,cj,x->l", P, DhR, V, du, du, tau)
           - 2.0 * np.einsum("ij,labc,ai,b,cj->l", P, R, du, tau, HV)
           - np.einsum("labx,a,b,x->l", DK, tau, tau, V))
    return float(vec @ pj.g @ V)


def _check_mode(u: MapModel, y, mode: HMode, tol: float):
    """Pointwise check of the structural hypothesis behind ``mode`` at target point y."""
    if mode.kind == "general":
        return
    pj = u.target.jets(y, 1)
    R = kernels.riemann(pj.gamma, pj.dgamma)
    scale = max(1.0, float(np.max(np.abs(R), initial=0.0)))
    if mode.kind == "conjugate_symmetric":
        res = float(np.max(np.abs(R - _interchange(pj.g, pj.G, R)), initial=0.0))
        if res > tol * scale:
            raise ModeMismatch(f"target is not conjugate symmetric at {np.asarray(y).tolist()} (|R−L| = {res:.2e})")
        return
    res = float(np.max(np.abs(R), initial=0.0))
    if res > tol:
        raise ModeMismatch(f"target is not Hessian at {np.asarray(y).tolist()} (|R| = {res:.2e})")
    if mode.kind == "hessian":
        return
    m = u.target.dim
    eye = np.eye(m)
    K, dK = pj.gamma - pj.lc, pj.dgamma - pj.dlc
    if mode.kind == "chc":
        H = kernels.covd12(pj.gamma, K, dK)
    else:
        gb = 2.0 * pj.lc - pj.gamma
        H = -kernels.covd12(gb, K, dK)
    A = -0.5 * mode.c * (np.einsum("ki,lj->lijk", pj.g, eye) + np.einsum("kj,li->lijk", pj.g, eye))
    res = float(np.max(np.abs(H - A), initial=0.0))
    if res > tol * max(1.0, float(np.max(np.abs(H), initial=0.0))):
        which = "conjugate structure" if mode.kind == "chc_conjugate" else "structure"
        raise ModeMismatch(f"target {which} is not CHC {mode.c:g} at {np.asarray(y).tolist()} "
                           f"(residual {res:.2e})")


def h_operator(u: MapModel, V: Section, x, mode: HMode | str = GENERAL, tol: float = 1e-6,
               step=None, parts: bool = False):
    """The curvature operator of the second variation at ``x``.

    Vector-valued for ``general`` and ``hessian``; the other modes return the
    scalar ``⟨𝓗(V), V⟩`` directly.  ``general`` differentiates τ by finite
    differences (see :func:`statvar.maps.tension_jets`); it is cross-checked
    against the reduced forms on conjugate-symmetric and Hessian targets and
    against the finite-difference energy oracle elsewhere.
    """
    mode = HMode.parse(mode)
    x = np.asarray(x, dtype=float)
    y = u.value(x)
    _check_mode(u, y, mode, tol)
    vj = V.jets(x, 1)
    if mode.kind in ("general", "conjugate_symmetric"):
        tj_tau = tension_jets(u, x, "standard", step)
        if mode.kind == "general":
            out, terms = _h_general(u, vj, x, tj_tau)
            return (out, terms) if parts else out
        return _h_conjugate_symmetric(u, vj, x, tj_tau)
    tau = tension(u, x)
    V0 = vj[0]
    pj = u.target.jets(y, 1)
    h = pj.g
    if mode.kind == "hessian":
        gb = 2.0 * pj.lc - pj.gamma
        DK = kernels.covd12(gb, pj.gamma - pj.lc, pj.dgamma - pj.dlc)
        return -np.einsum("labx,a,b,x->l", DK, tau, tau, V0)
    htv = float(tau @ h @ V0)
    if mode.kind == "chc_conjugate":
        return -mode.c * htv ** 2
    K = pj.gamma - pj.lc
    KVt = np.einsum("lab,a,b->l", K, V0, tau)
    return (0.5 * mode.c * (float(V0 @ h @ V0) * float(tau @ h @ tau) + htv ** 2)
            - 2.0 * float(KVt @ h @ KVt))


def _h_scalar(u, V, x, mode, tol):
    val = h_operator(u, V, x, mode, tol)
    if np.ndim(val) == 0:
        return float(val)
    return float(val @ u.target.jets(u.value(x)).g @ V.jets(x, 0)[0])


# --- integrated quantities --------------------------------------------------------------

def _require_support(V: Section, omega: Box):
    if V.is_zero:
        return
    if V.support is None or not omega.contains_box(V.support):
        raise SupportViolation("the variation field must be supported inside the integration box")


def first_variation(u: MapModel, V: Section, omega: Box, quad: QuadratureRule) -> float:
    """``∫ ⟨V, τ₂(u)⟩ dμ_g`` (the first variation of ½E)."""
    _require_support(V, omega)
    _check_quad(u.source, omega, quad)
    total = 0.0
    for x, w in zip(quad.nodes, quad.weights):
        v = V.jets(x, 0)[0]
        if not np.any(v):
            continue
        h = u.target.jets(u.value(x)).g
        total += w * volume_density(u.source, x) * float(v @ h @ bitension(u, x))
    return total


@dataclass
class SecondVariation:
    value: float
    jacobi: float
    curvature: float
    warnings: list = field(default_factory=list)


def second_variation(u: MapModel, V: Section, omega: Box, quad: QuadratureRule,
                     mode: HMode | str = GENERAL, return_parts: bool = False,
                     check_biharmonic: bool = True, tol: float = 1e-5, mode_tol: float = 1e-6):
    """``∫ ‖jacobi_term‖²_h dμ_g + ∫ ⟨𝓗(V), V⟩ dμ_g`` (second variation of ½E).

    When ``check_biharmonic`` is set, |τ₂| is sampled at the quadrature nodes in
    the support; exceeding ``tol`` emits :class:`BiharmonicityViolation` and the
    value is still returned.
    """
    mode = HMode.parse(mode)
    _require_support(V, omega)
    _check_quad(u.source, omega, quad)
    notes = []
    if V.is_zero:
        res = SecondVariation(0.0, 0.0, 0.0, notes)
        return res if return_parts else 0.0
    jac = curv = 0.0
    worst = 0.0
    for x, w in zip(quad.nodes, quad.weights):
        v = V.jets(x, 2)
        if not any(np.any(a) for a in v):
            continue
        dmu = w * volume_density(u.source, x)
        tau = tension(u, x)
        J = jacobi_term(u, V, x, tau)
        h = u.target.jets(u.value(x)).g
        jac += dmu * float(J @ h @ J)
        curv += dmu * _h_scalar(u, V, x, mode, mode_tol)
        if check_biharmonic:
            worst = max(worst, float(np.max(np.abs(bitension(u, x)))))
    if worst > tol:
        msg = f"base map is not biharmonic on the support: max |τ₂| = {worst:.3e} > {tol:.1e}"
        warnings.warn(msg, BiharmonicityViolation, stacklevel=2)
        notes.append(msg)
    res = SecondVariation(jac + curv, jac, curv, notes)
    return res if return_parts else res.value


def fd_energy_derivatives(fam: VariationFamily, omega: Box, quad: QuadratureRule, order: int = 2,
                          step: float | None = None) -> float:
    """Richardson-extrapolated t-derivative of ``E(u_t)`` at t = 0.

    Uses E at t ∈ {−2h, −h, 0, h, 2h} with ``h = ε/8``: central differences at
    h and 2h combined as (4D(h) − D(2h))/3.
    """
    if order not in (1, 2):
        raise ValueError("order must be 1 or 2")
    h = fam.epsilon / 8.0 if step is None else float(step)
    if 2 * h > fam.epsilon * (1 + 1e-12):
        raise ValueError("stencil exceeds the family's epsilon")
    E = {}
    for k in (-2, -1, 0, 1, 2):
        if order == 1 and k == 0:
            continue
        try:
            E[k] = bienergy(fam.at(k * h), omega, quad)
        except OutOfDomain as exc:
            raise DomainEscape(f"family leaves the target domain at t = {k * h:g}") from exc
    if order == 1:
        d_h = (E[1] - E[-1]) / (2 * h)
        d_2h = (E[2] - E[-2]) / (4 * h)
    else:
        d_h = (E[1] - 2 * E[0] + E[-1]) / h ** 2
        d_2h = (E[2] - 2 * E[0] + E[-2]) / (4 * h ** 2)
    return (4 * d_h - d_2h) / 3.0


def reduction_inequality(u: MapModel, x, lam: float, C: float, tol: float = 1e-6):
    """Both sides of ``4λ‖τ‖²h(τ, τ̂) + h((∇̄_τ K)(τ, τ), τ) ≥ C‖τ‖⁴`` at ``x``.

    τ̂ is the tension for the Levi-Civita connections.  The target must have
    constant sectional curvature ``lam`` at u(x); otherwise ModeMismatch.
    """
    x = np.asarray(x, dtype=float)
    y = u.value(x)
    pj = u.target.jets(y, 1)
    R = kernels.riemann(pj.gamma, pj.dgamma)
    eye = np.eye(u.target.dim)
    B = np.einsum("jk,li->lijk", pj.g, eye) - np.einsum("ik,lj->lijk", pj.g, eye)
    res = float(np.max(np.abs(R - lam * B), initial=0.0))
    if res > tol * max(1.0, abs(lam)):
        raise ModeMismatch(f"target curvature is not λ = {lam:g} at {y.tolist()} (residual {res:.2e})")
    tau = tension(u, x)
    tau_hat = tension(u, x, "riemannian")
    h = pj.g
    n2 = float(tau @ h @ tau)
    gb = 2.0 * pj.lc - pj.gamma
    DK = kernels.covd12(gb, pj.gamma - pj.lc, pj.dgamma - pj.dlc)
    W = np.einsum("labx,a,b,x->l", DK, tau, tau, tau)
    lhs = 4.0 * lam * n2 * float(tau @ h @ tau_hat) + float(W @ h @ tau)
    return lhs, C * n2 ** 2


# --- probes and verdicts -------------------------------------------------------------------

def characteristic_roots(p: float, q: float):
    """Roots of μ(μ−1) + pμ + q = 0 (indicial equation of φ̈ + pφ̇/t + qφ/t²), descending."""
    b = p - 1.0
    disc = b * b - 4.0 * q
    if disc < 0:
        raise ComplexRoots(f"discriminant {disc:g} < 0 for (p, q) = ({p:g}, {q:g})")
    r = math.sqrt(disc)
    # cancellation-free pair: t is the larger-magnitude root, q/t the other
    t = -0.5 * (b + math.copysign(r, b))
    other = q / t if t != 0.0 else 0.0
    return max(t, other) + 0.0, min(t, other) + 0.0


def _poly_source(coefs, center, halfw, m):
    """Text of Σ c_α Π ((x_i − center_i)/halfw_i)^{α_i} for multi-indices in ``coefs``."""
    terms = []
    for alpha, c in coefs:
        factors = [f"(({repr(float(c))}))"]
        for i, a in enumerate(alpha):
            if a:
                factors.append(f"((x{i + 1} - ({center[i]!r}))/{halfw[i]!r})^{a}")
        terms.append("*".join(factors))
    return " + ".join(terms) if terms else "0"


def random_probes(u: MapModel, omega: Box, n: int, rng: np.random.Generator | int = 0,
                  max_degree: int = 4, profile: str = "poly_window", exponents=(),
                  min_fraction: float = 0.3) -> list:
    """Random bump sections on sub-boxes of ``omega``.

    Each probe is ``c · p(x) · bump(x)`` with a random target vector c, a random
    polynomial p of degree ≤ ``max_degree`` and a random sub-box.  For every
    exponent μ in ``exponents`` one extra probe ``c · x₁^μ · bump`` is added on a
    random sub-box (source coordinates must be positive there).
    """
    rng = np.random.default_rng(rng)
    m, nt = u.source.dim, u.target.dim
    probes = []

    def sub_box():
        lo, hi = [], []
        for a, b in zip(omega.lower, omega.upper):
            w = (b - a) * rng.uniform(min_fraction, 0.95)
            s = a + rng.uniform(0.0, (b - a) - w)
            lo.append(s)
            hi.append(s + w)
        return Box(tuple(lo), tuple(hi))

    def make(shape_src, box, label):
        bmp = bump(box, profile)
        shape = parse_expr(shape_src, m) if shape_src else None
        base_fn = jet_product(shape, bmp) if shape is not None else bmp
        c = rng.normal(size=nt)
        c /= np.linalg.norm(c)
        comps = [base_fn * float(ci) for ci in c]
        return Section(u, comps, box, name=label)

    for k in range(n):
        box = sub_box()
        deg = int(rng.integers(0, max_degree + 1))
        coefs = [(a, rng.normal()) for a in _count_indices(m, deg)]
        src = _poly_source(coefs, box.center.tolist(), (0.5 * box.widths).tolist(), m)
        probes.append(make(src, box, f"probe{k}[deg≤{deg}]"))
    for mu in exponents:
        box = sub_box()
        probes.append(make(f"x1^{float(mu)!r}", box, f"kernel[x1^{mu:.4g}]"))
    return probes


def _count_indices(m, deg):
    from itertools import product
    return [a for a in product(range(deg + 1), repeat=m) if sum(a) <= deg]


@dataclass
class Verdict:
    """Falsification-only stability result: a negative probe certifies instability;
    no negative probe certifies nothing beyond the probes tried."""
    status: str
    min_value: float
    values: list
    worst: int | None
    zero_probes: int = 0

    @property
    def negative(self) -> bool:
        return self.status == "negative_probe"


def stability_verdict(u: MapModel, omega: Box, probes, quad: QuadratureRule,
                      mode: HMode | str = GENERAL, **kwargs) -> Verdict:
    values = []
    zero = 0
    for V in probes:
        if V.is_zero:
            zero += 1
            values.append(0.0)
            continue
        values.append(second_variation(u, V, omega, quad, mode, **kwargs))
    nonzero = [(v, i) for i, v in enumerate(values) if not probes[i].is_zero]
    if not nonzero:
        return Verdict("no_negative_probe_found", 0.0, values, None, zero)
    vmin, imin = min(nonzero)
    status = "negative_probe" if vmin < 0 else "no_negative_probe_found"
    return Verdict(status, vmin, values, imin, zero)
