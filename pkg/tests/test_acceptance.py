"""Acceptance criteria, one test per criterion (7 is split into its three parts).

Every test prints a single PASS/FAIL line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""
import math

import numpy as np
import pytest

from statvar import catalog as C
from statvar import manifold as M
from statvar import maps as P
from statvar import variation as Vr
from statvar.expr import parse_expr
from statvar.jets import Box
from statvar.quadrature import QuadratureRule

from _report import verdict

STATISTICAL_CHARTS = ["euclidean", "positive_orthant", "positive_orthant_conj", "normal_distributions",
                      "normal_distributions_exp", "hyperbolic", "perturbed_fisher"]


def _grid25(c):
    return c.domain.grid(5, inset=0.05)


def _rel(a, b):
    return abs(a - b) / max(1.0, abs(b))


def _support_quad(V, order=10, panels=6):
    return V.support, QuadratureRule.gauss_legendre(V.support, order, panels)


@pytest.fixture(scope="module")
def scenarios():
    """The biharmonic scenarios: map, 𝓗 mode, probe domain."""
    par = C.map("parabola_curve", lam=[1.0])
    mix = C.map("exp_curve", lam=1.0, connection="mixture")
    exp = C.map("exp_curve", lam=1.0, connection="exponential")
    pb = C.immersion("paraboloid", m=2).map
    return {
        "parabola": (par, "hessian", Box((0.6,), (1.9,))),
        "exp_mixture": (mix, "chc(2)", Box((-0.9,), (0.9,))),
        "exp_exponential": (exp, "chc_conjugate(2)", Box((-0.9,), (0.9,))),
        "paraboloid": (pb, "hessian", Box((-0.8, -0.8), (0.8, 0.8))),
    }


def test_c1_structure_labels():
    tol = 1e-6
    g = _grid25
    po = C.chart("positive_orthant")
    r_po = max(float(np.max(np.abs(M.curvature(po, x).components))) for x in g(po))
    rep_conj = M.classify(C.chart("positive_orthant_conj"), g(po), tol)
    nd = C.chart("normal_distributions")
    rep_nd = M.classify(nd, g(nd), tol)
    sec = [M.sectional_curvature(nd, x) for x in g(nd)]
    sec_err = max(abs(s + 0.5) for s in sec)
    ok = (r_po < 1e-7
          and rep_conj.hessian and rep_conj.chc and abs(rep_conj.chc_constant) <= tol
          and rep_nd.hessian and rep_nd.chc and abs(rep_nd.chc_constant - 2.0) <= tol
          and len(sec) == 25 and sec_err <= tol)
    verdict("1 structure labels", ok,
            f"orthant |R|={r_po:.1e}; orthant_conj c={rep_conj.chc_constant:.2e}; "
            f"normal c={rep_nd.chc_constant:.9f}; Fisher sectional max|κ+1/2|={sec_err:.1e}")


def test_c2_closed_form_tensors():
    nd = C.chart("normal_distributions")
    err = 0.0
    for x in _grid25(nd):
        y = x[1]
        want = np.zeros((2, 2, 2))
        want[1, 0, 0] = 1 / (2 * y)                 # K(∂x,∂x) = 1/(2y) ∂y
        want[0, 0, 1] = want[0, 1, 0] = 1 / y       # K(∂x,∂y) = 1/y ∂x
        want[1, 1, 1] = 2 / y                       # K(∂y,∂y) = 2/y ∂y
        err = max(err, float(np.max(np.abs(M.difference_tensor(nd, x).components - want))))
    cod = {}
    for name in STATISTICAL_CHARTS:
        c = C.chart(name)
        cod[name] = max(M.codazzi_residual(c, x) for x in _grid25(c))
    bf = C.chart("broken_fisher")
    broken = max(M.codazzi_residual(bf, x) for x in _grid25(bf))
    worst = max(cod.values())
    verdict("2 closed-form tensors", err < 1e-9 and worst < 1e-8 and broken > 1e-3,
            f"max |K - K_closed|={err:.1e}; max Codazzi over {len(cod)} charts={worst:.1e}; "
            f"broken control={broken:.2f}")


def test_c3_tension_fields():
    errs = {}
    for m in (2, 3):
        gi = C.immersion("paraboloid", m=m)
        xi = np.zeros(m + 1)
        xi[-1] = m
        errs[f"paraboloid{m}"] = max(float(np.max(np.abs(P.tension(gi.map, x) - xi)))
                                     for x in gi.induced.domain.grid(4, inset=0.1))
    lam = [0.7, 1.3]
    par = C.map("parabola_curve", lam=lam)
    errs["parabola"] = max(float(np.max(np.abs(P.tension(par, x) - 6 * np.array(lam)))) for x in
                           par.source.domain.grid(9))
    for lam in (0.5, 1.0):
        mix = C.map("exp_curve", lam=lam, connection="mixture")
        exp = C.map("exp_curve", lam=lam, connection="exponential")
        e_m = e_e = e_e2 = 0.0
        for x in mix.source.domain.grid(9):
            gdot = P.pushforward(mix, x)[:, 0]
            e_m = max(e_m, float(np.max(np.abs(P.tension(mix, x) - 2 * lam * gdot))))
            e_e = max(e_e, float(np.max(np.abs(P.tension(mix, x, "conjugate") + 2 * lam * gdot))))
            e_e2 = max(e_e2, float(np.max(np.abs(P.tension(exp, x) + 2 * lam * gdot))))
        errs[f"exp_m λ={lam}"] = e_m
        errs[f"exp_e λ={lam}"] = max(e_e, e_e2)
    worst = max(errs.values())
    verdict("3 tension fields", worst < 1e-9, f"max residual {worst:.1e} over {sorted(errs)}")


def test_c4_biharmonicity():
    res = {}
    par = C.map("parabola_curve", lam=[1.0, 2.0])
    res["parabola"] = max(float(np.max(np.abs(P.bitension(par, x)))) for x in par.source.domain.grid(9, inset=0.01))
    for conn in ("mixture", "exponential"):
        u = C.map("exp_curve", lam=1.0, connection=conn)
        res[f"exp_{conn}"] = max(float(np.max(np.abs(P.bitension(u, x)))) for x in u.source.domain.grid(9, inset=0.01))
    for m in (2, 3):
        gi = C.immersion("paraboloid", m=m)
        pts = gi.induced.domain.grid(3, inset=0.1)
        res[f"paraboloid{m}"] = max(float(np.max(np.abs(P.bitension(gi.map, x)))) for x in pts)
        res[f"paraboloid{m} (affine)"] = max(float(np.max(np.abs(P.affine_bitension(gi, x)))) for x in pts)
    neg = C.map("perturbed_parabola", lam=[1.0])
    control = max(float(np.max(np.abs(P.bitension(neg, x)))) for x in neg.source.domain.grid(9, inset=0.01))
    worst = max(res.values())
    verdict("4 biharmonicity", worst < 1e-5 and control > 1e-2,
            f"max |τ₂| {worst:.1e} on {len(res)} scenarios; perturbed control {control:.2f}")


def test_c5_first_variation(scenarios):
    u = C.map("perturbed_parabola", lam=[1.0])
    om = Box((0.6,), (1.9,))
    gaps = []
    for V in Vr.random_probes(u, om, 5, 5):
        box, q = _support_quad(V)
        fd = Vr.fd_energy_derivatives(Vr.additive_family(u, V), box, q, 1)
        gaps.append(_rel(0.5 * fd, Vr.first_variation(u, V, box, q)))
    nulls = []
    for name, (bu, _, dom) in scenarios.items():
        for V in Vr.random_probes(bu, dom, 5, 11):
            box, q = _support_quad(V, *((8, 2) if bu.source.dim == 2 else (10, 6)))
            nulls.append(abs(Vr.fd_energy_derivatives(Vr.additive_family(bu, V), box, q, 1)))
    verdict("5 first variation", max(gaps) < 1e-3 and max(nulls) < 1e-4,
            f"non-biharmonic max rel gap {max(gaps):.1e}; biharmonic max |dE/dt| {max(nulls):.1e}")


def test_c6_second_variation_oracle(scenarios):
    gaps = {}
    for name, (u, mode, dom) in scenarios.items():
        worst = 0.0
        for V in Vr.random_probes(u, dom, 5, 3):
            box, q = _support_quad(V, *((6, 2) if u.source.dim == 2 else (10, 4)))
            sv = Vr.second_variation(u, V, box, q, mode)
            fd = 0.5 * Vr.fd_energy_derivatives(Vr.additive_family(u, V), box, q, 2)
            worst = max(worst, abs(fd - sv) / abs(sv))
        gaps[name] = worst
    verdict("6 second variation vs FD oracle", max(gaps.values()) < 1e-3,
            ", ".join(f"{k} {v:.1e}" for k, v in gaps.items()))


def _parabola_setup():
    u = C.map("parabola_curve", lam=[1.0])
    supp = Box((0.6,), (1.8,))
    phi = Vr.bump(supp)
    q = QuadratureRule.gauss_legendre(supp, 10, 8)
    return u, phi, supp, q


def test_c7a_positive_orthant_closed_form():
    # Literal closed form with the −12φ/t² coefficient.  Known to disagree; see README.
    u, phi, supp, q = _parabola_setup()
    sv = Vr.second_variation(u, P.Section(u, [phi], supp), supp, q, "hessian")
    closed = q.integrate(lambda x: (phi.d(x, (0, 0)) + 4 * phi.d(x, (0,)) / x[0]
                                    - 12 * phi.d(x) / x[0] ** 2) ** 2)
    rel = abs(sv - closed) / abs(closed)
    verdict("7a positive-orthant closed form", rel < 1e-6,
            f"second_variation={sv:.6f} closed(−12)={closed:.6f} rel={rel:.2e}")


def _exp_closed(conn, sign, mode):
    lam = 1.0
    u = C.map("exp_curve", lam=lam, connection=conn)
    supp = Box((-0.7,), (0.8,))
    b = Vr.bump(supp)
    phi, psi = b, b * parse_expr("0.5 + x1 - x1^2", 1)
    V = C.exp_curve_section(u, phi, psi, lam, supp)
    q = QuadratureRule.gauss_legendre(supp, 10, 8)
    sv = Vr.second_variation(u, V, supp, q, mode)
    closed = q.integrate(lambda x: 2 * lam ** 2 * phi.d(x, (0, 0)) ** 2 + 48 * lam ** 4 * phi.d(x, (0,)) ** 2
                         + (psi.d(x, (0, 0)) + sign * 2 * lam * psi.d(x, (0,)) - 3 * lam ** 2 * psi.d(x)) ** 2)
    return sv, closed, abs(sv - closed) / abs(closed)


def test_c7b_mixture_closed_form():
    sv, closed, rel = _exp_closed("mixture", +1, "chc(2)")
    verdict("7b normal-distribution mixture closed form", rel < 1e-5,
            f"second_variation={sv:.6f} closed={closed:.6f} rel={rel:.1e}")


def test_c7c_exponential_closed_form():
    sv, closed, rel = _exp_closed("exponential", -1, "chc_conjugate(2)")
    verdict("7c exponential-connection closed form", rel < 1e-5,
            f"second_variation={sv:.6f} closed={closed:.6f} rel={rel:.1e}")


def test_c8_characteristic_roots():
    hi, lo = Vr.characteristic_roots(4, -12)
    e_hi = abs(hi - (-3 + math.sqrt(57)) / 2)
    e_lo = abs(lo - (-3 - math.sqrt(57)) / 2)
    verdict("8 characteristic roots", max(e_hi, e_lo) < 1e-12,
            f"roots ({hi!r}, {lo!r}); errors {e_hi:.1e}, {e_lo:.1e}")


def _exp_kernel_probes(u, dom, lam):
    out = []
    for k, mu in enumerate((lam, -3 * lam)):    # ψ-kernel of ψ'' ± 2λψ' − 3λ²ψ
        for sgn in (1, -1):
            sub = Box((dom.lower[0] + 0.1 * k,), (dom.upper[0] - 0.1 * (1 - k),))
            b = Vr.bump(sub)
            psi = b * parse_expr(f"exp({sgn * mu}*x1)", 1)
            out.append(C.exp_curve_section(u, b * 0.1, psi, lam, sub))
    return out


def test_c9_stability_probes(scenarios):
    mu = Vr.characteristic_roots(4, -12)
    summary, ok = [], True
    for name, (u, mode, dom) in scenarios.items():
        kernel = {"parabola": mu, "paraboloid": ()}.get(name, ())
        probes = Vr.random_probes(u, dom, 20, 2024, exponents=kernel)
        if name.startswith("exp"):
            probes += _exp_kernel_probes(u, dom, 1.0)
        quad = QuadratureRule.gauss_legendre(dom, *((6, 4) if u.source.dim == 2 else (10, 8)))
        v = Vr.stability_verdict(u, dom, probes, quad, mode, check_biharmonic=u.source.dim == 1)
        ok &= (not v.negative) and v.min_value > 0
        summary.append(f"{name}: {len(probes)} probes min {v.min_value:.3g}")
    # improper affine sphere: integrand is ‖Δ̂V‖², term by term
    gi = C.immersion("paraboloid", m=2)
    u, _, dom = scenarios["paraboloid"]
    V = Vr.random_probes(u, dom, 1, 7)[0]
    q = QuadratureRule.gauss_legendre(V.support, 4, 2)
    resid = 0.0
    for x in q.nodes:
        J = Vr.jacobi_term(u, V, x)
        lap_hat = P.laplacian(u, V, x, "riemannian")
        H = Vr.h_operator(u, V, x, "general")
        resid = max(resid, abs(float(J @ J) - float(lap_hat @ lap_hat)), float(np.max(np.abs(H))),
                    float(np.max(np.abs(M.tchebychev(gi.induced, x).components))),
                    float(np.max(np.abs(P.shape_operator(gi, x)))))
    ok &= resid < 1e-7
    verdict("9 stability probes", ok, "; ".join(summary) + f"; ‖J‖² vs ‖Δ̂V‖² residual {resid:.1e}")


def test_c10_identity_suite():
    details, ok = [], True
    ibp = 0.0
    om = Box((-1.0, 1.0), (1.0, 2.0))
    q = QuadratureRule.gauss_legendre(om, 8, 4)
    b = Vr.bump(om)
    for name in ("hyperbolic", "normal_distributions"):
        u = C.map("identity", chart=name)
        xi = P.Section(u, [b, b * parse_expr("x1 + x2", 2)], om)
        eta = P.Section(u, [b * parse_expr("x2^2", 2), b * -0.5], om)
        ibp = max(ibp, P.ibp_residual(u.source, xi, eta, om, q))
    ok &= ibp < 1e-5
    details.append(f"IBP {ibp:.1e}")
    ident = assembly = 0.0
    for name in STATISTICAL_CHARTS:
        c = C.chart(name)
        for x in _grid25(c):
            r = M.identity_residuals(c, x)
            assembly = max(assembly, r.pop("assembly_lc"), r.pop("assembly_nabla"))
            ident = max(ident, max(r.values()))
    ok &= ident < 1e-7 and assembly < 1e-6
    details.append(f"identities {ident:.1e}, assembly {assembly:.1e}")
    cross = 0.0
    for u, modes, dom in (
        (C.map("exp_curve", lam=1.0, connection="mixture"), ("hessian", "chc(2)"), Box((-0.8,), (0.8,))),
        (C.map("exp_curve", lam=1.0, connection="exponential"), ("hessian", "chc_conjugate(2)"),
         Box((-0.8,), (0.8,))),
        (C.map("parabola_curve", lam=[1.0, 0.5]), ("hessian", "chc_conjugate(0)"), Box((0.7,), (1.8,))),
    ):
        for V in Vr.random_probes(u, dom, 2, 1):
            for x in V.support.grid(5, inset=0.1):
                vals = [Vr._h_scalar(u, V, x, mo, 1e-6) for mo in ("general",) + modes]
                cross = max(cross, max(vals) - min(vals))
    ok &= cross < 1e-5
    details.append(f"𝓗 cross-mode {cross:.1e}")
    verdict("10 identity suite", ok, "; ".join(details))
