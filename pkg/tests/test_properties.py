"""Property-based checks of structural identities."""
import math

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from statvar import catalog as C
from statvar import maps as P
from statvar import variation as Vr
from statvar.expr import parse_expr
from statvar.jets import Box, fd_lift
from statvar.manifold import conjugate_connection, difference_tensor, orthonormal_frame
from statvar.quadrature import QuadratureRule

settings.register_profile("statvar", deadline=None, max_examples=40, derandomize=True)
settings.load_profile("statvar")

coef = st.floats(-2.0, 2.0, allow_nan=False, allow_infinity=False)
unit = st.floats(0.05, 0.95)

STAT_CHARTS = ["normal_distributions", "normal_distributions_exp", "perturbed_fisher",
               "positive_orthant", "hyperbolic"]


def _chart_point(c, fx, fy):
    lo, w = np.asarray(c.domain.lower), c.domain.widths
    return lo + w * np.array([fx, fy])[: c.dim]


@given(st.lists(coef, min_size=6, max_size=6), unit, unit)
def test_fd_lift_matches_exact_jets(cs, a, b):
    src = (f"{cs[0]} + {cs[1]}*x1 + {cs[2]}*x2 + {cs[3]}*x1*x2 + {cs[4]}*log(1 + x1) "
           f"+ {cs[5]}*exp(0.5*x2)").replace("+ -", "- ")
    f = parse_expr(src, 2)
    g = fd_lift(lambda p: f(p), 2, arity=2)
    x = (a, b)
    for alpha, tol in [((1, 0), 1e-7), ((0, 1), 1e-7), ((1, 1), 1e-5), ((2, 0), 1e-5)]:
        assert g(x, alpha) == pytest.approx(f(x, alpha), abs=tol * (1 + sum(map(abs, cs))))


@given(st.lists(coef, min_size=3, max_size=3), unit, unit)
def test_mixed_partials_commute(cs, a, b):
    f = parse_expr(f"exp({cs[0]}*x1*x2) * sqrt(1 + x1 + ({cs[1]})^2*x2^2) + {cs[2]}*x1^3*x2", 2)
    x = (a, b)
    # ∂₂(∂₁f) by differencing the exact ∂₁f, against the exact mixed partial
    h = 1e-5
    fd = (f((a, b + h), (1, 0)) - f((a, b - h), (1, 0))) / (2 * h)
    assert f(x, (1, 1)) == pytest.approx(fd, rel=1e-6, abs=1e-6)
    assert f(x, (2, 1)) == pytest.approx(
        (f((a + h, b), (1, 1)) - f((a - h, b), (1, 1))) / (2 * h), rel=1e-5, abs=1e-5)


@given(st.sampled_from(STAT_CHARTS), unit, unit)
def test_cubic_form_is_totally_symmetric(name, fx, fy):
    c = C.chart(name)
    x = _chart_point(c, fx, fy)
    K = difference_tensor(c, x).components
    Cf = np.einsum("lij,lk->ijk", K, c.metric(x))
    for perm in [(1, 0, 2), (0, 2, 1), (2, 1, 0)]:
        np.testing.assert_allclose(Cf, Cf.transpose(perm), atol=1e-10)


@given(st.sampled_from(STAT_CHARTS), unit, unit)
def test_duality_and_involution(name, fx, fy):
    c = C.chart(name)
    x = _chart_point(c, fx, fy)
    pj = c.jets(x)
    gb = conjugate_connection(c, x).components
    # ∂_i g_jk = g(∇_i ∂_j, ∂_k) + g(∂_j, ∇̄_i ∂_k)
    lhs = np.moveaxis(pj.dg, 2, 0)
    rhs = np.einsum("lij,lk->ijk", pj.gamma, pj.g) + np.einsum("lik,jl->ijk", gb, pj.g)
    np.testing.assert_allclose(lhs, rhs, atol=1e-10)
    np.testing.assert_allclose(2 * pj.lc - gb, pj.gamma, atol=1e-12)


@given(st.integers(1, 6), st.integers(1, 3), st.floats(-1, 1), st.floats(0.1, 2.0),
       st.lists(coef, min_size=12, max_size=12))
def test_gauss_legendre_exactness(order, panels, lo, width, cs):
    box = Box((lo,), (lo + width,))
    q = QuadratureRule.gauss_legendre(box, order, panels)
    deg = 2 * order - 1
    p = np.polynomial.Polynomial(cs[: deg + 1])
    exact = p.integ()(lo + width) - p.integ()(lo)
    got = q.integrate(lambda x: p(x[0]))
    assert got == pytest.approx(exact, rel=1e-11, abs=1e-11 * (1 + sum(map(abs, cs))))


@given(st.floats(-20, 20), st.floats(-50, 50))
def test_characteristic_roots_solve_indicial_equation(p, q):
    assume((p - 1) ** 2 - 4 * q >= 0)
    hi, lo = Vr.characteristic_roots(p, q)
    assert hi >= lo
    scale = 1 + abs(p) ** 2 + abs(q)
    for mu in (hi, lo):
        assert abs(mu * (mu - 1) + p * mu + q) <= 1e-12 * scale * (1 + mu * mu)
    assert hi + lo == pytest.approx(1 - p, abs=1e-12 * scale)


@given(st.sampled_from(["normal_distributions", "hyperbolic", "perturbed_fisher"]), unit, unit,
       st.floats(0.0, 2 * math.pi))
def test_frames_are_orthonormal_and_rotation_invariant(name, fx, fy, angle):
    c = C.chart(name)
    x = _chart_point(c, fx, fy)
    E = orthonormal_frame(c, x)
    np.testing.assert_allclose(E.T @ c.metric(x) @ E, np.eye(2), atol=1e-12)
    u = C.map("identity", chart=name)
    V = P.Section(u, [parse_expr("x1*x2", 2), parse_expr("x2^2 - x1", 2)])
    Q = np.array([[math.cos(angle), -math.sin(angle)], [math.sin(angle), math.cos(angle)]])
    np.testing.assert_allclose(P.laplacian(u, V, x, "standard", E @ Q), P.laplacian(u, V, x), atol=1e-9)


@given(st.sampled_from(["parabola", "exp", "perturbed"]), unit)
def test_tension_flavor_coherence(name, f):
    u = {"parabola": lambda: C.map("parabola_curve", lam=[0.5, 1.5]),
         "exp": lambda: C.map("exp_curve", lam=0.7),
         "perturbed": lambda: C.map("perturbed_parabola", lam=[1.0, 2.0])}[name]()
    d = u.source.domain
    x = np.array([d.lower[0] + f * d.widths[0]])
    t_s, t_c, t_r = (P.tension(u, x, fl) for fl in ("standard", "conjugate", "riemannian"))
    np.testing.assert_allclose(t_r, 0.5 * (t_s + t_c), atol=1e-8)


@settings(max_examples=8)
@given(st.integers(0, 2 ** 31 - 1))
def test_jacobi_part_is_nonnegative(seed):
    u = C.map("exp_curve", lam=1.0, connection="exponential")
    om = Box((-0.9,), (0.9,))
    V = Vr.random_probes(u, om, 1, np.random.default_rng(seed))[0]
    q = QuadratureRule.gauss_legendre(V.support, 8, 2)
    res = Vr.second_variation(u, V, V.support, q, "general", return_parts=True)
    assert res.jacobi >= 0.0
