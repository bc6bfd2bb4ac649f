import numpy as np
import pytest

from statvar import catalog as C
from statvar import maps as P
from statvar import variation as Vr
from statvar.errors import NotConvex, OutOfDomain, SupportViolation
from statvar.expr import parse_expr
from statvar.jets import Box, constant
from statvar.manifold import orthonormal_frame
from statvar.quadrature import QuadratureRule


def _rotated_frame(c, x, angle):
    E = orthonormal_frame(c, x)
    if E.shape[0] == 1:
        return -E
    Q = np.array([[np.cos(angle), -np.sin(angle)], [np.sin(angle), np.cos(angle)]])
    return E @ Q


def test_pushforward_examples():
    ident = C.map("identity", chart="normal_distributions")
    np.testing.assert_allclose(P.pushforward(ident, np.array([0.1, 1.2])), np.eye(2))
    par = C.map("parabola_curve", lam=[1.0, 3.0])
    np.testing.assert_allclose(P.pushforward(par, np.array([1.5])), [[3.0], [9.0]])
    gi = C.immersion("paraboloid")
    x = np.array([0.3, -0.4])
    np.testing.assert_allclose(P.pushforward(gi.map, x), np.vstack([np.eye(2), x]))


def test_tension_examples():
    line = C.map("line", p=[0.0, 1.0], q=[2.0, -1.0])
    assert np.allclose(P.tension(line, np.array([0.4])), 0.0)
    par = C.map("parabola_curve", lam=[1.0, 2.0])
    assert P.tension(par, np.array([1.1])) == pytest.approx([6.0, 12.0])
    gi = C.immersion("paraboloid")
    assert P.tension(gi.map, np.array([0.2, 0.1])) == pytest.approx([0.0, 0.0, 2.0])


@pytest.mark.parametrize("name", ["parabola", "exp", "paraboloid", "perturbed"])
def test_flavor_coherence_and_frame_independence(name):
    u = {"parabola": lambda: C.map("parabola_curve", lam=[0.5, 1.5]),
         "exp": lambda: C.map("exp_curve", lam=0.7),
         "paraboloid": lambda: C.immersion("paraboloid").map,
         "perturbed": lambda: C.map("perturbed_parabola", lam=[1.0, 2.0])}[name]()
    for x in u.source.domain.grid(3, inset=0.1):
        t_s, t_c, t_r = (P.tension(u, x, f) for f in ("standard", "conjugate", "riemannian"))
        assert np.max(np.abs(t_r - 0.5 * (t_s + t_c))) < 1e-8
        E = _rotated_frame(u.source, x, 0.7)
        assert np.max(np.abs(P.tension(u, x, "standard", E) - t_s)) < 1e-9


def test_laplacian_examples():
    ident = C.map("identity", chart="euclidean")
    V = P.Section(ident, [constant(1.0, 2), constant(2.0, 2)])
    assert np.allclose(P.laplacian(ident, V, np.zeros(2)), 0.0)
    e1 = C.map("identity", chart="euclidean", chart_params={"m": 1})
    phi = parse_expr("x1^3 - x1", 1)
    V = P.Section(e1, [phi])
    assert P.laplacian(e1, V, np.array([0.5])) == pytest.approx([3.0])


def test_laplacian_frame_independence():
    u = C.map("identity", chart="normal_distributions")
    V = P.Section(u, [parse_expr("x1*x2", 2), parse_expr("x2^2 - x1", 2)])
    x = np.array([0.3, 1.4])
    E = _rotated_frame(u.source, x, 1.1)
    for flavor in ("standard", "conjugate", "riemannian"):
        a, b = P.laplacian(u, V, x, flavor), P.laplacian(u, V, x, flavor, E)
        assert np.max(np.abs(a - b)) < 1e-9


def test_parabola_jacobi_combination_coefficients():
    # Jacobi component along γ = (t²) with V = φ∂: φ̈ + 4φ̇/t − 10φ/t²
    u = C.map("parabola_curve", lam=[1.0])
    phi = parse_expr("x1^3 - 2*x1", 1)
    V = P.Section(u, [phi])
    for t in (0.7, 1.2, 1.9):
        x = np.array([t])
        want = phi(x, (2,)) + 4 * phi(x, (1,)) / t - 10 * phi(x) / t ** 2
        assert Vr.jacobi_term(u, V, x) == pytest.approx([want], rel=1e-12)


def test_bitension_zero_for_harmonic_and_biharmonic():
    line = C.map("line", p=[0.0, 1.0], q=[2.0, -1.0])
    assert np.max(np.abs(P.bitension(line, np.array([0.5])))) < 1e-9
    par = C.map("parabola_curve", lam=[1.0, 2.0])
    for x in par.source.domain.grid(5, inset=0.05):
        assert np.max(np.abs(P.bitension(par, x))) < 1e-5
    mix = C.map("exp_curve", lam=1.0)
    assert np.max(np.abs(P.bitension(mix, np.array([0.3])))) < 1e-5


def test_bitension_parts():
    par = C.map("perturbed_parabola", lam=[1.0])
    x = np.array([1.2])
    total, parts = P.bitension(par, x, parts=True)
    terms = [v for k, v in parts.items() if k != "tension"]
    np.testing.assert_allclose(sum(terms), total, atol=1e-12)
    np.testing.assert_allclose(parts["tension"], P.tension(par, x), atol=1e-12)


def test_bienergy_examples():
    line = C.map("line", p=[0.0, 0.0], q=[1.0, 1.0])
    om = Box((0.1,), (0.9,))
    assert P.bienergy(line, om, QuadratureRule.gauss_legendre(om)) == pytest.approx(0.0, abs=1e-20)
    lam, a, b = 0.8, 0.6, 1.7
    par = C.map("parabola_curve", lam=[lam])
    om = Box((a,), (b,))
    assert P.bienergy(par, om, QuadratureRule.gauss_legendre(om)) == pytest.approx(36 * lam ** 2 * (b - a))
    gi = C.immersion("paraboloid")
    om = Box((-0.5, -0.5), (0.5, 0.5))
    q = QuadratureRule.gauss_legendre(om, 4, 2)
    vol = q.integrate(lambda x: P.volume_density(gi.induced, x))
    assert P.bienergy(gi.map, om, q) == pytest.approx(4 * vol)


def test_induce_from_graph_examples():
    gi = C.immersion("paraboloid")
    x = np.array([0.1, 0.2])
    np.testing.assert_allclose(gi.induced.metric(x), np.eye(2))
    assert gi.improper_affine_sphere
    quartic = P.induce_from_graph(parse_expr("x1^4", 1), Box((0.5,), (2.0,)))
    assert quartic.induced.metric(np.array([1.5]))[0, 0] == pytest.approx(12 * 1.5 ** 2)
    assert not quartic.improper_affine_sphere
    with pytest.raises(NotConvex):
        P.induce_from_graph(parse_expr("x1^2 - x2^2", 2), Box((-1.0, -1.0), (1.0, 1.0)))


def test_graph_immersion_shape_operator_and_gauss():
    for m in (2, 3):
        gi = C.immersion("paraboloid", m=m)
        x = np.full(m, 0.25)
        assert np.all(P.shape_operator(gi, x) == 0)
        assert P.gauss_residual(gi, x) < 1e-9
        assert np.max(np.abs(P.affine_bitension(gi, x))) == 0.0
    q = P.induce_from_graph(parse_expr("exp(x1) + x2^2 + x1*x2/4", 2), Box((-1.0, -1.0), (1.0, 1.0)))
    assert P.gauss_residual(q, np.array([0.3, -0.2])) < 1e-9


def _ibp_setup(name):
    u = C.map("identity", chart=name)
    om = Box((-1.0, 1.0), (1.0, 2.0))
    b = Vr.bump(om)
    xi = P.Section(u, [b * parse_expr("1 + x1", 2), b], om)
    eta = P.Section(u, [parse_expr("x2", 2), parse_expr("x1^2", 2)])
    return u, om, xi, eta, QuadratureRule.gauss_legendre(om, 8, 2)


def test_ibp_residual_riemannian_and_eta_zero():
    u, om, xi, eta, q = _ibp_setup("hyperbolic")
    assert P.ibp_residual(u.source, xi, eta, om, q) < 1e-6
    zero = P.Section(u, [constant(0.0, 2), constant(0.0, 2)])
    assert P.ibp_residual(u.source, xi, zero, om, q) == 0.0


def test_ibp_requires_compact_support():
    u, om, xi, eta, q = _ibp_setup("normal_distributions")
    with pytest.raises(SupportViolation):
        P.ibp_residual(u.source, eta, eta, om, q)


def test_section_support_is_checked():
    u = C.map("parabola_curve", lam=[1.0])
    with pytest.raises(SupportViolation):
        P.Section(u, [parse_expr("x1", 1)], Box((0.7,), (1.5,)))


def test_map_must_stay_in_target():
    src = C.chart("euclidean", m=1, lower=[0.0], upper=[1.0])
    tgt = C.chart("positive_orthant", m=1)
    with pytest.raises(OutOfDomain):
        P.MapModel(src, tgt, [parse_expr("10*x1", 1)])
