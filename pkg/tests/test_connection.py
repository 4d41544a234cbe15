import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from ehresmann.bundle import (
    BaseVectorField,
    BundleChart,
    PointOnTotalSpace,
    SectionField,
    TangentVector,
)
from ehresmann.connection import (
    ChartMismatchError,
    ChristoffelField,
    LinearChristoffel,
    check_parallel_homomorphism,
    classical_curvature,
    covariant_derivative,
    curvature_coeffs,
    curvature_identity_residual,
    horizontal_lift,
    is_linear,
    iterated_covariant_derivative,
    nijenhuis_fd,
    product_connection,
    project,
    vertical_lift_connection,
)
from ehresmann.exprdsl import Num, add, mul
from ehresmann.samples import (
    random_christoffel,
    random_linear_christoffel,
    random_section,
    random_vector_field,
)

C21 = BundleChart.standard(2, 1)


def test_projection_kills_horizontal_lift():
    rng = np.random.default_rng(0)
    c = BundleChart.standard(3, 2)
    G = random_christoffel(rng, c)
    for _ in range(20):
        p = PointOnTotalSpace(rng.normal(size=3), rng.normal(size=2))
        X = rng.normal(size=3)
        lift = horizontal_lift(G, p, X)
        assert np.max(np.abs(project(G, lift).v)) <= 1e-14
        # vertical vectors project to themselves
        w = rng.normal(size=2)
        assert np.array_equal(project(G, TangentVector(p, np.zeros(3), w)).v, w)


def test_zero_connection_derivative_is_plain():
    G = ChristoffelField.zero(C21)
    s = SectionField(C21, ["x1^2*x2"])
    X = BaseVectorField(C21, ["1", "0"])
    assert covariant_derivative(G, s, X, [3.0, 2.0]).v[0] == pytest.approx(12.0)


def test_parallel_section_example():
    # Gamma = f1 along x1: s = exp(-x1) is parallel
    G = ChristoffelField(C21, [["f1", "0"]])
    s = SectionField(C21, ["exp(-x1)"])
    X = BaseVectorField.coordinate(C21, 0)
    for x in ([0.0, 0.0], [1.3, -2.0], [-0.4, 0.7]):
        assert abs(covariant_derivative(G, s, X, x).v[0]) <= 1e-15


def test_curvature_example_against_nijenhuis():
    # Gamma_1 = 0, Gamma_2 = x1 f1, so R^1_{12} = d_1 Gamma_2 = f1
    G = ChristoffelField(C21, [["0", "x1*f1"]])
    R = curvature_coeffs(G)([0.5, 0.2], [2.0])
    assert R[0, 0, 1] == pytest.approx(2.0, abs=1e-15)
    assert R[0, 1, 0] == pytest.approx(-2.0, abs=1e-15)
    assert np.allclose(nijenhuis_fd(G, [0.5, 0.2], [2.0]), R, atol=1e-8)


def test_curvature_against_nijenhuis_random():
    rng = np.random.default_rng(11)
    c = BundleChart.standard(3, 2)
    worst = 0.0
    for _ in range(10):
        G = random_christoffel(rng, c)
        x, f = rng.uniform(-1, 1, 3), rng.uniform(-1, 1, 2)
        R = curvature_coeffs(G)(x, f)
        worst = max(worst, np.max(np.abs(R - nijenhuis_fd(G, x, f))))
        assert np.allclose(R, -np.swapaxes(R, 1, 2), atol=0)
    assert worst <= 1e-6


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_curvature_identity_property(seed):
    rng = np.random.default_rng(seed)
    c = BundleChart.standard(2, 2)
    G = random_christoffel(rng, c)
    s = random_section(rng, c)
    X = random_vector_field(rng, c)
    Y = random_vector_field(rng, c)
    x = rng.uniform(-1, 1, 2)
    res = curvature_identity_residual(G, s, X, Y, x)
    scale = 1.0 + np.max(np.abs(curvature_coeffs(G)(x, s(x))))
    assert np.max(np.abs(res.v)) <= 1e-10 * scale


def test_is_linear_examples():
    ok, L = is_linear(ChristoffelField(C21, [["3*f1", "0"]]))
    assert ok
    assert L([0.2, 0.1])[0, 0, 0] == pytest.approx(3.0)
    assert not is_linear(ChristoffelField(C21, [["f1^2", "0"]]))[0]
    assert not is_linear(ChristoffelField(C21, [["f1 + 0.000001*f1^2", "0"]]))[0]
    assert not is_linear(ChristoffelField(C21, [["f1 + 1", "0"]]))[0]


def test_embed_round_trip():
    rng = np.random.default_rng(3)
    c = BundleChart.standard(2, 2)
    L = random_linear_christoffel(rng, c)
    ok, L2 = is_linear(L.embed())
    assert ok
    for _ in range(5):
        x = rng.uniform(-1, 1, 2)
        assert np.allclose(L(x), L2(x), atol=1e-14)


def _sympy_riemann(G, xs):
    n = len(xs)
    R = np.empty((n, n, n, n), dtype=object)
    for a in range(n):
        for mu in range(n):
            for nu in range(n):
                for w in range(n):
                    e = sp.diff(G[a][nu][w], xs[mu]) - sp.diff(G[a][mu][w], xs[nu])
                    e += sum(G[a][mu][b] * G[b][nu][w] - G[a][nu][b] * G[b][mu][w]
                             for b in range(n))
                    R[a, mu, nu, w] = sp.simplify(e)
    return R


def test_sphere_classical_curvature_against_sympy():
    th, ph = sp.symbols("x1 x2")
    Gs = [[[0, 0], [0, -sp.sin(th) * sp.cos(th)]],
          [[0, sp.cos(th) / sp.sin(th)], [sp.cos(th) / sp.sin(th), 0]]]
    Rs = _sympy_riemann(Gs, [th, ph])
    assert sp.simplify(Rs[0, 0, 1, 1] - sp.sin(th) ** 2) == 0
    c = BundleChart.standard(2, 2)
    L = LinearChristoffel(c, [[["0", "0"], ["0", "-sin(x1)*cos(x1)"]],
                              [["0", "cos(x1)/sin(x1)"], ["cos(x1)/sin(x1)", "0"]]])
    R = classical_curvature(L)
    for th0 in (0.4, 1.1, 2.3):
        x = [th0, 0.7]
        want = np.array([[[[float(Rs[a, m, n, w].subs({th: th0, ph: 0.7}))
                            for w in range(2)] for n in range(2)] for m in range(2)]
                         for a in range(2)])
        assert np.allclose(R(x), want, atol=1e-13)
        # the general curvature of the embedded connection is R_classical . f
        f = np.array([0.3, -1.2])
        Rg = curvature_coeffs(L.embed())(x, f)
        assert np.allclose(Rg, np.einsum("amnw,w->amn", want, f), atol=1e-13)


def test_product_connection_blocks():
    rng = np.random.default_rng(4)
    G1 = random_christoffel(rng, BundleChart.standard(2, 1))
    G2 = random_christoffel(rng, BundleChart.standard(2, 2))
    P = product_connection(G1, G2)
    assert P.chart.fiber_vars == ("f1", "f2", "f3")
    x, f = [0.1, 0.4], [0.5, -0.2, 0.9]
    assert np.allclose(P(x, f)[:1], G1(x, f[:1]), atol=0)
    assert np.allclose(P(x, f)[1:], G2(x, f[1:]), atol=0)
    R = curvature_coeffs(P)(x, f)
    assert np.allclose(R[:1], curvature_coeffs(G1)(x, f[:1]), atol=1e-14)
    with pytest.raises(ChartMismatchError):
        product_connection(G1, random_christoffel(rng, BundleChart(("y1", "y2"), ("f1",))))


def test_parallel_homomorphism():
    G = ChristoffelField(C21, [["x2*f1", "sin(x1)*f1"]])
    # scaling by a constant preserves a linear connection
    assert check_parallel_homomorphism(["2*f1"], G, G).passed
    assert not check_parallel_homomorphism(["f1^2"], G, G).passed
    assert not check_parallel_homomorphism(["x1*f1"], G, G).passed


def test_vertical_lift_connection_matches_epsilon_family():
    # s_eps = s + eps t: the lifted derivative of (s, t) along X carries
    # d/deps D_X s_eps in its second block, compared by central differences
    rng = np.random.default_rng(21)
    c = BundleChart.standard(2, 2)
    G = random_christoffel(rng, c)
    s, t = random_section(rng, c), random_section(rng, c)
    X = random_vector_field(rng, c)
    Gv = vertical_lift_connection(G)
    sig = SectionField(Gv.chart, list(s.exprs) + list(t.exprs))
    h = 1e-5
    for _ in range(10):
        x = rng.uniform(-1, 1, 2)
        D = covariant_derivative(Gv, sig, X, x).v
        fam = [SectionField(c, [add(a, mul(Num(e), b)) for a, b in zip(s.exprs, t.exprs)])
               for e in (h, -h)]
        fd = (covariant_derivative(G, fam[0], X, x).v - covariant_derivative(G, fam[1], X, x).v) / (2 * h)
        assert np.allclose(D[:2], covariant_derivative(G, s, X, x).v, atol=1e-14)
        assert np.max(np.abs(D[2:] - fd)) <= 1e-8


def test_projector_is_idempotent_and_kills_lifts():
    rng = np.random.default_rng(11)
    G = random_christoffel(rng, C21)
    for _ in range(10):
        p = PointOnTotalSpace(rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 1))
        v = TangentVector(p, rng.normal(size=2), rng.normal(size=1))
        once = project(G, v)
        assert np.allclose(project(G, once.as_tangent()).v, once.v, atol=0)
        assert np.allclose(project(G, horizontal_lift(G, p, v.dx)).v, 0, atol=1e-15)


def test_curvature_sign_example():
    G = ChristoffelField(C21, [["f1*x2", "0"]])
    R = curvature_coeffs(G)([0.3, -1.2], [0.7])
    assert R[0, 0, 1] == pytest.approx(-0.7, abs=1e-15)
    assert R[0, 1, 0] == pytest.approx(0.7, abs=1e-15)
    assert np.allclose(R, nijenhuis_fd(G, [0.3, -1.2], [0.7]), atol=1e-8)
    assert np.all(curvature_coeffs(ChristoffelField.zero(C21))([0.1, 0.2], [0.3]) == 0)


def test_constant_linear_connection_curvature_is_commutator():
    rng = np.random.default_rng(5)
    A = rng.normal(size=(2, 2, 2))  # A[mu] acting on the fiber
    chart = BundleChart.standard(2, 2)
    rows = [[" + ".join(f"{float(A[mu, a, w])!r}*f{w + 1}" for w in range(2)) for mu in range(2)]
            for a in range(2)]
    G = ChristoffelField(chart, rows)
    f = rng.normal(size=2)
    R = curvature_coeffs(G)([0.2, 0.4], f)
    want = (A[0] @ A[1] - A[1] @ A[0]) @ f
    assert np.allclose(R[:, 0, 1], want, atol=1e-14)


def test_vertical_lift_of_linear_connection_repeats_gamma():
    rng = np.random.default_rng(6)
    L = random_linear_christoffel(rng, BundleChart.standard(2, 2))
    G = L.embed()
    Gv = vertical_lift_connection(G)
    x, f, df = rng.normal(size=2), rng.normal(size=2), rng.normal(size=2)
    out = Gv(x, np.concatenate([f, df]))
    assert np.allclose(out[:2], G(x, f), atol=1e-15)
    assert np.allclose(out[2:], G(x, df), atol=1e-14)


def test_iterated_derivative_one_dimensional_pattern():
    # m = n = 1 with X = Y = d/dx: fvarydot = w' + dGamma/df(x, s) w, w = s' + Gamma(x, s)
    C11 = BundleChart.standard(1, 1)
    gam, sec = "sin(x1)*f1^2 + x1", "exp(x1)*0.3"
    x, f = sp.symbols("x1 f1")
    g = sp.sin(x) * f**2 + x
    s = sp.exp(x) * sp.Rational(3, 10)
    w = sp.diff(s, x) + g.subs(f, s)
    want = sp.diff(w, x) + sp.diff(g, f).subs(f, s) * w
    e = BaseVectorField.coordinate(C11, 0)
    sv = iterated_covariant_derivative(ChristoffelField(C11, [[gam]]), SectionField(C11, [sec]), e, e, [0.6])
    assert sv.fdot[0] == pytest.approx(float(w.subs(x, 0.6)), abs=1e-13)
    assert sv.fvary[0] == pytest.approx(float(w.subs(x, 0.6)), abs=1e-13)
    assert sv.fvarydot[0] == pytest.approx(float(want.subs(x, 0.6)), abs=1e-12)


def test_product_with_trivial_factor_projects_to_first():
    rng = np.random.default_rng(8)
    G1 = random_christoffel(rng, C21)
    P = product_connection(G1, ChristoffelField.zero(BundleChart.standard(2, 2)))
    x, f = rng.normal(size=2), rng.normal(size=3)
    g = P(x, f)
    assert np.allclose(g[:1], G1(x, f[:1]), atol=0) and np.all(g[1:] == 0)
    v1 = P.chart.fiber_vars[0]
    assert check_parallel_homomorphism([v1], P, G1).passed
