import numpy as np
import pytest

from ehresmann.associate import (
    RepresentationMatrices,
    StarInfCandidate,
    check_association_candidate,
    check_equivariant_morphism,
    induce_connection,
    induce_linear,
    moving_frame_gauge_field,
    product_preservation_check,
    reproducing_check,
    transport_equivariance_check,
    universality_residual,
)
from ehresmann.bundle import BundleChart
from ehresmann.connection import LinearChristoffel, classical_curvature
from ehresmann.exprdsl import add, parse_expr
from ehresmann.liegroup import ActionGenerators, MatrixLieGroup, left_multiplication_action
from ehresmann.principal import FieldStrength, GaugeField
from ehresmann.samples import (
    random_gauge_field,
    random_linear_christoffel,
    random_section,
    random_vector_field,
)
from ehresmann.transport import Curve

XS = ("x1", "x2")
U1, SO3, SU2 = MatrixLieGroup.u1(), MatrixLieGroup.so3(), MatrixLieGroup.su2()


def test_representation_validation():
    with pytest.raises(ValueError):
        RepresentationMatrices(SO3, 2 * SO3.basis)
    r = RepresentationMatrices.standard(SO3).direct_sum(RepresentationMatrices.adjoint(SO3))
    assert r.n == 6
    g = SO3.exp([0.1, 0.2, 0.3])
    assert np.allclose(r.group_map(g)[:3, :3], g)


def test_induced_connection_monopole_example():
    A = GaugeField.from_coeffs(U1, XS, [["0"], ["0.5*(1 - cos(x1))"]])
    G = induce_connection(A, RepresentationMatrices.u1_charge(U1, 1).generators())
    a = 0.5 * (1 - np.cos(1.0))
    # Gamma_2 f = a J f
    assert np.allclose(G([1.0, 0.0], [1.0, 0.0])[:, 1], [0.0, a], atol=1e-15)
    assert np.allclose(G([1.0, 0.0], [1.0, 0.0])[:, 0], 0, atol=0)


@pytest.mark.parametrize("G", [U1, SO3, SU2], ids=["U1", "SO3", "SU2"])
def test_universality_linear(G):
    rng = np.random.default_rng(G.d)
    A = random_gauge_field(rng, G, XS)
    K = RepresentationMatrices.standard(G).generators()
    chart = BundleChart(XS, K.fiber_vars)
    for _ in range(5):
        s = random_section(rng, chart)
        X, Y = random_vector_field(rng, chart), random_vector_field(rng, chart)
        res = universality_residual(A, K, s, X, Y, rng.uniform(-1, 1, 2))
        assert np.max(np.abs(res.v)) <= 1e-12


def test_universality_left_multiplication_and_translation():
    rng = np.random.default_rng(5)
    A = random_gauge_field(rng, SO3, XS)
    K = left_multiplication_action(SO3)
    chart = BundleChart(XS, K.fiber_vars)
    s = random_section(rng, chart)
    X, Y = random_vector_field(rng, chart), random_vector_field(rng, chart)
    assert np.max(np.abs(universality_residual(A, K, s, X, Y, [0.2, -0.3]).v)) <= 1e-12
    # a non-linear action: U1 translating an angle
    Au = random_gauge_field(rng, U1, XS)
    Kt = ActionGenerators(U1, ("f1",), [["1"]])
    c1 = BundleChart(XS, ("f1",))
    s = random_section(rng, c1)
    X, Y = random_vector_field(rng, c1), random_vector_field(rng, c1)
    assert np.max(np.abs(universality_residual(Au, Kt, s, X, Y, [0.4, 0.1]).v)) <= 1e-13


def test_moving_frame_round_trip():
    rng = np.random.default_rng(8)
    L = random_linear_christoffel(rng, BundleChart.standard(2, 3))
    A = moving_frame_gauge_field(L)
    assert A.group.name == "GL3"
    L2 = induce_linear(A, RepresentationMatrices.standard(A.group))
    for _ in range(5):
        x = rng.uniform(-1, 1, 2)
        assert np.allclose(L(x), L2(x), atol=1e-15)
    # classical curvature equals the gl(n) field strength
    x = [0.3, -0.6]
    F = FieldStrength(A)(x)[0, 1]
    assert np.allclose(classical_curvature(L).matrices(x)[0, 1], A.group.hat(F), atol=1e-13)


def test_product_preservation():
    rng = np.random.default_rng(9)
    A = random_gauge_field(rng, SO3, XS)
    K1 = RepresentationMatrices.standard(SO3).generators()
    K2 = left_multiplication_action(SO3)
    assert product_preservation_check(A, K1, K2).passed


def test_reproducing_and_transport_equivariance():
    rng = np.random.default_rng(10)
    A = random_gauge_field(rng, SO3, XS)
    c = Curve(["0.3*cos(t)", "0.5*sin(2*t)"], 0.0, 1.5)
    assert reproducing_check(A, c, steps=400).passed
    for rho in (RepresentationMatrices.standard(SO3), RepresentationMatrices.adjoint(SO3)):
        rep = transport_equivariance_check(A, rho, c, [1.0, -0.5, 0.2], steps=400)
        assert rep.passed, rep
    Au = random_gauge_field(rng, U1, XS)
    rep = transport_equivariance_check(Au, RepresentationMatrices.u1_charge(U1, 3), c, [1.0, 0.0],
                                       steps=400)
    assert rep.passed


def test_equivariant_morphism():
    rng = np.random.default_rng(11)
    A = random_gauge_field(rng, SO3, XS)
    rho = RepresentationMatrices.standard(SO3)
    s = random_section(rng, BundleChart.standard(2, 3))
    assert check_equivariant_morphism(A, rho, rho, 2 * np.eye(3), s).passed
    # standard and adjoint are isomorphic for SO3 through the identity map
    assert check_equivariant_morphism(A, rho, RepresentationMatrices.adjoint(SO3), np.eye(3), s).passed
    assert not check_equivariant_morphism(A, rho, rho, np.diag([1.0, 2.0, 3.0]), s).passed


# candidate verifier ---------------------------------------------------------


def test_candidate_true_induction_passes():
    rng = np.random.default_rng(12)
    for G in (U1, SO3, SU2):
        A = random_gauge_field(rng, G, XS)
        rho = RepresentationMatrices.standard(G)
        rep = check_association_candidate(induce_linear(A, rho), A, StarInfCandidate.constant(XS, rho))
        assert rep.passed, rep


def test_candidate_c1_fails_parallel_only():
    A = GaugeField.from_coeffs(U1, XS, [["0.7"], ["-0.4"]])
    rho = RepresentationMatrices.u1_charge(U1, 1)
    L = induce_linear(A, rho)
    phi = "1 + 0.5*x1"
    # S_1 = phi(x) J, indexed [alpha][a][omega]
    S = StarInfCandidate(XS, 2, 1, [[["0", f"-({phi})"]], [[phi, "0"]]])
    rep = check_association_candidate(L, A, S)
    assert rep.verdicts == {"parallel": False, "representation": True, "curvature": True}


def test_candidate_scaled_rho_with_curved_field():
    # S = phi(x) rho with non-constant A: parallelism and curvature both break
    A = GaugeField.from_coeffs(U1, XS, [["0"], ["0.5*(1 - cos(x1))"]])
    L = induce_linear(A, RepresentationMatrices.u1_charge(U1, 1))
    phi = "(1 + 0.5*x1)"
    S = StarInfCandidate(XS, 2, 1, [[["0", f"-{phi}"]], [[phi, "0"]]])
    rep = check_association_candidate(L, A, S)
    assert rep.verdicts == {"parallel": False, "representation": True, "curvature": False}


def test_candidate_c2_fails_representation_only():
    A = GaugeField.from_coeffs(SO3, XS, [["0", "0", "1"], ["0", "0", "0"]])
    rho = RepresentationMatrices.standard(SO3)
    L = induce_linear(A, rho)
    S = StarInfCandidate(XS, 3, 3, [[[2 * SO3.basis[a, al, w] for w in range(3)] for a in range(3)]
                                    for al in range(3)])
    rep = check_association_candidate(L, A, S)
    assert rep.verdicts == {"parallel": True, "representation": False, "curvature": True}


def test_candidate_c3_fails_curvature_only():
    rng = np.random.default_rng(13)
    A = random_gauge_field(rng, SO3, XS)
    rho = RepresentationMatrices.standard(SO3)
    L = induce_linear(A, rho)
    # add a scalar term phi_mu(x) I with d phi != 0
    phis = ["0", "x1"]
    ex = [[[add(L.exprs[al][mu][w], parse_expr(phis[mu], XS)) if al == w else L.exprs[al][mu][w]
            for w in range(3)] for mu in range(2)] for al in range(3)]
    Lp = LinearChristoffel(L.chart, ex)
    rep = check_association_candidate(Lp, A, StarInfCandidate.constant(XS, rho))
    assert rep.verdicts == {"parallel": True, "representation": True, "curvature": False}
    assert rep.curvature.max_residual > 0.5
