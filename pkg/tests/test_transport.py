import math

import numpy as np
import pytest
from scipy.integrate import dblquad, quad

from ehresmann.bundle import BundleChart
from ehresmann.connection import ChristoffelField, LinearChristoffel
from ehresmann.liegroup import MatrixLieGroup
from ehresmann.principal import FieldStrength, GaugeField
from ehresmann.associate import moving_frame_gauge_field
from ehresmann.samples import random_gauge_field, random_linear_christoffel
from ehresmann.transport import (
    Curve,
    NumericAbortError,
    OpenLoopError,
    Path,
    flux,
    group_transport,
    holonomy_loop,
    parallel_transport_fiber,
    rk4,
    u1_angle,
)

U1, SO3 = MatrixLieGroup.u1(), MatrixLieGroup.so3()


def _monopole():
    return GaugeField.from_coeffs(U1, ("x1", "x2"), [["0"], ["0.5*(1 - cos(x1))"]])


def test_closed_form_scalar_transport():
    # f' = -cos(t) f along x = t, so f(t) = f0 exp(-sin t)
    G = ChristoffelField(BundleChart.standard(1, 1), [["cos(x1)*f1"]])
    r = parallel_transport_fiber(G, Curve(["t"], 0.0, 2.0), [1.5], steps=200)
    exact = 1.5 * math.exp(-math.sin(2.0))
    assert abs(r.value[0] - exact) <= 1e-9
    assert r.error_estimate <= 1e-8
    assert abs(r.value[0] - exact) <= 10 * r.error_estimate + 1e-14
    assert r.step_size == pytest.approx(0.01)


def _rotation(omega):
    c = BundleChart.standard(1, 2)
    return LinearChristoffel(c, [[["0", f"{-omega}"]], [[f"{omega}", "0"]]]).embed()


def test_rk4_order():
    omega = 20.0
    G = _rotation(omega)
    c = Curve(["t"], 0.0, 1.0)
    exact = np.array([math.cos(omega), -math.sin(omega)])
    errs = [np.max(np.abs(parallel_transport_fiber(G, c, [1.0, 0.0], N, False).value - exact))
            for N in (100, 200, 400)]
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 3.8, orders


def test_rk4_rejects_bad_steps_and_aborts():
    with pytest.raises(ValueError):
        rk4(lambda t, y: y, [1.0], 0.0, 1.0, 0)
    G = ChristoffelField(BundleChart.standard(1, 1), [["f1^2"]])
    with pytest.raises(NumericAbortError) as exc:
        parallel_transport_fiber(G, Curve(["t"], 0.0, 1.0), [-1e3], steps=100)
    assert exc.value.step >= 1


def test_group_transport_stays_orthogonal():
    A = random_gauge_field(np.random.default_rng(1), SO3, ("x1", "x2"))
    c = Curve(["cos(t)", "sin(3*t)"], 0.0, 6.0)
    r = group_transport(A, c, steps=10000, estimate_error=False)
    assert SO3.membership_residual(r.value) <= 1e-12


def test_group_transport_abelian_closed_form():
    A = _monopole()
    th0 = 1.1
    c = Curve([f"{th0}", "2*pi*t"])
    r = group_transport(A, c, steps=500)
    want = -quad(lambda t: 0.5 * (1 - math.cos(th0)) * 2 * math.pi, 0, 1)[0]
    assert abs(u1_angle(r.value) - math.remainder(want, 2 * math.pi)) <= 1e-10


def test_monopole_holonomy_matches_flux():
    A = _monopole()
    th0 = 0.9
    loop = Curve([f"{th0}", "2*pi*t"])
    with pytest.raises(OpenLoopError):
        holonomy_loop(A, loop)
    hol = holonomy_loop(A, loop, steps=500, periods=[0, 2 * math.pi])
    # independent quadrature of the field strength over the cap
    cap = dblquad(lambda ph, th: 0.5 * math.sin(th), 0, th0, 0, 2 * math.pi)[0]
    ours = flux(FieldStrength(A), [0, th0, 0, 2 * math.pi], grid=100)
    assert ours.gauge_invariant
    assert abs(ours.value[0] - cap) <= 1e-8
    assert abs(math.remainder(u1_angle(hol.value) + cap, 2 * math.pi)) <= 1e-9


def test_total_monopole_flux():
    r = flux(FieldStrength(_monopole()), [0, math.pi, 0, 2 * math.pi], grid=200)
    assert abs(r.value[0] - 2 * math.pi) <= 1e-8


def test_flux_nonabelian_flag():
    A = random_gauge_field(np.random.default_rng(2), SO3, ("x1", "x2"))
    assert not flux(FieldStrength(A), [0, 0.1, 0, 0.1], grid=4).gauge_invariant


def test_path_joins_and_linear_holonomy():
    c = BundleChart.standard(2, 2)
    # a flat connection has trivial holonomy on any loop
    L = LinearChristoffel(c, [[["0", "0"], ["0", "0"]], [["0", "0"], ["0", "0"]]])
    sq = Path([Curve(["t", "0"]), Curve(["1", "t"]), Curve(["1 - t", "1"]), Curve(["0", "1 - t"])])
    H = holonomy_loop(L.embed(), sq, steps=20)
    assert np.allclose(H.value, np.eye(2), atol=0)
    with pytest.raises(ValueError):
        Path([Curve(["t", "0"]), Curve(["2", "t"])])


def test_sphere_octant_holonomy():
    # Levi-Civita connection of the unit sphere in stereographic coordinates
    su, sv = "(-2*x1/(1 + x1^2 + x2^2))", "(-2*x2/(1 + x1^2 + x2^2))"
    L = LinearChristoffel(BundleChart.standard(2, 2),
                          [[[su, sv], [sv, f"-{su}"]], [[f"-{sv}", su], [su, sv]]])
    loop = Path([Curve(["t", "0"]), Curve(["cos(pi*t/2)", "sin(pi*t/2)"]), Curve(["0", "1 - t"])])
    H = holonomy_loop(L.embed(), loop, steps=400).value
    # the octant has area pi/2, so vectors rotate by a quarter turn
    assert abs(math.atan2(H[1, 0], H[0, 0]) - math.pi / 2) <= 1e-9
    assert np.allclose(H.T @ H, np.eye(2), atol=1e-10)


def test_transport_exponential_decay():
    G = ChristoffelField(BundleChart.standard(1, 1), [["f1"]])
    r = parallel_transport_fiber(G, Curve(["t"]), [2.0], steps=200)
    assert abs(r.value[0] - 2.0 * math.exp(-1.0)) <= 1e-10


def test_linear_transport_superposition():
    rng = np.random.default_rng(4)
    G = random_linear_christoffel(rng, BundleChart.standard(2, 2)).embed()
    c = Curve(["sin(t)", "t^2"], 0.0, 1.0)
    u, v = rng.normal(size=2), rng.normal(size=2)

    def T(f):
        return parallel_transport_fiber(G, c, f, steps=200, estimate_error=False).value

    assert np.allclose(T(1.5 * u - 0.7 * v), 1.5 * T(u) - 0.7 * T(v), atol=1e-9)


def test_constant_and_zero_gauge_fields():
    A = GaugeField.from_coeffs(SO3, ("x1", "x2"), [["0.7", "0", "0.1"], ["-0.2", "0.4", "0"]])
    seg = Curve(["t", "2*t"])
    want = SO3.exp(-(np.array([0.7, 0, 0.1]) + 2 * np.array([-0.2, 0.4, 0])))
    assert np.allclose(group_transport(A, seg, steps=100).value, want, atol=1e-10)
    Z = GaugeField.zero(SO3, ("x1", "x2"))
    assert np.array_equal(group_transport(Z, Curve(["cos(t)", "t"]), steps=10).value, np.eye(3))


def test_rectangle_holonomy_is_flux():
    A = GaugeField.from_coeffs(U1, ("x1", "x2"), [["sin(x2)"], ["x1^2"]])
    a, b, c, d = 0.2, 1.1, -0.3, 0.8
    loop = Path([Curve([f"{a} + {b - a}*t", f"{c}"]), Curve([f"{b}", f"{c} + {d - c}*t"]),
                 Curve([f"{b} - {b - a}*t", f"{d}"]), Curve([f"{a}", f"{d} - {d - c}*t"])])
    hol = holonomy_loop(A, loop, steps=400)
    F = flux(FieldStrength(A), [a, b, c, d], grid=100).value[0]
    want = dblquad(lambda y, x: 2 * x - math.cos(y), a, b, c, d)[0]
    assert abs(F - want) <= 1e-10
    assert abs(u1_angle(hol.value) + F) <= 1e-10


def test_sphere_octant_via_moving_frame():
    su, sv = "(-2*x1/(1 + x1^2 + x2^2))", "(-2*x2/(1 + x1^2 + x2^2))"
    L = LinearChristoffel(BundleChart.standard(2, 2),
                          [[[su, sv], [sv, f"-{su}"]], [[f"-{sv}", su], [su, sv]]])
    loop = Path([Curve(["t", "0"]), Curve(["cos(pi*t/2)", "sin(pi*t/2)"]), Curve(["0", "1 - t"])])
    g = holonomy_loop(moving_frame_gauge_field(L), loop, steps=400).value
    H = holonomy_loop(L.embed(), loop, steps=400).value
    assert np.allclose(g, H, atol=1e-12)
    assert abs(math.atan2(g[1, 0], g[0, 0]) - math.pi / 2) <= 1e-9
