"""Parallel transport, holonomy and flux.

Fixed-step RK4 throughout. Fiber transport integrates ``fdot = -Gamma(x, f)
xdot``; group transport integrates ``gammadot = -A(xdot) gamma``. Every result
carries a Richardson error estimate from a rerun with twice the steps.
Loops are traversed forward in the curve parameter.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence, Union

import numpy as np
from scipy.integrate import simpson

from ehresmann import dual
from ehresmann.connection import ChristoffelField, is_linear
from ehresmann.exprdsl import Compiled, ExprDomainError, as_expr, check_var_name
from ehresmann.principal import FieldStrength, GaugeField


class NumericAbortError(ArithmeticError):
    def __init__(self, step: int, what: str = "state"):
        self.step = step
        super().__init__(f"non-finite {what} at integration step {step}")


class OpenLoopError(ValueError):
    pass


class Curve:
    """``t -> x(t)`` on ``[t0, t1]`` with expression components in one parameter."""

    def __init__(self, exprs: Sequence, t0: float = 0.0, t1: float = 1.0, param: str = "t"):
        self.param = check_var_name(param)
        self.exprs = tuple(as_expr(e, (param,)) for e in exprs)
        if not self.exprs:
            raise ValueError("curve needs at least one component")
        self.t0 = float(t0)
        self.t1 = float(t1)
        if not self.t1 > self.t0:
            raise ValueError("curve interval must have t1 > t0")
        self._fn = Compiled(self.exprs, (param,))

    @property
    def m(self) -> int:
        return len(self.exprs)

    def point(self, t: float) -> np.ndarray:
        return np.array(self._fn([float(t)]), dtype=float)

    def velocity(self, t: float) -> np.ndarray:
        _, d = dual.jvp(self._fn, [float(t)], [1.0])
        return np.array(d, dtype=float)

    def start(self) -> np.ndarray:
        return self.point(self.t0)

    def end(self) -> np.ndarray:
        return self.point(self.t1)


class Path:
    """Curves traversed one after another; each piece gets the full step count."""

    def __init__(self, pieces: Sequence[Curve], join_tol: float = 1e-9):
        self.pieces = tuple(pieces)
        if not self.pieces:
            raise ValueError("empty path")
        for a, b in zip(self.pieces, self.pieces[1:]):
            gap = float(np.max(np.abs(a.end() - b.start())))
            if gap > join_tol:
                raise ValueError(f"path pieces do not join (gap {gap:.3e})")

    @property
    def m(self) -> int:
        return self.pieces[0].m

    def start(self) -> np.ndarray:
        return self.pieces[0].start()

    def end(self) -> np.ndarray:
        return self.pieces[-1].end()


CurveLike = Union[Curve, Path]


def _pieces(c: CurveLike):
    return c.pieces if isinstance(c, Path) else (c,)


@dataclass(frozen=True, eq=False)
class TransportResult:
    value: np.ndarray
    steps: int
    step_size: float
    error_estimate: float


def rk4(rhs: Callable[[float, np.ndarray], np.ndarray], y0, t0: float, t1: float, steps: int,
        post: Callable[[np.ndarray], np.ndarray] | None = None) -> np.ndarray:
    """Classical fixed-step RK4; ``post`` is applied after every step."""
    if steps < 1:
        raise ValueError("steps must be positive")
    y = np.array(y0, dtype=float)
    h = (t1 - t0) / steps
    for i in range(steps):
        t = t0 + i * h
        try:
            k1 = rhs(t, y)
            k2 = rhs(t + h / 2, y + h / 2 * k1)
            k3 = rhs(t + h / 2, y + h / 2 * k2)
            k4 = rhs(t + h, y + h * k3)
        except (ExprDomainError, OverflowError, FloatingPointError) as exc:
            raise NumericAbortError(i + 1, "right-hand side") from exc
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if post is not None:
            y = post(y)
        if not np.all(np.isfinite(y)):
            raise NumericAbortError(i + 1)
    return y


def _with_estimate(run: Callable[[int], np.ndarray], c: CurveLike, steps: int,
                   estimate: bool) -> TransportResult:
    if steps < 2:
        raise ValueError("transport needs steps >= 2")
    y = run(steps)
    err = 0.0
    if estimate:
        y2 = run(2 * steps)
        # error of the coarse solution for a fourth-order method
        err = float(np.max(np.abs(y - y2))) * 16.0 / 15.0
    h = max((p.t1 - p.t0) / steps for p in _pieces(c))
    return TransportResult(y, steps, h, err)


def parallel_transport_fiber(G: ChristoffelField, c: CurveLike, f0, steps: int = 1000,
                             estimate_error: bool = True) -> TransportResult:
    if c.m != G.chart.m:
        raise ValueError("curve dimension does not match the base")
    f0 = np.asarray(f0, dtype=float)

    def run(N):
        f = f0
        for p in _pieces(c):
            f = rk4(lambda t, y: -(G(p.point(t), y) @ p.velocity(t)), f, p.t0, p.t1, N)
        return f

    return _with_estimate(run, c, steps, estimate_error)


def group_transport(A: GaugeField, c: CurveLike, g0=None, steps: int = 1000,
                    project: bool = True, estimate_error: bool = True) -> TransportResult:
    """Solve ``gammadot = -A(xdot) gamma``, projecting back onto the group on drift."""
    G = A.group
    if c.m != A.m:
        raise ValueError("curve dimension does not match the base")
    g0 = G.identity if g0 is None else np.asarray(g0, dtype=float)
    k = G.k

    def post(y):
        g = y.reshape(k, k)
        if project and G.kind != "general" and G.membership_residual(g) > 1e-12:
            return G.project(g).reshape(-1)
        return y

    def run(N):
        y = g0.reshape(-1)
        for p in _pieces(c):
            def rhs(t, y, p=p):
                M = G.hat(A.along(p.point(t), p.velocity(t)))
                return -(M @ y.reshape(k, k)).reshape(-1)
            y = rk4(rhs, y, p.t0, p.t1, N, post)
        return y.reshape(k, k)

    return _with_estimate(run, c, steps, estimate_error)


def closure_gap(loop: CurveLike, periods: Sequence[float] | None = None) -> float:
    """Distance between the loop's end points, modulo coordinate periods (0 = none)."""
    d = loop.end() - loop.start()
    if periods is not None:
        for i, p in enumerate(periods):
            if p:
                d[i] = d[i] - p * np.round(d[i] / p)
    return float(np.max(np.abs(d)))


def holonomy_loop(obj, loop: CurveLike, steps: int = 1000, f0=None,
                  closure_tol: float = 1e-9, periods: Sequence[float] | None = None
                  ) -> TransportResult:
    """Transport once around a closed loop.

    For a gauge field the value is the group element (starting at the
    identity). For a connection, ``f0`` is transported if given; otherwise the
    connection must be linear and the n x n holonomy matrix is assembled
    column by column from basis transports. ``periods`` lets loops close in
    angular coordinates, e.g. ``(0, 2*pi)`` for an azimuth.
    """
    gap = closure_gap(loop, periods)
    if gap > closure_tol:
        raise OpenLoopError(f"loop is not closed (gap {gap:.3e})")
    if isinstance(obj, GaugeField):
        return group_transport(obj, loop, None, steps)
    if f0 is not None:
        return parallel_transport_fiber(obj, loop, f0, steps)
    lin, _ = is_linear(obj)
    if not lin:
        raise ValueError("holonomy matrix needs a linear connection; pass f0 for a sample")
    n = obj.chart.n
    cols = [parallel_transport_fiber(obj, loop, np.eye(n)[i], steps) for i in range(n)]
    H = np.stack([r.value for r in cols], axis=1)
    return TransportResult(H, steps, cols[0].step_size, max(r.error_estimate for r in cols))


def u1_angle(g) -> float:
    g = np.asarray(g, dtype=float)
    return float(np.arctan2(g[1, 0], g[0, 0]))


@dataclass(frozen=True, eq=False)
class FluxResult:
    value: np.ndarray
    gauge_invariant: bool


def flux(Fs: FieldStrength, rect: Sequence[float], grid: int = 200, coords=(0, 1),
         point: Sequence[float] | None = None) -> FluxResult:
    """Composite Simpson integral of ``F_{mu nu}`` over ``[a,b] x [c,d]``.

    ``coords = (mu, nu)`` chooses the integration plane; other base
    coordinates are frozen at ``point``. For non-abelian groups the result is
    coefficient-wise and flagged as not gauge invariant.
    """
    if grid < 2:
        raise ValueError("flux grid must be >= 2")
    a, b, c, d = (float(v) for v in rect)
    mu, nu = coords
    m = Fs.A.m
    base = np.zeros(m) if point is None else np.array(point, dtype=float)
    us = np.linspace(a, b, grid + 1)
    vs = np.linspace(c, d, grid + 1)
    vals = np.empty((grid + 1, grid + 1, Fs.group.d))
    for i, u in enumerate(us):
        for j, v in enumerate(vs):
            x = base.copy()
            x[mu], x[nu] = u, v
            vals[i, j] = Fs(x)[mu, nu]
    inner = simpson(vals, x=vs, axis=1)
    total = simpson(inner, x=us, axis=0)
    return FluxResult(np.atleast_1d(total), Fs.group.is_abelian)
