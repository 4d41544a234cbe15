"""Charted fiber bundles and the second iterated vertical bundle.

Points of the total space carry base coordinates ``x`` and fiber coordinates
``f``. A point of Vert Vert is stored as ``(x; f; fdot; fvary; fvarydot)``;
the base point is passive data and chart changes touch the fiber only.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ehresmann import dual
from ehresmann.exprdsl import Compiled, as_expr, check_var_name


class BaseMismatchError(ValueError):
    """Two second vertical vectors do not lie over the same point of Vert + Vert."""

    def __init__(self, deviation: float, tol: float):
        self.deviation = deviation
        super().__init__(f"second vertical vectors lie in different fibers "
                         f"(max deviation {deviation:.3e} > {tol:.1e})")


class SingularChartError(ValueError):
    pass


def _frozen(a) -> np.ndarray:
    arr = np.array(a, dtype=float).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class BundleChart:
    base_vars: tuple
    fiber_vars: tuple

    def __post_init__(self):
        object.__setattr__(self, "base_vars", tuple(self.base_vars))
        object.__setattr__(self, "fiber_vars", tuple(self.fiber_vars))
        if not self.base_vars or not self.fiber_vars:
            raise ValueError("a bundle chart needs m >= 1 and n >= 1")
        names = self.base_vars + self.fiber_vars
        for name in names:
            check_var_name(name)
        if len(set(names)) != len(names):
            raise ValueError(f"chart variable names must be distinct: {names}")

    @classmethod
    def standard(cls, m: int, n: int) -> "BundleChart":
        return cls(tuple(f"x{i + 1}" for i in range(m)), tuple(f"f{i + 1}" for i in range(n)))

    @property
    def m(self) -> int:
        return len(self.base_vars)

    @property
    def n(self) -> int:
        return len(self.fiber_vars)

    @property
    def variables(self) -> tuple:
        return self.base_vars + self.fiber_vars


@dataclass(frozen=True, eq=False)
class PointOnTotalSpace:
    x: np.ndarray
    f: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "x", _frozen(self.x))
        object.__setattr__(self, "f", _frozen(self.f))


@dataclass(frozen=True, eq=False)
class TangentVector:
    at: PointOnTotalSpace
    dx: np.ndarray
    df: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "dx", _frozen(self.dx))
        object.__setattr__(self, "df", _frozen(self.df))
        if self.dx.shape != self.at.x.shape or self.df.shape != self.at.f.shape:
            raise ValueError("tangent vector dimensions do not match its base point")

    @property
    def is_vertical(self) -> bool:
        return not np.any(self.dx)


@dataclass(frozen=True, eq=False)
class VerticalVector:
    """A vertical tangent vector ``(x; f; v)``."""

    x: np.ndarray
    f: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        for name in ("x", "f", "v"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    def as_tangent(self) -> TangentVector:
        return TangentVector(PointOnTotalSpace(self.x, self.f), np.zeros_like(self.x), self.v)


@dataclass(frozen=True, eq=False)
class SecondVerticalVector:
    x: np.ndarray
    f: np.ndarray
    fdot: np.ndarray
    fvary: np.ndarray
    fvarydot: np.ndarray

    def __post_init__(self):
        for name in ("x", "f", "fdot", "fvary", "fvarydot"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))
        n = self.f.shape
        if not (self.fdot.shape == self.fvary.shape == self.fvarydot.shape == n):
            raise ValueError("second vertical vector blocks must share the fiber dimension")

    def blocks(self) -> tuple:
        return (self.x, self.f, self.fdot, self.fvary, self.fvarydot)


class SectionField:
    """A local section ``x -> (x, f(x))``.

    Built from expressions over the base variables, or from a callable that
    maps a list of (possibly dual) base values to a list of fiber values.
    """

    def __init__(self, chart: BundleChart, exprs: Sequence | None = None,
                 fn: Callable[[list], list] | None = None):
        self.chart = chart
        if exprs is not None:
            self.exprs = tuple(as_expr(e, chart.base_vars) for e in exprs)
            if len(self.exprs) != chart.n:
                raise ValueError(f"section needs {chart.n} components, got {len(self.exprs)}")
            fn = Compiled(self.exprs, chart.base_vars)
        else:
            self.exprs = None
            if fn is None:
                raise ValueError("need exprs or fn")
        self._fn = fn

    def values(self, x: Sequence) -> list:
        return self._fn(list(x))

    def __call__(self, x) -> np.ndarray:
        return np.array(self._fn([float(v) for v in x]), dtype=float)


class BaseVectorField:
    """A vector field ``X^mu(x)`` on the base."""

    def __init__(self, chart: BundleChart, exprs: Sequence | None = None,
                 fn: Callable[[list], list] | None = None):
        self.chart = chart
        if exprs is not None:
            self.exprs = tuple(as_expr(e, chart.base_vars) for e in exprs)
            if len(self.exprs) != chart.m:
                raise ValueError(f"vector field needs {chart.m} components")
            fn = Compiled(self.exprs, chart.base_vars)
        else:
            self.exprs = None
            if fn is None:
                raise ValueError("need exprs or fn")
        self._fn = fn

    @classmethod
    def coordinate(cls, chart: BundleChart, mu: int) -> "BaseVectorField":
        return cls(chart, ["1" if i == mu else "0" for i in range(chart.m)])

    def components(self, x: Sequence) -> list:
        return self._fn(list(x))

    def __call__(self, x) -> np.ndarray:
        return np.array(self._fn([float(v) for v in x]), dtype=float)


def section_jet(s: SectionField, x) -> tuple[PointOnTotalSpace, np.ndarray]:
    """The point ``(x, f(x))`` and the exact Jacobian ``df^alpha/dx^mu``."""
    x = [float(v) for v in x]
    vals, J = dual.jacobian(s.values, x)
    return PointOnTotalSpace(x, vals), np.array(J, dtype=float).reshape(s.chart.n, s.chart.m)


def lie_bracket(X: BaseVectorField, Y: BaseVectorField) -> BaseVectorField:
    """``[X, Y]^mu = X^nu d_nu Y^mu - Y^nu d_nu X^mu``, evaluated pointwise."""
    if X.chart.base_vars != Y.chart.base_vars:
        raise ValueError("vector fields live on different charts")

    def fn(x):
        xv = X.components(x)
        yv = Y.components(x)
        _, dY_X = dual.jvp(Y.components, x, xv)
        _, dX_Y = dual.jvp(X.components, x, yv)
        return [a - b for a, b in zip(dY_X, dX_Y)]

    return BaseVectorField(X.chart, fn=fn)


def theta(sv: SecondVerticalVector) -> SecondVerticalVector:
    """The canonical flip exchanging the two first-order blocks."""
    return SecondVerticalVector(sv.x, sv.f, sv.fvary, sv.fdot, sv.fvarydot)


def double_projection(sv: SecondVerticalVector) -> tuple[VerticalVector, VerticalVector]:
    """``(x, f, fvary) (+) (x, f, fdot)`` in that order."""
    return VerticalVector(sv.x, sv.f, sv.fvary), VerticalVector(sv.x, sv.f, sv.fdot)


def swap(pair: tuple) -> tuple:
    return pair[1], pair[0]


def difference(a: SecondVerticalVector, b: SecondVerticalVector,
               tol_base: float = 1e-9) -> VerticalVector:
    """Affine difference on a common fiber of the double projection."""
    dev = 0.0
    for u, v in zip(a.blocks()[:4], b.blocks()[:4]):
        if u.shape != v.shape:
            raise BaseMismatchError(float("inf"), tol_base)
        if u.size:
            dev = max(dev, float(np.max(np.abs(u - v))))
    if not dev <= tol_base:
        raise BaseMismatchError(dev, tol_base)
    return VerticalVector(a.x, a.f, a.fvarydot - b.fvarydot)


def change_chart_second_vertical(sv: SecondVerticalVector, h: Sequence,
                                 fiber_vars: Sequence[str]) -> SecondVerticalVector:
    """Transform fiber coordinates by ``h = (h^1(f), ..., h^n(f))``.

    Evaluates ``h`` along the representative ``f + t fdot + e fvary + t e
    fvarydot`` with nested duals, which yields the first-order chain rule for
    ``fdot, fvary`` and ``d2h(fvary, fdot) + dh fvarydot`` for ``fvarydot``.
    """
    fiber_vars = tuple(fiber_vars)
    exprs = [as_expr(e, fiber_vars) for e in h]
    if len(exprs) != len(fiber_vars) or len(fiber_vars) != sv.f.size:
        raise ValueError("chart change must map R^n to R^n")
    fn = Compiled(exprs, fiber_vars)
    f0 = [float(v) for v in sv.f]
    _, J = dual.jacobian(fn, f0)
    det = float(np.linalg.det(np.array(J, dtype=float)))
    if not abs(det) > 1e-12:
        raise SingularChartError(f"chart change has singular Jacobian (det={det:.3e})")
    val, d_t, d_e, d_te = dual.second_order(fn, f0, list(sv.fdot), list(sv.fvary),
                                            list(sv.fvarydot))
    return SecondVerticalVector(sv.x, val, d_t, d_e, d_te)
