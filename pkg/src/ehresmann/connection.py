"""Non-linear connections given by generalized Christoffel symbols.

A connection on a charted bundle is the array ``Gamma^alpha_mu(x, f)``; the
vertical projection is ``df + Gamma dx`` and horizontal lifts solve
``df = -Gamma dx``. Everything here is evaluated with forward-mode duals, so
curvature and the iterated derivatives are exact up to rounding.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ehresmann import dual
from ehresmann.bundle import (
    BaseVectorField,
    BundleChart,
    PointOnTotalSpace,
    SecondVerticalVector,
    SectionField,
    TangentVector,
    VerticalVector,
    difference,
    lie_bracket,
    theta,
)
from ehresmann.checks import CheckReport
from ehresmann.exprdsl import Compiled, Var, as_expr, lincomb, mul, rename, ZERO


class ChartMismatchError(ValueError):
    pass


class ChristoffelField:
    """``Gamma^alpha_mu(x, f)`` on a chart.

    ``exprs`` is an n x m nested sequence of expressions (strings are parsed
    against the chart variables). Alternatively ``fn`` maps the lists
    ``(x, f)`` to a flat row-major list of the n*m components; it must accept
    dual numbers.
    """

    def __init__(self, chart: BundleChart, exprs: Sequence | None = None,
                 fn: Callable[[list, list], list] | None = None):
        self.chart = chart
        m, n = chart.m, chart.n
        if exprs is not None:
            rows = [list(r) for r in exprs]
            if len(rows) != n or any(len(r) != m for r in rows):
                raise ValueError(f"Christoffel array must be {n}x{m}")
            self.exprs = tuple(tuple(as_expr(e, chart.variables) for e in r) for r in rows)
            comp = Compiled([e for r in self.exprs for e in r], chart.variables)
            fn = lambda x, f: comp(list(x) + list(f))  # noqa: E731
        elif fn is None:
            raise ValueError("need exprs or fn")
        else:
            self.exprs = None
        self._fn = fn

    @classmethod
    def zero(cls, chart: BundleChart) -> "ChristoffelField":
        return cls(chart, [[ZERO] * chart.m for _ in range(chart.n)])

    def values(self, x: Sequence, f: Sequence) -> list:
        """Flat row-major components; generic over duals."""
        return self._fn(list(x), list(f))

    def __call__(self, x, f) -> np.ndarray:
        vals = self._fn([float(v) for v in x], [float(v) for v in f])
        return np.array(vals, dtype=float).reshape(self.chart.n, self.chart.m)

    def contract(self, x: Sequence, f: Sequence, X: Sequence) -> list:
        """``sum_mu Gamma^alpha_mu(x, f) X^mu`` for each alpha; generic."""
        m, n = self.chart.m, self.chart.n
        g = self.values(x, f)
        out = []
        for a in range(n):
            acc = 0.0
            for mu in range(m):
                if not dual._is_const_zero(X[mu]):
                    acc = acc + g[a * m + mu] * X[mu]
            out.append(acc)
        return out


def _check_point(G: ChristoffelField, x, f):
    if len(x) != G.chart.m or len(f) != G.chart.n:
        raise ValueError("point dimensions do not match the chart")


def project(G: ChristoffelField, v: TangentVector) -> VerticalVector:
    x, f = v.at.x, v.at.f
    _check_point(G, x, f)
    P = v.df + G(x, f) @ v.dx
    return VerticalVector(x, f, P)


def horizontal_lift(G: ChristoffelField, at: PointOnTotalSpace, X) -> TangentVector:
    X = np.asarray(X, dtype=float)
    _check_point(G, at.x, at.f)
    return TangentVector(at, X, -(G(at.x, at.f) @ X))


def _covariant(G: ChristoffelField, s: SectionField, X: BaseVectorField, x: list):
    """Generic ``(f(x), D_X s (x))`` as lists."""
    f, J = dual.jacobian(s.values, x)
    Xv = X.components(x)
    gX = G.contract(x, f, Xv)
    m = G.chart.m
    out = []
    for a in range(G.chart.n):
        acc = gX[a]
        for mu in range(m):
            acc = acc + J[a][mu] * Xv[mu]
        out.append(acc)
    return f, out


def covariant_derivative(G: ChristoffelField, s: SectionField, X: BaseVectorField,
                         x) -> VerticalVector:
    x = [float(v) for v in x]
    f, D = _covariant(G, s, X, x)
    return VerticalVector(x, f, D)


class CurvatureField:
    """``R^alpha_{mu nu}(x, f)`` evaluated on demand."""

    def __init__(self, G: ChristoffelField):
        self.G = G
        self.chart = G.chart

    def components(self, x: Sequence, f: Sequence) -> list:
        """Nested ``[alpha][mu][nu]`` lists; generic over duals."""
        m, n = self.chart.m, self.chart.n
        args = list(x) + list(f)
        g, J = dual.jacobian(lambda z: self.G.values(z[:m], z[m:]), args)
        # J[a*m+mu][k]: k < m base partials, k >= m fiber partials
        R = []
        for a in range(n):
            Ra = []
            for mu in range(m):
                row = []
                for nu in range(m):
                    if mu == nu:
                        row.append(0.0)
                        continue
                    acc = J[a * m + nu][mu] - J[a * m + mu][nu]
                    for b in range(n):
                        acc = acc + g[b * m + nu] * J[a * m + mu][m + b] \
                            - g[b * m + mu] * J[a * m + nu][m + b]
                    row.append(acc)
                Ra.append(row)
            R.append(Ra)
        return R

    def __call__(self, x, f) -> np.ndarray:
        R = self.components([float(v) for v in x], [float(v) for v in f])
        return np.array(R, dtype=float)

    def apply(self, x, f, X, Y) -> np.ndarray:
        """``R(X, Y) = sum R^alpha_{mu nu} X^mu Y^nu``."""
        return np.einsum("amn,m,n->a", self(x, f), np.asarray(X, float), np.asarray(Y, float))


def curvature_coeffs(G: ChristoffelField) -> CurvatureField:
    return CurvatureField(G)


def vertical_lift_connection(G: ChristoffelField) -> ChristoffelField:
    """The induced connection on Vert, with fiber coordinates ``(f, df)``."""
    chart = G.chart
    n = chart.n
    vchart = BundleChart(chart.base_vars, chart.fiber_vars + tuple("d" + v for v in chart.fiber_vars))

    def fn(x, fv):
        f, df = fv[:n], fv[n:]
        g, dg = dual.jvp(lambda ff: G.values(x, ff), f, df)
        return list(g) + list(dg)

    # the df-block needs dGamma/df, which exists only numerically, so the
    # lifted field is callable-backed
    return ChristoffelField(vchart, fn=fn)


def iterated_covariant_derivative(G: ChristoffelField, s: SectionField, X: BaseVectorField,
                                  Y: BaseVectorField, x) -> SecondVerticalVector:
    """``D^Vert_X D_Y s`` at ``x`` as a second vertical vector.

    ``D_Y s`` is a section of Vert over the base; differentiating it with the
    vertical-lift connection along ``X`` gives fiber blocks ``(D_X s, X(D_Y s)
    + dGamma_X/df . D_Y s)``, which sit in the ``fvary`` and ``fvarydot``
    slots, while ``D_Y s`` itself is the ``fdot`` block.
    """
    x = [float(v) for v in x]
    n = G.chart.n
    Gv = vertical_lift_connection(G)
    vchart = Gv.chart

    def lifted(xs):
        f, w = _covariant(G, s, Y, xs)
        return list(f) + list(w)

    sigma = SectionField(vchart, fn=lifted)
    fw, D = _covariant(Gv, sigma, X, x)
    return SecondVerticalVector(x, fw[:n], fw[n:], D[:n], D[n:])


def curvature_identity_residual(G: ChristoffelField, s: SectionField, X: BaseVectorField,
                                Y: BaseVectorField, x, tol_base: float = 1e-9) -> VerticalVector:
    """``(D_X D_Y s - Theta D_Y D_X s) - D_[X,Y] s - R(X, Y) s``; zero in exact arithmetic."""
    x = [float(v) for v in x]
    a = iterated_covariant_derivative(G, s, X, Y, x)
    b = theta(iterated_covariant_derivative(G, s, Y, X, x))
    lhs = difference(a, b, tol_base)
    br = covariant_derivative(G, s, lie_bracket(X, Y), x)
    curv = CurvatureField(G).apply(x, lhs.f, X(x), Y(x))
    return VerticalVector(x, lhs.f, lhs.v - br.v - curv)


def nijenhuis_fd(G: ChristoffelField, x, f, h: float = 1e-4) -> np.ndarray:
    """Curvature from ``-P[H_mu, H_nu]`` with central-difference Jacobians.

    ``H_mu = d/dx^mu - Gamma^alpha_mu d/df^alpha`` are the horizontal lifts of
    the coordinate fields. Independent of the dual-number machinery; used as
    a finite-difference oracle.
    """
    x = np.asarray(x, float)
    f = np.asarray(f, float)
    m, n = G.chart.m, G.chart.n
    z0 = np.concatenate([x, f])

    def H(z, mu):
        out = np.zeros(m + n)
        out[mu] = 1.0
        out[m:] = -G(z[:m], z[m:])[:, mu]
        return out

    def DH(z, mu):
        J = np.zeros((m + n, m + n))
        for k in range(m + n):
            e = np.zeros(m + n)
            e[k] = h
            J[:, k] = (H(z + e, mu) - H(z - e, mu)) / (2 * h)
        return J

    g = G(x, f)
    R = np.zeros((n, m, m))
    Hs = [H(z0, mu) for mu in range(m)]
    DHs = [DH(z0, mu) for mu in range(m)]
    for mu in range(m):
        for nu in range(m):
            br = DHs[nu] @ Hs[mu] - DHs[mu] @ Hs[nu]
            R[:, mu, nu] = -(br[m:] + g @ br[:m])
    return R


def _rng_point(rng, chart, box):
    return rng.uniform(-box, box, chart.m), rng.uniform(-box, box, chart.n)


class LinearChristoffel:
    """``Gamma^alpha_{mu omega}(x)``; the connection is ``Gamma^alpha_{mu omega} f^omega``."""

    def __init__(self, chart: BundleChart, exprs: Sequence | None = None,
                 fn: Callable[[list], list] | None = None):
        self.chart = chart
        m, n = chart.m, chart.n
        if exprs is not None:
            arr = [[list(row) for row in plane] for plane in exprs]
            if len(arr) != n or any(len(p) != m or any(len(r) != n for r in p) for p in arr):
                raise ValueError(f"linear Christoffel array must be {n}x{m}x{n}")
            self.exprs = tuple(tuple(tuple(as_expr(e, chart.base_vars) for e in r) for r in p)
                               for p in arr)
            fn = Compiled([e for p in self.exprs for r in p for e in r], chart.base_vars)
        elif fn is None:
            raise ValueError("need exprs or fn")
        else:
            self.exprs = None
        self._fn = fn

    def values(self, x: Sequence) -> list:
        """Flat list indexed ``(alpha*m + mu)*n + omega``; generic."""
        return self._fn(list(x))

    def __call__(self, x) -> np.ndarray:
        m, n = self.chart.m, self.chart.n
        return np.array(self._fn([float(v) for v in x]), dtype=float).reshape(n, m, n)

    def embed(self) -> ChristoffelField:
        m, n = self.chart.m, self.chart.n
        if self.exprs is not None:
            fv = [Var(v) for v in self.chart.fiber_vars]
            rows = [[lincomb((1.0, mul(self.exprs[a][mu][w], fv[w])) for w in range(n))
                     for mu in range(m)] for a in range(n)]
            return ChristoffelField(self.chart, rows)

        def fn(x, f):
            L = self.values(x)
            out = []
            for a in range(n):
                for mu in range(m):
                    acc = 0.0
                    for w in range(n):
                        acc = acc + L[(a * m + mu) * n + w] * f[w]
                    out.append(acc)
            return out

        return ChristoffelField(self.chart, fn=fn)


def is_linear(G: ChristoffelField, samples: int = 50, tol: float = 1e-10, seed: int = 0,
              box: float = 1.0) -> tuple[bool, LinearChristoffel | None]:
    """Decide fiber-linearity by sampling second fiber partials and ``Gamma(x, 0)``.

    Sample points always include ``f = (1, ..., 1)`` besides the random ones.
    """
    m, n = G.chart.m, G.chart.n
    rng = np.random.default_rng(seed)
    for i in range(samples):
        x, f = _rng_point(rng, G.chart, box)
        if i == 0:
            f = np.ones(n)
        x = [float(v) for v in x]
        f = [float(v) for v in f]
        g0 = G.values(x, [0.0] * n)
        if max(abs(float(v)) for v in g0) > tol:
            return False, None
        zeros = [0.0] * n
        for b in range(n):
            eb = [0.0] * n
            eb[b] = 1.0
            for w in range(b, n):
                ew = [0.0] * n
                ew[w] = 1.0
                _, _, _, d2 = dual.second_order(lambda ff: G.values(x, ff), f, eb, ew, zeros)
                if max(abs(float(v)) for v in d2) > tol:
                    return False, None

    def fn(x):
        _, J = dual.jacobian(lambda ff: G.values(x, ff), [0.0] * n)
        # J[a*m+mu][omega] is already the flat (a, mu, omega) layout
        return [J[i][w] for i in range(n * m) for w in range(n)]

    return True, LinearChristoffel(G.chart, fn=fn)


class LinearCurvature:
    """``R^alpha_{mu nu; omega}(x)`` of a linear connection."""

    def __init__(self, L: LinearChristoffel):
        self.L = L
        self.chart = L.chart

    def __call__(self, x) -> np.ndarray:
        m, n = self.chart.m, self.chart.n
        x = [float(v) for v in x]
        vals, J = dual.jacobian(self.L.values, x)
        G = np.array(vals, dtype=float).reshape(n, m, n)
        dG = np.array(J, dtype=float).reshape(n, m, n, m)  # [a, mu, w, partial]
        R = np.einsum("anwm->amnw", dG) - np.einsum("amwn->amnw", dG)
        R = R + np.einsum("amb,bnw->amnw", G, G) - np.einsum("anb,bmw->amnw", G, G)
        return R

    def matrices(self, x) -> np.ndarray:
        """``[mu, nu]`` -> n x n matrix ``(R_{mu nu})^alpha_omega``."""
        return np.einsum("amnw->mnaw", self(x))


def classical_curvature(L: LinearChristoffel) -> LinearCurvature:
    return LinearCurvature(L)


def _renamed_fiber(chart1: BundleChart, chart2: BundleChart) -> BundleChart:
    fv = chart1.fiber_vars + chart2.fiber_vars
    if len(set(fv) | set(chart1.base_vars)) != len(fv) + chart1.m:
        fv = tuple(f"f{i + 1}" for i in range(len(fv)))
    return BundleChart(chart1.base_vars, fv)


def product_connection(G1: ChristoffelField, G2: ChristoffelField) -> ChristoffelField:
    """Block-diagonal connection on the fibered product.

    Fiber variables are concatenated; if names collide they are renumbered
    ``f1..f(n1+n2)``.
    """
    if G1.chart.base_vars != G2.chart.base_vars:
        raise ChartMismatchError("product connection needs a common base chart")
    chart = _renamed_fiber(G1.chart, G2.chart)
    n1 = G1.chart.n
    if G1.exprs is not None and G2.exprs is not None:
        new = chart.fiber_vars
        r1 = dict(zip(G1.chart.fiber_vars, new[:n1]))
        r2 = dict(zip(G2.chart.fiber_vars, new[n1:]))
        rows = [[rename(e, r1) for e in r] for r in G1.exprs] + \
               [[rename(e, r2) for e in r] for r in G2.exprs]
        return ChristoffelField(chart, rows)

    def fn(x, f):
        return list(G1.values(x, f[:n1])) + list(G2.values(x, f[n1:]))

    return ChristoffelField(chart, fn=fn)


def check_parallel_homomorphism(phi: Sequence, src: ChristoffelField, tgt: ChristoffelField,
                                samples: int = 20, seed: int = 0, tol: float = 1e-10,
                                box: float = 1.0) -> CheckReport:
    """Does the fiber map ``phi(x, f)`` carry horizontal vectors to horizontal vectors?

    ``phi`` lists target fiber coordinates as expressions over the source
    chart variables. At each sample the pushforward of every horizontal
    coordinate lift is projected with the target connection.
    """
    if src.chart.base_vars != tgt.chart.base_vars:
        raise ChartMismatchError("parallel homomorphisms cover the identity of a common base")
    m = src.chart.m
    comp = Compiled([as_expr(e, src.chart.variables) for e in phi], src.chart.variables)
    if len(comp) != tgt.chart.n:
        raise ValueError("phi must produce the target fiber dimension")
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x, f = _rng_point(rng, src.chart, box)
        z = [float(v) for v in np.concatenate([x, f])]
        val, J = dual.jacobian(comp, z)
        J = np.array(J, dtype=float)
        for mu in range(m):
            X = np.zeros(m)
            X[mu] = 1.0
            lift = horizontal_lift(src, PointOnTotalSpace(x, f), X)
            push = J @ np.concatenate([lift.dx, lift.df])
            v = TangentVector(PointOnTotalSpace(x, val), lift.dx, push)
            worst = max(worst, float(np.max(np.abs(project(tgt, v).v))))
    return CheckReport.from_residual(worst, tol, samples)
