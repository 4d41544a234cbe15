"""Principal connections in a local trivialization (gauge fields).

A gauge field stores the algebra coordinates ``A^a_mu(x)`` with respect to
the group basis; matrices are formed on demand. Field strengths, gauge
transforms and the connection form are built on the same dual-generic
evaluators, so derivatives are exact.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from ehresmann import dual
from ehresmann.bundle import BundleChart
from ehresmann.checks import CheckReport
from ehresmann.connection import ChristoffelField
from ehresmann.exprdsl import Compiled, ExprError, as_expr, check_var_name, lincomb
from ehresmann.liegroup import (
    GroupMembershipError,
    MatrixLieGroup,
    NotInAlgebraError,
    generic_inverse,
)


def _snap(p: float) -> float:
    # pseudo-inverse entries of the builtin bases are small dyadic rationals
    q = round(p * 1024.0) / 1024.0
    return q if abs(p - q) < 1e-13 else p


def _sample_points(m: int, samples: int, seed: int, box: float):
    rng = np.random.default_rng(seed)
    return [[float(v) for v in rng.uniform(-box, box, m)] for _ in range(samples)]


class GaugeField:
    """Algebra-valued one-form ``A_mu(x) = sum_a A^a_mu(x) e_a``."""

    def __init__(self, group: MatrixLieGroup, base_vars: Sequence[str], exprs=None,
                 fn: Callable[[list], list] | None = None):
        self.group = group
        self.base_vars = tuple(check_var_name(v) for v in base_vars)
        if not self.base_vars:
            raise ValueError("gauge field needs m >= 1")
        self.m = len(self.base_vars)
        d = group.d
        if exprs is not None:
            rows = [list(r) for r in exprs]
            if len(rows) != self.m or any(len(r) != d for r in rows):
                raise ValueError(f"gauge coefficients must be {self.m}x{d}")
            self.exprs = tuple(tuple(as_expr(e, self.base_vars) for e in r) for r in rows)
            fn = Compiled([e for r in self.exprs for e in r], self.base_vars)
        elif fn is None:
            raise ValueError("need exprs or fn")
        else:
            self.exprs = None
        self._fn = fn

    @classmethod
    def from_coeffs(cls, group, base_vars, rows) -> "GaugeField":
        return cls(group, base_vars, rows)

    @classmethod
    def zero(cls, group, base_vars) -> "GaugeField":
        return cls(group, base_vars, [["0"] * group.d for _ in base_vars])

    @classmethod
    def from_matrices(cls, group: MatrixLieGroup, base_vars: Sequence[str], mats,
                      samples: int = 20, seed: int = 0, box: float = 1.0,
                      tol: float = 1e-10) -> "GaugeField":
        """Build from per-mu k x k expression matrices, checking they lie in the algebra."""
        base_vars = tuple(base_vars)
        k = group.k
        entries = []
        for M in mats:
            rows = [list(r) for r in M]
            if len(rows) != k or any(len(r) != k for r in rows):
                raise ValueError(f"gauge matrices must be {k}x{k}")
            entries.append([as_expr(e, base_vars) for r in rows for e in r])
        if len(entries) != len(base_vars):
            raise ValueError("need one matrix per base coordinate")
        P = group._pinv
        coeffs = [[lincomb((_snap(float(P[a, ij])), E[ij]) for ij in range(k * k)
                           if abs(P[a, ij]) > 1e-14) for a in range(group.d)]
                  for E in entries]
        A = cls(group, base_vars, coeffs)
        mat_fn = Compiled([e for E in entries for e in E], base_vars)
        worst = 0.0
        for x in _sample_points(len(base_vars), samples, seed, box):
            try:
                full = np.array(mat_fn(x), dtype=float).reshape(len(base_vars), k, k)
            except ExprError:
                continue
            worst = max(worst, float(np.max(np.abs(full - A.matrices(x)))))
        if not worst <= tol:
            raise NotInAlgebraError(f"gauge field leaves the Lie algebra of {group.name} "
                                    f"(off-span residual {worst:.3e})")
        return A

    def values(self, x: Sequence) -> list:
        """Flat list ``[mu * d + a]``; generic over duals."""
        return self._fn(list(x))

    def coeffs(self, x) -> np.ndarray:
        return np.array(self._fn([float(v) for v in x]), dtype=float).reshape(self.m, self.group.d)

    def matrices(self, x) -> np.ndarray:
        return np.einsum("ma,aij->mij", self.coeffs(x), self.group.basis)

    def along(self, x, xdot) -> np.ndarray:
        """Algebra coordinates of ``A(xdot) = sum_mu A_mu xdot^mu``."""
        return np.asarray(xdot, float) @ self.coeffs(x)


def _field_strength_generic(A: GaugeField, x: list) -> list:
    m, d = A.m, A.group.d
    c = A.group.structure_constants
    vals, J = dual.jacobian(A.values, x)
    F = []
    for mu in range(m):
        row = []
        for nu in range(m):
            comp = []
            for cc in range(d):
                if mu == nu:
                    comp.append(0.0)
                    continue
                acc = J[nu * d + cc][mu] - J[mu * d + cc][nu]
                for a in range(d):
                    for b in range(d):
                        if c[cc, a, b] != 0.0:
                            acc = acc + c[cc, a, b] * vals[mu * d + a] * vals[nu * d + b]
                comp.append(acc)
            row.append(comp)
        F.append(row)
    return F


class FieldStrength:
    """``F_{mu nu} = d_mu A_nu - d_nu A_mu + [A_mu, A_nu]`` in algebra coordinates."""

    def __init__(self, A: GaugeField):
        self.A = A
        self.group = A.group

    def components(self, x: Sequence) -> list:
        return _field_strength_generic(self.A, list(x))

    def __call__(self, x) -> np.ndarray:
        return np.array(self.components([float(v) for v in x]), dtype=float)

    def matrices(self, x) -> np.ndarray:
        return np.einsum("mna,aij->mnij", self(x), self.group.basis)

    def along(self, x, X, Y) -> np.ndarray:
        return np.einsum("mna,m,n->a", self(x), np.asarray(X, float), np.asarray(Y, float))

    def bianchi_residual(self, x) -> float:
        """Max over index triples of the cyclic sum of ``D_l F_{mn}``.

        ``D_l F = d_l F + [A_l, F]``; for abelian groups this is the plain
        cyclic derivative of ``F = dA``.
        """
        m, d = self.A.m, self.group.d
        x = [float(v) for v in x]
        flat = lambda z: [v for row in self.components(z) for comp in row for v in comp]  # noqa: E731
        vals, J = dual.jacobian(flat, x)
        F = np.array(vals, dtype=float).reshape(m, m, d)
        dF = np.array(J, dtype=float).reshape(m, m, d, m)  # [mu, nu, a, lam]
        Acoef = self.A.coeffs(x)
        c = self.group.structure_constants

        def D(l, mu, nu):
            return dF[mu, nu, :, l] + np.einsum("cab,a,b->c", c, Acoef[l], F[mu, nu])

        worst = 0.0
        for l in range(m):
            for mu in range(m):
                for nu in range(m):
                    s = D(l, mu, nu) + D(mu, nu, l) + D(nu, l, mu)
                    worst = max(worst, float(np.max(np.abs(s))))
        return worst


def field_strength(A: GaugeField) -> FieldStrength:
    return FieldStrength(A)


def _matrix_compiled(group: MatrixLieGroup, base_vars, gamma) -> Compiled:
    k = group.k
    rows = [list(r) for r in gamma]
    if len(rows) != k or any(len(r) != k for r in rows):
        raise ValueError(f"gauge transformation must be a {k}x{k} matrix")
    return Compiled([as_expr(e, base_vars) for r in rows for e in r], base_vars)


def gauge_transform(A: GaugeField, gamma, samples: int = 10, seed: int = 0, box: float = 1.0,
                    tol: float = 1e-9) -> GaugeField:
    """``A'_mu = Ad_{gamma^-1} A_mu + gamma^-1 d_mu gamma`` for an expression matrix ``gamma(x)``."""
    G = A.group
    k, d, m = G.k, G.d, A.m
    gfn = _matrix_compiled(G, A.base_vars, gamma)
    for x in _sample_points(m, samples, seed, box):
        try:
            g = np.array(gfn(x), dtype=float).reshape(k, k)
        except ExprError:
            continue
        r = G.membership_residual(g)
        if not r <= tol:
            raise GroupMembershipError(f"gauge transformation leaves {G.name} at x={x} "
                                       f"(residual {r:.3e})")

    def fn(x):
        vals, J = dual.jacobian(gfn, x)
        g = np.array(vals, dtype=object).reshape(k, k)
        gi = generic_inverse(g)
        Av = A.values(x)
        out = []
        for mu in range(m):
            dg = np.array([J[i][mu] for i in range(k * k)], dtype=object).reshape(k, k)
            Amu = G.hat(Av[mu * d:(mu + 1) * d])
            M = gi.dot(np.asarray(Amu, dtype=object)).dot(g) + gi.dot(dg)
            out.extend(G.vee(M))
        return out

    return GaugeField(G, A.base_vars, fn=fn)


def gauge_covariance_residual(A: GaugeField, gamma, x) -> float:
    """``max |F[A^gamma](x) - Ad_{gamma^-1} F[A](x)|``."""
    G = A.group
    At = gauge_transform(A, gamma, samples=0)
    gfn = _matrix_compiled(G, A.base_vars, gamma)
    x = [float(v) for v in x]
    g = np.array(gfn(x), dtype=float).reshape(G.k, G.k)
    Ad = G.adjoint_matrix(np.linalg.inv(g))
    lhs = FieldStrength(At)(x)
    rhs = np.einsum("ba,mna->mnb", Ad, FieldStrength(A)(x))
    return float(np.max(np.abs(lhs - rhs)))


def connection_form_eval(A: GaugeField, x, xdot, gamma, gammadot, tol: float = 1e-8) -> np.ndarray:
    """``omega`` at the trivialized point ``(x, gamma)``: ``Ad_{gamma^-1} A(xdot) + gamma^-1 gammadot``."""
    G = A.group
    g = np.asarray(gamma, dtype=float)
    gi = np.asarray(G.inverse(g), dtype=float)
    vert = G.vee(gi @ np.asarray(gammadot, dtype=float), tol=tol)
    Ax = G.hat(A.along(x, xdot))
    return G.vee(gi @ Ax @ g, tol=tol) + vert


def _random_curve(G: MatrixLieGroup, m: int, rng, box: float):
    x0 = rng.uniform(-box, box, m)
    v, w = rng.normal(size=m), rng.normal(size=m)
    g0 = G.exp(rng.normal(size=G.d))
    p, q = rng.normal(size=G.d), rng.normal(size=G.d)

    def curve(t):
        return x0 + v * t + w * t * t, G.exp(p * t + q * t * t) @ g0

    return curve


def check_principal_axiom(A: GaugeField, samples: int = 10, seed: int = 0, h: float = 1e-5,
                          tol: float = 1e-6, box: float = 1.0) -> CheckReport:
    """Right-translation law of the connection form along random curves.

    For curves ``g_t = (x_t, gamma_t)`` and ``gamma'_t`` in G,
    ``omega(d/dt g_t gamma'_t) = Ad_{gamma'_0^-1} omega(d/dt g_t) + gamma'_0^-1 d/dt gamma'_t``,
    with all curve velocities by central differences.
    """
    G = A.group
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        c = _random_curve(G, A.m, rng, box)
        g1 = G.exp(rng.normal(size=G.d))
        p1 = rng.normal(size=G.d)
        right = lambda t: G.exp(p1 * t) @ g1  # noqa: E731
        xp, gp = c(h)
        xm, gm = c(-h)
        x0, g0 = c(0.0)
        xdot = (xp - xm) / (2 * h)
        gdot = (gp - gm) / (2 * h)
        rdot = (right(h) - right(-h)) / (2 * h)
        r0 = right(0.0)
        proddot = (gp @ right(h) - gm @ right(-h)) / (2 * h)
        lhs = connection_form_eval(A, x0, xdot, g0 @ r0, proddot, tol=1e-6)
        om = connection_form_eval(A, x0, xdot, g0, gdot, tol=1e-6)
        ri = np.linalg.inv(r0)
        rhs = G.vee(ri @ G.hat(om) @ r0, tol=1e-6) + G.vee(ri @ rdot, tol=1e-6)
        worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CheckReport.from_residual(worst, tol, samples, h=h)


def _left_division(g, gh):
    return np.linalg.solve(g, gh)


def verify_principal_object(group: MatrixLieGroup, samples: int = 20, seed: int = 0,
                            division: Callable | None = None, tol: float = 1e-12,
                            scale: float = 0.5) -> CheckReport:
    """Simple transitivity of right multiplication on a trivialized fiber.

    Checks ``x (x \\ y) = y``, ``x \\ (x g) = g``, ``x e = x`` and
    ``(x g) h = x (g h)`` at random group elements.
    """
    div = division or _left_division
    rng = np.random.default_rng(seed)
    e = group.identity
    worst = 0.0
    for _ in range(samples):
        x, y, g, h = (group.exp(scale * rng.normal(size=group.d)) for _ in range(4))
        res = [x @ div(x, y) - y, div(x, x @ g) - g, x @ e - x, (x @ g) @ h - x @ (g @ h)]
        worst = max(worst, max(float(np.max(np.abs(r))) for r in res))
    return CheckReport.from_residual(worst, tol, samples)


def u1_chart_connection(A: GaugeField, angle_var: str = "f1") -> ChristoffelField:
    """The U1 bundle in the angle chart ``gamma = exp(theta J)``.

    Horizontal lifts solve ``theta' = -A(xdot)``, so ``Gamma^theta_mu = A_mu``.
    """
    if A.group.d != 1 or A.group.kind != "u1":
        raise ValueError("explicit group chart is implemented for U1 only")
    chart = BundleChart(A.base_vars, (angle_var,))
    if A.exprs is not None:
        return ChristoffelField(chart, [[row[0] for row in A.exprs]])
    return ChristoffelField(chart, fn=lambda x, f: A.values(x))
