"""Connections induced on associated bundles.

In a trivialization the associated bundle for an action with fundamental
fields ``K_a`` carries ``Gamma^alpha_mu(x, f) = A^a_mu(x) K^alpha_a(f)``. The
checks here cover universality of curvature, the functorial properties, the
moving-frame round trip, the reproducing property and a verifier for
candidate infinitesimal actions on a linear connection.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ehresmann import dual
from ehresmann.bundle import BaseVectorField, BundleChart, SectionField, VerticalVector
from ehresmann.checks import CheckReport
from ehresmann.connection import (
    ChristoffelField,
    LinearChristoffel,
    classical_curvature,
    covariant_derivative,
    curvature_coeffs,
    product_connection,
)
from ehresmann.exprdsl import Compiled, Num, as_expr, lincomb, mul, rename
from ehresmann.liegroup import (
    ActionGenerators,
    MatrixLieGroup,
    act_inf,
    left_multiplication_action,
    linear_action,
)
from ehresmann.principal import FieldStrength, GaugeField
from ehresmann.transport import CurveLike, group_transport, parallel_transport_fiber


def _same_group(G1: MatrixLieGroup, G2: MatrixLieGroup):
    if G1 is G2:
        return
    if G1.basis.shape != G2.basis.shape or not np.array_equal(G1.basis, G2.basis):
        raise ValueError(f"group mismatch: {G1.name} vs {G2.name}")


class RepresentationMatrices:
    """Algebra representation ``rho(e_a)`` on R^n, optionally with its group-level map."""

    def __init__(self, group: MatrixLieGroup, rho, group_map: Callable | None = None,
                 tol: float = 1e-12):
        self.group = group
        rho = np.array(rho, dtype=float)
        if rho.ndim != 3 or rho.shape[0] != group.d or rho.shape[1] != rho.shape[2]:
            raise ValueError(f"need {group.d} square representation matrices")
        self.rho = rho
        self.n = rho.shape[1]
        c = group.structure_constants
        worst = 0.0
        for a in range(group.d):
            for b in range(group.d):
                lhs = rho[a] @ rho[b] - rho[b] @ rho[a]
                rhs = np.einsum("c,cij->ij", c[:, a, b], rho)
                worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        if not worst <= tol:
            raise ValueError(f"matrices do not represent the algebra of {group.name} "
                             f"(bracket residual {worst:.3e})")
        self.group_map = group_map

    @classmethod
    def standard(cls, group: MatrixLieGroup) -> "RepresentationMatrices":
        return cls(group, group.basis, lambda g: np.asarray(g, dtype=float))

    @classmethod
    def adjoint(cls, group: MatrixLieGroup) -> "RepresentationMatrices":
        rho = np.stack([group.ad_matrix(np.eye(group.d)[a]) for a in range(group.d)])
        return cls(group, rho, group.adjoint_matrix)

    @classmethod
    def trivial(cls, group: MatrixLieGroup, n: int) -> "RepresentationMatrices":
        return cls(group, np.zeros((group.d, n, n)), lambda g: np.eye(n))

    @classmethod
    def u1_charge(cls, group: MatrixLieGroup, k: int) -> "RepresentationMatrices":
        if group.kind != "u1":
            raise ValueError("charge representations are defined for U1")

        def gmap(g):
            th = k * float(np.arctan2(g[1, 0], g[0, 0]))
            return np.array([[np.cos(th), -np.sin(th)], [np.sin(th), np.cos(th)]])

        return cls(group, k * group.basis, gmap)

    def direct_sum(self, other: "RepresentationMatrices") -> "RepresentationMatrices":
        _same_group(self.group, other.group)
        n1, n2 = self.n, other.n
        rho = np.zeros((self.group.d, n1 + n2, n1 + n2))
        rho[:, :n1, :n1] = self.rho
        rho[:, n1:, n1:] = other.rho
        if self.group_map is None or other.group_map is None:
            return RepresentationMatrices(self.group, rho, None)

        def gmap(g):
            out = np.zeros((n1 + n2, n1 + n2))
            out[:n1, :n1] = self.group_map(g)
            out[n1:, n1:] = other.group_map(g)
            return out

        return RepresentationMatrices(self.group, rho, gmap)

    def of(self, X) -> np.ndarray:
        """``rho(X)`` for algebra coordinates ``X``."""
        return np.einsum("a,aij->ij", np.asarray(X, float), self.rho)

    def generators(self, fiber_vars: Sequence[str] | None = None) -> ActionGenerators:
        return linear_action(self.group, self.rho, fiber_vars)


class StarInfCandidate:
    """``S^alpha_{a omega}(x)``: a candidate infinitesimal action in the gauge trivialization.

    ``exprs`` is nested ``[alpha][a][omega]``; ``fn(x)`` must return the flat
    list in the same order.
    """

    def __init__(self, base_vars: Sequence[str], n: int, d: int, exprs=None,
                 fn: Callable[[list], list] | None = None):
        self.base_vars = tuple(base_vars)
        self.n, self.d = n, d
        if exprs is not None:
            arr = [[list(r) for r in p] for p in exprs]
            if len(arr) != n or any(len(p) != d or any(len(r) != n for r in p) for p in arr):
                raise ValueError(f"candidate must be {n}x{d}x{n}")
            self.exprs = tuple(tuple(tuple(as_expr(e, self.base_vars) for e in r) for r in p)
                               for p in arr)
            fn = Compiled([e for p in self.exprs for r in p for e in r], self.base_vars)
        elif fn is None:
            raise ValueError("need exprs or fn")
        else:
            self.exprs = None
        self._fn = fn

    @classmethod
    def constant(cls, base_vars, rho: RepresentationMatrices) -> "StarInfCandidate":
        r = rho.rho
        return cls(base_vars, rho.n, rho.group.d,
                   [[[Num(float(r[a, al, w])) for w in range(rho.n)] for a in range(rho.group.d)]
                    for al in range(rho.n)])

    def values(self, x) -> list:
        return self._fn(list(x))

    def matrices(self, x) -> np.ndarray:
        """``S[a]`` as n x n matrices, shape (d, n, n)."""
        S = np.array(self._fn([float(v) for v in x]), dtype=float).reshape(self.n, self.d, self.n)
        return np.transpose(S, (1, 0, 2))


def induce_connection(A: GaugeField, K: ActionGenerators) -> ChristoffelField:
    _same_group(A.group, K.group)
    chart = BundleChart(A.base_vars, K.fiber_vars)
    m, n, d = A.m, K.n, A.group.d
    if A.exprs is not None and K.exprs is not None:
        rows = [[lincomb((1.0, mul(A.exprs[mu][a], K.exprs[a][al])) for a in range(d))
                 for mu in range(m)] for al in range(n)]
        return ChristoffelField(chart, rows)

    def fn(x, f):
        Av = A.values(x)
        Kv = K.values(f)
        out = []
        for al in range(n):
            for mu in range(m):
                acc = 0.0
                for a in range(d):
                    acc = acc + Av[mu * d + a] * Kv[a * n + al]
                out.append(acc)
        return out

    return ChristoffelField(chart, fn=fn)


def universality_residual(A: GaugeField, K: ActionGenerators, s: SectionField,
                          X: BaseVectorField, Y: BaseVectorField, x) -> VerticalVector:
    """``R(X, Y) s - F(X, Y) * s`` at ``x`` for the induced connection."""
    G = induce_connection(A, K)
    x = [float(v) for v in x]
    f = s(x)
    Xv, Yv = X(x), Y(x)
    R = curvature_coeffs(G).apply(x, f, Xv, Yv)
    FXY = FieldStrength(A).along(x, Xv, Yv)
    return VerticalVector(x, f, R - act_inf(K, FXY, f))


def induce_linear(A: GaugeField, rho: RepresentationMatrices,
                  fiber_vars: Sequence[str] | None = None) -> LinearChristoffel:
    _same_group(A.group, rho.group)
    n, m, d = rho.n, A.m, A.group.d
    fv = tuple(fiber_vars) if fiber_vars is not None else tuple(f"f{i + 1}" for i in range(n))
    chart = BundleChart(A.base_vars, fv)
    r = rho.rho
    if A.exprs is not None:
        return LinearChristoffel(chart, [[[lincomb((float(r[a, al, w]), A.exprs[mu][a])
                                                   for a in range(d))
                                           for w in range(n)] for mu in range(m)]
                                         for al in range(n)])

    def fn(x):
        Av = A.values(x)
        return [sum((Av[mu * d + a] * float(r[a, al, w]) for a in range(d) if r[a, al, w]), 0.0)
                for al in range(n) for mu in range(m) for w in range(n)]

    return LinearChristoffel(chart, fn=fn)


def moving_frame_gauge_field(L: LinearChristoffel) -> GaugeField:
    """The gl(n)-valued field ``(A_mu)^alpha_omega = Gamma^alpha_{mu omega}``."""
    n, m = L.chart.n, L.chart.m
    G = MatrixLieGroup.gln(n)
    if L.exprs is not None:
        rows = [[L.exprs[al][mu][w] for al in range(n) for w in range(n)] for mu in range(m)]
        return GaugeField(G, L.chart.base_vars, rows)

    def fn(x):
        v = L.values(x)
        return [v[(al * m + mu) * n + w] for mu in range(m) for al in range(n) for w in range(n)]

    return GaugeField(G, L.chart.base_vars, fn=fn)


def direct_sum_action(K1: ActionGenerators, K2: ActionGenerators) -> ActionGenerators:
    """The diagonal action on the product fiber; clashing names are renumbered."""
    _same_group(K1.group, K2.group)
    fv = K1.fiber_vars + K2.fiber_vars
    if len(set(fv)) != len(fv):
        fv = tuple(f"f{i + 1}" for i in range(len(fv)))
    n1 = K1.n
    if K1.exprs is not None and K2.exprs is not None:
        r1 = dict(zip(K1.fiber_vars, fv[:n1]))
        r2 = dict(zip(K2.fiber_vars, fv[n1:]))
        rows = [[rename(e, r1) for e in K1.exprs[a]] + [rename(e, r2) for e in K2.exprs[a]]
                for a in range(K1.group.d)]
        return ActionGenerators(K1.group, fv, rows)
    n2, d = K2.n, K1.group.d

    def fn(f):
        k1, k2 = K1.values(f[:n1]), K2.values(f[n1:])
        out = []
        for a in range(d):
            out.extend(k1[a * n1:(a + 1) * n1])
            out.extend(k2[a * n2:(a + 1) * n2])
        return out

    return ActionGenerators(K1.group, fv, fn=fn)


def product_preservation_check(A: GaugeField, K1: ActionGenerators, K2: ActionGenerators,
                               samples: int = 20, seed: int = 0, tol: float = 1e-12,
                               box: float = 1.0) -> CheckReport:
    lhs = induce_connection(A, direct_sum_action(K1, K2))
    rhs = product_connection(induce_connection(A, K1), induce_connection(A, K2))
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-box, box, A.m)
        f = rng.uniform(-box, box, K1.n + K2.n)
        worst = max(worst, float(np.max(np.abs(lhs(x, f) - rhs(x, f)))))
    return CheckReport.from_residual(worst, tol, samples)


def reproducing_check(A: GaugeField, curve: CurveLike, steps: int = 1000, g0=None,
                      tol: float = 1e-6) -> CheckReport:
    """Transport in the bundle induced by left multiplication equals group transport."""
    G = A.group
    g0 = G.identity if g0 is None else np.asarray(g0, dtype=float)
    K = left_multiplication_action(G)
    fib = parallel_transport_fiber(induce_connection(A, K), curve, g0.reshape(-1), steps)
    grp = group_transport(A, curve, g0, steps)
    resid = float(np.max(np.abs(fib.value.reshape(G.k, G.k) - grp.value)))
    return CheckReport.from_residual(resid, tol, steps,
                                     error_estimate=max(fib.error_estimate, grp.error_estimate))


def transport_equivariance_check(A: GaugeField, rho: RepresentationMatrices, curve: CurveLike,
                                 f0, steps: int = 1000, tol: float = 1e-6) -> CheckReport:
    """Induced linear transport of ``f0`` equals ``rho(group transport) f0``."""
    if rho.group_map is None:
        raise ValueError("representation has no group-level map")
    L = induce_linear(A, rho)
    fib = parallel_transport_fiber(L.embed(), curve, f0, steps)
    grp = group_transport(A, curve, None, steps)
    pred = rho.group_map(grp.value) @ np.asarray(f0, dtype=float)
    return CheckReport.from_residual(float(np.max(np.abs(fib.value - pred))), tol, steps)


def check_equivariant_morphism(A: GaugeField, rho1: RepresentationMatrices,
                               rho2: RepresentationMatrices, phi, section: SectionField,
                               samples: int = 20, seed: int = 0, tol: float = 1e-10,
                               box: float = 1.0) -> CheckReport:
    """``phi D s = D (phi s)`` for a constant linear map ``phi`` between representations."""
    phi = np.asarray(phi, dtype=float)
    G1 = induce_linear(A, rho1).embed()
    G2 = induce_linear(A, rho2).embed()
    if section.exprs is None:
        raise ValueError("section must be expression-backed")
    chart2 = G2.chart
    img = SectionField(chart2, [lincomb((float(phi[i, j]), section.exprs[j])
                                        for j in range(rho1.n)) for i in range(rho2.n)])
    src = SectionField(G1.chart, section.exprs)
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        x = rng.uniform(-box, box, A.m)
        for mu in range(A.m):
            X = BaseVectorField.coordinate(G1.chart, mu)
            lhs = phi @ covariant_derivative(G1, src, X, x).v
            rhs = covariant_derivative(G2, img, BaseVectorField.coordinate(chart2, mu), x).v
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
    return CheckReport.from_residual(worst, tol, samples)


@dataclass(frozen=True)
class CandidateReport:
    parallel: CheckReport
    representation: CheckReport
    curvature: CheckReport

    @property
    def verdicts(self) -> dict:
        return {"parallel": self.parallel.passed, "representation": self.representation.passed,
                "curvature": self.curvature.passed}

    @property
    def passed(self) -> bool:
        return all(self.verdicts.values())


def check_association_candidate(L: LinearChristoffel, A: GaugeField, S: StarInfCandidate,
                                samples: int = 20, seed: int = 0, tol: float = 1e-8,
                                box: float = 1.0) -> CandidateReport:
    """The three conditions for ``L`` to be induced from ``A`` through ``S``.

    (i) ``S`` is parallel for the Hom-connection built from ``L`` and the
    adjoint-induced connection on the gauge algebra bundle; (ii) each ``S(x)``
    represents the algebra; (iii) the curvature of ``L`` is ``S`` applied to
    the field strength.
    """
    G = A.group
    n, m, d = L.chart.n, L.chart.m, G.d
    if S.n != n or S.d != d or A.m != m:
        raise ValueError("candidate, connection and gauge field dimensions disagree")
    c = G.structure_constants
    Fs = FieldStrength(A)
    curv = classical_curvature(L)
    rng = np.random.default_rng(seed)
    w1 = w2 = w3 = 0.0
    for _ in range(samples):
        x = [float(v) for v in rng.uniform(-box, box, m)]
        vals, J = dual.jacobian(S.values, x)
        Sx = np.transpose(np.array(vals, float).reshape(n, d, n), (1, 0, 2))
        dS = np.transpose(np.array(J, float).reshape(n, d, n, m), (3, 1, 0, 2))  # [mu, a, al, w]
        Gam = L(x)  # [al, mu, w]
        Acoef = A.coeffs(x)
        for mu in range(m):
            Gm = Gam[:, mu, :]
            ad = np.einsum("bca,c->ba", c, Acoef[mu])
            for a in range(d):
                r = dS[mu, a] + Gm @ Sx[a] - np.einsum("b,bij->ij", ad[:, a], Sx) - Sx[a] @ Gm
                w1 = max(w1, float(np.max(np.abs(r))))
        for a in range(d):
            for b in range(d):
                r = Sx[a] @ Sx[b] - Sx[b] @ Sx[a] - np.einsum("c,cij->ij", c[:, a, b], Sx)
                w2 = max(w2, float(np.max(np.abs(r))))
        Rm = curv.matrices(x)
        F = Fs(x)
        for mu in range(m):
            for nu in range(m):
                r = Rm[mu, nu] - np.einsum("c,cij->ij", F[mu, nu], Sx)
                w3 = max(w3, float(np.max(np.abs(r))))
    return CandidateReport(CheckReport.from_residual(w1, tol, samples),
                           CheckReport.from_residual(w2, tol, samples),
                           CheckReport.from_residual(w3, tol, samples))
