"""Seeded random generators for expressions, connections and gauge data.

Everything takes a ``numpy.random.Generator`` so suites are reproducible.
Generated expressions are built from + - * , small integer powers, sin and
cos, so they are defined everywhere.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ehresmann.bundle import BaseVectorField, BundleChart, SectionField
from ehresmann.connection import ChristoffelField, LinearChristoffel
from ehresmann.exprdsl import ONE, ZERO, Binary, Expr, Num, Unary, Var, lincomb, mul
from ehresmann.liegroup import MatrixLieGroup
from ehresmann.principal import GaugeField


def random_expr(rng: np.random.Generator, variables: Sequence[str], depth: int = 2) -> Expr:
    """A random polynomial/trigonometric expression."""
    if depth <= 0 or rng.random() < 0.2:
        if variables and rng.random() < 0.65:
            return Var(str(rng.choice(list(variables))))
        return Num(round(float(rng.uniform(-2.0, 2.0)), 3))
    r = rng.random()
    if r < 0.3:
        return Binary("add", random_expr(rng, variables, depth - 1),
                      random_expr(rng, variables, depth - 1))
    if r < 0.45:
        return Binary("sub", random_expr(rng, variables, depth - 1),
                      random_expr(rng, variables, depth - 1))
    if r < 0.7:
        return Binary("mul", random_expr(rng, variables, depth - 1),
                      random_expr(rng, variables, depth - 1))
    if r < 0.85:
        return Unary(str(rng.choice(["sin", "cos"])), random_expr(rng, variables, depth - 1))
    return Binary("pow", random_expr(rng, variables, depth - 1), Num(float(rng.integers(2, 4))))


def random_christoffel(rng, chart: BundleChart, depth: int = 2) -> ChristoffelField:
    return ChristoffelField(chart, [[random_expr(rng, chart.variables, depth)
                                     for _ in range(chart.m)] for _ in range(chart.n)])


def random_linear_christoffel(rng, chart: BundleChart, depth: int = 2) -> LinearChristoffel:
    return LinearChristoffel(chart, [[[random_expr(rng, chart.base_vars, depth)
                                       for _ in range(chart.n)] for _ in range(chart.m)]
                                     for _ in range(chart.n)])


def random_section(rng, chart: BundleChart, depth: int = 2) -> SectionField:
    return SectionField(chart, [random_expr(rng, chart.base_vars, depth) for _ in range(chart.n)])


def random_vector_field(rng, chart: BundleChart, depth: int = 2) -> BaseVectorField:
    return BaseVectorField(chart, [random_expr(rng, chart.base_vars, depth) for _ in range(chart.m)])


def random_gauge_field(rng, group: MatrixLieGroup, base_vars: Sequence[str],
                       depth: int = 2) -> GaugeField:
    return GaugeField(group, base_vars, [[random_expr(rng, base_vars, depth) for _ in range(group.d)]
                                         for _ in base_vars])


def expr_matmul(A, B):
    k, l, p = len(A), len(B), len(B[0])
    return [[lincomb((1.0, mul(A[i][j], B[j][c])) for j in range(l)) for c in range(p)]
            for i in range(k)]


def one_parameter_subgroup(B: np.ndarray, phi: Expr):
    """``exp(phi B)`` as an expression matrix for structured generators.

    Handles ``B^3 = -lam^2 B`` (rotation-like), ``B^2 = 0`` and ``B^2 = B``.
    """
    B = np.asarray(B, dtype=float)
    k = B.shape[0]
    B2 = B @ B
    I = np.eye(k)
    if np.allclose(B2, 0.0, atol=1e-14):
        terms = [(I, ONE), (B, phi)]
    elif np.allclose(B2, B, atol=1e-14):
        terms = [(I, ONE), (B, Binary("sub", Unary("exp", phi), ONE))]
    else:
        lam2 = -float(np.trace(B2 @ B @ B.T) / np.trace(B @ B.T))
        if lam2 <= 0 or not np.allclose(B2 @ B, -lam2 * B, atol=1e-12):
            raise ValueError("generator has no closed-form exponential here")
        lam = float(np.sqrt(lam2))
        arg = mul(Num(lam), phi) if lam != 1.0 else phi
        terms = [(I, ONE), (B / lam, Unary("sin", arg)),
                 (B2 / lam2, Binary("sub", ONE, Unary("cos", arg)))]
    return [[lincomb((float(M[i, j]), e) for M, e in terms) for j in range(k)] for i in range(k)]


def random_gauge_transformation(rng, group: MatrixLieGroup, base_vars: Sequence[str],
                                depth: int = 2):
    """``prod_a exp(phi_a(x) e_a)`` with random ``phi_a``, as an expression matrix."""
    k = group.k
    g = [[ONE if i == j else ZERO for j in range(k)] for i in range(k)]
    for a in range(group.d):
        phi = random_expr(rng, base_vars, depth)
        g = expr_matmul(g, one_parameter_subgroup(group.basis[a], phi))
    return g


def random_algebra(rng, group: MatrixLieGroup, scale: float = 1.0) -> np.ndarray:
    return scale * rng.normal(size=group.d)


def random_group_element(rng, group: MatrixLieGroup, scale: float = 1.0) -> np.ndarray:
    return group.exp(random_algebra(rng, group, scale))


__all__ = [
    "random_expr", "random_christoffel", "random_linear_christoffel", "random_section",
    "random_vector_field", "random_gauge_field", "random_gauge_transformation",
    "one_parameter_subgroup", "expr_matmul", "random_algebra", "random_group_element",
]
