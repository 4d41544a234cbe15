"""Matrix Lie groups, their algebras, and infinitesimal actions.

Complex groups are realified: a complex k x k matrix ``Z = A + iB`` becomes
the real 2k x 2k block matrix ``[[A, -B], [B, A]]``. Algebra elements are
coordinate vectors with respect to the group's basis.
"""

from __future__ import annotations

import math
from typing import Callable, Sequence

import numpy as np
import scipy.linalg

from ehresmann import dual
from ehresmann.checks import CheckReport
from ehresmann.exprdsl import Compiled, Var, as_expr, lincomb


class NotInAlgebraError(ValueError):
    pass


class GroupMembershipError(ValueError):
    pass


class SingularElementError(ValueError):
    pass


def _realify(Z: np.ndarray) -> np.ndarray:
    A, B = Z.real, Z.imag
    return np.block([[A, -B], [B, A]])


def _complexify(M: np.ndarray) -> np.ndarray:
    k = M.shape[0] // 2
    return M[:k, :k] + 1j * M[k:, :k]


def generic_matmul(A, B):
    """Matrix product for nested lists or arrays that may hold duals."""
    A = np.asarray(A, dtype=object) if _has_dual(A) else np.asarray(A)
    B = np.asarray(B, dtype=object) if _has_dual(B) else np.asarray(B)
    return A.dot(B)


def _has_dual(a) -> bool:
    if isinstance(a, np.ndarray) and a.dtype != object:
        return False
    return any(isinstance(v, dual.Dual) for v in np.asarray(a, dtype=object).ravel())


def generic_inverse(M):
    """Gauss-Jordan inverse with partial pivoting on primal values.

    Works on object arrays holding duals, which ``numpy.linalg`` cannot.
    Plain float input goes straight to numpy.
    """
    if not _has_dual(M):
        try:
            return np.linalg.inv(np.asarray(M, dtype=float))
        except np.linalg.LinAlgError as exc:
            raise SingularElementError("singular matrix") from exc
    A = [list(r) for r in np.asarray(M, dtype=object)]
    k = len(A)
    I = [[1.0 if i == j else 0.0 for j in range(k)] for i in range(k)]
    for c in range(k):
        p = max(range(c, k), key=lambda r: abs(dual.primal(A[r][c])))
        if abs(dual.primal(A[p][c])) < 1e-300:
            raise SingularElementError("singular matrix")
        A[c], A[p] = A[p], A[c]
        I[c], I[p] = I[p], I[c]
        piv = A[c][c]
        A[c] = [v / piv for v in A[c]]
        I[c] = [v / piv for v in I[c]]
        for r in range(k):
            if r != c:
                fac = A[r][c]
                if dual._is_const_zero(fac):
                    continue
                A[r] = [a - fac * b for a, b in zip(A[r], A[c])]
                I[r] = [a - fac * b for a, b in zip(I[r], I[c])]
    return np.array(I, dtype=object)


class MatrixLieGroup:
    """A matrix group given by a basis of its Lie algebra.

    ``kind`` selects membership tests, closed-form exponentials and the
    projection used to control drift: ``"u1"``, ``"so"``, ``"su2"``, or
    ``"general"`` (invertibility only).
    """

    def __init__(self, name: str, basis: Sequence, kind: str = "general", tol: float = 1e-12):
        self.name = name
        self.kind = kind
        B = np.array(basis, dtype=float)
        if B.ndim != 3 or B.shape[1] != B.shape[2]:
            raise ValueError("basis must be a list of square matrices")
        self.basis = B
        self.d, self.k = B.shape[0], B.shape[1]
        flat = B.reshape(self.d, -1).T  # k^2 x d
        if np.linalg.matrix_rank(flat, tol=1e-10) != self.d:
            raise ValueError(f"{name}: basis matrices are linearly dependent")
        self._pinv = np.linalg.pinv(flat)
        c = np.zeros((self.d, self.d, self.d))
        for a in range(self.d):
            for b in range(self.d):
                comm = B[a] @ B[b] - B[b] @ B[a]
                c[:, a, b] = self.vee(comm, tol=tol)
        c[np.abs(c) < 1e-13] = 0.0  # pinv roundoff
        # structure_constants[c, a, b] = c^c_{ab}
        self.structure_constants = c

    # builtins ---------------------------------------------------------------
    @classmethod
    def u1(cls) -> "MatrixLieGroup":
        return cls("U1", [[[0.0, -1.0], [1.0, 0.0]]], kind="u1")

    @classmethod
    def so3(cls) -> "MatrixLieGroup":
        L1 = [[0, 0, 0], [0, 0, -1], [0, 1, 0]]
        L2 = [[0, 0, 1], [0, 0, 0], [-1, 0, 0]]
        L3 = [[0, -1, 0], [1, 0, 0], [0, 0, 0]]
        return cls("SO3", [L1, L2, L3], kind="so")

    @classmethod
    def su2(cls) -> "MatrixLieGroup":
        s1 = np.array([[0, 1], [1, 0]], dtype=complex)
        s2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
        s3 = np.array([[1, 0], [0, -1]], dtype=complex)
        return cls("SU2", [_realify(-0.5j * s) for s in (s1, s2, s3)], kind="su2")

    @classmethod
    def gln(cls, k: int) -> "MatrixLieGroup":
        if k < 1:
            raise ValueError("GL(n) needs n >= 1")
        basis = []
        for i in range(k):
            for j in range(k):
                E = np.zeros((k, k))
                E[i, j] = 1.0
                basis.append(E)
        return cls(f"GL{k}", basis, kind="general")

    @classmethod
    def from_basis(cls, name: str, basis: Sequence, kind: str = "general") -> "MatrixLieGroup":
        return cls(name, basis, kind=kind)

    @classmethod
    def by_name(cls, name: str) -> "MatrixLieGroup":
        key = name.strip().upper().replace("(", "").replace(")", "")
        if key == "U1":
            return cls.u1()
        if key == "SO3":
            return cls.so3()
        if key == "SU2":
            return cls.su2()
        for prefix in ("GLN", "GL"):
            if key.startswith(prefix) and key[len(prefix):].isdigit():
                return cls.gln(int(key[len(prefix):]))
        raise ValueError(f"unknown group {name!r}; expected U1, SO3, SU2 or GL<k>")

    # algebra ------------------------------------------------------------------
    @property
    def identity(self) -> np.ndarray:
        return np.eye(self.k)

    @property
    def is_abelian(self) -> bool:
        return not np.any(np.abs(self.structure_constants) > 1e-14)

    def hat(self, X) -> np.ndarray:
        """Coordinates to matrix; generic over duals."""
        if _has_dual(X):
            out = np.zeros((self.k, self.k), dtype=object)
            for a, xa in enumerate(X):
                if dual._is_const_zero(xa):
                    continue
                for i, j in zip(*np.nonzero(self.basis[a])):
                    out[i, j] = out[i, j] + xa * float(self.basis[a, i, j])
            return out
        return np.einsum("a,aij->ij", np.asarray(X, dtype=float), self.basis)

    def vee(self, M, tol: float = 1e-10):
        """Matrix to coordinates, raising if ``M`` is not in the algebra."""
        if _has_dual(M):
            flat = np.asarray(M, dtype=object).reshape(-1)
            return list(self._pinv.astype(object).dot(flat))
        M = np.asarray(M, dtype=float)
        c = self._pinv @ M.reshape(-1)
        resid = float(np.max(np.abs(M - self.hat(c)))) if M.size else 0.0
        if not resid <= tol * max(1.0, float(np.max(np.abs(M)))):
            raise NotInAlgebraError(f"matrix is not in the Lie algebra of {self.name} "
                                    f"(off-span residual {resid:.3e})")
        return c

    def bracket(self, X, Y) -> np.ndarray:
        return np.einsum("cab,a,b->c", self.structure_constants,
                         np.asarray(X, float), np.asarray(Y, float))

    def ad_matrix(self, X) -> np.ndarray:
        """``(ad_X)^b_a = c^b_{ca} X^c``, so ``ad_X Y = [X, Y]``."""
        return np.einsum("bca,c->ba", self.structure_constants, np.asarray(X, float))

    # group ------------------------------------------------------------------
    def exp(self, X, t: float = 1.0) -> np.ndarray:
        X = t * np.asarray(X, dtype=float)
        if self.kind == "u1":
            th = X[0]
            return np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        if self.kind == "so" and self.k == 3:
            return _rodrigues(self.hat(X))
        return scipy.linalg.expm(self.hat(X))

    def inverse(self, g) -> np.ndarray:
        return generic_inverse(g)

    def adjoint(self, g, X) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        return self.vee(g @ self.hat(X) @ self.inverse(g))

    def adjoint_matrix(self, g) -> np.ndarray:
        """``Ad_g`` as a d x d matrix in basis coordinates."""
        g = np.asarray(g, dtype=float)
        gi = self.inverse(g)
        return np.stack([self.vee(g @ E @ gi) for E in self.basis], axis=1)

    def membership_residual(self, g) -> float:
        g = np.asarray(g, dtype=float)
        I = np.eye(self.k)
        if self.kind == "u1" or self.kind == "so":
            return max(float(np.max(np.abs(g.T @ g - I))), abs(float(np.linalg.det(g)) - 1.0))
        if self.kind == "su2":
            k2 = self.k // 2
            J = np.block([[np.zeros((k2, k2)), -np.eye(k2)], [np.eye(k2), np.zeros((k2, k2))]])
            r = max(float(np.max(np.abs(g.T @ g - I))), float(np.max(np.abs(g @ J - J @ g))))
            return max(r, abs(complex(np.linalg.det(_complexify(g))) - 1.0))
        det = float(np.linalg.det(g))
        # distance to singularity, zero for any comfortably invertible matrix
        return 0.0 if abs(det) > 1e-12 else 1.0

    def check_member(self, g, tol: float = 1e-9) -> np.ndarray:
        r = self.membership_residual(g)
        if not r <= tol:
            raise GroupMembershipError(f"not an element of {self.name} (residual {r:.3e})")
        return np.asarray(g, dtype=float)

    def project(self, g) -> np.ndarray:
        """Nearest group element for drift control (identity map for GL)."""
        if self.kind in ("u1", "so", "su2"):
            U, _, Vt = np.linalg.svd(np.asarray(g, dtype=float))
            return U @ Vt
        return np.asarray(g, dtype=float)

    def theta_principal(self, g, X, Y, Z):
        """Flip on the principal second vertical bundle: ``(g, Y, X, Z + [X, Y])``."""
        X = np.asarray(X, float)
        Y = np.asarray(Y, float)
        return g, Y.copy(), X.copy(), np.asarray(Z, float) + self.bracket(X, Y)


def _rodrigues(K: np.ndarray) -> np.ndarray:
    w = np.array([K[2, 1], K[0, 2], K[1, 0]])
    th = float(np.linalg.norm(w))
    I = np.eye(3)
    if th < 1e-8:
        return I + K + 0.5 * K @ K
    return I + math.sin(th) / th * K + (1.0 - math.cos(th)) / th ** 2 * K @ K


class ActionGenerators:
    """Fundamental vector fields ``K_a(f)`` of a left action on R^n.

    ``exprs`` is d x n (one row per basis element) over ``fiber_vars``, or
    ``fn(f)`` returns the flat row-major d*n list; both must accept duals.
    """

    def __init__(self, group: MatrixLieGroup, fiber_vars: Sequence[str], exprs=None,
                 fn: Callable[[list], list] | None = None):
        self.group = group
        self.fiber_vars = tuple(fiber_vars)
        self.n = len(self.fiber_vars)
        d = group.d
        if exprs is not None:
            rows = [list(r) for r in exprs]
            if len(rows) != d or any(len(r) != self.n for r in rows):
                raise ValueError(f"action generators must be {d}x{self.n}")
            self.exprs = tuple(tuple(as_expr(e, self.fiber_vars) for e in r) for r in rows)
            fn = Compiled([e for r in self.exprs for e in r], self.fiber_vars)
        elif fn is None:
            raise ValueError("need exprs or fn")
        else:
            self.exprs = None
        self._fn = fn

    def values(self, f: Sequence) -> list:
        return self._fn(list(f))

    def field(self, X: Sequence, f: Sequence) -> list:
        """``sum_a X^a K_a(f)``; generic over duals in both arguments."""
        K = self.values(f)
        n = self.n
        out = []
        for al in range(n):
            acc = 0.0
            for a, xa in enumerate(X):
                if not dual._is_const_zero(xa):
                    acc = acc + xa * K[a * n + al]
            out.append(acc)
        return out


def linear_action(group: MatrixLieGroup, rho: Sequence, fiber_vars: Sequence[str] | None = None
                  ) -> ActionGenerators:
    """Generators ``K_a(f) = rho(e_a) f`` of a linear representation."""
    rho = np.asarray(rho, dtype=float)
    n = rho.shape[1]
    if fiber_vars is None:
        fiber_vars = [f"f{i + 1}" for i in range(n)]
    fv = [Var(v) for v in fiber_vars]
    rows = [[lincomb((float(rho[a, al, w]), fv[w]) for w in range(n)) for al in range(n)]
            for a in range(group.d)]
    return ActionGenerators(group, fiber_vars, rows)


def left_multiplication_action(group: MatrixLieGroup) -> ActionGenerators:
    """``K_a(gamma) = e_a gamma`` with fiber coordinates the row-major matrix entries."""
    k = group.k
    fvars = [f"g{i + 1}_{j + 1}" for i in range(k) for j in range(k)]
    # acting on each column separately: (e_a gamma)_{ij} = sum_l e_a[i,l] gamma_{lj}
    rho = np.zeros((group.d, k * k, k * k))
    for a in range(group.d):
        for i in range(k):
            for j in range(k):
                for l in range(k):
                    rho[a, i * k + j, l * k + j] = group.basis[a, i, l]
    return linear_action(group, rho, fvars)


def act_inf(K: ActionGenerators, X, f) -> np.ndarray:
    return np.array(K.field([float(v) for v in X], [float(v) for v in f]), dtype=float)


def vector_field_bracket(V: Callable[[list], list], W: Callable[[list], list], f: list) -> list:
    """``[V, W](f) = DW(f) V(f) - DV(f) W(f)``."""
    _, dW = dual.jvp(W, f, V(f))
    _, dV = dual.jvp(V, f, W(f))
    return [a - b for a, b in zip(dW, dV)]


def check_generator_law(K: ActionGenerators, samples: int = 20, seed: int = 0,
                        tol: float = 1e-8, box: float = 1.0) -> CheckReport:
    """Sample the anti-homomorphism law ``[K_X, K_Y] = -K_[X,Y]``."""
    G = K.group
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(samples):
        X = [float(v) for v in rng.normal(size=G.d)]
        Y = [float(v) for v in rng.normal(size=G.d)]
        f = [float(v) for v in rng.uniform(-box, box, K.n)]
        lhs = vector_field_bracket(lambda ff: K.field(X, ff), lambda ff: K.field(Y, ff), f)
        rhs = K.field([float(v) for v in G.bracket(X, Y)], f)
        worst = max(worst, max((abs(a + b) for a, b in zip(lhs, rhs)), default=0.0))
    return CheckReport.from_residual(worst, tol, samples)
