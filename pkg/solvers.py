# solvers.py
# Linear and generalized eigen solves on assembled systems
"""
(P), (RP) 선형 문제와 A v = λ M v 일반화 고유값 문제 풀이.

- Cholesky: LAPACK banded (scipy.linalg.cholesky_banded / cho_solve_banded)
- CG: Jacobi 전처리 PCG, 최대 10n 반복
- 고유값: scipy.linalg.eigh(A, M) (Cholesky 환원 → 삼중대각화 → QL/QR), 부호 규약 고정
"""

import logging
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
from scipy.linalg import LinAlgError, cho_solve_banded, cholesky_banded, eigh, null_space
from scipy.sparse import diags
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence, eigsh

from assembly import AssembledSystem, SymBandMatrix
from errors import ConfigurationError, DomainError, SolverError


METHODS = ("cholesky", "cg")
EIGEN_METHODS = ("dense", "lanczos")

RESIDUAL_TOL = 1e-10
EIGEN_TOL = 1e-8
MULTIPLICITY_GAP = 1e-6


# ===== Data Structures =====

@dataclass
class EigenSet:
    """Ascending eigenvalues with M-orthonormal eigenvectors stored as columns."""
    values: np.ndarray
    vectors: np.ndarray
    gram: SymBandMatrix

    @property
    def k(self) -> int:
        return len(self.values)

    def vector(self, j: int) -> np.ndarray:
        return self.vectors[:, j]

    def multiplicities(self, rel_gap: float = MULTIPLICITY_GAP) -> List[int]:
        return cluster_multiplicities(self.values, rel_gap)


# ===== Linear solves =====

def _jacobi_pcg(A: SymBandMatrix, b: np.ndarray, rtol: float, maxiter: int) -> np.ndarray:
    inv_diag = 1.0 / A.diagonal()
    tol = rtol * np.linalg.norm(b)

    xk = np.zeros_like(b)
    rk = b.copy()
    zk = inv_diag * rk
    dk = zk.copy()
    k = 0
    while np.linalg.norm(rk) > tol and k < maxiter:
        Adk = A.matvec(dk)
        rz = float(np.dot(zk, rk))
        alpha = rz / float(np.dot(dk, Adk))
        xk = xk + alpha * dk
        rk = rk - alpha * Adk
        zk = inv_diag * rk
        beta = float(np.dot(zk, rk)) / rz
        dk = zk + beta * dk
        k += 1

    if np.linalg.norm(rk) > tol:
        raise SolverError(f"CG did not converge in {maxiter} iterations (|r|={np.linalg.norm(rk):.3e})")
    logging.info(f"[Solver] CG converged in {k} iterations")
    return xk


def solve_dirichlet(sys: AssembledSystem, load: np.ndarray, method: str = "cholesky",
                    rtol: float = 1e-12) -> np.ndarray:
    """Coefficients of the unique minimizer of (c/4) vᵀGv - Fᵀv, i.e. A u = F."""
    load = np.asarray(load, dtype=float)
    if load.shape != (sys.n,):
        raise ConfigurationError(f"load has shape {load.shape}, expected ({sys.n},)")
    if method not in METHODS:
        raise ConfigurationError(f"unknown linear solver '{method}'")

    A = sys.stiffness
    if method == "cholesky":
        try:
            factor = cholesky_banded(A.storage, lower=False)
        except LinAlgError as e:
            raise SolverError(f"Cholesky breakdown, stiffness is not positive definite: {e}") from e
        u = cho_solve_banded((factor, False), load)
    else:
        u = _jacobi_pcg(A, load, rtol, 10 * sys.n)

    f_norm = np.linalg.norm(load)
    residual = np.linalg.norm(A.matvec(u) - load)
    if residual > RESIDUAL_TOL * f_norm:
        raise SolverError(f"residual {residual:.3e} exceeds {RESIDUAL_TOL}·|F| = {RESIDUAL_TOL * f_norm:.3e}")
    return u


def minimal_energy(load: np.ndarray, u: np.ndarray) -> float:
    """min J_{δ,s} = (c/4) uᵀGu - Fᵀu = -½ Fᵀu at the discrete minimizer."""
    return -0.5 * float(np.dot(load, u))


# ===== Eigen solves =====

def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        cutoff = 1e-12 * np.max(np.abs(col))
        first = int(np.argmax(np.abs(col) > cutoff))
        if col[first] < 0:
            out[:, j] = -col
    return out


def _validate(eigs: EigenSet, A: np.ndarray, M: np.ndarray) -> None:
    values = eigs.values
    if np.any(values <= 0):
        raise SolverError(f"non-positive eigenvalue {values.min():.3e}")
    if np.any(np.diff(values) < 0):
        raise SolverError("eigenvalues not sorted ascending")

    V = eigs.vectors
    defect = float(np.max(np.abs(V.T @ M @ V - np.eye(eigs.k))))
    if defect > EIGEN_TOL:
        raise SolverError(f"M-orthonormality defect {defect:.3e}")
    AV = A @ V
    for j in range(eigs.k):
        res = np.linalg.norm(AV[:, j] - values[j] * (M @ V[:, j]))
        if res > EIGEN_TOL * np.linalg.norm(AV[:, j]):
            raise SolverError(f"eigen residual {res:.3e} too large for j={j + 1}")


def _lanczos(A: np.ndarray, M: np.ndarray, k: int) -> Tuple[np.ndarray, np.ndarray]:
    try:
        values, vectors = eigsh(_sparse_from(A), k=k, M=_sparse_from(M), which="SA", tol=1e-14)
    except (ArpackError, ArpackNoConvergence) as e:
        raise SolverError(f"Lanczos eigensolver failed: {e}") from e
    order = np.argsort(values)
    values = values[order]
    vectors = vectors[:, order]
    norms = np.sqrt(np.einsum("ij,ij->j", vectors, M @ vectors))
    return values, vectors / norms


def _sparse_from(A: np.ndarray):
    """Sparse copy of a dense banded matrix for ARPACK."""
    n = A.shape[0]
    offsets = [d for d in range(-n + 1, n) if np.any(np.diagonal(A, offset=d))]
    return diags([np.diagonal(A, offset=d) for d in offsets], offsets, format="csr")


def solve_eigen(sys: AssembledSystem, k: int, method: str = "dense") -> EigenSet:
    """Smallest k eigenpairs of A v = λ M v; first nonzero component of each vector positive."""
    if isinstance(k, bool) or int(k) != k or k < 1 or k > sys.n:
        raise ConfigurationError(f"k={k} must lie in [1, {sys.n}]")
    if method not in EIGEN_METHODS:
        raise ConfigurationError(f"unknown eigen method '{method}'")
    k = int(k)
    A = sys.stiffness.to_dense()
    M = sys.mass.to_dense()

    if method == "dense":
        try:
            values, vectors = eigh(A, M, subset_by_index=[0, k - 1], driver="gvx")
        except LinAlgError as e:
            raise SolverError(f"generalized eigensolve failed: {e}") from e
    else:
        values, vectors = _lanczos(A, M, k)

    eigs = EigenSet(values=np.asarray(values), vectors=_fix_signs(np.asarray(vectors)), gram=sys.mass)
    _validate(eigs, A, M)
    logging.info(f"[Solver] {method} eigensolve n={sys.n} k={k} lambda_1={eigs.values[0]:.10g}")
    return eigs


def rayleigh_quotient(sys: AssembledSystem, v: np.ndarray) -> float:
    v = np.asarray(v, dtype=float)
    if not np.any(v):
        raise DomainError("Rayleigh quotient of the zero vector")
    return sys.stiffness.quad_form(v) / sys.mass.quad_form(v)


def deflated_eigenvalue(sys: AssembledSystem, eigs: EigenSet, j: int) -> float:
    """λ_j = min RQ over the M-orthogonal complement of the first j-1 eigenvectors."""
    if j < 1 or j > eigs.k:
        raise ConfigurationError(f"j={j} must lie in [1, {eigs.k}]")
    A = sys.stiffness.to_dense()
    M = sys.mass.to_dense()
    if j == 1:
        Z = np.eye(sys.n)
    else:
        V = eigs.vectors[:, :j - 1]
        Z = null_space(V.T @ M)
    values = eigh(Z.T @ A @ Z, Z.T @ M @ Z, eigvals_only=True, subset_by_index=[0, 0])
    return float(values[0])


def cluster_multiplicities(values, rel_gap: float = MULTIPLICITY_GAP) -> List[int]:
    """Cluster size for each eigenvalue; neighbours within rel_gap share a cluster."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    clusters = [[0]]
    for i in range(1, len(values)):
        if values[i] - values[i - 1] <= rel_gap * abs(values[i]):
            clusters[-1].append(i)
        else:
            clusters.append([i])
    out = [0] * len(values)
    for members in clusters:
        for i in members:
            out[i] = len(members)
    return out
