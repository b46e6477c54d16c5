import numpy as np
import pytest

from assembly import INFINITE, assemble_load, assemble_stiffness
from errors import ConfigurationError, DomainError
from mesh_kernel import KernelSpec, build_mesh
from solvers import (
    cluster_multiplicities,
    deflated_eigenvalue,
    minimal_energy,
    rayleigh_quotient,
    solve_dirichlet,
    solve_eigen,
)


@pytest.fixture(scope="module")
def system():
    mesh = build_mesh(0.0, 1.0, 40, 4)
    return assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, 0.3))


def _dense_reference(sys, k):
    A = sys.stiffness.to_dense()
    M = sys.mass.to_dense()
    Linv = np.linalg.inv(np.linalg.cholesky(M))
    return np.linalg.eigvalsh(Linv @ A @ Linv.T)[:k]


# ===== Linear solves =====

def test_cholesky_and_cg_agree(system):
    load = assemble_load(system.mesh, "sin_2")
    u_chol = solve_dirichlet(system, load, "cholesky")
    u_cg = solve_dirichlet(system, load, "cg")
    assert np.linalg.norm(u_cg - u_chol) <= 1e-9 * np.linalg.norm(u_chol)
    assert np.allclose(system.stiffness.matvec(u_chol), load, rtol=1e-10, atol=1e-14)


def test_zero_load_gives_zero_solution(system):
    u = solve_dirichlet(system, np.zeros(system.n))
    assert not np.any(u)


def test_linear_solve_rejects_bad_input(system):
    with pytest.raises(ConfigurationError):
        solve_dirichlet(system, np.ones(system.n + 1))
    with pytest.raises(ConfigurationError):
        solve_dirichlet(system, np.ones(system.n), method="lu")


def test_minimal_energy_equals_energy_at_minimizer(system):
    load = assemble_load(system.mesh, "one")
    u = solve_dirichlet(system, load)
    energy = 0.5 * system.stiffness.quad_form(u) - float(load @ u)
    assert minimal_energy(load, u) == pytest.approx(energy, rel=1e-10)
    rng = np.random.default_rng(3)
    for _ in range(5):
        v = u + 1e-3 * rng.standard_normal(system.n)
        assert 0.5 * system.stiffness.quad_form(v) - float(load @ v) > minimal_energy(load, u)


# ===== Eigen solves =====

def test_eigen_matches_dense_oracle(system):
    eigs = solve_eigen(system, 5)
    assert np.allclose(eigs.values, _dense_reference(system, 5), rtol=1e-9, atol=0.0)
    assert np.all(np.diff(eigs.values) > 0)


def test_eigenvectors_are_mass_orthonormal_with_sign_convention(system):
    eigs = solve_eigen(system, 4)
    V = eigs.vectors
    gram = V.T @ system.mass.to_dense() @ V
    assert np.max(np.abs(gram - np.eye(4))) <= 1e-8
    for j in range(4):
        v = eigs.vector(j)
        first = v[np.abs(v) > 1e-12 * np.abs(v).max()][0]
        assert first > 0


def test_infinite_mode_eigen(system):
    mesh = build_mesh(0.0, 1.0, 20, 2)
    sys_inf = assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, 0.6), INFINITE)
    eigs = solve_eigen(sys_inf, 3)
    assert np.allclose(eigs.values, _dense_reference(sys_inf, 3), rtol=1e-9, atol=0.0)


def test_lanczos_agrees_with_dense():
    mesh = build_mesh(0.0, 1.0, 24, 3)
    sys = assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, 0.45))
    dense = solve_eigen(sys, 2)
    lanczos = solve_eigen(sys, 2, method="lanczos")
    assert np.allclose(lanczos.values, dense.values, rtol=1e-8, atol=0.0)


def test_eigen_rejects_bad_k(system):
    for k in (0, system.n + 1, 1.5, True):
        with pytest.raises(ConfigurationError):
            solve_eigen(system, k)
    with pytest.raises(ConfigurationError):
        solve_eigen(system, 1, method="power")


def test_rayleigh_quotient_is_minimized_by_first_eigenvector(system):
    eigs = solve_eigen(system, 1)
    assert rayleigh_quotient(system, eigs.vector(0)) == pytest.approx(eigs.values[0], rel=1e-12)
    rng = np.random.default_rng(11)
    for _ in range(60):
        v = rng.standard_normal(system.n)
        v /= np.linalg.norm(v)
        assert rayleigh_quotient(system, v) >= eigs.values[0] * (1.0 - 1e-12)
    with pytest.raises(DomainError):
        rayleigh_quotient(system, np.zeros(system.n))


def test_first_eigenvector_has_no_sign_change(system):
    v = solve_eigen(system, 1).vector(0)
    assert np.all(v >= -1e-12 * np.abs(v).max())


@pytest.mark.parametrize("j", [1, 2, 3, 4])
def test_rayleigh_quotient_bounded_on_mass_orthogonal_complement(system, j):
    eigs = solve_eigen(system, 4)
    M = system.mass.to_dense()
    rng = np.random.default_rng(100 + j)
    for _ in range(20):
        v = rng.standard_normal(system.n)
        for i in range(j - 1):
            q = eigs.vector(i)
            v = v - float(q @ M @ v) * q
        assert rayleigh_quotient(system, v) >= eigs.values[j - 1] * (1.0 - 1e-10)


def test_rayleigh_quotient_scaling_invariance(system):
    v = np.random.default_rng(5).standard_normal(system.n)
    base = rayleigh_quotient(system, v)
    for c in (-3.0, 1e-6, 1e8):
        assert rayleigh_quotient(system, c * v) == pytest.approx(base, rel=1e-13)


@pytest.mark.parametrize("j", [1, 2, 3])
def test_deflated_eigenvalue(system, j):
    eigs = solve_eigen(system, 3)
    assert deflated_eigenvalue(system, eigs, j) == pytest.approx(eigs.values[j - 1], rel=1e-9)


def test_cluster_multiplicities():
    assert cluster_multiplicities([1.0, 1.0 + 1e-9, 2.0, 3.0, 3.0 + 1e-8]) == [2, 2, 1, 2, 2]
    assert cluster_multiplicities([]) == []
    assert cluster_multiplicities([1.0, 1.1], rel_gap=0.2) == [2, 2]


def test_one_dimensional_spectrum_is_simple(system):
    assert solve_eigen(system, 5).multiplicities() == [1, 1, 1, 1, 1]
