# assembly.py
# Stiffness / mass / load assembly on the piecewise-linear Galerkin space
"""
자유 DOF 위의 대칭 밴드 행렬 조립 모듈.

Truncated 모드
  모든 자유 hat 함수는 같은 모양의 평행이동이므로 Gram 행렬은 Toeplitz 이다.
  0으로 확장한 뒤 전체 직선 위에서 적분하면 collar 항(τ_δ)이 자동으로 포함되고,
    G_d = 2 h^{1-2s} ∫_0^m t^{-1-2s} g_d(t) dt,
    g_d(t) = 2N4(d) - N4(d+t) - N4(d-t)   (N4: hat 자기상관 = 중심 3차 B-spline)
  g_d 는 정수 구간마다 3차 다항식이므로 power_moment 로 정확히 적분한다.

Infinite 모드
  G_∞ = G_trunc(δ_eff = b-a) + 2(T_ψ - T_τ),  T_w = ∫ φ_i φ_j w dx.
  Ω 위에서 ψ - τ_{b-a} 는 상수 (b-a)^{-2s}/s 이므로 2(T_ψ - T_τ) = 2(b-a)^{-2s}/s · M.
  weighted_mass 는 T_w 를 직접 계산한다. 경계 요소는 닫힌 형태, 나머지는 graded Gauss-Legendre.

pair_integral_oracle 는 검증용 독립 경로 (요소쌍 2-D 적분).
"""

import logging
import math
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from numpy.polynomial import Polynomial
from scipy.linalg.blas import dsbmv
from scipy.special import roots_jacobi

from errors import AssemblyError, ConfigurationError, DivergentMoment, OracleFailure
from mesh_kernel import KernelSpec, Mesh1D, power_moment
from settings import worker_count


TRUNCATED = "truncated"
INFINITE = "infinite"
MODES = (TRUNCATED, INFINITE)

ASYMMETRY_TOL = 1e-13


# ===== Data Structures =====

@dataclass
class SymBandMatrix:
    """
    Symmetric banded matrix in LAPACK upper band storage:
    storage[w + i - j, j] = A[i, j] for max(0, j-w) <= i <= j.
    """
    n: int
    halfband: int
    storage: np.ndarray

    @classmethod
    def zeros(cls, n: int, halfband: int) -> "SymBandMatrix":
        w = max(0, min(halfband, n - 1))
        return cls(n, w, np.zeros((w + 1, n)))

    @classmethod
    def toeplitz(cls, column: np.ndarray, n: int) -> "SymBandMatrix":
        """column[d] = A[i, i+d] for d = 0..w."""
        w = max(0, min(len(column) - 1, n - 1))
        out = cls.zeros(n, w)
        for d in range(w + 1):
            out.storage[w - d, d:] = column[d]
        return out

    @classmethod
    def from_dense(cls, A: np.ndarray, halfband: int) -> "SymBandMatrix":
        n = A.shape[0]
        out = cls.zeros(n, halfband)
        w = out.halfband
        for d in range(w + 1):
            out.storage[w - d, d:] = np.diagonal(A, offset=d)
        return out

    def band(self, d: int) -> np.ndarray:
        """Entries A[i, i+d], length n-d."""
        if d > self.halfband:
            return np.zeros(max(self.n - d, 0))
        return self.storage[self.halfband - d, d:].copy()

    def diagonal(self) -> np.ndarray:
        return self.band(0)

    def to_dense(self) -> np.ndarray:
        A = np.zeros((self.n, self.n))
        for d in range(self.halfband + 1):
            vals = self.band(d)
            idx = np.arange(self.n - d)
            A[idx, idx + d] = vals
            A[idx + d, idx] = vals
        return A

    def matvec(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        return dsbmv(self.halfband, 1.0, self.storage, v)

    def quad_form(self, v: np.ndarray) -> float:
        v = np.asarray(v, dtype=float)
        return float(np.dot(v, self.matvec(v)))

    def scaled(self, alpha: float) -> "SymBandMatrix":
        return SymBandMatrix(self.n, self.halfband, alpha * self.storage)

    def plus(self, other: "SymBandMatrix", alpha: float = 1.0) -> "SymBandMatrix":
        """self + alpha * other."""
        if other.n != self.n:
            raise AssemblyError(f"dimension mismatch {self.n} vs {other.n}")
        w = max(self.halfband, other.halfband)
        out = SymBandMatrix.zeros(self.n, w)
        out.storage[w - self.halfband:, :] += self.storage
        out.storage[w - other.halfband:, :] += alpha * other.storage
        return out


@dataclass
class AssembledSystem:
    stiffness_raw: SymBandMatrix
    stiffness: SymBandMatrix
    mass: SymBandMatrix
    mesh: Mesh1D
    spec: KernelSpec
    mode: str

    @property
    def n(self) -> int:
        return self.stiffness.n


# ===== B-spline correlation pieces =====

# 6·N4 on [j, j+1], integer coefficients, lowest degree first
_SPLINE_PIECES: Dict[int, Polynomial] = {
    -2: Polynomial([8.0, 12.0, 6.0, 1.0]),
    -1: Polynomial([4.0, 0.0, -6.0, -3.0]),
    0: Polynomial([4.0, 0.0, -6.0, 3.0]),
    1: Polynomial([8.0, -12.0, 6.0, -1.0]),
}

_ZERO = Polynomial([0.0])


def _spline6(j: int) -> Polynomial:
    return _SPLINE_PIECES.get(j, _ZERO)


def _spline6_at(d: int) -> float:
    if d in (-1, 0, 1):
        return 4.0 if d == 0 else 1.0
    return 0.0


@lru_cache(maxsize=None)
def _correlation_piece(d: int, k: int) -> Tuple[float, ...]:
    """Coefficients (lowest first) of 6·g_d(t) on t ∈ [k, k+1]."""
    plus = _spline6(d + k)(Polynomial([float(d), 1.0]))
    minus = _spline6(d - k - 1)(Polynomial([float(d), -1.0]))
    poly = Polynomial([2.0 * _spline6_at(d)]) - plus - minus
    coef = np.zeros(4)
    coef[:len(poly.coef)] = poly.coef
    return tuple(float(c) for c in coef)


# pieces on t < 3 carry small integer coefficients and go through power moments;
# farther pieces are smooth and use Gauss-Legendre on the directly evaluated spline
_MOMENT_PIECES = 3
_PIECE_T, _PIECE_W = np.polynomial.legendre.leggauss(12)


def _spline6_eval(x: np.ndarray) -> np.ndarray:
    ax = np.abs(x)
    out = np.zeros_like(ax)
    inner = ax < 1.0
    outer = (ax >= 1.0) & (ax < 2.0)
    out[inner] = 4.0 - 6.0 * ax[inner] ** 2 + 3.0 * ax[inner] ** 3
    out[outer] = (2.0 - ax[outer]) ** 3
    return out


@lru_cache(maxsize=None)
def _correlation_core(d: int, reach: int, s: float) -> float:
    """∫_0^reach t^{-1-2s} 6·g_d(t) dt, piece by piece."""
    total = 0.0
    base = 2.0 * _spline6_at(d)
    for k in range(reach):
        if k >= _MOMENT_PIECES:
            t = k + 0.5 * (1.0 + _PIECE_T)
            g = base - _spline6_eval(d + t) - _spline6_eval(d - t)
            total += 0.5 * float(np.dot(_PIECE_W, t ** (-1.0 - 2.0 * s) * g))
            continue
        coef = _correlation_piece(d, k)
        for p, cp in enumerate(coef):
            if cp == 0.0:
                continue
            try:
                total += cp * power_moment(p, float(k), float(k + 1), s)
            except DivergentMoment as e:
                raise AssemblyError(f"correlation polynomial not O(t^2) at d={d}: {e}") from e
    return total


def _correlation_integral(d: int, m: int, s: float) -> float:
    """∫_0^m t^{-1-2s} 6·g_d(t) dt; beyond |d|+2 the integrand is the constant 2·6N4(d)."""
    reach = min(m, abs(d) + 2)
    total = _correlation_core(d, reach, s)
    const = 2.0 * _spline6_at(d)
    if m > reach and const != 0.0:
        total += const * power_moment(0, float(reach), float(m), s)
    return total


def _toeplitz_column(n: int, m: int, s: float, h: float, workers: Optional[int] = None) -> np.ndarray:
    """G_d for d = 0..min(m+1, n-1), with the G_{-d} evaluation as symmetry check."""
    w = max(0, min(m + 1, n - 1))
    offsets = list(range(w + 1))
    workers = workers or worker_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        upper = list(pool.map(lambda d: _correlation_integral(d, m, s), offsets))
        lower = list(pool.map(lambda d: _correlation_integral(-d, m, s), offsets))
    upper = np.asarray(upper)
    lower = np.asarray(lower)

    scale = max(np.max(np.abs(upper)), np.finfo(float).tiny)
    asym = float(np.max(np.abs(upper - lower))) / scale
    if asym > ASYMMETRY_TOL:
        raise AssemblyError(f"Gram asymmetry {asym:.3e} exceeds {ASYMMETRY_TOL}")
    return h ** (1.0 - 2.0 * s) / 3.0 * 0.5 * (upper + lower)


# ===== Endpoint-weighted mass products =====

_GRADED_BREAKS = np.array([0.0, 0.25, 0.5, 1.0])


def _left_local(e: int, s: float, n: int) -> np.ndarray:
    """∫_0^1 N_α N_β (e+ξ)^{-2s} dξ with N_0 = 1-ξ, N_1 = ξ."""
    if e == 0:
        # N_0 sits on the constrained node; N_0² ξ^{-2s} is not integrable for s >= 1/2
        p = 2.0 - 2.0 * s
        cross = 1.0 / p - 1.0 / (p + 1.0)
        return np.array([[0.0, cross], [cross, 1.0 / (p + 1.0)]])
    t, w0 = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    for lo, hi in zip(_GRADED_BREAKS[:-1], _GRADED_BREAKS[1:]):
        xs.append(0.5 * (hi - lo) * t + 0.5 * (hi + lo))
        ws.append(0.5 * (hi - lo) * w0)
    xi = np.concatenate(xs)
    wts = np.concatenate(ws)
    f = (e + xi) ** (-2.0 * s)
    basis = np.vstack([1.0 - xi, xi])
    return (basis * (wts * f)) @ basis.T


def _right_local(e: int, n_int: int, s: float, n: int) -> np.ndarray:
    # mirror of the left weight: ξ -> 1-ξ swaps the two local basis functions
    return _left_local(n_int - 1 - e, s, n)[::-1, ::-1]


def _endpoint_locals(n_int: int, s: float, left: float, right: float, n: int) -> List[np.ndarray]:
    return [
        left * _left_local(e, s, n) + right * _right_local(e, n_int, s, n)
        for e in range(n_int)
    ]


def weighted_mass(mesh: Mesh1D, s: float, left: float, right: float, const: float,
                  rtol: float = 1e-10, max_doublings: int = 6) -> SymBandMatrix:
    """
    T_ij = ∫_Ω φ_i φ_j [left (x-a)^{-2s} + right (b-x)^{-2s} + const] dx over free DOFs.
    Element rules are doubled until every local entry is stable to rtol.
    """
    h = mesh.h
    n_pts = 8
    locals_ = _endpoint_locals(mesh.n_int, s, left, right, n_pts)
    for _ in range(max_doublings):
        n_pts *= 2
        refined = _endpoint_locals(mesh.n_int, s, left, right, n_pts)
        diff = max(float(np.max(np.abs(r - l))) for r, l in zip(refined, locals_))
        size = max(float(np.max(np.abs(r))) for r in refined)
        locals_ = refined
        if diff <= rtol * size:
            break
    else:
        raise AssemblyError(f"endpoint-weighted quadrature did not reach rtol={rtol}")

    n = mesh.n_free
    diag = np.zeros(n)
    off = np.zeros(max(n - 1, 0))
    sing = h ** (1.0 - 2.0 * s)
    exact = const * h * np.array([[1.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 1.0 / 3.0]])
    for e, loc in enumerate(locals_):
        loc = sing * loc + exact
        lo_dof, hi_dof = e - 1, e
        if 0 <= lo_dof < n:
            diag[lo_dof] += loc[0, 0]
        if 0 <= hi_dof < n:
            diag[hi_dof] += loc[1, 1]
        if 0 <= lo_dof and hi_dof < n:
            if abs(loc[0, 1] - loc[1, 0]) > ASYMMETRY_TOL * max(abs(loc[0, 1]), 1.0):
                raise AssemblyError(f"asymmetric endpoint product on element {e}")
            off[lo_dof] += 0.5 * (loc[0, 1] + loc[1, 0])

    out = SymBandMatrix.zeros(n, 1)
    out.storage[-1, :] = diag
    if out.halfband == 1:
        out.storage[0, 1:] = off
    return out


# ===== Public assembly =====

def assemble_mass(mesh: Mesh1D) -> SymBandMatrix:
    h = mesh.h
    return SymBandMatrix.toeplitz(np.array([2.0 * h / 3.0, h / 6.0]), mesh.n_free)


def assemble_stiffness(mesh: Mesh1D, spec: KernelSpec, mode: str = TRUNCATED,
                       workers: Optional[int] = None) -> AssembledSystem:
    if mode not in MODES:
        raise ConfigurationError(f"unknown assembly mode '{mode}'")
    if not math.isclose(spec.delta, mesh.delta, rel_tol=1e-12):
        raise ConfigurationError(f"kernel horizon {spec.delta} does not match mesh m*h = {mesh.delta}")

    s = spec.s
    n = mesh.n_free
    h = mesh.h
    logging.info(f"[Assembly] {mode} n_free={n} m={mesh.m} s={s}")

    if mode == TRUNCATED:
        column = _toeplitz_column(n, mesh.m, s, h, workers)
        G = SymBandMatrix.toeplitz(column, n)
    else:
        column = _toeplitz_column(n, mesh.n_int, s, h, workers)
        G = SymBandMatrix.toeplitz(column, n)
        # ψ - τ_{b-a} ≡ (b-a)^{-2s}/s on Ω, so 2(T_ψ - T_τ) is a multiple of M
        span = mesh.b - mesh.a
        G = G.plus(assemble_mass(mesh), 2.0 * span ** (-2.0 * s) / s)

    A = G.scaled(0.5 * spec.c)
    return AssembledSystem(
        stiffness_raw=G,
        stiffness=A,
        mass=assemble_mass(mesh),
        mesh=mesh,
        spec=spec,
        mode=mode,
    )


_SIN_PRESET = re.compile(r"^sin_(\d+)$")


def parse_load_preset(f: str) -> Tuple[str, int]:
    f = str(f).strip()
    if f in ("one", "zero"):
        return f, 0
    match = _SIN_PRESET.match(f)
    if match and int(match.group(1)) >= 1:
        return "sin", int(match.group(1))
    raise ConfigurationError(f"unknown load preset '{f}' (expected 'one', 'zero' or 'sin_<k>')")


def assemble_load(mesh: Mesh1D, f: str, scale: float = 1.0) -> np.ndarray:
    """F_i = scale · ∫_Ω f φ_i dx, closed form for the presets."""
    kind, k = parse_load_preset(f)
    h = mesh.h
    if kind == "zero":
        return np.zeros(mesh.n_free)
    if kind == "one":
        return np.full(mesh.n_free, scale * h)
    omega = k * math.pi / (mesh.b - mesh.a)
    x = mesh.free_nodes
    # ∫ sin(ω(x-a)) φ_i = sin(ω(x_i-a)) · 4 sin²(ωh/2) / (ω² h)
    factor = 4.0 * math.sin(0.5 * omega * h) ** 2 / (omega ** 2 * h)
    return scale * factor * np.sin(omega * (x - mesh.a))


def interpolate(mesh: Mesh1D, f: Callable) -> np.ndarray:
    """Nodal interpolant on the free DOFs."""
    x = mesh.free_nodes
    return np.asarray(f(x), dtype=float) * np.ones_like(x)


# ===== Validation oracle =====

_ETA_T, _ETA_W = np.polynomial.legendre.leggauss(3)
_OUTER_T, _OUTER_W = np.polynomial.legendre.leggauss(8)


def _hat_on_element(g: int, e: int) -> Tuple[float, float]:
    """φ_g = A + Bξ on element e = [node e, node e+1]."""
    A = 1.0 if g == e else 0.0
    B = (1.0 if g == e + 1 else 0.0) - A
    return A, B


def _pair_profile(gi: int, gj: int, e: int, f: int) -> Callable:
    """Q(w) = ∫ P(η+w+q, η) dη over admissible η, vectorized in w."""
    q = f - e
    Ai_e, Bi_e = _hat_on_element(gi, e)
    Ai_f, Bi_f = _hat_on_element(gi, f)
    Aj_e, Bj_e = _hat_on_element(gj, e)
    Aj_f, Bj_f = _hat_on_element(gj, f)

    def Q(w: np.ndarray) -> np.ndarray:
        lo = np.maximum(0.0, -w - q)
        hi = np.minimum(1.0, 1.0 - w - q)
        length = np.clip(hi - lo, 0.0, None)
        eta = lo[:, None] + 0.5 * length[:, None] * (1.0 + _ETA_T[None, :])
        xi = eta + w[:, None] + q
        di = (Ai_e + Bi_e * xi) - (Ai_f + Bi_f * eta)
        dj = (Aj_e + Bj_e * xi) - (Aj_f + Bj_f * eta)
        return 0.5 * length * np.sum(_ETA_W[None, :] * di * dj, axis=1)

    return Q


def _outer_integral(Q: Callable, lo: float, hi: float, s: float, panels: int, jacobi: Tuple) -> float:
    """∫_lo^hi |w|^{-1-2s} Q(w) dw; a panel touching w=0 uses the |w|^{1-2s} Gauss-Jacobi weight."""
    t_j, w_j = jacobi
    edges = np.linspace(lo, hi, panels + 1)
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        half = 0.5 * (b - a)
        if a == 0.0 or b == 0.0:
            # singular end at 0: substitute |w| = half (1 + t)
            r = half * (1.0 + t_j)
            w = r if a == 0.0 else -r
            total += half ** (2.0 - 2.0 * s) * float(np.dot(w_j, Q(w) / w ** 2))
        else:
            w = half * _OUTER_T + 0.5 * (a + b)
            total += half * float(np.dot(_OUTER_W, np.abs(w) ** (-1.0 - 2.0 * s) * Q(w)))
    return total


def _pair_segments(q: int, m: int) -> List[Tuple[float, float]]:
    lo = max(-q - 1.0, -float(m))
    hi = min(-q + 1.0, float(m))
    if hi <= lo:
        return []
    cuts = sorted({lo, hi} | {c for c in (-float(q), 0.0) if lo < c < hi})
    return list(zip(cuts[:-1], cuts[1:]))


def pair_integral_oracle(i: int, j: int, mesh: Mesh1D, spec: KernelSpec,
                         rtol: float = 1e-9, max_doublings: int = 20) -> float:
    """
    G_ij by element-pair quadrature in (w, η), w = (x-y)/h.
    i, j index free DOFs. Successive panel doublings must agree to rtol.
    """
    m = mesh.m
    if abs(i - j) > m + 1:
        raise ConfigurationError(f"|i-j|={abs(i - j)} exceeds halfband m+1={m + 1}")
    s = spec.s
    gi = int(mesh.free_ids[i])
    gj = int(mesh.free_ids[j])
    n_el = mesh.n_int + 2 * m
    touch_i = {gi - 1, gi}
    touch_j = {gj - 1, gj}

    work = []
    for e in range(n_el):
        for f in range(max(0, e - m), min(n_el, e + m + 1)):
            pair = {e, f}
            if not (pair & touch_i and pair & touch_j):
                continue
            segments = _pair_segments(f - e, m)
            if segments:
                work.append((_pair_profile(gi, gj, e, f), segments))

    t_j, w_j = roots_jacobi(8, 0.0, 1.0 - 2.0 * s)

    def estimate(panels: int) -> float:
        total = 0.0
        for Q, segments in work:
            for lo, hi in segments:
                total += _outer_integral(Q, lo, hi, s, panels, (t_j, w_j))
        return mesh.h ** (1.0 - 2.0 * s) * total

    panels = 1
    previous = estimate(panels)
    for _ in range(max_doublings):
        panels *= 2
        current = estimate(panels)
        if abs(current - previous) <= rtol * abs(current):
            return current
        previous = current
    raise OracleFailure(f"pair oracle ({i},{j}) not converged after {max_doublings} doublings")
