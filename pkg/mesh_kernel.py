# mesh_kernel.py
# Horizon-aligned meshes, truncated kernel, collar/tail integrals, pointwise operator
"""
Ω=(a,b) 위의 균일 격자와 커널 관련 해석식 모음.

- 격자는 δ = m·h 정렬을 강제한다 (collar 폭이 정확히 m개 요소).
- Mesh1D는 (a, b, n_int, m)만 보관하고 노드 배열은 필요할 때 만든다.
  그래서 m이 n_int보다 훨씬 큰 (δ ≫ b-a) 격자도 비용 없이 다룬다.
- collar_tail / infinite_tail 은 항상 닫힌 형식으로 계산한다.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi

from errors import ConfigurationError, DivergentMoment, DomainError
from frac_constants import FracParams, c_norm


# ===== Data Structures =====

@dataclass(frozen=True)
class Mesh1D:
    """
    Uniform grid over Ω_δ = [a-δ, b+δ] with nodes x_i = a + (i-m)h, i = 0..n_int+2m.
    Nodes strictly inside (a,b) are free; the rest (collar and x=a, x=b) are constrained.
    """
    a: float
    b: float
    n_int: int
    m: int

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n_int

    @property
    def delta(self) -> float:
        return self.m * self.h

    @property
    def node_count(self) -> int:
        return self.n_int + 2 * self.m + 1

    @property
    def n_free(self) -> int:
        return self.n_int - 1

    @property
    def nodes(self) -> np.ndarray:
        i = np.arange(self.node_count)
        return self.a + (i - self.m) * self.h

    @property
    def free_ids(self) -> np.ndarray:
        return np.arange(self.m + 1, self.m + self.n_int)

    @property
    def constrained_ids(self) -> np.ndarray:
        left = np.arange(0, self.m + 1)
        right = np.arange(self.m + self.n_int, self.node_count)
        return np.concatenate([left, right])

    @property
    def free_nodes(self) -> np.ndarray:
        """Coordinates of the free DOFs, x_j = a + (j+1)h."""
        return self.a + np.arange(1, self.n_int) * self.h

    def node(self, i: int) -> float:
        return self.a + (i - self.m) * self.h


@dataclass(frozen=True)
class KernelSpec:
    """Truncated kernel K(z) = |z|^{-(1+2s)} on 0 < |z| < δ."""
    params: FracParams
    delta: float

    def __post_init__(self):
        if self.params.N != 1:
            raise ConfigurationError(f"only N=1 kernels are supported, got N={self.params.N}")
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ConfigurationError(f"horizon must be positive and finite, got {self.delta}")

    @property
    def s(self) -> float:
        return self.params.s

    @property
    def c(self) -> float:
        return c_norm(self.params)

    @classmethod
    def for_mesh(cls, mesh: Mesh1D, s: float) -> "KernelSpec":
        return cls(FracParams(1, s), mesh.delta)


# ===== Mesh =====

def _as_count(value, name: str, minimum: int) -> int:
    if isinstance(value, bool) or int(value) != value or value < minimum:
        raise ConfigurationError(f"{name} must be an integer >= {minimum}, got {value}")
    return int(value)


def build_mesh(a: float, b: float, n_int: int, m: int) -> Mesh1D:
    a = float(a)
    b = float(b)
    if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
        raise ConfigurationError(f"interval requires a < b, got ({a}, {b})")
    n_int = _as_count(n_int, "n_int", 2)
    m = _as_count(m, "m", 1)
    mesh = Mesh1D(a, b, n_int, m)
    logging.debug(f"[Mesh] ({a}, {b}) n_int={n_int} m={m} h={mesh.h} delta={mesh.delta}")
    return mesh


# ===== Kernel and tails =====

def kernel(z, spec: KernelSpec) -> np.ndarray:
    z = np.abs(np.asarray(z, dtype=float))
    out = np.zeros_like(z)
    inside = (z > 0) & (z < spec.delta)
    out[inside] = z[inside] ** (-(1.0 + 2.0 * spec.s))
    return out


def _check_interior(x: float, a: float, b: float) -> None:
    if not (a < x < b):
        raise DomainError(f"x={x} must lie strictly inside ({a}, {b})")


def collar_tail(x: float, spec: KernelSpec, a: float, b: float) -> float:
    """τ_δ(x) = ∫_{∂_δΩ ∩ B(x,δ)} |x-y|^{-1-2s} dy."""
    _check_interior(x, a, b)
    s2 = 2.0 * spec.s
    cut = spec.delta ** (-s2)
    value = 0.0
    left = x - a
    if left < spec.delta:
        value += (left ** (-s2) - cut) / s2
    right = b - x
    if right < spec.delta:
        value += (right ** (-s2) - cut) / s2
    return value


def infinite_tail(x: float, params: FracParams, a: float, b: float) -> float:
    """ψ(x) = ∫_{R \\ Ω} |x-y|^{-1-2s} dy."""
    _check_interior(x, a, b)
    s2 = 2.0 * params.s
    return ((x - a) ** (-s2) + (b - x) ** (-s2)) / s2


def power_moment(p: int, alpha: float, beta: float, s: float) -> float:
    """μ_p(α,β) = ∫_α^β r^{p-1-2s} dr, with the log branch when p = 2s."""
    if alpha < 0 or not beta > alpha:
        raise DomainError(f"power_moment needs 0 <= alpha < beta, got ({alpha}, {beta})")
    e = p - 2.0 * s
    if alpha == 0.0:
        if e <= 0.0:
            raise DivergentMoment(f"moment p={p} diverges at 0 for s={s}")
        return beta ** e / e
    log_ratio = math.log(beta / alpha)
    if e == 0.0:
        return log_ratio
    # α^e (exp(e·log(β/α)) - 1)/e stays accurate as e → 0
    return alpha ** e * math.expm1(e * log_ratio) / e


# ===== Pointwise operator =====

_POINTWISE_NODES = 24


def apply_pointwise(u: Callable, x: float, spec: KernelSpec) -> float:
    """
    (-Δ)_δ^s u(x) = -c_{1,s} ∫_0^δ (u(x+y) - 2u(x) + u(x-y)) y^{-1-2s} dy.

    First panel [0, δ/8] uses Gauss-Jacobi with weight y^{1-2s} acting on the second
    difference divided by y²; the remaining dyadic panels are smooth and use Gauss-Legendre.
    """
    s = spec.s
    delta = spec.delta
    ux = float(np.asarray(u(np.asarray([x], dtype=float)), dtype=float).ravel()[0])

    def second_difference(y: np.ndarray) -> np.ndarray:
        plus = np.asarray(u(x + y), dtype=float) * np.ones_like(y)
        minus = np.asarray(u(x - y), dtype=float) * np.ones_like(y)
        d = plus - 2.0 * ux + minus
        if not np.all(np.isfinite(d)):
            raise DomainError(f"non-finite samples of u near x={x}")
        return d

    if not math.isfinite(ux):
        raise DomainError(f"non-finite value u({x})")

    first = delta / 8.0
    t, w = roots_jacobi(_POINTWISE_NODES, 0.0, 1.0 - 2.0 * s)
    y = 0.5 * first * (1.0 + t)
    total = (0.5 * first) ** (2.0 - 2.0 * s) * float(np.dot(w, second_difference(y) / y ** 2))

    t, w = np.polynomial.legendre.leggauss(_POINTWISE_NODES)
    lo = first
    while lo < delta * (1.0 - 1e-15):
        hi = 2.0 * lo
        y = 0.5 * (hi - lo) * t + 0.5 * (hi + lo)
        total += 0.5 * (hi - lo) * float(np.dot(w, second_difference(y) * y ** (-1.0 - 2.0 * s)))
        lo = hi

    return -spec.c * total
