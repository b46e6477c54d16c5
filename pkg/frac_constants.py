# frac_constants.py
# Special functions and normalization constants of the truncated fractional Laplacian
"""
Γ 함수와 상수들 (c_{N,s}, σ_{N-1}, κ(N,s), γ(N)) 계산 모듈.

- 모든 함수는 순수 함수이며 공유 상태가 없다.
- Γ는 정수/반정수 인자에서 계승 항등식, 그 외에는 Lanczos 유리근사 + 반사공식.
"""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List

import numpy as np
from scipy.special import roots_jacobi

from errors import DomainError


# ===== Lanczos rational approximation (cephes coefficients, highest degree first) =====

LANCZOS_G = 6.024680040776729583740234375

_LANCZOS_NUM = np.array([
    0.006061842346248906525783753964555936883222,
    0.5098416655656676188125178644804694509993,
    19.51992788247617482847860966235652136208,
    449.9445569063168119446858607650988409623,
    6955.999602515376140356310115515198987526,
    75999.29304014542649875303443598909137092,
    601859.6171681098786670226533699352302507,
    3481712.15498064590882071018964774556468,
    14605578.08768506808414169982791359218571,
    43338889.32467613834773723740590533316085,
    86363131.28813859145546927288977868422342,
    103794043.1163445451906271053616070238554,
    56906521.91347156388090791033559122686859,
])

_LANCZOS_DENOM = np.array([
    1.0, 66.0, 1925.0, 32670.0, 357423.0, 2637558.0, 13339535.0,
    45995730.0, 105258076.0, 150917976.0, 120543840.0, 39916800.0, 0.0,
])

_MAX_FACTORIAL_ARG = 171


def _lanczos_gamma(x: float) -> float:
    """Γ(x) for x ≥ 0.5 via the exp(g)-scaled Lanczos sum."""
    series = np.polyval(_LANCZOS_NUM, x) / np.polyval(_LANCZOS_DENOM, x)
    base = (x + LANCZOS_G - 0.5) / math.e
    return float(series * base ** (x - 0.5))


def gamma_fn(x: float) -> float:
    """Γ(x) for real x > 0, relative error ≤ 1e-12 on [0.05, 30]."""
    x = float(x)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"gamma_fn requires a finite positive argument, got {x}")

    if x.is_integer() and x <= _MAX_FACTORIAL_ARG:
        return float(math.factorial(int(x) - 1))
    twice = 2.0 * x
    if twice.is_integer() and x < _MAX_FACTORIAL_ARG:
        n = int(x - 0.5)
        # Γ(n + 1/2) = (2n)! √π / (4^n n!)
        return math.sqrt(math.pi) * (math.factorial(2 * n) / (4 ** n * math.factorial(n)))

    if x < 0.5:
        return math.pi / (math.sin(math.pi * x) * _lanczos_gamma(1.0 - x))
    return _lanczos_gamma(x)


def _pi_pow_half(N: int) -> float:
    # π^{N/2} without pow() rounding for the half power
    value = math.pi ** (N // 2)
    if N % 2:
        value *= math.sqrt(math.pi)
    return value


def _pi_pow_half_gamma(N: int, x: float) -> float:
    """π^{N/2} Γ(x); for odd N and half-integer x the two √π factors fold into π."""
    twice = 2.0 * x
    if N % 2 and twice.is_integer() and not x.is_integer() and 0.0 < x < _MAX_FACTORIAL_ARG:
        n = int(x - 0.5)
        return math.pi ** ((N + 1) // 2) * (math.factorial(2 * n) / (4 ** n * math.factorial(n)))
    return _pi_pow_half(N) * gamma_fn(x)


# ===== Data Structures =====

@dataclass(frozen=True)
class FracParams:
    """Dimension N and fractional order s of the operator."""
    N: int
    s: float

    def __post_init__(self):
        if isinstance(self.N, bool) or int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be a positive integer, got {self.N}")
        if not (0.0 < float(self.s) < 1.0):
            raise DomainError(f"s must lie in (0,1), got {self.s}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "s", float(self.s))
        if not self.dimension_exceeds_order:
            logging.warning(
                f"[Constants] N={self.N} <= 2s={2 * self.s}: eigenvalue theory assumes N > 2s, "
                "continuing with the discrete problem"
            )

    @property
    def dimension_exceeds_order(self) -> bool:
        """Advisory flag N > 2s."""
        return self.N > 2.0 * self.s


# ===== Constants =====

def surface_measure(N: int) -> float:
    """σ_{N-1} = 2π^{N/2}/Γ(N/2), the measure of the unit sphere in R^N."""
    if isinstance(N, bool) or int(N) != N or N < 1:
        raise DomainError(f"surface_measure requires N >= 1, got {N}")
    N = int(N)
    return 2.0 * _pi_pow_half(N) / gamma_fn(N / 2.0)


def c_norm(p: FracParams) -> float:
    """c_{N,s} = 2^{2s} s Γ(N/2+s) / (π^{N/2} Γ(1-s))."""
    num = 2.0 ** (2.0 * p.s) * p.s * gamma_fn(p.N / 2.0 + p.s)
    return num / _pi_pow_half_gamma(p.N, 1.0 - p.s)


def kappa(p: FracParams) -> float:
    """κ(N,s) = 4N(1-s) / (σ_{N-1} c_{N,s}); rescales eigenvalues in the small-horizon limit."""
    return 4.0 * p.N * (1.0 - p.s) / (surface_measure(p.N) * c_norm(p))


def gamma_limit_const(N: int) -> float:
    """γ(N) = σ_{N-1}/N = ∫_{S^{N-1}} |e·z|² dσ for a unit vector e."""
    return surface_measure(N) / N


def bbm_mollifier_mass(s: float, delta: float, N: int = 1) -> float:
    """Mass of ρ_δ(z) = (c_{N,s}/2) χ_{B(0,δ)} |z|^{-(N+2s-2)}: σ c δ^{2(1-s)} / (4(1-s))."""
    if delta <= 0:
        raise DomainError(f"delta must be positive, got {delta}")
    p = FracParams(N, s)
    return surface_measure(N) * c_norm(p) * delta ** (2.0 * (1.0 - s)) / (4.0 * (1.0 - s))


def bbm_profile(r, s: float, delta: float, N: int = 1) -> np.ndarray:
    """Radial profile ρ_δ(r) = (c_{N,s}/2) r^{-(N+2s-2)} on 0 < r < δ, zero elsewhere."""
    p = FracParams(N, s)
    r = np.asarray(r, dtype=float)
    out = np.zeros_like(r)
    inside = (r > 0.0) & (r < delta)
    out[inside] = 0.5 * c_norm(p) * r[inside] ** (-(N + 2.0 * s - 2.0))
    return out


def bbm_normalized_mass(s: float, delta: float, N: int = 1, n_points: int = 8) -> float:
    """
    ∫_0^δ σ r^{N-1} ρ_δ(r) dr / mass(ρ_δ), evaluated from the profile itself.
    Gauss-Jacobi carries the r^{1-2s} shape, so the nodal values are divided by it.
    """
    mass = bbm_mollifier_mass(s, delta, N)
    t, weights = roots_jacobi(n_points, 0.0, 1.0 - 2.0 * s)
    half = 0.5 * delta
    r = half * (1.0 + t)
    radial = surface_measure(N) * r ** (N - 1) * bbm_profile(r, s, delta, N) / mass
    values = radial / (1.0 + t) ** (1.0 - 2.0 * s)
    return half * float(np.sum(weights * values))


def constants_table(Ns: Iterable[int], ss: Iterable[float]) -> List[Dict[str, float]]:
    rows = []
    ss = list(ss)
    for N in Ns:
        for s in ss:
            p = FracParams(N, s)
            rows.append({
                "N": p.N,
                "s": p.s,
                "c_ns": c_norm(p),
                "kappa": kappa(p),
                "sigma": surface_measure(p.N),
                "gamma": gamma_limit_const(p.N),
            })
    logging.info(f"[Constants] table with {len(rows)} rows")
    return rows
