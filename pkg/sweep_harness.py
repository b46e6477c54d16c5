# sweep_harness.py
# Limit studies δ→0⁺ (rescaled) and δ→+∞ (fractional reference)
"""
두 극한 실험과 보조 검증을 수행하고 SweepReport 로 정리한다.

- sweep_zero : m = δ/h 고정, δ 감소. 기준값 (kπ/(b-a))², (x-a)(b-x)/2
- sweep_infty: h 고정, m 증가. 기준값은 같은 격자의 infinite 모드 시스템
- check_c_delta / gamma_limit_energy / bbm_upper_bound : 노름 동치, Γ-극한, BBM 상한

δ 지점들은 병렬로 계산할 수 있지만 결과 행은 항상 δ 순서로 병합한다.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Any, Callable, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from assembly import (
    INFINITE,
    TRUNCATED,
    AssembledSystem,
    assemble_load,
    assemble_stiffness,
    interpolate,
)
from errors import ConfigurationError, DomainError, InvariantViolation
from frac_constants import FracParams, bbm_mollifier_mass, gamma_limit_const, kappa
from mesh_kernel import KernelSpec, Mesh1D, build_mesh
from settings import worker_count
from solvers import (
    EigenSet,
    minimal_energy,
    rayleigh_quotient,
    solve_dirichlet,
    solve_eigen,
)


COLUMNS = ["delta", "h", "m", "s", "k", "lambda", "rescaled", "reference", "abs_err", "rel_err"]
CHECK_COLUMNS = ["delta", "ratio", "C_delta", "pass"]

BBM_ALLOWANCE = 0.01
SHIFT_RTOL = 1e-8
SHIFT_FLOOR = 1e-13
EIGVEC_FINAL_TOL = 0.05
RATIO_FLOOR = 1e-10


# ===== Data Structures =====

@dataclass
class SweepReport:
    """Per-δ rows plus run metadata, diagnostics and named invariant checks."""
    rows: List[Dict[str, Any]]
    metadata: Dict[str, Any]
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    checks: Dict[str, bool] = field(default_factory=dict)

    def __post_init__(self):
        self.rows = sorted(self.rows, key=lambda r: (r["delta"], r["k"]))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(self.rows, columns=COLUMNS)

    def rows_for(self, k: int) -> List[Dict[str, Any]]:
        return [r for r in self.rows if r["k"] == k]

    def violations(self) -> List[str]:
        return [name for name, ok in self.checks.items() if not ok]

    def raise_on_violation(self) -> None:
        failed = self.violations()
        if failed:
            raise InvariantViolation(failed[0], f"failed checks: {', '.join(failed)}")


# ===== Helpers =====

def rescale_eigen(lam: float, delta: float, p: FracParams) -> float:
    """κ(N,s) λ / δ^{2(1-s)}."""
    if lam <= 0 or delta <= 0:
        raise DomainError(f"rescale_eigen needs positive inputs, got lambda={lam}, delta={delta}")
    return kappa(p) * lam / delta ** (2.0 * (1.0 - p.s))


def _row(delta: float, mesh: Mesh1D, s: float, k: int, lam: float, rescaled: float,
         reference: float, abs_err: float) -> Dict[str, Any]:
    return {
        "delta": delta,
        "h": mesh.h,
        "m": mesh.m,
        "s": s,
        "k": k,
        "lambda": lam,
        "rescaled": rescaled,
        "reference": reference,
        "abs_err": abs_err,
        "rel_err": abs_err / reference if reference != 0 else abs_err,
    }


def _m_norm(sys: AssembledSystem, v: np.ndarray) -> float:
    return math.sqrt(max(sys.mass.quad_form(v), 0.0))


def _eigvec_distance(sys: AssembledSystem, v: np.ndarray, w: np.ndarray) -> float:
    """M-distance between M-normalized vectors, sign-aligned."""
    v = v / _m_norm(sys, v)
    w = w / _m_norm(sys, w)
    if float(np.dot(v, sys.mass.matvec(w))) < 0:
        w = -w
    return _m_norm(sys, v - w)


def _n_int_for(a: float, b: float, m: int, delta: float) -> int:
    raw = (b - a) * m / delta
    n_int = int(round(raw))
    if abs(raw - n_int) > 1e-9 * max(1.0, raw) or n_int < 2:
        raise ConfigurationError(f"delta={delta} with m={m} gives non-integer n_int={raw}")
    return n_int


def _map_points(fn: Callable, items: Sequence, workers: Optional[int]) -> List[Any]:
    workers = min(workers or worker_count(), max(len(items), 1))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _non_increasing(seq: Sequence[float], slack: float = 1e-12) -> bool:
    return all(b <= a * (1.0 + 1e-9) + slack for a, b in zip(seq[:-1], seq[1:]))


def _sine(a: float, b: float, j: int = 1) -> Callable:
    return lambda x: np.sin(j * math.pi * (x - a) / (b - a))


def _metadata(mode: str, a: float, b: float, **extra) -> Dict[str, Any]:
    meta = {
        "mode": mode,
        "domain": {"a": a, "b": b},
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    meta.update(extra)
    return meta


def _check_descending(deltas: Sequence[float]) -> List[float]:
    deltas = [float(d) for d in deltas]
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigurationError("deltas must be a non-empty list of positive values")
    if any(b >= a for a, b in zip(deltas[:-1], deltas[1:])):
        raise ConfigurationError(f"deltas must be strictly descending, got {deltas}")
    return deltas


def _check_ascending(ms: Sequence[int]) -> List[int]:
    if not ms or any(isinstance(m, bool) or int(m) != m or m < 1 for m in ms):
        raise ConfigurationError("ms must be a non-empty list of positive integers")
    ms = [int(m) for m in ms]
    if any(b <= a for a, b in zip(ms[:-1], ms[1:])):
        raise ConfigurationError(f"ms must be strictly ascending, got {ms}")
    return ms


def _gamma_energy(sys: AssembledSystem, u: np.ndarray) -> float:
    s = sys.spec.s
    return 2.0 * (1.0 - s) / sys.mesh.delta ** (2.0 * (1.0 - s)) * sys.stiffness_raw.quad_form(u)


# ===== δ → 0⁺ =====

def _zero_point(a: float, b: float, s: float, m: int, k: int, delta: float) -> Dict[str, Any]:
    mesh = build_mesh(a, b, _n_int_for(a, b, m, delta), m)
    spec = KernelSpec.for_mesh(mesh, s)
    sys = assemble_stiffness(mesh, spec, TRUNCATED, workers=1)
    p = spec.params
    span = b - a
    kk = min(k, mesh.n_free)
    eigs = solve_eigen(sys, kk)

    rows = []
    distances = []
    for j in range(kk):
        lam = float(eigs.values[j])
        resc = rescale_eigen(lam, delta, p)
        ref = (float(j + 1) * math.pi / span) ** 2
        rows.append(_row(delta, mesh, s, j + 1, lam, resc, ref, abs(resc - ref)))
        distances.append(_eigvec_distance(sys, eigs.vector(j), interpolate(mesh, _sine(a, b, j + 1))))

    # rescaled problem with f = 1 against the local solution (x-a)(b-x)/2
    load = assemble_load(mesh, "one", scale=delta ** (2.0 * (1.0 - s)) / kappa(p))
    u = solve_dirichlet(sys, load)
    u_local = interpolate(mesh, lambda x: 0.5 * (x - a) * (b - x))
    ref_norm = math.sqrt(span ** 5 / 120.0)
    u_norm = _m_norm(sys, u)
    rows.append(_row(delta, mesh, s, 0, u_norm, u_norm, ref_norm, _m_norm(sys, u - u_local)))

    w = interpolate(mesh, _sine(a, b))
    first = eigs.vector(0)
    if not (np.all(first >= 0) or np.all(first <= 0)):
        logging.warning(f"[Harness] first eigenvector changes sign at delta={delta}")

    return {
        "delta": delta,
        "n_int": mesh.n_int,
        "rows": rows,
        "eigvec_distance": distances,
        "multiplicities": eigs.multiplicities(),
        "gamma_energy": _gamma_energy(sys, w),
        "rescaled_rq": rescale_eigen(rayleigh_quotient(sys, w), delta, p),
        "rescaled_lambda1": rows[0]["rescaled"],
    }


def sweep_zero(s: float, m: int, deltas: Sequence[float], k: int, a: float = 0.0, b: float = 1.0,
               workers: Optional[int] = None) -> SweepReport:
    deltas = _check_descending(deltas)
    FracParams(1, s)
    logging.info(f"[Harness] sweep_zero s={s} m={m} deltas={deltas} k={k}")
    points = _map_points(lambda d: _zero_point(a, b, s, m, k, d), deltas, workers)

    rows = [r for pt in points for r in pt["rows"]]
    reference_1 = (math.pi / (b - a)) ** 2
    kk = min(k, 3)
    err_by_k = {j: [r["abs_err"] for pt in points for r in pt["rows"] if r["k"] == j] for j in range(1, kk + 1)}
    dist_first = [pt["eigvec_distance"][0] for pt in points]
    energies = [pt["gamma_energy"] for pt in points]
    gamma_reference = gamma_limit_const(1) * 0.5 * reference_1 * (b - a)

    checks = {
        "zero_error_monotone": all(_non_increasing(v) for v in err_by_k.values()),
        "bbm_upper_bound": all(pt["rescaled_lambda1"] <= reference_1 * (1.0 + BBM_ALLOWANCE) for pt in points),
        "bbm_min_max": all(pt["rescaled_lambda1"] <= pt["rescaled_rq"] * (1.0 + 1e-10) for pt in points),
        "eigvec_first_converges": _non_increasing(dist_first) and dist_first[-1] <= EIGVEC_FINAL_TOL,
    }
    diagnostics = {
        "points": [
            {
                "delta": pt["delta"],
                "n_int": pt["n_int"],
                "eigvec_distance": pt["eigvec_distance"],
                "multiplicities": pt["multiplicities"],
                "gamma_energy": pt["gamma_energy"],
                "rescaled_rq": pt["rescaled_rq"],
            }
            for pt in points
        ],
        "gamma_energy_reference": gamma_reference,
        "gamma_energy_errors": [abs(e - gamma_reference) for e in energies],
        "bbm_mollifier_mass": [bbm_mollifier_mass(s, d) for d in deltas],
    }
    for j in range(2, k + 1):
        seq = [pt["eigvec_distance"][j - 1] for pt in points if len(pt["eigvec_distance"]) >= j]
        if not _non_increasing(seq):
            logging.info(f"[Harness] eigenvector distance for k={j} not monotone (reported only)")

    meta = _metadata("zero", a, b, s=s, m=m, k=k, n_int=[pt["n_int"] for pt in points])
    report = SweepReport(rows, meta, diagnostics, checks)
    logging.info(f"[Harness] sweep_zero done, failed checks: {report.violations()}")
    return report


def gamma_limit_energy(s: float, m: int, deltas: Sequence[float], a: float = 0.0, b: float = 1.0,
                       u: Optional[Callable] = None) -> List[Dict[str, float]]:
    """I_{δ,s}(Πu) = 2(1-s)/δ^{2(1-s)} uᵀG_δu; the limit for u = sin is γ(1)∫|u'|² = π²/(b-a)."""
    deltas = _check_descending(deltas)
    u = u or _sine(a, b)
    reference = gamma_limit_const(1) * 0.5 * (math.pi / (b - a)) ** 2 * (b - a)
    rows = []
    for delta in deltas:
        mesh = build_mesh(a, b, _n_int_for(a, b, m, delta), m)
        sys = assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, s), TRUNCATED)
        value = _gamma_energy(sys, interpolate(mesh, u))
        rows.append({
            "delta": delta,
            "I_value": value,
            "reference": reference,
            "rel_err": abs(value - reference) / reference,
        })
    return rows


def bbm_upper_bound(s: float, m: int, deltas: Sequence[float], a: float = 0.0,
                    b: float = 1.0) -> List[Dict[str, Any]]:
    """Rescaled λ_1 ≤ rescaled RQ(Π sin) by min-max; both are checked against π²·(1+1%)."""
    deltas = _check_descending(deltas)
    bound = (math.pi / (b - a)) ** 2 * (1.0 + BBM_ALLOWANCE)
    rows = []
    for delta in deltas:
        pt = _zero_point(a, b, s, m, 1, delta)
        rows.append({
            "delta": delta,
            "rescaled_lambda1": pt["rescaled_lambda1"],
            "rescaled_rq": pt["rescaled_rq"],
            "bound": bound,
            "pass": pt["rescaled_lambda1"] <= min(bound, pt["rescaled_rq"] * (1.0 + 1e-10)),
        })
    return rows


# ===== δ → +∞ =====

def _loglog_slope(deltas: Sequence[float], values: Sequence[float]) -> Optional[float]:
    pairs = [(d, v) for d, v in zip(deltas, values) if v > 0]
    if len(pairs) < 2:
        return None
    x = np.log([d for d, _ in pairs])
    y = np.log([v for _, v in pairs])
    return float(np.polyfit(x, y, 1)[0])


def _infinite_reference(a: float, b: float, s: float, n_int: int, m: int, k: int) -> Dict[str, Any]:
    mesh = build_mesh(a, b, n_int, m)
    sys = assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, s), INFINITE)
    load = assemble_load(mesh, "one")
    u = solve_dirichlet(sys, load)
    return {
        "sys": sys,
        "eigs": solve_eigen(sys, k),
        "u": u,
        "energy": minimal_energy(load, u),
    }


def _infty_point(a: float, b: float, s: float, n_int: int, k: int, m: int,
                 ref: Dict[str, Any]) -> Dict[str, Any]:
    mesh = build_mesh(a, b, n_int, m)
    spec = KernelSpec.for_mesh(mesh, s)
    sys = assemble_stiffness(mesh, spec, TRUNCATED, workers=1)
    eigs = solve_eigen(sys, k)
    load = assemble_load(mesh, "one")
    u = solve_dirichlet(sys, load)
    delta = mesh.delta
    ref_eigs: EigenSet = ref["eigs"]

    shift = spec.c / (s * delta ** (2.0 * s))
    rows = []
    shift_residuals = []
    distances = []
    for j in range(k):
        lam = float(eigs.values[j])
        lam_inf = float(ref_eigs.values[j])
        gap = lam_inf - lam
        rows.append(_row(delta, mesh, s, j + 1, lam, lam, lam_inf, gap))
        if delta >= (b - a):
            shift_residuals.append({
                "k": j + 1,
                "gap": gap,
                "expected": shift,
                "ok": abs(gap - shift) <= SHIFT_RTOL * shift + SHIFT_FLOOR * lam_inf,
            })
        distances.append(_eigvec_distance(sys, eigs.vector(j), ref_eigs.vector(j)))

    u_inf = ref["u"]
    dist = _m_norm(sys, u - u_inf)
    rows.append(_row(delta, mesh, s, 0, _m_norm(sys, u), _m_norm(sys, u), _m_norm(sys, u_inf), dist))
    return {
        "delta": delta,
        "m": m,
        "rows": rows,
        "lambda1": float(eigs.values[0]),
        "gap1": float(ref_eigs.values[0] - eigs.values[0]),
        "solution_distance": dist,
        "energy": minimal_energy(load, u),
        "shift": shift_residuals,
        "eigvec_distance": distances,
        "multiplicities": eigs.multiplicities(),
    }


def sweep_infty(s: float, n_int: int, ms: Sequence[int], k: int, a: float = 0.0, b: float = 1.0,
                workers: Optional[int] = None) -> SweepReport:
    ms = _check_ascending(ms)
    FracParams(1, s)
    if ms[-1] < n_int:
        raise ConfigurationError(f"no m in {ms} reaches delta >= b-a (needs m >= n_int={n_int})")
    span = b - a
    kk = min(k, n_int - 1)
    logging.info(f"[Harness] sweep_infty s={s} n_int={n_int} ms={ms} k={kk}")

    ref = _infinite_reference(a, b, s, n_int, ms[0], kk)
    points = _map_points(lambda m: _infty_point(a, b, s, n_int, kk, m, ref), ms, workers)

    deltas = [pt["delta"] for pt in points]
    lambda1 = [pt["lambda1"] for pt in points]
    tail = [pt for pt in points if pt["delta"] >= span]
    slope = _loglog_slope([pt["delta"] for pt in tail], [pt["gap1"] for pt in tail])
    solution_slope = _loglog_slope([pt["delta"] for pt in tail], [pt["solution_distance"] for pt in tail])
    energies = [pt["energy"] for pt in points]
    dist_first = [pt["eigvec_distance"][0] for pt in points]
    rows = [r for pt in points for r in pt["rows"]]

    checks = {
        "lambda1_strictly_increasing": all(y > x for x, y in zip(lambda1[:-1], lambda1[1:])),
        "form_domination": all(r["abs_err"] >= -SHIFT_FLOOR * r["reference"] for r in rows if r["k"] > 0),
        "shift_identity": all(item["ok"] for pt in tail for item in pt["shift"]),
        "solution_distance_decreasing": _non_increasing([pt["solution_distance"] for pt in points], slack=0.0),
        "energy_monotone": all(y >= x - 1e-14 * abs(x) for x, y in zip(energies[:-1], energies[1:]))
        and energies[-1] <= ref["energy"] + 1e-14 * abs(ref["energy"]),
        "eigvec_first_converges": _non_increasing(dist_first) and dist_first[-1] <= EIGVEC_FINAL_TOL,
    }
    if slope is not None:
        checks["tail_slope"] = -2.0 * s * 1.1 <= slope <= -2.0 * s * 0.9

    diagnostics = {
        "tail_slope": slope,
        "solution_tail_slope": solution_slope,
        "reference_eigenvalues": [float(v) for v in ref["eigs"].values],
        "reference_energy": ref["energy"],
        "points": [
            {
                "delta": pt["delta"],
                "m": pt["m"],
                "energy": pt["energy"],
                "solution_distance": pt["solution_distance"],
                "eigvec_distance": pt["eigvec_distance"],
                "multiplicities": pt["multiplicities"],
                "shift_identity": pt["shift"],
            }
            for pt in points
        ],
    }
    meta = _metadata("infty", a, b, s=s, n_int=n_int, ms=ms, k=kk, deltas=deltas)
    report = SweepReport(rows, meta, diagnostics, checks)
    logging.info(f"[Harness] sweep_infty done, slope={slope}, failed checks: {report.violations()}")
    return report


def check_c_delta(s: float, n_int: int, ms: Sequence[int], a: float = 0.0,
                  b: float = 1.0) -> List[Dict[str, Any]]:
    """
    ratio = vᵀG_∞v / vᵀG_δv for the first eigenvector, bounded by
    C(δ) = 1 + 4|Ω_δ| / (δ^{1+2s} λ_1), |Ω_δ| = (b-a) + 2δ.
    """
    ms = _check_ascending(ms)
    span = b - a
    ref_mesh = build_mesh(a, b, n_int, ms[0])
    G_inf = assemble_stiffness(ref_mesh, KernelSpec.for_mesh(ref_mesh, s), INFINITE).stiffness_raw

    rows = []
    for m in ms:
        mesh = build_mesh(a, b, n_int, m)
        sys = assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, s), TRUNCATED)
        eigs = solve_eigen(sys, 1)
        v = eigs.vector(0)
        delta = mesh.delta
        lam1 = float(eigs.values[0])
        energy = sys.stiffness_raw.quad_form(v)
        ratio = G_inf.quad_form(v) / energy
        C = 1.0 + 4.0 * (span + 2.0 * delta) / (delta ** (1.0 + 2.0 * s) * lam1)
        if ratio < 1.0 - RATIO_FLOOR:
            raise InvariantViolation("norm_ratio_floor", f"ratio={ratio!r} < 1 at delta={delta}")
        ok = ratio <= C
        if delta >= span:
            exact = 1.0 + (2.0 * sys.mass.quad_form(v) / (s * delta ** (2.0 * s))) / energy
            ok = ok and abs(ratio - exact) <= 1e-9 * exact
        rows.append({"delta": delta, "ratio": ratio, "C_delta": C, "pass": bool(ok)})
        logging.info(f"[Harness] C(delta) delta={delta} ratio={ratio:.12g} C={C:.6g}")
    return rows


def c_delta_trend_ok(rows: List[Dict[str, Any]], span: float) -> bool:
    """C(δ)-1 decreasing over the δ ≥ b-a rows."""
    tail = [r["C_delta"] - 1.0 for r in rows if r["delta"] >= span]
    return all(y < x for x, y in zip(tail[:-1], tail[1:]))
