#!/usr/bin/env python3
"""Release smoke checks for the nonlocal solver (desk-scale convergence properties).

Usage:
  python3 scripts/release_smoke.py
"""

import math
import os
import sys
import time

import numpy as np

SCRIPT_DIR = os.path.dirname(os.path.abspath(__file__))
PROJECT_ROOT = os.path.dirname(SCRIPT_DIR)
if PROJECT_ROOT not in sys.path:
    sys.path.insert(0, PROJECT_ROOT)

from assembly import TRUNCATED, assemble_stiffness, pair_integral_oracle
from frac_constants import FracParams, bbm_normalized_mass, c_norm, kappa, surface_measure
from mesh_kernel import KernelSpec, apply_pointwise, build_mesh
from solvers import rayleigh_quotient, solve_dirichlet, solve_eigen
from sweep_harness import c_delta_trend_ok, check_c_delta, gamma_limit_energy, sweep_infty, sweep_zero


ZERO_DELTAS = [0.2, 0.1, 0.05, 0.025]
INFTY_MS = [32, 128, 256, 1024, 4096, 2 ** 20, 2 ** 36, 2 ** 48]


def _timed(label, limit_s, fn):
    t0 = time.perf_counter()
    out = fn()
    elapsed = time.perf_counter() - t0
    if elapsed > limit_s:
        print(f"WARN: [{label}] took {elapsed:.1f}s (limit {limit_s}s)")
    return out


def run():
    failures = []

    # 1) 점별 연산자: x² 에 대해 κ(-Δ)_δ^s[x²]/δ^{2(1-s)} = -2
    try:
        for s in (0.25, 0.4, 0.75):
            for delta in (0.1, 0.4):
                spec = KernelSpec(FracParams(1, s), delta)
                value = apply_pointwise(lambda y: y ** 2, 0.5, spec)
                scaled = kappa(spec.params) * value / delta ** (2.0 * (1.0 - s))
                assert abs(scaled + 2.0) <= 1e-6, f"s={s} delta={delta} -> {scaled}"
    except Exception as e:
        failures.append(f"[pointwise_exactness] {e}")

    # 2) 조립 결과 == 요소쌍 오라클 (s=0.5 는 log 모멘트 분기)
    try:
        def oracle_check():
            for s in (0.25, 0.5, 0.75):
                mesh = build_mesh(0.0, 1.0, 8, 2)
                spec = KernelSpec.for_mesh(mesh, s)
                G = assemble_stiffness(mesh, spec).stiffness_raw.to_dense()
                for i in range(mesh.n_free):
                    for j in range(i, min(mesh.n_free, i + mesh.m + 2)):
                        ref = pair_integral_oracle(i, j, mesh, spec)
                        assert abs(G[i, j] - ref) <= 1e-7 * abs(ref), f"s={s} ({i},{j}) {G[i, j]} vs {ref}"
        _timed("oracle", 30, oracle_check)
    except Exception as e:
        failures.append(f"[assembly_oracle] {e}")

    # 3) + 8) δ→0 고유값 수렴과 BBM 상한
    for s in (0.25, 0.4):
        try:
            report = _timed(f"sweep_zero s={s}", 60, lambda: sweep_zero(s, 8, ZERO_DELTAS, 3))
            for k in (1, 2, 3):
                rel = [r["rel_err"] for r in report.rows_for(k)]
                # rows are sorted by ascending δ, the sweep runs in the opposite direction
                sweep_order = rel[::-1]
                assert all(b <= a for a, b in zip(sweep_order[:-1], sweep_order[1:])), f"k={k} rel_err {sweep_order}"
                assert sweep_order[-1] <= 0.02, f"k={k} final rel_err {sweep_order[-1]}"
            assert report.checks["bbm_upper_bound"], "rescaled lambda_1 above pi^2 * 1.01"
        except Exception as e:
            failures.append(f"[zero_spectrum s={s}] {e}")

    # 4) δ→0 해 수렴 (RP, f=1): 경계층 때문에 O(δ), δ 를 반으로 줄이면 오차도 반
    try:
        report = sweep_zero(0.25, 8, [0.05, 0.025, 0.0125, 0.00625], 1)
        errors = [r["abs_err"] for r in report.rows_for(0)][::-1]
        ratios = [a / b for a, b in zip(errors[:-1], errors[1:])]
        assert all(1.9 <= r <= 2.1 for r in ratios), f"halving ratios {ratios}"
        assert errors[-1] <= 0.01 * 0.09128709, f"L2 distance at delta=0.00625: {errors[-1]}"
    except Exception as e:
        failures.append(f"[zero_solution] {e}")

    # 5) + 6) δ→∞: 단조 증가, 정확한 shift 항등식, 기울기 -2s, 해 수렴
    try:
        report = _timed("sweep_infty", 60, lambda: sweep_infty(0.25, 256, INFTY_MS, 5))
        for name in ("lambda1_strictly_increasing", "shift_identity", "tail_slope", "form_domination"):
            assert report.checks.get(name), f"check {name} failed"
        dist = [r["abs_err"] for r in report.rows_for(0)]
        assert all(b < a for a, b in zip(dist[:-1], dist[1:])), f"solution distance not decreasing {dist}"
        assert dist[-1] <= 1e-6, f"final solution distance {dist[-1]}"
    except Exception as e:
        failures.append(f"[infty_limit] {e}")

    # 7) 노름 동치 1 <= ratio <= C(δ)
    try:
        rows = check_c_delta(0.25, 64, [16, 32, 64, 128, 256, 1024])
        assert all(r["pass"] for r in rows), f"rows failing: {[r['delta'] for r in rows if not r['pass']]}"
        assert c_delta_trend_ok(rows, 1.0), "C(delta)-1 not decreasing on delta >= 1"
    except Exception as e:
        failures.append(f"[norm_equivalence] {e}")

    # 9) Γ-극한 에너지
    try:
        rows = gamma_limit_energy(0.25, 8, ZERO_DELTAS)
        errors = [r["rel_err"] for r in rows]
        assert all(b < a for a, b in zip(errors[:-1], errors[1:])), f"errors {errors}"
        assert errors[-1] <= 0.02, f"final error {errors[-1]}"
    except Exception as e:
        failures.append(f"[gamma_limit] {e}")

    # 10) 솔버 불변식: 조밀 오라클, CG/Cholesky, Rayleigh 최소성
    try:
        mesh = build_mesh(0.0, 1.0, 64, 4)
        sys_ = assemble_stiffness(mesh, KernelSpec.for_mesh(mesh, 0.3), TRUNCATED)
        eigs = solve_eigen(sys_, 5)
        A = sys_.stiffness.to_dense()
        M = sys_.mass.to_dense()
        L = np.linalg.cholesky(M)
        Linv = np.linalg.inv(L)
        dense = np.linalg.eigvalsh(Linv @ A @ Linv.T)[:5]
        assert np.allclose(eigs.values, dense, rtol=1e-9, atol=0.0), f"{eigs.values} vs {dense}"

        load = np.full(sys_.n, mesh.h)
        u_chol = solve_dirichlet(sys_, load, "cholesky")
        u_cg = solve_dirichlet(sys_, load, "cg")
        assert np.linalg.norm(u_cg - u_chol) <= 1e-9 * np.linalg.norm(u_chol)

        rng = np.random.default_rng(20240611)
        for _ in range(60):
            v = rng.standard_normal(sys_.n)
            v /= np.linalg.norm(v)
            assert rayleigh_quotient(sys_, v) >= eigs.values[0] * (1.0 - 1e-12)
    except Exception as e:
        failures.append(f"[solver_invariants] {e}")

    # 11) 상수 극한
    try:
        for N in (1, 2, 3):
            p = FracParams(N, 0.999)
            assert abs(kappa(p) - 1.0) <= 1e-2, f"kappa({N}, 0.999) = {kappa(p)}"
            target = 4.0 * N / surface_measure(N)
            assert abs(c_norm(p) / 0.001 - target) <= 1e-2 * target
        for s in (0.1, 0.5, 0.9):
            assert math.isclose(bbm_normalized_mass(s, 0.3), 1.0, rel_tol=0.0, abs_tol=1e-12)
    except Exception as e:
        failures.append(f"[constant_limits] {e}")

    if failures:
        print("FAIL")
        for f in failures:
            print(f)
        raise SystemExit(1)

    print("PASS: release smoke checks")


if __name__ == "__main__":
    run()
