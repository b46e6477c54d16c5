import math

import pytest

from errors import ConfigurationError, DomainError
from frac_constants import FracParams, kappa
from sweep_harness import (
    COLUMNS,
    bbm_mollifier_mass,
    bbm_upper_bound,
    c_delta_trend_ok,
    check_c_delta,
    gamma_limit_energy,
    rescale_eigen,
    sweep_infty,
    sweep_zero,
)

PI2 = math.pi ** 2


def test_rescale_eigen_inverse():
    p = FracParams(1, 0.3)
    delta = 0.07
    lam = delta ** (2.0 * (1.0 - 0.3)) / kappa(p)
    assert rescale_eigen(lam, delta, p) == pytest.approx(1.0, rel=1e-14)
    with pytest.raises(DomainError):
        rescale_eigen(0.0, delta, p)
    with pytest.raises(DomainError):
        rescale_eigen(1.0, -1.0, p)


def test_bbm_mass_reexported_for_harness_use():
    assert bbm_mollifier_mass(0.5, 1.0) == pytest.approx(1.0 / math.pi)


# ===== δ → 0⁺ =====

def test_sweep_zero_report_shape():
    report = sweep_zero(0.25, 4, [0.2], 1, workers=1)
    assert [r["k"] for r in report.rows] == [0, 1]
    assert list(report.to_frame().columns) == COLUMNS
    assert report.metadata["mode"] == "zero"
    assert report.metadata["n_int"] == [20]
    solution = report.rows_for(0)[0]
    assert solution["reference"] == pytest.approx(math.sqrt(1.0 / 120.0))


def test_sweep_zero_rows_sorted_by_delta_then_k():
    report = sweep_zero(0.25, 4, [0.2, 0.1], 2)
    keys = [(r["delta"], r["k"]) for r in report.rows]
    assert keys == sorted(keys)
    assert len(report.rows) == 6
    for r in report.rows_for(1):
        assert r["rescaled"] == pytest.approx(rescale_eigen(r["lambda"], r["delta"], FracParams(1, 0.25)))


def test_sweep_zero_rejects_bad_sweeps():
    with pytest.raises(ConfigurationError):
        sweep_zero(0.25, 4, [0.3], 1)
    with pytest.raises(ConfigurationError):
        sweep_zero(0.25, 4, [0.1, 0.2], 1)


@pytest.mark.parametrize("s", [0.25, 0.4])
def test_sweep_zero_converges_to_local_spectrum(s):
    report = sweep_zero(s, 8, [0.2, 0.1, 0.05, 0.025], 3)
    for k in (1, 2, 3):
        errors = [r["rel_err"] for r in report.rows_for(k)][::-1]
        assert all(b <= a for a, b in zip(errors[:-1], errors[1:]))
        assert errors[-1] <= 0.02
    assert report.checks["zero_error_monotone"]
    assert report.checks["bbm_upper_bound"]
    assert report.checks["bbm_min_max"]
    assert report.checks["eigvec_first_converges"]
    assert all(m == [1, 1, 1] for m in (pt["multiplicities"] for pt in report.diagnostics["points"]))


def test_zero_limit_solution_error_is_first_order():
    # the zero volume constraint leaves an O(δ) boundary layer around the local solution
    deltas = [0.1, 0.05, 0.025, 0.0125]
    report = sweep_zero(0.25, 8, deltas, 1)
    errors = [r["rel_err"] for r in report.rows_for(0)][::-1]
    for coarse, fine in zip(errors[:-1], errors[1:]):
        assert 1.9 <= coarse / fine <= 2.1
    assert errors[2] == pytest.approx(0.0238, rel=0.05)


def test_zero_limit_solution_distance_at_small_horizon():
    report = sweep_zero(0.25, 8, [0.00625], 1)
    assert report.rows_for(0)[0]["abs_err"] <= 0.01 * 0.09128709


def test_gamma_limit_energy():
    rows = gamma_limit_energy(0.25, 8, [0.2, 0.1, 0.05, 0.025])
    errors = [r["rel_err"] for r in rows]
    assert all(b < a for a, b in zip(errors[:-1], errors[1:]))
    assert errors[-1] <= 0.02
    assert rows[0]["reference"] == pytest.approx(PI2)
    zero = gamma_limit_energy(0.25, 4, [0.2], u=lambda x: 0.0 * x)
    assert zero[0]["I_value"] == 0.0


def test_bbm_upper_bound_rows():
    rows = bbm_upper_bound(0.3, 4, [0.2, 0.1])
    assert [r["delta"] for r in rows] == [0.2, 0.1]
    for r in rows:
        assert r["pass"]
        assert r["rescaled_lambda1"] <= r["rescaled_rq"]
        assert r["bound"] == pytest.approx(PI2 * 1.01)


# ===== δ → +∞ =====

def test_sweep_infty_small_mesh():
    report = sweep_infty(0.25, 32, [8, 32, 64, 128, 1024], 3)
    assert not report.violations()
    assert report.metadata["mode"] == "infty"
    slope = report.diagnostics["tail_slope"]
    assert -0.55 <= slope <= -0.45
    for r in report.rows:
        if r["k"] > 0:
            assert r["rescaled"] == r["lambda"]
            assert r["lambda"] <= r["reference"]
    energies = [pt["energy"] for pt in report.diagnostics["points"]]
    assert all(b >= a for a, b in zip(energies[:-1], energies[1:]))
    assert energies[-1] <= report.diagnostics["reference_energy"]


def test_sweep_infty_needs_a_long_horizon():
    with pytest.raises(ConfigurationError):
        sweep_infty(0.25, 32, [4, 8], 2)
    with pytest.raises(ConfigurationError):
        sweep_infty(0.25, 32, [64, 32], 2)


def test_sweep_infty_acceptance_scale():
    ms = [32, 128, 256, 1024, 4096, 2 ** 20, 2 ** 36, 2 ** 48]
    report = sweep_infty(0.25, 256, ms, 5)
    for name in ("lambda1_strictly_increasing", "shift_identity", "tail_slope", "solution_distance_decreasing"):
        assert report.checks[name], name
    dist = [r["abs_err"] for r in report.rows_for(0)]
    assert dist[-1] <= 1e-6


# ===== norm equivalence =====

def test_check_c_delta_rows():
    rows = check_c_delta(0.25, 16, [4, 8, 16, 32, 64])
    assert [r["delta"] for r in rows] == [0.25, 0.5, 1.0, 2.0, 4.0]
    for r in rows:
        assert r["pass"]
        assert 1.0 <= r["ratio"] <= r["C_delta"]
    assert c_delta_trend_ok(rows, 1.0)


def test_c_delta_trend_detects_growth():
    rows = [{"delta": 1.0, "C_delta": 1.5}, {"delta": 2.0, "C_delta": 1.7}]
    assert not c_delta_trend_ok(rows, 1.0)


def test_c_delta_shrinks_toward_one_past_the_domain():
    rows = check_c_delta(0.25, 16, [32, 64])
    assert [r["delta"] for r in rows] == [2.0, 4.0]
    assert rows[1]["C_delta"] - 1.0 < rows[0]["C_delta"] - 1.0


@pytest.mark.parametrize("s", [0.5, 0.6, 0.75])
def test_check_c_delta_for_large_order(s):
    rows = check_c_delta(s, 16, [8, 16, 32])
    assert all(r["pass"] for r in rows)


def test_sweep_infty_for_large_order():
    report = sweep_infty(0.6, 32, [8, 32, 64, 128, 1024], 3)
    for name in ("lambda1_strictly_increasing", "shift_identity", "tail_slope"):
        assert report.checks[name], name
