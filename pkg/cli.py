# cli.py
# Experiment dispatch and CSV/JSON artifact emission
"""
nsolve CLI 본체.

  nsolve.py <mode> --config run.json [--output out.csv]

mode: solve | eigs | sweep-zero | sweep-infty | check | constants
종료코드: 0 성공, 2 수학적 불변식 위반, 1 그 외 오류 (설정/IO/수치 실패)

CSV 는 결정적(byte-identical)이어야 하므로 timestamp 등은 JSON sidecar 에만 쓴다.
"""

import argparse
import json
import logging
import math
from dataclasses import replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from assembly import TRUNCATED, assemble_load, assemble_stiffness
from errors import ConfigurationError, InvariantViolation, NsolveError
from frac_constants import constants_table, kappa
from mesh_kernel import KernelSpec, build_mesh
from run_config import MODES, RunConfig, config_to_dict, parse_config
from settings import configure_logging, write_metadata
from solvers import minimal_energy, solve_dirichlet
from sweep_harness import (
    CHECK_COLUMNS,
    COLUMNS,
    bbm_upper_bound,
    c_delta_trend_ok,
    check_c_delta,
    gamma_limit_energy,
    sweep_infty,
    sweep_zero,
)


SOLVE_COLUMNS = ["i", "x", "u"]
CONSTANTS_COLUMNS = ["N", "s", "c_ns", "kappa", "sigma", "gamma"]

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_INVARIANT = 2


# ===== Formatting =====

def format_float(value: Any) -> str:
    """Shortest round-trip decimal; integral floats without fraction, -0.0 as 0, booleans as 1/0."""
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    x = float(value)
    if x == 0.0:
        return "0"
    if math.isfinite(x) and x.is_integer() and abs(x) < 1e16:
        return str(int(x))
    return repr(x)


def write_csv(rows: List[Dict[str, Any]], columns: Sequence[str], path: Path) -> None:
    cells = [[format_float(row[c]) for c in columns] for row in rows]
    frame = pd.DataFrame(cells, columns=list(columns), dtype=str)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, lineterminator="\n")
    logging.info(f"[CLI] wrote {len(rows)} rows to {path}")


def _json_default(value: Any):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    if isinstance(value, np.ndarray):
        return value.tolist()
    raise TypeError(f"not JSON serializable: {type(value).__name__}")


def write_sidecar(path: Path, payload: Dict[str, Any]) -> Optional[Path]:
    if not write_metadata():
        return None
    target = path.with_name(path.name + ".json")
    target.write_text(json.dumps(payload, ensure_ascii=False, indent=2, default=_json_default), encoding="utf-8")
    return target


# ===== Mode runners =====
# 각 runner 는 (rows, columns, sidecar payload, 실패한 검증 이름 목록) 을 돌려준다.

def _run_solve(config: RunConfig):
    mesh = build_mesh(config.a, config.b, config.n_int, config.m)
    spec = KernelSpec.for_mesh(mesh, config.s)
    sys = assemble_stiffness(mesh, spec, TRUNCATED)
    scale = config.scale
    if config.rescaled:
        scale *= mesh.delta ** (2.0 * (1.0 - config.s)) / kappa(spec.params)
    load = assemble_load(mesh, config.rhs, scale=scale)
    u = solve_dirichlet(sys, load, method=config.method)

    values = np.concatenate([[0.0], u, [0.0]])
    rows = [
        {"i": i, "x": config.a + i * mesh.h, "u": values[i]}
        for i in range(mesh.n_int + 1)
    ]
    payload = {
        "metadata": {"n_int": mesh.n_int, "m": mesh.m, "h": mesh.h, "delta": mesh.delta},
        "diagnostics": {"minimal_energy": minimal_energy(load, u)},
    }
    return rows, SOLVE_COLUMNS, payload, []


def _run_eigs(config: RunConfig):
    mesh = build_mesh(config.a, config.b, config.n_int, config.m)
    k = min(config.k, mesh.n_free)
    report = sweep_zero(config.s, config.m, [mesh.delta], k, config.a, config.b)
    rows = [r for r in report.rows if r["k"] > 0]
    payload = {"metadata": report.metadata, "diagnostics": report.diagnostics}
    return rows, COLUMNS, payload, []


def _run_sweep_zero(config: RunConfig):
    report = sweep_zero(config.s, config.m, config.deltas, config.k, config.a, config.b)
    diagnostics = dict(report.diagnostics)
    diagnostics["gamma_limit_energy"] = gamma_limit_energy(config.s, config.m, config.deltas, config.a, config.b)
    diagnostics["bbm_upper_bound"] = bbm_upper_bound(config.s, config.m, config.deltas, config.a, config.b)
    payload = {"metadata": report.metadata, "diagnostics": diagnostics, "checks": report.checks}
    return report.rows, COLUMNS, payload, report.violations()


def _run_sweep_infty(config: RunConfig):
    report = sweep_infty(config.s, config.n_int, config.ms, config.k, config.a, config.b)
    payload = {"metadata": report.metadata, "diagnostics": report.diagnostics, "checks": report.checks}
    return report.rows, COLUMNS, payload, report.violations()


def _run_check(config: RunConfig):
    rows = check_c_delta(config.s, config.n_int, config.ms, config.a, config.b)
    failed = [f"c_delta_bound@{r['delta']!r}" for r in rows if not r["pass"]]
    trend = c_delta_trend_ok(rows, config.b - config.a)
    if not trend:
        failed.append("c_delta_trend")
    payload = {
        "metadata": {"n_int": config.n_int, "ms": list(config.ms), "s": config.s},
        "checks": {"all_rows_pass": not any(not r["pass"] for r in rows), "c_delta_trend": trend},
    }
    return rows, CHECK_COLUMNS, payload, failed


def _run_constants(config: RunConfig):
    rows = constants_table(config.N, config.s_values)
    return rows, CONSTANTS_COLUMNS, {"metadata": {}}, []


_RUNNERS = {
    "solve": _run_solve,
    "eigs": _run_eigs,
    "sweep-zero": _run_sweep_zero,
    "sweep-infty": _run_sweep_infty,
    "check": _run_check,
    "constants": _run_constants,
}


# ===== Entry points =====

def execute(config: RunConfig) -> List[str]:
    """Runs one configured experiment, writes artifacts, returns failed invariant checks."""
    if not config.output:
        raise ConfigurationError("no output path: set 'output' in the config or pass --output")
    path = Path(config.output)
    logging.info(f"[CLI] mode={config.mode} output={path}")

    rows, columns, payload, failed = _RUNNERS[config.mode](config)
    write_csv(rows, columns, path)

    payload.setdefault("metadata", {})
    payload["metadata"].setdefault("mode", config.mode)
    payload["metadata"]["command"] = config.mode
    payload["metadata"].setdefault("domain", {"a": config.a, "b": config.b})
    payload["config"] = config_to_dict(config)
    write_sidecar(path, payload)
    return failed


def run(config: RunConfig) -> int:
    try:
        failed = execute(config)
    except InvariantViolation as e:
        logging.error(f"[CLI] {e}")
        return EXIT_INVARIANT
    except (NsolveError, OSError) as e:
        logging.error(f"[CLI] {type(e).__name__}: {e}", exc_info=logging.getLogger().isEnabledFor(logging.DEBUG))
        return EXIT_ERROR
    except Exception as e:
        logging.error(f"[CLI] unexpected {type(e).__name__}: {e}", exc_info=True)
        return EXIT_ERROR
    if failed:
        logging.error(f"[CLI] invariant checks failed: {', '.join(failed)}")
        return EXIT_INVARIANT
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nsolve", description="Peridynamic fractional Laplacian experiments")
    ap.add_argument("mode", choices=MODES)
    ap.add_argument("--config", required=True, help="JSON run configuration")
    ap.add_argument("--output", default=None, help="CSV output path (overrides config 'output')")
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        config = parse_config(Path(args.config).read_text(encoding="utf-8"))
        if config.mode != args.mode:
            raise ConfigurationError(f"config mode '{config.mode}' does not match command '{args.mode}'")
    except (NsolveError, OSError) as e:
        logging.error(f"[CLI] {type(e).__name__}: {e}")
        return EXIT_ERROR
    if args.output:
        config = replace(config, output=args.output)
    return run(config)
