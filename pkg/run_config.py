# run_config.py
# JSON run configuration for the nsolve CLI
"""
실행 설정(JSON) 파싱/검증/직렬화.

- 모르는 키는 즉시 에러 (오타가 조용히 기본값으로 바뀌는 것을 막는다)
- mode 별 필수 필드를 검사하고, 값 범위는 각 모듈과 같은 규칙으로 확인
- serialize_config 는 정렬된 키의 canonical JSON. parse(serialize(c)) == c
"""

import json
import math
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

from assembly import parse_load_preset
from errors import ConfigurationError
from solvers import METHODS


MODES = ("solve", "eigs", "sweep-zero", "sweep-infty", "check", "constants")

REQUIRED_FIELDS: Dict[str, Tuple[str, ...]] = {
    "solve": ("s", "n_int", "m"),
    "eigs": ("s", "n_int", "m"),
    "sweep-zero": ("s", "m", "deltas"),
    "sweep-infty": ("s", "n_int", "ms"),
    "check": ("s", "n_int", "ms"),
    "constants": ("s",),
}

KNOWN_KEYS = {
    "mode", "domain", "s", "N", "n_int", "m", "ms", "deltas",
    "k", "rhs", "scale", "rescaled", "method", "output",
}


# ===== Data Structures =====

@dataclass(frozen=True)
class RunConfig:
    mode: str
    a: float = 0.0
    b: float = 1.0
    s: Optional[float] = None
    # constants 모드에서만 사용 (s, N 의 곱집합)
    s_values: Tuple[float, ...] = ()
    N: Tuple[int, ...] = (1,)
    n_int: Optional[int] = None
    m: Optional[int] = None
    ms: Tuple[int, ...] = ()
    deltas: Tuple[float, ...] = ()
    k: int = 5
    rhs: str = "one"
    scale: float = 1.0
    rescaled: bool = False
    method: str = "cholesky"
    output: Optional[str] = None


# ===== Field validators =====

def _int_field(name: str, value: Any, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value or value < minimum:
        raise ConfigurationError(f"'{name}' must be an integer >= {minimum}, got {value!r}")
    return int(value)


def _float_field(name: str, value: Any) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise ConfigurationError(f"'{name}' must be a finite number, got {value!r}")
    return float(value)


def _order(name: str, value: Any) -> float:
    s = _float_field(name, value)
    if not 0.0 < s < 1.0:
        raise ConfigurationError(f"'{name}' must lie in (0,1), got {s}")
    return s


def _as_list(value: Any) -> list:
    return list(value) if isinstance(value, (list, tuple)) else [value]


def _parse_domain(value: Any) -> Tuple[float, float]:
    if not isinstance(value, dict):
        raise ConfigurationError("'domain' must be an object {a, b}")
    unknown = set(value) - {"a", "b"}
    if unknown:
        raise ConfigurationError(f"unknown key in domain: {sorted(unknown)[0]}")
    a = _float_field("domain.a", value.get("a", 0.0))
    b = _float_field("domain.b", value.get("b", 1.0))
    if a >= b:
        raise ConfigurationError(f"domain requires a < b, got ({a}, {b})")
    return a, b


def _parse_deltas(value: Any) -> Tuple[float, ...]:
    deltas = tuple(_float_field("deltas", d) for d in _as_list(value))
    if not deltas or any(d <= 0 for d in deltas):
        raise ConfigurationError("'deltas' must be a non-empty list of positive numbers")
    if any(y >= x for x, y in zip(deltas[:-1], deltas[1:])):
        raise ConfigurationError(f"'deltas' must be strictly descending, got {list(deltas)}")
    return deltas


def _parse_ms(value: Any) -> Tuple[int, ...]:
    ms = tuple(_int_field("ms", m, 1) for m in _as_list(value))
    if not ms:
        raise ConfigurationError("'ms' must be a non-empty list")
    if any(y <= x for x, y in zip(ms[:-1], ms[1:])):
        raise ConfigurationError(f"'ms' must be strictly ascending, got {list(ms)}")
    return ms


# ===== Public API =====

def config_from_dict(data: Dict[str, Any]) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigurationError("config must be a JSON object")
    for key in sorted(data):
        if key not in KNOWN_KEYS:
            raise ConfigurationError(f"unknown config key '{key}'")

    mode = data.get("mode")
    if mode not in MODES:
        raise ConfigurationError(f"'mode' must be one of {', '.join(MODES)}, got {mode!r}")
    for name in REQUIRED_FIELDS[mode]:
        if data.get(name) is None:
            raise ConfigurationError(f"mode '{mode}' requires field '{name}'")

    kwargs: Dict[str, Any] = {"mode": mode}
    if "domain" in data:
        kwargs["a"], kwargs["b"] = _parse_domain(data["domain"])

    if mode == "constants":
        kwargs["s_values"] = tuple(_order("s", s) for s in _as_list(data["s"]))
        if "N" in data:
            kwargs["N"] = tuple(_int_field("N", n, 1) for n in _as_list(data["N"]))
        if not kwargs["s_values"] or not kwargs.get("N", (1,)):
            raise ConfigurationError("constants mode needs at least one N and one s")
    else:
        if isinstance(data["s"], (list, tuple)):
            raise ConfigurationError(f"mode '{mode}' takes a single 's'")
        kwargs["s"] = _order("s", data["s"])
        if "N" in data and _as_list(data["N"]) != [1]:
            raise ConfigurationError("only N=1 is supported outside constants mode")

    if data.get("n_int") is not None:
        kwargs["n_int"] = _int_field("n_int", data["n_int"], 2)
    if data.get("m") is not None:
        kwargs["m"] = _int_field("m", data["m"], 1)
    if data.get("ms") is not None:
        kwargs["ms"] = _parse_ms(data["ms"])
    if data.get("deltas") is not None:
        kwargs["deltas"] = _parse_deltas(data["deltas"])
    if "k" in data:
        kwargs["k"] = _int_field("k", data["k"], 1)
    if "rhs" in data:
        parse_load_preset(data["rhs"])
        kwargs["rhs"] = str(data["rhs"]).strip()
    if "scale" in data:
        kwargs["scale"] = _float_field("scale", data["scale"])
    if "rescaled" in data:
        if not isinstance(data["rescaled"], bool):
            raise ConfigurationError(f"'rescaled' must be true or false, got {data['rescaled']!r}")
        kwargs["rescaled"] = data["rescaled"]
    if "method" in data:
        if data["method"] not in METHODS:
            raise ConfigurationError(f"'method' must be one of {', '.join(METHODS)}, got {data['method']!r}")
        kwargs["method"] = data["method"]
    if data.get("output") is not None:
        if not isinstance(data["output"], str) or not data["output"]:
            raise ConfigurationError("'output' must be a non-empty path string")
        kwargs["output"] = data["output"]

    return RunConfig(**kwargs)


def parse_config(text: str) -> RunConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"config is not valid JSON: {e}") from e
    return config_from_dict(data)


def config_to_dict(config: RunConfig) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "mode": config.mode,
        "domain": {"a": config.a, "b": config.b},
        "k": config.k,
        "rhs": config.rhs,
        "scale": config.scale,
        "rescaled": config.rescaled,
        "method": config.method,
    }
    if config.mode == "constants":
        out["s"] = list(config.s_values)
        out["N"] = list(config.N)
    else:
        out["s"] = config.s
    for name in ("n_int", "m", "output"):
        value = getattr(config, name)
        if value is not None:
            out[name] = value
    if config.ms:
        out["ms"] = list(config.ms)
    if config.deltas:
        out["deltas"] = list(config.deltas)
    return out


def serialize_config(config: RunConfig) -> str:
    return json.dumps(config_to_dict(config), sort_keys=True, ensure_ascii=False)
