# settings.py
# Process-level configuration (.env / environment)
"""
환경 변수 기반 설정.
.env 파일이 있으면 load_dotenv()로 먼저 읽고, 없으면 OS 환경 변수만 사용한다.
"""

import logging
import os

from dotenv import load_dotenv

load_dotenv()


def _env_bool(name: str, default: bool = False) -> bool:
    value = os.getenv(name)
    if value is None:
        return default
    return str(value).strip().lower() in {"1", "true", "yes", "on", "y"}


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name, "").strip()
    if not raw:
        return default
    try:
        return int(raw)
    except ValueError:
        logging.warning(f"[Settings] {name}={raw!r} is not an integer, using {default}")
        return default


def worker_count() -> int:
    """NSOLVE_THREADS caps worker count; default is the number of available cores."""
    n = _env_int("NSOLVE_THREADS", os.cpu_count() or 1)
    return max(1, n)


def write_metadata() -> bool:
    return _env_bool("NSOLVE_WRITE_METADATA", True)


def configure_logging() -> None:
    level_name = os.getenv("NSOLVE_LOG_LEVEL", "INFO").strip().upper()
    level = getattr(logging, level_name, logging.INFO)
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(message)s")
