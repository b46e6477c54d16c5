# errors.py
# Exception hierarchy for nsolve
"""
라이브러리 전체에서 쓰는 예외 계층.
CLI는 InvariantViolation을 종료코드 2로, 나머지 NsolveError를 1로 매핑한다.
"""


class NsolveError(Exception):
    """Base class for every error raised by nsolve."""


class DomainError(NsolveError, ValueError):
    """Argument outside the mathematical domain of a function."""


class ConfigurationError(NsolveError, ValueError):
    """Invalid run configuration, mesh parameters or load preset."""


class AssemblyError(NsolveError):
    """Stiffness assembly failed (divergent moment, asymmetry, quadrature)."""


class SolverError(NsolveError):
    """Linear or eigen solve failed or produced an inconsistent result."""


class OracleFailure(NsolveError):
    """Validation quadrature did not converge."""


class InvariantViolation(NsolveError):
    """A mathematical invariant checked at runtime does not hold."""

    def __init__(self, name: str, detail: str = ""):
        self.name = name
        self.detail = detail
        msg = f"invariant '{name}' violated"
        if detail:
            msg = f"{msg}: {detail}"
        super().__init__(msg)


class DivergentMoment(DomainError):
    """Power moment ∫_0^β r^{p-1-2s} dr requested with p ≤ 2s."""
