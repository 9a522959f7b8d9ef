from __future__ import annotations

from typing import Any


class MongeLabError(Exception):
    exit_code = 1


class ConfigError(MongeLabError):
    """Invalid configuration or a violated operation precondition."""

    exit_code = 2


class NonDifferentiableNormError(ConfigError):
    def __init__(self, message: str, subgradient: Any = None) -> None:
        super().__init__(message)
        self.subgradient = subgradient


class EquidistanceError(ConfigError):
    pass


class NumericalError(MongeLabError):
    exit_code = 3


class InfeasibleError(NumericalError):
    pass


class ZeroMassError(NumericalError):
    pass


class IterationLimitError(NumericalError):
    pass
