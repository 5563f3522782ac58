"""
Exception types for powgame.

Every error derives from a builtin (ValueError or RuntimeError) so callers
can keep catching the builtin family; the CLI maps each class to an exit code.
"""

from typing import Optional


class ConfigError(ValueError):
    """Malformed or invalid configuration file, section or override."""


class ParameterError(ValueError):
    """A library precondition was violated (bad parameters, bad ranges)."""


class InfeasibleControllerError(ParameterError):
    """Controller design inputs admit no stabilizing gain/switch pair."""


class IntegrationError(RuntimeError):
    """Numerical integration produced a non-finite value."""


class StepLimitError(IntegrationError):
    """Requested horizon needs more steps than the configured limit."""


class SweepError(IntegrationError):
    """A quasi-static sweep leg failed to settle."""

    def __init__(self, message: str, leg: int, reward: float,
                 last_state: Optional[float] = None):
        super().__init__(message)
        self.leg = leg
        self.reward = reward
        self.last_state = last_state


class PopulationConfigError(ConfigError):
    """Imitation normalization is smaller than an observed utility gap."""
