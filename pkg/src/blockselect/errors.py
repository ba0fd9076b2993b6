"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: parse/config problems -> 2,
infeasible models or parameters -> 3, numerical failures -> 4.
"""


class BlockselectError(Exception):
    """Base class for all package-specific errors."""


class EdgeListParseError(BlockselectError, ValueError):
    """Malformed edge-list input; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigError(BlockselectError, ValueError):
    """Invalid experiment configuration (bad field, missing section, ...)."""


class InfeasibleModelError(BlockselectError, ValueError):
    """Requested parameters cannot produce a valid model.

    Examples: a density target that would push probabilities above 1,
    K^2 > n for the PABM embedding, n not divisible by K for the PABM
    generator.
    """


class DegenerateModelError(InfeasibleModelError):
    """A fitted model is degenerate for the given data, e.g. a community
    with zero total degree under the degree-corrected fit."""


class NumericalError(BlockselectError, RuntimeError):
    """Internal numerical failure (eigensolver breakdown, bootstrap
    replicates exhausted, ...)."""
