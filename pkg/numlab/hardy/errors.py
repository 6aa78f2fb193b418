# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

import typing


class HardyError(Exception):
    """Base exception of the weighted Hardy laboratory.
    """
    pass


class ConfigError(HardyError):
    """Invalid experiment configuration.

    The offending JSON field path is kept in ``field`` and, for syntax errors,
    the line number in ``line``.
    """

    def __init__(self, message: str, *,
                 field: typing.Optional[str] = None,
                 line: typing.Optional[int] = None) -> None:
        prefix = ''
        if field is not None:
            prefix = f'{field}: '
        if line is not None:
            prefix = f'line {line}: {prefix}'
        super().__init__(f'{prefix}{message}')
        self.field = field
        self.line = line


class GeometryError(HardyError):
    """Distance or chart evaluation failed."""
    pass


class CollarError(GeometryError):
    """A point lies outside the collar {δ̃ < β}."""

    def __init__(self, message: str, *,
                 delta_tilde: float, beta: float) -> None:
        super().__init__(message)
        self.delta_tilde = delta_tilde
        self.beta = beta


class ChartError(GeometryError):
    """Chart coordinates (or a finite-difference stencil) leave the chart."""
    pass


class WeightError(HardyError):
    """A weight expression could not be parsed or differentiated."""
    pass


class WeightHypothesisError(WeightError):
    """The weight triple violates a standing hypothesis."""

    def __init__(self, message: str, report: typing.Any = None) -> None:
        super().__init__(message)
        self.report = report


class ConstructionError(HardyError):
    """Evaluation of an explicit construction failed."""
    pass


class DomainError(ConstructionError):
    """Argument outside the domain of X_a or W_{a,M,q}."""
    pass


class StencilError(ConstructionError):
    """A finite-difference stencil leaves the domain or the collar."""
    pass


class DiscretizationError(HardyError):
    """Grid construction or quadrature failed."""
    pass


class SolverError(HardyError):
    """Eigenvalue or threshold computation failed."""
    pass


class ConvergenceError(SolverError):
    """An iteration did not reach its tolerance.

    ``result`` holds the partial result (for instance a MuResult) when one
    is available.
    """

    def __init__(self, message: str, result: typing.Any = None) -> None:
        super().__init__(message)
        self.result = result


class IndefiniteOperatorError(SolverError):
    """The shifted operator is not positive definite."""
    pass


class ThresholdError(SolverError):
    """The plateau could not be certified at this resolution."""
    pass


class VerificationError(HardyError):
    """A verification sweep found violations."""

    def __init__(self, message: str, *,
                 report_path: typing.Optional[str] = None) -> None:
        super().__init__(message)
        self.report_path = report_path
