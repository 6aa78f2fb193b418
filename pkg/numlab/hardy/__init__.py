# Copyright (c) numlab-hardy contributors. All rights reserved.
# Licensed under the MIT License.

from ._abc import DistanceFields, FermiChart, Scenario
from ._expressions import ScalarField
from ._flat_slab import FlatSlab
from ._sphere import BallEquator, ParametricCurveOnSphere
from .meta import ScenarioKind, get_scenario_registry
from .errors import (HardyError, ConfigError, GeometryError, CollarError,
                     ChartError, WeightError, WeightHypothesisError,
                     ConstructionError, DomainError, StencilError,
                     DiscretizationError, SolverError, ConvergenceError,
                     IndefiniteOperatorError, ThresholdError,
                     VerificationError)
from .geometry import (CollarPoint, ExpansionReport, MetricReport,
                       check_distance_expansions, eval_collar_point,
                       fermi_map, ladder_samples, metric_components)
from .weights import (AttainmentResult, NormalizedWeights, ValidationReport,
                      Verdict, WeightTriple, attainment_integral,
                      normalize_p, validate_weights)
from .constructions import (CollarConstants, ExponentFields, GroundStateSpec,
                            OperatorSpec, SignReport, certify_beta,
                            check_log_supersolution, check_subsolution,
                            check_supersolution, collar_constants,
                            concentration_upper_bound, delta_w_envelope,
                            eval_w, exponent_fields,
                            flat_ground_state_residual, laplacian_fd,
                            log_power, operator_apply,
                            subsolution_mass_lower_bound)
from .discretization import (GradedGrid, MassMode, SparseOperator,
                             assemble_singular_mass, assemble_stiffness,
                             build_grid, rayleigh_quotient)
from .solver import (DiscreteProblem, MuCurve, MuResult, ThresholdResult,
                     find_threshold, local_hardy_check, min_rayleigh,
                     mu_curve)
from .config import ExperimentConfig

# Import scenario implementations to register them
from . import _flat_slab  # NoQA
from . import _sphere  # NoQA


__all__ = (
    # Functions
    'get_scenario_registry',

    # Scenarios.
    'BallEquator',
    'DistanceFields',
    'FermiChart',
    'FlatSlab',
    'ParametricCurveOnSphere',
    'Scenario',
    'ScenarioKind',

    # Geometry
    'CollarPoint',
    'ExpansionReport',
    'MetricReport',
    'check_distance_expansions',
    'eval_collar_point',
    'fermi_map',
    'ladder_samples',
    'metric_components',

    # Weights
    'AttainmentResult',
    'NormalizedWeights',
    'ScalarField',
    'ValidationReport',
    'Verdict',
    'WeightTriple',
    'attainment_integral',
    'normalize_p',
    'validate_weights',

    # Constructions
    'CollarConstants',
    'ExponentFields',
    'GroundStateSpec',
    'OperatorSpec',
    'SignReport',
    'certify_beta',
    'check_log_supersolution',
    'check_subsolution',
    'check_supersolution',
    'collar_constants',
    'concentration_upper_bound',
    'delta_w_envelope',
    'eval_w',
    'exponent_fields',
    'flat_ground_state_residual',
    'laplacian_fd',
    'log_power',
    'operator_apply',
    'subsolution_mass_lower_bound',

    # Discretization and solver
    'DiscreteProblem',
    'GradedGrid',
    'MassMode',
    'MuCurve',
    'MuResult',
    'SparseOperator',
    'ThresholdResult',
    'assemble_singular_mass',
    'assemble_stiffness',
    'build_grid',
    'find_threshold',
    'local_hardy_check',
    'min_rayleigh',
    'mu_curve',
    'rayleigh_quotient',

    # Configuration
    'ExperimentConfig',

    # Errors
    'ChartError',
    'CollarError',
    'ConfigError',
    'ConstructionError',
    'ConvergenceError',
    'DiscretizationError',
    'DomainError',
    'GeometryError',
    'HardyError',
    'IndefiniteOperatorError',
    'SolverError',
    'StencilError',
    'ThresholdError',
    'VerificationError',
    'WeightError',
    'WeightHypothesisError',
)

__version__ = '0.1.0'
