"""Constant-negative-curvature conformal metrics with prescribed conical
and cusp singularities, on the plane (genus 0) and on rectangular tori
(genus 1)."""

__version__ = "0.1.0"

from .errors import (
    CoincidentSources,
    ConfigError,
    EvaluationAtSingularity,
    InvalidGrid,
    InvalidWeight,
    LiouvilleError,
    NoConvergence,
    NonFiniteIterate,
    ParabolicMassExcess,
    QuadratureFailure,
    RBoundViolation,
    TopologyViolation,
)
from .model import (
    EllipticSource,
    ParabolicSource,
    ScalarField,
    SolverSettings,
    SourceConfiguration,
    config_from_dict,
    field_integral,
    load_config,
    target_beta_mass,
    validate_topology,
)

__all__ = [
    "__version__",
    "EllipticSource",
    "ParabolicSource",
    "ScalarField",
    "SolverSettings",
    "SourceConfiguration",
    "config_from_dict",
    "field_integral",
    "load_config",
    "target_beta_mass",
    "validate_topology",
    "LiouvilleError",
    "ConfigError",
    "TopologyViolation",
    "InvalidWeight",
    "InvalidGrid",
    "CoincidentSources",
    "ParabolicMassExcess",
    "QuadratureFailure",
    "RBoundViolation",
    "NonFiniteIterate",
    "EvaluationAtSingularity",
    "NoConvergence",
]
