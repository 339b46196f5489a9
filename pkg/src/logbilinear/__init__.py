"""Log-bilinear odds-ratio association models for two-way contingency tables.

Fitting, five cross-checked representations of the asymptotic covariance
of the association estimate, Monte Carlo validation, Wald-test power and
sample-size calculations, and conversions from regression coefficients.
"""

__version__ = "0.1.0"

from .asycov import CovarianceBundle, covariance_bundle, sigma_lambda, sigma_theta_projection  # noqa: E402
from .bridge import (  # noqa: E402
    LinearBridgeInput,
    beta_from_theta_linear,
    beta_from_theta_loglinear,
    theta_from_beta_linear,
    theta_from_beta_mvlinear,
)
from .design import (  # noqa: E402
    ContingencyTable,
    DesignSpec,
    ModelMatrices,
    SchemeSpec,
    build_model_matrices,
    check_identifiability,
)
from .errors import (  # noqa: E402
    ConvergenceError,
    DomainError,
    IdentifiabilityError,
    LogBilinearError,
    RouteError,
    SingularBasisError,
    SingularBlockError,
    SingularMatrixError,
)
from .fit import FitResult, expected_table, fit_loglinear, ipf_constrained  # noqa: E402
from .power import (  # noqa: E402
    HypothesisSpec,
    PowerRequest,
    power_at,
    power_curve,
    required_sample_size,
)
from .simulate import MonteCarloReport, SimulationConfig, monte_carlo_cov  # noqa: E402

__all__ = [
    "ContingencyTable", "ConvergenceError", "CovarianceBundle", "DesignSpec", "DomainError",
    "FitResult", "HypothesisSpec", "IdentifiabilityError", "LinearBridgeInput", "LogBilinearError",
    "ModelMatrices", "MonteCarloReport", "PowerRequest", "RouteError", "SchemeSpec",
    "SimulationConfig", "SingularBasisError", "SingularBlockError", "SingularMatrixError",
    "beta_from_theta_linear", "beta_from_theta_loglinear", "build_model_matrices",
    "check_identifiability", "covariance_bundle", "expected_table", "fit_loglinear",
    "ipf_constrained", "monte_carlo_cov", "power_at", "power_curve", "required_sample_size",
    "sigma_lambda", "sigma_theta_projection", "theta_from_beta_linear", "theta_from_beta_mvlinear",
]
