"""Expected-weighted D-optimal designs for GLMs and multinomial logistic models.

Typical use::

    from ewdesign import (DesignRegion, GlmModel, Predictors, ParameterEnsemble,
                          Normal, ExpectedInfo, forlion_run)

    region = DesignRegion(((-2, 2), (-1, 1)))
    model = GlmModel("logit", Predictors.linear(2))
    ens = ParameterEnsemble.from_prior([Normal(0, 1)] * 3, mc_size=10_000, seed=1)
    result = forlion_run(ExpectedInfo(model, ens), region)
"""

from __future__ import annotations

__version__ = "0.1.0"

from .core import ApproximateDesign, DesignRegion, ExactDesign, det, distance, inverse, logdet
from .errors import (AllDrawsInfeasible, AllPointsDropped, ConfigError, DegenerateProfile, DimensionMismatch,
                     EWDesignError, InfeasibleParameters, MaxIterExceeded, ReferenceSingular, SingularMatrix,
                     SingularStart)
from .evaluate import (EfficiencyReport, LocalOptimumCache, VerifyReport, five_number, frequency_bins,
                       per_theta_objective, relative_efficiency, robustness_study, verify_design)
from .expectation import (ExpectedInfo, Normal, ParameterEnsemble, Uniform, design_info, ew_objective,
                          expected_point_info, log_ew_objective)
from .forlion import (ForLionConfig, ForLionResult, SearchResult, Sensitivity, forlion_run, merge_step,
                      new_point_search, sensitivity)
from .liftone import LiftOneProfile, lift_profile, liftone_optimize, maximize_profile
from .models import GlmModel, MlmModel, glm_nu, glm_nu_prime, mlm_pi
from .predictors import Predictors
from .roots import solve_cubic, solve_quadratic, solve_quartic
from .rounding import RoundingConfig, greedy_unit_assign, round_design

__all__ = [
    "AllDrawsInfeasible",
    "AllPointsDropped",
    "ApproximateDesign",
    "ConfigError",
    "DegenerateProfile",
    "design_info",
    "DesignRegion",
    "det",
    "DimensionMismatch",
    "distance",
    "EfficiencyReport",
    "ew_objective",
    "EWDesignError",
    "ExactDesign",
    "expected_point_info",
    "ExpectedInfo",
    "five_number",
    "forlion_run",
    "ForLionConfig",
    "ForLionResult",
    "frequency_bins",
    "glm_nu",
    "glm_nu_prime",
    "GlmModel",
    "greedy_unit_assign",
    "InfeasibleParameters",
    "inverse",
    "lift_profile",
    "liftone_optimize",
    "LiftOneProfile",
    "LocalOptimumCache",
    "log_ew_objective",
    "logdet",
    "maximize_profile",
    "MaxIterExceeded",
    "merge_step",
    "mlm_pi",
    "MlmModel",
    "new_point_search",
    "Normal",
    "ParameterEnsemble",
    "per_theta_objective",
    "Predictors",
    "ReferenceSingular",
    "relative_efficiency",
    "robustness_study",
    "round_design",
    "RoundingConfig",
    "SearchResult",
    "Sensitivity",
    "sensitivity",
    "SingularMatrix",
    "SingularStart",
    "solve_cubic",
    "solve_quadratic",
    "solve_quartic",
    "Uniform",
    "verify_design",
    "VerifyReport",
    "__version__",
]
