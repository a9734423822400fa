"""Minimum-norm least squares with exact leave-out, column-split and inference shortcuts."""

from .colops import (
    ColSplit,
    ate_estimate,
    cochran,
    fwl_matrix_identity_check,
    omitted_variable_bias,
    partial_regularized,
    partial_variance_estimators,
)
from .errors import (
    AssumptionViolated,
    ConstantTreatment,
    InvalidInput,
    LemmaConditionsNotMet,
    LeverageOne,
    NotAValidInverse,
    NumericalFailure,
    OlsInterpError,
    RaggedRow,
    RegimeMismatch,
    SingularSubmatrix,
    ZeroDegreesOfFreedom,
)
from .estimator import Design, FitResult, Regime, fit, fit_gls, predict
from .inference import (
    GaussMarkovModel,
    beta_moments,
    gauss_markov_compare,
    prediction_ci,
    sigma2_hat,
    sigma2_hat_expectation,
)
from .linalg import Tolerance, gram_inverse, pinv, pinv_rank_one_downdate, proj_colspace, quantile_hat
from .rowops import (
    PredictionInterval,
    RowSubset,
    fit_subset,
    fit_subset_complement_form,
    jackknife,
    jackknife_interval,
    jackknife_plus_interval,
    loo_beta,
    loo_predictions,
    loo_residuals,
    online_update,
    press,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
