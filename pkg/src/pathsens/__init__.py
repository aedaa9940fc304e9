"""Euler-Maruyama pathwise sensitivities for parametric scalar SDEs.

Simulate dS = a(theta, S) dt + b(theta, S) dW together with dS/dtheta and
d2S/dtheta2, and measure how the discrete sensitivities converge.
"""

from .analysis import (LemmaInstance, LevelRecord, MLMCLevel, MomentEstimate, RateFit,
                       closed_form_error_levels, estimate_strong_error, estimate_sup_moment,
                       fit_rate, lemma_trials, loglog_fit, mlmc_variance_table,
                       product_lemma_check, strong_error_levels, sup_moments,
                       time_increment_moments)
from .engine import (PathResult, PathState, SimConfig, em_step, simulate_coupled,
                     simulate_path, simulate_path_jet)
from .errors import (DivergenceError, InsufficientDataError, PathSensError, RegistryError,
                     TooLargeError, UnsupportedOrderError)
from .models import (DerivativeBounds, ModelCoefficients, derivative_bounds, eval_partial,
                     get_model, list_models)
from .paths import IncrementGrid, SeedSpec, coarsen, cumulative, sample_increments
from .oracle import fd_second, fd_tangent, gbm_closed_form
from .taylor import Jet2, jet_apply_coeff, jet_mul

__version__ = "0.1.0"
