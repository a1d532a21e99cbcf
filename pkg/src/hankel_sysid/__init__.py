"""Finite-sample identification of discrete LTI systems from a single trajectory."""
from .errors import ConfigError, DomainError, NumericalError, SysIdError, UnstableModelError
from .lti import (
    BlockMatrix, GramianPair, StateSpaceModel, balanced_realization, balanced_truncate,
    build_hankel, build_toeplitz, delta_plus, frequency_response, gramians,
    hankel_singular_values, hinf_norm, markov_parameters, noise_to_signal, padded_diff_norm,
    solve_discrete_lyapunov, tail_horizon, transfer_function,
)
from .ols import HankelEstimate, build_regression, covariance_condition, estimate_hankel
from .realize import ModelDistance, RealizedModel, aligned_param_error, compare_models, hankel2sys
from .selection import (
    SelectionConfig, SelectionTrace, candidate_set, choose_d, choose_k, estimate_delta_plus,
)
from .simulate import (
    NoiseSpec, Trajectory, fixture_example1, fixture_fir, fixture_lowerbound,
    random_stable_model, simulate,
)

__version__ = "0.1.0"
