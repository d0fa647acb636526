"""Discrete-time adaptive observer with covariance-resetting least squares."""
from .config import ConfigError, RunConfig, load_config, parse_config, preset_names
from .estimator import (BatchLeastSquares, EstimatorConfig, EstimatorError, EstimatorState,
                        batch_ls_oracle, covariance_spectrum, init_estimator, rls_step)
from .excitation import (GramAccumulator, InputProfile, classify_excitation, generate_input,
                         pe_metric, pe_trend)
from .filter_bank import (FilterBankState, advance_filters, assemble_S, build_F,
                          snapshot_regressor)
from .lti_model import (Dimensions, DimensionError, ParameterVector, SystemRealization,
                        TransferFunctionSpec, is_schur_stable, markov_parameters,
                        pack_parameters, realization_from_matrices,
                        realize_observable_canonical, simulate_step, spectral_radius,
                        unpack_parameters)
from .observer import OverflowGuardTripped, ObserverState, observer_init, observer_step
from .runner import audit_identities, compare_estimators, run_experiment, write_outputs

__version__ = "0.1.0"
