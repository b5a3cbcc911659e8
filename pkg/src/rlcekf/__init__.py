"""Quaternion EKF attitude estimation with a learned residual-gain correction."""

from .baselines import CfState, cf_step, gyro_integrate_step, run_cf, run_gyro
from .ekf import (EkfParams, FilterState, Innovation, correct, initial_state, measurement_jacobian,
                  measurement_model, normalize_with_jacobian, predict, process_jacobians, run_ekf)
from .errors import (ConfigurationError, CorrectionError, DataError, FilterDivergenceError, NumericalError,
                     PolicyFormatError, RlcEkfError, SchemaError, TrainingError)
from .imu_sim import (EpisodeRecord, MeasurementFrame, NoiseModel, SimConfig, integrate_truth,
                      sample_initial_quaternion, simulate_episode, synthesize_measurements)

__version__ = "0.1.0"
