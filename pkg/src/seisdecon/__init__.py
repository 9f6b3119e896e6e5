"""Sparse seismic deconvolution: proximal-gradient baselines and a loop-unrolled
network with a learned CNN proximal operator."""

from .errors import (ConfigError, DivergedError, FormatError, InvalidArgumentError,
                     InvalidStateError, NumericError, UndefinedMetricError,
                     UnsupportedVersionError)
from .forward import ConvOperator, NoiseSpec, Wavelet, build_operator, corrupt, make_ricker
from .metrics import MetricsReport, correlation, measured_snr, mse, quality
from .solvers import SolverConfig, SolveReport, lipschitz, soft_threshold, solve
from .synthetic import (DatasetRecord, ReflectivitySpec, denormalize, make_dataset,
                        sample_reflectivity)
from .unrolled import ModelConfig, TrainConfig, UnrolledModel, evaluate, train

__version__ = "0.1.0"
