"""Simulation of an adaptive photon-counting QPSK receiver with phase tracking.

The receiver discriminates four coherent states below the heterodyne
limit and, from the same detection data, estimates and feeds forward
the phase offset between signal and local oscillator.
"""

from .calibration import Calibration, calibrate
from .channel import NoiseSpec, NoiseTrajectory, build_trajectory
from .config import ConfigError, ExperimentConfig, figure_catalog, load_config
from .estimator import PhotonHistogram, bayes_estimate, sincos_final, sincos_phi_i
from .harness import run_experiment
from .physics import QPSKSymbol, ReceiverParams, bin_mean, qnl_bpsk, qnl_mpsk, qnl_qpsk
from .receiver import discriminate, error_rate, exact_error_probability
from .tracking import ScenarioResult, quantize, run_ensemble, run_scenario, variance_analysis

__all__ = [
    "Calibration", "calibrate", "NoiseSpec", "NoiseTrajectory", "build_trajectory",
    "ConfigError", "ExperimentConfig", "figure_catalog", "load_config", "PhotonHistogram",
    "bayes_estimate", "sincos_final", "sincos_phi_i", "run_experiment", "QPSKSymbol",
    "ReceiverParams", "bin_mean", "qnl_bpsk", "qnl_mpsk", "qnl_qpsk", "discriminate",
    "error_rate", "exact_error_probability", "ScenarioResult", "quantize", "run_ensemble",
    "run_scenario", "variance_analysis",
]

__version__ = "0.1.0"
