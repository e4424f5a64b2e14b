"""Simulation, calibration and reconstruction for separable-mask lensless cameras."""

from . import analysis, calib, config, fileio, optics, recon, seq, sim
from .config import ExperimentConfig, load_config, preset
from .errors import FlatCamError
from .optics import OpticsConfig, build_1d_transfer, build_dense_transfer, build_separable_system
from .recon import SeparableSystem, reconstruct_ls, reconstruct_tikhonov, reconstruct_tv

__version__ = "0.1.0"
