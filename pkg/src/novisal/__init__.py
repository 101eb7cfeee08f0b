"""Novelty detection for vision-based steering models.

A steering CNN's saliency masks are reconstructed by an autoencoder
trained under an SSIM (or MSE) objective; inputs whose reconstruction
similarity falls beyond a percentile of the calibration distribution are
flagged as novel.
"""

from .autoencoder import ReconstructionAutoencoder
from .detector import NoveltyVerdict, QuantileNoveltyDetector, empirical_cutoff
from .errors import ConfigError, DataError, NovisalError, NumericalError
from .metrics import SsimParams, mse, ssim_grad_wrt_y, ssim_map, ssim_mean
from .saliency import VisualBackprop, vbp_mask
from .steering import SteeringRegressor
from .synth import WorldSpec, gen_dataset, gen_scene, world_spec

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DataError",
    "NovisalError",
    "NumericalError",
    "NoveltyVerdict",
    "QuantileNoveltyDetector",
    "ReconstructionAutoencoder",
    "SsimParams",
    "SteeringRegressor",
    "VisualBackprop",
    "WorldSpec",
    "empirical_cutoff",
    "gen_dataset",
    "gen_scene",
    "mse",
    "ssim_grad_wrt_y",
    "ssim_map",
    "ssim_mean",
    "vbp_mask",
    "world_spec",
]
