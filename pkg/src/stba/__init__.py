"""Spatial-transform black-box adversarial attack toolkit."""

from .imagecore import (
    LabeledImage,
    frequency_split,
    gaussian_blur3,
    load_cifar10_batch,
    load_png_dir,
    psnr,
    recompose,
    ssim,
)
from .optimizer import (
    AttackConfig,
    AttackResult,
    adversarial_margin_loss,
    nes_gradient,
    run_attack,
    sample_flows,
    total_loss,
)
from .oracle import CountingOracle, HttpOracle, MlpOracle, load_model_spec
from .warp import apply_flow, clip_flow, flow_smoothness_loss
from .harness import CampaignConfig, run_campaign, transfer_check, emit_plot_data

__all__ = [
    "LabeledImage",
    "frequency_split",
    "gaussian_blur3",
    "load_cifar10_batch",
    "load_png_dir",
    "psnr",
    "recompose",
    "ssim",
    "AttackConfig",
    "AttackResult",
    "adversarial_margin_loss",
    "nes_gradient",
    "run_attack",
    "sample_flows",
    "total_loss",
    "CountingOracle",
    "HttpOracle",
    "MlpOracle",
    "load_model_spec",
    "apply_flow",
    "clip_flow",
    "flow_smoothness_loss",
    "CampaignConfig",
    "run_campaign",
    "transfer_check",
    "emit_plot_data",
]

__version__ = "0.1.0"
