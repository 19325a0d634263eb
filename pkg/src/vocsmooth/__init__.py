"""Structure-preserving smoothing operators, metrics and dataset tooling."""

__version__ = "0.1.0"

from .contrastive import ContrastiveConfig, FilterBank, contrastive_loss, extract_features, gram, load_features, save_features
from .dataset import blend_texture, build_manifest, read_manifest, screen_candidates, select_ground_truth
from .errors import FeatureFormatError, FeatureTruncatedError, ImageDecodeError, NumericalError, VocSmoothError
from .imaging import box_filter, gaussian_filter, load_image, save_image, sobel_edges
from .losses import LossWeights, dtv_loss, edge_loss, reconstruction_loss, seg_cross_entropy, total_loss
from .metrics import WindowSpec, multiscale_pooled_ssim, psnr, smooth_test, smooth_value, ssim
from .smoothing import OPERATORS, PRESETS, OperatorSpec, bilateral, guided, l0_smooth, resolve, rolling_guidance, rtv

__all__ = [
    "ContrastiveConfig", "FilterBank", "contrastive_loss", "extract_features", "gram", "load_features",
    "save_features", "blend_texture", "build_manifest", "read_manifest", "screen_candidates",
    "select_ground_truth", "FeatureFormatError", "FeatureTruncatedError", "ImageDecodeError", "NumericalError",
    "VocSmoothError", "box_filter", "gaussian_filter", "load_image", "save_image", "sobel_edges", "LossWeights",
    "dtv_loss", "edge_loss", "reconstruction_loss", "seg_cross_entropy", "total_loss", "WindowSpec",
    "multiscale_pooled_ssim", "psnr", "smooth_test", "smooth_value", "ssim", "OPERATORS", "PRESETS",
    "OperatorSpec", "bilateral", "guided", "l0_smooth", "resolve", "rolling_guidance", "rtv",
]
