"""All-in-focus photo synthesis from a main/ultra-wide camera pair."""

from .backend import active_backend, set_backend
from .color import (ColorTransform, apply_color_transform, color_align,
                    fit_color_transform)
from .config import PipelineConfig
from .errors import EstimationFailedError, InvalidArgumentError
from .flow import FlowField, consistency_map, estimate_flow, warp_by_flow
from .fusion import (FusionMaskTriple, compute_fusion_masks, focus_measure,
                     fuse_aif, fuse_multifocus, refine_occluded)
from .image import Image, read_png, write_png
from .metrics import evaluate_dataset, psnr, ssim
from .pipeline import FuseResult, fuse_pair, synth_gt_pair
from .registration import (Homography, Keypoint, detect_keypoints,
                           estimate_homography_ransac, match_descriptors,
                           warp_homography)
from .resample import resize_bilinear, warp_bilinear
from .wavelet import WaveletBands, dwt2, idwt2

__version__ = "0.1.0"

__all__ = [
    "ColorTransform",
    "EstimationFailedError",
    "FlowField",
    "FuseResult",
    "FusionMaskTriple",
    "Homography",
    "Image",
    "InvalidArgumentError",
    "Keypoint",
    "PipelineConfig",
    "WaveletBands",
    "active_backend",
    "apply_color_transform",
    "color_align",
    "compute_fusion_masks",
    "consistency_map",
    "detect_keypoints",
    "dwt2",
    "estimate_flow",
    "estimate_homography_ransac",
    "evaluate_dataset",
    "fit_color_transform",
    "focus_measure",
    "fuse_aif",
    "fuse_multifocus",
    "fuse_pair",
    "idwt2",
    "match_descriptors",
    "psnr",
    "read_png",
    "refine_occluded",
    "resize_bilinear",
    "set_backend",
    "ssim",
    "synth_gt_pair",
    "warp_bilinear",
    "warp_by_flow",
    "warp_homography",
    "write_png",
]
