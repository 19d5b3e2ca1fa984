"""Covariance-generalized matching component analysis.

Closed-form training of affine maps from two matched data domains into a
common domain under a prescribed covariance constraint, least-squares
recovery of preimages, and an image corruption/recovery evaluation
pipeline with CSV/JSON/PGM reporting.
"""

__version__ = "0.1.0"

from .errors import FeasibilityError, IdxFormatError, NotPsdError
from .imaging import (
    DigitSplit,
    ImageSet,
    SsimScore,
    corrupt,
    filter_pipeline,
    median_denoise,
    rank_t_covariance,
    read_idx,
    split_digit,
    ssim,
    wiener_denoise,
)
from .invert import InversionResult, invert_map, recover_preimage
from .linalg import (
    FullSvd,
    PsdFactor,
    ThinSvd,
    diag_embed,
    full_svd,
    psd_factor,
    thin_svd,
)
from .train import (
    AffineMap,
    DataSet,
    FeasibilityVerdict,
    PrescribedCovariance,
    SampleStats,
    TraceSolution,
    apply_map,
    build_maps,
    check_feasibility,
    sample_stats,
    solve_trace,
    train_cgmca,
    train_mca,
)

__all__ = [
    "AffineMap",
    "DataSet",
    "DigitSplit",
    "FeasibilityError",
    "FeasibilityVerdict",
    "FullSvd",
    "IdxFormatError",
    "ImageSet",
    "InversionResult",
    "NotPsdError",
    "PrescribedCovariance",
    "PsdFactor",
    "SampleStats",
    "SsimScore",
    "ThinSvd",
    "TraceSolution",
    "apply_map",
    "build_maps",
    "check_feasibility",
    "corrupt",
    "diag_embed",
    "filter_pipeline",
    "full_svd",
    "invert_map",
    "median_denoise",
    "psd_factor",
    "rank_t_covariance",
    "read_idx",
    "recover_preimage",
    "sample_stats",
    "solve_trace",
    "split_digit",
    "ssim",
    "thin_svd",
    "train_cgmca",
    "train_mca",
    "wiener_denoise",
]
