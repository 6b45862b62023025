from .fidelity import PSNR_EXACT, hf_energy, psnr, ssim
from .patchstats import frechet_gaussian, patch_stat_distance
from .report import METRIC_NAMES, EvalReport, collapse_stats, eval_matrix, frame_difference_profile

__all__ = [
    "psnr", "ssim", "hf_energy", "PSNR_EXACT",
    "patch_stat_distance", "frechet_gaussian",
    "EvalReport", "eval_matrix", "collapse_stats", "frame_difference_profile", "METRIC_NAMES",
]
