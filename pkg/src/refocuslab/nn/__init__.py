from .checkpoint import checkpoint_hash, load_checkpoint, save_checkpoint
from .optim import (
    ADAM_LR_DEFAULT,
    EMA_RATE_PAPER,
    EMA_RATE_TOY,
    ParamStore,
    StaleCacheError,
    adam_step,
    create_store,
    denoiser_backward,
    denoiser_forward,
    ema_update,
)
from .tensor import NumericError, check_finite, finite_checks_enabled, set_finite_checks
from .unet import INPUT_COND_ONLY, INPUT_NOISY_PLUS_COND, DenoiserArch, denoiser_apply, denoiser_apply_backward, init_params

__all__ = [
    "DenoiserArch", "INPUT_NOISY_PLUS_COND", "INPUT_COND_ONLY",
    "ParamStore", "create_store", "init_params",
    "denoiser_forward", "denoiser_backward", "denoiser_apply", "denoiser_apply_backward",
    "adam_step", "ema_update", "ADAM_LR_DEFAULT", "EMA_RATE_TOY", "EMA_RATE_PAPER",
    "save_checkpoint", "load_checkpoint", "checkpoint_hash",
    "NumericError", "StaleCacheError", "set_finite_checks", "finite_checks_enabled", "check_finite",
]
