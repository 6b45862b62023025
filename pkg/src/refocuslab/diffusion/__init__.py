from .conditioning import (
    MODE_POSITION,
    MODE_REPLICATED,
    MODE_UNCONDITIONAL,
    MODES,
    ConditioningTensor,
    build_conditioning,
    from_model_domain,
    to_model_domain,
)
from .sample import (
    CFG_WEIGHT_DEFAULT,
    SamplerConfig,
    ancestral_sample,
    cfg_combine,
    regress_stack,
    regress_stack_batch,
    sample_provenance,
    sample_stack,
    sample_stack_ablation,
    sample_stack_batch,
)
from .schedule import BETA_END, BETA_START, T_DEFAULT, NoiseSchedule, q_sample
from .train import (
    TRAIN_MODE_ABLATION,
    TRAIN_MODE_DIFFUSION,
    TRAIN_MODE_REGRESSION,
    TRAIN_MODES,
    TrainConfig,
    draw_conditioning_plan,
    train_regression,
    training_step,
)

__all__ = [
    "NoiseSchedule", "q_sample", "T_DEFAULT", "BETA_START", "BETA_END",
    "ConditioningTensor", "build_conditioning", "MODES",
    "MODE_POSITION", "MODE_REPLICATED", "MODE_UNCONDITIONAL",
    "to_model_domain", "from_model_domain",
    "TrainConfig", "training_step", "train_regression", "draw_conditioning_plan",
    "TRAIN_MODES", "TRAIN_MODE_DIFFUSION", "TRAIN_MODE_ABLATION", "TRAIN_MODE_REGRESSION",
    "SamplerConfig", "cfg_combine", "ancestral_sample", "CFG_WEIGHT_DEFAULT",
    "sample_stack", "sample_stack_ablation", "sample_stack_batch",
    "regress_stack", "regress_stack_batch", "sample_provenance",
]
