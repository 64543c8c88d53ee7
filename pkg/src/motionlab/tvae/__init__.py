from .model import GLMI_VARIANTS, VARIANTS, Action2MotionModel, StepState
from .sample import (
    GeneratedMotion,
    generate,
    generate_batch,
    interpolate,
    outpaint,
    transition,
)
from .train import (
    EpochStats,
    LossTerms,
    TrainConfig,
    elbo_loss,
    kl_per_sample,
    recon_per_sample,
    train,
)
