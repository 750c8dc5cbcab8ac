from .kernels import BACKEND as KERNEL_BACKEND
from .model import (
    AdamState,
    GnnConfig,
    TrainReport,
    adam_step,
    backward,
    forward,
    init_params,
    load_checkpoint,
    mse_loss,
    prepare,
    save_checkpoint,
    train,
)

__all__ = [
    "AdamState", "GnnConfig", "TrainReport", "adam_step", "backward",
    "forward", "init_params", "load_checkpoint", "mse_loss", "prepare",
    "save_checkpoint", "train", "KERNEL_BACKEND",
]
