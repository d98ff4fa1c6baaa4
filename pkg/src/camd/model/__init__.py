from .config import VARIANTS, ConfigError, ModelConfig
from .network import CamdModel, parameter_shapes
from .complexity import count_params, estimate_flops
from .checkpoint import (
    CheckpointFormatError,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "VARIANTS", "ConfigError", "ModelConfig", "CamdModel", "parameter_shapes",
    "count_params", "estimate_flops", "CheckpointFormatError",
    "load_checkpoint", "save_checkpoint",
]
