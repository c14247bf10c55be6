"""MAML meta-training over curriculum tasks and meta-adaptive fine-tuning."""
from .maml import (
    FT_STRATEGIES, ORDERS, MetaConfig, MetaDivergenceError, MetaLoss, finetune, finetune_corpora,
    inner_update, meta_gradient, meta_step, meta_train, task_loss,
)

__all__ = ["FT_STRATEGIES", "ORDERS", "MetaConfig", "MetaDivergenceError", "MetaLoss", "finetune",
           "finetune_corpora", "inner_update", "meta_gradient", "meta_step", "meta_train", "task_loss"]
