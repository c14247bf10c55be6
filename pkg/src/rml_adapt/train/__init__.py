"""Optimizers and supervised (pre)training loops."""
from .optim import Adam, check_finite_grads, clip_global_norm, sgd_step
from .pretrain import PretrainConfig, batches, pretrain

__all__ = ["Adam", "PretrainConfig", "batches", "check_finite_grads", "clip_global_norm", "pretrain", "sgd_step"]
