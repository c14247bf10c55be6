"""Encoder-decoder transformer with word-level domain mixing."""
from .checkpoint import load_arrays, load_model, save_arrays, save_model
from .loss import CompositeLoss, composite_loss, generation_loss, mixing_loss
from .mixing import DomainProportionLayer, Linear, MixedLinear, domain_proportion, mixed_transform
from .transformer import (
    BOS, EOS, PAD, UNK, Batch, MixTransformer, ModelConfig, forward, parameter_count_formula,
)

__all__ = [
    "BOS", "EOS", "PAD", "UNK", "Batch", "CompositeLoss", "DomainProportionLayer", "Linear",
    "MixTransformer", "MixedLinear", "ModelConfig", "composite_loss", "domain_proportion", "forward",
    "generation_loss", "load_arrays", "load_model", "mixed_transform", "mixing_loss",
    "parameter_count_formula", "save_arrays", "save_model",
]
