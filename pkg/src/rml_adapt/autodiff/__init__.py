"""Reverse-mode differentiation over float64 numpy arrays."""
from . import ops
from .dual import Dual
from .gradcheck import check_gradients, hvp, max_relative_error, numerical_grad
from .tensor import (
    AutodiffError,
    Gradients,
    NonFiniteError,
    ShapeError,
    Tape,
    TapeConsumedError,
    Tensor,
    grad,
    record_forward,
)

__all__ = [
    "AutodiffError", "Dual", "Gradients", "NonFiniteError", "ShapeError", "Tape",
    "TapeConsumedError", "Tensor", "check_gradients", "grad", "hvp", "max_relative_error",
    "numerical_grad", "ops", "record_forward",
]
