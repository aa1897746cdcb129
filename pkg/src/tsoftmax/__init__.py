"""t-softmax classifiers, a small autodiff core, and OOD evaluation."""
from .errors import (ConfigError, DataFormatError, DimensionError, DomainError,
                     NonFiniteError, TSoftmaxError)
from .tensor import Tape, Tensor, backward

__all__ = [
    "ConfigError", "DataFormatError", "DimensionError", "DomainError", "NonFiniteError",
    "TSoftmaxError", "Tape", "Tensor", "backward",
]
__version__ = "0.1.0"
