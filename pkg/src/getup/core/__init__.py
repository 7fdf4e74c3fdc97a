"""Dense-tensor substrate: tensors, reverse-mode gradients, layers, checkpoints."""

from . import ops
from .layers import MLP, Conv2d, Linear
from .tensor import Parameter, ParameterStore, Tensor, as_tensor, backward, no_grad

__all__ = [
    "ops",
    "Tensor",
    "Parameter",
    "ParameterStore",
    "as_tensor",
    "backward",
    "no_grad",
    "Linear",
    "MLP",
    "Conv2d",
]
