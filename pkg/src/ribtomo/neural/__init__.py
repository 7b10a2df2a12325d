from . import tensor
from .gradcheck import finite_difference_check
from .layers import BlockSpec, Conv, ConvNet, ConvNetSpec, load_checkpoint, save_checkpoint
from .optim import AdamState, adam_step, zero_grads
from .tensor import Tensor, backward, l1_loss

__all__ = [
    "tensor",
    "Tensor",
    "backward",
    "l1_loss",
    "BlockSpec",
    "Conv",
    "ConvNet",
    "ConvNetSpec",
    "save_checkpoint",
    "load_checkpoint",
    "AdamState",
    "adam_step",
    "zero_grads",
    "finite_difference_check",
]
