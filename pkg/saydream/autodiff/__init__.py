from saydream.autodiff.tensor import Tensor, Function, no_grad, as_tensor
from saydream.autodiff import functional
from saydream.autodiff.nn import Module, Parameter
from saydream.autodiff.optim import Adam, AdamState, adam_step
from saydream.autodiff.gradcheck import finite_diff_check, param_grad_check
from saydream.autodiff.checkpoint import write_checkpoint, read_checkpoint

__all__ = [
    'Tensor',
    'Function',
    'no_grad',
    'as_tensor',
    'functional',
    'Module',
    'Parameter',
    'Adam',
    'AdamState',
    'adam_step',
    'finite_diff_check',
    'param_grad_check',
    'write_checkpoint',
    'read_checkpoint',
]
