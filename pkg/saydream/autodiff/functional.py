from typing import Optional, Sequence, Tuple, Union
import numpy as np
from saydream.autodiff import ops
from saydream.autodiff.tensor import Tensor, as_tensor

IntOrTuple = Union[int, Tuple[int, ...]]


def _tuple(value: IntOrTuple, nd: int) -> Tuple[int, ...]:
    if (isinstance(value, int)):
        return (value,) * nd
    return tuple(value)


def _add_bias(out: Tensor, bias: Optional[Tensor], nd: int) -> Tensor:
    if (bias is None):
        return out
    return out + bias.reshape((1, -1) + (1,) * nd)


def conv2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: IntOrTuple = 1, padding: IntOrTuple = 0) -> Tensor:
    out = ops.ConvNd.apply(x, weight, stride=_tuple(stride, 2),
                           padding=_tuple(padding, 2))
    return _add_bias(out, bias, 2)


def conv3d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
           stride: IntOrTuple = 1, padding: IntOrTuple = 0) -> Tensor:
    out = ops.ConvNd.apply(x, weight, stride=_tuple(stride, 3),
                           padding=_tuple(padding, 3))
    return _add_bias(out, bias, 3)


def conv_transpose2d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
                     stride: IntOrTuple = 1,
                     padding: IntOrTuple = 0) -> Tensor:
    out = ops.ConvTransposeNd.apply(x, weight, stride=_tuple(stride, 2),
                                    padding=_tuple(padding, 2))
    return _add_bias(out, bias, 2)


def conv_transpose3d(x: Tensor, weight: Tensor, bias: Optional[Tensor] = None,
                     stride: IntOrTuple = 1,
                     padding: IntOrTuple = 0) -> Tensor:
    out = ops.ConvTransposeNd.apply(x, weight, stride=_tuple(stride, 3),
                                    padding=_tuple(padding, 3))
    return _add_bias(out, bias, 3)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    return ops.Concat.apply(*tensors, axis=axis)


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    expanded = []
    for t in tensors:
        shape = list(t.shape)
        shape.insert(axis % (t.ndim + 1), 1)
        expanded.append(t.reshape(tuple(shape)))
    return concat(expanded, axis=axis)


def layer_norm(x: Tensor, weight: Optional[Tensor] = None,
               bias: Optional[Tensor] = None, eps: float = 1e-5) -> Tensor:
    out = ops.LayerNorm.apply(x, eps=eps)
    if (weight is not None):
        out = out * weight
    if (bias is not None):
        out = out + bias
    return out


def attention(q: Tensor, k: Tensor, v: Tensor) -> Tensor:
    return ops.Attention.apply(q, k, v)


def embedding(weight: Tensor, indices: np.ndarray) -> Tensor:
    return ops.Embedding.apply(weight, indices=np.asarray(indices))


def mse(a: Tensor, b: Union[Tensor, np.ndarray]) -> Tensor:
    return ops.MSE.apply(a, as_tensor(b))
