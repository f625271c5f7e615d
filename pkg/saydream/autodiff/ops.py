"""
Differentiable operations. Each operation is a `Function` subclass working
on raw float64 numpy arrays; `Tensor` methods and the helpers in
`saydream.autodiff.functional` are the public entry points.
"""
import itertools
import math
from typing import Any, Optional, Sequence, Tuple, Union
import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from saydream.autodiff.tensor import Function
from saydream.errors import ShapeError

Axis = Optional[Union[int, Tuple[int, ...]]]


def _check_broadcast(op: str, x: np.ndarray, y: np.ndarray) -> None:
    try:
        np.broadcast_shapes(x.shape, y.shape)
    except ValueError:
        raise ShapeError(op, x.shape, y.shape)


class Add(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        _check_broadcast('add', x, y)
        self.shapes = (x.shape, y.shape)
        return x + y

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (self.unbroadcast(grad, self.shapes[0]),
                self.unbroadcast(grad, self.shapes[1]))


class Sub(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        _check_broadcast('sub', x, y)
        self.shapes = (x.shape, y.shape)
        return x - y

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (self.unbroadcast(grad, self.shapes[0]),
                self.unbroadcast(-grad, self.shapes[1]))


class Mul(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        _check_broadcast('mul', x, y)
        self.x, self.y = x, y
        return x * y

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return (self.unbroadcast(grad * self.y, self.x.shape),
                self.unbroadcast(grad * self.x, self.y.shape))


class Div(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        _check_broadcast('div', x, y)
        self.x, self.y = x, y
        return x / y

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        gx = grad / self.y
        gy = -grad * self.x / (self.y * self.y)
        return (self.unbroadcast(gx, self.x.shape),
                self.unbroadcast(gy, self.y.shape))


class Neg(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        return -x

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return -grad


class PowScalar(Function):
    def forward(self, x: np.ndarray, exponent: float) -> np.ndarray:
        self.x, self.exponent = x, exponent
        return x ** exponent

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self.exponent * self.x ** (self.exponent - 1)


class Exp(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.exp(x)
        return self.out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self.out


class Log(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        with np.errstate(divide='ignore', invalid='ignore'):
            return np.log(x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad / self.x


class MatMul(Function):
    def forward(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        if (x.ndim < 2 or y.ndim < 2 or x.shape[-1] != y.shape[-2]):
            raise ShapeError('matmul', x.shape, y.shape)
        try:
            np.broadcast_shapes(x.shape[:-2], y.shape[:-2])
        except ValueError:
            raise ShapeError('matmul', x.shape, y.shape, 'batch dims')
        self.x, self.y = x, y
        return np.matmul(x, y)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        gx = np.matmul(grad, np.swapaxes(self.y, -1, -2))
        gy = np.matmul(np.swapaxes(self.x, -1, -2), grad)
        return (self.unbroadcast(gx, self.x.shape),
                self.unbroadcast(gy, self.y.shape))


class Reshape(Function):
    def forward(self, x: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        self.in_shape = x.shape
        try:
            return x.reshape(shape)
        except ValueError:
            raise ShapeError('reshape', x.shape, shape)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad.reshape(self.in_shape)


class Transpose(Function):
    def forward(self, x: np.ndarray, axes: Tuple[int, ...]) -> np.ndarray:
        if (sorted(a % max(x.ndim, 1) for a in axes) != list(range(x.ndim))):
            raise ShapeError('transpose', x.shape, axes, 'invalid axes')
        self.axes = axes
        return np.transpose(x, axes)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.transpose(grad, np.argsort(self.axes))


class Concat(Function):
    def forward(self, *xs: np.ndarray, axis: int = 0) -> np.ndarray:
        ref = xs[0]
        for x in xs[1:]:
            if (x.ndim != ref.ndim or any(a != b for i, (a, b) in
                                          enumerate(zip(x.shape, ref.shape))
                                          if i != axis % ref.ndim)):
                raise ShapeError('concat', ref.shape, x.shape)
        self.axis = axis
        self.splits = np.cumsum([x.shape[axis] for x in xs])[:-1]
        return np.concatenate(xs, axis=axis)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        return tuple(np.split(grad, self.splits, axis=self.axis))


class Slice(Function):
    def forward(self, x: np.ndarray, index: Any) -> np.ndarray:
        self.in_shape = x.shape
        self.index = index
        try:
            return np.array(x[index])
        except IndexError:
            raise ShapeError('slice', x.shape, (), f'bad index {index!r}')

    def backward(self, grad: np.ndarray) -> np.ndarray:
        out = np.zeros(self.in_shape)
        np.add.at(out, self.index, grad)
        return out


class Sum(Function):
    def forward(self, x: np.ndarray, axis: Axis = None,
                keepdims: bool = False) -> np.ndarray:
        self.in_shape, self.axis, self.keepdims = x.shape, axis, keepdims
        return np.sum(x, axis=axis, keepdims=keepdims)

    def _expand(self, grad: np.ndarray) -> np.ndarray:
        if (self.axis is not None and not self.keepdims):
            axes = (self.axis,) if isinstance(self.axis, int) else self.axis
            for a in sorted(ax % len(self.in_shape) for ax in axes):
                grad = np.expand_dims(grad, a)
        return np.broadcast_to(grad, self.in_shape)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return np.array(self._expand(grad))


class Mean(Sum):
    def forward(self, x: np.ndarray, axis: Axis = None,
                keepdims: bool = False) -> np.ndarray:
        out = super().forward(x, axis=axis, keepdims=keepdims)
        self.count = x.size // max(out.size, 1) if x.size else 1
        return out / self.count

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return self._expand(grad) / self.count


class ReLU(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.mask = x > 0
        return np.where(self.mask, x, 0.0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self.mask


_GELU_C = math.sqrt(2.0 / math.pi)
_GELU_A = 0.044715


class GELU(Function):
    """Tanh approximation of the Gaussian error linear unit."""
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.x = x
        self.t = np.tanh(_GELU_C * (x + _GELU_A * x ** 3))
        return 0.5 * x * (1.0 + self.t)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x, t = self.x, self.t
        du = _GELU_C * (1.0 + 3.0 * _GELU_A * x * x)
        return grad * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du)


class Sigmoid(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = 0.5 * (1.0 + np.tanh(0.5 * x))
        return self.out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self.out * (1.0 - self.out)


class Tanh(Function):
    def forward(self, x: np.ndarray) -> np.ndarray:
        self.out = np.tanh(x)
        return self.out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * (1.0 - self.out * self.out)


def _softmax(x: np.ndarray, axis: int) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


class Softmax(Function):
    def forward(self, x: np.ndarray, axis: int = -1) -> np.ndarray:
        self.axis = axis
        self.out = _softmax(x, axis)
        return self.out

    def backward(self, grad: np.ndarray) -> np.ndarray:
        s = self.out
        return s * (grad - np.sum(grad * s, axis=self.axis, keepdims=True))


class Clamp(Function):
    def forward(self, x: np.ndarray, low: float, high: float) -> np.ndarray:
        self.mask = (x >= low) & (x <= high)
        return np.clip(x, low, high)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return grad * self.mask


class LayerNorm(Function):
    """Normalization over the last axis, without affine parameters."""
    def forward(self, x: np.ndarray, eps: float = 1e-5) -> np.ndarray:
        mu = x.mean(axis=-1, keepdims=True)
        var = x.var(axis=-1, keepdims=True)
        self.inv = 1.0 / np.sqrt(var + eps)
        self.y = (x - mu) * self.inv
        return self.y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        y = self.y
        return self.inv * (grad - grad.mean(axis=-1, keepdims=True)
                           - y * (grad * y).mean(axis=-1, keepdims=True))


class Attention(Function):
    """
    Scaled dot-product attention over the last two axes:
    softmax(q k^T / sqrt(d)) v for q [..., Lq, d], k, v [..., Lk, d].
    """
    def forward(self, q: np.ndarray, k: np.ndarray,
                v: np.ndarray) -> np.ndarray:
        if (q.shape[-1] != k.shape[-1] or k.shape != v.shape or
                q.shape[:-2] != k.shape[:-2]):
            raise ShapeError('attention', q.shape, k.shape)
        self.q, self.k, self.v = q, k, v
        self.scale = 1.0 / math.sqrt(q.shape[-1])
        scores = np.matmul(q, np.swapaxes(k, -1, -2)) * self.scale
        self.p = _softmax(scores, -1)
        return np.matmul(self.p, v)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, ...]:
        p = self.p
        gv = np.matmul(np.swapaxes(p, -1, -2), grad)
        gp = np.matmul(grad, np.swapaxes(self.v, -1, -2))
        gs = p * (gp - np.sum(gp * p, axis=-1, keepdims=True)) * self.scale
        gq = np.matmul(gs, self.k)
        gk = np.matmul(np.swapaxes(gs, -1, -2), self.q)
        return gq, gk, gv


class Embedding(Function):
    def forward(self, weight: np.ndarray, indices: np.ndarray) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if (indices.size and (indices.min() < 0 or
                              indices.max() >= weight.shape[0])):
            raise ShapeError('embedding', weight.shape, indices.shape,
                             'index out of range')
        self.shape, self.indices = weight.shape, indices
        return weight[indices]

    def backward(self, grad: np.ndarray) -> np.ndarray:
        out = np.zeros(self.shape)
        np.add.at(out, self.indices, grad)
        return out


class MSE(Function):
    def forward(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        if (a.shape != b.shape):
            raise ShapeError('mse', a.shape, b.shape)
        self.diff = a - b
        return np.array(np.mean(self.diff ** 2))

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        g = grad * 2.0 * self.diff / self.diff.size
        return g, -g


# convolution kernels (any number of spatial dims)

def _windows(xp: np.ndarray, ksize: Sequence[int],
             stride: Sequence[int]) -> np.ndarray:
    nd = len(ksize)
    win = sliding_window_view(xp, tuple(ksize), axis=tuple(range(2, 2 + nd)))
    index = (slice(None), slice(None)) + tuple(slice(None, None, s)
                                               for s in stride)
    return win[index]


def conv_forward(xp: np.ndarray, w: np.ndarray,
                 stride: Sequence[int]) -> np.ndarray:
    """Cross-correlate padded input [N,C,*S] with weights [O,C,*k]."""
    nd = w.ndim - 2
    win = _windows(xp, w.shape[2:], stride)
    out = np.tensordot(win, w, axes=([1] + list(range(2 + nd, 2 + 2 * nd)),
                                     [1] + list(range(2, 2 + nd))))
    return np.ascontiguousarray(np.moveaxis(out, -1, 1))


def conv_weight_grad(xp: np.ndarray, grad: np.ndarray,
                     ksize: Sequence[int],
                     stride: Sequence[int]) -> np.ndarray:
    nd = len(ksize)
    win = _windows(xp, ksize, stride)
    axes = [0] + list(range(2, 2 + nd))
    return np.tensordot(grad, win, axes=(axes, axes))


def conv_input_grad(grad: np.ndarray, w: np.ndarray,
                    padded_shape: Sequence[int],
                    stride: Sequence[int]) -> np.ndarray:
    """Adjoint of `conv_forward` with respect to the padded input."""
    out = np.zeros(tuple(padded_shape))
    out_sz = grad.shape[2:]
    for offs in itertools.product(*(range(k) for k in w.shape[2:])):
        part = np.tensordot(grad, w[(slice(None), slice(None)) + offs],
                            axes=([1], [0]))
        part = np.moveaxis(part, -1, 1)
        index = (slice(None), slice(None)) + tuple(
            slice(o, o + s * (n - 1) + 1, s)
            for o, s, n in zip(offs, stride, out_sz))
        out[index] += part
    return out


def _pad_spec(nd: int, padding: Sequence[int]):
    return [(0, 0), (0, 0)] + [(p, p) for p in padding]


def _unpad(x: np.ndarray, padding: Sequence[int]) -> np.ndarray:
    index = (slice(None), slice(None)) + tuple(
        slice(p, x.shape[2 + i] - p) for i, p in enumerate(padding))
    return x[index]


class ConvNd(Function):
    """N-d convolution (cross-correlation) without bias."""
    def forward(self, x: np.ndarray, w: np.ndarray, stride: Tuple[int, ...],
                padding: Tuple[int, ...]) -> np.ndarray:
        nd = w.ndim - 2
        if (x.ndim != w.ndim or x.shape[1] != w.shape[1] or
                len(stride) != nd or len(padding) != nd):
            raise ShapeError(f'conv{nd}d', x.shape, w.shape)
        for size, k, p in zip(x.shape[2:], w.shape[2:], padding):
            if (size + 2 * p < k):
                raise ShapeError(f'conv{nd}d', x.shape, w.shape,
                                 'kernel larger than padded input')
        self.stride, self.padding = stride, padding
        self.xp = np.pad(x, _pad_spec(nd, padding))
        self.w = w
        return conv_forward(self.xp, w, stride)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        gw = conv_weight_grad(self.xp, grad, self.w.shape[2:], self.stride)
        gxp = conv_input_grad(grad, self.w, self.xp.shape, self.stride)
        return _unpad(gxp, self.padding), gw


class ConvTransposeNd(Function):
    """
    N-d transposed convolution without bias: input [N,Cin,*S], weights
    [Cin,Cout,*k], output extent (S-1)*stride + k - 2*padding.
    """
    def forward(self, x: np.ndarray, w: np.ndarray, stride: Tuple[int, ...],
                padding: Tuple[int, ...]) -> np.ndarray:
        nd = w.ndim - 2
        if (x.ndim != w.ndim or x.shape[1] != w.shape[0] or
                len(stride) != nd or len(padding) != nd):
            raise ShapeError(f'conv_transpose{nd}d', x.shape, w.shape)
        self.stride, self.padding = stride, padding
        self.x, self.w = x, w
        full = tuple((s - 1) * st + k for s, st, k in
                     zip(x.shape[2:], stride, w.shape[2:]))
        for f, p in zip(full, padding):
            if (f - 2 * p < 1):
                raise ShapeError(f'conv_transpose{nd}d', x.shape, w.shape,
                                 'padding removes the whole output')
        y = conv_input_grad(x, w, (x.shape[0], w.shape[1]) + full, stride)
        return _unpad(y, padding)

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        nd = self.w.ndim - 2
        gp = np.pad(grad, _pad_spec(nd, self.padding))
        gx = conv_forward(gp, self.w, self.stride)
        gw = conv_weight_grad(gp, self.x, self.w.shape[2:], self.stride)
        # conv_weight_grad contracts as [x-channels, grad-channels]
        return gx, gw
