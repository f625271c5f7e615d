from __future__ import annotations
import logging
from contextlib import contextmanager
from typing import Any, Iterator, List, Optional, Sequence, Tuple, Union
import numpy as np
from saydream.errors import ShapeError, NonFiniteError, TapeConsumedError

logger = logging.getLogger(__name__)

Operand = Union['Tensor', np.ndarray, float, int]

_grad_enabled = True


@contextmanager
def no_grad() -> Iterator[None]:
    """
    Context manager disabling graph recording. Operations executed inside it
    produce tensors that never require gradients.
    """
    global _grad_enabled
    previous = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = previous


def grad_enabled() -> bool:
    return _grad_enabled


class Function:
    """
    Base class for differentiable operations.

    A subclass implements `forward` over raw numpy arrays and `backward`,
    which receives dLoss/dOutput and returns dLoss/dInput for every input
    (a tuple when there is more than one input, ``None`` entries allowed).
    Anything `backward` needs must be saved on ``self`` during `forward`.
    """

    def __init__(self, *tensors: Tensor):
        self.tensors: Optional[Tuple[Tensor, ...]] = tensors

    def forward(self, *args: np.ndarray, **kwargs: Any) -> np.ndarray:
        raise NotImplementedError("Forward pass not implemented for "
                                  f"{type(self).__name__}")

    def backward(self, grad: np.ndarray) -> Any:
        raise NotImplementedError("Backward pass not implemented for "
                                  f"{type(self).__name__}")

    @classmethod
    def op_name(cls) -> str:
        return cls.__name__.lower()

    @classmethod
    def apply(cls, *tensors: Tensor, **kwargs: Any) -> Tensor:
        """
        Construct this function, run its forward pass over the data of the
        given tensors and wrap the result in a `Tensor` recording the
        function for the backward pass.

        Raises:
          NonFiniteError: if the forward pass produced NaN or Inf.
        """
        func = cls(*tensors)
        out = func.forward(*(t.data for t in tensors), **kwargs)
        out = np.asarray(out, dtype=np.float64)
        if (not np.all(np.isfinite(out))):
            raise NonFiniteError(cls.op_name())
        requires_grad = _grad_enabled and any(t.requires_grad
                                              for t in tensors)
        if (not requires_grad):
            func.tensors = None
            return Tensor(out)
        return Tensor(out, requires_grad=True, _creator=func)

    @staticmethod
    def unbroadcast(grad: np.ndarray, to_shape: Tuple[int, ...]) -> np.ndarray:
        """
        Sum out broadcast dimensions so that `grad` matches `to_shape`.
        """
        if (grad.shape == to_shape):
            return grad
        while (grad.ndim > len(to_shape)):
            grad = grad.sum(axis=0)
        for dim, extent in enumerate(to_shape):
            if (extent == 1 and grad.shape[dim] != 1):
                grad = grad.sum(axis=dim, keepdims=True)
        return grad


class Tensor:
    """
    A dense 64-bit tensor taking part in reverse-mode differentiation.

    Tensors are never mutated by operations; only the ``grad`` buffer of a
    leaf changes during `backward`. Non-leaf tensors remember the `Function`
    that created them until the graph is consumed by a backward pass.
    """
    __array_priority__ = 100

    def __init__(self, data: Any, requires_grad: bool = False,
                 name: Optional[str] = None,
                 _creator: Optional[Function] = None):
        self.data: np.ndarray = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.grad: Optional[np.ndarray] = None
        self.name = name
        self.creator = _creator
        self._consumed = False

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    def is_leaf(self) -> bool:
        return self.creator is None

    def item(self) -> float:
        if (self.size != 1):
            raise ShapeError('item', self.shape, (), 'not a scalar')
        return float(self.data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self.data

    def detach(self) -> Tensor:
        return Tensor(self.data)

    def __repr__(self) -> str:
        grad = ', requires_grad=True' if self.requires_grad else ''
        return f'Tensor(shape={self.shape}{grad})'

    def backward(self) -> None:
        """
        Back-propagate from this scalar tensor. Every leaf that requires a
        gradient receives dSelf/dLeaf added into its ``grad`` buffer, so
        gradients accumulate across uses and across calls. The recorded graph
        is freed afterwards.

        Raises:
          ShapeError: if this tensor is not a scalar.
          TapeConsumedError: if the graph was already consumed.
        """
        if (self.size != 1):
            raise ShapeError('backward', self.shape, (),
                             'loss must be a scalar')
        if (self._consumed):
            raise TapeConsumedError('backward called twice on the same graph')
        if (not self.requires_grad):
            return
        order = self._topological_order()
        grads = {id(self): np.ones_like(self.data)}
        for node in reversed(order):
            grad = grads.pop(id(node), None)
            if (node.creator is None):
                if (grad is not None):
                    if (node.grad is None):
                        node.grad = np.zeros_like(node.data)
                    node.grad = node.grad + grad
                continue
            if (grad is None):
                continue
            inputs = node.creator.tensors
            in_grads = node.creator.backward(grad)
            if (not isinstance(in_grads, tuple)):
                in_grads = (in_grads,)
            for inp, g in zip(inputs, in_grads):
                if (g is None or not inp.requires_grad):
                    continue
                if (g.shape != inp.shape):
                    raise ShapeError(node.creator.op_name() + ' backward',
                                     g.shape, inp.shape)
                if (id(inp) in grads):
                    grads[id(inp)] = grads[id(inp)] + g
                else:
                    grads[id(inp)] = g
        for node in order:
            if (node.creator is not None):
                node.creator.tensors = None
                node.creator = None
                node._consumed = True

    def _topological_order(self) -> List[Tensor]:
        order: List[Tensor] = []
        visited = set()
        stack: List[Tuple[Tensor, bool]] = [(self, False)]
        while (stack):
            node, expanded = stack.pop()
            if (id(node) in visited):
                continue
            if (expanded):
                visited.add(id(node))
                order.append(node)
                continue
            if (node._consumed):
                raise TapeConsumedError('graph node was freed by an earlier '
                                        'backward pass')
            stack.append((node, True))
            if (node.creator is not None):
                for parent in node.creator.tensors:
                    if (parent.requires_grad and id(parent) not in visited):
                        stack.append((parent, False))
        return order

    # arithmetic
    def __add__(self, other: Operand) -> Tensor:
        return ops.Add.apply(self, as_tensor(other))

    def __radd__(self, other: Operand) -> Tensor:
        return ops.Add.apply(as_tensor(other), self)

    def __sub__(self, other: Operand) -> Tensor:
        return ops.Sub.apply(self, as_tensor(other))

    def __rsub__(self, other: Operand) -> Tensor:
        return ops.Sub.apply(as_tensor(other), self)

    def __mul__(self, other: Operand) -> Tensor:
        return ops.Mul.apply(self, as_tensor(other))

    def __rmul__(self, other: Operand) -> Tensor:
        return ops.Mul.apply(as_tensor(other), self)

    def __truediv__(self, other: Operand) -> Tensor:
        return ops.Div.apply(self, as_tensor(other))

    def __rtruediv__(self, other: Operand) -> Tensor:
        return ops.Div.apply(as_tensor(other), self)

    def __neg__(self) -> Tensor:
        return ops.Neg.apply(self)

    def __pow__(self, exponent: float) -> Tensor:
        return ops.PowScalar.apply(self, exponent=float(exponent))

    def __matmul__(self, other: Operand) -> Tensor:
        return ops.MatMul.apply(self, as_tensor(other))

    def __getitem__(self, index: Any) -> Tensor:
        return ops.Slice.apply(self, index=index)

    # movement
    def reshape(self, *shape: Union[int, Sequence[int]]) -> Tensor:
        if (len(shape) == 1 and not isinstance(shape[0], int)):
            shape = tuple(shape[0])
        return ops.Reshape.apply(self, shape=tuple(shape))

    def transpose(self, *axes: Union[int, Sequence[int]]) -> Tensor:
        if (len(axes) == 1 and isinstance(axes[0], (tuple, list))):
            axes = tuple(axes[0])
        if (len(axes) == 0):
            axes = tuple(reversed(range(self.ndim)))
        return ops.Transpose.apply(self, axes=tuple(axes))

    # reductions
    def sum(self, axis: Optional[Union[int, Tuple[int, ...]]] = None,
            keepdims: bool = False) -> Tensor:
        return ops.Sum.apply(self, axis=axis, keepdims=keepdims)

    def mean(self, axis: Optional[Union[int, Tuple[int, ...]]] = None,
             keepdims: bool = False) -> Tensor:
        return ops.Mean.apply(self, axis=axis, keepdims=keepdims)

    # elementwise
    def exp(self) -> Tensor:
        return ops.Exp.apply(self)

    def log(self) -> Tensor:
        return ops.Log.apply(self)

    def relu(self) -> Tensor:
        return ops.ReLU.apply(self)

    def gelu(self) -> Tensor:
        return ops.GELU.apply(self)

    def sigmoid(self) -> Tensor:
        return ops.Sigmoid.apply(self)

    def tanh(self) -> Tensor:
        return ops.Tanh.apply(self)

    def softmax(self, axis: int = -1) -> Tensor:
        return ops.Softmax.apply(self, axis=axis)

    def clamp(self, low: float, high: float) -> Tensor:
        return ops.Clamp.apply(self, low=low, high=high)


def as_tensor(value: Operand) -> Tensor:
    """Wrap constants (scalars, arrays) as non-differentiable tensors."""
    if (isinstance(value, Tensor)):
        return value
    return Tensor(value)


from saydream.autodiff import ops  # noqa: E402
