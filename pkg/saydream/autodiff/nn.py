import hashlib
import math
from typing import Dict, Iterator, List, Tuple
import numpy as np
from saydream.autodiff import functional as F
from saydream.autodiff.tensor import Tensor
from saydream.errors import CheckpointError


class Parameter(Tensor):
    """A leaf tensor that is trained (requires a gradient by default)."""
    def __init__(self, data: np.ndarray, requires_grad: bool = True):
        super().__init__(np.array(data, dtype=np.float64),
                         requires_grad=requires_grad)


class Module:
    """
    Base class for networks. Parameters are discovered from the instance
    attributes (`Parameter`, `Module`, or lists of those) in definition
    order, so parameter names and ordering are deterministic.
    """

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    def named_parameters(self, prefix: str = '') -> Iterator[
            Tuple[str, Parameter]]:
        for name, value in vars(self).items():
            if (isinstance(value, Parameter)):
                yield prefix + name, value
            elif (isinstance(value, Module)):
                yield from value.named_parameters(f'{prefix}{name}.')
            elif (isinstance(value, (list, tuple))):
                for i, item in enumerate(value):
                    if (isinstance(item, Module)):
                        yield from item.named_parameters(
                            f'{prefix}{name}.{i}.')
                    elif (isinstance(item, Parameter)):
                        yield f'{prefix}{name}.{i}', item

    def parameters(self) -> List[Parameter]:
        return [p for _, p in self.named_parameters()]

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {n: p.data.copy() for n, p in self.named_parameters()}

    def load_state_dict(self, state: Dict[str, np.ndarray],
                        strict: bool = True) -> None:
        """
        Copy the given arrays into this module's parameters.

        Raises:
          CheckpointError: on missing/unexpected names (when `strict`) or on a
            shape mismatch.
        """
        own = dict(self.named_parameters())
        if (strict):
            missing = sorted(set(own) - set(state))
            unexpected = sorted(set(state) - set(own))
            if (missing or unexpected):
                raise CheckpointError(f'parameter mismatch; missing: '
                                      f'{missing}, unexpected: {unexpected}')
        for name, value in state.items():
            if (name not in own):
                continue
            if (own[name].shape != value.shape):
                raise CheckpointError(f'{name}: checkpoint shape '
                                      f'{value.shape} vs module shape '
                                      f'{own[name].shape}')
            own[name].data = np.array(value, dtype=np.float64)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def freeze(self) -> None:
        """Stop every parameter of this module from receiving gradients."""
        for p in self.parameters():
            p.requires_grad = False
            p.grad = None

    def checksum(self) -> str:
        digest = hashlib.sha256()
        for name, p in self.named_parameters():
            digest.update(name.encode('utf-8'))
            digest.update(np.ascontiguousarray(p.data).tobytes())
        return digest.hexdigest()

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())


def _uniform(rng: np.random.Generator, shape: Tuple[int, ...],
             fan_in: int) -> np.ndarray:
    bound = 1.0 / math.sqrt(max(fan_in, 1))
    return rng.uniform(-bound, bound, size=shape)


class Linear(Module):
    def __init__(self, in_features: int, out_features: int,
                 rng: np.random.Generator, bias: bool = True):
        self.weight = Parameter(_uniform(rng, (in_features, out_features),
                                         in_features))
        self.bias = Parameter(np.zeros(out_features)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        out = x @ self.weight
        if (self.bias is not None):
            out = out + self.bias
        return out


class Conv2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        fan_in = in_channels * kernel_size ** 2
        self.weight = Parameter(_uniform(
            rng, (out_channels, in_channels, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(np.zeros(out_channels))
        self.stride, self.padding = stride, padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv2d(x, self.weight, self.bias, self.stride, self.padding)


class Conv3d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        fan_in = in_channels * kernel_size ** 3
        self.weight = Parameter(_uniform(
            rng, (out_channels, in_channels) + (kernel_size,) * 3, fan_in))
        self.bias = Parameter(np.zeros(out_channels))
        self.stride, self.padding = stride, padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv3d(x, self.weight, self.bias, self.stride, self.padding)


class ConvTranspose2d(Module):
    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, padding: int = 0):
        fan_in = in_channels * kernel_size ** 2
        self.weight = Parameter(_uniform(
            rng, (in_channels, out_channels, kernel_size, kernel_size), fan_in))
        self.bias = Parameter(np.zeros(out_channels))
        self.stride, self.padding = stride, padding

    def forward(self, x: Tensor) -> Tensor:
        return F.conv_transpose2d(x, self.weight, self.bias, self.stride,
                                  self.padding)


class LayerNorm(Module):
    def __init__(self, features: int, eps: float = 1e-5):
        self.weight = Parameter(np.ones(features))
        self.bias = Parameter(np.zeros(features))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        return F.layer_norm(x, self.weight, self.bias, self.eps)


class Embedding(Module):
    def __init__(self, num: int, features: int, rng: np.random.Generator,
                 scale: float = 0.02):
        self.weight = Parameter(rng.normal(0.0, scale, size=(num, features)))

    def forward(self, indices: np.ndarray) -> Tensor:
        return F.embedding(self.weight, indices)


class SelfAttention(Module):
    """Multi-head self-attention over the second-to-last axis."""
    def __init__(self, dim: int, heads: int, rng: np.random.Generator):
        if (dim % heads != 0):
            raise ValueError(f'dim {dim} not divisible by heads {heads}')
        self.heads = heads
        self.qkv = Linear(dim, 3 * dim, rng)
        self.proj = Linear(dim, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        lead, (length, dim) = x.shape[:-2], x.shape[-2:]
        hd = dim // self.heads
        qkv = self.qkv(x).reshape(lead + (length, 3, self.heads, hd))
        nl = len(lead)
        # -> [3, *lead, heads, length, hd]
        qkv = qkv.transpose((nl + 1,) + tuple(range(nl)) +
                            (nl + 2, nl, nl + 3))
        out = F.attention(qkv[0], qkv[1], qkv[2])
        out = out.transpose(tuple(range(nl)) + (nl + 1, nl, nl + 2))
        return self.proj(out.reshape(lead + (length, dim)))


class MLP(Module):
    def __init__(self, dim: int, hidden: int, rng: np.random.Generator):
        self.fc1 = Linear(dim, hidden, rng)
        self.fc2 = Linear(hidden, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.fc2(self.fc1(x).gelu())


def fourier_features(values: np.ndarray, count: int) -> np.ndarray:
    """
    Fixed sinusoidal features of scalars in [0, 1]: returns [len, count].
    """
    values = np.asarray(values, dtype=np.float64).reshape(-1, 1)
    half = count // 2
    freqs = np.pi * 2.0 ** np.arange(half)
    angles = values * freqs
    return np.concatenate([np.sin(angles), np.cos(angles)], axis=1)
