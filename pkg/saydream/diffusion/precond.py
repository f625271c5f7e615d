"""
Denoiser preconditioning and the weighted reconstruction objective. The
denoised estimate of a noisy latent x_t at noise level sigma is

    x0_hat = c_skip * x_t + c_out * Net(c_in * cond(x_t), c_noise, task)

with c_skip = c_in = 1 / (sigma + 1), c_out = -sigma / (sigma + 1) and
c_noise = -c_out.
"""
from __future__ import annotations
from typing import Callable, Optional, Union
import numpy as np
from recordclass import RecordClass
from saydream.autodiff import Tensor
from saydream.errors import NonFiniteError, ShapeError

Sigma = Union[float, np.ndarray]


class NoiseBundle(RecordClass):
    """A noise level (scalar or per-sample array) and its four factors."""
    sigma: Sigma
    c_skip: Sigma
    c_out: Sigma
    c_in: Sigma
    c_noise: Sigma


def _check_sigma(sigma: Sigma) -> np.ndarray:
    arr = np.asarray(sigma, dtype=np.float64)
    if (not np.all(np.isfinite(arr)) or np.any(arr <= 0.0)):
        raise ValueError(f'noise level must be finite and > 0, got {sigma}')
    return arr


def precondition(sigma: Sigma) -> NoiseBundle:
    """
    Raises:
      ValueError: if any sigma <= 0.
    """
    arr = _check_sigma(sigma)
    c_skip = 1.0 / (arr + 1.0)
    c_out = -arr / (arr + 1.0)
    if (arr.ndim == 0):
        return NoiseBundle(float(arr), float(c_skip), float(c_out),
                           float(c_skip), float(-c_out))
    return NoiseBundle(arr, c_skip, c_out, c_skip.copy(), -c_out)


class Conditioning(RecordClass):
    """
    Image-to-video and task conditioning of a batch of clips.

    Args:
      first_frame_latent: [B, 16, h, w] clean latents of the first frame.
      task: [B] target color indices into the task embedding table.
      frame_count: The clip length n.
    """
    first_frame_latent: np.ndarray
    task: np.ndarray
    frame_count: int

    @classmethod
    def single(cls, latent: np.ndarray, task: int,
               frame_count: int) -> Conditioning:
        return cls(np.asarray(latent, dtype=np.float64)[None],
                   np.array([task], dtype=np.int64), frame_count)

    def clip_shape(self):
        return ((self.first_frame_latent.shape[0], self.frame_count) +
                self.first_frame_latent.shape[1:])


def apply_first_frame_cond(x_t: np.ndarray, cond: Conditioning) -> np.ndarray:
    """
    Replace frame 0 of every clip in `x_t` ([B, n, 16, h, w]) with the clean
    conditioning latent. Returns a new array.

    Raises:
      ShapeError: if `x_t` does not have the clip shape `cond` declares.
    """
    expected = cond.clip_shape()
    if (tuple(x_t.shape) != tuple(expected)):
        raise ShapeError('apply_first_frame_cond', x_t.shape, expected)
    out = np.array(x_t, dtype=np.float64)
    out[:, 0] = cond.first_frame_latent
    return out


def _per_sample(values: np.ndarray, ndim: int) -> np.ndarray:
    return values.reshape((-1,) + (1,) * (ndim - 1)) if values.ndim else \
        values


def denoise(x_t: np.ndarray, sigma: Sigma, cond: Conditioning,
            net: Callable[[Tensor, np.ndarray, np.ndarray], Tensor]) -> Tensor:
    """
    The preconditioned denoiser. `net` is called as
    ``net(c_in * x_t_cond, c_noise, task)`` with one c_noise per clip; the
    result stays on the tape so gradients reach the network.

    Raises:
      NonFiniteError: naming sigma, if the estimate is not finite.
      ValueError: if sigma <= 0.
    """
    bundle = precondition(sigma)
    batch = x_t.shape[0]
    c_skip = _per_sample(np.asarray(bundle.c_skip), x_t.ndim)
    c_out = _per_sample(np.asarray(bundle.c_out), x_t.ndim)
    c_in = _per_sample(np.asarray(bundle.c_in), x_t.ndim)
    c_noise = np.broadcast_to(np.asarray(bundle.c_noise, dtype=np.float64),
                              (batch,))
    x_cond = apply_first_frame_cond(x_t, cond)
    try:
        out = net(Tensor(c_in * x_cond), c_noise, cond.task)
        x0_hat = out * c_out + c_skip * x_t
    except NonFiniteError:
        raise NonFiniteError(f'denoiser at sigma={sigma}')
    return x0_hat


def sample_sigma_lognormal(rng: np.random.Generator, mean: float = 0.0,
                           std: float = 1.0,
                           size: Optional[int] = None) -> Sigma:
    """Draw sigma = exp(z), z ~ N(mean, std^2)."""
    z = rng.normal(mean, std, size=size)
    return np.exp(z) if size is not None else float(np.exp(z))


def loss_weight(sigma: Sigma) -> Sigma:
    arr = _check_sigma(sigma)
    return (1.0 + arr) ** 2 / arr ** 2


def recon_loss(x0_hat: Tensor, x0: np.ndarray, sigma: Sigma) -> Tensor:
    """
    The noise-weighted reconstruction loss: the mean squared residual of
    each clip times (1 + sigma)^2 / sigma^2, averaged over the batch when
    `sigma` holds one level per clip.

    Raises:
      ValueError: if any sigma <= 0.
      ShapeError: if the shapes differ.
    """
    weight = np.asarray(loss_weight(sigma))
    if (tuple(x0_hat.shape) != tuple(np.shape(x0))):
        raise ShapeError('recon_loss', x0_hat.shape, np.shape(x0))
    residual = (x0_hat - x0) ** 2
    if (weight.ndim == 0):
        return residual.mean() * float(weight)
    axes = tuple(range(1, residual.ndim))
    return (residual.mean(axis=axes) * weight).mean()
