"""
Per-frame latent codec: space-to-depth by a factor f followed by a pointwise
linear map to 16 channels, mirrored by the decoder. Latents are laid out as
[..., 16, H/f, W/f].
"""
import logging
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from saydream.autodiff import Adam, Tensor, no_grad, functional as F
from saydream.autodiff.checkpoint import read_checkpoint, write_checkpoint
from saydream.autodiff.nn import Module, Parameter
from saydream.errors import DivergenceError, NonFiniteError, ShapeError

logger = logging.getLogger(__name__)

LATENT_CHANNELS = 16


def space_to_depth(frames: np.ndarray, factor: int) -> np.ndarray:
    """[..., H, W, 3] -> [..., H/f, W/f, 3 f^2]"""
    *lead, height, width, chans = frames.shape
    if (height % factor or width % factor):
        raise ShapeError('encode', frames.shape, (factor, factor),
                         'frame size not divisible by the codec factor')
    x = frames.reshape(*lead, height // factor, factor, width // factor,
                       factor, chans)
    n = len(lead)
    x = np.moveaxis(x, n + 2, n + 1)
    return x.reshape(*lead, height // factor, width // factor,
                     factor * factor * chans)


def depth_to_space(x: np.ndarray, factor: int) -> np.ndarray:
    """Inverse of `space_to_depth`."""
    *lead, h, w, depth = x.shape
    chans = depth // (factor * factor)
    x = x.reshape(*lead, h, w, factor, factor, chans)
    n = len(lead)
    x = np.moveaxis(x, n + 1, n + 2)
    return x.reshape(*lead, h * factor, w * factor, chans)


class Codec(Module):
    """
    Args:
      factor: The spatial downsample factor f.
      rng: Initialization generator (random init).
      orthogonal: Build the untrained test codec: an orthonormal encoder and
        its transpose as decoder, so decode(encode(x)) == x exactly for
        in-range x.
    """
    def __init__(self, factor: int = 2,
                 rng: Optional[np.random.Generator] = None,
                 orthogonal: bool = False):
        self.factor = factor
        depth = 3 * factor * factor
        rng = rng if rng is not None else np.random.default_rng(0)
        if (orthogonal):
            if (depth > LATENT_CHANNELS):
                raise ValueError(f'orthogonal codec needs 3f^2 <= '
                                 f'{LATENT_CHANNELS}, got {depth}')
            q, _ = np.linalg.qr(rng.normal(size=(LATENT_CHANNELS, depth)))
            enc = q.T
            dec = q
        else:
            bound = 1.0 / np.sqrt(depth)
            enc = rng.uniform(-bound, bound, size=(depth, LATENT_CHANNELS))
            dec = rng.uniform(-0.25, 0.25, size=(LATENT_CHANNELS, depth))
        self.enc_weight = Parameter(enc)
        self.enc_bias = Parameter(np.zeros(LATENT_CHANNELS))
        self.dec_weight = Parameter(dec)
        self.dec_bias = Parameter(np.zeros(depth))

    def encode(self, frames: np.ndarray) -> np.ndarray:
        """[..., H, W, 3] frames -> [..., 16, H/f, W/f] latents."""
        x = space_to_depth(np.asarray(frames, dtype=np.float64), self.factor)
        z = x @ self.enc_weight.data + self.enc_bias.data
        return np.moveaxis(z, -1, -3)

    def decode_raw(self, latent: np.ndarray) -> np.ndarray:
        latent = np.asarray(latent, dtype=np.float64)
        if (latent.ndim < 3 or latent.shape[-3] != LATENT_CHANNELS):
            raise ShapeError('decode', latent.shape, (LATENT_CHANNELS,),
                             f'latents need {LATENT_CHANNELS} channels')
        z = np.moveaxis(latent, -3, -1)
        x = z @ self.dec_weight.data + self.dec_bias.data
        return depth_to_space(x, self.factor)

    def decode(self, latent: np.ndarray) -> np.ndarray:
        """[..., 16, h, w] latents -> [..., h f, w f, 3] frames in [0, 1]."""
        return np.clip(self.decode_raw(latent), 0.0, 1.0)

    def forward(self, frames: np.ndarray) -> Tensor:
        """Differentiable pre-clamp round trip of space-to-depth frames."""
        x = Tensor(space_to_depth(frames, self.factor))
        z = x @ self.enc_weight + self.enc_bias
        return z @ self.dec_weight + self.dec_bias

    def operator_norm(self, iterations: int = 100) -> float:
        """
        Power-iteration estimate of the encoder's linear operator norm, a
        Lipschitz constant of `encode` under the Euclidean norm.
        """
        w = self.enc_weight.data
        v = np.ones(w.shape[0]) / np.sqrt(w.shape[0])
        for _ in range(iterations):
            u = w @ (w.T @ v)
            norm = np.linalg.norm(u)
            if (norm == 0.0):
                return 0.0
            v = u / norm
        return float(np.sqrt(np.linalg.norm(w @ (w.T @ v))))

    def save(self, path: str, meta: Optional[Dict[str, Any]] = None) -> None:
        meta = dict(meta or {})
        meta['factor'] = self.factor
        meta['operator_norm'] = self.operator_norm()
        write_checkpoint(path, 'codec', self.state_dict(), meta)

    @classmethod
    def load(cls, path: str) -> Tuple['Codec', Dict[str, Any]]:
        _, arrays, meta = read_checkpoint(path, 'codec')
        codec = cls(int(meta.get('factor', 2)))
        codec.load_state_dict(arrays)
        return codec, meta


def frame_pool(trajectories: List[Any]) -> np.ndarray:
    return np.concatenate([t.frames for t in trajectories])


def train_codec(frames: np.ndarray, epochs: int, lr: float = 1e-2,
                batch_size: int = 64, factor: int = 2,
                rng: Optional[np.random.Generator] = None,
                codec: Optional[Codec] = None) -> Tuple[Codec, List[float]]:
    """
    Fit the codec to `frames` by minimizing the pixel mse of the pre-clamp
    round trip with Adam.

    Returns:
      The codec and the per-epoch mean losses.

    Raises:
      DivergenceError: if a batch loss becomes non-finite.
    """
    rng = rng if rng is not None else np.random.default_rng(0)
    codec = codec if codec is not None else Codec(factor, rng)
    optim = Adam(codec.named_parameters(), lr=lr)
    history: List[float] = []
    for epoch in range(epochs):
        order = rng.permutation(len(frames))
        losses = []
        for start in range(0, len(order), batch_size):
            batch = frames[order[start:start + batch_size]]
            optim.zero_grad()
            target = space_to_depth(batch, codec.factor)
            try:
                loss = F.mse(codec(batch), target)
            except NonFiniteError:
                raise DivergenceError(f'codec loss diverged in epoch {epoch}')
            loss.backward()
            optim.step()
            losses.append(loss.item())
        history.append(float(np.mean(losses)))
        logger.info('codec epoch %d: loss %.6f', epoch, history[-1])
    return codec, history


def round_trip_psnr(codec: Codec, frames: np.ndarray) -> float:
    with no_grad():
        recon = codec.decode(codec.encode(frames))
    mse = float(np.mean((recon - frames) ** 2))
    return 99.0 if mse == 0.0 else min(99.0, 10.0 * np.log10(1.0 / mse))
