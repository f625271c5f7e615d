"""
The spatiotemporal denoiser network: a per-frame convolutional encoder to a
half-resolution token grid, transformer blocks alternating spatial and
temporal self-attention with noise-level and task embeddings injected into
every block, and a transposed-convolution decoder with a skip connection.
"""
from __future__ import annotations
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from saydream.autodiff import Tensor
from saydream.autodiff.checkpoint import read_checkpoint, write_checkpoint
from saydream.autodiff.nn import (Conv2d, ConvTranspose2d, Embedding,
                                  LayerNorm, Linear, MLP, Module, Parameter,
                                  SelfAttention, fourier_features)
from saydream.codec import LATENT_CHANNELS
from saydream.errors import CheckpointError, ShapeError

NOISE_FEATURES = 16


class DenoiserBlock(Module):
    def __init__(self, width: int, heads: int, rng: np.random.Generator):
        self.cond_proj = Linear(width, width, rng)
        self.norm_s = LayerNorm(width)
        self.spatial = SelfAttention(width, heads, rng)
        self.norm_t = LayerNorm(width)
        self.temporal = SelfAttention(width, heads, rng)
        self.norm_m = LayerNorm(width)
        self.mlp = MLP(width, 2 * width, rng)

    def forward(self, x: Tensor, emb: Tensor) -> Tensor:
        # x: [B, n, S, C]; emb: [B, C]
        batch, width = emb.shape
        x = x + self.cond_proj(emb).reshape(batch, 1, 1, width)
        x = x + self.spatial(self.norm_s(x))
        xt = x.transpose(0, 2, 1, 3)
        xt = xt + self.temporal(self.norm_t(xt))
        x = xt.transpose(0, 2, 1, 3)
        return x + self.mlp(self.norm_m(x))


class DenoiserNet(Module):
    """
    Args:
      n_frames: The clip length n (sizes the frame position embedding).
      latent_hw: The latent (h, w); both must be even.
      width: Token width C.
      heads: Attention heads per block.
      blocks: Number of transformer blocks; the feature map after each
        block is a tap the discriminator heads may attach to.
      num_tasks: Size of the task embedding table.
      rng: Initialization generator.
    """
    def __init__(self, n_frames: int, latent_hw: Tuple[int, int],
                 width: int = 32, heads: int = 2, blocks: int = 2,
                 num_tasks: int = 4,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        if (latent_hw[0] % 2 or latent_hw[1] % 2):
            raise ValueError(f'latent size {latent_hw} must be even')
        self.n_frames = n_frames
        self.latent_hw = tuple(latent_hw)
        self.width = width
        self.heads = heads
        self.num_tasks = num_tasks
        self.conv_in = Conv2d(LATENT_CHANNELS, width, 3, rng, padding=1)
        self.down = Conv2d(width, width, 2, rng, stride=2)
        self.noise_fc1 = Linear(NOISE_FEATURES, width, rng)
        self.noise_fc2 = Linear(width, width, rng)
        self.task_embed = Embedding(num_tasks, width, rng)
        self.frame_pos = Parameter(rng.normal(0.0, 0.02,
                                              size=(n_frames, width)))
        self.blocks = [DenoiserBlock(width, heads, rng)
                       for _ in range(blocks)]
        self.norm_out = LayerNorm(width)
        self.up = ConvTranspose2d(width, width, 4, rng, stride=2, padding=1)
        self.conv_out = Conv2d(width, LATENT_CHANNELS, 3, rng, padding=1)

    @property
    def num_blocks(self) -> int:
        return len(self.blocks)

    def architecture(self) -> Dict[str, Any]:
        return {'n_frames': self.n_frames, 'latent_hw': list(self.latent_hw),
                'width': self.width, 'heads': self.heads,
                'blocks': self.num_blocks, 'num_tasks': self.num_tasks}

    def embed(self, c_noise: np.ndarray, task: np.ndarray) -> Tensor:
        feats = Tensor(fourier_features(c_noise, NOISE_FEATURES))
        emb = self.noise_fc2(self.noise_fc1(feats).gelu())
        return emb + self.task_embed(task)

    def _tokens(self, x: Tensor) -> Tuple[Tensor, Tensor]:
        expected = (self.n_frames, LATENT_CHANNELS) + self.latent_hw
        if (x.ndim != 5 or tuple(x.shape[1:]) != expected):
            raise ShapeError('DenoiserNet', x.shape, ('B',) + expected)
        batch, n, c = x.shape[0], self.n_frames, self.width
        h, w = self.latent_hw
        skip = self.conv_in(x.reshape(batch * n, LATENT_CHANNELS, h, w)).gelu()
        tokens = self.down(skip)
        tokens = tokens.reshape(batch, n, c, (h // 2) * (w // 2))
        tokens = tokens.transpose(0, 1, 3, 2)
        return tokens + self.frame_pos.reshape(1, n, 1, c), skip

    def forward(self, x: Tensor, c_noise: np.ndarray, task: np.ndarray,
                taps: Optional[List[Tensor]] = None) -> Tensor:
        """
        Args:
          x: [B, n, 16, h, w] scaled noisy latents.
          c_noise: [B] noise-level inputs.
          task: [B] task indices.
          taps: If given, the [B, n, S, C] token grid after every block is
            appended to it.

        Returns:
          The [B, n, 16, h, w] network output.
        """
        tokens, skip = self._tokens(x)
        batch, n, c = x.shape[0], self.n_frames, self.width
        hh, ww = self.latent_hw[0] // 2, self.latent_hw[1] // 2
        emb = self.embed(c_noise, task)
        for block in self.blocks:
            tokens = block(tokens, emb)
            if (taps is not None):
                taps.append(tokens)
        tokens = self.norm_out(tokens)
        grid = tokens.transpose(0, 1, 3, 2).reshape(batch * n, c, hh, ww)
        up = self.up(grid).gelu() + skip
        out = self.conv_out(up)
        return out.reshape((batch, n, LATENT_CHANNELS) + self.latent_hw)

    def features(self, x: Tensor, c_noise: np.ndarray, task: np.ndarray,
                 count: int) -> List[Tensor]:
        """The token grids after the first `count` blocks (no decoder)."""
        if (not 0 <= count <= self.num_blocks):
            raise ValueError(f'cannot tap {count} of {self.num_blocks} '
                             'blocks')
        tokens, _ = self._tokens(x)
        emb = self.embed(c_noise, task)
        taps = []
        for block in self.blocks[:count]:
            tokens = block(tokens, emb)
            taps.append(tokens)
        return taps


def from_architecture(arch: Dict[str, Any]) -> DenoiserNet:
    return DenoiserNet(arch['n_frames'], tuple(arch['latent_hw']),
                       arch['width'], arch['heads'], arch['blocks'],
                       arch['num_tasks'])


def save_denoiser(path: str, section: str, net: DenoiserNet,
                  meta: Optional[Dict[str, Any]] = None,
                  extra: Optional[Dict[str, np.ndarray]] = None) -> None:
    """
    Write `net` (plus any `extra` arrays such as optimizer moments) as a
    checkpoint blob under `section`; the architecture goes into the metadata.
    """
    meta = dict(meta or {})
    meta['architecture'] = net.architecture()
    arrays = {f'net.{k}': v for k, v in net.state_dict().items()}
    arrays.update(extra or {})
    write_checkpoint(path, section, arrays, meta)


def load_denoiser(path: str, section: Optional[str] = None) -> Tuple[
        DenoiserNet, Dict[str, Any], Dict[str, np.ndarray]]:
    """
    Returns:
      The network, the checkpoint metadata and the non-network arrays.
    """
    _, arrays, meta = read_checkpoint(path, section)
    arch = meta.get('architecture')
    if (arch is None):
        raise CheckpointError(f'{path}: no denoiser architecture recorded')
    net = from_architecture(arch)
    state = {k[len('net.'):]: v for k, v in arrays.items()
             if k.startswith('net.')}
    net.load_state_dict(state)
    extra = {k: v for k, v in arrays.items() if not k.startswith('net.')}
    return net, meta, extra


def clone_denoiser(net: DenoiserNet) -> DenoiserNet:
    """An independent network with the same architecture and weights."""
    copy = from_architecture(net.architecture())
    copy.load_state_dict(net.state_dict())
    return copy
