from typing import List, Optional, Sequence, Union
import numpy as np
from saydream.autodiff import Tensor, as_tensor, functional as F
from saydream.autodiff.nn import Conv3d, Module
from saydream.diffusion.denoiser import DenoiserNet, clone_denoiser
from saydream.diffusion.precond import Conditioning, precondition
from saydream.errors import ShapeError


class ScoreHead(Module):
    """
    Lightweight 3-D convolutional head: maps a [B, C, n, h', w'] feature
    volume to a [B, 1, n, h', w'] score map.
    """
    def __init__(self, width: int, channels: int, rng: np.random.Generator):
        self.conv1 = Conv3d(width, channels, 3, rng, padding=1)
        self.conv2 = Conv3d(channels, 1, 1, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.conv2(self.conv1(x).gelu())

    def zero_(self) -> None:
        for p in self.parameters():
            p.data = np.zeros_like(p.data)


class Discriminator(Module):
    """
    A frozen copy of the teacher backbone with trainable score heads on
    selected block outputs.

    Args:
      teacher: The teacher network; it is copied, never modified.
      taps: Block indices whose outputs receive a head.
      head_channels: Hidden channels of each head.
      rng: Head initialization generator.

    Raises:
      ValueError: if a tap index does not name a block.
    """
    def __init__(self, teacher: DenoiserNet, taps: Sequence[int],
                 head_channels: int = 16,
                 rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        taps = list(taps)
        if (len(taps) == 0):
            raise ValueError('the discriminator needs at least one tap')
        for t in taps:
            if (not 0 <= t < teacher.num_blocks):
                raise ValueError(f'invalid tap {t}: the backbone has '
                                 f'{teacher.num_blocks} blocks')
        self.backbone = clone_denoiser(teacher)
        self.backbone.freeze()
        self.taps = taps
        self.heads = [ScoreHead(teacher.width, head_channels, rng)
                      for _ in taps]

    def head_parameters(self):
        for i, head in enumerate(self.heads):
            for name, p in head.named_parameters(f'heads.{i}.'):
                yield name, p

    def forward(self, latent: Union[Tensor, np.ndarray], sigma: float,
                cond: Conditioning) -> List[Tensor]:
        return disc_scores(latent, sigma, cond, self)


def _cond_tensor(x: Tensor, cond: Conditioning) -> Tensor:
    expected = tuple(cond.clip_shape())
    if (tuple(x.shape) != expected):
        raise ShapeError('disc_scores', x.shape, expected)
    first = Tensor(cond.first_frame_latent[:, None])
    return F.concat([first, x[:, 1:]], axis=1)


def disc_scores(latent: Union[Tensor, np.ndarray], sigma: float,
                cond: Conditioning, disc: Discriminator) -> List[Tensor]:
    """
    Score a noised latent clip at noise level `sigma`: run the frozen
    backbone on the preconditioned, first-frame-conditioned input and apply
    every head to its tapped [B, n, S, C] token grid.

    Returns:
      One [B, 1, n, h', w'] score map per head.
    """
    latent = as_tensor(latent)
    bundle = precondition(sigma)
    batch = latent.shape[0]
    x_in = _cond_tensor(latent, cond) * bundle.c_in
    c_noise = np.full(batch, bundle.c_noise)
    feats = disc.backbone.features(x_in, c_noise, cond.task,
                                   max(disc.taps) + 1)
    hh, ww = (s // 2 for s in disc.backbone.latent_hw)
    n, width = disc.backbone.n_frames, disc.backbone.width
    scores = []
    for tap, head in zip(disc.taps, disc.heads):
        volume = feats[tap].transpose(0, 3, 1, 2).reshape(batch, width, n,
                                                          hh, ww)
        scores.append(head(volume))
    return scores
