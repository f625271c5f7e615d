"""
The in-context conditioned action model. Imagined keyframes and real
observation history pass through separate convolutional encoders; their
tokens, a proprioception token and learned action queries are mixed by a
transformer trunk and the query outputs are decoded into an action chunk.

The network has no input carrying the task: task information can only
reach the actions through the imagined frames.
"""
from __future__ import annotations
from typing import Any, Dict, List, Optional, Tuple
import numpy as np
from recordclass import RecordClass
from saydream.autodiff import Tensor, no_grad, functional as F
from saydream.autodiff.checkpoint import read_checkpoint, write_checkpoint
from saydream.autodiff.nn import (Conv2d, LayerNorm, Linear, MLP, Module,
                                  Parameter, SelfAttention)
from saydream.errors import CheckpointError, ShapeError
from saydream.sim.world import STEP_BOUND, Action

PROPRIO_DIM = 3
IDLE_ACTION = (0.0, 0.0, 0.0)


class PolicyInput(RecordClass):
    """
    Args:
      imagined: [n, H, W, 3] imagined keyframes.
      history: [k, H, W, 3] real observations, oldest first.
      proprio: (gripper x, gripper y, open flag).
    """
    imagined: np.ndarray
    history: np.ndarray
    proprio: np.ndarray


def input_names() -> Tuple[str, ...]:
    """Every input the policy consumes."""
    return tuple(PolicyInput.__fields__)


class FrameEncoder(Module):
    def __init__(self, frame_hw: Tuple[int, int], width: int,
                 rng: np.random.Generator):
        self.conv1 = Conv2d(3, 16, 3, rng, stride=2, padding=1)
        self.conv2 = Conv2d(16, 32, 3, rng, stride=2, padding=1)
        h, w = -(-frame_hw[0] // 4), -(-frame_hw[1] // 4)
        self.proj = Linear(32 * h * w, width, rng)

    def forward(self, frames: np.ndarray) -> Tensor:
        """[B, T, H, W, 3] frames -> [B, T, width] tokens."""
        batch, count = frames.shape[:2]
        x = Tensor(np.moveaxis(frames.reshape((batch * count,) +
                                              frames.shape[2:]), -1, 1))
        x = self.conv2(self.conv1(x).gelu()).gelu()
        x = x.reshape(batch, count, int(np.prod(x.shape[1:])))
        return self.proj(x)


class TrunkBlock(Module):
    def __init__(self, width: int, heads: int, rng: np.random.Generator):
        self.norm1 = LayerNorm(width)
        self.attn = SelfAttention(width, heads, rng)
        self.norm2 = LayerNorm(width)
        self.mlp = MLP(width, 2 * width, rng)

    def forward(self, x: Tensor) -> Tensor:
        x = x + self.attn(self.norm1(x))
        return x + self.mlp(self.norm2(x))


class PolicyNet(Module):
    """
    Args:
      frame_hw: Observation frame size (H, W).
      n: Imagined keyframes per input.
      k: History frames per input.
      m: Actions per chunk.
      width: Token width.
      layers: Trunk blocks.
      heads: Attention heads.
      rng: Initialization generator.
    """
    def __init__(self, frame_hw: Tuple[int, int] = (32, 32), n: int = 8,
                 k: int = 8, m: int = 8, width: int = 64, layers: int = 2,
                 heads: int = 4, rng: Optional[np.random.Generator] = None):
        rng = rng if rng is not None else np.random.default_rng(0)
        self.frame_hw = tuple(frame_hw)
        self.n, self.k, self.m = n, k, m
        self.width, self.heads = width, heads
        self.imagined_encoder = FrameEncoder(frame_hw, width, rng)
        self.history_encoder = FrameEncoder(frame_hw, width, rng)
        self.proprio = Linear(PROPRIO_DIM, width, rng)
        self.imagined_pos = Parameter(rng.normal(0.0, 0.02, (n, width)))
        self.history_pos = Parameter(rng.normal(0.0, 0.02, (k, width)))
        self.type_embed = Parameter(rng.normal(0.0, 0.02, (4, width)))
        self.queries = Parameter(rng.normal(0.0, 0.02, (m, width)))
        self.trunk = [TrunkBlock(width, heads, rng) for _ in range(layers)]
        self.norm_out = LayerNorm(width)
        self.head = Linear(width, 3, rng)

    def architecture(self) -> Dict[str, Any]:
        return {'frame_hw': list(self.frame_hw), 'n': self.n, 'k': self.k,
                'm': self.m, 'width': self.width, 'layers': len(self.trunk),
                'heads': self.heads}

    def _check(self, imagined: np.ndarray, history: np.ndarray,
               proprio: np.ndarray) -> None:
        hw = self.frame_hw + (3,)
        if (imagined.shape[1:] != (self.n,) + hw):
            raise ShapeError('PolicyNet imagined', imagined.shape,
                             ('B', self.n) + hw)
        if (history.shape[1:] != (self.k,) + hw):
            raise ShapeError('PolicyNet history', history.shape,
                             ('B', self.k) + hw)
        if (proprio.shape[1:] != (PROPRIO_DIM,)):
            raise ShapeError('PolicyNet proprio', proprio.shape,
                             ('B', PROPRIO_DIM))

    def forward(self, imagined: np.ndarray, history: np.ndarray,
                proprio: np.ndarray) -> Tensor:
        """
        Batched inputs -> [B, m, 3] normalized outputs: (tanh dx, tanh dy,
        sigmoid grip). Multiply the first two by the step bound for actions.
        """
        self._check(imagined, history, proprio)
        batch, width = imagined.shape[0], self.width
        types = self.type_embed
        img = self.imagined_encoder(imagined) + self.imagined_pos + types[0]
        hist = self.history_encoder(history) + self.history_pos + types[1]
        prop = self.proprio(Tensor(proprio)).reshape(batch, 1, width) + \
            types[2]
        query = (self.queries + types[3]).reshape(1, self.m, width) + \
            Tensor(np.zeros((batch, 1, 1)))
        x = F.concat([img, hist, prop, query], axis=1)
        for block in self.trunk:
            x = block(x)
        out = self.head(self.norm_out(x[:, -self.m:]))
        motion = out[:, :, 0:2].tanh()
        grip = out[:, :, 2:3].sigmoid()
        return F.concat([motion, grip], axis=2)


def to_actions(normalized: np.ndarray) -> np.ndarray:
    """[.., 3] normalized outputs -> (dx, dy, grip) actions."""
    out = np.array(normalized, dtype=np.float64)
    out[..., :2] *= STEP_BOUND
    return out


def normalize_actions(actions: np.ndarray) -> np.ndarray:
    out = np.array(actions, dtype=np.float64)
    out[..., :2] /= STEP_BOUND
    return out


def predict_chunk(inp: PolicyInput, net: PolicyNet) -> List[Action]:
    """
    The action chunk for one input: `m` actions, already inside the
    action bounds.
    """
    with no_grad():
        out = net(inp.imagined[None], inp.history[None],
                  np.asarray(inp.proprio, dtype=np.float64)[None])
    return [Action(*row).clamped() for row in to_actions(out.data[0])]


def save_policy(path: str, net: PolicyNet,
                meta: Optional[Dict[str, Any]] = None) -> None:
    meta = dict(meta or {})
    meta['architecture'] = net.architecture()
    write_checkpoint(path, 'policy', net.state_dict(), meta)


def load_policy(path: str) -> Tuple[PolicyNet, Dict[str, Any]]:
    _, arrays, meta = read_checkpoint(path, 'policy')
    arch = meta.get('architecture')
    if (arch is None):
        raise CheckpointError(f'{path}: no policy architecture recorded')
    net = PolicyNet(tuple(arch['frame_hw']), arch['n'], arch['k'],
                    arch['m'], arch['width'], arch['layers'], arch['heads'])
    net.load_state_dict(arrays)
    return net, meta
