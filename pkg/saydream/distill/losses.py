"""
Hinge adversarial losses over per-location score maps. Every function takes
one score map per discriminator head and averages the per-head means.

    L_D = relu(1 - D(real)) + relu(1 + D(fake))
    L_G = -D(fake)
"""
from typing import Sequence, Union
import numpy as np
from saydream.autodiff import Tensor, as_tensor
from saydream.errors import ShapeError

Scores = Sequence[Union[Tensor, np.ndarray]]


def _heads(scores: Scores):
    if (len(scores) == 0):
        raise ValueError('no discriminator scores given')
    return [as_tensor(s) for s in scores]


def real(scores: Tensor) -> Tensor:
    return (1.0 - scores).relu().mean()


def fake(scores: Tensor) -> Tensor:
    return (1.0 + scores).relu().mean()


def generated(scores: Tensor) -> Tensor:
    return (-scores).mean()


def disc_loss(real_scores: Scores, fake_scores: Scores) -> Tensor:
    """
    Raises:
      ShapeError: if a real and a fake score map differ in shape.
    """
    reals, fakes = _heads(real_scores), _heads(fake_scores)
    if (len(reals) != len(fakes)):
        raise ValueError(f'{len(reals)} real vs {len(fakes)} fake heads')
    total = None
    for r, f in zip(reals, fakes):
        if (r.shape != f.shape):
            raise ShapeError('disc_loss', r.shape, f.shape)
        term = real(r) + fake(f)
        total = term if total is None else total + term
    return total / len(reals)


def gen_adv_loss(fake_scores: Scores) -> Tensor:
    fakes = _heads(fake_scores)
    total = None
    for f in fakes:
        term = generated(f)
        total = term if total is None else total + term
    return total / len(fakes)
