from typing import Callable, Optional, Sequence
import numpy as np
from saydream.autodiff.tensor import Tensor, no_grad


def _relative_error(analytic: np.ndarray, numeric: np.ndarray,
                    floor: float = 0.0) -> float:
    err = np.abs(analytic - numeric) / np.maximum(
        np.abs(analytic) + np.abs(numeric) + 1e-12, floor)
    return float(np.max(err)) if err.size else 0.0


def finite_diff_check(f: Callable[[Tensor], Tensor], x: Tensor,
                      eps: float = 1e-5) -> float:
    """
    Compare the reverse-mode gradient of the scalar function `f` at `x`
    against central differences.

    Returns:
      The maximum over coordinates of |analytic - cd| / (|analytic| + |cd| +
      1e-12).
    """
    leaf = Tensor(np.array(x.data), requires_grad=True)
    f(leaf).backward()
    analytic = leaf.grad if leaf.grad is not None else \
        np.zeros_like(leaf.data)
    numeric = np.zeros_like(leaf.data)
    base = np.array(x.data)
    with no_grad():
        for i in np.ndindex(base.shape):
            plus = base.copy()
            plus[i] += eps
            minus = base.copy()
            minus[i] -= eps
            numeric[i] = (f(Tensor(plus)).item()
                          - f(Tensor(minus)).item()) / (2 * eps)
    return _relative_error(analytic, numeric)


def param_grad_check(loss_fn: Callable[[], Tensor], params: Sequence[Tensor],
                     eps: float = 1e-5, max_coords: Optional[int] = None,
                     rng: Optional[np.random.Generator] = None,
                     floor: float = 0.0) -> float:
    """
    The network form of `finite_diff_check`: differentiate the zero-argument
    `loss_fn` with respect to each tensor in `params`, perturbing either every
    coordinate or a random subset of at most `max_coords` per tensor. Errors
    are taken relative to at least `floor`, so near-zero gradients of deep
    networks compare absolutely.
    """
    for p in params:
        p.grad = None
    loss_fn().backward()
    analytic_all = [np.array(p.grad) if p.grad is not None
                    else np.zeros_like(p.data) for p in params]
    worst = 0.0
    rng = rng if rng is not None else np.random.default_rng(0)
    with no_grad():
        for p, analytic in zip(params, analytic_all):
            coords = list(np.ndindex(p.shape))
            if (max_coords is not None and len(coords) > max_coords):
                picks = rng.choice(len(coords), size=max_coords,
                                   replace=False)
                coords = [coords[i] for i in sorted(picks)]
            numeric = np.zeros(len(coords))
            for j, i in enumerate(coords):
                original = p.data[i]
                p.data[i] = original + eps
                up = loss_fn().item()
                p.data[i] = original - eps
                down = loss_fn().item()
                p.data[i] = original
                numeric[j] = (up - down) / (2 * eps)
            picked = np.array([analytic[i] for i in coords])
            worst = max(worst, _relative_error(picked, numeric, floor))
    return worst
