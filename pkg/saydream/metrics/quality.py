"""
Frame quality scores on luma (0.299 R + 0.587 G + 0.114 B) images.
"""
import numpy as np
from scipy.ndimage import uniform_filter
from saydream.errors import ShapeError

LUMA = np.array([0.299, 0.587, 0.114])
PSNR_CAP = 99.0


def to_gray(images: np.ndarray) -> np.ndarray:
    """[..., H, W, 3] color images to [..., H, W] luma; other input is
    returned unchanged."""
    images = np.asarray(images, dtype=np.float64)
    if (images.ndim >= 3 and images.shape[-1] == 3):
        return images @ LUMA
    return images


def _pair(a: np.ndarray, b: np.ndarray, op: str):
    a, b = np.asarray(a), np.asarray(b)
    if (a.shape != b.shape):
        raise ShapeError(op, a.shape, b.shape)
    return to_gray(a), to_gray(b)


def ssim(a: np.ndarray, b: np.ndarray, window: int = 7, k1: float = 0.01,
         k2: float = 0.03, L: float = 1.0) -> float:
    """
    Mean structural similarity over all full `window` x `window` windows of
    every image (leading axes are treated as a batch of images).

    Raises:
      ShapeError: if the shapes of `a` and `b` differ.
    """
    x, y = _pair(a, b, 'ssim')
    if (min(x.shape[-2:]) < window):
        raise ShapeError('ssim', x.shape, (window, window),
                         'image smaller than the window')
    c1, c2 = (k1 * L) ** 2, (k2 * L) ** 2
    size = (1,) * (x.ndim - 2) + (window, window)

    def mean(v: np.ndarray) -> np.ndarray:
        return uniform_filter(v, size=size, mode='reflect')

    mu_x, mu_y = mean(x), mean(y)
    var_x = mean(x * x) - mu_x * mu_x
    var_y = mean(y * y) - mu_y * mu_y
    cov = mean(x * y) - mu_x * mu_y
    smap = ((2 * mu_x * mu_y + c1) * (2 * cov + c2)) / \
        ((mu_x * mu_x + mu_y * mu_y + c1) * (var_x + var_y + c2))
    # keep windows that lie fully inside the image
    r = window // 2
    smap = smap[..., r:smap.shape[-2] - r, r:smap.shape[-1] - r]
    return float(np.mean(smap))


def psnr(a: np.ndarray, b: np.ndarray, cap: float = PSNR_CAP) -> float:
    """
    10 log10(1 / mse) in dB for images in [0, 1]; identical images return
    `cap`.

    Raises:
      ShapeError: if the shapes of `a` and `b` differ.
    """
    x, y = _pair(a, b, 'psnr')
    mse = float(np.mean((x - y) ** 2))
    if (mse == 0.0):
        return cap
    return min(cap, 10.0 * np.log10(1.0 / mse))


def clip_scores(generated: np.ndarray, truth: np.ndarray) -> np.ndarray:
    """Per-clip (ssim, psnr) rows for [N, n, H, W, 3] clip batches."""
    if (np.shape(generated) != np.shape(truth)):
        raise ShapeError('clip_scores', np.shape(generated), np.shape(truth))
    return np.array([(ssim(g, t), psnr(g, t))
                     for g, t in zip(generated, truth)])
