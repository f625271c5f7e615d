"""
Fréchet feature distance (FFD) between two sets of clips. Clip features are
a fixed, seeded random projection of the block-mean downsampled frames;
these numbers are not comparable to FVD values.
"""
import logging
from typing import Tuple
import numpy as np
from scipy import linalg
from saydream.errors import ShapeError

logger = logging.getLogger(__name__)

JITTER = 1e-6
DOWNSAMPLED = 8


def downsample(clips: np.ndarray, size: int = DOWNSAMPLED) -> np.ndarray:
    """Block-mean [N, n, H, W, C] clips to [N, n, size, size, C]."""
    *lead, height, width, chans = np.shape(clips)
    fh, fw = max(height // size, 1), max(width // size, 1)
    x = np.asarray(clips, dtype=np.float64)
    x = x[..., :height // fh * fh, :width // fw * fw, :]
    x = x.reshape(*lead, height // fh, fh, width // fw, fw, chans)
    return x.mean(axis=(-4, -2))


def clip_features(clips: np.ndarray, seed: int = 1234,
                  dims: int = 64) -> np.ndarray:
    """[N, n, H, W, 3] clips -> [N, dims] features."""
    flat = downsample(clips).reshape(len(clips), -1)
    proj = np.random.default_rng(seed).standard_normal((flat.shape[1], dims))
    return flat @ (proj / np.sqrt(flat.shape[1]))


def gaussian_stats(features: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    features = np.asarray(features, dtype=np.float64)
    if (features.ndim == 1):
        features = features[:, None]
    if (len(features) < 2):
        raise ValueError(f'need at least 2 samples, got {len(features)}')
    return features.mean(axis=0), np.atleast_2d(np.cov(features,
                                                        rowvar=False))


def _sqrt_psd(matrix: np.ndarray) -> np.ndarray:
    vals, vecs = linalg.eigh(matrix)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def frechet_distance(mu1: np.ndarray, sigma1: np.ndarray, mu2: np.ndarray,
                     sigma2: np.ndarray) -> Tuple[float, bool]:
    """
    d^2 = |mu1 - mu2|^2 + Tr(S1 + S2 - 2 (S1 S2)^(1/2)), with the trace of
    the square root taken from the symmetric matrix S1^(1/2) S2 S1^(1/2).
    Singular covariances get a diagonal jitter of 1e-6.

    Returns:
      The squared distance and whether jitter was added.
    """
    if (np.shape(sigma1) != np.shape(sigma2)):
        raise ShapeError('frechet_distance', np.shape(sigma1),
                         np.shape(sigma2))
    jittered = False
    if (min(linalg.eigvalsh(sigma1)[0], linalg.eigvalsh(sigma2)[0]) <= 1e-12):
        offset = JITTER * np.eye(len(sigma1))
        sigma1, sigma2 = sigma1 + offset, sigma2 + offset
        jittered = True
        logger.debug('singular covariance: adding %g jitter', JITTER)
    root1 = _sqrt_psd(sigma1)
    inner = root1 @ sigma2 @ root1
    inner = (inner + inner.T) / 2.0
    tr_covmean = float(np.sum(np.sqrt(np.clip(linalg.eigvalsh(inner), 0.0,
                                              None))))
    diff = mu1 - mu2
    d2 = float(diff @ diff + np.trace(sigma1) + np.trace(sigma2) -
               2.0 * tr_covmean)
    return max(d2, 0.0), jittered


def feature_distance(features_a: np.ndarray,
                     features_b: np.ndarray) -> Tuple[float, bool]:
    """Fréchet distance between the Gaussian fits of two feature sets."""
    mu1, sigma1 = gaussian_stats(features_a)
    mu2, sigma2 = gaussian_stats(features_b)
    return frechet_distance(mu1, sigma1, mu2, sigma2)


def frechet_feature_distance(set_a: np.ndarray, set_b: np.ndarray,
                             extractor_seed: int = 1234,
                             dims: int = 64) -> Tuple[float, bool]:
    """FFD between two [N, n, H, W, 3] clip sets (N >= 2 each)."""
    if (len(set_a) < 2 or len(set_b) < 2):
        raise ValueError('FFD needs at least 2 clips per set')
    return feature_distance(clip_features(set_a, extractor_seed, dims),
                            clip_features(set_b, extractor_seed, dims))
