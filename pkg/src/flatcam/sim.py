"""Sensor capture simulation and the row/column mean correction."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, ValidationError


@dataclass(frozen=True)
class SensorImage:
    """An M x M measurement; ``corrected`` marks double-centered data."""

    values: np.ndarray
    corrected: bool = False

    def __post_init__(self):
        v = np.array(self.values, dtype=float, copy=True)
        if v.ndim != 2:
            raise DimensionMismatch("sensor image must be 2-D")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def shape(self):
        return self.values.shape

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def _scene_array(scene) -> np.ndarray:
    x = np.asarray(scene, dtype=float)
    if x.ndim != 2:
        raise DimensionMismatch("scene must be a 2-D array")
    if not np.all(np.isfinite(x)):
        raise ValidationError("scene has non-finite entries")
    return x


def _noise(shape, noise_sigma: float, rng_seed, frames: int) -> np.ndarray:
    if noise_sigma < 0:
        raise ValidationError("noise_sigma must be nonnegative")
    if frames < 1:
        raise ValidationError("frames must be >= 1")
    if noise_sigma == 0:
        return np.zeros(shape)
    rng = np.random.default_rng(rng_seed)
    return rng.normal(0.0, noise_sigma / np.sqrt(frames), size=shape)


def capture(system, scene, noise_sigma: float = 0.0, rng_seed: Optional[int] = 0,
            frames: int = 1) -> SensorImage:
    """Uncorrected capture ``forward(X) + E`` with i.i.d. Gaussian ``E``.

    ``system`` is anything with a ``forward`` method: a
    :class:`~flatcam.recon.SeparableSystem`, an
    :class:`~flatcam.optics.OpticalSeparableSystem` (printed 0/1 mask) or a
    :class:`~flatcam.optics.DenseSystem`. Averaging ``frames`` exposures
    divides the noise variance by ``frames``.
    """
    y = system.forward(_scene_array(scene))
    return SensorImage(y + _noise(y.shape, noise_sigma, rng_seed, frames))


def capture_dense(dense, scene, noise_sigma: float = 0.0, rng_seed: Optional[int] = 0,
                  frames: int = 1) -> SensorImage:
    """Capture through a dense ``M^2 x N^2`` transfer (``y = Phi vec(X) + e``)."""
    x = _scene_array(scene)
    if x.shape != (dense.n_scene, dense.n_scene):
        raise DimensionMismatch(f"scene shape {x.shape} does not match dense system")
    return capture(dense, x, noise_sigma, rng_seed, frames)


def mean_correct(y) -> SensorImage:
    """Double-centering: remove row and column means, add back the grand mean.

    Every row and column of the result sums to zero. The map is linear and
    idempotent, so applying it to already corrected data changes nothing.
    """
    v = np.asarray(y.values if isinstance(y, SensorImage) else y, dtype=float)
    if v.ndim != 2:
        raise DimensionMismatch("sensor image must be 2-D")
    out = v - v.mean(axis=1, keepdims=True) - v.mean(axis=0, keepdims=True) + v.mean()
    return SensorImage(out, corrected=True)


def numerical_rank(matrix, rel_tol: float = 1e-8) -> int:
    """Number of singular values above ``rel_tol * sigma_max``."""
    if not 0 < rel_tol < 1:
        raise ValidationError("rel_tol must lie in (0, 1)")
    s = np.linalg.svd(np.asarray(matrix, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > rel_tol * s[0]))


def phantom(n: int, n_shapes: int = 6, rng_seed: Optional[int] = 0) -> np.ndarray:
    """Piecewise-constant test scene in [0, 1]: random rectangles and disks.

    Shapes are painted over a dim background in random order, each with a
    constant intensity, so the scene has sharp edges and flat regions.
    """
    if n < 2:
        raise ValidationError("phantom size must be at least 2")
    rng = np.random.default_rng(rng_seed)
    x = np.full((n, n), 0.1)
    rows, cols = np.mgrid[0:n, 0:n]
    for _ in range(n_shapes):
        level = rng.uniform(0.3, 1.0)
        cy, cx = rng.uniform(0.15 * n, 0.85 * n, size=2)
        if rng.random() < 0.5:
            hy, hx = rng.uniform(0.08 * n, 0.25 * n, size=2)
            region = (np.abs(rows - cy) <= hy) & (np.abs(cols - cx) <= hx)
        else:
            r = rng.uniform(0.08 * n, 0.22 * n)
            region = (rows - cy) ** 2 + (cols - cx) ** 2 <= r * r
        x[region] = level
    return x
