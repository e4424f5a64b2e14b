"""
Scene-to-sensor transfer model
==============================

Far-field, 1-D ray model of a mask placed ``d`` above a bare sensor.

Scene points are parameterized by their direction, sampled uniformly in
``tan(theta)`` over ``[-tan(cra), +tan(cra)]`` (``n_scene`` bin centers).
Light from direction ``t`` reaching sensor position ``x`` crossed the mask
at ``x + d * t``. Sensor pixel ``i`` integrates, over its own width, the
mask transmittance blurred by a diffraction box of width
``2.44 * lambda * d / delta``. The mask itself is piecewise constant with
features of width ``delta``, which supplies the geometric blur.

Both the pixel aperture and the diffraction kernel are boxes, so every
matrix entry is an exact weighted sum of mask features whose weights come
from the CDF of a sum of two uniform variables (a trapezoid).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Union

import numpy as np

from .errors import DimensionMismatch, OutOfFieldOfView, TooLarge, ValidationError
from .recon import SeparableSystem, center_rows
from .seq import MaskPattern, SignSequence

DIFFRACTION_FACTOR = 2.44
DENSE_LIMIT = 128


@dataclass(frozen=True)
class OpticsConfig:
    """Physical parameters of one axis (the camera is square).

    Lengths are in micrometers, angles in degrees. ``diffraction=False``
    removes the diffraction box, leaving the pure geometric shadow model.
    """

    d_um: float
    delta_um: float
    pixel_um: float
    cra_deg: float = 45.0
    lambda_um: float = 0.55
    n_scene: int = 64
    m_sensor: int = 64
    diffraction: bool = True

    def __post_init__(self):
        for name in ("d_um", "delta_um", "pixel_um", "lambda_um"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ValidationError(f"{name} must be a positive length, got {v!r}")
        if not 0 < self.cra_deg < 90:
            raise ValidationError("cra_deg must lie in (0, 90)")
        if int(self.n_scene) != self.n_scene or self.n_scene < 1:
            raise ValidationError("n_scene must be a positive integer")
        if int(self.m_sensor) != self.m_sensor or self.m_sensor < 1:
            raise ValidationError("m_sensor must be a positive integer")

    def replace(self, **changes) -> "OpticsConfig":
        return replace(self, **changes)

    @property
    def tan_cra(self) -> float:
        return math.tan(math.radians(self.cra_deg))

    @property
    def diffraction_um(self) -> float:
        return DIFFRACTION_FACTOR * self.lambda_um * self.d_um / self.delta_um if self.diffraction else 0.0

    @property
    def sensor_width_um(self) -> float:
        return self.m_sensor * self.pixel_um

    def pixel_centers(self) -> np.ndarray:
        m = self.m_sensor
        return (np.arange(m) - (m - 1) / 2.0) * self.pixel_um

    def scene_tangents(self) -> np.ndarray:
        """Bin-center tangents of the scene directions."""
        n = self.n_scene
        return self.tan_cra * (2.0 * (np.arange(n) + 0.5) / n - 1.0)

    def mask_shifts(self) -> np.ndarray:
        """Lateral shadow shift ``d * tan(theta_j)`` for each scene direction."""
        return self.d_um * self.scene_tangents()

    def support_half_width(self) -> float:
        """Half width of the pixel-aperture-plus-diffraction kernel."""
        return 0.5 * (self.pixel_um + self.diffraction_um)

    def required_features(self) -> int:
        """Smallest centered mask length (in features) covering every ray."""
        span = self.pixel_centers()[-1] - self.pixel_centers()[0]
        span += self.mask_shifts()[-1] - self.mask_shifts()[0]
        span += 2.0 * self.support_half_width()
        return int(math.ceil(span / self.delta_um - 1e-9))


def pixel_window_width(config: OpticsConfig) -> float:
    """Width of mask seen by one pixel, ``w = 2 d tan(cra)``."""
    return 2.0 * config.d_um * config.tan_cra


def ideal_spacing(n_scene: int, delta_um: float, cra_deg: float) -> float:
    """Mask distance putting exactly ``n_scene`` features in each pixel's window."""
    if n_scene <= 0 or delta_um <= 0 or not 0 < cra_deg < 90:
        raise ValidationError("ideal_spacing needs positive inputs and 0 < cra < 90")
    return n_scene * delta_um / (2.0 * math.tan(math.radians(cra_deg)))


def blur_sizes(config: OpticsConfig) -> dict:
    """Diffraction and geometric blur widths and the feature size that balances them."""
    lam_d = DIFFRACTION_FACTOR * config.lambda_um * config.d_um
    return {
        "diffraction_um": lam_d / config.delta_um,
        "geometric_um": config.delta_um,
        "optimal_delta_um": math.sqrt(lam_d),
    }


def psf_support_width(config: OpticsConfig) -> float:
    """Total support of a single-feature shadow (geometric box convolved with diffraction box)."""
    return config.delta_um + blur_sizes(config)["diffraction_um"]


def _sum_uniform_cdf(u: np.ndarray, a: float, b: float) -> np.ndarray:
    """CDF of ``U(-a/2, a/2) + U(-b/2, b/2)`` evaluated at ``u``."""
    if b <= 1e-12 * a:
        return np.clip(u / a + 0.5, 0.0, 1.0)
    if a <= 1e-12 * b:
        return np.clip(u / b + 0.5, 0.0, 1.0)
    h1 = 0.5 * (a + b)
    h2 = 0.5 * abs(a - b)
    u = np.clip(u, -h1, h1)

    def ramp2(x):
        return 0.5 * np.square(np.maximum(x, 0.0))

    return (ramp2(u + h1) - ramp2(u + h2) - ramp2(u - h2) + ramp2(u - h1)) / (a * b)


def _pattern_values(pattern) -> np.ndarray:
    if isinstance(pattern, SignSequence):
        return pattern.values.astype(float)
    if isinstance(pattern, MaskPattern):
        if pattern.transmittance.ndim != 1:
            raise ValidationError("1-D transfer needs a 1-D pattern")
        return np.asarray(pattern.transmittance, dtype=float)
    v = np.asarray(pattern, dtype=float)
    if v.ndim != 1 or v.size == 0:
        raise ValidationError("1-D transfer needs a non-empty 1-D pattern")
    if not np.all(np.isfinite(v)):
        raise ValidationError("pattern values must be finite")
    return v


def feature_weights(config: OpticsConfig, n_features: int):
    """Sparse weights linking (pixel, direction) pairs to mask features.

    Returns ``(idx, w)`` of shape ``(M, N, K)``: entry ``[i, j]`` of the
    transfer matrix of a pattern ``p`` is ``sum_k w[i, j, k] * p[idx[i, j, k]]``.
    Weights include the pixel width, so an all-ones pattern gives
    ``pixel_um`` everywhere.

    Raises
    ------
    OutOfFieldOfView
        If a pixel's kernel reaches past either end of the mask.
    """
    delta = config.delta_um
    half = config.support_half_width()
    e0 = -0.5 * n_features * delta
    centers = config.pixel_centers()[:, None] + config.mask_shifts()[None, :]
    tol = 1e-9 * delta
    lo, hi = centers.min() - half, centers.max() + half
    if lo < e0 - tol or hi > -e0 + tol:
        need = config.required_features()
        raise OutOfFieldOfView(
            f"mask of {n_features} features ({n_features * delta:g} um) does not cover "
            f"rays spanning [{lo:g}, {hi:g}] um; at least {need} features are needed"
        )
    k = int(math.ceil(2.0 * half / delta)) + 2
    first = np.floor((centers - half - e0) / delta + 1e-9).astype(np.int64)
    first = np.clip(first, 0, max(n_features - k, 0))
    idx = first[..., None] + np.arange(min(k, n_features))
    edges = e0 + delta * np.concatenate([idx, idx[..., -1:] + 1], axis=-1)
    cdf = _sum_uniform_cdf(edges - centers[..., None], config.pixel_um, config.diffraction_um)
    w = config.pixel_um * np.diff(cdf, axis=-1)
    return idx, w


def build_1d_transfer(pattern, config: OpticsConfig) -> np.ndarray:
    """M x N transfer matrix of a 1-D mask pattern.

    Parameters
    ----------
    pattern : SignSequence, 1-D MaskPattern or array_like
        Feature values (signed or optical) laid out centered on the sensor,
        each ``config.delta_um`` wide. It must be long enough to cover every
        ray; see :meth:`OpticsConfig.required_features` and :func:`cover`.
    config : OpticsConfig

    Returns
    -------
    ndarray, shape (m_sensor, n_scene), read-only
    """
    values = _pattern_values(pattern)
    idx, w = feature_weights(config, values.size)
    phi = np.einsum("ijk,ijk->ij", w, values[idx])
    phi.setflags(write=False)
    return phi


def cover(pattern, config: OpticsConfig):
    """Tile (and crop) a pattern to the minimal centered length the geometry needs.

    The result keeps the parity of ``required_features`` so that, in the
    ideal-spacing configuration, feature edges line up with pixel edges.
    """
    values = _pattern_values(pattern)
    need = config.required_features()
    reps = -(-need // values.size)
    return np.tile(values, reps)[:need]


def build_separable_system(left_pattern, right_pattern, config: OpticsConfig,
                           rel_cutoff: float = 1e-10) -> SeparableSystem:
    """Separable system for the mask ``outer(left_pattern, right_pattern)``.

    ``left_pattern`` is the mask's vertical profile (indexed by mask row)
    and yields ``phi_l``, which acts on scene columns; ``right_pattern``
    yields ``phi_r``.
    """
    phi_l = build_1d_transfer(left_pattern, config)
    if right_pattern is left_pattern:
        phi_r = phi_l
    else:
        phi_r = build_1d_transfer(right_pattern, config)
    return SeparableSystem(phi_l, phi_r, rel_cutoff=rel_cutoff)


@dataclass(frozen=True)
class OpticalSeparableSystem:
    """Transfer of the printable mask ``(outer(a, b) + 1 1^T) / 2`` for signed ``a, b``.

    The 0/1 mask is not separable, but it is the average of the signed
    separable mask and the all-open mask, so its response is
    ``0.5 * signed.forward(X) + 0.5 * flat.forward(X)``.
    """

    signed: SeparableSystem
    flat: SeparableSystem

    @property
    def m_sensor(self) -> int:
        return self.signed.m_sensor

    @property
    def n_scene(self) -> int:
        return self.signed.n_scene

    def forward(self, x: np.ndarray) -> np.ndarray:
        return 0.5 * self.signed.forward(x) + 0.5 * self.flat.forward(x)

    def corrected_system(self) -> SeparableSystem:
        """System obeyed by double-centered captures of this mask."""
        return SeparableSystem(0.5 * center_rows(self.signed.phi_l), center_rows(self.signed.phi_r),
                               rel_cutoff=self.signed.rel_cutoff)


def build_optical_system(left_signed, right_signed, config: OpticsConfig,
                         rel_cutoff: float = 1e-10) -> OpticalSeparableSystem:
    """Model of the printed 0/1 mask made from two signed factors."""
    signed = build_separable_system(left_signed, right_signed, config, rel_cutoff)
    ones_l = np.ones(_pattern_values(left_signed).size)
    ones_r = np.ones(_pattern_values(right_signed).size)
    flat = build_separable_system(ones_l, ones_r, config, rel_cutoff)
    return OpticalSeparableSystem(signed, flat)


def system_from_mask(mask: MaskPattern, config: OpticsConfig):
    """Separable (signed mask) or optical-separable (0/1 mask with signed factors) model."""
    if mask.factors is None:
        raise ValidationError("mask has no stored factors; use build_dense_transfer")
    a, b = mask.factors
    if mask.form == "signed" or mask.is_separable:
        return build_separable_system(a, b, config)
    if np.all(np.abs(a) == 1) and np.all(np.abs(b) == 1):
        return build_optical_system(a, b, config)
    raise ValidationError("optical mask factors are neither signed nor an exact factorization")


@dataclass(frozen=True)
class DenseSystem:
    """Full ``M^2 x N^2`` transfer for column-major ``vec`` of scene and sensor."""

    phi: np.ndarray
    m_sensor: int
    n_scene: int

    def __post_init__(self):
        if self.phi.shape != (self.m_sensor ** 2, self.n_scene ** 2):
            raise DimensionMismatch("dense phi has the wrong shape")

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n_scene, self.n_scene):
            raise DimensionMismatch(f"scene shape {x.shape} != {(self.n_scene,) * 2}")
        y = self.phi @ x.reshape(-1, order="F")
        return y.reshape(self.m_sensor, self.m_sensor, order="F")


def _dense_weights(config: OpticsConfig, n_features: int) -> np.ndarray:
    idx, w = feature_weights(config, n_features)
    full = np.zeros(idx.shape[:2] + (n_features,))
    np.put_along_axis(full, idx, w, axis=-1)
    return full.reshape(-1, n_features)


def build_dense_transfer(mask: Union[MaskPattern, np.ndarray], config: OpticsConfig) -> DenseSystem:
    """Dense transfer of an arbitrary (possibly non-separable) 2-D mask.

    Column ``j1 + N * j2`` is the vectorized sensor image of a unit point
    source in direction ``(j1, j2)``; rows are ordered ``i1 + M * i2`` where
    index 1 runs down the sensor columns (the ``phi_l`` axis).
    """
    t = mask.transmittance if isinstance(mask, MaskPattern) else np.asarray(mask, dtype=float)
    if t.ndim != 2:
        raise ValidationError("dense transfer needs a 2-D mask")
    m, n = config.m_sensor, config.n_scene
    if m > DENSE_LIMIT or n > DENSE_LIMIT:
        raise TooLarge(f"dense transfer limited to N, M <= {DENSE_LIMIT}")
    w0 = _dense_weights(config, t.shape[0])
    w1 = _dense_weights(config, t.shape[1])
    g = (w0 @ t @ w1.T).reshape(m, n, m, n)
    phi = np.ascontiguousarray(g.transpose(2, 0, 3, 1).reshape(m * m, n * n))
    phi.setflags(write=False)
    return DenseSystem(phi, m, n)
