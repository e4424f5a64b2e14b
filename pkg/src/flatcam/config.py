"""
Experiment configuration
========================

JSON documents with four sections::

    {
      "optics": {"d_um": 500, "delta_um": 30, "pixel_um": 6.45, "cra_deg": 45,
                 "lambda_um": 0.55, "n_scene": 512, "m_sensor": 512},
      "mask":   {"kind": "mls", "degree": 8, "taps": null, "repeats": 2,
                 "open_fraction": 0.5, "seed": 0},
      "noise":  {"sigma": 1e-5, "frames": 20, "seed": 0},
      "recon":  {"method": "tikhonov", "tau": null, "lambda": null,
                 "huber_eps": null, "max_iters": 500, "rel_tol": 1e-8}
    }

Missing keys take the defaults below; unknown sections or keys are
rejected. ``optics`` also accepts ``diffraction`` (bool) and
``sensor_width_um``, the physical sensor width used for the
thickness-to-width ratio when it differs from ``m_sensor * pixel_um``
(the visible camera subsamples a 6.7 mm sensor down to 512 pixels).
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import ValidationError
from .optics import OpticsConfig
from .seq import (
    MaskPattern,
    gen_m_sequence,
    gen_pinhole,
    gen_random_binary,
    gen_uniform_random,
    outer_mask,
    to_optical,
)

MASK_KINDS = ("mls", "random", "uniform", "pinhole")
METHODS = ("ls", "tikhonov", "tv")


@dataclass(frozen=True)
class MaskSpec:
    """Mask recipe.

    ``mls``: outer product of an M-sequence with itself, tiled ``repeats``
    times, printed as 0/1. ``random``: the same with two random +-1 factors
    of length ``(2**degree - 1) * repeats``. ``uniform``: non-separable
    transmittance in [0, 1]. ``pinhole``: a single open feature.
    """

    kind: str = "mls"
    degree: int = 8
    taps: Optional[int] = None
    repeats: int = 1
    open_fraction: float = 0.5
    seed: int = 0

    def __post_init__(self):
        if self.kind not in MASK_KINDS:
            raise ValidationError(f"mask kind must be one of {MASK_KINDS}, got {self.kind!r}")
        if not isinstance(self.degree, int) or not 2 <= self.degree <= 16:
            raise ValidationError("mask degree must be an integer in [2, 16]")
        if not isinstance(self.repeats, int) or self.repeats < 1:
            raise ValidationError("mask repeats must be a positive integer")
        if not 0 < self.open_fraction < 1:
            raise ValidationError("mask open_fraction must lie in (0, 1)")

    @property
    def length(self) -> int:
        return ((1 << self.degree) - 1) * self.repeats


@dataclass(frozen=True)
class NoiseSpec:
    """Additive Gaussian sensor noise.

    ``sigma`` is relative: the simulator multiplies it by the RMS sensor
    value of a flat white scene.
    """

    sigma: float = 0.0
    frames: int = 1
    seed: int = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma >= 0):
            raise ValidationError("noise sigma must be a nonnegative number")
        if not isinstance(self.frames, int) or self.frames < 1:
            raise ValidationError("noise frames must be a positive integer")


@dataclass(frozen=True)
class ReconSpec:
    method: str = "tikhonov"
    tau: Optional[float] = None
    lam: Optional[float] = None
    huber_eps: Optional[float] = None
    max_iters: int = 500
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValidationError(f"recon method must be one of {METHODS}, got {self.method!r}")
        for name in ("tau", "lam"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise ValidationError(f"{name} must be nonnegative")
        if self.huber_eps is not None and not self.huber_eps > 0:
            raise ValidationError("huber_eps must be positive")
        if not isinstance(self.max_iters, int) or self.max_iters < 1:
            raise ValidationError("max_iters must be a positive integer")
        if not 0 < self.rel_tol < 1:
            raise ValidationError("rel_tol must lie in (0, 1)")


# JSON key -> dataclass field, where they differ
_RECON_KEYS = {"lambda": "lam"}


def _section(cls, data, name, renames=None):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"config section {name!r} must be an object")
    renames = renames or {}
    json_key = {v: k for k, v in renames.items()}
    allowed = {json_key.get(f.name, f.name) for f in dataclasses.fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ValidationError(f"unknown key(s) in {name!r}: {sorted(unknown)}")
    kwargs = {renames.get(k, k): v for k, v in data.items()}
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ValidationError(f"bad {name!r} section: {exc}") from None


_OPTICS_KEYS = {f.name for f in dataclasses.fields(OpticsConfig)}


@dataclass(frozen=True)
class ExperimentConfig:
    optics: OpticsConfig
    mask: MaskSpec = field(default_factory=MaskSpec)
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    recon: ReconSpec = field(default_factory=ReconSpec)
    sensor_width_um: Optional[float] = None

    def __post_init__(self):
        if self.sensor_width_um is not None and not self.sensor_width_um > 0:
            raise ValidationError("sensor_width_um must be positive")

    @property
    def sensor_width(self) -> float:
        """Physical sensor width in micrometers."""
        if self.sensor_width_um is not None:
            return float(self.sensor_width_um)
        return self.optics.sensor_width_um

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        if not isinstance(data, dict):
            raise ValidationError("config must be a JSON object")
        unknown = set(data) - {"optics", "mask", "noise", "recon"}
        if unknown:
            raise ValidationError(f"unknown config section(s): {sorted(unknown)}")
        optics = dict(data.get("optics") or {})
        width = optics.pop("sensor_width_um", None)
        bad = set(optics) - _OPTICS_KEYS
        if bad:
            raise ValidationError(f"unknown key(s) in 'optics': {sorted(bad)}")
        missing = {"d_um", "delta_um", "pixel_um"} - set(optics)
        if missing:
            raise ValidationError(f"'optics' is missing {sorted(missing)}")
        try:
            oc = OpticsConfig(**optics)
        except TypeError as exc:
            raise ValidationError(f"bad 'optics' section: {exc}") from None
        return cls(
            optics=oc,
            mask=_section(MaskSpec, data.get("mask"), "mask"),
            noise=_section(NoiseSpec, data.get("noise"), "noise"),
            recon=_section(ReconSpec, data.get("recon"), "recon", _RECON_KEYS),
            sensor_width_um=width,
        )

    def to_dict(self) -> dict:
        optics = dataclasses.asdict(self.optics)
        if self.sensor_width_um is not None:
            optics["sensor_width_um"] = self.sensor_width_um
        recon = dataclasses.asdict(self.recon)
        recon["lambda"] = recon.pop("lam")
        return {
            "optics": optics,
            "mask": dataclasses.asdict(self.mask),
            "noise": dataclasses.asdict(self.noise),
            "recon": recon,
        }

    def replace(self, **sections) -> "ExperimentConfig":
        return dataclasses.replace(self, **sections)

    def with_seed(self, seed: int) -> "ExperimentConfig":
        """Same experiment with the mask and noise seeds set to ``seed``."""
        return self.replace(mask=dataclasses.replace(self.mask, seed=seed),
                            noise=dataclasses.replace(self.noise, seed=seed))


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return ExperimentConfig.from_dict(data)


PRESETS = {
    # Sony ICX285 behind a chrome-on-quartz mask on the 0.5 mm hot mirror;
    # the 1036-row, 6.45 um sensor is subsampled to 512 x 512.
    "visible": {
        "optics": {"d_um": 500.0, "delta_um": 30.0, "pixel_um": 6.45, "cra_deg": 45.0,
                   "lambda_um": 0.55, "n_scene": 512, "m_sensor": 512, "sensor_width_um": 6700.0},
        "mask": {"kind": "mls", "degree": 8, "repeats": 2},
        "noise": {"sigma": 1e-5, "frames": 20, "seed": 0},
        "recon": {"method": "tikhonov"},
    },
    # InGaAs sensor, 25 um pixels binned 4 x 4, mask 5 mm away.
    "swir": {
        "optics": {"d_um": 5000.0, "delta_um": 100.0, "pixel_um": 100.0, "cra_deg": 45.0,
                   "lambda_um": 1.55, "n_scene": 64, "m_sensor": 64},
        "mask": {"kind": "mls", "degree": 7, "repeats": 2},
        "noise": {"sigma": 1e-5, "frames": 1, "seed": 0},
        "recon": {"method": "tikhonov"},
    },
}


def preset(name: str) -> ExperimentConfig:
    if name not in PRESETS:
        raise ValidationError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    return ExperimentConfig.from_dict(PRESETS[name])


def build_mask(spec: MaskSpec, optics: OpticsConfig) -> MaskPattern:
    """Signed mask for separable kinds, optical mask for the others.

    Separable masks keep their factors so the simulator can use the fast
    separable model. Non-separable kinds are sized to exactly cover the
    field of view of ``optics``.
    """
    delta = optics.delta_um
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "mls":
        a = gen_m_sequence(spec.degree, spec.taps)
        return outer_mask(a, a, spec.repeats, delta)
    if spec.kind == "random":
        n = (1 << spec.degree) - 1
        s1, s2 = (int(s) for s in rng.integers(0, 2 ** 31, size=2))
        a = gen_random_binary(n, spec.open_fraction, s1)
        b = gen_random_binary(n, spec.open_fraction, s2)
        return outer_mask(a, b, spec.repeats, delta)
    L = optics.required_features()
    if spec.kind == "uniform":
        return gen_uniform_random((L, L), spec.seed).with_feature_size(delta)
    p = gen_pinhole(L, 1).transmittance
    return MaskPattern(np.outer(p, p), "optical", delta, (p, p))


def printable(mask: MaskPattern) -> MaskPattern:
    """The 0/1 (or graded) mask that is physically printed."""
    return to_optical(mask) if mask.form == "signed" else mask
