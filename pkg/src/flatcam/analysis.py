"""
Conditioning and design-space analysis
======================================

Singular spectra of simulated transfer matrices for competing mask
designs, and the flatness / light-throughput figures of merit.

The comparison presets all place the mask 500 um above the sensor with
550 nm light and a 45 degree chief ray angle:

* ``compare_transparency`` and ``compare_separability`` contrast pattern
  families, so they use the ideal circulant geometry (feature size equal to
  the pixel pitch, ``d = N delta / 2 tan(cra)``) without diffraction; only
  the pattern differs between candidates.
* ``compare_pinhole_mls`` studies the feature size, so it keeps the full
  diffraction model with ``pixel = delta`` and a fixed ``N = M``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .errors import TooLarge, ValidationError
from .optics import DENSE_LIMIT, OpticsConfig, build_1d_transfer, build_dense_transfer, cover
from .seq import MaskPattern, SignSequence, gen_m_sequence, gen_pinhole, gen_random_binary, gen_uniform_random

DEFAULT_D_UM = 500.0
DEFAULT_LAMBDA_UM = 0.55
DEFAULT_CRA_DEG = 45.0
REL_CUTOFF = 1e-10


@dataclass(frozen=True)
class SpectrumReport:
    label: str
    singular_values: np.ndarray = field(repr=False)
    sigma_max: float
    sigma_min_nonzero: float
    condition_number: float
    open_fraction: float
    rank: int
    params: Dict[str, object] = field(default_factory=dict, repr=False)


def spectrum(matrix, label: str = "", open_fraction: float = float("nan"),
             rel_cutoff: float = REL_CUTOFF, params: Optional[dict] = None) -> SpectrumReport:
    """Sorted singular values and condition statistics of a matrix.

    Singular values at or below ``rel_cutoff * sigma_max`` count as zero
    (the same rule as the least-squares reconstruction).
    """
    a = np.asarray(matrix, dtype=float)
    if not np.all(np.isfinite(a)):
        raise ValidationError("matrix has non-finite entries")
    s = np.linalg.svd(a, compute_uv=False)
    s.setflags(write=False)
    smax = float(s[0]) if s.size else 0.0
    nz = s[s > rel_cutoff * smax] if smax > 0 else s[:0]
    smin = float(nz[-1]) if nz.size else 0.0
    cond = smax / smin if smin > 0 else math.inf
    return SpectrumReport(label, s, smax, smin, cond, float(open_fraction), int(nz.size), dict(params or {}))


def _mls_degree(n: int) -> int:
    return int(min(16, max(2, round(math.log2(n + 1)))))


def mls_pattern(n: int, seed: int = 0) -> np.ndarray:
    """Optical M-sequence of the degree closest to ``n``; ``seed`` picks a cyclic shift."""
    deg = _mls_degree(n)
    period = (1 << deg) - 1
    s = gen_m_sequence(deg).to_optical()
    return np.roll(s, -(seed % period))


def circulant_config(n: int = 255, d_um: float = DEFAULT_D_UM, cra_deg: float = DEFAULT_CRA_DEG,
                     lambda_um: float = DEFAULT_LAMBDA_UM, diffraction: bool = False) -> OpticsConfig:
    """Geometry in which exactly ``n`` mask features fall in each pixel's window."""
    delta = 2.0 * d_um * math.tan(math.radians(cra_deg)) / n
    return OpticsConfig(d_um=d_um, delta_um=delta, pixel_um=delta, cra_deg=cra_deg,
                        lambda_um=lambda_um, n_scene=n, m_sensor=n, diffraction=diffraction)


def _spectrum_1d(pattern, config: OpticsConfig, label: str, params: dict) -> SpectrumReport:
    p = cover(pattern, config)
    return spectrum(build_1d_transfer(p, config), label, float(np.mean(pattern)), params=params)


def compare_transparency(d_um: float = DEFAULT_D_UM, seeds: Iterable[int] = (0,),
                         sizes: Iterable[int] = (255,), cra_deg: float = DEFAULT_CRA_DEG,
                         lambda_um: float = DEFAULT_LAMBDA_UM, diffraction: bool = False
                         ) -> List[SpectrumReport]:
    """1-D spectra for random 50%, random 75%, uniform [0, 1] and M-sequence masks.

    One report per (size, seed, mask kind). Labels are ``random50``,
    ``random75``, ``uniform`` and ``mls50``, suffixed with ``_n<size>_s<seed>``
    when several sizes or seeds are requested.
    """
    seeds, sizes = list(seeds), list(sizes)
    tag = len(seeds) > 1 or len(sizes) > 1
    out = []
    for n in sizes:
        cfg = circulant_config(n, d_um, cra_deg, lambda_um, diffraction)
        for seed in seeds:
            suffix = f"_n{n}_s{seed}" if tag else ""
            candidates = {
                "random50": gen_random_binary(n, 0.5, seed).to_optical(),
                "random75": gen_random_binary(n, 0.75, seed).to_optical(),
                "uniform": gen_uniform_random(n, seed).transmittance,
                "mls50": mls_pattern(n, seed),
            }
            for kind, pattern in candidates.items():
                params = {"kind": kind, "n": n, "seed": seed, "delta_um": cfg.delta_um, "cra_deg": cra_deg}
                out.append(_spectrum_1d(pattern, cfg, kind + suffix, params))
    return out


def compare_separability(n: int = 64, seed: int = 0, d_um: float = DEFAULT_D_UM,
                         cra_deg: float = DEFAULT_CRA_DEG, lambda_um: float = DEFAULT_LAMBDA_UM,
                         diffraction: bool = False) -> List[SpectrumReport]:
    """Dense 2-D spectra for two non-separable and two separable masks.

    * ``nonsep_binary``: random 0/1 mask with equal numbers of 0s and 1s,
    * ``nonsep_uniform``: transmittance uniform in [0, 1],
    * ``sep_mls``: outer product of two signed M-sequences with -1 set to 0,
    * ``sep_binary``: outer product of two 0/1 patterns, each ~71% open, so
      that about half of the 2-D mask is open.
    """
    if n > DENSE_LIMIT:
        raise TooLarge(f"dense comparison limited to n <= {DENSE_LIMIT}")
    cfg = circulant_config(n, d_um, cra_deg, lambda_um, diffraction)
    L = cfg.required_features()
    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 31, size=4)
    mls = 2.0 * cover(mls_pattern(n, seed), cfg) - 1.0
    frac = math.sqrt(0.5)
    a = gen_random_binary(L, frac, int(seeds[2])).to_optical()
    b = gen_random_binary(L, frac, int(seeds[3])).to_optical()
    masks = {
        "nonsep_binary": gen_random_binary((L, L), 0.5, int(seeds[0])).transmittance,
        "nonsep_uniform": gen_uniform_random((L, L), int(seeds[1])).transmittance,
        "sep_mls": (np.outer(mls, mls) + 1.0) / 2.0,
        "sep_binary": np.outer(a, b),
    }
    out = []
    for label, t in masks.items():
        dense = build_dense_transfer(t, cfg)
        params = {"n": n, "seed": seed, "delta_um": cfg.delta_um, "mask_features": L}
        out.append(spectrum(dense.phi, label, float(t.mean()), params=params))
    return out


def pinhole_mls_config(delta_um: float, n: int = 255, d_um: float = DEFAULT_D_UM,
                       cra_deg: float = DEFAULT_CRA_DEG, lambda_um: float = DEFAULT_LAMBDA_UM) -> OpticsConfig:
    return OpticsConfig(d_um=d_um, delta_um=delta_um, pixel_um=delta_um, cra_deg=cra_deg,
                        lambda_um=lambda_um, n_scene=n, m_sensor=n, diffraction=True)


def compare_pinhole_mls(deltas_um: Sequence[float] = (30.0, 10.0, 5.0), n: int = 255,
                        d_um: float = DEFAULT_D_UM, cra_deg: float = DEFAULT_CRA_DEG,
                        lambda_um: float = DEFAULT_LAMBDA_UM) -> List[SpectrumReport]:
    """Spectra of a single pinhole and an M-sequence mask for each feature size.

    Both masks use the full diffraction model with ``pixel = delta`` and
    ``N = M = n``. The pinhole is one open feature centered over the sensor.
    Reports come in ``deltas_um`` order, pinhole before MLS.
    """
    out = []
    for delta in deltas_um:
        cfg = pinhole_mls_config(delta, n, d_um, cra_deg, lambda_um)
        L = cfg.required_features()
        pin = gen_pinhole(L, 1).transmittance
        params = {"delta_um": delta, "n": n}
        out.append(spectrum(build_1d_transfer(pin, cfg), f"pinhole_d{delta:g}", 1.0 / L,
                            params={**params, "kind": "pinhole"}))
        mls = mls_pattern(n)
        out.append(_spectrum_1d(mls, cfg, f"mls_d{delta:g}", {**params, "kind": "mls"}))
    return out


@dataclass(frozen=True)
class DesignMetrics:
    twr: float
    light_fraction: float


def design_metrics(thickness_um: float, sensor_width_um: float, mask) -> DesignMetrics:
    """Thickness-to-width ratio and open-area fraction of a mask design."""
    if thickness_um <= 0 or sensor_width_um <= 0:
        raise ValidationError("thickness and sensor width must be positive")
    if isinstance(mask, MaskPattern):
        frac = mask.open_fraction()
    elif isinstance(mask, SignSequence):
        frac = float(np.mean(mask.to_optical()))
    else:
        frac = float(np.mean(np.asarray(mask, dtype=float)))
    return DesignMetrics(thickness_um / sensor_width_um, frac)


# --- report output ----------------------------------------------------------


def write_spectra_csv(reports: Sequence[SpectrumReport], path) -> Path:
    """Long-format CSV: ``label,index,singular_value``."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("label,index,singular_value\n")
        for r in reports:
            for i, s in enumerate(r.singular_values):
                fh.write(f"{r.label},{i},{float(s)!r}\n")
    return path


def write_summary_csv(reports: Sequence[SpectrumReport], path) -> Path:
    """One row per report: ``label,sigma_max,condition_number,open_fraction``."""
    path = Path(path)
    with open(path, "w") as fh:
        fh.write("label,sigma_max,condition_number,open_fraction\n")
        for r in reports:
            fh.write(f"{r.label},{float(r.sigma_max)!r},{float(r.condition_number)!r},"
                     f"{float(r.open_fraction)!r}\n")
    return path


def write_gnuplot(reports: Sequence[SpectrumReport], csv_name: str, path) -> Path:
    """Gnuplot script plotting normalized spectra from a long-format CSV."""
    lines = [
        "set datafile separator ','",
        "set logscale y",
        "set xlabel 'index'",
        "set ylabel 'singular value / sigma_max'",
        "set key outside",
    ]
    plots = []
    for r in reports:
        plots.append(f"'{csv_name}' using (strcol(1) eq '{r.label}' ? $2 : 1/0):($3/{float(r.sigma_max)!r}) "
                     f"with lines title '{r.label}'")
    lines.append("plot " + ", \\\n     ".join(plots))
    path = Path(path)
    path.write_text("\n".join(lines) + "\n")
    return path
