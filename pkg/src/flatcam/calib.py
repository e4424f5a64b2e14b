"""
Separable system calibration
============================

Each factor is measured with ``N`` separable Hadamard scenes. For the left
factor the scenes are ``h_k 1^T`` (column ``k`` of a Sylvester Hadamard
matrix repeated across the scene); the sensor image is then the rank-1
matrix ``(Phi_L h_k)(Phi_R 1)^T``. A positive and a negative display are
captured separately, mean-corrected and subtracted; the dominant singular
pair gives ``u_k`` proportional to ``Phi_L h_k``. Stacking the ``u_k`` and
multiplying by ``H^T / N`` recovers ``Phi_L`` up to one global signed scale.
The right factor uses the transposed scenes ``1 h_k^T``.

Because captures are mean-corrected, the recovered factors are the
centered ones, ``(I - 11^T/M) Phi``, which is exactly the system that
corrected measurements obey.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .errors import InconsistentFactor, MissingCapture, ValidationError, ZeroInput
from .fileio import read_json, read_matrix
from .recon import SeparableSystem
from .seq import gen_hadamard
from .sim import capture, mean_correct

AXES = ("L", "R")
CAPTURE_NAME = re.compile(r"^([LR])_(\d{4})_(pos|neg)$")
CAPTURE_SUFFIXES = (".fcm", ".pgm", ".csv")


def _axis(axis: str) -> str:
    a = {"left": "L", "l": "L", "right": "R", "r": "R"}.get(str(axis).lower())
    if a is None:
        raise ValidationError(f"axis must be 'L' or 'R', got {axis!r}")
    return a


def capture_name(axis: str, index: int, sign: str) -> str:
    """File stem for one capture, e.g. ``L_0007_pos``."""
    return f"{_axis(axis)}_{index:04d}_{sign}"


@dataclass(frozen=True)
class CalibrationPattern:
    """Pos/neg display pair for Hadamard column ``index`` (0-based)."""

    axis: str
    index: int
    positive_part: np.ndarray
    negative_part: np.ndarray

    @property
    def signed(self) -> np.ndarray:
        return self.positive_part - self.negative_part


def gen_patterns(order: int, axis: str = "L") -> List[CalibrationPattern]:
    """``order`` pos/neg display pairs for one axis.

    Left patterns are ``h_k 1^T`` and right patterns ``1 h_k^T``; negative
    entries are clipped to zero in each half.
    """
    a = _axis(axis)
    h = gen_hadamard(order).astype(float)
    ones = np.ones(order)
    out = []
    for k in range(order):
        hk = h[:, k]
        pos, neg = np.maximum(hk, 0.0), np.maximum(-hk, 0.0)
        if a == "L":
            pair = np.outer(pos, ones), np.outer(neg, ones)
        else:
            pair = np.outer(ones, pos), np.outer(ones, neg)
        out.append(CalibrationPattern(a, k, *pair))
    return out


def difference_capture(system, pattern: CalibrationPattern, noise_sigma: float = 0.0,
                       seed: Optional[int] = 0, frames: int = 1) -> np.ndarray:
    """Mean-corrected positive capture minus mean-corrected negative capture."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    s_pos, s_neg = ss.spawn(2)
    y_pos = mean_correct(capture(system, pattern.positive_part, noise_sigma, s_pos, frames))
    y_neg = mean_correct(capture(system, pattern.negative_part, noise_sigma, s_neg, frames))
    return y_pos.values - y_neg.values


def extract_rank1(y_tilde):
    """Best rank-1 fit ``u v^T`` of a difference capture.

    Returns
    -------
    u : ndarray
        Left vector carrying the singular value and the sign.
    v : ndarray
        Unit vector whose largest-magnitude entry is positive.
    residual : float
        ``||Y - u v^T||_F / ||Y||_F``.
    """
    y = np.asarray(y_tilde, dtype=float)
    norm = np.linalg.norm(y)
    if norm == 0:
        raise ZeroInput("cannot extract a rank-1 factor from an all-zero capture")
    u, s, vt = np.linalg.svd(y, full_matrices=False)
    v = vt[0]
    sign = 1.0 if v[np.argmax(np.abs(v))] > 0 else -1.0
    v = sign * v
    u1 = sign * s[0] * u[:, 0]
    # tail singular values, not norm**2 - s0**2, which loses half the digits
    residual = float(np.linalg.norm(s[1:]) / norm)
    return u1, v, residual


@dataclass
class CalibrationRun:
    """Difference captures of one axis, ordered by Hadamard column."""

    order: int
    axis: str
    captures: Sequence[Optional[np.ndarray]]
    threshold: float = 0.99
    shared_factor: Optional[np.ndarray] = field(default=None, init=False)
    residuals: Optional[np.ndarray] = field(default=None, init=False)
    strengths: Optional[np.ndarray] = field(default=None, init=False)


def assemble(run: CalibrationRun) -> np.ndarray:
    """Recover one transfer factor from a complete calibration run.

    Each capture is reduced to its rank-1 factor, the shared vectors are
    sign-aligned to the strongest capture, and ``[u_1 ... u_N] H^T / N`` is
    returned. Fills ``run.shared_factor``, ``run.residuals`` and
    ``run.strengths`` (the per-capture leading singular values).

    Raises
    ------
    MissingCapture
        Fewer than ``order`` captures, or a capture that is absent or all zero.
    InconsistentFactor
        Shared vectors of two captures align worse than ``run.threshold``.
    """
    n = run.order
    axis = _axis(run.axis)
    if len(run.captures) != n:
        raise MissingCapture(f"axis {axis}: expected {n} captures, got {len(run.captures)}")
    us, vs, res = [], [], []
    for k, y in enumerate(run.captures):
        if y is None:
            raise MissingCapture(f"axis {axis}: capture {k} is missing")
        y = np.asarray(y, dtype=float)
        if axis == "R":
            y = y.T
        try:
            u, v, r = extract_rank1(y)
        except ZeroInput:
            raise MissingCapture(f"axis {axis}: capture {k} is all zeros") from None
        us.append(u)
        vs.append(v)
        res.append(r)
    U = np.column_stack(us)
    V = np.vstack(vs)
    strengths = np.linalg.norm(U, axis=0)
    ref = V[int(np.argmax(strengths))]
    flip = np.where(V @ ref < 0, -1.0, 1.0)
    U = U * flip[None, :]
    V = V * flip[:, None]
    gram = np.abs(V @ V.T)
    if gram.min() < run.threshold:
        i, j = np.unravel_index(np.argmin(gram), gram.shape)
        raise InconsistentFactor(
            f"axis {axis}: shared factors of captures {i} and {j} align to {gram[i, j]:.4f} "
            f"< {run.threshold}"
        )
    h = gen_hadamard(n).astype(float)
    run.shared_factor = ref
    run.residuals = np.asarray(res)
    run.strengths = strengths
    return U @ h.T / n


def normalize_factor(phi: np.ndarray) -> np.ndarray:
    """Unit Frobenius norm with the first significant entry made positive.

    Removes the signed global scale left undetermined by calibration.
    """
    a = np.asarray(phi, dtype=float)
    norm = np.linalg.norm(a)
    if norm == 0:
        return a.copy()
    flat = a.ravel()
    first = flat[np.argmax(np.abs(flat) > 1e-12 * np.abs(flat).max())]
    return np.sign(first) * a / norm


@dataclass
class CalibrationResult:
    """Calibrated system plus per-axis quality numbers.

    ``residual_*`` is the mean relative rank-1 residual of the axis'
    captures. ``weak_shared_factor`` flags an axis whose captures are not
    dominated by a rank-1 term (residual above 0.5), which happens when
    the centered ``Phi 1`` of the other axis is close to zero.
    """

    system: SeparableSystem
    order: int
    residual_l: float
    residual_r: float
    strength_l: float
    strength_r: float
    shared_l: np.ndarray = field(repr=False)
    shared_r: np.ndarray = field(repr=False)

    @property
    def weak_shared_factor(self) -> Dict[str, bool]:
        return {"L": self.residual_l > 0.5, "R": self.residual_r > 0.5}

    def metadata(self) -> dict:
        return {
            "order": self.order,
            "residual_l": self.residual_l,
            "residual_r": self.residual_r,
            "shared_strength_l": self.strength_l,
            "shared_strength_r": self.strength_r,
            "weak_shared_factor": self.weak_shared_factor,
        }


def simulate_run(system, order: int, axis: str, noise_sigma: float = 0.0, seed: Optional[int] = 0,
                 frames: int = 1, threshold: float = 0.99) -> CalibrationRun:
    """Capture every pattern of one axis through a simulated system."""
    a = _axis(axis)
    patterns = gen_patterns(order, a)
    seeds = np.random.SeedSequence([0 if seed is None else seed, AXES.index(a)]).spawn(order)
    caps = [difference_capture(system, p, noise_sigma, s, frames) for p, s in zip(patterns, seeds)]
    return CalibrationRun(order, a, caps, threshold)


def _find_capture(directory: Path, stem: str, manifest: Optional[dict]) -> Path:
    if manifest is not None:
        entry = manifest.get("captures", {}).get(stem)
        if entry is None:
            raise MissingCapture(f"manifest has no entry for {stem}")
        path = directory / entry
        if not path.exists():
            raise MissingCapture(f"{stem}: file {path} does not exist")
        return path
    for suffix in CAPTURE_SUFFIXES:
        path = directory / (stem + suffix)
        if path.exists():
            return path
    raise MissingCapture(f"missing capture file {stem} in {directory}")


def load_run(directory, order: int, axis: str, threshold: float = 0.99) -> CalibrationRun:
    """Read raw pos/neg captures of one axis from a capture directory.

    Files are named ``<axis>_<index:04d>_<pos|neg>.<fcm|pgm|csv>`` with
    0-based indices; a ``manifest.json`` with a ``captures`` mapping from
    these stems to relative paths takes precedence over the naming rule.
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise MissingCapture(f"capture directory {directory} does not exist")
    manifest_path = directory / "manifest.json"
    manifest = read_json(manifest_path) if manifest_path.exists() else None
    a = _axis(axis)
    caps = []
    for k in range(order):
        pos = read_matrix(_find_capture(directory, capture_name(a, k, "pos"), manifest))
        neg = read_matrix(_find_capture(directory, capture_name(a, k, "neg"), manifest))
        caps.append(mean_correct(pos).values - mean_correct(neg).values)
    return CalibrationRun(order, a, caps, threshold)


def calibrate_full(source, order: int, noise_sigma: float = 0.0, seed: Optional[int] = 0,
                   frames: int = 1, threshold: float = 0.99) -> CalibrationResult:
    """Calibrate both factors from a simulated system or a capture directory.

    Parameters
    ----------
    source : system or path
        Anything with a ``forward`` method (simulated captures) or the path
        of a capture directory (see :func:`load_run`).
    order : int
        Scene resolution N, a power of two.
    """
    gen_hadamard(order)  # validates the order
    runs = {}
    for a in AXES:
        if isinstance(source, (str, Path)):
            runs[a] = load_run(source, order, a, threshold)
        else:
            runs[a] = simulate_run(source, order, a, noise_sigma, seed, frames, threshold)
    phi_l = assemble(runs["L"])
    phi_r = assemble(runs["R"])
    return CalibrationResult(
        system=SeparableSystem(phi_l, phi_r),
        order=order,
        residual_l=float(runs["L"].residuals.mean()),
        residual_r=float(runs["R"].residuals.mean()),
        strength_l=float(np.median(runs["L"].strengths)),
        strength_r=float(np.median(runs["R"].strengths)),
        shared_l=runs["L"].shared_factor,
        shared_r=runs["R"].shared_factor,
    )


def write_capture_directory(system, order: int, directory, noise_sigma: float = 0.0,
                            seed: Optional[int] = 0, frames: int = 1, suffix: str = ".fcm") -> Path:
    """Simulate raw pos/neg captures for both axes and store them by the naming rule."""
    from .fileio import write_matrix

    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for a in AXES:
        seeds = np.random.SeedSequence([0 if seed is None else seed, AXES.index(a)]).spawn(order)
        for p, s in zip(gen_patterns(order, a), seeds):
            s_pos, s_neg = s.spawn(2)
            write_matrix(directory / (capture_name(a, p.index, "pos") + suffix),
                         capture(system, p.positive_part, noise_sigma, s_pos, frames).values)
            write_matrix(directory / (capture_name(a, p.index, "neg") + suffix),
                         capture(system, p.negative_part, noise_sigma, s_neg, frames).values)
    return directory
