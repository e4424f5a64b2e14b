"""
Scene reconstruction
====================

Solvers for the separable model ``Y = Phi_L X Phi_R^T + E``:

* :func:`reconstruct_ls` -- truncated pseudoinverse on each factor,
* :func:`reconstruct_tikhonov` -- closed-form ridge solution from the
  cached factor SVDs,
* :func:`reconstruct_tv` -- accelerated gradient descent on a
  Charbonnier-smoothed total-variation objective.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import List, Optional

import numpy as np

from .errors import (
    AllSingularValuesTruncated,
    DidNotConverge,
    DimensionMismatch,
    NonFiniteObjective,
    ValidationError,
)


def center_rows(a: np.ndarray) -> np.ndarray:
    """Apply the centering projector ``I - 11^T / M`` from the left (remove column means)."""
    a = np.asarray(a, dtype=float)
    return a - a.mean(axis=0, keepdims=True)


@dataclass(frozen=True)
class FactorSVD:
    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    @property
    def v(self) -> np.ndarray:
        return self.vt.T


def _svd(a: np.ndarray) -> FactorSVD:
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    for arr in (u, s, vt):
        arr.setflags(write=False)
    return FactorSVD(u, s, vt)


@dataclass(frozen=True, eq=False)
class SeparableSystem:
    """Pair of 1-D transfer matrices with lazily cached SVDs.

    ``phi_l`` maps scene columns to sensor columns and ``phi_r`` scene rows
    to sensor rows: ``Y = phi_l @ X @ phi_r.T``. The instance is immutable
    and safe to share between concurrent reconstructions.
    """

    phi_l: np.ndarray
    phi_r: np.ndarray
    rel_cutoff: float = 1e-10

    def __post_init__(self):
        for name in ("phi_l", "phi_r"):
            a = np.array(getattr(self, name), dtype=float, copy=True)
            if a.ndim != 2:
                raise DimensionMismatch(f"{name} must be a 2-D matrix")
            if not np.all(np.isfinite(a)):
                raise ValidationError(f"{name} has non-finite entries")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        if not 0 <= self.rel_cutoff < 1:
            raise ValidationError("rel_cutoff must lie in [0, 1)")

    @property
    def m_sensor(self) -> int:
        return self.phi_l.shape[0]

    @property
    def n_scene(self) -> int:
        return self.phi_l.shape[1]

    @property
    def scene_shape(self):
        return (self.phi_l.shape[1], self.phi_r.shape[1])

    @property
    def sensor_shape(self):
        return (self.phi_l.shape[0], self.phi_r.shape[0])

    @cached_property
    def svd_l(self) -> FactorSVD:
        return _svd(self.phi_l)

    @cached_property
    def svd_r(self) -> FactorSVD:
        return _svd(self.phi_r)

    @property
    def sigma_max(self) -> float:
        """Largest singular value of the full operator, ``sigma_max(L) * sigma_max(R)``."""
        return float(self.svd_l.s[0] * self.svd_r.s[0])

    def forward(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.scene_shape:
            raise DimensionMismatch(f"scene shape {x.shape} != {self.scene_shape}")
        return self.phi_l @ x @ self.phi_r.T

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if y.shape != self.sensor_shape:
            raise DimensionMismatch(f"sensor shape {y.shape} != {self.sensor_shape}")
        return self.phi_l.T @ y @ self.phi_r

    def centered(self) -> "SeparableSystem":
        """System seen by double-centered measurements."""
        return SeparableSystem(center_rows(self.phi_l), center_rows(self.phi_r), self.rel_cutoff)

    def dense(self) -> np.ndarray:
        """``kron(phi_r, phi_l)``, acting on column-major ``vec(X)``."""
        return np.kron(self.phi_r, self.phi_l)


def _check_measurement(system: SeparableSystem, y) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    if y.shape != system.sensor_shape:
        raise DimensionMismatch(f"measurement shape {y.shape} != {system.sensor_shape}")
    return y


def _truncated_inverse(s: np.ndarray, rel_cutoff: float) -> np.ndarray:
    keep = s > rel_cutoff * s[0] if s.size and s[0] > 0 else np.zeros(s.shape, bool)
    inv = np.zeros_like(s)
    inv[keep] = 1.0 / s[keep]
    return inv


def reconstruct_ls(system: SeparableSystem, y, rel_cutoff: Optional[float] = None) -> np.ndarray:
    """Least-squares estimate ``pinv(Phi_L) Y pinv(Phi_R)^T``.

    Singular values at or below ``rel_cutoff * sigma_max`` of each factor
    are dropped (default: the system's ``rel_cutoff``).
    """
    y = _check_measurement(system, y)
    cutoff = system.rel_cutoff if rel_cutoff is None else rel_cutoff
    L, R = system.svd_l, system.svd_r
    inv_l = _truncated_inverse(L.s, cutoff)
    inv_r = _truncated_inverse(R.s, cutoff)
    if not inv_l.any() or not inv_r.any():
        raise AllSingularValuesTruncated("every singular value of a factor fell below the cutoff")
    core = (inv_l[:, None] * (L.u.T @ y @ R.u)) * inv_r[None, :]
    return L.v @ core @ R.vt


def default_tau(system: SeparableSystem) -> float:
    return 1e-2 * system.sigma_max ** 2


def reconstruct_tikhonov(system: SeparableSystem, y, tau: Optional[float] = None) -> np.ndarray:
    """Ridge solution of ``min ||Phi_L X Phi_R^T - Y||^2 + tau ||X||^2``.

    Uses the cached SVDs: with ``Phi = U S V^T`` per factor,
    ``X = V_L [(S_L U_L^T Y U_R S_R) ./ (s_L^2 (s_R^2)^T + tau)] V_R^T``.
    After the SVDs this costs two M x N and two N x N products.
    Entries whose denominator is exactly zero (``tau = 0`` on a singular
    factor) are set to zero.
    """
    y = _check_measurement(system, y)
    if tau is None:
        tau = default_tau(system)
    if tau < 0:
        raise ValidationError("tau must be nonnegative")
    L, R = system.svd_l, system.svd_r
    num = (L.s[:, None] * (L.u.T @ y @ R.u)) * R.s[None, :]
    den = np.outer(L.s ** 2, R.s ** 2) + tau
    core = np.divide(num, den, out=np.zeros_like(num), where=den > 0)
    return L.v @ core @ R.vt


def tikhonov_gradient(system: SeparableSystem, x, y, tau: float) -> np.ndarray:
    """Half-gradient of the ridge objective: ``Phi_L^T (Phi_L X Phi_R^T - Y) Phi_R + tau X``."""
    return system.adjoint(system.forward(x) - y) + tau * np.asarray(x, dtype=float)


# --- total variation ------------------------------------------------------


def image_gradients(x: np.ndarray):
    """Forward differences along rows (u) and columns (v); last difference is zero."""
    x = np.asarray(x, dtype=float)
    gu = np.zeros_like(x)
    gv = np.zeros_like(x)
    gu[:-1, :] = x[1:, :] - x[:-1, :]
    gv[:, :-1] = x[:, 1:] - x[:, :-1]
    return gu, gv


def _gradients_adjoint(pu: np.ndarray, pv: np.ndarray) -> np.ndarray:
    out = np.zeros_like(pu)
    out[:-1, :] -= pu[:-1, :]
    out[1:, :] += pu[:-1, :]
    out[:, :-1] -= pv[:, :-1]
    out[:, 1:] += pv[:, :-1]
    return out


def tv_seminorm(x, eps: float = 0.0) -> float:
    """Isotropic total variation ``sum sqrt(Gu^2 + Gv^2 + eps^2)``."""
    if eps < 0:
        raise ValidationError("eps must be nonnegative")
    gu, gv = image_gradients(x)
    return float(np.sqrt(gu ** 2 + gv ** 2 + eps ** 2).sum())


def tv_gradient(x, eps: float) -> np.ndarray:
    """Gradient of :func:`tv_seminorm` for ``eps > 0``."""
    gu, gv = image_gradients(x)
    mag = np.sqrt(gu ** 2 + gv ** 2 + eps ** 2)
    return _gradients_adjoint(gu / mag, gv / mag)


@dataclass
class ReconOptions:
    """Solver parameters. ``None`` selects a data-dependent default.

    Defaults: ``tau = 1e-2 * sigma_max^2``, ``lam = 1e-2 * ||Y||_F / N``,
    ``huber_eps = 1e-3 * dynamic range`` of the starting estimate.
    """

    tau: Optional[float] = None
    lam: Optional[float] = None
    huber_eps: Optional[float] = None
    max_iters: int = 500
    rel_tol: float = 1e-8

    def __post_init__(self):
        for name in ("tau", "lam", "huber_eps"):
            v = getattr(self, name)
            if v is not None and not v >= 0:
                raise ValidationError(f"{name} must be nonnegative")
        if self.huber_eps is not None and self.huber_eps == 0:
            raise ValidationError("huber_eps must be positive for TV")
        if self.max_iters < 1 or self.rel_tol < 0:
            raise ValidationError("max_iters must be >= 1 and rel_tol >= 0")


@dataclass
class TVResult:
    x: np.ndarray
    objective: List[float]
    iterations: int
    converged: bool
    restarts: int
    lam: float
    huber_eps: float
    step: float = field(repr=False, default=0.0)


class TVObjective:
    """``f(X) = ||Phi_L X Phi_R^T - Y||_F^2 + lam * sum sqrt(Gu^2 + Gv^2 + eps^2)``."""

    def __init__(self, system: SeparableSystem, y, lam: float, eps: float):
        self.system = system
        self.y = _check_measurement(system, y)
        self.lam = float(lam)
        self.eps = float(eps)

    def __call__(self, x) -> float:
        r = self.system.forward(x) - self.y
        val = float(np.vdot(r, r))
        if self.lam:
            val += self.lam * tv_seminorm(x, self.eps)
        return val

    def gradient(self, x) -> np.ndarray:
        g = 2.0 * self.system.adjoint(self.system.forward(x) - self.y)
        if self.lam:
            g += self.lam * tv_gradient(x, self.eps)
        return g

    def lipschitz(self) -> float:
        return 2.0 * self.system.sigma_max ** 2 + self.lam * 8.0 / self.eps


def default_lambda(system: SeparableSystem, y) -> float:
    return 1e-2 * float(np.linalg.norm(y)) / system.n_scene


def reconstruct_tv(system: SeparableSystem, y, lam: Optional[float] = None,
                   options: Optional[ReconOptions] = None, x0=None, return_info: bool = False):
    """TV-regularized reconstruction by accelerated gradient descent.

    Step size is ``1/L`` with ``L = 2 sigma_max^2 + 8 lam / eps``. Momentum
    is reset whenever a step would raise the objective, so the recorded
    objective sequence never increases. Iteration stops once the relative
    decrease falls below ``rel_tol``; hitting ``max_iters`` issues a
    :class:`DidNotConverge` warning and returns the best (last) iterate.

    Parameters
    ----------
    system : SeparableSystem
    y : (M, M) ndarray
        Corrected measurements.
    lam : float, optional
        TV weight; overrides ``options.lam``.
    options : ReconOptions, optional
    x0 : ndarray, optional
        Starting image; defaults to the Tikhonov estimate with the default tau.
    return_info : bool
        Also return a :class:`TVResult` with the objective trace.
    """
    y = _check_measurement(system, y)
    opts = options or ReconOptions()
    if lam is None:
        lam = opts.lam if opts.lam is not None else default_lambda(system, y)
    if lam < 0:
        raise ValidationError("lambda must be nonnegative")
    if x0 is None:
        tau0 = opts.tau if opts.tau is not None else default_tau(system)
        x0 = reconstruct_tikhonov(system, y, tau0)
    x = np.array(x0, dtype=float, copy=True)
    if x.shape != system.scene_shape:
        raise DimensionMismatch("x0 has the wrong shape")
    eps = opts.huber_eps
    if eps is None:
        rng = float(x.max() - x.min())
        eps = 1e-3 * rng if rng > 0 else 1e-3 * max(float(np.abs(y).max()), 1.0)

    obj = TVObjective(system, y, lam, eps)
    step = 1.0 / obj.lipschitz()
    f = obj(x)
    if not math.isfinite(f):
        raise NonFiniteObjective("objective is not finite at the starting point")
    trace = [f]
    z = x
    t = 1.0
    restarts = 0
    converged = False
    it = 0
    for it in range(1, opts.max_iters + 1):
        x_new = z - step * obj.gradient(z)
        f_new = obj(x_new)
        if not math.isfinite(f_new):
            raise NonFiniteObjective(f"objective became non-finite at iteration {it}")
        if f_new > f:
            restarts += 1
            t = 1.0
            x_new = x - step * obj.gradient(x)
            f_new = obj(x_new)
            if f_new > f:
                # rounding-level increase: x is already optimal to machine precision
                converged = True
                break
        t_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        decrease = f - f_new
        x, f, t = x_new, f_new, t_new
        trace.append(f)
        if f == 0.0 or decrease <= opts.rel_tol * abs(trace[-2]):
            converged = True
            break
    if not converged:
        warnings.warn(f"TV solver stopped after {opts.max_iters} iterations without "
                      f"meeting rel_tol={opts.rel_tol:g}", DidNotConverge, stacklevel=2)
    if return_info:
        return x, TVResult(x, trace, it, converged, restarts, float(lam), float(eps), step)
    return x


# --- quality metrics --------------------------------------------------------


def metrics(x_hat, x_ref) -> dict:
    """MSE, PSNR (w.r.t. the reference dynamic range) and Pearson correlation.

    PSNR is ``inf`` for identical images.
    """
    a = np.asarray(x_hat, dtype=float)
    b = np.asarray(x_ref, dtype=float)
    if a.shape != b.shape:
        raise DimensionMismatch(f"shapes differ: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    peak = float(b.max() - b.min()) or float(np.abs(b).max()) or 1.0
    psnr = math.inf if mse == 0 else 10.0 * math.log10(peak ** 2 / mse)
    ac, bc = a - a.mean(), b - b.mean()
    denom = math.sqrt(float(np.vdot(ac, ac)) * float(np.vdot(bc, bc)))
    pearson = float(np.vdot(ac, bc)) / denom if denom > 0 else float("nan")
    return {"mse": mse, "psnr": psnr, "pearson": pearson}
