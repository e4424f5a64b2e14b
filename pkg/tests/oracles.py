"""Independent reference implementations used to freeze derived test values.

None of these call into the package's numerical code; they recompute the
same quantities by a different route (brute force, quadrature, dense
linear algebra).
"""

import math

import numpy as np
from scipy import integrate


def periodic_autocorrelation(s):
    """Brute-force cyclic autocorrelation by explicit shifts."""
    s = [int(v) for v in s]
    n = len(s)
    return [sum(s[i] * s[(i + k) % n] for i in range(n)) for k in range(n)]


def lfsr_period(degree, taps, seed=None):
    """Cycle length of a Fibonacci LFSR by plain state enumeration."""
    mask = (1 << degree) - 1
    state = mask if seed is None else seed
    start = state
    for n in range(1, 1 << degree):
        fb = bin(state & taps & mask).count("1") % 2
        state = (state >> 1) | (fb << (degree - 1))
        if state == start:
            return n
    return None


def mask_value(pattern, delta, pos):
    """Transmittance of a centered piecewise-constant 1-D mask at ``pos``."""
    L = len(pattern)
    a = math.floor(pos / delta + L / 2)
    if a < 0 or a >= L:
        raise ValueError("ray misses the mask")
    return pattern[a]


def box_average(pattern, delta, lo, hi):
    """Mean transmittance over [lo, hi] by explicit interval intersection."""
    L = len(pattern)
    total = 0.0
    for a, t in enumerate(pattern):
        e0, e1 = (a - L / 2) * delta, (a + 1 - L / 2) * delta
        overlap = min(hi, e1) - max(lo, e0)
        if overlap > 0:
            total += t * overlap
    return total / (hi - lo)


def transfer_by_quadrature(pattern, d, delta, pixel, cra_deg, lam, n, m, diffraction=True):
    """Ray-model transfer matrix by nested adaptive quadrature.

    Entry ``[i, j]`` integrates, over pixel ``i``, the mask averaged over a
    diffraction box of width ``2.44 lam d / delta`` around the point where
    the ray from direction ``j`` crosses the mask.
    """
    pattern = np.asarray(pattern, dtype=float)
    L = len(pattern)
    tan = math.tan(math.radians(cra_deg))
    xs = [(i - (m - 1) / 2) * pixel for i in range(m)]
    ts = [tan * (2 * (j + 0.5) / n - 1) for j in range(n)]
    blur = 2.44 * lam * d / delta if diffraction else 0.0
    edges = [(a - L / 2) * delta for a in range(L + 1)]
    out = np.zeros((m, n))
    for i, x in enumerate(xs):
        for j, t in enumerate(ts):
            c = x + d * t
            if blur > 0:
                f = lambda u: box_average(pattern, delta, c + u - blur / 2, c + u + blur / 2)
                # kinks where either box edge meets a feature edge
                pts = sorted({e - c + s for e in edges for s in (-blur / 2, blur / 2)
                              if -pixel / 2 < e - c + s < pixel / 2})
            else:
                f = lambda u: mask_value(pattern, delta, c + u)
                pts = sorted({e - c for e in edges if -pixel / 2 < e - c < pixel / 2})
            val, _ = integrate.quad(f, -pixel / 2, pixel / 2, points=pts or None,
                                    limit=200, epsabs=1e-12, epsrel=1e-10)
            out[i, j] = val
    return out


def kron_by_loops(phi_r, phi_l):
    """``kron(phi_r, phi_l)`` from its defining index formula."""
    m1, n1 = phi_l.shape
    m2, n2 = phi_r.shape
    k = np.zeros((m1 * m2, n1 * n2))
    for i2 in range(m2):
        for j2 in range(n2):
            for i1 in range(m1):
                for j1 in range(n1):
                    k[i1 + m1 * i2, j1 + n1 * j2] = phi_r[i2, j2] * phi_l[i1, j1]
    return k


def vec(x):
    return np.asarray(x).reshape(-1, order="F")


def tikhonov_dense(phi_l, phi_r, y, tau):
    """Solve (A^T A + tau I) x = A^T y with A assembled explicitly."""
    a = kron_by_loops(phi_r, phi_l)
    n = phi_l.shape[1]
    x = np.linalg.solve(a.T @ a + tau * np.eye(a.shape[1]), a.T @ vec(y))
    return x.reshape(n, n, order="F")


def pinv_dense(phi_l, phi_r, y):
    a = kron_by_loops(phi_r, phi_l)
    n = phi_l.shape[1]
    return (np.linalg.pinv(a) @ vec(y)).reshape(n, n, order="F")


def tv_objective(phi_l, phi_r, y, lam, eps, x):
    """Data term plus Charbonnier TV, written out with explicit loops."""
    r = phi_l @ x @ phi_r.T - y
    n1, n2 = x.shape
    tv = 0.0
    for a in range(n1):
        for b in range(n2):
            gu = x[a + 1, b] - x[a, b] if a + 1 < n1 else 0.0
            gv = x[a, b + 1] - x[a, b] if b + 1 < n2 else 0.0
            tv += math.sqrt(gu * gu + gv * gv + eps * eps)
    return float(np.sum(r * r)) + lam * tv


def central_difference(f, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (f(x + e) - f(x - e)) / (2 * h)
    return g
