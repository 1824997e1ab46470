"""Least-squares fits of interference fringes and HOM dips.

Visibilities are fitted through ``V = (1 + tanh u) / 2`` so every iterate
stays inside ``[0, 1]``; the dip width is fitted through its logarithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from ..errors import ConfigurationError, DegenerateDataError

MAX_NFEV = 2000


@dataclass(frozen=True)
class FitResult:
    params: dict
    errors: dict
    residual_sum: float
    converged: bool
    iterations: int
    degenerate: bool = False
    message: str = ""
    covariance: np.ndarray = field(default=None, repr=False, compare=False)

    def __getitem__(self, key):
        return self.params[key]


def _vis(u):
    return 0.5 * (1.0 + np.tanh(u))


def _dvis(u):
    return 0.5 * (1.0 - np.tanh(u) ** 2)


def _vis_inv(v):
    v = min(max(v, 1e-9), 1.0 - 1e-9)
    return math.atanh(2.0 * v - 1.0)


# ------------------------------------------------------------------ fringe


def fringe_model(x, p):
    """``A [1 + V sin(w x + phi)]`` for raw parameters ``(A, u, w, phi)``."""
    a, u, w, ph = p
    return a * (1.0 + _vis(u) * np.sin(w * np.asarray(x) + ph))


def fringe_jacobian(x, p):
    a, u, w, ph = p
    x = np.asarray(x, dtype=float)
    v = _vis(u)
    s = np.sin(w * x + ph)
    c = np.cos(w * x + ph)
    return np.column_stack([1.0 + v * s, a * s * _dvis(u), a * v * c * x, a * v * c])


def _ls_sinusoid(x, y, w):
    m = np.column_stack([np.ones_like(x), np.sin(w * x), np.cos(w * x)])
    coef, *_ = np.linalg.lstsq(m, y, rcond=None)
    r = y - m @ coef
    return float(r @ r), coef


def _spectral_peak(x, y):
    """Angular frequency of the best single sinusoid over a dense grid."""
    span = float(x.max() - x.min())
    dx = np.diff(np.sort(x))
    dx = dx[dx > 0]
    w_lo = math.pi / span
    w_hi = math.pi / float(np.median(dx))
    grid = np.linspace(w_lo, w_hi, max(400, 40 * x.size))
    rss = [_ls_sinusoid(x, y, w)[0] for w in grid]
    return float(grid[int(np.argmin(rss))])


def _as_xy(points, min_points):
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ConfigurationError("points must be a sequence of (x, y) pairs")
    if arr.shape[0] < min_points:
        raise ConfigurationError(f"need at least {min_points} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ConfigurationError("points contain non-finite values")
    return arr[:, 0], arr[:, 1]


def _finish(res, jac, names, transform, sigma, n):
    """Build a FitResult with covariance from the local quadratic model."""
    r = res.fun
    rss = float(r @ r)
    j = jac(res.x)
    dof = max(1, n - len(res.x))
    try:
        cov = np.linalg.pinv(j.T @ j)
    except np.linalg.LinAlgError:
        cov = np.full((len(res.x), len(res.x)), np.inf)
    if sigma is None:
        cov = cov * rss / dof
    vals, grads = transform(res.x)
    errs = {}
    for k, name in enumerate(names):
        g = grads[k]
        errs[name] = float(math.sqrt(max(0.0, g @ cov @ g)))
    converged = bool(res.success and res.status > 0)
    return FitResult(dict(zip(names, vals)), errs, rss, converged, int(res.nfev), False, res.message, cov)


def fit_fringe(points, sigma=None, max_nfev: int = MAX_NFEV) -> FitResult:
    """Fit ``A [1 + V sin(w T + Phi)]``; ``sigma`` gives per-point 1-sigma errors."""
    x, y = _as_xy(points, 8)
    span = x.max() - x.min()
    if span <= 0:
        raise ConfigurationError("control values must span a range")
    wts = None if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    mean = float(np.mean(y))
    if np.ptp(y) <= 1e-12 * max(1.0, abs(mean)):
        return FitResult(
            {"A": mean, "V": 0.0, "omega": float("nan"), "Phi": float("nan")},
            {"A": 0.0, "V": float("inf"), "omega": float("inf"), "Phi": float("inf")},
            0.0, False, 0, True, "constant data: no fringe",
        )
    w0 = _spectral_peak(x, y)
    _, (c0, c1, c2) = _ls_sinusoid(x, y, w0)
    if c0 <= 0:
        raise DegenerateDataError("fringe offset is not positive")
    v0 = math.hypot(c1, c2) / c0
    p0 = np.array([c0, _vis_inv(v0), w0, math.atan2(c2, c1)])

    def resid(p):
        r = fringe_model(x, p) - y
        return r if wts is None else r * wts

    def jac(p):
        j = fringe_jacobian(x, p)
        return j if wts is None else j * wts[:, None]

    res = least_squares(resid, p0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)

    def transform(p):
        a, u, w, ph = p
        ph = (ph + math.pi) % (2 * math.pi) - math.pi
        vals = [float(a), float(_vis(u)), float(w), float(ph)]
        grads = [np.eye(4)[0], np.array([0, _dvis(u), 0, 0]), np.eye(4)[2], np.eye(4)[3]]
        return vals, grads

    out = _finish(res, jac, ("A", "V", "omega", "Phi"), transform, sigma, x.size)
    if out.params["V"] < 1e-6:
        return FitResult(out.params, out.errors, out.residual_sum, out.converged, out.iterations, True,
                         "visibility indistinguishable from zero", out.covariance)
    return out


# ------------------------------------------------------------------ HOM dip


def dip_model(x, p):
    """``A [1 - V exp(-x^2 / 2 sigma^2)]`` for raw parameters ``(A, u, log sigma)``."""
    a, u, ls = p
    x = np.asarray(x, dtype=float)
    s = math.exp(ls)
    return a * (1.0 - _vis(u) * np.exp(-(x**2) / (2.0 * s * s)))


def dip_jacobian(x, p):
    a, u, ls = p
    x = np.asarray(x, dtype=float)
    s = math.exp(ls)
    g = np.exp(-(x**2) / (2.0 * s * s))
    v = _vis(u)
    return np.column_stack([1.0 - v * g, -a * g * _dvis(u), -a * v * g * (x**2) / (s * s)])


def _dip_start(x, y):
    order = np.argsort(np.abs(x))
    far = order[-max(2, x.size // 4):]
    base = float(np.mean(y[far]))
    k = int(np.argmin(y))
    low = float(y[k])
    if base <= 0:
        raise DegenerateDataError("dip plateau is not positive")
    v0 = 1.0 - low / base
    half = 0.5 * (base + low)
    ax = np.abs(x)
    above = ax[y >= half]
    below = ax[y < half]
    if below.size and above.size:
        hwhd = 0.5 * (float(below.max()) + float(above.min()))
    else:
        hwhd = 0.25 * float(ax.max())
    sigma0 = max(hwhd, 1e-9) / math.sqrt(2.0 * math.log(2.0))
    return base, v0, sigma0


def fit_hom_dip(points, sigma=None, max_nfev: int = MAX_NFEV) -> FitResult:
    """Fit ``A [1 - V exp(-dt^2 / 2 sigma^2)]``; the width starts at the half-depth point."""
    x, y = _as_xy(points, 6)
    wts = None if sigma is None else 1.0 / np.asarray(sigma, dtype=float)
    if np.ptp(y) <= 1e-12 * max(1.0, abs(float(np.mean(y)))):
        m = float(np.mean(y))
        return FitResult({"A": m, "V": 0.0, "sigma": float("nan")},
                         {"A": 0.0, "V": float("inf"), "sigma": float("inf")},
                         0.0, False, 0, True, "constant data: no dip")
    base, v0, s0 = _dip_start(x, y)
    p0 = np.array([base, _vis_inv(v0), math.log(s0)])

    def resid(p):
        r = dip_model(x, p) - y
        return r if wts is None else r * wts

    def jac(p):
        j = dip_jacobian(x, p)
        return j if wts is None else j * wts[:, None]

    res = least_squares(resid, p0, jac=jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)

    def transform(p):
        a, u, ls = p
        s = math.exp(ls)
        return [float(a), float(_vis(u)), s], [np.eye(3)[0], np.array([0, _dvis(u), 0]), np.array([0, 0, s])]

    out = _finish(res, jac, ("A", "V", "sigma"), transform, sigma, x.size)
    if out.params["V"] < 1e-6:
        return FitResult(out.params, out.errors, out.residual_sum, out.converged, out.iterations, True,
                         "dip depth indistinguishable from zero", out.covariance)
    return out
