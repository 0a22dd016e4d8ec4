"""Penrose-type stability analysis: divided differences, Hilbert transform,
Nyquist curves, winding numbers, unstable-harmonic scan, bandwidth.

A wavenumber X is unstable iff the closed curve
S_X(t) = H[D_X P](t) - i D_X P(t) has nonzero winding around 4 pi p / q,
where D_X P is the symmetric divided difference of the spectrum and H the
Hilbert transform with convention H[f](t) = (1/pi) pv int f(s)/(t-s) ds
(FFT multiplier -i sgn(xi)).  The convention is locked operationally: the
Gaussian family must classify C = 0.9 stable and C = 1.6 unstable with
exactly the first four harmonics of an L = 50 domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.fft import fft, ifft
from scipy.signal import hilbert as _analytic_signal

from .errors import IndeterminateWindingError, ParameterError, ScanRangeError
from .grid_spectra import GaussianSpectrumParams

__all__ = [
    "NyquistCurve",
    "StabilityResult",
    "divided_difference",
    "hilbert_transform",
    "hilbert_weideman",
    "default_t_grid",
    "nyquist_curve",
    "winding_number",
    "stability_scan",
    "critical_intensity",
]

TAIL_TOL = 1e-10
DEGENERACY_GUARD = 1e-9
WINDING_INT_TOL = 1e-6


def divided_difference(P: Callable, X: float, k, dP: Callable | None = None, fd_step: float | None = None):
    """D_X P(k) = (P(k + X/2) - P(k - X/2)) / X; P'(k) at X = 0.

    At X = 0 the analytic derivative ``dP`` is used when supplied (always the
    case for the Gaussian family); otherwise a 4th-order central difference
    with step ``fd_step`` (default 1e-4).
    """
    k = np.asarray(k, dtype=float)
    if X != 0.0:
        return (P(k + X / 2.0) - P(k - X / 2.0)) / X
    if dP is not None:
        return dP(k)
    s = fd_step if fd_step is not None else 1e-4
    return (P(k - 2 * s) - 8 * P(k - s) + 8 * P(k + s) - P(k + 2 * s)) / (12 * s)


def hilbert_transform(f: np.ndarray, t: np.ndarray | None = None) -> tuple[np.ndarray, str | None]:
    """H[f] on a uniform symmetric grid via the FFT multiplier -i sgn(xi).

    Returns (H[f], warning); warning is set when f does not decay below
    1e-10 * max|f| at the grid ends.
    """
    f = np.asarray(f, dtype=float)
    warning = None
    peak = float(np.abs(f).max()) if f.size else 0.0
    if peak > 0 and max(abs(f[0]), abs(f[-1])) > TAIL_TOL * peak:
        warning = (
            f"insufficient decay at grid ends: {max(abs(f[0]), abs(f[-1])):.3e} "
            f"vs tolerance {TAIL_TOL * peak:.3e}"
        )
    if t is not None:
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-9, atol=0.0):
            raise ParameterError("hilbert_transform needs a uniform grid")
    # scipy's analytic signal is f + i H[f] in the H[cos] = sin convention
    return np.imag(_analytic_signal(f)), warning


def hilbert_weideman(f: Callable, t_eval: np.ndarray, n_basis: int = 512) -> np.ndarray:
    """Weideman's rational-eigenfunction Hilbert transform (cross-check backend).

    Expands f in phi_n(t) = (1 + i t)^n / (1 - i t)^(n+1), for which
    H[phi_n] = -i phi_n (n >= 0) and +i phi_n (n < 0).  Coefficients come
    from an FFT of f(tan(theta/2)) (1 - i tan(theta/2)) over theta.
    """
    M = 2 * n_basis
    j = np.arange(M)
    theta = -np.pi + 2.0 * np.pi * (j + 0.5) / M  # avoid the pole at theta = +-pi
    tt = np.tan(theta / 2.0)
    g = f(tt) * (1.0 - 1j * tt)  # = sum_n a_n e^{i n theta}
    # Fourier coefficients a_n = (1/M) sum_j g_j e^{-i n theta_j}; with
    # theta_j = 2 pi j / M + (pi/M - pi) this is an FFT up to a phase twist
    n = np.arange(-n_basis, n_basis)
    a = fft(g)[n % M] / M * np.exp(1j * n * (np.pi - np.pi / M))
    sign = np.where(n >= 0, -1j, 1j)
    theta_eval = 2.0 * np.arctan(np.asarray(t_eval, dtype=float))
    series = np.exp(1j * np.outer(n, theta_eval))
    h = (a * sign) @ series / (1.0 - 1j * np.asarray(t_eval))
    return np.real(h)


def default_t_grid(sigma: float, n: int = 2**19, t_max: float | None = None) -> np.ndarray:
    """Symmetric uniform grid wide enough that |S| at the ends <= 1e-8 max|S|.

    H[D_X P] decays like 1/t^2 (D_X P has zero mean), so the width scales
    with the 1e-8 target, not the spectral width; 2560 * (sigma / 0.36)
    covers the Gaussian family used throughout.
    """
    if t_max is None:
        t_max = 2560.0 * (sigma / 0.36)
    return np.linspace(-t_max, t_max, n)


@dataclass
class NyquistCurve:
    """Samples of S_X(t) = H[D_X P](t) - i D_X P(t) and the target 4 pi p/q."""

    X: float
    t: np.ndarray
    S: np.ndarray
    target: float
    warning: str | None = None


def nyquist_curve(
    P: Callable,
    X: float,
    p: float,
    q: float,
    t_grid: np.ndarray,
    dP: Callable | None = None,
) -> NyquistCurve:
    f = np.asarray(divided_difference(P, X, t_grid, dP=dP), dtype=float)
    h, warning = hilbert_transform(f, t_grid)
    return NyquistCurve(X=X, t=t_grid, S=h - 1j * f, target=4.0 * np.pi * p / q, warning=warning)


def winding_number(curve: NyquistCurve) -> int:
    """Winding of the curve (closed through the origin) around its target.

    The origin is appended at both ends; angle increments must sum to within
    1e-6 of an integer multiple of 2 pi, and the curve must keep a distance
    of 1e-9 from the target, else IndeterminateWindingError is raised.
    """
    z = np.empty(curve.S.size + 2, dtype=complex)
    z[0] = -curve.target
    z[1:-1] = curve.S - curve.target
    z[-1] = -curve.target
    dmin = float(np.abs(z).min())
    if dmin <= DEGENERACY_GUARD:
        raise IndeterminateWindingError(
            f"curve passes within {dmin:.3e} of the target {curve.target:.6g}"
        )
    increments = np.angle(z[1:] / z[:-1])
    total = float(increments.sum()) / (2.0 * np.pi)
    nearest = round(total)
    if abs(total - nearest) > WINDING_INT_TOL:
        raise IndeterminateWindingError(
            f"winding sum {total:.3e} is not within {WINDING_INT_TOL:.0e} of an integer"
        )
    return int(nearest)


@dataclass
class StabilityResult:
    unstable_harmonics: list
    windings: dict
    X_max: float
    bandwidth: float
    target: float
    warnings: list = field(default_factory=list)


def _winding_at(P, X, p, q, t_grid, dP):
    return winding_number(nyquist_curve(P, X, p, q, t_grid, dP=dP))


def stability_scan(
    P: Callable,
    p: float,
    q: float,
    L: float,
    n_max: int = 12,
    sigma: float = 0.36,
    dP: Callable | None = None,
    t_grid: np.ndarray | None = None,
    x_tol: float = 1e-3,
) -> StabilityResult:
    """Classify the harmonics X = 2 pi n / L, n = 1..n_max, and locate X_max.

    X_max is found by bisection in continuous X between the last unstable and
    first stable value (tolerance ``x_tol``); bandwidth = 2 X_max.  By
    evenness of P the unstable set is symmetric in +-n; positive n reported.
    """
    if t_grid is None:
        t_grid = default_t_grid(sigma)
    windings, warnings = {}, []
    for n in range(1, n_max + 1):
        X = 2.0 * np.pi * n / L
        curve = nyquist_curve(P, X, p, q, t_grid, dP=dP)
        if curve.warning:
            warnings.append(f"n={n}: {curve.warning}")
        windings[n] = winding_number(curve)
    unstable = [n for n, w in windings.items() if w != 0]
    target = 4.0 * np.pi * p / q
    if not unstable:
        return StabilityResult([], windings, 0.0, 0.0, target, warnings)
    if unstable[-1] == n_max:
        raise ScanRangeError(f"all harmonics up to n_max={n_max} unstable; enlarge the scan")
    n_last = max(unstable)
    lo = 2.0 * np.pi * n_last / L        # unstable
    hi = 2.0 * np.pi * (n_last + 1) / L  # stable
    while hi - lo > x_tol:
        mid = 0.5 * (lo + hi)
        if _winding_at(P, mid, p, q, t_grid, dP) != 0:
            lo = mid
        else:
            hi = mid
    x_max = 0.5 * (lo + hi)
    return StabilityResult(unstable, windings, x_max, 2.0 * x_max, target, warnings)


def critical_intensity(
    sigma: float,
    p: float,
    q: float,
    L: float,
    c_lo: float = 0.5,
    c_hi: float = 2.2,
    c_tol: float = 1e-3,
    t_grid: np.ndarray | None = None,
) -> float:
    """Critical C* for the Gaussian family at the first harmonic X = 2 pi / L.

    Bisection on C between a stable ``c_lo`` and an unstable ``c_hi``.
    """
    if t_grid is None:
        t_grid = default_t_grid(sigma)
    X = 2.0 * np.pi / L

    def unstable(C: float) -> bool:
        g = GaussianSpectrumParams(C=C, sigma=sigma)
        return _winding_at(g.spectrum, X, p, q, t_grid, g.spectrum_derivative) != 0

    if unstable(c_lo):
        raise ParameterError(f"c_lo={c_lo} is already unstable; lower it")
    if not unstable(c_hi):
        raise ParameterError(f"c_hi={c_hi} is still stable; raise it")
    lo, hi = c_lo, c_hi
    while hi - lo > c_tol:
        mid = 0.5 * (lo + hi)
        if unstable(mid):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)
