"""Periodic grid, background spectra, and periodized autocorrelation tables.

The computational domain is the square [-L/2, L/2]^2 with a uniform N x N
periodic mesh, x_i = -L/2 + i*h, h = L/N.  The homogeneous background enters
only through its autocorrelation Gamma evaluated at grid differences
x_i - y_j, so Gamma is stored as a 1-D table over the 2N-1 possible index
differences rather than an N^2 matrix.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.fft import next_fast_len

from .errors import ConfigurationError, ParameterError

__all__ = [
    "Grid",
    "GaussianSpectrumParams",
    "Autocorrelation",
    "periodize",
    "grid_for_mesh",
    "gaussian_gamma",
    "gamma_from_spectrum",
    "zero_autocorrelation",
]


def periodize(xi, L: float):
    """Wrap ``xi`` into the fundamental interval [-L/2, L/2).

    Implements the wrap ((xi + L/2) mod L) - L/2; idempotent, and congruent
    to ``xi`` modulo L.  Accepts scalars or arrays.
    """
    if L <= 0:
        raise ParameterError(f"period L must be positive, got {L}")
    return (np.asarray(xi) + L / 2) % L - L / 2


@dataclass(frozen=True)
class Grid:
    """Uniform N x N periodic mesh on [-L/2, L/2]^2.

    Attributes
    ----------
    N : int
        Points per axis.
    L : float
        Domain length.
    h : float
        Mesh size L/N (derived, never stored independently).
    x : ndarray
        Node coordinates x_i = -L/2 + i*h, i = 0..N-1.
    """

    N: int
    L: float

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ParameterError(f"N must be positive, got {self.N}")
        if self.L <= 0:
            raise ParameterError(f"L must be positive, got {self.L}")
        object.__setattr__(self, "h", self.L / self.N)
        object.__setattr__(self, "x", -self.L / 2 + self.h * np.arange(self.N))


def grid_for_mesh(L: float, h_target: float, fast: bool = True) -> Grid:
    """Build a Grid with mesh size close to ``h_target``.

    N = round(L / h_target); with ``fast=True`` N is bumped to the next
    FFT-friendly length when the implied mesh size stays within 1% of the
    target (the per-step solves are FFT-bound, and smooth lengths are
    several times faster than prime ones).
    """
    if h_target <= 0:
        raise ParameterError(f"h_target must be positive, got {h_target}")
    n = max(int(round(L / h_target)), 5)
    if fast:
        nf = next_fast_len(n)
        if abs(L / nf - h_target) <= 0.01 * h_target:
            n = nf
    return Grid(N=n, L=L)


@dataclass(frozen=True)
class GaussianSpectrumParams:
    """Gaussian background power spectrum P(k) = (C^2/sigma) exp(-pi k^2/sigma^2).

    C controls the RMS background intensity; sigma the spectral width.  The
    corresponding free-space autocorrelation is
    Gamma_inf(y) = C^2 exp(-pi sigma^2 y^2).
    """

    C: float
    sigma: float

    def __post_init__(self) -> None:
        if self.C <= 0:
            raise ParameterError(f"C must be positive, got {self.C}")
        if self.sigma <= 0:
            raise ParameterError(f"sigma must be positive, got {self.sigma}")

    def spectrum(self, k):
        return (self.C**2 / self.sigma) * np.exp(-np.pi * np.asarray(k) ** 2 / self.sigma**2)

    def spectrum_derivative(self, k):
        k = np.asarray(k)
        return (-2.0 * np.pi * k / self.sigma**2) * self.spectrum(k)

    def gamma_inf(self, y):
        return self.C**2 * np.exp(-np.pi * self.sigma**2 * np.asarray(y) ** 2)


@dataclass(frozen=True)
class Autocorrelation:
    """Periodized autocorrelation sampled at every grid difference.

    ``samples[d + N - 1]`` holds Gamma(x_i - y_j) for index difference
    d = i - j in [-(N-1), N-1].  Evenness Gamma(xi) = Gamma(-xi) is exact by
    construction (the table is mirrored from d >= 0).
    """

    N: int
    L: float
    samples: np.ndarray
    gamma0: float

    def __post_init__(self) -> None:
        if self.samples.shape != (2 * self.N - 1,):
            raise ParameterError(
                f"samples must have length 2N-1 = {2 * self.N - 1}, got {self.samples.shape}"
            )
        self.samples.setflags(write=False)

    def matrix(self) -> np.ndarray:
        """Dense N x N table G[i, j] = Gamma(x_i - y_j) (cached)."""
        cached = self.__dict__.get("_matrix")
        if cached is None:
            idx = np.arange(self.N)
            cached = self.samples[np.subtract.outer(idx, idx) + self.N - 1]
            object.__setattr__(self, "_matrix", cached)
        return cached


def _mirror(positive_half: np.ndarray) -> np.ndarray:
    # positive_half[d] = Gamma(d*h) for d = 0..N-1; mirror to all 2N-1 differences
    return np.concatenate([positive_half[:0:-1], positive_half])


def gaussian_gamma(params: GaussianSpectrumParams, grid: Grid) -> Autocorrelation:
    """Periodized Gaussian autocorrelation table for ``grid``.

    Raises ConfigurationError when the effective support of Gamma_inf is not
    contained in [-L/2, L/2] (tail above 1e-13 * C^2 at the domain edge).
    """
    tail = float(params.gamma_inf(grid.L / 2))
    if tail > 1e-13 * params.C**2:
        raise ConfigurationError(
            f"autocorrelation support violation: Gamma_inf(L/2) = {tail:.3e} "
            f"exceeds 1e-13 * C^2 = {1e-13 * params.C**2:.3e}; enlarge L"
        )
    xi = periodize(grid.h * np.arange(grid.N), grid.L)
    half = params.C**2 * np.exp(-np.pi * params.sigma**2 * xi**2)
    samples = _mirror(half)
    return Autocorrelation(N=grid.N, L=grid.L, samples=samples, gamma0=float(half[0]))


def zero_autocorrelation(grid: Grid) -> Autocorrelation:
    """The Gamma = 0 background (soliton / EOC runs)."""
    return Autocorrelation(
        N=grid.N, L=grid.L, samples=np.zeros(2 * grid.N - 1), gamma0=0.0
    )


def gamma_from_spectrum(
    P: Callable[[float], float],
    grid: Grid,
    mode_cutoff: int | None = None,
) -> Autocorrelation:
    """Autocorrelation from a spectrum via Gamma(x) = (1/L) sum_n P(n/L) e^{2 pi i n x / L}.

    ``P`` is a real, non-negative, decaying spectrum callable.  The series is
    truncated at ``mode_cutoff`` (default: the smallest n with
    P(n/L) < 1e-16 * max P).  The imaginary residue of the Fourier sum must
    stay below 1e-12 and is discarded; the cosine part is evaluated at
    mirrored wrapped positions so evenness is exact.
    """
    L = grid.L
    if mode_cutoff is None:
        peak = 0.0
        cutoff = None
        for n in range(0, 1_000_000):
            val = max(abs(float(P(n / L))), abs(float(P(-n / L))))
            peak = max(peak, val)
            if peak > 0 and val < 1e-16 * peak:
                cutoff = n - 1
                break
        if cutoff is None:
            raise ConfigurationError("could not locate a spectral cutoff below 1e6 modes")
        mode_cutoff = max(cutoff, 0)
    else:
        scan = np.abs([float(P(n / L)) for n in range(mode_cutoff + 1)])
        scan_neg = np.abs([float(P(-n / L)) for n in range(mode_cutoff + 1)])
        peak = max(scan.max(initial=0.0), scan_neg.max(initial=0.0))
        tail = max(abs(float(P((mode_cutoff + 1) / L))), abs(float(P(-(mode_cutoff + 1) / L))))
        if peak > 0 and tail > 1e-12 * peak:
            raise ConfigurationError(
                f"mode_cutoff={mode_cutoff} too small: tail P = {tail:.3e} "
                f"above 1e-12 * max P = {1e-12 * peak:.3e}"
            )

    n = np.arange(1, mode_cutoff + 1)
    p_pos = np.asarray([float(P(m / L)) for m in n])
    p_neg = np.asarray([float(P(-m / L)) for m in n])
    a0 = float(P(0.0)) / L
    a = (p_pos + p_neg) / L          # cosine coefficients
    b = (p_pos - p_neg) / L          # sine coefficients -> imaginary residue

    xi = periodize(grid.h * np.arange(grid.N), grid.L)
    theta = np.outer(n, 2 * np.pi * xi / L)  # (cutoff, N)
    half = a0 + (a[:, None] * np.cos(theta)).sum(axis=0) if mode_cutoff else np.full(grid.N, a0)
    residue = float(np.abs(b[:, None] * np.sin(theta)).sum(axis=0).max()) if mode_cutoff else 0.0
    if residue > 1e-12:
        raise ConfigurationError(
            f"imaginary residue {residue:.3e} of the Fourier sum exceeds 1e-12; "
            "spectrum must be (numerically) even"
        )
    samples = _mirror(half)
    return Autocorrelation(N=grid.N, L=grid.L, samples=samples, gamma0=float(half[0]))
