"""Exact solutions, error norms, EOC harness, and the Fourier-mode oracle.

With zero background the equation inherits soliton solutions from the
underlying focusing NLS; the periodized form

    u(x, y, t) = A^2 sech(B w(x - v t)) sech(B w(y - v t)) e^{i k (x - y)},
    w(xi) = ((xi + L/2) mod L) - L/2,  k = v/(2p),  B = A sqrt(q/(2p)),

is exact on the torus of length L = 10 pi / k up to the sech tail at L/2.
The Fourier oracle integrates the truncated coefficient ODE system

    d/dt u_{k,l} = -i (4 pi^2 p / L^2)(k^2 - l^2) u_{k,l}
                   + i q (P_{-l} - P_k) g_{k+l}
                   + i q sum_m g_m (u_{k-m,l} - u_{k,l-m}),
    g_m = sum_{K+Lam = m} u_{K,Lam},

with classical RK4, as an independent cross-check of the finite-difference
solver on smooth small-amplitude runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import fft2
from scipy.linalg import toeplitz

from .errors import ParameterError, ValidationError
from .grid_spectra import Autocorrelation, Grid, grid_for_mesh, periodize, zero_autocorrelation
from .operators import build_operators
from .rcn_scheme import EvolveResult, SchemeConfig, State, StepAux, evolve
from .diagnostics import DiagnosticsCollector

__all__ = [
    "SolitonParams",
    "EOCRow",
    "soliton_exact",
    "soliton_potential",
    "soliton_phi_exact",
    "SolitonErrorTracker",
    "run_soliton",
    "eoc",
    "run_eoc_time",
    "run_eoc_space",
    "field_to_coeffs",
    "coeffs_to_field",
    "fourier_oracle",
]

# Periodization guard: the canonical parameters give sech(B L / 2) ~ 6e-6,
# which is the intended "numerically zero" tail scale.
SOLITON_TAIL_TOL = 1e-5


@dataclass(frozen=True)
class SolitonParams:
    """Soliton amplitude/velocity and the induced scheme coefficients.

    Derived: k = v/(2p), B = A sqrt(q/(2p)), L = 10 pi / k.
    """

    A: float = 1.3
    v: float = 3.1
    p: float = 1.7
    q: float = 1.1

    def __post_init__(self) -> None:
        if self.p <= 0 or self.q <= 0:
            raise ParameterError("soliton solutions need p > 0 and q > 0 (focusing)")
        k = self.v / (2.0 * self.p)
        if k <= 0:
            raise ParameterError("soliton wavenumber k = v/(2p) must be positive")
        B = self.A * math.sqrt(self.q / (2.0 * self.p))
        L = 10.0 * math.pi / k
        tail = 1.0 / math.cosh(B * L / 2.0)
        if tail > SOLITON_TAIL_TOL:
            raise ParameterError(
                f"periodization inconsistent: sech(B L / 2) = {tail:.3e} > {SOLITON_TAIL_TOL:.0e}"
            )
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "L", L)


def soliton_exact(params: SolitonParams, grid: Grid, t: float) -> np.ndarray:
    """Sample the periodized soliton on the grid at time t (Hermitian)."""
    env = 1.0 / np.cosh(params.B * periodize(grid.x - params.v * t, grid.L))
    phase = np.exp(1j * params.k * grid.x)
    return params.A**2 * np.outer(env, env) * np.outer(phase, phase.conj())


def soliton_potential(params: SolitonParams, x: np.ndarray, t: float, L: float) -> np.ndarray:
    """V(x, t) = u(x, x, t) = A^2 sech^2(B w(x - v t))."""
    return params.A**2 / np.cosh(params.B * periodize(x - params.v * t, L)) ** 2


def soliton_phi_exact(params: SolitonParams, grid: Grid, t: float) -> np.ndarray:
    """phi(x, y, t) = V(x, t) - V(y, t)."""
    v = soliton_potential(params, grid.x, t, grid.L)
    return np.subtract.outer(v, v)


class SolitonErrorTracker:
    """Observer accumulating E_u and E_phi against the exact solution.

    Both maxima run over every step including n = 0, where Phi^{-1/2} is
    compared against phi at t = -tau/2 (this is what exposes the first-order
    naive-initialization error).
    """

    def __init__(self, params: SolitonParams, grid: Grid, tau: float, keep_series: bool = False):
        self.params = params
        self.grid = grid
        self.tau = tau
        self.E_u = 0.0
        self.E_phi = 0.0
        self.series: list[tuple[float, float, float]] | None = [] if keep_series else None

    def __call__(self, state: State, aux: StepAux | None) -> None:
        eu = float(np.abs(state.U - soliton_exact(self.params, self.grid, state.t)).max())
        t_half = state.t - self.tau / 2.0
        ephi = float(np.abs(state.Phi - soliton_phi_exact(self.params, self.grid, t_half)).max())
        self.E_u = max(self.E_u, eu)
        self.E_phi = max(self.E_phi, ephi)
        if self.series is not None:
            self.series.append((state.t, eu, ephi))


@dataclass
class SolitonRun:
    E_u: float
    E_phi: float
    result: EvolveResult
    deltas: dict
    grid: Grid
    tracker: SolitonErrorTracker
    collector: DiagnosticsCollector


def run_soliton(
    params: SolitonParams,
    grid: Grid,
    tau: float,
    T: float,
    init_mode: str = "advanced",
    diag_stride: int = 1,
    keep_series: bool = False,
) -> SolitonRun:
    """Evolve soliton initial data with Gamma = 0 and track exact errors."""
    cfg = SchemeConfig(p=params.p, q=params.q, tau=tau, T=T, init_mode=init_mode)
    gamma = zero_autocorrelation(grid)
    ops = build_operators(grid)
    u0 = soliton_exact(params, grid, 0.0)
    tracker = SolitonErrorTracker(params, grid, tau, keep_series=keep_series)
    collector = DiagnosticsCollector(ops, gamma, cfg, stride=diag_stride)
    result = evolve(u0, cfg, grid, gamma, observers=(tracker, collector), ops=ops)
    return SolitonRun(
        E_u=tracker.E_u,
        E_phi=tracker.E_phi,
        result=result,
        deltas=collector.deltas(),
        grid=grid,
        tracker=tracker,
        collector=collector,
    )


@dataclass
class EOCRow:
    h: float
    tau: float
    E_u: float
    E_phi: float
    eoc_u: float | None = None
    eoc_phi: float | None = None
    deltas: dict = field(default_factory=dict)


def eoc(rows: list[EOCRow], refined: str) -> list[EOCRow]:
    """Fill experimental orders from consecutive row pairs.

    ``refined`` is "tau" or "h"; the other parameter must match between the
    rows of each pair or ValidationError is raised.
    order = log(E_{i-1}/E_i) / log(p_{i-1}/p_i).
    """
    if refined not in ("tau", "h"):
        raise ValidationError(f"refined must be 'tau' or 'h', got {refined!r}")
    fixed = "h" if refined == "tau" else "tau"
    for prev, cur in zip(rows, rows[1:]):
        if not math.isclose(getattr(prev, fixed), getattr(cur, fixed), rel_tol=1e-12):
            raise ValidationError(
                f"rows refine {refined} but also differ in {fixed}: "
                f"{getattr(prev, fixed)} vs {getattr(cur, fixed)}"
            )
        ratio = getattr(prev, refined) / getattr(cur, refined)
        if ratio <= 1.0:
            raise ValidationError(f"{refined} must strictly decrease along the ladder")
        cur.eoc_u = math.log(prev.E_u / cur.E_u) / math.log(ratio)
        cur.eoc_phi = math.log(prev.E_phi / cur.E_phi) / math.log(ratio)
    return rows


_SQRT2 = math.sqrt(2.0)
TIME_LADDER_TAUS = (0.03, 0.03 / _SQRT2, 0.015, 0.015 / _SQRT2)
SPACE_LADDER_HS = tuple(0.4 / 2 ** (j / 4) for j in range(4))


def run_eoc_time(
    init_mode: str = "advanced",
    h_target: float = 0.04,
    taus=TIME_LADDER_TAUS,
    T: float = 0.6,
    params: SolitonParams | None = None,
    fast: bool = True,
) -> list[EOCRow]:
    """Temporal refinement ladder (tau by sqrt(2)) at fixed h."""
    params = params or SolitonParams()
    grid = grid_for_mesh(params.L, h_target, fast=fast)
    rows = []
    for tau in taus:
        run = run_soliton(params, grid, tau, T, init_mode=init_mode)
        rows.append(EOCRow(h=grid.h, tau=tau, E_u=run.E_u, E_phi=run.E_phi, deltas=run.deltas))
    return eoc(rows, refined="tau")


def run_eoc_space(
    init_mode: str = "advanced",
    tau: float = 5e-4,
    h_targets=SPACE_LADDER_HS,
    T: float = 0.6,
    params: SolitonParams | None = None,
) -> list[EOCRow]:
    """Spatial refinement ladder (h by 2^(1/4)) at fixed tau.

    Exact N = round(L/h) here (no FFT-friendly rounding): the refinement
    ratio feeds the order computation, which uses the actual h values.
    """
    params = params or SolitonParams()
    rows = []
    for h_target in h_targets:
        grid = grid_for_mesh(params.L, h_target, fast=False)
        run = run_soliton(params, grid, tau, T, init_mode=init_mode)
        rows.append(EOCRow(h=grid.h, tau=tau, E_u=run.E_u, E_phi=run.E_phi, deltas=run.deltas))
    return eoc(rows, refined="h")


# ---------------------------------------------------------------------------
# Fourier-mode oracle


def field_to_coeffs(U: np.ndarray, grid: Grid, K: int, tail_tol: float = 1e-10) -> np.ndarray:
    """Fourier coefficients u_hat[k+K, l+K], |k|,|l| <= K, from grid samples.

    u_hat_{k,l} = (-1)^(k+l) FFT2(U)[k, l] / N^2; the sign accounts for the
    x_i = -L/2 + i h sample offset.  Raises ValidationError when the relative
    coefficient mass outside the cutoff exceeds ``tail_tol``.
    """
    N = grid.N
    if 2 * K + 1 > N:
        raise ParameterError(f"cutoff K={K} does not fit on an N={N} grid")
    F = fft2(U) / N**2
    k = np.arange(-K, K + 1)
    sign = np.where((k[:, None] + k[None, :]) % 2 == 0, 1.0, -1.0)
    A = sign * F[np.ix_(k % N, k % N)]

    total = float(np.abs(F).sum())
    inside = float(np.abs(F[np.ix_(k % N, k % N)]).sum())
    if total > 0 and (total - inside) > tail_tol * total:
        raise ValidationError(
            f"coefficient mass outside |k|,|l| <= {K} is {(total - inside) / total:.3e} "
            f"of the total, above {tail_tol:.0e}"
        )
    return A


def coeffs_to_field(A: np.ndarray, grid: Grid) -> np.ndarray:
    """Evaluate the truncated Fourier series back on the grid."""
    K = (A.shape[0] - 1) // 2
    k = np.arange(-K, K + 1)
    E = np.exp(2j * np.pi * np.outer(grid.x, k) / grid.L)  # (N, 2K+1)
    return E @ A @ E.T


@dataclass
class OracleResult:
    times: np.ndarray
    coeffs: list
    K: int
    grid: Grid


def fourier_oracle(
    A0: np.ndarray,
    gamma_coeffs: np.ndarray,
    p: float,
    q: float,
    grid: Grid,
    T: float,
    dt: float,
    store_every: int | None = None,
) -> OracleResult:
    """Integrate the truncated coefficient ODE system with classical RK4.

    ``A0``: initial coefficients, shape (2K+1, 2K+1).  ``gamma_coeffs``:
    P_n = P(n/L)/L for n in [-K, K] (Fourier coefficients of Gamma).
    """
    K = (A0.shape[0] - 1) // 2
    if gamma_coeffs.shape != (2 * K + 1,):
        raise ParameterError(
            f"gamma_coeffs must have shape ({2 * K + 1},), got {gamma_coeffs.shape}"
        )
    L = grid.L
    k = np.arange(-K, K + 1)
    omega = (4.0 * np.pi**2 * p / L**2) * np.subtract.outer(k**2, k**2)
    # (P_{-l} - P_k) as a (k, l) table
    p_rev = gamma_coeffs[::-1]  # p_rev[l+K] = P_{-l}
    source_coef = p_rev[None, :] - gamma_coeffs[:, None]  # (k, l) -> P_{-l} - P_k
    sum_idx = (np.add.outer(k, k) + 2 * K).ravel()  # (k+l) + 2K, for bincount

    def anti_diag_sums(A: np.ndarray) -> np.ndarray:
        g_re = np.bincount(sum_idx, weights=A.real.ravel(), minlength=4 * K + 1)
        g_im = np.bincount(sum_idx, weights=A.imag.ravel(), minlength=4 * K + 1)
        return g_re + 1j * g_im

    kl_idx = np.add.outer(k, k) + 2 * K

    def rhs(A: np.ndarray) -> np.ndarray:
        g = anti_diag_sums(A)
        G = toeplitz(c=g[2 * K:], r=g[2 * K::-1])  # G[a, b] = g_{a-b}
        conv = G @ A - A @ G.T
        return -1j * omega * A + 1j * q * source_coef * g[kl_idx] + 1j * q * conv

    n_steps = max(int(math.ceil(T / dt - 1e-9)), 1)
    dt_eff = T / n_steps
    times, coeffs = [0.0], [A0.copy()]
    A = A0.astype(complex)
    for n in range(n_steps):
        k1 = rhs(A)
        k2 = rhs(A + 0.5 * dt_eff * k1)
        k3 = rhs(A + 0.5 * dt_eff * k2)
        k4 = rhs(A + dt_eff * k3)
        A = A + (dt_eff / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if store_every and (n + 1) % store_every == 0 and n + 1 != n_steps:
            times.append((n + 1) * dt_eff)
            coeffs.append(A.copy())
    times.append(n_steps * dt_eff)
    coeffs.append(A.copy())
    return OracleResult(times=np.asarray(times), coeffs=coeffs, K=K, grid=grid)
