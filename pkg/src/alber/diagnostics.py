"""Conserved and monitored quantities: invariants I0-I3, balance law residual,
constraint error, norms, and amplification factors.

All quantities use the composite trapezoid rule for periodic functions
(plain h- or h^2-weighted sums).  The diagonal-restricted derivatives in I2
and I3 use the same 4th-order periodic first-difference stencil as the
interior scheme, applied as (d/dx - d/dy) u = D1 @ U - (D1 @ U^T)^T and then
restricted to i = j.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .grid_spectra import Autocorrelation
from .operators import FirstDifference, Operators
from .rcn_scheme import EvolveResult, SchemeConfig, State, StepAux

__all__ = [
    "DiagnosticsRecord",
    "AmplificationReport",
    "DiagnosticsCollector",
    "invariant_I0",
    "invariant_I1",
    "invariant_I2",
    "invariant_I3",
    "balance_residual",
    "constraint_error",
    "hermitian_drift",
    "diag_imag_max",
    "amplification_factors",
    "relative_drift",
]

CSV_COLUMNS = (
    "t", "L2", "Linf", "I0", "I1re", "I1im", "I2re", "I2im",
    "I3re", "I3im", "balance_res", "constraint_err", "herm_drift", "diag_imag",
)


def _hyperbolic_gradient(U: np.ndarray, d1: FirstDifference) -> np.ndarray:
    """(d/dx - d/dy) U in field form."""
    m = d1.matrix
    return m @ U - (m @ U.T).T


def invariant_I0(U: np.ndarray, gamma: Autocorrelation, h: float) -> float:
    """I0 = h^2 sum |Gamma(x_i - y_j) + U_{ij}|^2 (exactly conserved)."""
    total = gamma.matrix() + U
    return float(h * h * np.vdot(total, total).real)


def invariant_I1(U: np.ndarray, h: float) -> complex:
    """I1 = h sum_i U_{ii} (exactly conserved; Im is a health metric)."""
    return complex(h * np.diagonal(U).sum())


def invariant_I2(U: np.ndarray, d1: FirstDifference, h: float) -> complex:
    """I2 = h sum_i [(d/dx - d/dy) U]_{ii}."""
    return complex(h * np.diagonal(_hyperbolic_gradient(U, d1)).sum())


def invariant_I3(U: np.ndarray, d1: FirstDifference, p: float, q: float, h: float) -> complex:
    """I3 = (q/p) h sum_i U_{ii}^2 + h sum_i [(d/dx - d/dy)^2 U]_{ii}."""
    if p == 0:
        raise ParameterError("I3 requires p != 0")
    w = _hyperbolic_gradient(_hyperbolic_gradient(U, d1), d1)
    v = np.diagonal(U)
    return complex((q / p) * h * (v * v).sum() + h * np.diagonal(w).sum())


def balance_residual(
    Un: np.ndarray,
    U_half: np.ndarray,
    Un1: np.ndarray,
    Phi_half: np.ndarray,
    gamma: Autocorrelation,
    q: float,
    tau: float,
    h: float,
) -> float:
    """Residual of the discrete balance law

    (M^{n+1} - M^n)/tau = 2 Re[ i q h^2 sum Phi^{n+1/2} Gamma conj(U^{n+1/2}) ],
    M^n = h^2 sum |U^n|^2.
    """
    m0 = h * h * float(np.vdot(Un, Un).real)
    m1 = h * h * float(np.vdot(Un1, Un1).real)
    rhs = 2.0 * np.real(1j * q * h * h * np.sum(Phi_half * gamma.matrix() * np.conj(U_half)))
    return abs((m1 - m0) / tau - rhs)


def constraint_error(Un: np.ndarray, Un1: np.ndarray, Phi_half: np.ndarray) -> float:
    """max_{ij} |(U^{n+1}_{ii} - U^{n+1}_{jj} - U^n_{ii} + U^n_{jj})/2 - Phi^{n+1/2}_{ij}|."""
    dv = np.diagonal(Un1) - np.diagonal(Un)
    e = 0.5 * np.subtract.outer(dv, dv) - Phi_half
    return float(np.abs(e).max())


def hermitian_drift(U: np.ndarray) -> float:
    return float(np.abs(U - U.conj().T).max())


def diag_imag_max(U: np.ndarray) -> float:
    return float(np.abs(np.imag(np.diagonal(U))).max())


def relative_drift(end, start) -> float:
    """|(I[U^N] - I[u0]) / I[u0]| for scalar (possibly complex) invariants."""
    ref = abs(start)
    if ref == 0.0:
        return abs(end - start)
    return abs(end - start) / ref


@dataclass
class DiagnosticsRecord:
    t: float
    L2: float
    Linf: float
    I0: float
    I1: complex
    I2: complex
    I3: complex
    balance_res: float
    constraint_err: float
    herm_drift: float
    diag_imag: float

    def row(self) -> list:
        return [
            self.t, self.L2, self.Linf, self.I0,
            self.I1.real, self.I1.imag, self.I2.real, self.I2.imag,
            self.I3.real, self.I3.imag,
            self.balance_res, self.constraint_err, self.herm_drift, self.diag_imag,
        ]


@dataclass
class AmplificationReport:
    """IAF/TAF summary; TAF is None when Gamma = 0."""

    IAF: float
    TAF: float | None
    max_u_inf: float
    u0_inf: float
    gamma0: float
    t_at_max: float
    snapshot_stride: int | None = None

    def triangle_ok(self, rtol: float = 1e-12) -> bool:
        if self.TAF is None or self.gamma0 == 0.0:
            return True
        slack = self.IAF * self.u0_inf / self.gamma0
        lo, hi = abs(1.0 - slack), 1.0 + slack
        return lo - rtol * max(hi, 1.0) <= self.TAF <= hi + rtol * max(hi, 1.0)


def amplification_factors(
    result: EvolveResult,
    gamma: Autocorrelation,
    snapshot_stride: int | None = None,
) -> AmplificationReport:
    """Build the amplification report from a run record.

    IAF = max_{t,x,y} |u| / max |u0|; TAF = max_{t,x,y} |u + Gamma| / Gamma(0).
    Maxima come from the live field tracked at every step by ``evolve``.
    """
    if result.u0_inf == 0.0:
        raise ParameterError("IAF undefined: initial inhomogeneity is identically zero")
    iaf = result.max_u_inf / result.u0_inf
    taf = None if gamma.gamma0 == 0.0 else result.max_total_inf / gamma.gamma0
    return AmplificationReport(
        IAF=iaf,
        TAF=taf,
        max_u_inf=result.max_u_inf,
        u0_inf=result.u0_inf,
        gamma0=gamma.gamma0,
        t_at_max=result.t_at_max,
        snapshot_stride=snapshot_stride,
    )


class DiagnosticsCollector:
    """Observer collecting one DiagnosticsRecord per observed step.

    Records at steps with n % stride == 0, plus the initial and final states.
    """

    def __init__(
        self,
        ops: Operators,
        gamma: Autocorrelation,
        cfg: SchemeConfig,
        stride: int = 1,
    ):
        self.ops = ops
        self.gamma = gamma
        self.cfg = cfg
        self.stride = max(int(stride), 1)
        self.records: list[DiagnosticsRecord] = []

    def __call__(self, state: State, aux: StepAux | None) -> None:
        if aux is not None and state.n % self.stride != 0 and not aux.final:
            return
        h = self.ops.grid.h
        U = state.U
        if aux is None:
            bal, constr = 0.0, 0.0
        else:
            bal = balance_residual(
                aux.U_prev, aux.U_half, U, aux.Phi_half,
                self.gamma, self.cfg.q, self.cfg.tau, h,
            )
            constr = constraint_error(aux.U_prev, U, aux.Phi_half)
        self.records.append(DiagnosticsRecord(
            t=state.t,
            L2=float(h * np.linalg.norm(U)),
            Linf=float(np.abs(U).max()),
            I0=invariant_I0(U, self.gamma, h),
            I1=invariant_I1(U, h),
            I2=invariant_I2(U, self.ops.d1, h),
            I3=invariant_I3(U, self.ops.d1, self.cfg.p, self.cfg.q, h),
            balance_res=bal,
            constraint_err=constr,
            herm_drift=hermitian_drift(U),
            diag_imag=diag_imag_max(U),
        ))

    def deltas(self) -> dict:
        """End-of-run relative invariant drifts dI0..dI3 (and their run maxima)."""
        if len(self.records) < 2:
            raise ParameterError("need at least an initial and a final record")
        first, last = self.records[0], self.records[-1]
        out = {
            "dI0": relative_drift(last.I0, first.I0),
            "dI1": relative_drift(last.I1, first.I1),
            "dI2": relative_drift(last.I2, first.I2),
            "dI3": relative_drift(last.I3, first.I3),
        }
        for name in ("I0", "I1", "I2", "I3"):
            ref = getattr(first, name)
            out["max_d" + name] = max(
                relative_drift(getattr(r, name), ref) for r in self.records
            )
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for rec in self.records:
                writer.writerow(rec.row())
