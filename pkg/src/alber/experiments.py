"""Run configuration, output persistence, experiment drivers, Monte Carlo campaign.

Config files are JSON with explicit physics parameters (p, q, spectrum, u0
must be present; no physics defaults).  Complex numbers are stored as
[re, im] pairs.

Reproducibility: realization index ``i`` of a Monte Carlo campaign uses the
counter-based Philox generator with 128-bit key ``master_seed + (i << 64)``,
so every realization's stream is independent of scheduling order and worker
count.  Snapshot records are a JSON header line followed by raw little-endian
complex128 payload and round-trip bit-exactly.
"""

from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, StepFailure
from .grid_spectra import (
    Autocorrelation,
    GaussianSpectrumParams,
    Grid,
    gaussian_gamma,
    grid_for_mesh,
    zero_autocorrelation,
)
from .operators import build_operators
from .rcn_scheme import (
    EvolveResult,
    InitialInhomogeneity,
    SchemeConfig,
    build_initial_state,
    evolve,
)
from .diagnostics import (
    DiagnosticsCollector,
    amplification_factors,
    invariant_I0,
    invariant_I1,
    invariant_I2,
    invariant_I3,
    relative_drift,
)

__all__ = [
    "RunConfig",
    "MonteCarloConfig",
    "write_snapshot",
    "read_snapshots",
    "run_experiment",
    "run_montecarlo",
    "realization_parameters",
    "resolve_workers",
    "MC_CSV_COLUMNS",
]


def _c2pair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def _pair2c(v) -> complex:
    if isinstance(v, (int, float)):
        return complex(v)
    return complex(v[0], v[1])


@dataclass
class RunConfig:
    """Full description of a single evolution run."""

    p: float
    q: float
    L: float
    N: int
    tau: float
    T: float
    spectrum: dict          # {"kind": "gaussian", "C": .., "sigma": ..} | {"kind": "zero"}
    u0: dict                # {"kind": "expression", "A1": [re,im], ...} | {"kind": "soliton"} | {"kind": "file", "path": ..}
    init_mode: str = "advanced"
    dynamics: str = "full"
    seed: int = 0
    snapshot_stride: int = 0
    diag_stride: int = 1
    output_dir: str = "."

    REQUIRED = ("p", "q", "L", "N", "tau", "T", "spectrum", "u0")

    def to_dict(self) -> dict:
        d = asdict(self)
        u0 = dict(d["u0"])
        for key in ("A1", "A2", "A3"):
            if key in u0:
                u0[key] = _c2pair(_pair2c(u0[key]))
        d["u0"] = u0
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        missing = [k for k in cls.REQUIRED if k not in d]
        if missing:
            raise ConfigurationError(f"config missing required keys: {', '.join(missing)}")
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        return cls(**d)

    @classmethod
    def load(cls, path) -> "RunConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    # -- realized objects ---------------------------------------------------

    def grid(self) -> Grid:
        return Grid(N=self.N, L=self.L)

    def autocorrelation(self, grid: Grid) -> Autocorrelation:
        kind = self.spectrum.get("kind", "gaussian")
        if kind == "zero":
            return zero_autocorrelation(grid)
        if kind == "gaussian":
            for key in ("C", "sigma"):
                if key not in self.spectrum:
                    raise ConfigurationError(f"gaussian spectrum needs explicit {key!r}")
            return gaussian_gamma(
                GaussianSpectrumParams(C=self.spectrum["C"], sigma=self.spectrum["sigma"]), grid
            )
        raise ConfigurationError(f"unknown spectrum kind {kind!r}")

    def initial_field(self, grid: Grid) -> np.ndarray:
        kind = self.u0.get("kind", "expression")
        if kind == "expression":
            coeffs = {k: _pair2c(self.u0.get(k, 0.0)) for k in ("A1", "A2", "A3")}
            extras = {
                k: self.u0[k]
                for k in ("amplitude", "ax", "ay", "kx", "ky")
                if k in self.u0
            }
            return build_initial_state(InitialInhomogeneity(**coeffs, **extras), grid)
        if kind == "soliton":
            from .validation import SolitonParams, soliton_exact

            return soliton_exact(SolitonParams(p=self.p, q=self.q), grid, 0.0)
        if kind == "file":
            data = np.fromfile(self.u0["path"], dtype="<c16")
            return build_initial_state(data.reshape(grid.N, grid.N), grid)
        raise ConfigurationError(f"unknown u0 kind {kind!r}")

    def scheme(self) -> SchemeConfig:
        return SchemeConfig(
            p=self.p, q=self.q, tau=self.tau, T=self.T,
            init_mode=self.init_mode, dynamics=self.dynamics,
        )


# ---------------------------------------------------------------------------
# Snapshot records


def write_snapshot(fh, t: float, grid: Grid, kind: str, array: np.ndarray) -> None:
    """Append one snapshot record (JSON header line + raw complex128 payload)."""
    if kind not in ("full", "diagonal"):
        raise ConfigurationError(f"snapshot kind must be 'full' or 'diagonal', got {kind!r}")
    payload = np.ascontiguousarray(array, dtype="<c16")
    expected = (grid.N * grid.N,) if kind == "full" else (grid.N,)
    if payload.size != expected[0]:
        raise ConfigurationError(f"payload size {payload.size} != expected {expected[0]}")
    header = json.dumps(
        {"t": t, "N": grid.N, "L": grid.L, "kind": kind, "dtype": "complex128-le"}
    )
    fh.write(header.encode() + b"\n")
    fh.write(payload.tobytes())


def read_snapshots(path) -> list:
    """Read back all records from a snapshot file as (header, array) pairs."""
    out = []
    with open(path, "rb") as fh:
        while True:
            line = fh.readline()
            if not line:
                break
            header = json.loads(line)
            count = header["N"] ** 2 if header["kind"] == "full" else header["N"]
            raw = fh.read(16 * count)
            if len(raw) != 16 * count:
                raise ConfigurationError(f"truncated snapshot payload in {path}")
            arr = np.frombuffer(raw, dtype="<c16")
            if header["kind"] == "full":
                arr = arr.reshape(header["N"], header["N"])
            out.append((header, arr))
    return out


# ---------------------------------------------------------------------------
# Single-run driver


def run_experiment(config: RunConfig, quiet: bool = True) -> dict:
    """Execute one run and persist diagnostics, slices, snapshots, summary.

    Writes to config.output_dir: diagnostics.csv, diagonal.bin (diagonal
    slice at every step), snapshots.bin (full fields every snapshot_stride
    steps, when the stride is nonzero), summary.json.  Returns the summary.
    On step failure the last good state is persisted and re-raised.
    """
    outdir = Path(config.output_dir)
    outdir.mkdir(parents=True, exist_ok=True)
    grid = config.grid()
    gamma = config.autocorrelation(grid)
    ops = build_operators(grid)
    cfg = config.scheme()
    u0 = config.initial_field(grid)

    collector = DiagnosticsCollector(ops, gamma, cfg, stride=config.diag_stride)
    snap_fh = open(outdir / "snapshots.bin", "wb") if config.snapshot_stride else None
    diag_fh = open(outdir / "diagonal.bin", "wb")

    def slicer(state, aux):
        write_snapshot(diag_fh, state.t, grid, "diagonal", np.diagonal(state.U))
        if snap_fh and (aux is None or state.n % config.snapshot_stride == 0 or aux.final):
            write_snapshot(snap_fh, state.t, grid, "full", state.U)

    status = "ok"
    try:
        result = evolve(u0, cfg, grid, gamma, observers=(collector, slicer), ops=ops)
    except StepFailure as exc:
        status = f"step-failure: {exc}"
        state = exc.state
        if state is not None:
            with open(outdir / "last_good_state.bin", "wb") as fh:
                write_snapshot(fh, state.t, grid, "full", state.U)
        result = None
        raise
    finally:
        diag_fh.close()
        if snap_fh:
            snap_fh.close()
        collector.write_csv(outdir / "diagnostics.csv")

    report = amplification_factors(result, gamma, snapshot_stride=config.snapshot_stride or None)
    summary = {
        "status": status,
        "config": config.to_dict(),
        "t_final": result.t_final,
        "n_steps": result.n_steps,
        "IAF": report.IAF,
        "TAF": report.TAF,
        "max_u_inf": report.max_u_inf,
        "u0_inf": report.u0_inf,
        "gamma0": report.gamma0,
        "t_at_max": report.t_at_max,
        "deltas": collector.deltas(),
    }
    with open(outdir / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    if not quiet:
        print(json.dumps({k: summary[k] for k in ("status", "IAF", "TAF", "t_at_max")}))
    return summary


# ---------------------------------------------------------------------------
# Monte Carlo campaign

MC_CSV_COLUMNS = (
    "index", "seed", "C", "A1re", "A1im", "A2re", "A2im", "A3re", "A3im",
    "IAF", "TAF", "t_at_max", "dI0", "dI1", "dI2", "dI3", "status",
)


@dataclass
class MonteCarloConfig:
    """Amplification-factor campaign over randomized (C, A1, A2, A3)."""

    n_realizations: int = 20
    master_seed: int = 0
    c_mode: str = "stratified"   # "stratified" | "iid"
    c_range: tuple = (0.9, 1.9)
    p: float = 1.0
    q: float = 1.0
    sigma: float = 0.36
    L: float = 50.0
    h: float = 0.12
    tau: float = 2e-3
    T: float = 16.0
    init_mode: str = "advanced"
    workers: int = 1
    output_dir: str = "."

    def __post_init__(self) -> None:
        if self.c_mode not in ("stratified", "iid"):
            raise ConfigurationError(f"c_mode must be 'stratified' or 'iid', got {self.c_mode!r}")

    @classmethod
    def load(cls, path) -> "MonteCarloConfig":
        with open(path) as fh:
            d = json.load(fh)
        if "c_range" in d:
            d["c_range"] = tuple(d["c_range"])
        return cls(**d)

    def save(self, path) -> None:
        d = asdict(self)
        d["c_range"] = list(d["c_range"])
        with open(path, "w") as fh:
            json.dump(d, fh, indent=2)
            fh.write("\n")


def _realization_key(master_seed: int, index: int) -> int:
    return int(master_seed) + (int(index) << 64)


def realization_parameters(mc: MonteCarloConfig, index: int) -> dict:
    """Deterministic (C, A1..A3) draw for one realization.

    Draw order is fixed: first the C variate, then Re/Im pairs of A1, A2, A3.
    """
    key = _realization_key(mc.master_seed, index)
    rng = np.random.Generator(np.random.Philox(key=key))
    lo, hi = mc.c_range
    unit = rng.uniform()
    if mc.c_mode == "stratified":
        c = lo + (hi - lo) * (index + unit) / mc.n_realizations
    else:
        c = lo + (hi - lo) * unit
    a = rng.normal(0.0, 1.0 / 3.0, size=6)
    return {
        "index": index,
        "seed": key,
        "C": float(c),
        "A1": complex(a[0], a[1]),
        "A2": complex(a[2], a[3]),
        "A3": complex(a[4], a[5]),
    }


def _run_realization(args) -> dict:
    mc, index = args
    params = realization_parameters(mc, index)
    row = {
        "index": index,
        "seed": params["seed"],
        "C": params["C"],
        "A1re": params["A1"].real, "A1im": params["A1"].imag,
        "A2re": params["A2"].real, "A2im": params["A2"].imag,
        "A3re": params["A3"].real, "A3im": params["A3"].imag,
    }
    try:
        grid = grid_for_mesh(mc.L, mc.h)
        gamma = gaussian_gamma(GaussianSpectrumParams(C=params["C"], sigma=mc.sigma), grid)
        ops = build_operators(grid)
        cfg = SchemeConfig(p=mc.p, q=mc.q, tau=mc.tau, T=mc.T, init_mode=mc.init_mode)
        u0 = build_initial_state(
            InitialInhomogeneity(A1=params["A1"], A2=params["A2"], A3=params["A3"]), grid
        )
        inv0 = _invariants(u0, ops, gamma, mc)
        result = evolve(u0, cfg, grid, gamma, ops=ops)
        inv1 = _invariants(result.state.U, ops, gamma, mc)
        report = amplification_factors(result, gamma)
        row.update(
            IAF=report.IAF,
            TAF=report.TAF,
            t_at_max=report.t_at_max,
            dI0=relative_drift(inv1[0], inv0[0]),
            dI1=relative_drift(inv1[1], inv0[1]),
            dI2=relative_drift(inv1[2], inv0[2]),
            dI3=relative_drift(inv1[3], inv0[3]),
            status="ok",
        )
    except Exception as exc:  # individual failures must not kill the campaign
        row.update(
            IAF=float("nan"), TAF=float("nan"), t_at_max=float("nan"),
            dI0=float("nan"), dI1=float("nan"), dI2=float("nan"), dI3=float("nan"),
            status=f"failed: {type(exc).__name__}: {exc}",
        )
    return row


def _invariants(U, ops, gamma, mc):
    h = ops.grid.h
    return (
        invariant_I0(U, gamma, h),
        invariant_I1(U, h),
        invariant_I2(U, ops.d1, h),
        invariant_I3(U, ops.d1, mc.p, mc.q, h),
    )


def resolve_workers(requested: int | None) -> int:
    """--threads resolution; the ALBER_THREADS env var takes precedence."""
    env = os.environ.get("ALBER_THREADS")
    if env:
        return max(int(env), 1)
    return max(requested or 1, 1)


def run_montecarlo(mc: MonteCarloConfig, csv_path=None) -> list:
    """Run the campaign; rows ordered by index regardless of completion order."""
    jobs = [(mc, i) for i in range(mc.n_realizations)]
    workers = resolve_workers(mc.workers)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_run_realization, jobs))
    else:
        rows = [_run_realization(job) for job in jobs]
    rows.sort(key=lambda r: r["index"])
    if csv_path is not None:
        path = Path(csv_path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            fh.write(
                f"# master_seed={mc.master_seed} c_mode={mc.c_mode} "
                f"n={mc.n_realizations} tau={mc.tau} h={mc.h} T={mc.T} L={mc.L}\n"
            )
            writer = csv.DictWriter(fh, fieldnames=MC_CSV_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return rows
