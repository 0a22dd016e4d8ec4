"""Timestepper: initial data, staggered initialization, stepping, run loop."""

import numpy as np
import pytest

from alber.errors import ParameterError
from alber.grid_spectra import (
    GaussianSpectrumParams,
    Grid,
    gaussian_gamma,
    grid_for_mesh,
    zero_autocorrelation,
)
from alber.operators import build_operators
from alber.rcn_scheme import (
    InitialInhomogeneity,
    SchemeConfig,
    State,
    build_initial_state,
    evolve,
    init_phi_advanced,
    init_phi_naive,
    step,
)


def _standard_setup(N=64, L=50.0, C=1.0, tau=0.01, T=0.1, **cfg_kw):
    grid = Grid(N=N, L=L)
    gamma = gaussian_gamma(GaussianSpectrumParams(C=C, sigma=0.36), grid)
    ops = build_operators(grid)
    cfg = SchemeConfig(p=1.0, q=1.0, tau=tau, T=T, **cfg_kw)
    u0 = build_initial_state(InitialInhomogeneity.standard(), grid)
    return grid, gamma, ops, cfg, u0


class TestConfig:
    def test_validation(self):
        with pytest.raises(ParameterError):
            SchemeConfig(p=1, q=1, tau=-0.1, T=1.0)
        with pytest.raises(ParameterError):
            SchemeConfig(p=1, q=1, tau=0.5, T=0.1)
        with pytest.raises(ParameterError):
            SchemeConfig(p=1, q=1, tau=0.1, T=1.0, init_mode="bogus")
        with pytest.raises(ParameterError):
            SchemeConfig(p=1, q=1, tau=0.1, T=1.0, dynamics="bogus")


class TestInitialData:
    def test_standard_norms(self):
        grid = grid_for_mesh(50.0, 0.09)
        u0 = build_initial_state(InitialInhomogeneity.standard(), grid)
        l2 = grid.h * np.linalg.norm(u0)
        assert l2 == pytest.approx(0.31, abs=0.02)
        assert np.abs(u0).max() == pytest.approx(0.07, abs=0.01)

    def test_hermitian_by_construction(self):
        grid = Grid(N=32, L=50.0)
        u0 = build_initial_state(InitialInhomogeneity.standard(), grid)
        assert np.array_equal(u0, u0.conj().T)

    def test_projection_fixes_hermitian_arrays(self):
        grid = Grid(N=8, L=3.0)
        rng = np.random.default_rng(0)
        F = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
        H = 0.5 * (F + F.conj().T)
        assert np.array_equal(build_initial_state(H, grid), H)

    def test_shape_mismatch(self):
        grid = Grid(N=8, L=3.0)
        with pytest.raises(ParameterError):
            build_initial_state(np.zeros((7, 7)), grid)


class TestPhiInitialization:
    def test_naive_is_trace_difference(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32)
        phi = init_phi_naive(u0)
        v = np.real(np.diagonal(u0))
        assert np.array_equal(phi, np.subtract.outer(v, v))
        assert np.array_equal(phi, -phi.T)

    def test_naive_rejects_complex_diagonal(self):
        U = np.eye(8) * (1.0 + 0.5j)
        with pytest.raises(ParameterError):
            init_phi_naive(U)

    def test_advanced_tends_to_naive_as_tau_vanishes(self):
        grid, gamma, ops, _, u0 = _standard_setup(N=48)
        ref = init_phi_naive(u0)
        prev_err = None
        for tau in (1e-2, 1e-3, 1e-4):
            cfg = SchemeConfig(p=1.0, q=1.0, tau=tau, T=tau)
            err = np.abs(init_phi_advanced(u0, ops, cfg, gamma) - ref).max()
            if prev_err is not None:
                assert err < 0.2 * prev_err
            prev_err = err

    def test_advanced_antisymmetric(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=48)
        phi = init_phi_advanced(u0, ops, cfg, gamma)
        assert np.array_equal(phi, -phi.T)


class TestStep:
    def test_preserves_hermitian_symmetry(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=48)
        state = State(U=u0.astype(complex), Phi=init_phi_naive(u0), n=0, t=0.0)
        for _ in range(5):
            state, _ = step(state, ops, cfg, gamma)
        assert np.abs(state.U - state.U.conj().T).max() < 1e-13

    def test_free_evolution_conserves_l2(self):
        # Gamma = 0 and diagonal initial data -> Phi = 0, pure dispersive CN:
        # the update is a Cayley transform, so the L2 norm is conserved.
        grid = Grid(N=48, L=50.0)
        gamma = zero_autocorrelation(grid)
        ops = build_operators(grid)
        cfg = SchemeConfig(p=1.0, q=1.0, tau=0.01, T=0.1)
        u0 = build_initial_state(InitialInhomogeneity(), grid)  # real, symmetric
        res = evolve(u0, cfg, grid, gamma, ops=ops)
        assert np.linalg.norm(res.state.U) == pytest.approx(np.linalg.norm(u0), rel=1e-12)

    def test_one_step_local_error_third_order(self):
        # local truncation error of a second-order one-step map scales as tau^3
        from alber.validation import SolitonParams, soliton_exact

        params = SolitonParams()
        grid = grid_for_mesh(params.L, 0.05)
        gamma = zero_autocorrelation(grid)
        ops = build_operators(grid)
        errs = []
        for tau in (0.02, 0.01):
            cfg = SchemeConfig(p=params.p, q=params.q, tau=tau, T=tau)
            u0 = soliton_exact(params, grid, 0.0)
            res = evolve(u0, cfg, grid, gamma, ops=ops)
            errs.append(np.abs(res.state.U - soliton_exact(params, grid, tau)).max())
        order = np.log2(errs[0] / errs[1])
        assert 2.7 < order < 3.3

    def test_linearized_scales_with_epsilon_squared(self):
        # in linearized dynamics, eps*u0 evolves to eps*(solution of u0) exactly
        grid, gamma, ops, cfg, u0 = _standard_setup(N=48, dynamics="linearized", T=0.05)
        res1 = evolve(u0, cfg, grid, gamma, ops=ops)
        res2 = evolve(0.5 * u0, cfg, grid, gamma, ops=ops)
        assert np.abs(res2.state.U - 0.5 * res1.state.U).max() < 1e-12

    def test_full_dynamics_is_not_linear(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=48, T=0.05)
        res1 = evolve(u0, cfg, grid, gamma, ops=ops)
        res2 = evolve(0.5 * u0, cfg, grid, gamma, ops=ops)
        assert np.abs(res2.state.U - 0.5 * res1.state.U).max() > 1e-8

    def test_time_reversal_replay(self):
        # replaying the recorded Phi sequence backwards with tau -> -tau
        # recovers the initial field to roundoff (the step is a Cayley map)
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32, tau=0.01, T=0.05)
        phis = []

        def record(state, aux):
            if aux is not None:
                phis.append(aux.Phi_half)

        res = evolve(u0, cfg, grid, gamma, observers=(record,), ops=ops)
        back_cfg = SchemeConfig(p=-cfg.p, q=-cfg.q, tau=cfg.tau, T=cfg.T)
        state = State(U=res.state.U, Phi=np.zeros_like(res.state.Phi), n=0, t=0.0)
        for phi in reversed(phis):
            state, _ = step(state, ops, back_cfg, gamma, phi_override=phi)
        assert np.abs(state.U - u0).max() < 1e-11


class TestEvolve:
    def test_step_count_ceil(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32, tau=0.03, T=0.1)
        res = evolve(u0, cfg, grid, gamma, ops=ops)
        assert res.n_steps == 4  # ceil(0.1/0.03)
        assert res.t_final == pytest.approx(0.12)

    def test_observer_protocol(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32, tau=0.02, T=0.06)
        calls = []

        def obs(state, aux):
            calls.append((state.n, None if aux is None else aux.final))

        evolve(u0, cfg, grid, gamma, observers=(obs,), ops=ops)
        assert calls == [(0, None), (1, False), (2, False), (3, True)]

    def test_bitwise_determinism(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32, T=0.05)
        r1 = evolve(u0, cfg, grid, gamma, ops=ops)
        r2 = evolve(u0, cfg, grid, gamma, ops=ops)
        assert np.array_equal(r1.state.U, r2.state.U)

    def test_live_extrema_tracking(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32, T=0.05)
        res = evolve(u0, cfg, grid, gamma, ops=ops)
        assert res.u0_inf == pytest.approx(np.abs(u0).max())
        assert res.max_u_inf >= res.u0_inf
        assert 0.0 <= res.t_at_max <= res.t_final

    def test_record_diagonal(self):
        grid, gamma, ops, cfg, u0 = _standard_setup(N=32, tau=0.02, T=0.04)
        res = evolve(u0, cfg, grid, gamma, ops=ops, record_diagonal=True)
        assert len(res.diag_times) == res.n_steps + 1
        assert np.array_equal(res.diag_slices[0], np.diagonal(u0))
