"""Integrator and stochastic-kick contracts."""

from dataclasses import replace

import numpy as np
import pytest

import cavitysim as cs
from cavitysim import _kernels as K
from cavitysim.dynamics import (
    AtomState,
    KickOptions,
    NoiseProcess,
    StepControl,
    noise_advance,
    pack_drive,
    pack_options,
    pack_system,
    simulate,
    spontaneous_recoil_direction,
    step,
)
from cavitysim.forces import ForceOptions, diffusion

TWOPI = 2.0 * np.pi

NO_KICKS = KickOptions(enable_sp=False, enable_dp=False)
NO_EXTRAS = ForceOptions(gravity=False, stark_force=False)
QUIET = NoiseProcess(sigma_eps=0.0, dt_noise=1e-5)


def drive_off():
    return cs.DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=0.0)


def trap_only(u0=1.2e-26):
    return cs.DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=0.0, trap_depth=u0)


class TestDeterministicIntegration:
    def test_free_flight_precision(self, params):
        # forces off: 1 ms of drift, relative position error < 1e-12
        v0 = np.array([0.02, -0.01, 0.03])
        st = AtomState(pos=np.zeros(3), mom=v0 * params.mass)
        rng = cs.RngStream(1, 0)
        out, _, diag, _ = simulate(st, drive_off(), params, QUIET, rng, t_end=1e-3,
                                   ctrl=StepControl(h_max=1e-6), kicks=NO_KICKS,
                                   force_opts=NO_EXTRAS)
        assert diag.n_accepted >= 1000
        err = np.abs(out.pos - v0 * 1e-3) / np.abs(v0 * 1e-3)
        assert err.max() < 1e-12

    def test_axial_trap_frequency(self, params):
        # small-amplitude axial oscillation at sqrt(2 U0 k_t^2 / m)/(2 pi)
        u0 = 1.2e-26
        omega = params.k_trap * np.sqrt(2 * u0 / params.mass)
        z0 = 2e-9
        st = AtomState(pos=[0, 0, z0], mom=[0, 0, 0])
        rng = cs.RngStream(1, 1)
        n_periods = 30
        rec = np.zeros((400000, 9))
        out, _, _, n = simulate(st, trap_only(u0), params, QUIET, rng,
                                t_end=n_periods * TWOPI / omega,
                                kicks=NO_KICKS, force_opts=NO_EXTRAS, record=rec)
        z = rec[:n, 3]
        t = rec[:n, 0]
        crossings = np.where(np.diff(np.sign(z)) != 0)[0]
        # linear interpolation of crossing times; full period per 2 crossings
        tc = t[crossings] - z[crossings] * (t[crossings + 1] - t[crossings]) / \
            (z[crossings + 1] - z[crossings])
        periods = np.diff(tc[::2])
        freq = 1.0 / np.mean(periods)
        assert freq == pytest.approx(omega / TWOPI, rel=0.005)

    def test_energy_conservation(self, params):
        # kinetic + trap energy conserved to 1e-6 relative over 1 ms at the
        # default tolerance, all stochastic terms and friction off
        u0 = 1.2e-26
        d = trap_only(u0)
        st = AtomState(pos=[3e-6, -2e-6, 8e-8],
                       mom=params.mass * np.array([0.05, 0.02, 0.01]))

        def energy(s):
            return s.kinetic_energy(params) + cs.trap_potential(s.pos, d, params)

        e0 = energy(st)
        rng = cs.RngStream(1, 2)
        out, _, _, _ = simulate(st, d, params, QUIET, rng, t_end=1e-3,
                                kicks=NO_KICKS, force_opts=NO_EXTRAS,
                                friction=False)
        assert abs(energy(out) - e0) / abs(e0) < 1e-6

    def test_energy_conservation_with_gravity(self, params):
        u0 = 2e-26
        d = trap_only(u0)
        st = AtomState(pos=[2e-6, 1e-6, 5e-8],
                       mom=params.mass * np.array([0.03, -0.02, 0.02]))

        def energy(s):
            return (s.kinetic_energy(params) + cs.trap_potential(s.pos, d, params)
                    + params.mass * 9.80665 * s.pos[0])

        e0 = energy(st)
        rng = cs.RngStream(1, 3)
        out, _, _, _ = simulate(st, d, params, QUIET, rng, t_end=1e-3,
                                kicks=NO_KICKS,
                                force_opts=ForceOptions(gravity=True),
                                friction=False)
        assert abs(energy(out) - e0) / abs(e0) < 1e-6

    def test_integrator_order(self, params):
        # fixed-step error falls consistently with a 4th-order propagated
        # solution: halving h cuts the endpoint error by ~2^4
        u0 = 1.2e-26
        d = trap_only(u0)
        st0 = AtomState(pos=[1e-6, 0, 6e-8], mom=params.mass * np.array([0.02, 0, 0]))
        t_end = 2e-5

        def run(h):
            ctrl = StepControl(rtol=1e9, atol_pos=1e9, atol_mom=1e9,
                               h_min=h, h_max=h, h_init=h)
            out, _, _, _ = simulate(st0.copy(), d, params, QUIET,
                                    cs.RngStream(1, 4), t_end=t_end, ctrl=ctrl,
                                    kicks=NO_KICKS, force_opts=NO_EXTRAS,
                                    friction=False)
            return np.concatenate([out.pos, out.mom / params.mass])

        ref = run(2.5e-9)
        e1 = np.linalg.norm(run(4e-7) - ref)
        e2 = np.linalg.norm(run(2e-7) - ref)
        ratio = e1 / e2
        assert 10.0 < ratio < 26.0

    def test_step_failure_raises(self, params):
        # an unsatisfiable tolerance forces the rejection cascade h_max ->
        # h_min to run out of retries before reaching an acceptable step
        ctrl = StepControl(rtol=1e-16, atol_pos=1e-24, atol_mom=1e-44,
                           h_min=1e-13, h_max=1e-4, h_init=1e-4, max_retries=3)
        st = AtomState(pos=[1e-6, 0, 6e-8], mom=[0, 0, 0])
        with pytest.raises(RuntimeError, match="retries"):
            simulate(st, trap_only(), params, QUIET, cs.RngStream(1, 5),
                     t_end=1e-3, ctrl=ctrl, kicks=NO_KICKS, force_opts=NO_EXTRAS)


class TestStep:
    def test_single_step(self, params):
        st = AtomState(pos=[0, 0, 5e-8], mom=[0, 0, 0])
        out, noise, diag = step(st, trap_only(), params, QUIET, cs.RngStream(1, 6),
                                kicks=NO_KICKS, force_opts=NO_EXTRAS)
        assert diag.n_accepted == 1
        assert out.t > 0.0
        assert noise.t == out.t

    def test_deterministic_across_calls(self, params, probe_drive):
        def run():
            st = AtomState(pos=[1e-6, 0, 5e-8], mom=[0, 0, 0])
            noise = NoiseProcess(sigma_eps=0.1, dt_noise=1e-7)
            rng = cs.RngStream(9, 4)
            for _ in range(50):
                st, noise, _ = step(st, probe_drive, params, noise, rng)
            return st

        a, b = run(), run()
        assert np.array_equal(a.pos, b.pos)
        assert np.array_equal(a.mom, b.mom)
        assert a.t == b.t


class TestKickContract:
    def test_frozen_position_variance(self, params):
        # kicks only, position frozen: momentum variance grows at 2 D per axis
        drive = cs.DriveSettings.from_atom_cavity_detuning(
            delta=0.0, delta_pc=-params.g0, eta=TWOPI * 2e6,
            trap_depth=1.2e-26, stark_coeff=TWOPI * 10e6)
        pos = np.array([2e-6, -1e-6, params.lambda_probe / 8])
        parts = diffusion(pos, drive, params)
        d_axis = parts.d_sp_axis + parts.d_dp_axis
        sysv = pack_system(params)
        drv = pack_drive(drive)
        opts = pack_options(ForceOptions(), KickOptions())
        out = K.eval_point(pos[0], pos[1], pos[2], 0, 0, 0, sysv, drv, opts, 1.0)
        _, _, _, pe, dsp, ddx, ddy, ddz, _ = out
        rng = cs.RngStream(99, 0)
        h = 1e-7
        n = 30000
        y = np.zeros(7)
        acc = np.zeros(3)
        for _ in range(n):
            before = y[3:6].copy()
            K.apply_kicks(y, rng.state, h, pe, dsp, ddx, ddy, ddz, sysv, opts)
            acc += (y[3:6] - before) ** 2
        rate = acc * params.mass ** 2 / (n * h)
        assert np.allclose(rate, 2 * d_axis, rtol=0.08)

    def test_axial_only_variant_preserves_total_dp(self, params):
        drive = cs.DriveSettings.from_atom_cavity_detuning(
            delta=0.0, delta_pc=-params.g0, eta=TWOPI * 2e6)
        pos = np.array([4e-6, 2e-6, params.lambda_probe / 8])
        parts = diffusion(pos, drive, params)
        sysv = pack_system(params)
        drv = pack_drive(drive)
        opts = pack_options(ForceOptions(), KickOptions(axial_only_dp=True,
                                                        enable_sp=False))
        out = K.eval_point(pos[0], pos[1], pos[2], 0, 0, 0, sysv, drv, opts, 1.0)
        _, _, _, pe, dsp, ddx, ddy, ddz, _ = out
        rng = cs.RngStream(17, 0)
        h = 1e-7
        n = 20000
        y = np.zeros(7)
        acc = np.zeros(3)
        for _ in range(n):
            before = y[3:6].copy()
            K.apply_kicks(y, rng.state, h, pe, dsp, ddx, ddy, ddz, sysv, opts)
            acc += (y[3:6] - before) ** 2
        rate = acc * params.mass ** 2 / (n * h)
        assert rate[0] == 0.0 and rate[1] == 0.0
        # the axial-only kick has fixed magnitude: variance is exact per step
        assert rate[2] == pytest.approx(2 * parts.d_dp, rel=1e-9)

    def test_gaussian_sp_second_moment_equivalence(self, params):
        drive = cs.DriveSettings.from_atom_cavity_detuning(
            delta=0.0, delta_pc=-params.g0, eta=TWOPI * 2e6)
        pos = np.array([0.0, 0.0, params.lambda_probe / 8])
        parts = diffusion(pos, drive, params)
        sysv = pack_system(params)
        drv = pack_drive(drive)
        rates = {}
        for gauss in (False, True):
            opts = pack_options(ForceOptions(),
                                KickOptions(enable_dp=False, gaussian_sp=gauss))
            out = K.eval_point(pos[0], pos[1], pos[2], 0, 0, 0, sysv, drv, opts, 1.0)
            _, _, _, pe, dsp, ddx, ddy, ddz, _ = out
            rng = cs.RngStream(23, int(gauss))
            h = 1e-7
            n = 40000
            y = np.zeros(7)
            acc = np.zeros(3)
            for _ in range(n):
                before = y[3:6].copy()
                K.apply_kicks(y, rng.state, h, pe, dsp, ddx, ddy, ddz, sysv, opts)
                acc += (y[3:6] - before) ** 2
            rates[gauss] = acc * params.mass ** 2 / (n * h)
        expect = 2 * parts.d_sp_axis
        assert np.allclose(rates[False], expect, rtol=0.1)
        assert np.allclose(rates[True], expect, rtol=0.1)

    def test_recoil_direction_wrapper(self):
        rng = cs.RngStream(5, 5)
        u = spontaneous_recoil_direction(rng)
        assert u.shape == (3,)
        assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)


class TestNoiseProcess:
    def test_zero_width_is_identity(self):
        noise = NoiseProcess(sigma_eps=0.0, dt_noise=1e-7)
        rng = cs.RngStream(1, 0)
        out = noise_advance(noise, rng, 1e-3)
        assert out.eps == 1.0
        assert out.boundary_index == 10000

    def test_resample_mean(self):
        # CLT bound: mean over 1e6 resamples within 5 sigma_eps / sqrt(n)
        sigma = 0.1
        noise = NoiseProcess(sigma_eps=sigma, dt_noise=1e-7)
        rng = cs.RngStream(42, 0)
        n = 1_000_000
        total = 0.0
        for _ in range(n):
            noise = noise_advance(noise, rng, noise.t + 1e-7)
            total += noise.eps
        assert abs(total / n - 1.0) < 5 * sigma / np.sqrt(n)

    def test_spectrum_white_to_nyquist(self):
        # averaged periodogram of the resampled sequence flat within 3 dB
        sigma = 0.2
        noise = NoiseProcess(sigma_eps=sigma, dt_noise=1e-7)
        rng = cs.RngStream(9, 9)
        n_chunks, n_len = 192, 256
        samples = np.empty(n_chunks * n_len)
        for i in range(samples.size):
            noise = noise_advance(noise, rng, noise.t + 1e-7)
            samples[i] = noise.eps
        x = (samples - samples.mean()).reshape(n_chunks, n_len)
        psd = np.mean(np.abs(np.fft.rfft(x, axis=1)) ** 2, axis=0)[1:]
        assert psd.max() / psd.min() < 2.0

    def test_kernel_and_python_resampling_agree(self, params):
        # the in-kernel resampler consumes the identical draw sequence
        sigma = 0.15
        dt = 1e-7
        t_end = 2.03e-5
        st = AtomState(pos=[0, 0, 5e-8], mom=[0, 0, 0])
        noise0 = NoiseProcess(sigma_eps=sigma, dt_noise=dt)
        _, noise_k, _, _ = simulate(st, drive_off(), params, noise0,
                                    cs.RngStream(3, 3), t_end=t_end,
                                    kicks=NO_KICKS, force_opts=NO_EXTRAS)
        noise_p = noise_advance(noise0, cs.RngStream(3, 3), t_end)
        assert noise_k.eps == noise_p.eps
        assert noise_k.boundary_index == noise_p.boundary_index

    def test_monotonic_time_required(self):
        noise = NoiseProcess(sigma_eps=0.1, dt_noise=1e-7, t=1e-3)
        with pytest.raises(ValueError):
            noise_advance(noise, cs.RngStream(1, 0), 0.5e-3)


class TestTrajectoryDeterminism:
    def test_bit_identical_repeat(self, params, probe_drive):
        def run():
            st = AtomState(pos=[1e-6, -2e-6, 4e-8],
                           mom=params.mass * np.array([0.01, 0.0, 0.0]))
            noise = NoiseProcess(sigma_eps=0.1, dt_noise=1e-7)
            out, _, diag, _ = simulate(st, probe_drive, params, noise,
                                       cs.RngStream(77, 5), t_end=2e-4)
            return out, diag

        a, da = run()
        b, db = run()
        assert np.array_equal(a.pos, b.pos)
        assert np.array_equal(a.mom, b.mom)
        assert da.n_accepted == db.n_accepted
        assert da.n_emissions == db.n_emissions

    def test_different_streams_differ(self, params, probe_drive):
        def run(sid):
            st = AtomState(pos=[1e-6, -2e-6, 4e-8], mom=np.zeros(3))
            noise = NoiseProcess(sigma_eps=0.1, dt_noise=1e-7)
            out, _, _, _ = simulate(st, probe_drive, params, noise,
                                    cs.RngStream(77, sid), t_end=1e-4)
            return out

        assert not np.array_equal(run(0).mom, run(1).mom)


class TestRecording:
    def test_dump_rows(self, params, probe_drive):
        st = AtomState(pos=[0, 0, 4e-8], mom=np.zeros(3))
        noise = NoiseProcess(sigma_eps=0.05, dt_noise=1e-7)
        rec = np.zeros((5000, 9))
        out, _, diag, n = simulate(st, probe_drive, params, noise,
                                   cs.RngStream(8, 8), t_end=2e-5, record=rec)
        assert n == min(diag.n_accepted, 5000)
        rows = rec[:n]
        assert np.all(np.diff(rows[:, 0]) > 0)          # time increases
        assert rows[-1, 0] == out.t
        assert np.array_equal(rows[-1, 4:7], out.mom)   # momentum columns
        assert np.all(rows[:, 7] > 0)                   # eps stays positive
