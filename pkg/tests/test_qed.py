"""Mode geometry, dressed states, and steady-state spectra."""

import numpy as np
import pytest

import cavitysim as cs
from cavitysim.qed import DriveSettings, SystemParams

TWOPI = 2.0 * np.pi


def find_peaks(x, y):
    """Local maxima refined by parabolic interpolation; (position, height) pairs."""
    out = []
    for i in range(1, len(y) - 1):
        if y[i] > y[i - 1] and y[i] > y[i + 1]:
            d1 = 0.5 * (y[i + 1] - y[i - 1])
            d2 = y[i + 1] - 2.0 * y[i] + y[i - 1]
            off = -d1 / d2
            out.append((x[i] + off * (x[1] - x[0]), y[i] - 0.25 * d1 * d1 / d2))
    return out


class TestSystemParams:
    def test_positivity_enforced(self):
        with pytest.raises(ValueError):
            SystemParams(g0=-1.0, kappa=1.0, gamma=1.0, lambda_probe=780e-9,
                         lambda_trap=785e-9, waist_probe=29e-6, waist_trap=29e-6,
                         cavity_length=122e-6, mass=1e-25)

    def test_wavelength_ordering_enforced(self, params):
        with pytest.raises(ValueError):
            SystemParams(g0=params.g0, kappa=params.kappa, gamma=params.gamma,
                         lambda_probe=785e-9, lambda_trap=780e-9,
                         waist_probe=29e-6, waist_trap=29e-6,
                         cavity_length=122e-6, mass=params.mass)

    def test_weak_coupling_warns_not_raises(self, params):
        with pytest.warns(UserWarning, match="strong-coupling"):
            SystemParams(g0=0.5 * params.kappa, kappa=params.kappa,
                         gamma=params.gamma, lambda_probe=780.2e-9,
                         lambda_trap=785e-9, waist_probe=29e-6,
                         waist_trap=29e-6, cavity_length=122e-6,
                         mass=params.mass)

    def test_trap_mode_two_fewer_nodes(self, params):
        # count interior sign changes of each standing wave over the cavity
        z = np.linspace(-params.cavity_length / 2, params.cavity_length / 2,
                        2_000_001)
        probe_nodes = np.sum(np.diff(np.sign(np.cos(params.k_probe * z))) != 0)
        trap_nodes = np.sum(np.diff(np.sign(np.cos(params.k_trap * z))) != 0)
        assert probe_nodes - trap_nodes == 2

    def test_trap_wavelength_near_nominal(self, params):
        assert params.lambda_trap_effective == pytest.approx(785e-9, rel=1e-3)

    def test_kappa_from_finesse_matches_config(self, params):
        # finesse 4.4e5 and length 122 um give kappa ~ 2*pi*1.4 MHz
        derived = cs.kappa_from_finesse(122e-6, 4.4e5)
        assert derived == pytest.approx(params.kappa, rel=0.005)

    def test_hbar_k(self, params):
        assert params.hbar_k == pytest.approx(
            1.054571817e-34 * TWOPI / params.lambda_probe, rel=1e-9)


class TestDriveSettings:
    def test_detuning_identity(self):
        d = DriveSettings.from_atom_cavity_detuning(
            delta=TWOPI * 5e6, delta_pc=-TWOPI * 2e6, eta=1.0)
        assert d.atom_cavity_detuning == pytest.approx(TWOPI * 5e6)
        assert d.delta_pa0 == pytest.approx(d.delta_pc + TWOPI * 5e6)

    def test_probe_detuning_shift_preserves_delta(self):
        d = DriveSettings.from_atom_cavity_detuning(
            delta=TWOPI * 5e6, delta_pc=0.0, eta=1.0)
        d2 = d.with_probe_detuning(TWOPI * 3e6)
        assert d2.atom_cavity_detuning == pytest.approx(d.atom_cavity_detuning)

    def test_power_scale(self):
        d = DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=2.0, trap_depth=1e-26,
                          stark_coeff=1e6, power_scale=0.7)
        assert d.eta_eff == pytest.approx(2.0 * np.sqrt(0.7))
        assert d.trap_depth_eff == pytest.approx(0.7e-26)
        assert d.stark_coeff_eff == pytest.approx(0.7e6)

    def test_validation(self):
        with pytest.raises(ValueError):
            DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=-1.0)
        with pytest.raises(ValueError):
            DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=0.0, trap_depth=-1.0)


class TestModeGeometry:
    def test_coupling_antinode(self, params):
        assert cs.coupling_at([0, 0, 0], params) == pytest.approx(params.g0)

    def test_coupling_node(self, params):
        z = params.lambda_probe / 4
        assert abs(cs.coupling_at([0, 0, z], params)) < 1e-9 * params.g0

    def test_coupling_waist(self, params):
        g = cs.coupling_at([params.waist_probe, 0, 0], params)
        assert g == pytest.approx(params.g0 / np.e)

    def test_trap_center_antinode(self, params):
        assert cs.trap_intensity_at([0, 0, 0], params) == pytest.approx(1.0)

    def test_trap_node(self, params):
        z = params.lambda_trap_effective / 4
        assert cs.trap_intensity_at([0, 0, z], params) == pytest.approx(0.0, abs=1e-12)

    def test_antinode_walkoff_away_from_centre(self, params):
        # at L/4 the probe and trap standing waves have drifted apart
        z = params.cavity_length / 4
        probe = np.cos(params.k_probe * z) ** 2
        trap = np.cos(params.k_trap * z) ** 2
        assert abs(probe - trap) > 0.1

    def test_gradients_match_finite_differences(self, params):
        rng = np.random.default_rng(11)
        h = 1e-10
        for _ in range(10):
            pos = np.array([rng.uniform(-30e-6, 30e-6),
                            rng.uniform(-30e-6, 30e-6),
                            rng.uniform(-4e-7, 4e-7)])
            for fn, grad in ((cs.coupling_at, cs.coupling_gradient),
                             (cs.trap_intensity_at, cs.trap_intensity_gradient)):
                g = grad(pos, params)
                for j in range(3):
                    e = np.zeros(3)
                    e[j] = h
                    fd = (fn(pos + e, params) - fn(pos - e, params)) / (2 * h)
                    assert g[j] == pytest.approx(fd, rel=1e-5, abs=1e-6 * abs(fd) + 1e-3)


class TestEffectiveDetuning:
    def test_zero_stark(self, params, probe_drive):
        from dataclasses import replace
        d = replace(probe_drive, stark_coeff=0.0)
        assert cs.effective_atom_detuning([1e-6, 0, 1e-7], d, params) == \
            pytest.approx(d.delta_pa0)

    def test_at_trap_node(self, params, probe_drive):
        z = params.lambda_trap_effective / 4
        assert cs.effective_atom_detuning([0, 0, z], probe_drive, params) == \
            pytest.approx(probe_drive.delta_pa0)

    def test_peak_shift(self, params, probe_drive):
        got = cs.effective_atom_detuning([0, 0, 0], probe_drive, params, eps=1.0)
        assert got == pytest.approx(probe_drive.delta_pa0 - probe_drive.stark_coeff)

    def test_eps_validation(self, params, probe_drive):
        with pytest.raises(ValueError):
            cs.effective_atom_detuning([0, 0, 0], probe_drive, params, eps=-0.1)


class TestDressedStates:
    def test_mixing_angle_resonant(self, params):
        dp = cs.dressed_states(0.0, params)
        assert dp.mixing_angle == pytest.approx(np.pi / 4)
        # splitting 2 g at Delta = 0 up to the (gamma-kappa)^2/4 loss correction
        lossless = cs.dressed_states(0.0, params)
        assert lossless.splitting == pytest.approx(
            2.0 * np.sqrt(params.g0 ** 2 - (params.gamma - params.kappa) ** 2 / 4),
            rel=1e-12)

    def test_lossless_splitting_exactly_2g(self, params):
        from dataclasses import replace
        lossless = replace(params, kappa=1e-9, gamma=1e-9)
        dp = cs.dressed_states(0.0, lossless)
        assert dp.splitting == pytest.approx(2.0 * params.g0, rel=1e-9)
        assert abs(dp.e_plus.imag) < 1e-8

    def test_far_detuned_linewidths(self, params):
        # Delta -> +inf: theta -> pi/2; dressed widths approach 2 kappa and 2 gamma
        dp = cs.dressed_states(1e4 * params.g0, params)
        assert dp.mixing_angle > np.pi / 2 - 1e-3
        widths = sorted([dp.linewidth_plus, dp.linewidth_minus])
        assert widths[0] == pytest.approx(2 * params.kappa, rel=1e-4)
        assert widths[1] == pytest.approx(2 * params.gamma, rel=1e-4)

    def test_equal_loss_linewidths_at_resonance(self, params):
        # DERIVED: eigenvalues of [[-1j k, g], [g, -1j k]] are -1j k +- g, so
        # both full widths equal kappa + gamma when kappa = gamma
        from dataclasses import replace
        eq = replace(params, gamma=params.kappa)
        dp = cs.dressed_states(0.0, eq)
        both = 2 * eq.kappa
        assert dp.linewidth_plus == pytest.approx(both, rel=1e-12)
        assert dp.linewidth_minus == pytest.approx(both, rel=1e-12)

    def test_mixing_angle_limits(self, params):
        assert cs.dressed_states(-1e6 * params.g0, params).mixing_angle < 1e-5
        assert np.pi / 2 - cs.dressed_states(1e6 * params.g0, params).mixing_angle < 1e-5

    def test_avoided_crossing(self, params):
        deltas = np.linspace(-3 * params.g0, 3 * params.g0, 1201)
        gaps = np.array([cs.dressed_states(d, params).splitting for d in deltas])
        i = np.argmin(gaps)
        assert abs(deltas[i]) < deltas[1] - deltas[0]
        assert gaps[i] == pytest.approx(cs.dressed_states(0.0, params).splitting,
                                        rel=1e-6)

    def test_ordering(self, params):
        for d in (-2 * params.g0, -params.g0, 0.0, params.g0, 2 * params.g0):
            dp = cs.dressed_states(d, params)
            assert dp.e_plus.real >= dp.e_minus.real


class TestSteadyState:
    def test_empty_resonant_cavity(self, params):
        # g = 0 via a node position, probe on the cavity line
        d = DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=TWOPI * 1e6)
        pos = [0, 0, params.lambda_probe / 4]
        ss = cs.steady_state(pos, d, params)
        assert ss.photon_number == pytest.approx((d.eta / params.kappa) ** 2, rel=1e-12)
        assert ss.transmission_norm == pytest.approx(1.0, rel=1e-12)

    def test_empty_cavity_lorentzian(self, params):
        # analytic equality with the Lorentzian for g = 0, machine precision
        pos = [0, 0, params.lambda_probe / 4]
        for dpc in np.linspace(-5 * params.kappa, 5 * params.kappa, 11):
            d = DriveSettings(delta_pc=dpc, delta_pa0=dpc, eta=1e5)
            ss = cs.steady_state(pos, d, params)
            lor = params.kappa ** 2 / (params.kappa ** 2 + dpc ** 2)
            assert ss.transmission_norm == pytest.approx(lor, rel=1e-12)

    def test_on_resonance_suppression(self, params):
        # DERIVED from the closed form: n = eta^2 gamma^2 / (kappa gamma + g0^2)^2
        d = DriveSettings.from_atom_cavity_detuning(delta=0.0, delta_pc=0.0,
                                                    eta=TWOPI * 1e6)
        ss = cs.steady_state([0, 0, 0], d, params)
        expect = d.eta ** 2 * params.gamma ** 2 / \
            (params.kappa * params.gamma + params.g0 ** 2) ** 2
        assert ss.photon_number == pytest.approx(expect, rel=1e-12)
        assert ss.transmission_norm < 1e-3

    def test_type_invariants(self, params, probe_drive):
        ss = cs.steady_state([2e-6, 1e-6, 5e-8], probe_drive, params)
        assert ss.photon_number == pytest.approx(abs(ss.a_mean) ** 2, rel=1e-15)
        assert ss.p_excited == pytest.approx(abs(ss.sigma_mean) ** 2, rel=1e-15)
        assert ss.low_saturation

    def test_saturation_flag(self, params):
        d = DriveSettings.from_atom_cavity_detuning(
            delta=0.0, delta_pc=-params.g0, eta=TWOPI * 40e6)
        ss = cs.steady_state([0, 0, 0], d, params)
        assert ss.p_excited > 0.1
        assert not ss.low_saturation

    def test_excitation_bound(self, params):
        # |<sigma>|^2 <= eta^2/(4 kappa gamma) for all detunings and couplings;
        # saturated on the normal modes, exact at g^2 = kappa*gamma on resonance
        rng = np.random.default_rng(3)
        eta = TWOPI * 1e6
        bound = eta ** 2 / (4 * params.kappa * params.gamma)
        for _ in range(300):
            dpc = rng.uniform(-40, 40) * 1e6 * TWOPI
            dpa = rng.uniform(-40, 40) * 1e6 * TWOPI
            g = rng.uniform(0, 1.2) * params.g0
            from cavitysim.qed import _amplitudes
            _, sig, _ = _amplitudes(g, dpc, dpa, eta, params)
            assert abs(sig) ** 2 <= bound * (1 + 1e-12)
        # the bare-resonance point of the bound formula
        _, sig, _ = _amplitudes(params.g0, 0.0, 0.0, eta, params)
        expect = params.g0 ** 2 * eta ** 2 / \
            (params.kappa * params.gamma + params.g0 ** 2) ** 2
        assert abs(sig) ** 2 == pytest.approx(expect, rel=1e-12)


class TestMaps:
    def test_resonant_row_symmetry_for_equal_widths(self, params):
        from dataclasses import replace
        eq = replace(params, gamma=params.kappa)
        d = DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=1e5)
        probes = np.linspace(-2 * params.g0, 2 * params.g0, 401)
        row = cs.transmission_map([0.0], probes, d, eq)[0]
        assert np.allclose(row, row[::-1], rtol=1e-10)

    def test_map_matches_pointwise_steady_state(self, params):
        d = DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=1e5)
        deltas = np.linspace(-params.g0, params.g0, 5)
        probes = np.linspace(-2 * params.g0, 2 * params.g0, 7)
        tmap = cs.transmission_map(deltas, probes, d, params)
        emap = cs.excitation_map(deltas, probes, d, params)
        from cavitysim.qed import _amplitudes
        for i, dl in enumerate(deltas):
            for j, pr in enumerate(probes):
                # single-element grids reproduce the full map bit-exactly
                assert tmap[i, j] == cs.transmission_map([dl], [pr], d, params)[0, 0]
                assert emap[i, j] == cs.excitation_map([dl], [pr], d, params)[0, 0]
                # and the scalar closed form agrees to rounding
                _, sig, trans = _amplitudes(params.g0, pr, pr + dl, d.eta, params)
                assert tmap[i, j] == pytest.approx(trans, rel=1e-13)
                assert emap[i, j] == pytest.approx(abs(sig) ** 2, rel=1e-13)

    def test_splitting_within_2pct_across_strong_coupling(self, params):
        # splitting from a Delta = 0 transmission row equals 2 g0 within 2%
        # for g0/kappa >= 10 and g0/gamma >= 5
        from dataclasses import replace
        rng = np.random.default_rng(5)
        d = DriveSettings(delta_pc=0.0, delta_pa0=0.0, eta=1e5)
        for _ in range(10):
            g0 = TWOPI * rng.uniform(8e6, 40e6)
            kappa = g0 / rng.uniform(10, 40)
            gamma = g0 / rng.uniform(5, 20)
            p = replace(params, g0=g0, kappa=kappa, gamma=gamma)
            probes = np.linspace(-1.6 * g0, 1.6 * g0, 4001)
            row = cs.transmission_map([0.0], probes, d, p)[0]
            peaks = find_peaks(probes, row)
            assert len(peaks) == 2
            split = peaks[1][0] - peaks[0][0]
            assert split == pytest.approx(2 * g0, rel=0.02)
