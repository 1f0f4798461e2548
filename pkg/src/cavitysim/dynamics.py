"""Langevin time integration: adaptive deterministic steps plus stochastic kicks.

Each accepted step of the embedded Fehlberg 4(5) pair is followed by
Euler-Maruyama-style momentum kicks whose variance reproduces the local
momentum-diffusion coefficients (2 D_j h per axis), discrete
spontaneous-emission recoils of magnitude hbar k drawn at rate 2 gamma P_e,
and resampling of the trap-intensity noise factor on its own time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import _kernels as K
from .forces import ForceOptions
from .rng import RngStream
from scipy.constants import g as G_STANDARD

__all__ = [
    "AtomState",
    "NoiseProcess",
    "StepControl",
    "KickOptions",
    "StepDiagnostics",
    "step",
    "simulate",
    "spontaneous_recoil_direction",
    "noise_advance",
    "default_noise_dt",
]


@dataclass
class AtomState:
    """Phase-space state of one atom: position (m), momentum (kg m/s), time (s)."""

    pos: np.ndarray
    mom: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.pos = np.asarray(self.pos, dtype=float).copy()
        self.mom = np.asarray(self.mom, dtype=float).copy()
        if not (np.all(np.isfinite(self.pos)) and np.all(np.isfinite(self.mom))):
            raise ValueError("state must be finite")

    def velocity(self, params):
        return self.mom / params.mass

    def kinetic_energy(self, params):
        return float(np.dot(self.mom, self.mom)) / (2.0 * params.mass)

    def copy(self):
        return AtomState(self.pos.copy(), self.mom.copy(), self.t)


@dataclass(frozen=True)
class NoiseProcess:
    """Piecewise-constant trap-intensity noise factor.

    ``eps`` is resampled on every boundary n * dt_noise crossed, from a
    Gaussian of mean 1 and width ``sigma_eps`` truncated at zero, giving a
    white power spectrum up to 1/(2 dt_noise).  ``t`` is the process clock,
    ``boundary_index`` the index of the current interval.
    """

    sigma_eps: float
    dt_noise: float
    eps: float = 1.0
    t: float = 0.0
    boundary_index: int = 0

    def __post_init__(self):
        if self.sigma_eps < 0 or self.dt_noise <= 0:
            raise ValueError("sigma_eps must be >= 0 and dt_noise > 0")


def default_noise_dt(params, trap_depth, margin=12.0):
    """Noise resampling interval so the flat band covers ``margin`` x the axial trap frequency.

    The harmonic axial frequency at the bottom of a well of depth U0 is
    omega_ax = k_t sqrt(2 U0 / m); the one-sided band edge 1/(2 dt) is placed
    at ``margin`` times nu_ax (margin >= 10 keeps parametric heating white
    across 2 nu_ax).
    """
    if trap_depth <= 0:
        return 1e-7
    omega_ax = params.k_trap * math.sqrt(2.0 * trap_depth / params.mass)
    nu_ax = omega_ax / (2.0 * math.pi)
    return 1.0 / (2.0 * margin * nu_ax)


@dataclass(frozen=True)
class StepControl:
    """Adaptive step-size control for the deterministic substeps.

    The defaults are tight enough to conserve trap energy to better than
    1e-6 per millisecond; stochastic ensemble runs usually relax them
    (the kicks dominate the error budget there).
    """

    rtol: float = 3e-11
    atol_pos: float = 5e-17
    atol_mom: float = 5e-37
    h_min: float = 1e-13
    h_max: float = 2e-7
    h_init: float = 1e-9
    safety: float = 0.9
    max_retries: int = 60


@dataclass(frozen=True)
class KickOptions:
    """Which stochastic channels act, and in which variant.

    ``axial_only_dp`` reproduces the historical scheme of applying the whole
    dipole-fluctuation diffusion as a random-sign axial kick; the default
    spreads it per axis.  ``gaussian_sp`` replaces discrete photon recoils by
    Gaussian kicks of identical second moments.
    """

    enable_sp: bool = True
    enable_dp: bool = True
    axial_only_dp: bool = False
    gaussian_sp: bool = False


@dataclass
class StepDiagnostics:
    n_accepted: int
    n_rejected: int
    n_emissions: int
    max_p_excited: float
    time_integrated_transmission: float
    time_integrated_d_sp: float
    time_integrated_d_dp: float
    elapsed: float
    h_next: float
    status: int


# --- packing helpers shared with the protocol layer

def pack_system(params):
    out = np.empty(K.SYS_LEN)
    out[K.G0] = params.g0
    out[K.KAPPA] = params.kappa
    out[K.GAMMA] = params.gamma
    out[K.KP] = params.k_probe
    out[K.KT] = params.k_trap
    out[K.WP] = params.waist_probe
    out[K.WT] = params.waist_trap
    out[K.MASS] = params.mass
    out[K.HBARK] = params.hbar_k
    return out


def pack_drive(drive):
    out = np.empty(K.DRV_LEN)
    out[K.DPC] = drive.delta_pc
    out[K.DPA0] = drive.delta_pa0
    out[K.ETA] = drive.eta_eff
    out[K.U0] = drive.trap_depth_eff
    out[K.S0] = drive.stark_coeff_eff
    return out


def pack_options(force_opts=ForceOptions(), kicks=KickOptions(), friction=True):
    out = np.zeros(K.OPT_LEN)
    out[K.GRAV] = G_STANDARD if force_opts.gravity else 0.0
    out[K.STARK] = 1.0 if force_opts.stark_force else 0.0
    out[K.FRICTION] = 1.0 if friction else 0.0
    out[K.EN_SP] = 1.0 if kicks.enable_sp else 0.0
    out[K.EN_DP] = 1.0 if kicks.enable_dp else 0.0
    out[K.AXIAL_DP] = 1.0 if kicks.axial_only_dp else 0.0
    out[K.GAUSS_SP] = 1.0 if kicks.gaussian_sp else 0.0
    return out


def pack_control(ctrl, params):
    out = np.empty(K.CTRL_LEN)
    out[K.RTOL] = ctrl.rtol
    out[K.ATOL_POS] = ctrl.atol_pos
    out[K.ATOL_VEL] = ctrl.atol_mom / params.mass
    out[K.HMIN] = ctrl.h_min
    out[K.HMAX] = ctrl.h_max
    out[K.SAFETY] = ctrl.safety
    out[K.MAXRETRY] = float(ctrl.max_retries)
    return out


_NO_REC = np.zeros((0, 9))


def _state_vector(state, params):
    y = np.empty(7)
    y[0:3] = state.pos
    y[3:6] = state.mom / params.mass
    y[6] = state.t
    return y


def _state_from_vector(y, params):
    return AtomState(pos=y[0:3].copy(), mom=y[3:6] * params.mass, t=float(y[6]))


def _noise_arrays(noise):
    return np.array([noise.eps, float(noise.boundary_index)])


def _run_segment(state, drive, params, noise, rng, ctrl, t_end, *,
                 kicks=KickOptions(), force_opts=ForceOptions(), friction=True,
                 trap_power=1.0, max_steps=0, h_init=None, record=None,
                 trigger_threshold=None, loss_bounds=None):
    """Shared driver around the compiled segment kernel.

    ``trigger_threshold`` (transmission fraction) arms the capture trigger;
    ``loss_bounds`` = (radius, zmax) arms the loss detector.
    """
    y = _state_vector(state, params)
    h_io = np.array([ctrl.h_init if h_init is None else h_init])
    noise_arr = _noise_arrays(noise)
    acc = np.zeros(K.ACC_LEN)
    rec = _NO_REC if record is None else record
    rec_count = np.zeros(1, dtype=np.int64)
    trig = 0 if trigger_threshold is None else 1
    loss = 0 if loss_bounds is None else 1
    loss_r, loss_z = loss_bounds if loss_bounds is not None else (0.0, 0.0)
    status = K.integrate_segment(
        y, h_io, noise_arr, rng.state, float(t_end),
        pack_system(params), pack_drive(drive),
        pack_options(force_opts, kicks, friction), pack_control(ctrl, params),
        float(trap_power), noise.sigma_eps, noise.dt_noise,
        trig, float(trigger_threshold or 0.0), loss, float(loss_r), float(loss_z),
        int(max_steps), acc, rec, rec_count)
    new_state = _state_from_vector(y, params)
    new_noise = replace(noise, eps=float(noise_arr[0]),
                        boundary_index=int(noise_arr[1]), t=new_state.t)
    diag = StepDiagnostics(
        n_accepted=int(acc[K.A_NACC]), n_rejected=int(acc[K.A_NREJ]),
        n_emissions=int(acc[K.A_NEMIT]), max_p_excited=float(acc[K.A_MAXPE]),
        time_integrated_transmission=float(acc[K.A_TRANS]),
        time_integrated_d_sp=float(acc[K.A_DSP]),
        time_integrated_d_dp=float(acc[K.A_DDP]),
        elapsed=new_state.t - state.t, h_next=float(h_io[0]), status=int(status))
    return new_state, new_noise, diag, int(rec_count[0])


def step(state, drive, params, noise, rng, ctrl=StepControl(), *,
         kicks=KickOptions(), force_opts=ForceOptions(), friction=True,
         trap_power=1.0, h_init=None):
    """One accepted adaptive step with its stochastic updates.

    Returns ``(new_state, new_noise, diagnostics)``.  Raises ``RuntimeError``
    if the rejection loop exceeds the retry budget.
    """
    new_state, new_noise, diag, _ = _run_segment(
        state, drive, params, noise, rng, ctrl, t_end=state.t + 10.0 * ctrl.h_max,
        kicks=kicks, force_opts=force_opts, friction=friction,
        trap_power=trap_power, max_steps=1, h_init=h_init)
    if diag.status == K.STATUS_STEP_FAIL:
        raise RuntimeError(f"step rejection loop exceeded max retries at {new_state}")
    return new_state, new_noise, diag


def simulate(state, drive, params, noise, rng, t_end, ctrl=StepControl(), *,
             kicks=KickOptions(), force_opts=ForceOptions(), friction=True,
             trap_power=1.0, record=None):
    """Integrate to ``t_end`` under a fixed drive; see ``step`` for the pieces.

    ``record`` may be a preallocated (n, 9) array receiving rows
    (t, x, y, z, px, py, pz, eps, n_emissions) per accepted step.
    """
    new_state, new_noise, diag, n_rec = _run_segment(
        state, drive, params, noise, rng, ctrl, t_end=t_end, kicks=kicks,
        force_opts=force_opts, friction=friction, trap_power=trap_power,
        record=record)
    if diag.status == K.STATUS_STEP_FAIL:
        raise RuntimeError(f"step rejection loop exceeded max retries at {new_state}")
    return new_state, new_noise, diag, n_rec


def spontaneous_recoil_direction(rng):
    """Random emission direction; squared projections average (0.3, 0.3, 0.4) on (x, y, z)."""
    return rng.recoil_direction()


def noise_advance(noise, rng, t_target):
    """Advance the noise process clock, resampling on every boundary crossed.

    Mirrors the in-kernel behaviour: the boundary at n * dt_noise applies to
    times >= n * dt_noise, and each crossed boundary consumes one truncated
    Gaussian draw (none when sigma_eps is zero).
    """
    if t_target < noise.t:
        raise ValueError("t_target must be >= current noise time")
    eps = noise.eps
    n = noise.boundary_index
    while (n + 1) * noise.dt_noise <= t_target:
        n += 1
        if noise.sigma_eps > 0.0:
            eps = rng.trunc_gauss(1.0, noise.sigma_eps)
    return replace(noise, eps=eps, t=t_target, boundary_index=n)
