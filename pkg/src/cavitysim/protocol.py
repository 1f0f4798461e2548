"""The trapping/probing experiment as a state machine.

A run proceeds through: transverse injection with the trap at low power and a
resonant monitoring probe; a transmission-drop trigger that switches the trap
to high power; then alternating cooling (0.5 ms) and probing (0.1 ms) windows
until the atom leaves the loss bounds or the time budget ends.  Probe windows
are qualified by the transmission seen in the neighbouring cooling windows.
Storage statistics use the censored-exponential maximum-likelihood estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels as K
from .dynamics import (
    AtomState,
    KickOptions,
    NoiseProcess,
    StepControl,
    _run_segment,
)
from .forces import ForceOptions
from .qed import DriveSettings
from .rng import RngStream

__all__ = [
    "ProtocolConfig",
    "RunRecord",
    "EnsembleStats",
    "ExcessLoss",
    "run_trajectory",
    "storage_statistics",
    "excess_loss_rate",
    "calibrate_noise",
]


@dataclass(frozen=True)
class ProtocolConfig:
    """Full description of one experimental run.

    Trap power factors multiply the ``trap_depth``/``stark_coeff`` of every
    drive; ``trap_power_low`` applies before the trigger, ``trap_power_high``
    after.  ``monitor_drive`` is used during injection (probe resonant with
    the empty cavity).  A probe window is qualified when the mean normalised
    transmission of the neighbouring cooling windows is at least
    ``qualify_threshold``.
    """

    probe_drive: DriveSettings
    cool_drive: DriveSettings
    monitor_drive: DriveSettings
    inject_speed: float
    inject_x0: float
    trigger_threshold: float
    trap_power_low: float
    trap_power_high: float
    loss_radius: float
    loss_zmax: float
    max_sim_time: float
    probe_window: float = 1.0e-4
    cool_window: float = 5.0e-4
    qualify_threshold: float = 0.0
    inject_z_spread: float = 0.0
    inject_y_spread: float = 0.0
    sigma_eps: float = 0.0
    dt_noise: float = 1e-7
    step_control: StepControl = field(default_factory=StepControl)

    def __post_init__(self):
        problems = []
        if not (self.probe_window > 0 and self.cool_window > 0):
            problems.append("windows must be > 0")
        if not (0.0 < self.trigger_threshold < 1.0):
            problems.append("trigger_threshold must be in (0, 1)")
        if not (self.trap_power_high > self.trap_power_low >= 0):
            problems.append("trap_power_high must exceed trap_power_low >= 0")
        if not (0.0 < self.inject_speed <= 0.1):
            problems.append("inject_speed must be in (0, 0.1] m/s")
        if self.inject_x0 >= 0:
            problems.append("inject_x0 must be below the axis (negative)")
        if self.loss_radius <= 0 or self.loss_zmax <= 0:
            problems.append("loss bounds must be positive")
        if self.max_sim_time <= 0:
            problems.append("max_sim_time must be positive")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def inject_deadline(self):
        """Time budget for the injection phase: three traversals of |inject_x0|."""
        return 6.0 * abs(self.inject_x0) / self.inject_speed


@dataclass
class RunRecord:
    """Outcome of one trajectory."""

    stream_id: int
    captured: bool
    storage_time: float
    escape_axis: str  # "axial" | "radial" | "none"
    qualified_windows: int
    window_transmission: np.ndarray
    window_duration: np.ndarray
    window_qualified: np.ndarray
    ledger_sp: float
    ledger_dp: float
    trigger_time: float
    end_time: float
    max_p_excited: float
    n_emissions: int

    @property
    def censored(self):
        return self.captured and self.escape_axis == "none"


def _draw_initial_state(config, rng):
    """Initial phase-space point; draws (z0, y0) uniformly in the spreads."""
    z0 = (2.0 * rng.uniform() - 1.0) * config.inject_z_spread \
        if config.inject_z_spread > 0 else 0.0
    y0 = (2.0 * rng.uniform() - 1.0) * config.inject_y_spread \
        if config.inject_y_spread > 0 else 0.0
    return np.array([config.inject_x0, y0, z0]), np.array([config.inject_speed, 0.0, 0.0])


def run_trajectory(config, params, rng, *, kicks=KickOptions(),
                   force_opts=ForceOptions(), record=None):
    """Run the full protocol for one atom; returns a :class:`RunRecord`.

    Never-captured atoms come back with ``captured=False`` and zero storage
    time; they are excluded from storage statistics.  The diffusion ledger
    integrates the applied d_sp and d_dp over the measurement windows.
    """
    pos0, vel0 = _draw_initial_state(config, rng)
    state = AtomState(pos=pos0, mom=vel0 * params.mass, t=0.0)
    noise = NoiseProcess(sigma_eps=config.sigma_eps, dt_noise=config.dt_noise)
    ctrl = config.step_control
    # the diffusion ledger attributes heating to the measurement windows,
    # where the force-decomposition question lives; cooling-interval and
    # injection heating are deliberately excluded
    rec_used = 0

    def rec_view():
        return None if record is None else record[rec_used:]

    # phase 1: injection under the monitoring probe, trap at low power
    state, noise, diag, n_rec = _run_segment(
        state, config.monitor_drive, params, noise, rng, ctrl,
        t_end=config.inject_deadline, kicks=kicks, force_opts=force_opts,
        trap_power=config.trap_power_low, record=rec_view(),
        trigger_threshold=config.trigger_threshold)
    rec_used += n_rec
    max_pe = diag.max_p_excited
    n_emissions = diag.n_emissions
    if diag.status != K.STATUS_TRIGGERED:
        return RunRecord(
            stream_id=rng.stream_id, captured=False, storage_time=0.0,
            escape_axis="none", qualified_windows=0,
            window_transmission=np.empty(0), window_duration=np.empty(0),
            window_qualified=np.empty(0, bool),
            ledger_sp=0.0, ledger_dp=0.0, trigger_time=-1.0, end_time=state.t,
            max_p_excited=max_pe, n_emissions=n_emissions)

    # phase 2: trap switched high, interleaved cooling/probing windows
    trigger_time = state.t
    t_stop = trigger_time + config.max_sim_time
    bounds = (config.loss_radius, config.loss_zmax)
    ledger_sp = 0.0
    ledger_dp = 0.0
    cool_means = []
    probe_means = []
    probe_durations = []
    probe_follow_cool = []  # index of the cooling window after each probe window
    h_next = diag.h_next
    lost_status = None
    is_probe = False  # cooling first: relocalize before the first measurement
    while state.t < t_stop:
        drive = config.probe_drive if is_probe else config.cool_drive
        length = config.probe_window if is_probe else config.cool_window
        t_end = min(state.t + length, t_stop)
        t_begin = state.t
        state, noise, diag, n_rec = _run_segment(
            state, drive, params, noise, rng, ctrl, t_end=t_end, kicks=kicks,
            force_opts=force_opts, trap_power=config.trap_power_high,
            h_init=h_next, record=rec_view(), loss_bounds=bounds)
        rec_used += n_rec
        h_next = diag.h_next
        if is_probe:
            ledger_sp += diag.time_integrated_d_sp
            ledger_dp += diag.time_integrated_d_dp
        n_emissions += diag.n_emissions
        max_pe = max(max_pe, diag.max_p_excited)
        duration = state.t - t_begin
        mean_trans = diag.time_integrated_transmission / duration if duration > 0 else 0.0
        if is_probe:
            probe_means.append(mean_trans)
            probe_durations.append(duration)
            probe_follow_cool.append(len(cool_means))  # filled by the next cool window
        else:
            cool_means.append(mean_trans)
        if diag.status == K.STATUS_STEP_FAIL:
            raise RuntimeError(f"integration failure at {state}")
        if diag.status in (K.STATUS_LOST_RADIAL, K.STATUS_LOST_AXIAL):
            lost_status = diag.status
            break
        is_probe = not is_probe

    if lost_status is None:
        storage_time = config.max_sim_time
        escape = "none"
    else:
        storage_time = state.t - trigger_time
        escape = "radial" if lost_status == K.STATUS_LOST_RADIAL else "axial"

    # qualification: neighbouring cooling windows must show the atom coupled
    qualified = np.zeros(len(probe_means), dtype=bool)
    for i in range(len(probe_means)):
        before = cool_means[probe_follow_cool[i] - 1] if probe_follow_cool[i] >= 1 else None
        after = cool_means[probe_follow_cool[i]] if probe_follow_cool[i] < len(cool_means) else None
        neighbours = [v for v in (before, after) if v is not None]
        qualified[i] = bool(neighbours) and all(
            v >= config.qualify_threshold for v in neighbours)

    return RunRecord(
        stream_id=rng.stream_id, captured=True, storage_time=storage_time,
        escape_axis=escape, qualified_windows=int(np.sum(qualified)),
        window_transmission=np.array(probe_means),
        window_duration=np.array(probe_durations),
        window_qualified=qualified, ledger_sp=ledger_sp, ledger_dp=ledger_dp,
        trigger_time=trigger_time, end_time=state.t, max_p_excited=max_pe,
        n_emissions=n_emissions)


@dataclass
class EnsembleStats:
    """Aggregated storage statistics over captured atoms."""

    n_records: int
    n_captured: int
    n_lost: int
    n_censored: int
    mean_storage_time: float
    loss_rate: float
    rate_stderr: float
    rate_is_upper_bound: bool
    axial_fraction: float
    radial_fraction: float
    ledger_share_dp: float
    capture_fraction: float


def storage_statistics(records):
    """Censored-exponential MLE over an ensemble of :class:`RunRecord`.

    The rate estimate is (number of losses) / (total observed trapped time);
    runs that survived to the time budget enter the denominator only.  For
    all-censored ensembles the rate 1/(total time) is returned flagged as an
    upper bound.
    """
    captured = [r for r in records if r.captured]
    if not captured:
        raise ValueError("storage statistics need at least one captured record")
    times = np.array([r.storage_time for r in captured])
    events = np.array([not r.censored for r in captured])
    total_time = float(np.sum(times))
    d = int(np.sum(events))
    if d > 0:
        rate = d / total_time
        stderr = rate / math.sqrt(d)
        upper = False
    else:
        rate = 1.0 / total_time
        stderr = rate
        upper = True
    lost = [r for r in captured if not r.censored]
    n_ax = sum(1 for r in lost if r.escape_axis == "axial")
    n_rad = sum(1 for r in lost if r.escape_axis == "radial")
    ledger_total = sum(r.ledger_sp + r.ledger_dp for r in captured)
    share_dp = (sum(r.ledger_dp for r in captured) / ledger_total
                if ledger_total > 0 else 0.0)
    return EnsembleStats(
        n_records=len(records), n_captured=len(captured), n_lost=len(lost),
        n_censored=len(captured) - len(lost),
        mean_storage_time=1.0 / rate, loss_rate=rate, rate_stderr=stderr,
        rate_is_upper_bound=upper,
        axial_fraction=n_ax / len(lost) if lost else 0.0,
        radial_fraction=n_rad / len(lost) if lost else 0.0,
        ledger_share_dp=share_dp,
        capture_fraction=len(captured) / len(records))


@dataclass
class ExcessLoss:
    """Probe-induced surplus loss rate; negative values are reported, flagged."""

    rate: float
    stderr: float
    negative: bool


def excess_loss_rate(probe_stats, dark_stats):
    """Excess loss = loss rate with probing minus the dark-trap loss rate."""
    rate = probe_stats.loss_rate - dark_stats.loss_rate
    stderr = math.hypot(probe_stats.rate_stderr, dark_stats.rate_stderr)
    return ExcessLoss(rate=rate, stderr=stderr, negative=rate < 0.0)


def dark_protocol(config):
    """Same protocol with all probing turned off after capture (dark trap)."""
    return replace(
        config,
        probe_drive=replace(config.probe_drive, eta=0.0),
        cool_drive=replace(config.cool_drive, eta=0.0))


def calibrate_noise(target_dark_storage_time, config, params, seed, *,
                    n_atoms=100, sigma_lo=0.002, sigma_hi=0.6, rel_tol=0.15,
                    max_iter=12, kicks=KickOptions(), force_opts=ForceOptions()):
    """Bisect the trap-noise width until the dark storage time matches the target.

    The dark storage time decreases monotonically with ``sigma_eps``.  Raises
    ``RuntimeError`` when [sigma_lo, sigma_hi] does not bracket the target.
    Returns ``(sigma_eps, achieved_storage_time)``.
    """
    if target_dark_storage_time <= 0:
        raise ValueError("target dark storage time must be positive")
    dark = dark_protocol(config)

    def mean_dark_time(sigma):
        cfg = replace(dark, sigma_eps=sigma)
        recs = [run_trajectory(cfg, params, RngStream(seed, i), kicks=kicks,
                               force_opts=force_opts) for i in range(n_atoms)]
        return storage_statistics(recs).mean_storage_time

    t_lo = mean_dark_time(sigma_lo)   # weakest noise -> longest storage
    if t_lo < target_dark_storage_time:
        raise RuntimeError(
            f"calibration failure: storage at sigma_eps={sigma_lo} is "
            f"{t_lo:.3g} s, below the target {target_dark_storage_time:.3g} s")
    t_hi = mean_dark_time(sigma_hi)
    if t_hi > target_dark_storage_time:
        raise RuntimeError(
            f"calibration failure: storage at sigma_eps={sigma_hi} is "
            f"{t_hi:.3g} s, above the target {target_dark_storage_time:.3g} s")
    lo, hi = sigma_lo, sigma_hi
    sigma = 0.5 * (lo + hi)
    achieved = math.nan
    for _ in range(max_iter):
        sigma = 0.5 * (lo + hi)
        achieved = mean_dark_time(sigma)
        if abs(achieved - target_dark_storage_time) <= rel_tol * target_dark_storage_time:
            return sigma, achieved
        if achieved > target_dark_storage_time:
            lo = sigma
        else:
            hi = sigma
    return sigma, achieved
