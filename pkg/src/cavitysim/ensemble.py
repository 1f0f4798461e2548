"""Ensemble orchestration: parameter grids, worker pools, spectrum assembly.

Work is partitioned by RNG stream id, never by worker, so results are
bit-identical for any ``jobs`` count: atom ``i`` of grid point ``p`` always
draws from stream ``p * atoms_per_point + i``.  Dark-trap ensembles (probe
off after capture) occupy the last pseudo-column of each dipole-power row.
"""

from __future__ import annotations

import math
import multiprocessing
from dataclasses import dataclass, replace

import numpy as np

from .dynamics import KickOptions
from .forces import ForceOptions
from .protocol import (
    dark_protocol,
    excess_loss_rate,
    run_trajectory,
    storage_statistics,
)
from .rng import RngStream

__all__ = ["SpectrumPoint", "run_ensemble", "loss_spectrum", "kicks_for_mode",
           "MODES"]

MODES = ("both", "sp_only", "dp_only")


def kicks_for_mode(mode, base=KickOptions()):
    """Map a force-decomposition mode onto kick switches."""
    if mode == "both":
        return replace(base, enable_sp=True, enable_dp=True)
    if mode == "sp_only":
        return replace(base, enable_sp=True, enable_dp=False)
    if mode == "dp_only":
        return replace(base, enable_sp=False, enable_dp=True)
    raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")


@dataclass
class SpectrumPoint:
    """One grid point of the excess-loss / transmission surface."""

    probe_detuning: float
    dipole_power: float
    transmission_mean: float
    transmission_stderr: float
    excess_loss_rate: float
    excess_loss_stderr: float
    probe_rate: float
    dark_rate: float
    n_atoms: int
    n_qualified_windows: int
    ledger_share_sp: float
    ledger_share_dp: float


# worker globals, installed once per process by the pool initializer
_G = {}


def _init_worker(protocol, params, seed, kicks, force_opts):
    _G["protocol"] = protocol
    _G["params"] = params
    _G["seed"] = seed
    _G["kicks"] = kicks
    _G["force_opts"] = force_opts


def _point_protocol(base, probe_detuning, dipole_power):
    """Protocol for one grid point; NaN probe detuning means a dark run."""
    probe = base.probe_drive.with_trap_power(dipole_power)
    cool = base.cool_drive.with_trap_power(dipole_power)
    monitor = base.monitor_drive.with_trap_power(dipole_power)
    cfg = replace(base, probe_drive=probe, cool_drive=cool, monitor_drive=monitor)
    if math.isnan(probe_detuning):
        return dark_protocol(cfg)
    return replace(cfg, probe_drive=cfg.probe_drive.with_probe_detuning(probe_detuning))


def _run_task(task):
    stream_id, probe_detuning, dipole_power = task
    cfg = _point_protocol(_G["protocol"], probe_detuning, dipole_power)
    rng = RngStream(_G["seed"], stream_id)
    return run_trajectory(cfg, _G["params"], rng, kicks=_G["kicks"],
                          force_opts=_G["force_opts"])


def _map_tasks(tasks, protocol, params, seed, kicks, force_opts, jobs):
    _init_worker(protocol, params, seed, kicks, force_opts)
    if jobs <= 1 or len(tasks) <= 1:
        return [_run_task(t) for t in tasks]
    # warm the compilation cache before forking
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(tasks) // (4 * jobs))
    with ctx.Pool(jobs, initializer=_init_worker,
                  initargs=(protocol, params, seed, kicks, force_opts)) as pool:
        return pool.map(_run_task, tasks, chunksize=chunk)


def run_ensemble(protocol, params, n_atoms, seed, *, base_stream=0, jobs=1,
                 kicks=KickOptions(), force_opts=ForceOptions()):
    """``n_atoms`` independent trajectories on streams base_stream + i."""
    _init_worker(protocol, params, seed, kicks, force_opts)
    ids = list(range(base_stream, base_stream + n_atoms))
    if jobs <= 1 or n_atoms <= 1:
        return [_run_stream_task(i) for i in ids]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(jobs, initializer=_init_worker,
                  initargs=(protocol, params, seed, kicks, force_opts)) as pool:
        return pool.map(_run_stream_task, ids,
                        chunksize=max(1, n_atoms // (4 * jobs)))


def _run_stream_task(stream_id):
    rng = RngStream(_G["seed"], stream_id)
    return run_trajectory(_G["protocol"], _G["params"], rng, kicks=_G["kicks"],
                          force_opts=_G["force_opts"])


def _qualified_transmission(records):
    """Duration-weighted mean transmission over qualified probe windows.

    Partial windows (interrupted by loss or the time budget) enter with their
    actual duration as weight.
    """
    values = []
    weights = []
    for r in records:
        if not r.captured:
            continue
        for mean, dur, ok in zip(r.window_transmission, r.window_duration,
                                 r.window_qualified):
            if ok and dur > 0:
                values.append(mean)
                weights.append(dur)
    if not values:
        return math.nan, math.nan, 0
    v = np.asarray(values)
    w = np.asarray(weights)
    mean = float(np.average(v, weights=w))
    if len(v) > 1:
        var = float(np.average((v - mean) ** 2, weights=w))
        n_eff = float(np.sum(w)) ** 2 / float(np.sum(w * w))
        stderr = math.sqrt(var / n_eff)
    else:
        stderr = math.nan
    return mean, stderr, len(values)


def loss_spectrum(protocol, params, probe_detunings, dipole_powers, n_atoms,
                  seed, *, jobs=1, mode="both", kicks=KickOptions(),
                  force_opts=ForceOptions()):
    """Excess-loss and transmission surface over (dipole power x probe detuning).

    Returns ``(points, records)`` where ``records`` maps grid labels to the
    per-atom :class:`RunRecord` lists:
    ``records[(ip, idet)]`` with ``idet == len(probe_detunings)`` the dark run.
    """
    kicks = kicks_for_mode(mode, kicks)
    probe_detunings = np.atleast_1d(np.asarray(probe_detunings, float))
    dipole_powers = np.atleast_1d(np.asarray(dipole_powers, float))
    n_det = len(probe_detunings)
    n_cols = n_det + 1  # trailing dark pseudo-column per power

    tasks = []
    for ip, power in enumerate(dipole_powers):
        for idet in range(n_cols):
            dpc = probe_detunings[idet] if idet < n_det else math.nan
            base_stream = (ip * n_cols + idet) * n_atoms
            for i in range(n_atoms):
                tasks.append((base_stream + i, float(dpc), float(power)))

    results = _map_tasks(tasks, protocol, params, seed, kicks, force_opts, jobs)

    records = {}
    k = 0
    for ip in range(len(dipole_powers)):
        for idet in range(n_cols):
            records[(ip, idet)] = results[k:k + n_atoms]
            k += n_atoms

    points = []
    for ip, power in enumerate(dipole_powers):
        dark_stats = storage_statistics(records[(ip, n_det)]) \
            if any(r.captured for r in records[(ip, n_det)]) else None
        for idet, dpc in enumerate(probe_detunings):
            recs = records[(ip, idet)]
            captured = [r for r in recs if r.captured]
            if captured and dark_stats is not None:
                stats = storage_statistics(recs)
                excess = excess_loss_rate(stats, dark_stats)
                tmean, tse, n_q = _qualified_transmission(recs)
                points.append(SpectrumPoint(
                    probe_detuning=float(dpc), dipole_power=float(power),
                    transmission_mean=tmean, transmission_stderr=tse,
                    excess_loss_rate=excess.rate, excess_loss_stderr=excess.stderr,
                    probe_rate=stats.loss_rate, dark_rate=dark_stats.loss_rate,
                    n_atoms=stats.n_captured, n_qualified_windows=n_q,
                    ledger_share_sp=1.0 - stats.ledger_share_dp,
                    ledger_share_dp=stats.ledger_share_dp))
            else:
                points.append(SpectrumPoint(
                    probe_detuning=float(dpc), dipole_power=float(power),
                    transmission_mean=math.nan, transmission_stderr=math.nan,
                    excess_loss_rate=math.nan, excess_loss_stderr=math.nan,
                    probe_rate=math.nan, dark_rate=math.nan, n_atoms=0,
                    n_qualified_windows=0, ledger_share_sp=math.nan,
                    ledger_share_dp=math.nan))
    return points, records
