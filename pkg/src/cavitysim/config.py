"""Run configuration: flat ``key = value`` files with dotted section prefixes.

The format is line based: ``#`` starts a comment (full line or trailing),
blank lines are ignored, every other line is ``section.key = value``.  Floats
are written with ``repr`` so files round-trip at full precision; grids accept
either ``lo:hi:n`` (inclusive linspace) or a comma-separated list.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .dynamics import KickOptions, StepControl, default_noise_dt
from .forces import ForceOptions
from .protocol import ProtocolConfig
from .qed import DriveSettings, SystemParams, rb85_cavity_params

__all__ = ["RunConfig", "ConfigError", "load_config", "save_config",
           "parse_config_text", "config_text", "config_hash", "default_config",
           "parse_grid"]


class ConfigError(ValueError):
    """Raised with every collected problem of a config file at once."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid configuration:\n" +
                         "\n".join(f"  - {p}" for p in self.problems))


def parse_grid(spec):
    """Parse ``lo:hi:n`` or a comma list into an ndarray."""
    spec = spec.strip()
    if ":" in spec:
        parts = spec.split(":")
        if len(parts) != 3:
            raise ValueError(f"grid spec {spec!r} must be lo:hi:n")
        lo, hi, n = float(parts[0]), float(parts[1]), int(parts[2])
        if n < 1:
            raise ValueError(f"grid spec {spec!r}: n must be >= 1")
        return np.linspace(lo, hi, n)
    return np.array([float(v) for v in spec.split(",") if v.strip() != ""])


def _grid_spec(values):
    return ",".join(repr(float(v)) for v in np.atleast_1d(values))


@dataclass(frozen=True)
class RunConfig:
    """Everything a reproducible ensemble run needs."""

    params: SystemParams
    protocol: ProtocolConfig
    kicks: KickOptions = field(default_factory=KickOptions)
    force_opts: ForceOptions = field(default_factory=ForceOptions)
    probe_detunings_spec: str = "0.0"
    dipole_powers_spec: str = "1.0"
    atoms_per_point: int = 100
    seed: int = 1
    jobs: int = 1
    output_dir: str = "out"

    def __post_init__(self):
        problems = []
        if len(self.probe_detunings) == 0:
            problems.append("grid.probe_detunings must be nonempty")
        if len(self.dipole_powers) == 0:
            problems.append("grid.dipole_powers must be nonempty")
        if self.atoms_per_point < 1:
            problems.append("run.atoms_per_point must be >= 1")
        if self.seed < 0:
            problems.append("run.seed must be >= 0")
        if self.jobs < 1:
            problems.append("run.jobs must be >= 1")
        if problems:
            raise ConfigError(problems)

    @property
    def probe_detunings(self):
        return parse_grid(self.probe_detunings_spec)

    @property
    def dipole_powers(self):
        return parse_grid(self.dipole_powers_spec)


_SYSTEM_KEYS = ("g0", "kappa", "gamma", "lambda_probe", "lambda_trap",
                "waist_probe", "waist_trap", "cavity_length", "mass")
_DRIVE_KEYS = ("delta_pc", "delta_pa0", "eta", "trap_depth", "stark_coeff",
               "power_scale")
_PROTOCOL_KEYS = ("inject_speed", "inject_x0", "inject_z_spread",
                  "inject_y_spread", "trigger_threshold", "trap_power_low",
                  "trap_power_high", "probe_window", "cool_window",
                  "qualify_threshold", "loss_radius", "loss_zmax",
                  "max_sim_time", "sigma_eps", "dt_noise")
_CTRL_KEYS = ("rtol", "atol_pos", "atol_mom", "h_min", "h_max", "h_init",
              "safety", "max_retries")
_KICK_KEYS = ("enable_sp", "enable_dp", "axial_only_dp", "gaussian_sp")
_FORCE_KEYS = ("gravity", "stark_force")


def _fmt(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return repr(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def config_text(cfg):
    """Serialize a :class:`RunConfig`; parsing the result reproduces it exactly."""
    lines = ["# cavitysim run configuration"]

    def emit(section, obj, keys):
        lines.append("")
        for k in keys:
            lines.append(f"{section}.{k} = {_fmt(getattr(obj, k))}")

    emit("system", cfg.params, _SYSTEM_KEYS)
    emit("probe", cfg.protocol.probe_drive, _DRIVE_KEYS)
    emit("cool", cfg.protocol.cool_drive, _DRIVE_KEYS)
    emit("monitor", cfg.protocol.monitor_drive, _DRIVE_KEYS)
    emit("protocol", cfg.protocol, _PROTOCOL_KEYS)
    emit("integrator", cfg.protocol.step_control, _CTRL_KEYS)
    emit("kicks", cfg.kicks, _KICK_KEYS)
    emit("forces", cfg.force_opts, _FORCE_KEYS)
    lines.append("")
    lines.append(f"grid.probe_detunings = {cfg.probe_detunings_spec}")
    lines.append(f"grid.dipole_powers = {cfg.dipole_powers_spec}")
    lines.append("")
    lines.append(f"run.atoms_per_point = {cfg.atoms_per_point}")
    lines.append(f"run.seed = {cfg.seed}")
    lines.append(f"run.jobs = {cfg.jobs}")
    lines.append(f"run.output_dir = {cfg.output_dir}")
    return "\n".join(lines) + "\n"


def _parse_lines(text):
    """Key/value pairs with line numbers; collects syntax problems."""
    pairs = {}
    problems = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value', got {raw!r}")
            continue
        key, value = line.split("=", 1)
        key = key.strip()
        value = value.strip()
        if not key or not value:
            problems.append(f"line {lineno}: empty key or value in {raw!r}")
            continue
        if key in pairs:
            problems.append(f"line {lineno}: duplicate key {key!r}")
            continue
        pairs[key] = value
    return pairs, problems


def _take(pairs, problems, key, kind=float, default=None):
    if key not in pairs:
        if default is not None:
            return default
        problems.append(f"missing key {key!r}")
        return None
    raw = pairs.pop(key)
    try:
        if kind is bool:
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {raw!r}")
        return kind(raw)
    except ValueError as exc:
        problems.append(f"key {key!r}: {exc}")
        return None


def parse_config_text(text):
    """Parse and validate; raises :class:`ConfigError` listing every problem."""
    pairs, problems = _parse_lines(text)

    def take_section(section, keys, kinds=None):
        out = {}
        for k in keys:
            kind = (kinds or {}).get(k, float)
            out[k] = _take(pairs, problems, f"{section}.{k}", kind)
        return out

    sys_kw = take_section("system", _SYSTEM_KEYS)
    probe_kw = take_section("probe", _DRIVE_KEYS)
    cool_kw = take_section("cool", _DRIVE_KEYS)
    mon_kw = take_section("monitor", _DRIVE_KEYS)
    proto_kw = take_section("protocol", _PROTOCOL_KEYS)
    ctrl_kw = take_section("integrator", _CTRL_KEYS, {"max_retries": int})
    kick_kw = take_section("kicks", _KICK_KEYS,
                           {k: bool for k in _KICK_KEYS})
    force_kw = take_section("forces", _FORCE_KEYS,
                            {k: bool for k in _FORCE_KEYS})
    det_spec = _take(pairs, problems, "grid.probe_detunings", str)
    pow_spec = _take(pairs, problems, "grid.dipole_powers", str)
    atoms = _take(pairs, problems, "run.atoms_per_point", int)
    seed = _take(pairs, problems, "run.seed", int)
    jobs = _take(pairs, problems, "run.jobs", int)
    outdir = _take(pairs, problems, "run.output_dir", str, default="out")

    for key in pairs:
        problems.append(f"unknown key {key!r}")
    if problems:
        raise ConfigError(problems)

    def build(factory, kw, label):
        try:
            return factory(**kw)
        except (ValueError, TypeError) as exc:
            problems.append(f"{label}: {exc}")
            return None

    params = build(SystemParams, sys_kw, "system")
    probe = build(DriveSettings, probe_kw, "probe")
    cool = build(DriveSettings, cool_kw, "cool")
    monitor = build(DriveSettings, mon_kw, "monitor")
    ctrl = build(StepControl, ctrl_kw, "integrator")
    kicks = build(KickOptions, kick_kw, "kicks")
    force_opts = build(ForceOptions, force_kw, "forces")
    protocol = None
    if None not in (probe, cool, monitor, ctrl):
        protocol = build(
            ProtocolConfig,
            dict(proto_kw, probe_drive=probe, cool_drive=cool,
                 monitor_drive=monitor, step_control=ctrl), "protocol")
    for spec, label in ((det_spec, "grid.probe_detunings"),
                        (pow_spec, "grid.dipole_powers")):
        if spec is not None:
            try:
                parse_grid(spec)
            except ValueError as exc:
                problems.append(f"{label}: {exc}")
    if problems or params is None or protocol is None:
        raise ConfigError(problems or ["incomplete configuration"])
    try:
        return RunConfig(
            params=params, protocol=protocol, kicks=kicks, force_opts=force_opts,
            probe_detunings_spec=det_spec, dipole_powers_spec=pow_spec,
            atoms_per_point=atoms, seed=seed, jobs=jobs, output_dir=outdir)
    except ConfigError:
        raise
    except (ValueError, TypeError) as exc:
        raise ConfigError([str(exc)]) from exc


def load_config(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read())


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(config_text(cfg))


def config_hash(cfg):
    """sha256 of the canonical serialization; recorded in CSV headers.

    Execution-layout fields (worker count, output directory) are normalized
    away: they must not change what gets computed.
    """
    from dataclasses import replace
    canonical = replace(cfg, jobs=1, output_dir="")
    return hashlib.sha256(config_text(canonical).encode()).hexdigest()


def default_config():
    """Desk-scale configuration for the 85Rb setup.

    Trap depth and Stark coefficient are calibration inputs; the defaults put
    the peak Stark shift at 2*pi*10 MHz at unit dipole power with the bare atom
    2*pi*6 MHz below the cavity, so typically trapped atoms sit near zero
    effective atom-cavity detuning.  The noise width gives a dark storage
    time around 25 ms, and injection captures essentially every atom sent
    through a central antinode.  The run-scale integrator tolerances here are
    looser than the library defaults: the stochastic kicks dominate the error
    budget in ensemble work.
    """
    params = rb85_cavity_params()
    twopi = 2.0 * np.pi
    u0 = 1.2e-26  # ~ k_B * 0.87 mK
    s0 = twopi * 10e6
    delta_bare = twopi * 6.0e6  # bare atom below the cavity
    probe = DriveSettings.from_atom_cavity_detuning(
        delta=delta_bare, delta_pc=0.0, eta=twopi * 1.3e6,
        trap_depth=u0, stark_coeff=s0)
    cool = DriveSettings.from_atom_cavity_detuning(
        delta=delta_bare, delta_pc=-twopi * 24e6, eta=twopi * 1.2e6,
        trap_depth=u0, stark_coeff=s0)
    monitor = DriveSettings.from_atom_cavity_detuning(
        delta=delta_bare, delta_pc=0.0, eta=twopi * 0.25e6,
        trap_depth=u0, stark_coeff=s0)
    protocol = ProtocolConfig(
        probe_drive=probe, cool_drive=cool, monitor_drive=monitor,
        inject_speed=0.08, inject_x0=-1.2 * params.waist_probe,
        inject_z_spread=params.lambda_trap_effective / 16.0,
        inject_y_spread=params.waist_probe / 8.0,
        trigger_threshold=0.0025, trap_power_low=0.25, trap_power_high=1.0,
        loss_radius=3.0 * params.waist_probe,
        loss_zmax=params.cavity_length / 4.0,
        max_sim_time=28e-3, qualify_threshold=0.006,
        sigma_eps=0.04, dt_noise=default_noise_dt(params, u0),
        step_control=StepControl(rtol=1e-6, atol_pos=1e-12, atol_mom=1e-31))
    return RunConfig(params=params, protocol=protocol,
                     probe_detunings_spec="-163362817.98666924:163362817.98666924:15",
                     dipole_powers_spec="1.0", atoms_per_point=100, seed=1,
                     jobs=2, output_dir="out")
