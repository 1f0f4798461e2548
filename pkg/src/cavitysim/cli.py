"""Command-line interface: steady-state maps, ensemble runs, noise calibration.

Every figure-producing command is a pure function of (config file, seed):
repeated invocations write byte-identical files, and ``ensemble`` output is
independent of ``--jobs``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import replace

from . import __version__
from .config import (
    ConfigError,
    config_hash,
    default_config,
    load_config,
    parse_grid,
    save_config,
)
from .ensemble import MODES, loss_spectrum
from .protocol import calibrate_noise
from .qed import excitation_map, transmission_map


def _comment_block(cfg_hash, extra=()):
    lines = [f"# cavitysim {__version__}", f"# config_hash {cfg_hash}"]
    lines += [f"# {line}" for line in extra]
    return lines


def _write_map_csv(path, deltas, probes, values, cfg_hash, label):
    rows = _comment_block(cfg_hash, [f"map {label}"])
    rows.append("delta,probe_detuning,value")
    for i, d in enumerate(deltas):
        for j, p in enumerate(probes):
            rows.append(f"{float(d)!r},{float(p)!r},{float(values[i, j])!r}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(rows) + "\n")


def _cmd_spectrum(args):
    cfg = load_config(args.config) if args.config else default_config()
    deltas = parse_grid(args.grid_delta)
    probes = parse_grid(args.grid_probe)
    drive = replace(cfg.protocol.probe_drive, trap_depth=0.0, stark_coeff=0.0)
    trans = transmission_map(deltas, probes, drive, cfg.params)
    exc = excitation_map(deltas, probes, drive, cfg.params)
    os.makedirs(args.out, exist_ok=True)
    h = config_hash(cfg)
    _write_map_csv(os.path.join(args.out, "transmission_map.csv"),
                   deltas, probes, trans, h, "transmission")
    _write_map_csv(os.path.join(args.out, "excitation_map.csv"),
                   deltas, probes, exc, h, "excitation")
    print(f"wrote transmission_map.csv and excitation_map.csv to {args.out}")
    return 0


def _spectrum_csv_lines(points, cfg_hash, mode):
    rows = _comment_block(cfg_hash, [f"mode {mode}"])
    rows.append("dipole_power,probe_detuning,transmission_mean,transmission_stderr,"
                "excess_loss_rate,excess_loss_stderr,probe_rate,dark_rate,"
                "n_atoms,n_qualified_windows,ledger_share_sp,ledger_share_dp")
    for p in points:
        rows.append(",".join([
            repr(p.dipole_power), repr(p.probe_detuning),
            repr(p.transmission_mean), repr(p.transmission_stderr),
            repr(p.excess_loss_rate), repr(p.excess_loss_stderr),
            repr(p.probe_rate), repr(p.dark_rate), str(p.n_atoms),
            str(p.n_qualified_windows), repr(p.ledger_share_sp),
            repr(p.ledger_share_dp)]))
    return rows


def _atoms_csv_lines(records, probe_detunings, dipole_powers, cfg_hash, mode):
    n_det = len(probe_detunings)
    rows = _comment_block(
        cfg_hash, [f"mode {mode}",
                   "probe_detuning nan marks the dark-trap ensemble"])
    rows.append("dipole_power,probe_detuning,seed,captured,storage_time,"
                "escape_axis,qualified_windows,ledger_sp,ledger_dp")
    for (ip, idet) in sorted(records):
        dpc = probe_detunings[idet] if idet < n_det else float("nan")
        for r in records[(ip, idet)]:
            rows.append(",".join([
                repr(float(dipole_powers[ip])), repr(float(dpc)),
                str(r.stream_id), "1" if r.captured else "0",
                repr(r.storage_time), r.escape_axis,
                str(r.qualified_windows), repr(r.ledger_sp),
                repr(r.ledger_dp)]))
    return rows


def _cmd_ensemble(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.jobs is not None:
        cfg = replace(cfg, jobs=args.jobs)
    out_dir = args.out or cfg.output_dir
    os.makedirs(out_dir, exist_ok=True)
    points, records = loss_spectrum(
        cfg.protocol, cfg.params, cfg.probe_detunings, cfg.dipole_powers,
        cfg.atoms_per_point, cfg.seed, jobs=cfg.jobs, mode=args.mode,
        kicks=cfg.kicks, force_opts=cfg.force_opts)
    h = config_hash(cfg)
    spectrum_path = os.path.join(out_dir, "spectrum.csv")
    atoms_path = os.path.join(out_dir, "atoms.csv")
    with open(spectrum_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(_spectrum_csv_lines(points, h, args.mode)) + "\n")
    with open(atoms_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(_atoms_csv_lines(
            records, cfg.probe_detunings, cfg.dipole_powers, h, args.mode)) + "\n")
    print(f"wrote {spectrum_path} and {atoms_path}")
    return 0


def _cmd_calibrate(args):
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.target_dark_time <= 0:
        print("error: --target-dark-time must be positive", file=sys.stderr)
        return 1
    sigma, achieved = calibrate_noise(
        args.target_dark_time, cfg.protocol, cfg.params, cfg.seed,
        n_atoms=args.atoms, kicks=cfg.kicks, force_opts=cfg.force_opts)
    overlay = args.overlay or os.path.join(cfg.output_dir, "noise_overlay.cfg")
    os.makedirs(os.path.dirname(overlay) or ".", exist_ok=True)
    with open(overlay, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("# calibrated trap-intensity noise width\n")
        fh.write(f"# achieved dark storage time {achieved!r} s\n")
        fh.write(f"protocol.sigma_eps = {sigma!r}\n")
    print(f"sigma_eps = {sigma!r}")
    print(f"achieved_dark_time = {achieved!r}")
    print(f"wrote {overlay}")
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cavitysim",
        description="Trapped-atom cavity QED simulator: spectra, ensembles, "
                    "noise calibration.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("spectrum", help="steady-state transmission/excitation maps")
    sp.add_argument("--grid-delta", required=True,
                    help="atom-cavity detunings, lo:hi:n or comma list (rad/s)")
    sp.add_argument("--grid-probe", required=True,
                    help="probe-cavity detunings, lo:hi:n or comma list (rad/s)")
    sp.add_argument("--out", required=True, help="output directory")
    sp.add_argument("--config", help="config file (defaults to built-in params)")
    sp.set_defaults(func=_cmd_spectrum)

    en = sub.add_parser("ensemble", help="full protocol over the config grid")
    en.add_argument("--config", required=True)
    en.add_argument("--mode", choices=MODES, default="both",
                    help="which diffusion channels act")
    en.add_argument("--seed", type=int, help="override run.seed")
    en.add_argument("--jobs", type=int, help="override run.jobs")
    en.add_argument("--out", help="override run.output_dir")
    en.set_defaults(func=_cmd_ensemble)

    ca = sub.add_parser("calibrate", help="fit sigma_eps to a dark storage time")
    ca.add_argument("--config", required=True)
    ca.add_argument("--target-dark-time", type=float, required=True,
                    help="target mean dark storage time (s)")
    ca.add_argument("--seed", type=int, help="override run.seed")
    ca.add_argument("--atoms", type=int, default=100,
                    help="ensemble size per bisection step")
    ca.add_argument("--overlay", help="overlay file path")
    ca.set_defaults(func=_cmd_calibrate)

    ex = sub.add_parser("write-config", help="write the default config file")
    ex.add_argument("--out", required=True)
    ex.set_defaults(func=_cmd_write_config)
    return parser


def _cmd_write_config(args):
    os.makedirs(os.path.dirname(args.out) or ".", exist_ok=True)
    save_config(default_config(), args.out)
    print(f"wrote {args.out}")
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
