"""Command-line front end.

Subcommands: synth, sweep, correlate, counts, bound, replay.  Each command
writes its primary output to ``--out`` and a run record next to it
(``<out stem>.run.json``) holding the fully resolved arguments; ``replay``
re-executes a run record.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

import argparse
import json
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .biphoton import (BiphotonState, joint_distribution, maximally_entangled,
                       prepare_phi_state, sample_counts)
from .estimators import default_channels
from .exceptions import NumericalError, QfpError, ValidationError
from .inference import DEFAULT_POSTERIOR_SAMPLES, entropic_bound_posterior
from .qfp import assemble_transfer, dft_matrix
from .registry import (load_solution, read_counts_csv, read_distribution_csv,
                       read_table_csv, save_solution, write_counts_csv,
                       write_distribution_csv, write_rows_csv)
from .synth import (SYNTH_CLAMP, PsoSettings, SearchSpace, bandwidth_sweep,
                    pso_optimize)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3
DEFAULT_OUT = {
    "synth": "solution.json", "sweep": "sweep.csv", "correlate": "distribution.csv",
    "counts": "counts.csv", "bound": "bound.json",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _stem(out):
    out = Path(out)
    return out.with_name(out.name[:-len(out.suffix)] if out.suffix else out.name)


def _sibling(out, suffix):
    return Path(f"{_stem(out)}{suffix}")


def _fresh_seed():
    return int(np.random.SeedSequence().entropy % (2 ** 63))


def _int_list(text):
    try:
        return [int(v) for v in str(text).replace(" ", "").split(",") if v]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


# ---------------------------------------------------------------------------
# Commands.  Each takes the resolved argument dict and returns
# (primary output path, summary dict for the run record).
# ---------------------------------------------------------------------------

def _pso_settings(a):
    return PsoSettings(swarm_size=a["swarm_size"], iterations=a["iterations"],
                       restarts=a["restarts"], polish=a["polish"], seed=a["seed"],
                       stall_iterations=a["stall_iterations"] or None)


def _waveform_rows(config, n_points):
    t = np.arange(n_points) / n_points
    a, b = config.drive_a.waveform(t), config.drive_b.waveform(t)
    return [(float(ti), float(ai), float(bi)) for ti, ai, bi in zip(t, a, b)]


def _shaper_rows(config):
    lat = config.lattice
    phases = config.shaper.on_lattice(lat.total_modes)
    lo = config.shaper.channel_offset
    hi = lo + config.shaper.n_channels
    return [(k, k - lat.comp_offset, float(phases[k]), int(lo <= k < hi))
            for k in range(lat.total_modes)]


def cmd_synth(a):
    d = a["d"]
    b = default_channels(d) if a["B"] is None else a["B"]
    space = SearchSpace(d, b, a["P"], a["symmetric"], fidelity_clamp=a["fidelity_clamp"])
    result = pso_optimize(space, _pso_settings(a), n_jobs=a["n_jobs"])
    out = Path(a["out"])
    save_solution(result, out)
    wave = write_rows_csv(_sibling(out, ".waveforms.csv"), ["t_over_T", "A", "B"],
                          _waveform_rows(result.config, a["waveform_points"]))
    shaper = write_rows_csv(_sibling(out, ".shaper.csv"),
                            ["lattice_index", "bin", "phase", "shaped"],
                            _shaper_rows(result.config))
    m = result.metrics
    print(f"d={d} B={b} P={space.n_harmonics} symmetric={space.symmetric}: "
          f"F_W={m.fidelity:.6f} P_W={m.success_prob:.5f} cost={m.cost:.5f}")
    if d >= 7:
        print("note: d >= 7 is an extended synthesis; consider larger budgets")
    return out, {
        "fidelity": m.fidelity, "success_prob": m.success_prob, "cost": m.cost,
        "B": b, "P": space.n_harmonics, "extended": d >= 7,
        "files": {"waveforms": str(wave), "shaper": str(shaper)},
    }


def cmd_sweep(a):
    sweep = bandwidth_sweep(a["d"], a["grid"], _pso_settings(a), n_jobs=a["n_jobs"],
                            n_harmonics=a["P"], symmetric=a["symmetric"],
                            fidelity_clamp=a["fidelity_clamp"])
    out = Path(a["out"])
    write_rows_csv(out, ["B", "cost", "fidelity", "success_prob"], sweep.points)
    for b, c, f, p in sweep.points:
        print(f"B={b:3d} cost={c:.5f} F_W={f:.6f} P_W={p:.5f}")
    print(f"minimum bandwidth B* = {sweep.min_bandwidth}")
    if sweep.non_monotone:
        print(f"warning: cost rose with B at {sweep.non_monotone} (optimizer noise)")
    return out, {"min_bandwidth": sweep.min_bandwidth, "points": sweep.points,
                 "non_monotone": sweep.non_monotone, "errors": sweep.errors}


def _parse_gate(spec, d):
    kind, _, arg = spec.partition(":")
    if kind == "ideal-dft":
        return dft_matrix(int(arg) if arg else d)
    if kind == "identity":
        return np.eye(int(arg) if arg else d, dtype=complex)
    if kind == "solution":
        return assemble_transfer(load_solution(arg).config, strict=False)
    raise ValidationError(f"unknown gate spec {spec!r}; use ideal-dft:d, identity:d or solution:FILE")


def _parse_state(spec):
    kind, _, arg = spec.partition(":")
    if kind == "maxent":
        return maximally_entangled(int(arg))
    if kind == "phi":
        return prepare_phi_state(float(arg))
    if kind == "file":
        # amplitude table: real part only, one row per idler bin
        return BiphotonState.from_unnormalized(read_table_csv(arg))
    raise ValidationError(f"unknown state spec {spec!r}; use maxent:d, phi:RAD or file:CSV")


def cmd_correlate(a):
    state = _parse_state(a["state"])
    w_i, w_s = _parse_gate(a["gate_i"], state.d), _parse_gate(a["gate_s"], state.d)
    dist = joint_distribution(state, w_i, w_s)
    out = Path(a["out"])
    write_distribution_csv(out, dist)
    print(np.array2string(dist.probs, precision=4, suppress_small=True))
    print(f"escape mass = {dist.escape_mass:.6g}")
    return out, {"escape_mass": dist.escape_mass, "probs": dist.probs.tolist()}


def cmd_counts(a):
    dist = read_distribution_csv(a["dist"])
    table = sample_counts(dist, a["model"], n=a["n"], rate=a["rate"], dwell=a["dwell"],
                          seed=a["seed"])
    out = Path(a["out"])
    write_counts_csv(out, table)
    print(table.counts)
    return out, {"counts": table.counts.tolist(), "total": table.total}


def cmd_bound(a):
    logical, fourier = read_counts_csv(a["logical"]), read_counts_csv(a["dft"])
    d = logical.d if a["d"] is None else a["d"]
    summary = entropic_bound_posterior(logical, fourier, d, a["n_samples"], a["seed"])
    out = Path(a["out"])
    record = summary.to_record()
    out.write_text(json.dumps(record, indent=2) + "\n", encoding="utf-8")
    print(f"E_D >= {summary.mean:.4f} +/- {summary.std:.4f} ebits "
          f"({summary.n_samples} posterior draws)")
    return out, record


COMMANDS = {"synth": cmd_synth, "sweep": cmd_sweep, "correlate": cmd_correlate,
            "counts": cmd_counts, "bound": cmd_bound}
RANDOMIZED = {"synth", "sweep", "counts", "bound"}


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _add_pso(p):
    p.add_argument("--swarm-size", type=int, default=100)
    p.add_argument("--iterations", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--stall-iterations", type=int, default=300,
                   help="stop a restart after this many iterations without progress (0: never)")
    p.add_argument("--no-polish", dest="polish", action="store_false")
    p.add_argument("--fidelity-clamp", type=float, default=SYNTH_CLAMP)
    p.add_argument("--symmetric", action="store_true",
                   help="force the second drive to be the time reverse of the first")
    p.add_argument("--P", type=int, default=None, help="RF harmonics per modulator (default d-1)")
    p.add_argument("--n-jobs", type=int, default=1)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None)
    common.add_argument("--out", default=None)
    common.add_argument("--config", default=None,
                        help="JSON file of option values or a run record")

    parser = _Parser(prog="qfpdft", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=__version__)
    # the global flags are accepted before the subcommand too
    parser.add_argument("--seed", dest="g_seed", type=int, default=None, help=argparse.SUPPRESS)
    parser.add_argument("--out", dest="g_out", default=None, help=argparse.SUPPRESS)
    parser.add_argument("--config", dest="g_config", default=None, help=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("synth", parents=[common], help="synthesize a d-point DFT gate")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--B", type=int, default=None, help="shaped channels (default: minimum-bandwidth table)")
    p.add_argument("--waveform-points", type=int, default=512)
    _add_pso(p)

    p = sub.add_parser("sweep", parents=[common], help="cost versus shaped channels")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--grid", type=_int_list, default=None,
                   help="comma-separated B values (default 4,8,...,52 from d up)")
    _add_pso(p)

    p = sub.add_parser("correlate", parents=[common], help="joint outcome distribution")
    p.add_argument("--state", required=True, help="maxent:d | phi:RAD | file:CSV")
    p.add_argument("--gate-i", required=True, help="ideal-dft:d | identity:d | solution:FILE")
    p.add_argument("--gate-s", required=True, help="ideal-dft:d | identity:d | solution:FILE")

    p = sub.add_parser("counts", parents=[common], help="sample a coincidence table")
    p.add_argument("dist", help="distribution CSV")
    p.add_argument("--model", choices=["multinomial", "poisson"], default="multinomial")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--rate", type=float, default=None)
    p.add_argument("--dwell", type=float, default=1.0)

    p = sub.add_parser("bound", parents=[common], help="entropic entanglement bound")
    p.add_argument("logical", help="logical-basis counts CSV")
    p.add_argument("dft", help="Fourier-basis counts CSV")
    p.add_argument("--d", type=int, default=None)
    p.add_argument("--n-samples", type=int, default=DEFAULT_POSTERIOR_SAMPLES)

    p = sub.add_parser("replay", help="re-run a command from its run record")
    p.add_argument("record")
    p.add_argument("--out", default=None, help="write outputs here instead of the recorded path")
    return parser


def _load_config(path):
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if "args" in data and "command" in data:
        data = data["args"]
    return {k.replace("-", "_"): v for k, v in data.items()}


def _merge_globals(ns):
    for name in ("seed", "out", "config"):
        value = getattr(ns, "g_" + name)
        delattr(ns, "g_" + name)
        # given explicitly on the command line, so it beats config values
        if value is not None:
            setattr(ns, name, value)
    return ns


def _prescan_config(argv):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config", default=None)
    known, _ = pre.parse_known_args(argv)
    command = next((a for a in argv if a in COMMANDS), None)
    return known.config, command


def resolve_args(argv):
    """Parse ``argv`` into ``(command, args dict)`` with config-file defaults applied."""
    argv = list(argv)
    parser = build_parser()
    config, command = _prescan_config(argv)
    if config and command:
        sub = parser._subparsers._group_actions[0].choices[command]
        actions = {a.dest: a for a in sub._actions}
        cfg = {k: v for k, v in _load_config(config).items() if k in actions}
        for key in cfg:
            actions[key].required = False
        sub.set_defaults(**cfg)
    ns = _merge_globals(parser.parse_args(argv))
    if ns.command == "replay":
        return "replay", vars(ns)
    args = vars(ns)
    command = args.pop("command")
    args.pop("config", None)
    if args.get("out") is None:
        args["out"] = DEFAULT_OUT[command]
    if command in RANDOMIZED and args.get("seed") is None:
        args["seed"] = _fresh_seed()
    for key in ("dist", "logical", "dft"):
        if key in args:
            args[key] = str(Path(args[key]).resolve())
    for key in ("state", "gate_i", "gate_s"):
        kind, sep, arg = args.get(key, "").partition(":")
        if kind in ("solution", "file") and sep:
            args[key] = f"{kind}:{Path(arg).resolve()}"
    if command == "sweep" and args.get("grid") is None:
        args["grid"] = [b for b in range(4, 53, 4) if b >= args["d"]]
    return command, args


def run(command, args):
    out, summary = COMMANDS[command](args)
    record = {
        "tool": "qfpdft", "version": __version__, "command": command,
        "args": args, "outputs": {"primary": str(out), **summary},
        "created": datetime.now(timezone.utc).isoformat(),
    }
    rec_path = _sibling(out, ".run.json")
    rec_path.write_text(json.dumps(record, indent=2, default=float) + "\n", encoding="utf-8")
    return record


def replay(record_path, out=None):
    with open(record_path, encoding="utf-8") as fh:
        record = json.load(fh)
    args = dict(record["args"])
    if out is not None:
        args["out"] = out
    return run(record["command"], args)


def _error(exc, code):
    json.dump({"error": type(exc).__name__, "message": str(exc), "exit_code": code},
              sys.stderr)
    sys.stderr.write("\n")
    return code


def main(argv=None):
    try:
        command, args = resolve_args(sys.argv[1:] if argv is None else argv)
        if command == "replay":
            replay(args["record"], args["out"])
        else:
            run(command, args)
    except ValidationError as exc:
        return _error(exc, EXIT_VALIDATION)
    except NumericalError as exc:
        return _error(exc, EXIT_NUMERICAL)
    except (OSError, json.JSONDecodeError, KeyError) as exc:
        return _error(exc, EXIT_VALIDATION)
    except QfpError as exc:
        return _error(exc, EXIT_NUMERICAL)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
