"""Command-line surface.

Subcommands: ``analyze``, ``bifurcate``, ``encode``, ``ingest``,
``recognize``, ``classify``, ``calibrate``, ``experiment``.  Shared flags
(``--config``, ``--json``, ``--seed``, ``--threads``) are accepted by every
subcommand; a JSON config file supplies defaults for any flag not given on
the command line.

Exit codes: 0 success, 2 domain/parameter error, 3 I/O or file-format
error, 64 usage error (unknown flags, missing arguments).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import __version__
from .analysis import find_bifurcations, find_sync_solutions, trace_branch
from .audio import load_wav, power_spectrum, to_pattern, waveform_pattern
from .codec import Encoding, Pattern, encode_pattern, min_base_delay
from .engine import integrate
from .exceptions import AudioFormatError, DomainError, RingrecError
from .experiments import EXPERIMENT_NAMES, ExperimentSpec, run_experiment
from .model import RingParams
from .recognition import RecognitionConfig, calibrate, classify, recognize

EXIT_OK = 0
EXIT_DOMAIN = 2
EXIT_IO = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse with the usage exit code pinned to 64."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _fmt(v):
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _emit_table(args, header, rows, params: dict):
    out = sys.stdout if args.out is None else open(args.out, "w")
    try:
        if args.json:
            payload = [dict(zip(header, row)) for row in rows]
            out.write(json.dumps(payload) + "\n")
        else:
            blurb = " ".join(f"{k}={_fmt(v)}" for k, v in sorted(params.items()))
            out.write(f"# params: {blurb}\n")
            out.write(",".join(header) + "\n")
            for row in rows:
                out.write(",".join(_fmt(v) for v in row) + "\n")
    finally:
        if out is not sys.stdout:
            out.close()


def _cfg(args, key, fallback):
    """Fall back to the --config file, then to the hard default."""
    val = getattr(args, key, None)
    if val is not None:
        return val
    if getattr(args, "_config", None) and key in args._config:
        return args._config[key]
    return fallback


def _build_parser():
    top = _Parser(prog="ringrec",
                  description="Delay-coupled oscillator ring: analysis, "
                              "pattern encoding and recognition.")
    top.add_argument("--version", action="version", version=__version__)
    common = _Parser(add_help=False)
    common.add_argument("--config", help="JSON file with default option values")
    common.add_argument("--json", action="store_true",
                        help="emit JSON instead of CSV where applicable")
    common.add_argument("--seed", type=int, default=None, help="RNG seed")
    common.add_argument("--threads", type=int, default=None,
                        help="worker threads for sweeps")
    sub = top.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("analyze", parents=[common],
                       help="list the synchronous solutions of a ring")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--n", type=int, default=2,
                   help="ring size (the census itself does not depend on it)")
    p.add_argument("--out", help="write to file instead of stdout")

    p = sub.add_parser("bifurcate", parents=[common],
                       help="branch samples plus fold/transcritical points")
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--kappa", type=float, required=True)
    p.add_argument("--tau-min", type=float, default=0.0)
    p.add_argument("--tau-max", type=float, required=True)
    p.add_argument("--branch-ds", type=float, default=0.01,
                   help="s-grid spacing of the plotted branch samples")
    p.add_argument("--out")

    p = sub.add_parser("encode", parents=[common],
                       help="turn a pattern file into a delay encoding")
    p.add_argument("--pattern", required=True, help="JSON array of firing times")
    p.add_argument("--omega", type=float, default=None)
    p.add_argument("--kappa", type=float, default=None)
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--reference", default=None,
                   help="'nearest' (default), 'fastest', or a frequency")
    p.add_argument("--out", required=True)

    p = sub.add_parser("ingest", parents=[common],
                       help="WAV file -> firing-time pattern (JSON)")
    p.add_argument("--wav", required=True)
    p.add_argument("--fft-size", type=int, default=None)
    p.add_argument("--cutoff-hz", type=float, default=None)
    p.add_argument("--n", type=int, default=None, help="ring sites")
    p.add_argument("--tau", type=float, default=None)
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--raw", action="store_true",
                   help="skip the FFT and band-average the waveform itself")
    p.add_argument("--out", required=True)

    p = sub.add_parser("recognize", parents=[common],
                       help="score one probe against one encoding")
    p.add_argument("--encoding", required=True)
    p.add_argument("--probe", required=True, help="JSON array of firing times")
    p.add_argument("--t-horizon", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--similarity", choices=["order-parameter", "cross-correlation"],
                   default="order-parameter")
    p.add_argument("--trajectory-csv", help="also dump the probe trajectory")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--crossings-json", help="also dump per-oscillator crossings")

    p = sub.add_parser("classify", parents=[common],
                       help="two-class decision for one probe")
    p.add_argument("--encodings", nargs=2, required=True, metavar=("ENC1", "ENC2"))
    p.add_argument("--probe", required=True)
    p.add_argument("--t-horizon", type=float, default=None)
    p.add_argument("--threshold", type=float, default=None)
    p.add_argument("--window", type=float, default=None)
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--similarity", choices=["order-parameter", "cross-correlation"],
                   default="order-parameter")

    p = sub.add_parser("calibrate", parents=[common],
                       help="learn the stop time and threshold from labeled probes")
    p.add_argument("--encodings", nargs=2, required=True, metavar=("ENC1", "ENC2"))
    p.add_argument("--probes", required=True,
                   help='JSON: [{"pattern": [...], "label": -1|0|1}, ...]')
    p.add_argument("--t-grid", default=None, help="comma-separated stop times")
    p.add_argument("--theta-grid", default=None,
                   help="comma-separated thresholds")
    p.add_argument("--step", type=float, default=None)
    p.add_argument("--out", required=True)

    p = sub.add_parser("experiment", parents=[common],
                       help="run a named, seed-deterministic experiment")
    p.add_argument("name", choices=list(EXPERIMENT_NAMES))
    p.add_argument("--out-dir", required=True)
    p.add_argument("--t-end", type=float, default=None)
    p.add_argument("--full-scale", action="store_true",
                   help="full-length BasinMap horizon (slow)")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="override an experiment parameter")
    return top


def _load_pattern(path) -> Pattern:
    with open(path) as fh:
        return Pattern(np.asarray(json.load(fh), dtype=float))


def _load_encoding(path) -> Encoding:
    with open(path) as fh:
        return Encoding.from_json(fh.read())


def _cmd_analyze(args):
    params = RingParams(n=_cfg(args, "n", 2), omega=args.omega,
                        kappa=args.kappa, tau=args.tau)
    sols = find_sync_solutions(params)
    rows = [(s.omega_sync, s.stiffness, int(s.stable)) for s in sols]
    _emit_table(args, ("omega_sync", "K", "stable"), rows,
                {"omega": params.omega, "kappa": params.kappa,
                 "tau": params.tau, "n_solutions": len(sols),
                 "n_stable": sols.n_stable})
    return EXIT_OK


def _cmd_bifurcate(args):
    tau_range = (args.tau_min, args.tau_max)
    bifs = find_bifurcations(args.omega, args.kappa, tau_range)
    s_max = args.tau_max * (abs(args.omega) + abs(args.kappa)) + 1.0
    branch = [b for b in trace_branch(args.omega, args.kappa,
                                      (args.branch_ds, s_max), args.branch_ds)
              if args.tau_min <= b.tau <= args.tau_max]
    rows = [(b.tau, b.omega_sync, int(b.stable), "") for b in branch]
    rows += [(b.tau, b.omega_sync, 0, b.kind.value) for b in bifs]
    rows.sort(key=lambda r: (r[0], r[3]))
    _emit_table(args, ("tau", "omega_sync", "stable", "bif_kind"), rows,
                {"omega": args.omega, "kappa": args.kappa,
                 "tau_min": args.tau_min, "tau_max": args.tau_max,
                 "n_bifurcations": len(bifs)})
    return EXIT_OK


def _cmd_encode(args):
    pattern = _load_pattern(args.pattern)
    params = RingParams(n=pattern.n,
                        omega=float(_cfg(args, "omega", 1.0)),
                        kappa=float(_cfg(args, "kappa", 1.0)),
                        tau=float(_cfg(args, "tau", 3.0)))
    if params.tau < min_base_delay(pattern):
        raise DomainError(
            f"tau={params.tau} gives negative delays; smallest admissible "
            f"tau is {min_base_delay(pattern)}")
    enc = encode_pattern(params, pattern, _cfg(args, "reference", "nearest"))
    with open(args.out, "w") as fh:
        fh.write(enc.to_json() + "\n")
    print(f"encoded {pattern.n} sites at omega_ref="
          f"{enc.omega_ref.omega_sync:.12g} -> {args.out}")
    return EXIT_OK


def _cmd_ingest(args):
    clip = load_wav(args.wav)
    fft_size = int(_cfg(args, "fft_size", 4096))
    n = int(_cfg(args, "n", 64))
    tau = float(_cfg(args, "tau", 3.0))
    beta = float(_cfg(args, "beta", 0.5))
    if args.raw:
        pattern = waveform_pattern(clip, fft_size, n, tau, beta)
    else:
        spec = power_spectrum(clip, fft_size,
                              float(_cfg(args, "cutoff_hz", 4000.0)))
        pattern = to_pattern(spec, n, tau, beta)
    with open(args.out, "w") as fh:
        fh.write(pattern.to_json() + "\n")
    print(f"wrote {n}-site pattern -> {args.out}")
    return EXIT_OK


def _recognition_config(args):
    return RecognitionConfig(
        t_horizon=float(_cfg(args, "t_horizon", 50.0)),
        threshold=float(_cfg(args, "threshold", 0.9)),
        window=args.window)


def _cmd_recognize(args):
    enc = _load_encoding(args.encoding)
    probe = _load_pattern(args.probe)
    cfg = _recognition_config(args)
    sim = args.similarity.replace("-", "_")
    result = recognize(enc, probe, cfg, step=args.step, similarity=sim)
    print(json.dumps({"scores": [result.score], "accepted": result.accepted}))
    if args.trajectory_csv or args.crossings_json:
        from .codec import probe_history
        traj = integrate(enc.params, enc.delays, probe_history(enc, probe),
                         cfg.t_horizon, args.step)
        if args.trajectory_csv:
            with open(args.trajectory_csv, "w") as fh:
                traj.to_csv(fh, stride=args.stride,
                            params_comment=f"encoding={args.encoding} "
                                           f"probe={args.probe} "
                                           f"t_horizon={cfg.t_horizon}")
        if args.crossings_json:
            with open(args.crossings_json, "w") as fh:
                fh.write(traj.crossings_json() + "\n")
    return EXIT_OK


def _cmd_classify(args):
    enc1 = _load_encoding(args.encodings[0])
    enc2 = _load_encoding(args.encodings[1])
    probe = _load_pattern(args.probe)
    cfg = _recognition_config(args)
    sim = args.similarity.replace("-", "_")
    decision = classify(enc1, enc2, probe, cfg, step=args.step, similarity=sim)
    print(json.dumps({"scores": [decision.scores[0], decision.scores[1]],
                      "decision": decision.value}))
    return EXIT_OK


def _parse_grid(text, fallback):
    if text is None:
        return fallback
    return [float(v) for v in text.split(",") if v.strip()]


def _cmd_calibrate(args):
    encs = [_load_encoding(p) for p in args.encodings]
    with open(args.probes) as fh:
        items = json.load(fh)
    labeled = [(Pattern(np.asarray(it["pattern"], dtype=float)), int(it["label"]))
               for it in items]
    t_grid = _parse_grid(args.t_grid, [12.5, 25.0, 50.0])
    theta_grid = _parse_grid(args.theta_grid,
                             list(np.round(np.arange(0.5, 0.9996, 0.0005), 6)))
    cfg = calibrate(encs, labeled, t_grid, theta_grid, step=args.step)
    with open(args.out, "w") as fh:
        json.dump(cfg.to_dict(), fh)
        fh.write("\n")
    print(json.dumps(cfg.to_dict()))
    return EXIT_OK


def _cmd_experiment(args):
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise DomainError(f"--set expects KEY=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        try:
            overrides[key] = json.loads(val)
        except json.JSONDecodeError:
            overrides[key] = val
    if args.t_end is not None:
        overrides["t_end"] = args.t_end
    if args.full_scale:
        overrides["full_scale"] = True
    if getattr(args, "_config", None):
        overrides = {**args._config.get("overrides", {}), **overrides}
    spec = ExperimentSpec(name=args.name, overrides=overrides,
                          seed=0 if args.seed is None else args.seed)
    report = run_experiment(spec, args.out_dir,
                            threads=1 if args.threads is None else args.threads)
    print(json.dumps({k: report[k] for k in sorted(report)
                      if k in ("experiment", "seed", "csv", "accuracy",
                               "threshold", "n_cells", "trials", "report_path")}))
    return EXIT_OK


_COMMANDS = {
    "analyze": _cmd_analyze,
    "bifurcate": _cmd_bifurcate,
    "encode": _cmd_encode,
    "ingest": _cmd_ingest,
    "recognize": _cmd_recognize,
    "classify": _cmd_classify,
    "calibrate": _cmd_calibrate,
    "experiment": _cmd_experiment,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if e.code is not None else EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    if getattr(args, "config", None):
        try:
            with open(args.config) as fh:
                args._config = json.load(fh)
        except OSError as e:
            sys.stderr.write(f"ringrec: cannot read config: {e}\n")
            return EXIT_IO
        except json.JSONDecodeError as e:
            sys.stderr.write(f"ringrec: bad config JSON: {e}\n")
            return EXIT_DOMAIN
    else:
        args._config = {}
    try:
        return _COMMANDS[args.command](args)
    except AudioFormatError as e:
        sys.stderr.write(f"ringrec: {e}\n")
        return EXIT_IO
    except DomainError as e:
        sys.stderr.write(f"ringrec: {e}\n")
        return EXIT_DOMAIN
    except RingrecError as e:
        sys.stderr.write(f"ringrec: {e}\n")
        return EXIT_DOMAIN
    except OSError as e:
        path = getattr(e, "filename", None)
        where = f" ({path})" if path else ""
        sys.stderr.write(f"ringrec: I/O error{where}: {e}\n")
        return EXIT_IO
    except json.JSONDecodeError as e:
        sys.stderr.write(f"ringrec: bad JSON input: {e}\n")
        return EXIT_DOMAIN


def entrypoint():
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
