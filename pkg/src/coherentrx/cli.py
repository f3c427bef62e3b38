"""Batch command-line front end.

Subcommands::

    optimize   learn a receiver, write receiver-spec JSON + trace CSV
    evaluate   sweep a receiver over mean photon numbers, write CSV
    baseline   write bound/receiver error curves, one CSV per receiver
    metrics    posterior-evolution and prefix-KL CSVs for a receiver

Every output embeds a metadata header (tool version, resolved config, seed)
sufficient to reproduce it byte for byte; no timestamps.  Files are written
atomically (temp + rename).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile

import numpy as np

from . import __version__, baselines, metrics
from .constellation import Constellation, bpsk, custom, mean_energy, qam6
from .formulator import FormulatorConfig, formulate, optimize_sweep
from .photonics import NoiseModel
from .simulator import averaged_distribution, error_rate, mc_sample
from .tree import Receiver, load_receiver, save_receiver

_ENCODINGS = {"bpsk": bpsk, "qam6": qam6}


def _parse_sweep(text: str) -> list[float]:
    """Accept 'a,b,c' lists or 'start:stop:num' linear grids."""
    if ":" in text:
        parts = text.split(":")
        if len(parts) != 3:
            raise argparse.ArgumentTypeError("grid form is start:stop:num")
        start, stop, num = float(parts[0]), float(parts[1]), int(parts[2])
        if num < 1:
            raise argparse.ArgumentTypeError("grid needs at least one point")
        return [float(x) for x in np.linspace(start, stop, num)]
    values = [float(x) for x in text.split(",") if x.strip()]
    if not values:
        raise argparse.ArgumentTypeError("empty sweep")
    return values


def _atomic_write(path: str, payload: str) -> None:
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _write_csv(path: str, meta: dict, columns: list[str], rows: list[list]) -> None:
    lines = [f"# {k} = {meta[k]}" for k in sorted(meta)]
    lines.append(",".join(columns))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _meta(args: argparse.Namespace, command: str) -> dict:
    # destination paths do not affect the data; leaving them out keeps
    # reruns byte-identical wherever the files land
    skip = {"func", "out", "out_dir", "trace"}
    meta = {"tool": "coherentrx", "version": __version__, "command": command}
    for key, val in sorted(vars(args).items()):
        if key not in skip:
            meta[key] = val
    return meta


def _noise_from_args(args: argparse.Namespace) -> NoiseModel:
    return NoiseModel(
        visibility=args.visibility,
        efficiency=args.efficiency,
        dark_counts=args.dark,
        phase_jitter=args.phase_jitter,
        amplitude_jitter=args.amp_jitter,
    )


def _add_noise_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--visibility", type=float, default=1.0, help="interference visibility in [0,1]")
    p.add_argument("--efficiency", type=float, default=1.0, help="detection efficiency in [0,1]")
    p.add_argument("--dark", type=float, default=0.0, help="mean dark counts per round")
    p.add_argument("--phase-jitter", type=float, default=0.0, help="per-run phase jitter sigma (rad)")
    p.add_argument("--amp-jitter", type=float, default=0.0, help="per-run relative amplitude jitter sigma")


def _add_formulator_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--iters", type=int, default=300, help="max learning iterations")
    p.add_argument("--learning-rate", type=float, default=2.0)
    p.add_argument("--perturbation", type=float, default=0.01, help="relative scale of the initialization perturbation")
    p.add_argument("--window", type=int, default=20, help="convergence window (iterations)")
    p.add_argument("--delta", type=float, default=1e-6, help="convergence loss-improvement threshold")


def _formulator_config(args: argparse.Namespace) -> FormulatorConfig:
    return FormulatorConfig(
        max_iterations=args.iters,
        batch_size=args.batch,
        learning_rate=args.learning_rate,
        convergence_window=args.window,
        convergence_delta=args.delta,
        init_perturbation=args.perturbation,
        seed=args.seed,
    )


def _build_constellation(encoding: str, nbar: float) -> Constellation:
    try:
        builder = _ENCODINGS[encoding]
    except KeyError:
        raise ValueError(f"unknown encoding {encoding!r}; choose from {sorted(_ENCODINGS)}")
    return builder(nbar)


def _scaled_constellation(c: Constellation, nbar: float) -> Constellation:
    """Same geometry at a different prior-averaged energy."""
    if c.name in _ENCODINGS:
        return _ENCODINGS[c.name](nbar)
    current = mean_energy(c)
    if current == 0:
        raise ValueError("cannot rescale a zero-energy constellation")
    return custom(c.amplitudes * np.sqrt(nbar / current), c.priors, name=c.name)


def cmd_optimize(args: argparse.Namespace) -> int:
    c = _build_constellation(args.encoding, args.mean_photon)
    nm = _noise_from_args(args)
    cfg = _formulator_config(args)
    result = formulate(c, args.rounds, args.arity, nm, cfg)
    metadata = {
        "command": "optimize",
        "tool_version": __version__,
        "encoding": args.encoding,
        "mean_photon": args.mean_photon,
        "seed": args.seed,
        "config": {
            "iters": args.iters,
            "batch": args.batch,
            "learning_rate": args.learning_rate,
            "perturbation": args.perturbation,
            "window": args.window,
            "delta": args.delta,
        },
        "converged": result.trace.converged,
        "iterations_run": len(result.trace),
        "final_loss": result.final_loss,
        "tree_parameters": result.tree.n_parameters,
        "table_entries": int(result.table.guesses.size),
        "constellation_geometry": (
            "2x3 grid, x in {-d,0,d}, y in {-d/2,d/2}, d=sqrt(12*nbar/11), uniform priors"
            if args.encoding == "qam6"
            else "antipodal +/-sqrt(nbar), uniform priors"
        ),
        "cn_ordering": "null current MAP hypothesis, ties toward lowest label",
    }
    if not result.trace.converged:
        metadata["warning"] = "did not converge within max iterations; best iterate returned"
    receiver = Receiver(result.tree, result.table, c, nm, metadata)
    save_receiver(args.out, receiver)
    trace_path = args.trace or os.path.splitext(args.out)[0] + "_trace.csv"
    t = result.trace
    _write_csv(
        trace_path,
        _meta(args, "optimize"),
        ["iteration", "loss", "gradient_norm"],
        [[int(i), float(l), float(g)] for i, l, g in zip(t.iteration, t.loss, t.gradient_norm)],
    )
    print(f"wrote {args.out} and {trace_path} (final loss {result.final_loss:.6g})")
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    receiver = load_receiver(args.spec)
    grid = args.sweep if args.sweep else [args.mean_photon]
    if any(x < 0 for x in grid):
        raise ValueError("mean photon numbers must be non-negative")
    nm = receiver.noise_model
    rows = []
    if args.reoptimize:
        cfg = _formulator_config(args)
        swept = optimize_sweep(
            lambda nbar: _scaled_constellation(receiver.constellation, nbar),
            grid,
            receiver.tree.rounds,
            receiver.tree.arity,
            nm,
            cfg,
        )
        pairs = [(nbar, res.tree, res.table) for nbar, res in swept]
    else:
        pairs = [(nbar, receiver.tree, receiver.table) for nbar in grid]
    for i, (nbar, tree, table) in enumerate(pairs):
        c = _scaled_constellation(receiver.constellation, nbar)
        dist = averaged_distribution(tree, c, nm, args.batch, args.seed + i)
        exact = error_rate(dist, table)
        mc = mc_sample(tree, table, c, nm, args.mc_samples, args.seed + i)
        rows.append([float(nbar), exact, mc.error_rate, mc.stderr])
    _write_csv(
        args.out,
        _meta(args, "evaluate"),
        ["mean_photons", "exact_error", "mc_error", "mc_stderr"],
        rows,
    )
    print(f"wrote {args.out}")
    return 0


_BASELINE_CHOICES = ("helstrom", "homodyne", "heterodyne", "kennedy", "cn", "dolinar")


def cmd_baseline(args: argparse.Namespace) -> int:
    receivers = [r.strip() for r in args.receivers.split(",") if r.strip()]
    for r in receivers:
        if r not in _BASELINE_CHOICES:
            raise ValueError(f"unknown receiver {r!r}; choose from {_BASELINE_CHOICES}")
    nm = _noise_from_args(args)
    os.makedirs(args.out_dir, exist_ok=True)
    grid = args.sweep
    binary_only = {"helstrom", "homodyne", "kennedy", "dolinar"}
    for name in receivers:
        if name in binary_only and args.encoding != "bpsk":
            raise ValueError(f"{name} curve is defined for the bpsk encoding only")
        errors = []
        for i, nbar in enumerate(grid):
            if name == "helstrom":
                errors.append(baselines.helstrom_bpsk(nbar))
            elif name == "homodyne":
                errors.append(baselines.homodyne_sql_bpsk(nbar))
            elif name == "kennedy":
                errors.append(baselines.kennedy_bpsk(nbar))
            elif name == "heterodyne":
                errors.append(baselines.heterodyne_sql(_build_constellation(args.encoding, nbar)))
            elif name == "cn":
                c = _build_constellation(args.encoding, nbar)
                tree, table = baselines.cn_receiver(c, args.rounds, args.arity)
                dist = averaged_distribution(tree, c, nm, args.batch, args.seed + i)
                errors.append(error_rate(dist, table))
            elif name == "dolinar":
                c = _build_constellation(args.encoding, nbar)
                tree, table = baselines.dolinar_receiver(nbar, args.rounds)
                dist = averaged_distribution(tree, c, nm, args.batch, args.seed + i)
                errors.append(error_rate(dist, table))
        curve = baselines.BoundCurve(name, np.asarray(grid), np.asarray(errors))
        out = os.path.join(args.out_dir, f"{name}.csv")
        _write_csv(
            out,
            _meta(args, "baseline") | {"receiver": name},
            ["receiver", "mean_photons", "error"],
            [[curve.receiver, float(n), float(e)] for n, e in zip(curve.mean_photons, curve.error)],
        )
        print(f"wrote {out}")
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    receiver = load_receiver(args.spec)
    tree, c, nm = receiver.tree, receiver.constellation, receiver.noise_model
    os.makedirs(args.out_dir, exist_ok=True)
    models = [("ideal", NoiseModel())]
    if nm != NoiseModel():
        models.append(("design", nm))

    k_codes = c.n_codewords
    post_rows = []
    for model_name, model in models:
        for label in range(k_codes):
            path = metrics.most_probable_path(tree, c, model, label)
            traj = metrics.posterior_trajectory(tree, c, model, path)
            path_str = "".join(str(k) for k in path)
            for rnd, row in enumerate(traj.posteriors):
                post_rows.append([model_name, "map_path", label, path_str, rnd] + [float(x) for x in row])
            expected = metrics.expected_posterior_trajectory(tree, c, model, label)
            for rnd, row in enumerate(expected):
                post_rows.append([model_name, "expected", label, path_str, rnd] + [float(x) for x in row])
    post_cols = ["model", "variant", "true_label", "path", "round"] + [
        f"posterior_{y}" for y in range(k_codes)
    ]
    post_path = os.path.join(args.out_dir, "posterior.csv")
    _write_csv(post_path, _meta(args, "metrics"), post_cols, post_rows)

    kl_rows = []
    for model_name, model in models:
        if model.is_deterministic:
            dist = averaged_distribution(tree, c, model, 1, args.seed)
        else:
            dist = averaged_distribution(tree, c, model, args.batch, args.seed)
        for p in range(k_codes):
            for q in range(k_codes):
                for rnd in range(tree.rounds + 1):
                    val = metrics.prefix_kl(dist, p, q, rnd)
                    kl_rows.append([model_name, p, q, rnd, val])
    kl_path = os.path.join(args.out_dir, "kl.csv")
    _write_csv(kl_path, _meta(args, "metrics"), ["model", "label_p", "label_q", "round", "kl_nats"], kl_rows)
    print(f"wrote {post_path} and {kl_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coherentrx",
        description="Design and evaluate adaptive photon-counting receivers.",
    )
    parser.add_argument("--version", action="version", version=f"coherentrx {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_opt = sub.add_parser("optimize", help="learn a receiver for a noise model")
    p_opt.add_argument("--encoding", choices=sorted(_ENCODINGS), required=True)
    p_opt.add_argument("--rounds", type=int, required=True, help="processing rounds N (>= 1)")
    p_opt.add_argument("--arity", type=int, required=True, help="outcome classes M (>= 2)")
    p_opt.add_argument("--mean-photon", type=float, required=True)
    _add_noise_flags(p_opt)
    _add_formulator_flags(p_opt)
    p_opt.add_argument("--batch", type=int, default=16, help="noise draws per learning iteration")
    p_opt.add_argument("--seed", type=int, default=0)
    p_opt.add_argument("--out", required=True, help="receiver-spec JSON path")
    p_opt.add_argument("--trace", default=None, help="trace CSV path (default: <out>_trace.csv)")
    p_opt.set_defaults(func=cmd_optimize)

    p_eval = sub.add_parser("evaluate", help="error-rate sweep of a stored receiver")
    p_eval.add_argument("--spec", required=True, help="receiver-spec JSON from 'optimize'")
    p_eval.add_argument("--sweep", type=_parse_sweep, default=None, help="'a,b,c' or start:stop:num")
    p_eval.add_argument("--mean-photon", type=float, default=None)
    p_eval.add_argument("--mc-samples", type=int, default=100_000)
    p_eval.add_argument("--batch", type=int, default=32,
                        help="noise draws for the exact average (and per learning iteration with --reoptimize)")
    p_eval.add_argument("--reoptimize", action="store_true", help="re-learn the receiver at every sweep point")
    _add_formulator_flags(p_eval)
    p_eval.add_argument("--seed", type=int, default=0)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_evaluate)

    p_base = sub.add_parser("baseline", help="reference bounds and receivers")
    p_base.add_argument("--receivers", default="helstrom,homodyne,kennedy", help=f"comma list from {_BASELINE_CHOICES}")
    p_base.add_argument("--encoding", choices=sorted(_ENCODINGS), default="bpsk")
    p_base.add_argument("--rounds", type=int, default=4)
    p_base.add_argument("--arity", type=int, default=2)
    p_base.add_argument("--sweep", type=_parse_sweep, required=True)
    p_base.add_argument("--batch", type=int, default=32)
    _add_noise_flags(p_base)
    p_base.add_argument("--seed", type=int, default=0)
    p_base.add_argument("--out-dir", required=True)
    p_base.set_defaults(func=cmd_baseline)

    p_met = sub.add_parser("metrics", help="posterior and KL diagnostics of a receiver")
    p_met.add_argument("--spec", required=True)
    p_met.add_argument("--batch", type=int, default=32)
    p_met.add_argument("--seed", type=int, default=0)
    p_met.add_argument("--out-dir", required=True)
    p_met.set_defaults(func=cmd_metrics)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "evaluate" and args.sweep is None and args.mean_photon is None:
        parser.error("evaluate needs --sweep or --mean-photon")
    try:
        return args.func(args)
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: cannot read input file: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
