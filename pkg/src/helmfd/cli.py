"""Command-line surface: generate / train / calibrate / detect / benchmark.

Every command echoes its fully resolved configuration (defaults, config-file
values, flags, seed) as JSON into its output directory, so any result can be
reproduced from the artifacts alone. Exit codes: 0 success, 2 usage error,
3 I/O error, 4 numerical error, 130 interrupted.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import baselines, detector, helm, metrics, synth
from .data import RngStream, read_csv_matrix, write_csv_matrix

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3
EXIT_NUMERICAL = 4
EXIT_INTERRUPT = 130

OUT_ENV = "HELMFD_OUT"


class UsageError(Exception):
    pass


def _load_config_file(path) -> dict:
    """Plain key = value lines; '#' starts a comment. Values stay strings and
    are coerced by argparse types when applied as defaults."""
    values = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key = value")
        key, val = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = val
    return values


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list) -> argparse.Namespace:
    """Config-file values act as defaults; explicit flags override them.
    Values are installed with set_defaults on the chosen subcommand, so
    argparse's own precedence (flag > default) does the rest. Namespace
    pre-seeding would not work here: subcommands parse into a fresh namespace
    and copy it over the outer one, clobbering anything seeded."""
    pre, _ = parser.parse_known_args(argv)
    if getattr(pre, "config", None):
        raw = _load_config_file(pre.config)
        subs = next(a for a in parser._actions
                    if isinstance(a, argparse._SubParsersAction))
        sub = subs.choices[pre.command]
        types = {a.dest: a.type for a in sub._actions}
        flags = {a.dest for a in sub._actions
                 if isinstance(a, (argparse._StoreTrueAction, argparse._StoreFalseAction))}
        for key, val in raw.items():
            if key not in types and key not in flags:
                raise UsageError(f"unknown config key: {key}")
            if key in flags:
                sub.set_defaults(**{key: val.lower() in ("1", "true", "yes", "on")})
            else:
                conv = types.get(key) or str
                try:
                    sub.set_defaults(**{key: conv(val)})
                except ValueError as exc:
                    raise UsageError(f"bad value for {key}: {val}") from exc
    return parser.parse_args(argv)


def _echo_config(outdir: Path, command: str, args: argparse.Namespace,
                 extra: dict | None = None) -> None:
    doc = {"command": command}
    doc.update({k: v for k, v in sorted(vars(args).items()) if k != "func"})
    if extra:
        doc.update(extra)
    with open(outdir / f"{command}_config.json", "w") as fh:
        json.dump(doc, fh, indent=1, default=str)
        fh.write("\n")


def _outdir(args, required=True) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        if required:
            raise UsageError(f"--out is required (or set {OUT_ENV})")
        return Path(".")
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _read_matrix(path):
    try:
        return read_csv_matrix(path)
    except OSError as exc:
        raise _IoError(str(exc)) from exc
    except ValueError as exc:
        raise _IoError(f"{path}: {exc}") from exc


class _IoError(Exception):
    pass


def _parse_floats(text: str) -> tuple:
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not a float list: {text!r}") from exc


def _parse_ints(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"not an int list: {text!r}") from exc


# --- generate ---------------------------------------------------------------

def cmd_generate(args) -> int:
    try:
        spec = synth.GeneratorSpec(n=args.n, reading=args.reading,
                                   seed=args.seed, allow_any_n=args.allow_any_n)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    outdir = _outdir(args)
    csv_path = outdir / "data.csv"
    if csv_path.exists() and not args.force:
        raise _IoError(f"{csv_path} exists; pass --force to overwrite")
    ds = synth.generate(spec, RngStream(args.seed, (0, args.rep)))
    synth.write_dataset(ds, csv_path, outdir / "provenance.json")
    splits = synth.render_splits(ds)
    write_csv_matrix(outdir / "train.csv", splits["train"])
    write_csv_matrix(outdir / "val.csv", splits["val"])
    write_csv_matrix(outdir / "fp_test.csv", splits["fp_test"])
    for f, block in enumerate(splits["fault_tests"], start=1):
        write_csv_matrix(outdir / f"fault{f}.csv", block)
    _echo_config(outdir, "generate", args)
    print(f"wrote {csv_path} ({ds.X.shape[0]}x{ds.X.shape[1]}) and split files")
    return EXIT_OK


# --- train ------------------------------------------------------------------

def cmd_train(args) -> int:
    _, X = _read_matrix(args.data)
    try:
        cfg = helm.HelmConfig(layer_sizes=args.layers, lam=args.lam, C=args.C,
                              ensemble_size=args.ensemble, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    stream = RngStream(args.seed, (1, args.rep))
    members = helm.train_ensemble(X, cfg, stream)
    model_path = Path(args.model)
    model_path.parent.mkdir(parents=True, exist_ok=True)
    helm.save_ensemble(model_path, members)
    args_ns = argparse.Namespace(**{**vars(args), "layers": list(args.layers)})
    _echo_config(model_path.parent, "train", args_ns)
    print(f"trained {cfg.ensemble_size}-member ensemble on "
          f"{X.shape[0]}x{X.shape[1]} -> {model_path}")
    return EXIT_OK


# --- calibrate --------------------------------------------------------------

def cmd_calibrate(args) -> int:
    members, _ = _load_model(args.model)
    _, X = _read_matrix(args.data)
    _check_width(members, X, args.data)
    Y = helm.run_ensemble(members, X)
    cfg = detector.calibrate(Y, gamma=args.gamma, p=args.p)
    helm.save_ensemble(args.model, members,
                       detector={"gamma": cfg.gamma, "p": cfg.p,
                                 "threshold": cfg.threshold})
    _echo_config(Path(args.model).parent, "calibrate", args,
                 extra={"threshold": cfg.threshold})
    print(f"threshold = {cfg.threshold!r} (gamma={cfg.gamma:g}, p={cfg.p:g}) "
          f"-> {args.model}")
    return EXIT_OK


# --- detect -----------------------------------------------------------------

def cmd_detect(args) -> int:
    members, det = _load_model(args.model)
    if not det or det.get("threshold", 0.0) <= 0:
        raise UsageError(f"uncalibrated model: {args.model} "
                         "(run the calibrate command first)")
    _, X = _read_matrix(args.data)
    _check_width(members, X, args.data)
    outdir = _outdir(args)
    Y = helm.run_ensemble(members, X)
    cfg = detector.DetectorConfig(gamma=det["gamma"], p=det["p"],
                                  threshold=det["threshold"])
    dets = detector.decide(Y, cfg)
    detector.write_detections_csv(outdir / "detections.csv", dets)
    _echo_config(outdir, "detect", args, extra={"threshold": cfg.threshold})
    flagged = [d for d in dets if d.label == -1]
    line = (f"{len(dets)} points, {len(flagged)} flagged "
            f"({100.0 * len(flagged) / len(dets):.2f}%)")
    if flagged:
        mag = float(np.mean([d.magnification for d in flagged]))
        line += f", mean magnification over flagged {mag:.3f}"
    print(line)
    return EXIT_OK


def _load_model(path):
    try:
        return helm.load_ensemble(path)
    except OSError as exc:
        raise _IoError(str(exc)) from exc
    except (ValueError, KeyError, json.JSONDecodeError) as exc:
        raise _IoError(f"{path}: not a readable model file ({exc})") from exc


def _check_width(members, X, path) -> None:
    want = members[0].feature_dim()
    if X.shape[1] != want:
        raise UsageError(f"schema mismatch: model expects {want} columns, "
                         f"{path} has {X.shape[1]}")


# --- benchmark ----------------------------------------------------------------

def cmd_benchmark(args) -> int:
    import itertools

    outdir = _outdir(args)
    try:
        plan = metrics.BenchmarkPlan(
            n=args.n, reading=args.reading, seed=args.seed, reps=args.reps,
            gammas=args.gammas, p=args.p,
            models=tuple(m.strip() for m in args.models.split(",") if m.strip()),
            helm_cells=tuple(itertools.product(args.L1, args.L2, args.lam, args.C)),
            elm_cells=tuple(itertools.product(args.width, args.C)),
            pca_cells=tuple(itertools.product(args.l_pca, args.width, args.C)),
            ensemble_size=args.ensemble)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc

    def progress(rep):
        print(f"rep {rep + 1}/{plan.reps} done", file=sys.stderr, flush=True)

    interrupted = False
    try:
        report = metrics.run_benchmark(plan, jobs=args.jobs, progress=progress)
    except KeyboardInterrupt as exc:
        report = getattr(exc, "partial_report", metrics.ExperimentReport())
        interrupted = True

    report.to_csv(outdir / "report.csv")
    report.sweep_csv(outdir / "sweep.csv")
    report.timings_csv(outdir / "timings.csv")
    report.to_json(outdir / "records.json")
    _echo_config(outdir, "benchmark", args, extra={"partial": interrupted})
    if report.records:
        print(report.table())
        for model in plan.models:
            pick = metrics.winning_cells(report, model)
            print(f"best mean cell [{model}]: gamma={pick['mean']['gamma']:g} "
                  f"{pick['mean']['params']} "
                  f"(accuracy {100 * pick['mean']['accuracy']:.1f})")
    if interrupted:
        print("interrupted; partial results flushed", file=sys.stderr)
        return EXIT_INTERRUPT
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="helmfd",
        description="Hierarchical ELM fault detection: synthetic benchmark "
                    "generation, training, calibration, detection.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value file; flags override it")
        p.add_argument("--seed", type=int, default=0)

    g = sub.add_parser("generate", help="write a synthetic dataset + splits")
    common(g)
    g.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    g.add_argument("--n", type=int, default=5, help="number of base signals")
    g.add_argument("--reading", default="identity", choices=synth.READINGS)
    g.add_argument("--rep", type=int, default=0,
                   help="repetition index (selects the data substream)")
    g.add_argument("--force", action="store_true")
    g.add_argument("--allow-any-n", action="store_true")
    g.set_defaults(func=cmd_generate)

    t = sub.add_parser("train", help="train a HELM ensemble on healthy data")
    common(t)
    t.add_argument("--data", required=True, help="healthy CSV (training split)")
    t.add_argument("--model", required=True, help="output model JSON path")
    t.add_argument("--layers", type=_parse_ints, default=(20, 100),
                   help="autoencoder widths + head width, e.g. 20,100")
    t.add_argument("--lam", type=float, default=1e-2)
    t.add_argument("--C", type=float, default=1e-5)
    t.add_argument("--ensemble", type=int, default=5)
    t.add_argument("--rep", type=int, default=0,
                   help="repetition index (selects the training substream)")
    t.set_defaults(func=cmd_train)

    c = sub.add_parser("calibrate", help="set the detection threshold")
    common(c)
    c.add_argument("--model", required=True)
    c.add_argument("--data", required=True, help="disjoint healthy CSV")
    c.add_argument("--gamma", type=float, default=1.5)
    c.add_argument("--p", type=float, default=99.5)
    c.set_defaults(func=cmd_calibrate)

    d = sub.add_parser("detect", help="score a CSV with a calibrated model")
    common(d)
    d.add_argument("--model", required=True)
    d.add_argument("--data", required=True)
    d.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    d.set_defaults(func=cmd_detect)

    b = sub.add_parser("benchmark", help="repeated synthetic experiment")
    common(b)
    b.add_argument("--out", help=f"output directory (default ${OUT_ENV})")
    b.add_argument("--reps", type=int, default=20)
    b.add_argument("--n", type=int, default=5)
    b.add_argument("--reading", default="identity", choices=synth.READINGS)
    b.add_argument("--models", default="helm,elm,pca-elm")
    b.add_argument("--gammas", type=_parse_floats,
                   default=(1.0, 1.1, 1.2, 1.5, 1.7, 2.0, 2.5, 3.0))
    b.add_argument("--p", type=float, default=99.5)
    b.add_argument("--L1", type=_parse_ints, default=(20,),
                   help="first autoencoder widths (comma list sweeps a grid)")
    b.add_argument("--L2", type=_parse_ints, default=(100,),
                   help="second-layer widths (comma list)")
    b.add_argument("--lam", type=_parse_floats, default=(1e-2,),
                   help="autoencoder L1 weights (comma list)")
    b.add_argument("--C", type=_parse_floats, default=(1e-5,),
                   help="head ridge weights (comma list)")
    b.add_argument("--width", type=_parse_ints, default=(100,),
                   help="baseline hidden widths (comma list)")
    b.add_argument("--l-pca", type=_parse_ints, default=(10,),
                   help="principal-component counts (comma list)")
    b.add_argument("--ensemble", type=int, default=5)
    b.add_argument("--jobs", type=int, default=1)
    b.set_defaults(func=cmd_benchmark, seed=42)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = _apply_config_defaults(parser, list(sys.argv[1:] if argv is None else argv))
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _IoError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
