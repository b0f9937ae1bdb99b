"""Command-line entry point: ``peergrade <command> [flags]``.

Exit codes: 0 success, 1 invalid input, 2 a reproduction check failed.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import reproduce
from .graders import EmpiricalGraderTable, GraderModel, estimate_matrix
from .noise import NoiseMatrixError, identity, load_matrix, prepare, save_matrix
from .optimizer import DEFAULT_THRESHOLD, optimize
from .simulation import BundleGraphError, ExamConfig, run_batch
from .theory import STANDARD_OBJECTIVES, cache_path, cached_weight_matrix, parse_objective, predicted_performance
from .typespace import TypeOrdering, borda_ordering

EXIT_OK, EXIT_INVALID, EXIT_REPRO = 0, 1, 2

log = logging.getLogger("peergrade")


class InputError(Exception):
    pass


def _objectives(text: str) -> list[str]:
    names = list(STANDARD_OBJECTIVES) if text == "all" else [s.strip() for s in text.split(";" if "custom:" in text else ",")]
    for name in names:
        parse_objective(name)
    return names


def _matrix(source: str, k: int | None):
    if source.lower() == "identity":
        if k is None:
            raise InputError("--matrix identity needs --k")
        return identity(k)
    m = prepare(load_matrix(source))
    if k is not None and m.k != k:
        raise InputError(f"matrix {source!r} is {m.k}x{m.k} but --k is {k}")
    return m


def _grader_model(spec: str, k: int) -> GraderModel:
    """perfect | mallows | matrix:<source>[:sequential] | table:<csv>"""
    if spec == "perfect":
        return GraderModel.perfect()
    if spec in ("mallows", "mallows-quality"):
        return GraderModel.mallows()
    if spec.startswith("matrix:"):
        source, _, sampler = spec[len("matrix:"):].partition("@")
        return GraderModel.marginal(_matrix(source, k), sampler or "birkhoff")
    if spec.startswith("table:"):
        return GraderModel.empirical(EmpiricalGraderTable.from_csv(spec[len("table:"):]))
    raise InputError(f"unknown grader model {spec!r}")


def _load_rule(text: str, k: int, args):
    if text == "borda":
        return "borda"
    if text == "borda-lex":
        return borda_ordering(k)
    if text.startswith("opt"):
        _, _, objective = text.partition(":")
        m = _matrix(args.matrix, k)
        return optimize(k, m, parse_objective(objective or "all2all"), args.threshold, args.cache_dir).ordering
    path = Path(text)
    if not path.exists():
        raise InputError(f"rule {text!r} is neither borda, opt[:objective] nor an ordering file")
    return TypeOrdering.from_json(json.loads(path.read_text()))


def _write(path, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _pct(x, places) -> str:
    return f"{100 * float(x):.{places}f}"


# --------------------------------------------------------------------------- commands

def cmd_weights(args) -> int:
    m = _matrix(args.matrix, args.k)
    cache = args.cache_dir or "weights-cache"
    for name in _objectives(args.objective):
        spec = parse_objective(name)
        w = cached_weight_matrix(m.k, m, spec, cache, log=log.warning)
        total, mass = w.total(), w.mass()
        status = "ok" if total == mass else "MISMATCH"
        print(f"{name}: {len(w.types)}x{len(w.types)} weights -> {cache_path(cache, m.k, m, spec)}")
        print(f"  total weight {total} = {float(total):.{args.precision}f}, objective mass {mass} [{status}]")
        if total != mass:
            return EXIT_INVALID
    return EXIT_OK


def cmd_optimize(args) -> int:
    m = _matrix(args.matrix, args.k)
    names = _objectives(args.objective)
    report = {}
    for name in names:
        result = optimize(m.k, m, parse_objective(name), args.threshold, args.cache_dir)
        borda = predicted_performance("borda", result.weights)
        report[name] = result.to_json(args.precision)
        report[name]["borda_predicted_percent"] = round(100 * float(borda), args.precision)
        hist = result.plan.histogram()
        print(f"{name}: optimal {_pct(result.performance, args.precision)}%  borda {_pct(borda, args.precision)}%"
              f"  components " + " ".join(f"{b}:{c}" for b, c in hist.items())
              + ("" if result.all_exact else "  (some components ordered by Borda fallback)"))
    if args.out:
        out = report[names[0]] if len(names) == 1 else report
        _write(args.out, json.dumps(out, indent=1) + "\n")
    return EXIT_OK


def cmd_simulate(args) -> int:
    k = args.k or 6
    model = _grader_model(args.model, k)
    rules = {label: _load_rule(label, k, args) for label in args.rules.split(",")}
    specs = [parse_objective(n) for n in _objectives(args.objective)]
    cfg = ExamConfig(args.n, k, model, seed=args.seed, runs=args.runs)
    batch = run_batch(cfg, rules, specs, threads=args.threads, dump_path=args.dump)
    for row in batch.summary():
        print(f"{row['rule']:>12} {row['objective']:>8}  mean {100 * row['mean']:.{args.precision}f}%"
              f"  std {100 * row['std']:.{args.precision}f}  runs {row['runs']}")
    if args.out:
        batch.write_csv(args.out)
    return EXIT_OK


def cmd_estimate_noise(args) -> int:
    k = args.k or 6
    model = _grader_model(args.model, k)
    m = estimate_matrix(model, k, args.samples, np.random.default_rng(args.seed))
    m = prepare(m)
    if args.out:
        save_matrix(m, args.out)
    for row in m.to_float():
        print(" ".join(f"{x:.{args.precision}f}" for x in row))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    ctx = reproduce.Context(cache_dir=args.cache_dir, threshold=args.threshold, n=args.n, runs=args.runs,
                            seed=args.seed, threads=args.threads, log=lambda s: log.info(s))
    failed = 0
    for target in args.targets:
        print(f"== {target}")
        if target == "fig5":
            curves = reproduce.fig5_curves(ctx)
            checks = reproduce.fig5(ctx, curves)
            if args.out:
                _write_curves(Path(args.out), curves)
        else:
            checks = reproduce.RUNNERS[target](ctx)
        for c in checks:
            print(c.line())
        bad = sum(1 for c in checks if c.gating and not c.passed)
        print(f"-- {target}: {sum(c.passed for c in checks if c.gating)}/{sum(c.gating for c in checks)} checks passed")
        failed += bad
    return EXIT_REPRO if failed else EXIT_OK


def _write_curves(path: Path, curves) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("scenario", "curve", "x", "y"))
        for scenario, group in curves.items():
            for name, points in group.items():
                for x, y in points:
                    w.writerow((scenario, name, x, f"{y:.6f}"))


# --------------------------------------------------------------------------- parser

def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON file whose keys mirror the flags")
    p.add_argument("--k", type=int)
    p.add_argument("--matrix", default="mallows6", help="built-in name, 'identity', or matrix JSON path")
    p.add_argument("--objective", default="all2all", help="comma list of objectives, or 'all'")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--n", type=int, default=2000)
    p.add_argument("--threshold", type=int, default=DEFAULT_THRESHOLD)
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--cache-dir")
    p.add_argument("--out")
    p.add_argument("--precision", type=int, default=4)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="peergrade", description="Optimal type-ordering rules for ordinal peer grading")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("weights", help="compute and cache the pairwise type weights")
    _common(p)
    p.set_defaults(func=cmd_weights)

    p = sub.add_parser("optimize", help="optimal type ordering and its predicted performance")
    _common(p)
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("simulate", help="Monte-Carlo exams")
    _common(p)
    p.add_argument("--model", default="mallows", help="perfect | mallows | matrix:<source>[@sequential] | table:<csv>")
    p.add_argument("--rules", default="borda,opt", help="comma list of borda, borda-lex, opt[:objective] or ordering files")
    p.add_argument("--dump", help="write every exam as JSON lines")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-noise", help="noise matrix from sampled graders")
    _common(p)
    p.add_argument("--model", default="mallows")
    p.add_argument("--samples", type=int, default=1000)
    p.set_defaults(func=cmd_estimate_noise)

    p = sub.add_parser("reproduce", help="compare against the published tables")
    _common(p)
    p.add_argument("targets", nargs="+", choices=reproduce.TARGETS)
    p.set_defaults(func=cmd_reproduce)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    data = json.loads(Path(args.config).read_text())
    known = vars(args)
    unknown = [key for key in data if key.replace("-", "_") not in known]
    if unknown:
        raise InputError(f"unknown config keys: {', '.join(unknown)}")
    # flags given on the command line win over the file
    explicit = set()
    for token in argv:
        if token.startswith("--"):
            explicit.add(token[2:].split("=")[0].replace("-", "_"))
    for key, value in data.items():
        key = key.replace("-", "_")
        if key not in explicit:
            setattr(args, key, value)
    return args


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
        return args.func(args)
    except (InputError, NoiseMatrixError, KeyError, ValueError, FileNotFoundError, BundleGraphError,
            json.JSONDecodeError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
