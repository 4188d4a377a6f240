"""``race`` command line entry point."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from ..bitspace import TrainingSet, build_training_set, parse_bitstring
from ..metrics import QueryBatch, run_track2, track1_report
from . import aggregate as agg
from .config import RaceConfig, ConfigError, load_config
from .grid import grid_search
from .race import RunExistsError, build_datasets, run_race

log = logging.getLogger("genrace")


def _load(path) -> RaceConfig:
    return load_config(path) if path else RaceConfig()


def cmd_run(args) -> int:
    config = _load(args.config)
    if args.models:
        config.models = [m.strip() for m in args.models.split(",") if m.strip()]
        config.validate()
    result = run_race(config, args.out or config.out, force=args.force, workers=args.workers)
    print(f"{result.n_records} records written to {result.run_dir}")
    for f in result.failures:
        print(f"FAILED {f['model']} eps={f['epsilon']} seed={f['seed']} epoch={f['epoch']}: {f['error']}")
    return 0 if result.ok else 1


def cmd_grid(args) -> int:
    config = _load(args.config)
    out_dir = Path(args.out or config.out)
    for eps, train in build_datasets(config).items():
        best, table = grid_search(config, args.model, train, steps=args.steps,
                                  out_path=out_dir / f"grid_{args.model}_eps{eps!r}.json")
        print(f"eps={eps} best {args.model}: {best}")
        for p in table:
            score = "failed" if p.U is None else f"U={p.U:.4g}"
            print(f"  {p.values}  {score}")
    return 0


def cmd_aggregate(args) -> int:
    _, best = agg.aggregate(args.run)
    print(agg.format_best_table(best))
    return 0


def cmd_export(args) -> int:
    for path in agg.export(args.run, args.format, args.out):
        print(path)
    return 0


def read_samples(path) -> np.ndarray:
    rows = [parse_bitstring(line.strip()) for line in Path(path).read_text().splitlines()
            if line.strip() and not line.startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no samples")
    if len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: samples have different lengths")
    return np.stack(rows)


def cmd_eval(args) -> int:
    train = TrainingSet.load(args.dataset)
    bits = read_samples(args.samples)
    if bits.shape[1] != train.n_var:
        raise ValueError(f"samples have {bits.shape[1]} bits, dataset has {train.n_var}")
    if args.track == "t1":
        report = track1_report(QueryBatch.from_bits(bits), train)
    else:
        # replay the file in order as if it were the sampler's output
        pos = 0

        def sampler(n):
            nonlocal pos
            chunk = bits[pos:pos + n]
            pos += n
            return chunk

        cap = min(args.draw_cap, len(bits))
        report = run_track2(sampler, train, args.q_u, cap, min(args.batch, cap))
    print(json.dumps(report.to_dict(), indent=1))
    return 0


def cmd_dataset(args) -> int:
    train = build_training_set(args.n_var, args.epsilon, args.seed, target_min_cost=args.target_min_cost)
    train.save(args.out)
    print(f"{train.size} strings, min cost {train.min_cost}, written to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="race", description="Generative-model generalization race")
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train and evaluate every replica")
    r.add_argument("--config")
    r.add_argument("--force", action="store_true", help="overwrite an existing run directory")
    r.add_argument("--models", help="comma-separated subset of model tags")
    r.add_argument("--out", help="run directory (default: config 'out')")
    r.add_argument("--workers", type=int)
    r.set_defaults(func=cmd_run)

    g = sub.add_parser("grid", help="grid search on T1 utility")
    g.add_argument("--config")
    g.add_argument("--model", required=True)
    g.add_argument("--steps", type=int, default=100)
    g.add_argument("--out")
    g.set_defaults(func=cmd_grid)

    a = sub.add_parser("aggregate", help="seed averages and best-over-training table")
    a.add_argument("--run", required=True)
    a.set_defaults(func=cmd_aggregate)

    e = sub.add_parser("export", help="write plot-ready tables")
    e.add_argument("--run", required=True)
    e.add_argument("--format", required=True, choices=agg.FORMATS)
    e.add_argument("--out")
    e.set_defaults(func=cmd_export)

    v = sub.add_parser("eval", help="score externally produced samples")
    v.add_argument("--samples", required=True, help="one bitstring per line")
    v.add_argument("--dataset", required=True, help="training set file")
    v.add_argument("--track", required=True, choices=("t1", "t2"))
    v.add_argument("--q-u", type=int, default=100)
    v.add_argument("--draw-cap", type=int, default=10_000)
    v.add_argument("--batch", type=int, default=1_000)
    v.set_defaults(func=cmd_eval)

    d = sub.add_parser("dataset", help="build and save a training set")
    d.add_argument("--n-var", type=int, default=20)
    d.add_argument("--epsilon", type=float, required=True)
    d.add_argument("--seed", type=int, default=0)
    d.add_argument("--target-min-cost", type=int)
    d.add_argument("--out", required=True)
    d.set_defaults(func=cmd_dataset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, RunExistsError, agg.EmptyRunError, ValueError, FileNotFoundError) as exc:
        print(f"race: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
