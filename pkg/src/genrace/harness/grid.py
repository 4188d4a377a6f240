"""Hyperparameter grid search on T1 utility after a short training budget."""
from __future__ import annotations

import itertools
import json
import logging
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from ..bitspace import TrainingSet
from ..metrics import run_track1
from .config import RaceConfig, apply_overrides
from .race import replica_seeds
from .registry import build_model

log = logging.getLogger(__name__)

LR_KEY = "Learning rate"


@dataclass
class GridPoint:
    values: dict
    U: float | None
    MV: int | None = None
    error: str | None = None


def expand_grid(grid: dict) -> list[dict]:
    if not grid or any(len(v) == 0 for v in grid.values()):
        raise ValueError("empty grid")
    names = list(grid)
    return [dict(zip(names, combo)) for combo in itertools.product(*(grid[n] for n in names))]


def rank_key(point: GridPoint, names: list[str]):
    """Lowest U first; failed or NaN points last; ties toward smaller widths, then smaller rate."""
    u = point.U
    bad = u is None or not math.isfinite(u)
    widths = tuple(point.values[n] for n in names if n != LR_KEY)
    return (bad, math.inf if bad else u, widths, point.values.get(LR_KEY, 0.0))


def score_point(tag: str, config: RaceConfig, epsilon: float, train: TrainingSet, values: dict,
                steps: int, seed: int = 0) -> GridPoint:
    hp = apply_overrides(tag, config.hyperparameters(tag, epsilon), values)
    init_seed, train_seed, eval_seed = replica_seeds(config.master_seed, tag, seed, epsilon)
    try:
        model = build_model(tag, config.n_var, hp, seed=init_seed)
        model.rng = np.random.default_rng(train_seed)
        for _ in range(steps):
            loss = float(model.train_step(train))
            if not math.isfinite(loss):
                raise FloatingPointError(f"training loss became {loss}")
        eval_rng = np.random.default_rng(eval_seed)
        rep = run_track1(lambda n: model.sample(n, eval_rng), train, config.Q)
    except Exception as exc:
        log.warning("grid point %s failed: %s", values, exc)
        return GridPoint(values, None, error=f"{type(exc).__name__}: {exc}")
    return GridPoint(values, rep.U, rep.MV)


def grid_search(config: RaceConfig, tag: str, train: TrainingSet, grid: dict | None = None,
                steps: int = 100, out_path: str | Path | None = None) -> tuple[dict, list[GridPoint]]:
    """Return the best point and the ranked score table (persisted when ``out_path`` is given)."""
    grid = grid if grid is not None else config.grid(tag)
    points = expand_grid(grid)
    names = list(grid)
    scored = [score_point(tag, config, train.epsilon, train, p, steps) for p in points]
    ranked = sorted(scored, key=lambda p: rank_key(p, names))
    if out_path is not None:
        out_path = Path(out_path)
        out_path.parent.mkdir(parents=True, exist_ok=True)
        doc = {"model": tag, "epsilon": train.epsilon, "steps": steps,
               "config_hash": config.config_hash(), "table": [asdict(p) for p in ranked]}
        out_path.write_text(json.dumps(doc, indent=1))
    return ranked[0].values, ranked
