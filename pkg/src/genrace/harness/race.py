"""Train every (epsilon, model, seed) replica and log periodic evaluations.

Run directory layout::

    config.txt          canonical configuration
    manifest.json       config hash and status
    datasets/eps_<e>.txt
    records.jsonl       one JSON object per (model, seed, epoch, track)
    failures.jsonl      one JSON object per failed replica
"""
from __future__ import annotations

import json
import logging
import math
import shutil
import time
import traceback
import zlib
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..bitspace import TrainingSet, build_training_set
from ..metrics import run_track1, run_track2
from .config import RaceConfig
from .registry import build_model

log = logging.getLogger(__name__)

RECORDS = "records.jsonl"
FAILURES = "failures.jsonl"
MANIFEST = "manifest.json"


class RunExistsError(RuntimeError):
    pass


def replica_seeds(master_seed: int, tag: str, seed_index: int, epsilon: float) -> tuple[int, int, int]:
    """Independent (init, train, eval) seeds for one replica.

    Keys are hashed from the tag and epsilon rather than list positions, so
    adding a model or a data portion leaves the other replicas untouched.
    """
    eps_key = zlib.crc32(repr(float(epsilon)).encode())
    ss = np.random.SeedSequence(master_seed, spawn_key=(zlib.crc32(tag.encode()), eps_key, seed_index))
    return tuple(int(c.generate_state(1)[0]) for c in ss.spawn(3))


def dataset_path(run_dir: Path, epsilon: float) -> Path:
    return Path(run_dir) / "datasets" / f"eps_{epsilon!r}.txt"


def build_datasets(config: RaceConfig) -> dict[float, TrainingSet]:
    return {eps: build_training_set(config.n_var, eps, config.dataset_seed,
                                    target_min_cost=config.target_min_cost)
            for eps in config.epsilons}


@dataclass
class ReplicaJob:
    tag: str
    epsilon: float
    seed: int
    hyperparameters: dict
    n_var: int
    n_epochs: int
    eval_epochs: list
    Q: int
    Q_u: int
    draw_cap: int
    batch: int
    master_seed: int
    config_hash: str


@dataclass
class ReplicaResult:
    job: ReplicaJob
    records: list = field(default_factory=list)
    error: str | None = None
    failed_epoch: int | None = None


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, np.generic):
        return value.item()
    return value


def evaluate(model, train: TrainingSet, rng: np.random.Generator, *, Q: int, Q_u: int,
             draw_cap: int, batch: int) -> tuple:
    """T1 and T2 reports for the model's current state."""
    sampler = lambda n: model.sample(n, rng)  # noqa: E731
    t1 = run_track1(sampler, train, Q)
    t2 = run_track2(sampler, train, Q_u, draw_cap, min(batch, draw_cap))
    return t1, t2


def run_replica(job: ReplicaJob, train: TrainingSet, emit=None) -> ReplicaResult:
    """Train one replica; ``emit(record)`` is called as each record is produced."""
    result = ReplicaResult(job)
    init_seed, train_seed, eval_seed = replica_seeds(job.master_seed, job.tag, job.seed, job.epsilon)
    eval_rng = np.random.default_rng(eval_seed)
    evals = set(job.eval_epochs)
    start = time.perf_counter()
    epoch, loss = 0, None

    def record(epoch, loss):
        t1, t2 = evaluate(model, train, eval_rng, Q=job.Q, Q_u=job.Q_u,
                          draw_cap=job.draw_cap, batch=job.batch)
        wall_ms = (time.perf_counter() - start) * 1e3
        for rep in (t1, t2):
            rep.model, rep.seed, rep.epoch = job.tag, job.seed, epoch
            row = {k: _clean(v) for k, v in rep.to_dict().items()}
            row.update(epsilon=job.epsilon, loss=_clean(loss), wall_ms=round(wall_ms, 3),
                       config_hash=job.config_hash)
            result.records.append(row)
            if emit is not None:
                emit(row)

    try:
        model = build_model(job.tag, job.n_var, job.hyperparameters, seed=init_seed)
        model.rng = np.random.default_rng(train_seed)
        if 0 in evals:
            record(0, None)
        for epoch in range(1, job.n_epochs + 1):
            loss = float(model.train_step(train))
            if not math.isfinite(loss):
                raise FloatingPointError(f"training loss became {loss}")
            if epoch in evals:
                record(epoch, loss)
    except Exception as exc:  # isolate the replica, keep the race going
        result.error = f"{type(exc).__name__}: {exc}"
        result.failed_epoch = epoch
        log.error("replica %s eps=%s seed=%d failed at epoch %d: %s",
                  job.tag, job.epsilon, job.seed, epoch, result.error)
        log.debug("%s", traceback.format_exc())
    return result


def _run_replica_quiet(job, train):
    return run_replica(job, train)


@dataclass
class RaceResult:
    run_dir: Path
    n_records: int
    failures: list

    @property
    def ok(self) -> bool:
        return not self.failures


def _prepare_run_dir(run_dir: Path, config: RaceConfig, force: bool) -> None:
    manifest = run_dir / MANIFEST
    if manifest.exists():
        old = json.loads(manifest.read_text()).get("config_hash")
        if not force:
            what = "the same configuration" if old == config.config_hash() else f"configuration {old}"
            raise RunExistsError(f"{run_dir} already holds a run of {what}; pass --force to overwrite")
        for name in (RECORDS, FAILURES, MANIFEST, "aggregate.json"):
            (run_dir / name).unlink(missing_ok=True)
        shutil.rmtree(run_dir / "datasets", ignore_errors=True)
        shutil.rmtree(run_dir / "export", ignore_errors=True)
    run_dir.mkdir(parents=True, exist_ok=True)


def run_race(config: RaceConfig, run_dir: str | Path | None = None, force: bool = False,
             workers: int | None = None) -> RaceResult:
    run_dir = Path(run_dir or config.out)
    _prepare_run_dir(run_dir, config, force)
    chash = config.config_hash()
    (run_dir / "config.txt").write_text(config.to_text())
    manifest = {"config_hash": chash, "status": "running", "started": time.time()}
    (run_dir / MANIFEST).write_text(json.dumps(manifest, indent=1))

    datasets = build_datasets(config)
    for eps, train in datasets.items():
        path = dataset_path(run_dir, eps)
        path.parent.mkdir(parents=True, exist_ok=True)
        train.save(path)
        log.info("eps=%s: %d training strings, min cost %d, beta=%.4g",
                 eps, train.size, train.min_cost, train.beta)

    jobs = [
        ReplicaJob(tag, eps, seed, config.hyperparameters(tag, eps), config.n_var, config.n_epochs,
                    config.eval_epochs, config.Q, config.Q_u, config.draw_cap, config.batch,
                    config.master_seed, chash)
        for eps in config.epsilons for tag in config.models for seed in range(config.n_seeds)
    ]
    workers = workers or config.workers
    n_records = 0
    failures = []
    # a single appender owns both files
    with open(run_dir / RECORDS, "a") as rec_f, open(run_dir / FAILURES, "a") as fail_f:
        def emit(row):
            nonlocal n_records
            rec_f.write(json.dumps(row, sort_keys=True) + "\n")
            rec_f.flush()
            n_records += 1

        def finish(res: ReplicaResult):
            if res.error is None:
                return
            s = res.job
            fail = {"model": s.tag, "epsilon": s.epsilon, "seed": s.seed,
                    "epoch": res.failed_epoch, "error": res.error, "config_hash": chash}
            failures.append(fail)
            fail_f.write(json.dumps(fail, sort_keys=True) + "\n")
            fail_f.flush()

        if workers <= 1:
            for job in jobs:
                log.info("replica %s eps=%s seed=%d", job.tag, job.epsilon, job.seed)
                finish(run_replica(job, datasets[job.epsilon], emit))
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_replica_quiet, s, datasets[s.epsilon]) for s in jobs]
                for fut in as_completed(futures):
                    res = fut.result()
                    for row in res.records:
                        emit(row)
                    finish(res)

    manifest.update(status="failed" if failures else "complete", finished=time.time(),
                    n_records=n_records, n_failures=len(failures))
    (run_dir / MANIFEST).write_text(json.dumps(manifest, indent=1))
    return RaceResult(run_dir, n_records, failures)


def load_records(run_dir: str | Path) -> list[dict]:
    path = Path(run_dir) / RECORDS
    if not path.exists():
        return []
    with open(path) as fh:
        return [json.loads(line) for line in fh if line.strip()]
