"""Experiment orchestration and report emission.

``run_experiment`` reproduces the benchmark protocol: per seed it shuffles
off a test split, trains the full-pool baseline, then runs one pool-based AL
loop per (strategy, fraction) cell where the fraction of the whole dataset is
the cell's total label budget.  Each cell yields one row carrying the final
accuracy, elapsed training + selection time, TAR, TTR, and the raw fields
they derive from, so every ratio is recomputable from the emitted report.

For the random strategy a budget of f*N reduces exactly to passive training
on a uniform f*N-record subset, which is the passive baseline the query
strategies are compared against.
"""

from __future__ import annotations

import csv
import io
import json
import time
import zlib
from dataclasses import asdict, dataclass, replace
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .dataset import (
    Dataset,
    IngestionConfig,
    SyntheticSpec,
    generate_synthetic,
    load_csv,
    round_half_up,
)
from .engine import (
    Clock,
    Oracle,
    PoolState,
    StoppingCriteria,
    oracle_label,
    run_pool_loop,
)
from .errors import ConfigError, EmptyReport
from .forest import ForestParams, evaluate_accuracy, fit_forest
from .metrics import TimingRecord, tar, ttr
from .rng import derive_seed, make_rng
from .strategies import StrategyConfig

DEFAULT_FRACTIONS = (0.005, 0.01, 0.02, 0.04, 0.08, 0.16, 0.32, 0.64)

FULL_BASELINE_NAME = "full"

REPORT_FIELDS = ("strategy", "fraction", "seed", "time_s", "accuracy", "tar", "ttr")
RAW_FIELDS = ("full_accuracy", "train_time_s", "select_time_s", "full_train_time_s")


@dataclass(frozen=True)
class CsvSource:
    path: str
    ingestion: IngestionConfig


@dataclass(frozen=True)
class ExperimentRow:
    """One benchmark cell: a strategy at a fraction under one seed."""

    strategy: str
    fraction: float
    seed: int
    time_s: float
    accuracy: float
    tar: float
    ttr: float
    full_accuracy: float
    train_time_s: float
    select_time_s: float
    full_train_time_s: float


@dataclass(frozen=True)
class ExperimentConfig:
    """Full description of a benchmark run.

    ``fractions`` are taken of the whole dataset and become label budgets for
    the pool loop; they must be strictly increasing and fit inside the train
    pool left after the test split.  ``stop`` adds extra criteria on top of
    the per-cell budget (the budget itself is always enforced).
    """

    source: Union[CsvSource, SyntheticSpec]
    strategies: Tuple[StrategyConfig, ...]
    seeds: Tuple[int, ...]
    learner: ForestParams = ForestParams(n_trees=50)
    test_fraction: float = 0.3
    fractions: Tuple[float, ...] = DEFAULT_FRACTIONS
    include_full_baseline: bool = True
    stop: Optional[StoppingCriteria] = None
    batch: int = 10
    seed_size: Optional[int] = None
    oracle_noise: float = 0.0
    output: Optional[str] = None
    format: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        object.__setattr__(self, "seeds", tuple(int(s) for s in self.seeds))
        object.__setattr__(self, "fractions", tuple(float(f) for f in self.fractions))
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        for f in self.fractions:
            if not 0 < f < 1:
                raise ConfigError(f"fractions must lie in (0, 1), got {f}")
        if any(b <= a for a, b in zip(self.fractions, self.fractions[1:])):
            raise ConfigError("fractions must be strictly increasing")
        if not 0 < self.test_fraction < 1:
            raise ConfigError("test_fraction must be in (0, 1)")
        if self.batch < 1:
            raise ConfigError("batch must be >= 1")
        if self.seed_size is not None and self.seed_size < 1:
            raise ConfigError("seed_size must be >= 1 when given")
        if not 0 <= self.oracle_noise <= 1:
            raise ConfigError("oracle_noise must be in [0, 1]")
        if self.format not in ("csv", "json", "md"):
            raise ConfigError(f"unknown report format {self.format!r}")
        names = [s.display_name for s in self.strategies]
        if len(set(names)) != len(names):
            raise ConfigError("strategy names collide; set distinct names")
        if FULL_BASELINE_NAME in names:
            raise ConfigError(f"{FULL_BASELINE_NAME!r} is reserved for the baseline")


def _load_source(source) -> Dataset:
    if isinstance(source, SyntheticSpec):
        return generate_synthetic(source)
    return load_csv(source.path, source.ingestion)


def run_experiment(config: ExperimentConfig,
                   clock: Optional[Clock] = None) -> List[ExperimentRow]:
    """Run every (strategy, fraction, seed) cell plus per-seed full baselines.

    Rows come back sorted by (strategy, fraction, seed).  Accuracy, TAR, and
    the raw fields are independent of cell execution order; only the time
    fields depend on the machine.
    """
    clock = clock or time.perf_counter
    dataset = _load_source(config.source)
    n = len(dataset)
    n_classes = dataset.schema.n_classes
    rows: List[ExperimentRow] = []
    for seed in config.seeds:
        perm = np.arange(n)
        make_rng(seed, 10).shuffle(perm)
        n_test = round_half_up(config.test_fraction * n)
        if not 0 < n_test < n:
            raise ConfigError("test split leaves no training pool")
        test_idx = perm[:n_test]
        pool_idx = perm[n_test:]
        oracle = Oracle(dataset, noise_rate=config.oracle_noise, seed=seed)

        t0 = clock()
        full_labels = [oracle_label(oracle, int(i)) for i in pool_idx]
        full_model = fit_forest(
            Dataset(dataset.schema, dataset.features[pool_idx], full_labels),
            config.learner, derive_seed(seed, 14))
        full_train_time = clock() - t0
        full_acc = evaluate_accuracy(full_model, dataset.subset(test_idx))

        if config.include_full_baseline:
            rows.append(ExperimentRow(
                strategy=FULL_BASELINE_NAME, fraction=1.0, seed=seed,
                time_s=full_train_time, accuracy=full_acc, tar=1.0, ttr=1.0,
                full_accuracy=full_acc, train_time_s=full_train_time,
                select_time_s=0.0, full_train_time_s=full_train_time))

        for strategy in config.strategies:
            # cell seeds derive from content, not list position, so cells are
            # identical however the config orders them or the runner schedules them
            name_tag = zlib.crc32(strategy.display_name.encode("utf-8"))
            for fraction in config.fractions:
                budget = round_half_up(fraction * n)
                if budget < 1:
                    raise ConfigError(
                        f"fraction {fraction} yields an empty label budget")
                if budget > len(pool_idx):
                    raise ConfigError(
                        f"budget {budget} exceeds the train pool "
                        f"({len(pool_idx)} records)")
                n_seed_set = config.seed_size or max(n_classes, config.batch)
                n_seed_set = min(budget, n_seed_set)
                # the seed set depends only on (seed, budget): paired across strategies
                picks = make_rng(seed, 11, budget).choice(
                    len(pool_idx), size=n_seed_set, replace=False)
                labeled = pool_idx[np.sort(picks)]
                mask = np.ones(len(pool_idx), dtype=bool)
                mask[picks] = False
                unlabeled = pool_idx[mask]
                pool = PoolState(dataset, tuple(labeled), tuple(unlabeled),
                                 tuple(test_idx))
                remaining = budget - n_seed_set
                if config.stop is None:
                    stop = StoppingCriteria(max_queries=remaining)
                else:
                    mq = remaining if config.stop.max_queries is None \
                        else min(config.stop.max_queries, remaining)
                    stop = replace(config.stop, max_queries=mq)
                history = run_pool_loop(
                    pool, strategy, config.learner, oracle, config.batch,
                    stop, derive_seed(seed, 12, name_tag, budget), clock=clock)
                train_t = history.total_training_time
                select_t = history.total_selection_time
                acc = history.final_accuracy
                rows.append(ExperimentRow(
                    strategy=strategy.display_name, fraction=fraction,
                    seed=seed, time_s=train_t + select_t, accuracy=acc,
                    tar=tar(acc, full_acc),
                    ttr=ttr(TimingRecord(train_t, select_t, full_train_time)),
                    full_accuracy=full_acc, train_time_s=train_t,
                    select_time_s=select_t,
                    full_train_time_s=full_train_time))
    rows.sort(key=lambda r: (r.strategy, r.fraction, r.seed))
    return rows


def _fmt(x: float) -> str:
    return f"{x:.4f}"


def rows_to_csv(rows: Sequence[ExperimentRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(REPORT_FIELDS)
    for r in rows:
        writer.writerow([r.strategy, _fmt(r.fraction), r.seed, _fmt(r.time_s),
                         _fmt(r.accuracy), _fmt(r.tar), _fmt(r.ttr)])
    return buf.getvalue()


def rows_to_json(rows: Sequence[ExperimentRow]) -> str:
    payload = []
    for r in rows:
        entry = asdict(r)
        payload.append({k: entry[k] for k in REPORT_FIELDS + RAW_FIELDS})
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def rows_to_md(rows: Sequence[ExperimentRow]) -> str:
    """One table per strategy; numeric rows labeled explicitly, never paired.

    Cells average over seeds when a cell was run under several seeds.
    """
    strategies = sorted({r.strategy for r in rows})
    lines = []
    for name in strategies:
        subset = [r for r in rows if r.strategy == name]
        fractions = sorted({r.fraction for r in subset})
        lines.append(f"## {name}")
        lines.append("")
        header = ["metric"] + [_fmt(f) for f in fractions]
        lines.append("| " + " | ".join(header) + " |")
        lines.append("|" + "---|" * len(header))
        for label, attr in (("Accuracy", "accuracy"), ("Time (s)", "time_s"),
                            ("TAR", "tar"), ("TTR", "ttr")):
            cells = []
            for f in fractions:
                vals = [getattr(r, attr) for r in subset if r.fraction == f]
                cells.append(_fmt(sum(vals) / len(vals)))
            lines.append("| " + " | ".join([label] + cells) + " |")
        lines.append("")
    return "\n".join(lines)


def emit_report(rows: Sequence[ExperimentRow], format: str, path) -> None:
    """Write rows to ``path`` as csv, json, or md (UTF-8)."""
    if not rows:
        raise EmptyReport("no rows to report")
    if format == "csv":
        text = rows_to_csv(rows)
    elif format == "json":
        text = rows_to_json(rows)
    elif format == "md":
        text = rows_to_md(rows)
    else:
        raise ConfigError(f"unknown report format {format!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)


def load_rows(path) -> List[ExperimentRow]:
    """Read rows back from a json report (the re-render input format)."""
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if not isinstance(payload, list) or not payload:
        raise EmptyReport(f"{path}: no report rows")
    rows = []
    for entry in payload:
        try:
            rows.append(ExperimentRow(**{k: entry[k]
                                         for k in REPORT_FIELDS + RAW_FIELDS}))
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"{path}: malformed report row: {exc}") from exc
    return rows
