"""Active-learning loops: pool-based sampling and stream-based selective sampling.

Both loops share the same skeleton: fit on the labeled set, evaluate on the
held-out test set, record an iteration, check the stopping criteria, acquire
more labels from the oracle, repeat.  Every training label flows through the
oracle (so annotation noise applies to the seed set too); test labels are
always ground truth.

All timing flows through an injectable monotonic clock so that time-dependent
behavior is testable, and every random decision derives from explicit seeds,
making a run's history (minus wall-clock fields) a pure function of its inputs.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from enum import Enum
from typing import Callable, List, Optional, Tuple

import numpy as np

from .dataset import Dataset, round_half_up
from .errors import (
    EmptyStream,
    IndexOutOfRange,
    InvalidPool,
    InvalidThreshold,
    NoStoppingCriterion,
)
from .forest import ForestParams, evaluate_accuracy, fit_committee, fit_forest
from .rng import derive_seed, make_rng
from .strategies import (
    LalRegressor,
    StrategyConfig,
    needs_committee,
    select_batch,
    train_lal_regressor,
    uncertainty_scores,
)

Clock = Callable[[], float]


@dataclass(frozen=True)
class PoolState:
    """Partition of a dataset into labeled, unlabeled, and test index sets.

    The three sets must be pairwise disjoint; together they are the run's
    index universe.  Index tuples are stored sorted, which also fixes the
    tie-break order used by batch selection.
    """

    dataset: Dataset
    labeled: Tuple[int, ...]
    unlabeled: Tuple[int, ...]
    test: Tuple[int, ...]

    def __post_init__(self):
        lab = tuple(sorted(int(i) for i in self.labeled))
        unl = tuple(sorted(int(i) for i in self.unlabeled))
        tst = tuple(sorted(int(i) for i in self.test))
        object.__setattr__(self, "labeled", lab)
        object.__setattr__(self, "unlabeled", unl)
        object.__setattr__(self, "test", tst)
        combined = lab + unl + tst
        if len(set(combined)) != len(combined):
            raise InvalidPool("labeled, unlabeled, and test sets overlap")
        n = len(self.dataset)
        if combined and (min(combined) < 0 or max(combined) >= n):
            raise InvalidPool("pool index outside the dataset")


def make_pool(dataset: Dataset, test_fraction: float, n_seed: int,
              seed: int) -> PoolState:
    """Shuffle a dataset into (test, seed-labeled, unlabeled) index sets."""
    n = len(dataset)
    if n == 0:
        raise InvalidPool("cannot build a pool from an empty dataset")
    n_test = round_half_up(test_fraction * n)
    if not 0 < n_test < n:
        raise InvalidPool(f"test fraction {test_fraction} leaves no train pool")
    if not 0 < n_seed <= n - n_test:
        raise InvalidPool(f"seed size {n_seed} does not fit the train pool")
    perm = np.arange(n)
    make_rng(seed, 10).shuffle(perm)
    test = perm[:n_test]
    labeled = perm[n_test:n_test + n_seed]
    unlabeled = perm[n_test + n_seed:]
    return PoolState(dataset, tuple(labeled), tuple(unlabeled), tuple(test))


@dataclass(frozen=True)
class Oracle:
    """Label source backed by ground truth, optionally noisy.

    With probability ``noise_rate`` the answer is a uniformly random *other*
    class; the outcome is deterministic in (seed, index), so asking twice
    returns the same answer.
    """

    dataset: Dataset
    noise_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.noise_rate <= 1.0:
            raise InvalidThreshold("noise_rate must be in [0, 1]")


def oracle_label(oracle: Oracle, index: int) -> int:
    """Answer a label query for one record index."""
    if not 0 <= index < len(oracle.dataset):
        raise IndexOutOfRange(f"record index {index} outside the dataset")
    truth = int(oracle.dataset.labels[index])
    if oracle.noise_rate == 0.0:
        return truth
    rng = make_rng(oracle.seed, 8, index)
    if rng.random() >= oracle.noise_rate:
        return truth
    n_classes = oracle.dataset.schema.n_classes
    other = int(rng.integers(0, n_classes - 1))
    return other if other < truth else other + 1


class StopReason(str, Enum):
    ACCURACY_THRESHOLD = "accuracy_threshold"
    STABILIZATION = "stabilization"
    MAX_QUERIES = "max_queries"
    TIME_BUDGET = "time_budget"
    EXHAUSTED = "exhausted"


@dataclass(frozen=True)
class Stabilization:
    window: int
    epsilon: float


@dataclass(frozen=True)
class StoppingCriteria:
    """When to stop querying; at least one criterion must be set.

    Criteria are checked in fixed priority order: accuracy_threshold,
    stabilization, max_queries, time_budget.
    """

    accuracy_threshold: Optional[float] = None
    max_queries: Optional[int] = None
    time_budget: Optional[float] = None
    stabilization: Optional[Stabilization] = None

    def __post_init__(self):
        if (self.accuracy_threshold is None and self.max_queries is None
                and self.time_budget is None and self.stabilization is None):
            raise NoStoppingCriterion("set at least one stopping criterion")
        if self.accuracy_threshold is not None and not 0 < self.accuracy_threshold <= 1:
            raise NoStoppingCriterion("accuracy_threshold must be in (0, 1]")
        if self.max_queries is not None and self.max_queries < 0:
            raise NoStoppingCriterion("max_queries must be >= 0")
        if self.time_budget is not None and self.time_budget < 0:
            raise NoStoppingCriterion("time_budget must be >= 0")
        if self.stabilization is not None:
            if self.stabilization.window < 1 or self.stabilization.epsilon < 0:
                raise NoStoppingCriterion("stabilization needs window >= 1, epsilon >= 0")


@dataclass(frozen=True)
class IterationRecord:
    """One loop iteration: state size, queried batch, accuracy, cumulative times."""

    n_labeled: int
    queried: Tuple[int, ...]
    accuracy: float
    cumulative_selection_time: float
    cumulative_training_time: float


@dataclass
class RunHistory:
    """Everything a loop did: per-iteration records plus why it stopped."""

    iterations: List[IterationRecord]
    stop_reason: StopReason

    def accuracies(self) -> List[float]:
        return [it.accuracy for it in self.iterations]

    def total_queries(self) -> int:
        return sum(len(it.queried) for it in self.iterations)

    @property
    def final_accuracy(self) -> float:
        return self.iterations[-1].accuracy

    @property
    def total_training_time(self) -> float:
        return self.iterations[-1].cumulative_training_time

    @property
    def total_selection_time(self) -> float:
        return self.iterations[-1].cumulative_selection_time


def check_stop(stop: StoppingCriteria, history: RunHistory,
               elapsed_seconds: float) -> Optional[StopReason]:
    """First stopping criterion that fires, or None."""
    accs = history.accuracies()
    if (stop.accuracy_threshold is not None and accs
            and accs[-1] >= stop.accuracy_threshold):
        return StopReason.ACCURACY_THRESHOLD
    if stop.stabilization is not None and len(accs) >= stop.stabilization.window:
        tail = accs[-stop.stabilization.window:]
        if max(tail) - min(tail) <= stop.stabilization.epsilon:
            return StopReason.STABILIZATION
    if stop.max_queries is not None and history.total_queries() >= stop.max_queries:
        return StopReason.MAX_QUERIES
    if stop.time_budget is not None and elapsed_seconds >= stop.time_budget:
        return StopReason.TIME_BUDGET
    return None


def _labeled_dataset(dataset: Dataset, indices, labels) -> Dataset:
    return Dataset(dataset.schema, dataset.features[np.asarray(indices, int)],
                   np.asarray(labels, int))


def run_pool_loop(pool: PoolState, strategy: StrategyConfig,
                  learner: ForestParams, oracle: Oracle, batch: int,
                  stop: StoppingCriteria, seed: int,
                  clock: Optional[Clock] = None,
                  lal_regressor: Optional[LalRegressor] = None) -> RunHistory:
    """Pool-based active learning until a criterion fires or the pool empties.

    Each iteration fits on the labeled set (a committee for QBC strategies, a
    single forest otherwise), evaluates on the test split, then moves the
    selected batch from unlabeled to labeled with oracle-provided labels.
    The first recorded iteration is the seed-model evaluation.  If the LAL
    regressor is not supplied it is trained inside the first selection and
    billed as selection time.
    """
    if batch < 1:
        raise InvalidPool(f"batch must be >= 1, got {batch}")
    if not pool.test:
        raise InvalidPool("pool loop needs a non-empty test set")
    if not pool.labeled:
        raise InvalidPool("pool loop needs a non-empty seed labeled set")
    clock = clock or time.perf_counter
    test_ds = pool.dataset.subset(pool.test)
    labeled = list(pool.labeled)
    labels = [oracle_label(oracle, i) for i in labeled]
    unlabeled = list(pool.unlabeled)

    start = clock()
    train_time = 0.0
    select_time = 0.0
    regressor = lal_regressor
    history = RunHistory([], StopReason.EXHAUSTED)
    queried_now: Tuple[int, ...] = ()
    iteration = 0
    while True:
        t0 = clock()
        train_ds = _labeled_dataset(pool.dataset, labeled, labels)
        fit_seed = derive_seed(seed, 9, iteration)
        if needs_committee(strategy):
            state = fit_committee(train_ds, strategy.committee_size, learner, fit_seed)
        else:
            state = fit_forest(train_ds, learner, fit_seed)
        train_time += clock() - t0
        accuracy = evaluate_accuracy(state, test_ds)
        history.iterations.append(IterationRecord(
            len(labeled), queried_now, accuracy, select_time, train_time))
        reason = check_stop(stop, history, clock() - start)
        if reason is not None:
            history.stop_reason = reason
            return history
        if not unlabeled:
            history.stop_reason = StopReason.EXHAUSTED
            return history
        k = min(batch, len(unlabeled))
        if stop.max_queries is not None:
            k = min(k, stop.max_queries - history.total_queries())
        t0 = clock()
        if strategy.kind == "lal" and regressor is None:
            regressor = train_lal_regressor(strategy.lal_params)
        current = PoolState(pool.dataset, tuple(labeled), tuple(unlabeled),
                            pool.test)
        chosen = select_batch(strategy, state, current, k,
                              lal_regressor=regressor)
        select_time += clock() - t0
        for idx in chosen:
            labels.append(oracle_label(oracle, idx))
            labeled.append(idx)
        chosen_set = set(chosen)
        unlabeled = [i for i in unlabeled if i not in chosen_set]
        queried_now = tuple(chosen)
        iteration += 1


@dataclass(frozen=True)
class StreamConfig:
    """Selective-sampling rule for the stream scenario.

    An arriving instance is queried when its uncertainty measure reaches
    ``threshold`` (margin, which shrinks with uncertainty, is compared with
    <= instead) and the label budget has room; everything else is discarded
    permanently.  The model refits after every ``retrain_every`` queries.
    """

    measure: str = "entropy"
    threshold: float = 0.5
    max_label_budget: int = 0
    seed_fraction: float = 0.01
    retrain_every: int = 10

    def __post_init__(self):
        if self.measure not in ("entropy", "least_confidence", "margin"):
            raise InvalidThreshold(f"unknown stream measure {self.measure!r}")
        if self.threshold < 0:
            raise InvalidThreshold("threshold must be >= 0")
        if self.max_label_budget < 0:
            raise InvalidThreshold("max_label_budget must be >= 0")
        if not 0 < self.seed_fraction < 1:
            raise InvalidThreshold("seed_fraction must be in (0, 1)")
        if self.retrain_every < 1:
            raise InvalidThreshold("retrain_every must be >= 1")


def run_stream_loop(stream: Dataset, test: Dataset, config: StreamConfig,
                    learner: ForestParams, oracle: Oracle,
                    stop: StoppingCriteria, seed: int,
                    clock: Optional[Clock] = None) -> RunHistory:
    """Stream-based selective sampling over ``stream`` in its given order.

    The first seed_fraction of the stream is oracle-labeled to train the
    initial model (recorded as the first iteration).  Each later instance is
    measured once and either queried or discarded forever; the model refits
    after every ``retrain_every`` queried instances and once more at the end
    if queries are pending.  ``test`` is a held-out set used for the accuracy
    record and accuracy-based stopping.
    """
    n = len(stream)
    if n == 0:
        raise EmptyStream("stream has no records")
    clock = clock or time.perf_counter
    n_seed = max(1, round_half_up(config.seed_fraction * n))
    labeled = list(range(n_seed))
    labels = [oracle_label(oracle, i) for i in labeled]

    start = clock()
    train_time = 0.0
    select_time = 0.0
    history = RunHistory([], StopReason.EXHAUSTED)
    iteration = 0
    model = None

    def refit_and_record(queried: Tuple[int, ...]) -> Optional[StopReason]:
        nonlocal train_time, iteration, model
        t0 = clock()
        model = fit_forest(_labeled_dataset(stream, labeled, labels),
                           learner, derive_seed(seed, 13, iteration))
        train_time += clock() - t0
        iteration += 1
        accuracy = evaluate_accuracy(model, test)
        history.iterations.append(IterationRecord(
            len(labeled), queried, accuracy, select_time, train_time))
        return check_stop(stop, history, clock() - start)

    reason = refit_and_record(())
    if reason is not None:
        history.stop_reason = reason
        return history

    pending: List[int] = []
    queries = 0
    for i in range(n_seed, n):
        if queries >= config.max_label_budget:
            break
        t0 = clock()
        probs = model.predict_proba_many(stream.features[i:i + 1])
        value = float(uncertainty_scores(config.measure, probs)[0])
        select_time += clock() - t0
        if config.measure == "margin":
            useful = value <= config.threshold
        else:
            useful = value >= config.threshold
        if not useful:
            continue  # discarded permanently
        labels.append(oracle_label(oracle, i))
        labeled.append(i)
        pending.append(i)
        queries += 1
        if len(pending) == config.retrain_every:
            reason = refit_and_record(tuple(pending))
            pending = []
            if reason is not None:
                history.stop_reason = reason
                return history
    if pending:
        reason = refit_and_record(tuple(pending))
        if reason is not None:
            history.stop_reason = reason
            return history
    history.stop_reason = StopReason.EXHAUSTED
    return history
