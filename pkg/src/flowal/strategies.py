"""Query strategies: score unlabeled instances, pick the batch to label.

Eight selectable kinds:

  entropy            -sum p_i ln p_i over the model's class posterior
  least_confidence   1 - max(p)
  margin             top-1 minus top-2 probability (lower = more uncertain)
  qbc_vote_entropy   entropy of the committee's hard-vote distribution
  qbc_kl             mean KL(member || consensus) over committee members
  density            base informativeness x (mean similarity to pool)^beta
  lal                regressor-forecast error reduction from labeling
  random             uniform draw without replacement

All log terms are natural logs with the 0 * log 0 := 0 convention; the base
only rescales scores and never changes a top-k selection.  Batch selection
maximizes every score except margin, which it minimizes, and all ties break
toward the lowest pool index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, List, Optional

import numpy as np

from .dataset import SyntheticSpec, generate_synthetic, shuffle_and_subset, standardize
from .errors import (
    BatchTooLarge,
    EmptyCommittee,
    EmptyPool,
    InvalidDistribution,
    InvalidParams,
    LengthMismatch,
    UntrainedRegressor,
)
from .forest import (
    Committee,
    ForestModel,
    ForestParams,
    ProbabilityDistribution,
    RegressionForestModel,
    evaluate_accuracy,
    fit_forest,
    fit_regression_forest,
)
from .rng import derive_seed, make_rng

if TYPE_CHECKING:  # pragma: no cover
    from .engine import PoolState

STRATEGY_KINDS = (
    "entropy",
    "least_confidence",
    "margin",
    "qbc_vote_entropy",
    "qbc_kl",
    "density",
    "lal",
    "random",
)

_UNCERTAINTY_KINDS = ("entropy", "least_confidence", "margin")
_QBC_KINDS = ("qbc_vote_entropy", "qbc_kl")

STATE_FEATURE_LENGTH = 8


def _as_probs(p) -> np.ndarray:
    if isinstance(p, ProbabilityDistribution):
        return p.probs
    return ProbabilityDistribution(p).probs


def _entropy_rows(P: np.ndarray) -> np.ndarray:
    # log of a zero entry is never consumed: where masks it to log(1) = 0
    safe = np.where(P > 0, P, 1.0)
    return -(P * np.log(safe)).sum(axis=-1)


def entropy(p) -> float:
    """Natural-log entropy of a class posterior; 0 at one-hot, ln n at uniform."""
    return float(_entropy_rows(_as_probs(p)))


def least_confidence(p) -> float:
    """1 - max(p); higher means the model is less sure of its top class."""
    return float(1.0 - _as_probs(p).max())


def margin(p) -> float:
    """Gap between the two largest probabilities; small gap = hard instance."""
    probs = _as_probs(p)
    if probs.size < 2:
        raise InvalidDistribution("margin needs at least two classes")
    top2 = np.sort(probs)[-2:]
    return float(top2[1] - top2[0])


def vote_entropy(votes, n_classes: int) -> float:
    """Entropy of the committee's vote histogram; 0 exactly at unanimity."""
    votes = np.asarray(votes, dtype=np.int64)
    if votes.size < 2:
        raise EmptyCommittee("vote entropy needs at least 2 committee votes")
    if (votes < 0).any() or (votes >= n_classes).any():
        raise InvalidDistribution("vote outside [0, n_classes)")
    fractions = np.bincount(votes, minlength=n_classes) / votes.size
    return float(_entropy_rows(fractions))


def kl_disagreement(member_probs) -> float:
    """Mean KL divergence of each member's posterior from the consensus.

    Terms where a member assigns zero mass contribute zero; wherever a member
    has mass the consensus mean is strictly positive, so the ratio is safe.
    """
    rows = [_as_probs(p) for p in member_probs]
    if len(rows) < 2:
        raise EmptyCommittee("KL disagreement needs at least 2 members")
    sizes = {r.size for r in rows}
    if len(sizes) != 1:
        raise LengthMismatch("member distributions differ in length")
    P = np.stack(rows)
    if (P == P[0]).all():
        return 0.0  # identical members diverge by exactly zero, not float dust
    return float(_kl_rows(P[None, :, :])[0])


def _kl_rows(P: np.ndarray) -> np.ndarray:
    """Mean member-vs-consensus KL for a (m, C, n_classes) stack.

    Clamped at zero: the divergence is nonnegative by Gibbs' inequality, and
    the clamp keeps rounding dust from leaking tiny negatives.
    """
    consensus = P.mean(axis=1, keepdims=True)
    ratio = np.where(P > 0, P / np.where(consensus > 0, consensus, 1.0), 1.0)
    terms = np.where(P > 0, P * np.log(ratio), 0.0)
    return np.maximum(terms.sum(axis=-1).mean(axis=-1), 0.0)


def information_density(base_scores, pool_features, beta: float) -> np.ndarray:
    """Reweight scores by each instance's average similarity to the pool.

    Similarity is cosine on standardized features mapped into [0, 1] via
    (1 + cos)/2; all-zero vectors sit at 0.5 similarity to everything, which
    falls out of normalizing them to the zero vector.  beta = 0 returns the
    base scores unchanged.
    """
    if beta < 0:
        raise InvalidParams(f"density beta must be >= 0, got {beta}")
    base = np.asarray(base_scores, dtype=np.float64)
    Z = np.asarray(pool_features, dtype=np.float64)
    if Z.ndim != 2 or Z.shape[0] == 0:
        raise EmptyPool("density needs a non-empty pool feature matrix")
    if base.shape != (Z.shape[0],):
        raise LengthMismatch(
            f"{base.shape} base scores for {Z.shape[0]} pool instances"
        )
    norms = np.linalg.norm(Z, axis=1, keepdims=True)
    unit = np.divide(Z, norms, out=np.zeros_like(Z), where=norms > 0)
    sim = (1.0 + unit @ unit.T) / 2.0
    factor = sim.mean(axis=1)
    return base * factor ** beta


@dataclass(frozen=True)
class LalParams:
    """Monte-Carlo recipe for training the error-reduction regressor.

    Each round draws a small synthetic classification task, fits a forest on
    a few labeled points, and measures the true held-out error change from
    adding one more labeled candidate.  The regressor learns to map an
    8-entry learning-state vector to that error reduction.
    """

    mc_rounds: int = 40
    state_feature_length: int = STATE_FEATURE_LENGTH
    regressor: ForestParams = ForestParams(n_trees=40)
    seed: int = 0

    def __post_init__(self):
        if self.mc_rounds < 1:
            raise InvalidParams("mc_rounds must be >= 1")
        if self.state_feature_length != STATE_FEATURE_LENGTH:
            raise InvalidParams(
                f"state feature length is fixed at {STATE_FEATURE_LENGTH}"
            )


class LalRegressor:
    """Trained error-reduction forecaster plus its Monte-Carlo training pairs."""

    def __init__(self, forest: RegressionForestModel,
                 states: np.ndarray, targets: np.ndarray):
        self.forest = forest
        self.states = states
        self.targets = targets

    def predict_many(self, states: np.ndarray) -> np.ndarray:
        if self.forest is None:
            raise UntrainedRegressor("LAL regressor has no fitted forest")
        return self.forest.predict_many(states)

    def predict(self, state) -> float:
        return float(self.predict_many(np.asarray(state, float)[None, :])[0])


def _class_balance_entropy(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    return float(_entropy_rows(counts / total))


def lal_state_features(model: ForestModel, labeled_size: int,
                       candidate) -> np.ndarray:
    """8-entry learning-state vector for one candidate.

    Order: max probability, margin, entropy, across-tree vote variance,
    labeled-set size, labeled class-balance entropy, mean leaf depth reached,
    candidate L2 norm.
    """
    X = np.asarray(candidate, dtype=np.float64)
    if X.ndim == 1:
        return _lal_state_matrix(model, labeled_size, X[None, :])[0]
    return _lal_state_matrix(model, labeled_size, X)


def _lal_state_matrix(model: ForestModel, labeled_size: int,
                      X: np.ndarray) -> np.ndarray:
    P = model.predict_proba_many(X)
    part = np.sort(P, axis=1)
    max_prob = part[:, -1]
    gap = part[:, -1] - part[:, -2] if P.shape[1] >= 2 else np.ones(len(P))
    ent = _entropy_rows(P)
    # sum of per-class Bernoulli variances of the tree votes
    vote_var = 1.0 - np.sum(P * P, axis=1)
    balance = _class_balance_entropy(model.train_class_counts)
    states = np.column_stack([
        max_prob,
        gap,
        ent,
        vote_var,
        np.full(len(P), float(labeled_size)),
        np.full(len(P), balance),
        model.mean_leaf_depth(X),
        np.linalg.norm(X, axis=1),
    ])
    return states


def train_lal_regressor(params: LalParams, *,
                        target_override: Optional[float] = None) -> LalRegressor:
    """Run the Monte-Carlo simulation and fit the error-reduction regressor.

    ``target_override`` replaces every recorded error reduction with a
    constant; it exists so tests can pin the regression target exactly.
    """
    rng = make_rng(params.seed, 4)
    inner = ForestParams(n_trees=12)
    states: List[np.ndarray] = []
    targets: List[float] = []
    for round_no in range(params.mc_rounds):
        n_classes = int(rng.integers(2, 4))
        n_features = int(rng.integers(3, 7))
        per_class = int(rng.integers(20, 36))
        separation = float(rng.uniform(1.0, 4.0))
        spec = SyntheticSpec(
            n_classes=n_classes,
            per_class=per_class,
            n_features=n_features,
            class_mean_separation=separation,
            noise_stddev=1.0,
            seed=int(rng.integers(0, 1 << 62)),
        )
        test, pool = shuffle_and_subset(generate_synthetic(spec), 0.4, spec.seed)
        n_labeled = int(rng.integers(max(n_classes + 1, 5), 21))
        n_labeled = min(n_labeled, len(pool) - 1)
        base_seed = int(rng.integers(0, 1 << 62))
        labeled = pool.subset(np.arange(n_labeled))
        model = fit_forest(labeled, inner, base_seed)
        base_error = 1.0 - evaluate_accuracy(model, test)
        n_candidates = min(8, len(pool) - n_labeled)
        for c in range(n_candidates):
            cand_index = n_labeled + c
            state = lal_state_features(model, n_labeled, pool.features[cand_index])
            extended = pool.subset(
                np.concatenate([np.arange(n_labeled), [cand_index]])
            )
            refit = fit_forest(extended, inner, base_seed)
            reduction = base_error - (1.0 - evaluate_accuracy(refit, test))
            states.append(state)
            targets.append(reduction)
    S = np.vstack(states)
    t = np.asarray(targets)
    if target_override is not None:
        t = np.full_like(t, float(target_override))
    forest = fit_regression_forest(S, t, params.regressor,
                                   derive_seed(params.seed, 5))
    return LalRegressor(forest, S, t)


def lal_score(regressor: LalRegressor, model: ForestModel,
              labeled_size: int, candidate) -> float:
    """Forecast error reduction from labeling ``candidate``; higher is better."""
    if regressor is None or regressor.forest is None:
        raise UntrainedRegressor("train the LAL regressor before scoring")
    state = lal_state_features(model, labeled_size, candidate)
    return regressor.predict(state)


@dataclass(frozen=True)
class StrategyConfig:
    """Which query policy to run and its knobs.

    ``base_informativeness`` applies to the density strategy only and names
    the score that gets density-weighted (margin is folded to 1 - margin so
    that larger always means more informative inside the product).
    """

    kind: str
    beta: float = 1.0
    base_informativeness: str = "entropy"
    committee_size: int = 5
    lal_params: LalParams = LalParams()
    seed: int = 0
    name: Optional[str] = None

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise InvalidParams(f"unknown strategy kind {self.kind!r}")
        if self.beta < 0:
            raise InvalidParams("beta must be >= 0")
        if self.kind in _QBC_KINDS and self.committee_size < 2:
            raise InvalidParams("QBC needs committee_size >= 2")
        if self.base_informativeness not in _UNCERTAINTY_KINDS:
            raise InvalidParams(
                "base_informativeness must be one of "
                f"{_UNCERTAINTY_KINDS}, got {self.base_informativeness!r}"
            )

    @property
    def display_name(self) -> str:
        return self.name if self.name else self.kind


def needs_committee(config: StrategyConfig) -> bool:
    return config.kind in _QBC_KINDS


def uncertainty_scores(kind: str, P: np.ndarray) -> np.ndarray:
    """Row-wise uncertainty of a (m, n_classes) probability matrix."""
    if kind == "entropy":
        return _entropy_rows(P)
    if kind == "least_confidence":
        return 1.0 - P.max(axis=1)
    if kind == "margin":
        part = np.sort(P, axis=1)
        return part[:, -1] - part[:, -2]
    raise InvalidParams(f"not an uncertainty kind: {kind!r}")


def score_pool(config: StrategyConfig, state, pool: "PoolState",
               lal_regressor: Optional[LalRegressor] = None) -> np.ndarray:
    """Score vector aligned with ``pool.unlabeled`` (random kind excluded)."""
    U = np.asarray(pool.unlabeled, dtype=np.int64)
    if U.size == 0:
        raise EmptyPool("no unlabeled instances to score")
    XU = pool.dataset.features[U]
    kind = config.kind
    if kind in _UNCERTAINTY_KINDS:
        return uncertainty_scores(kind, state.predict_proba_many(XU))
    if kind == "qbc_vote_entropy":
        committee = _require_committee(state)
        votes = committee.member_votes(XU)  # (C, m)
        counts = np.zeros((votes.shape[1], committee.schema.n_classes))
        cols = np.arange(votes.shape[1])
        for row in votes:
            counts[cols, row] += 1.0
        return _entropy_rows(counts / votes.shape[0])
    if kind == "qbc_kl":
        member = _require_committee(state).member_probas(XU)  # (C, m, n)
        return _kl_rows(np.swapaxes(member, 0, 1))
    if kind == "density":
        base = uncertainty_scores(config.base_informativeness,
                                  state.predict_proba_many(XU))
        if config.base_informativeness == "margin":
            base = 1.0 - base
        train_idx = np.concatenate([np.asarray(pool.labeled, dtype=np.int64), U])
        scaler = standardize(pool.dataset.subset(train_idx))
        return information_density(base, scaler.transform(XU), config.beta)
    if kind == "lal":
        regressor = lal_regressor
        if regressor is None:
            regressor = train_lal_regressor(config.lal_params)
        states = _lal_state_matrix(state, len(pool.labeled), XU)
        return regressor.predict_many(states)
    raise InvalidParams(f"{kind!r} has no score vector")


def select_batch(config: StrategyConfig, state, pool: "PoolState", k: int,
                 lal_regressor: Optional[LalRegressor] = None) -> List[int]:
    """Pick k distinct unlabeled indices under the configured policy.

    Scoring strategies return indices best-first; equal scores fall back to
    ascending pool index.  The random strategy draws uniformly without
    replacement, deterministically in (seed, |labeled|, |unlabeled|), and
    returns ascending indices.
    """
    U = np.asarray(pool.unlabeled, dtype=np.int64)
    if U.size == 0:
        raise EmptyPool("cannot select from an empty unlabeled pool")
    if k < 1 or k > U.size:
        raise BatchTooLarge(f"batch of {k} from a pool of {U.size}")
    if config.kind == "random":
        rng = make_rng(config.seed, 6, len(pool.labeled), U.size)
        picks = rng.choice(U.size, size=k, replace=False)
        return sorted(int(U[p]) for p in picks)
    scores = score_pool(config, state, pool, lal_regressor=lal_regressor)
    if not np.isfinite(scores).all():
        raise InvalidParams("strategy produced non-finite scores")
    key = scores if config.kind == "margin" else -scores
    order = np.argsort(key, kind="stable")  # stable: ties keep ascending index
    return [int(U[i]) for i in order[:k]]


def _require_committee(state) -> Committee:
    if not isinstance(state, Committee):
        raise InvalidParams("QBC strategies need a Committee state")
    return state
