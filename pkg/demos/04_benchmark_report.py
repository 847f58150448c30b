"""
Benchmark tables: accuracy and time ratios across label budgets
===============================================================

Run the full experiment grid on a synthetic dataset: per seed, hold out a
test split, train the full-pool baseline, then give each strategy a ladder
of label budgets.  Every cell reports its accuracy, the elapsed training
plus selection time, and the two ratios against the full baseline:

    TAR = subset accuracy / full accuracy
    TTR = (subset training + selection time) / full training time
"""

from flowal import (
    ExperimentConfig,
    ForestParams,
    StrategyConfig,
    SyntheticSpec,
    run_experiment,
)
from flowal.bench import rows_to_md

config = ExperimentConfig(
    source=SyntheticSpec(n_classes=4, per_class=250, n_features=4,
                         class_mean_separation=3.5, seed=5),
    strategies=(StrategyConfig(kind="entropy"),
                StrategyConfig(kind="qbc_vote_entropy", committee_size=3),
                StrategyConfig(kind="random")),
    seeds=(0, 1),
    learner=ForestParams(n_trees=15),
    fractions=(0.02, 0.06, 0.15, 0.4),
    batch=15,
)

rows = run_experiment(config)
print(rows_to_md(rows))

cheapest = min((r for r in rows if r.strategy != "full"), key=lambda r: r.ttr)
print(f"cheapest cell: {cheapest.strategy} at {cheapest.fraction:.0%} "
      f"spent {cheapest.ttr:.1%} of the full training time "
      f"for {cheapest.tar:.1%} of its accuracy")
