"""The full loop, head to head with baselines.

Same dataset, same budget, three acquisition strategies: the adaptive
mixture-based selection (with its customized per-subset losses), uniform
random selection, and max-entropy selection (both trained with the
supervised loss only). Prints the per-round accuracy trajectories.

Run:  python3 demos/04_active_adaptation_loop.py
"""

from collections import defaultdict

import numpy as np

from activeadapt import LoopConfig, ShiftConfig, Strategy, TrainConfig, compare_strategies

shift = ShiftConfig(
    C=5, d_in=8, n_source=400, n_target=1200,
    shift_kind="rotation", shift_magnitude=0.5, seed=11,
)
loop = LoopConfig(
    budget=60,
    rounds=4,
    d_feat=64,
    train=TrainConfig(epochs_per_round=20, seed=1),
    pretrain_epochs=40,
    seed=1,
)
strategies = [Strategy.DIANA, Strategy.RANDOM, Strategy.ENTROPY]
n_seeds = 3

print(
    f"dataset: {shift.C} classes, {shift.n_target} target samples, "
    f"rotation {shift.shift_magnitude}; budget {loop.budget} over {loop.rounds} rounds, "
    f"{n_seeds} seeds\n"
)
rows = compare_strategies(shift, loop, strategies, n_seeds)

acc = defaultdict(lambda: defaultdict(list))  # strategy -> round -> accs
err = defaultdict(list)
for r in rows:
    acc[r["strategy"]][r["round"]].append(r["accuracy"])
    if r["round"] == loop.rounds and r["selected_error_rate"] is not None:
        err[r["strategy"]].append(r["selected_error_rate"])

print(f"{'round':>5}", *(f"{s.value:>18}" for s in strategies))
for rnd in range(1, loop.rounds + 1):
    cells = [f"{np.mean(acc[s.value][rnd]):.3f} ± {np.std(acc[s.value][rnd]):.3f}" for s in strategies]
    print(f"{rnd:>5}", *(f"{c:>18}" for c in cells))

print("\nmean error rate of the final selected batch (higher = harder samples):")
for s in strategies:
    print(f"  {s.value:>16}: {np.mean(err[s.value]):.3f}")
print(
    "\nThe adaptive strategy beats random selection by targeting samples"
    "\nthe model gets wrong. Pure uncertainty selection also profits at"
    "\nthis mild shift; its weakness is the confidently-wrong region, which"
    "\nthe partition isolates (and withholds from training) explicitly."
)
