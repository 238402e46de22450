"""Construct schedules with every priority rule and compare against the
best known values for the first ten 15x15 benchmark instances."""
import numpy as np

from jobshopls import best_known, build_graph, builtin_instance
from jobshopls.dispatch import DispatchRule, dispatch

RULES = [DispatchRule.FIFO, DispatchRule.SPT, DispatchRule.MWKR,
         DispatchRule.MOPNR, DispatchRule.FDD, DispatchRule.FDD_over_MWKR]

bks = best_known()
names = [f"ta{i:02d}" for i in range(1, 11)]

header = "instance  bks   " + "".join(f"{r.value:>10}" for r in RULES)
print(header)
print("-" * len(header))

gap_rows = []
for name in names:
    inst = builtin_instance(name)
    costs = [build_graph(inst, dispatch(inst, r)).makespan for r in RULES]
    gap_rows.append([(c - bks[name]) / bks[name] for c in costs])
    print(f"{name}      {bks[name]}  " + "".join(f"{c:>10}" for c in costs))

means = 100 * np.array(gap_rows).mean(axis=0)
print("-" * len(header))
print("mean gap %      " + "".join(f"{m:>10.2f}" for m in means))

# the ratio rule wins on most instances: it balances urgency (flow due date)
# against the work still ahead of the job
best_rule = RULES[int(np.argmin(means))]
print(f"\nbest mean gap: {best_rule.value} at {means.min():.2f}%")

# the random rule gives a feel for how much structure the others add
inst = builtin_instance("ta01")
random_costs = [build_graph(inst, dispatch(inst, DispatchRule.RND, seed=s)).makespan
                for s in range(20)]
print(f"random rule on ta01 over 20 seeds: best {min(random_costs)}, "
      f"worst {max(random_costs)}, mean {np.mean(random_costs):.0f}")
