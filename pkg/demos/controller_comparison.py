"""Race the classical controllers on one benchmark instance and show how
each spends its 100-step budget differently."""
import numpy as np

from jobshopls import best_known, builtin_instance
from jobshopls.metaheuristics import ControllerKind, run

inst = builtin_instance("ta01")
bks = best_known()["ta01"]
seeds = (0, 1, 2)

print(f"ta01 (15x15), best known {bks}, 100 iterations, seeds {seeds}\n")
print("controller   best  mean    gap%   accepts  perturbs/restarts")
print("-" * 62)
for kind in ControllerKind:
    bests, accepts, events = [], [], []
    for s in seeds:
        result = run(kind, inst, iterations=100, seed=s)
        bests.append(result.best_cost)
        accepts.append(sum(1 for r in result.trace if r.accepted))
        events.append(sum(1 for r in result.trace if r.event))
    gap = 100 * (np.mean(bests) - bks) / bks
    print(f"{kind.value:<11} {min(bests):5} {np.mean(bests):6.0f} {gap:6.2f}"
          f"   {np.mean(accepts):5.0f}    {np.mean(events):5.1f}")

# a closer look at one VNS run: the trace records every decision
result = run(ControllerKind.VNS, inst, iterations=100, seed=1)
print(f"\nVNS seed 1 reached {result.best_cost}; trace excerpt:")
shown = 0
for row in result.trace:
    if row.event or shown < 5:
        tag = f"  [{row.event}]" if row.event else ""
        print(f"  step {row.step:3}  {row.operator:5}  cost {row.cost:4}  "
              f"best {row.best:4}{tag}")
        shown += 1
    if shown > 14:
        break
