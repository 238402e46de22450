"""Independent reference implementations used to cross-check the package.

Everything here is written against the problem definition only: no graph, no
heads/tails, no incremental updates. Slow and simple on purpose.
"""
from __future__ import annotations

from itertools import permutations, product

from jobshopls.core import Instance, OpId, Solution


def simulate_makespan(instance: Instance, solution: Solution):
    """Makespan by direct schedule construction.

    Repeatedly starts any operation whose job predecessor is finished and
    which is next in its machine's processing order; its start time is the
    max of the two release times. Returns None when no operation can start
    (the machine orders conflict with the job routes).
    """
    J, M = instance.n_jobs, instance.n_machines
    job_next = [0] * J
    mach_next = [0] * M
    job_free = [0] * J
    mach_free = [0] * M
    remaining = J * M
    while remaining:
        progressed = False
        for k in range(M):
            while mach_next[k] < len(solution.machine_seq[k]):
                op = solution.machine_seq[k][mach_next[k]]
                if op.pos != job_next[op.job]:
                    break
                start = max(job_free[op.job], mach_free[k])
                end = start + int(instance.proc[op.job, op.pos])
                job_free[op.job] = end
                mach_free[k] = end
                job_next[op.job] += 1
                mach_next[k] += 1
                remaining -= 1
                progressed = True
        if not progressed:
            return None
    return max(mach_free)


def brute_force_optimum(instance: Instance):
    """Minimum makespan over every combination of machine permutations.

    Only viable for tiny instances: a 3x3 has 6**3 = 216 combinations.
    Cyclic combinations are skipped.
    """
    J, M = instance.n_jobs, instance.n_machines
    on_machine = [[] for _ in range(M)]
    for j in range(J):
        for k in range(M):
            on_machine[int(instance.machine[j, k])].append(OpId(j, k))
    best = None
    for combo in product(*(permutations(ops) for ops in on_machine)):
        cost = simulate_makespan(instance, Solution([list(s) for s in combo]))
        if cost is not None and (best is None or cost < best):
            best = cost
    return best


def apply_move_to_sequences(solution: Solution, move) -> Solution:
    """Re-derive a move's effect from its published definition alone."""
    from jobshopls.neighborhood import Operator

    seqs = [list(s) for s in solution.machine_seq]
    seq = seqs[move.machine]
    if move.kind in (Operator.CT, Operator.CET):
        seq[move.pos_a], seq[move.pos_b] = seq[move.pos_b], seq[move.pos_a]
    elif move.kind is Operator.ECET:
        seq[move.pos_a], seq[move.pos_a + 1] = seq[move.pos_a + 1], seq[move.pos_a]
        seq[move.pos_b], seq[move.pos_b + 1] = seq[move.pos_b + 1], seq[move.pos_b]
    else:
        op = seq.pop(move.pos_a)
        seq.insert(move.pos_b, op)
    return Solution(seqs)


def exact_move_cost(instance: Instance, solution: Solution, move):
    """Post-move makespan by full reconstruction, or None if infeasible."""
    return simulate_makespan(instance, apply_move_to_sequences(solution, move))
