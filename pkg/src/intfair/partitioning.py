"""Feasible partitions and the greedy partition finder.

A partition q is feasible at threshold tau when every block-marginal count
N_{a_t, y} exceeds tau.  The greedy search starts from singletons and keeps
merging the pair of blocks whose merge gives the smallest s*, as long as a
feasible merge exists.
"""

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import InfeasiblePreconditionError, ParameterError, StructureError
from .infomeasures import moment_summary
from .metrics import RATIO_LOG, independent_approx
from .pmf_core import ContingencyTable, Partition, empirical_pmf, smoothed_pmf


class FeasibilityCache:
    """Per-block feasibility verdicts for a fixed (table, tau)."""

    def __init__(self, table: ContingencyTable, tau: int):
        self.table = table
        self.tau = tau
        self._seen = {}
        self.hits = 0

    def block_ok(self, block):
        key = tuple(sorted(block))
        if key in self._seen:
            self.hits += 1
        else:
            self._seen[key] = bool(np.all(self.table.block_counts(key) > self.tau))
        return self._seen[key]

    def __len__(self):
        return len(self._seen)


def _check_tau(tau):
    if tau < 0 or int(tau) != tau:
        raise ParameterError("tau must be a non-negative integer, got %r" % (tau,))


def is_feasible(table: ContingencyTable, q: Partition, tau: int = 10, cache=None) -> bool:
    _check_tau(tau)
    q.check(table.schema.d)
    if cache is None:
        return all(np.all(table.block_counts(b) > tau) for b in q)
    return all(cache.block_ok(b) for b in q)


def refines(q: Partition, rho: Partition) -> bool:
    """True when every block of q sits inside a block of rho."""
    if q.d != rho.d:
        raise StructureError("partitions cover %d and %d attributes" % (q.d, rho.d))
    owner = {k: i for i, b in enumerate(rho) for k in b}
    return all(len({owner[k] for k in b}) == 1 for b in q)


def _first_bad_cell(table, tau):
    schema = table.schema
    for k in range(schema.d):
        counts = table.block_counts((k,))
        bad = np.argwhere(counts <= tau)
        if bad.size:
            a, y = bad[0]
            return {
                "attribute": schema.attr_names[k],
                "value": schema.attr_values[k][a],
                "label": schema.label_values[y],
                "count": int(counts[a, y]),
            }
    return None


@dataclass(frozen=True)
class GreedyResult:
    q_star: Partition
    trace: tuple
    final_s_star: float
    tau: int

    def to_json(self):
        return {
            "q_star": self.q_star.to_json(),
            "tau": self.tau,
            "trace": [{"merged": [list(a), list(b)], "s_star": s} for a, b, s in self.trace],
            "final_s_star": self.final_s_star,
        }


def greedy_partition(table: ContingencyTable, tau: int = 10, alpha_for_moments=None, use_cache=True) -> GreedyResult:
    _check_tau(tau)
    bad = _first_bad_cell(table, tau)
    if bad is not None:
        raise InfeasiblePreconditionError(
            "singleton partition infeasible at tau=%d: %s=%r with label %r has count %d"
            % (tau, bad["attribute"], bad["value"], bad["label"], bad["count"]),
            cell=bad,
        )
    pmf = empirical_pmf(table) if alpha_for_moments is None else smoothed_pmf(table, alpha_for_moments)
    cache = FeasibilityCache(table, tau) if use_cache else None
    q = Partition.singletons(table.schema.d)
    s_now = moment_summary(pmf, q).s_star
    trace = []
    while len(q) > 1:
        best = None
        for i, j in combinations(range(len(q)), 2):
            merged = q.blocks[i] + q.blocks[j]
            ok = cache.block_ok(merged) if cache else bool(np.all(table.block_counts(merged) > tau))
            if not ok:
                continue
            cand = q.merge(i, j)
            s = moment_summary(pmf, cand).s_star
            # blocks are ordered by min element, so (i, j) order is the tie-break key
            if best is None or s < best[0]:
                best = (s, i, j, cand)
        if best is None:
            break
        s_now, i, j, new_q = best
        trace.append((q.blocks[i], q.blocks[j], s_now))
        q = new_q
    return GreedyResult(q_star=q, trace=tuple(trace), final_s_star=s_now, tau=tau)


def partitioned_estimate(table: ContingencyTable, tau: int = 10, variant=RATIO_LOG, result=None) -> float:
    """u_ind of the empirical pmf at the greedy partition q*."""
    result = greedy_partition(table, tau) if result is None else result
    return independent_approx(empirical_pmf(table), result.q_star, variant)


def feasible_partitions(table, tau, d=None):
    """All feasible partitions, by brute force; only sensible for small d."""
    d = table.schema.d if d is None else d
    return [q for q in all_partitions(d) if is_feasible(table, q, tau)]


def all_partitions(d):
    def rec(items):
        if not items:
            yield []
            return
        first, rest = items[0], items[1:]
        for sub in rec(rest):
            for k in range(len(sub)):
                yield sub[:k] + [[first] + sub[k]] + sub[k + 1:]
            yield [[first]] + sub

    return [Partition(tuple(tuple(b) for b in p)) for p in rec(list(range(d)))]
