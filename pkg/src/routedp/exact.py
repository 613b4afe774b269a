"""Independent exact solvers for small instances.

brute_force enumerates solutions directly (permutations, and for VRP set
partitions with per-route permutations); exact_dp runs a classic full
state-space DP over (visited set, current node), with per-state Pareto
fronts for VRP/TSPTW.  Both are pure functions of the instance and exist
to cross-check the beam solver, so they share no code with it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .instances import DEPOT, Instance, ProblemKind

BRUTE_FORCE_MAX_NODES = 11       # TSP / TSPTW
BRUTE_FORCE_MAX_CUSTOMERS = 8    # VRP
EXACT_DP_MAX_NODES_TSP = 16
EXACT_DP_MAX_NODES = 13          # VRP / TSPTW

_PERM_CHUNK = 200_000


@dataclass(frozen=True)
class OracleResult:
    optimal_cost: float                       # math.inf when infeasible
    optimal_routes: tuple[tuple[int, ...], ...] | None
    node_count_searched: int

    @property
    def feasible(self) -> bool:
        return math.isfinite(self.optimal_cost)


def _perm_batches(items: list[int]):
    it = itertools.permutations(items)
    while True:
        batch = list(itertools.islice(it, _PERM_CHUNK))
        if not batch:
            return
        yield np.array(batch, dtype=np.int64)


def _tour_costs(c: np.ndarray, perms: np.ndarray) -> np.ndarray:
    cost = c[DEPOT, perms[:, 0]] + c[perms[:, -1], DEPOT]
    for i in range(perms.shape[1] - 1):
        cost = cost + c[perms[:, i], perms[:, i + 1]]
    return cost


def brute_force(instance: Instance, max_n: int | None = None) -> OracleResult:
    """Exhaustive enumeration; refuses instances above the size cap."""
    if instance.kind == ProblemKind.VRP:
        cap = max_n if max_n is not None else BRUTE_FORCE_MAX_CUSTOMERS
        if instance.n - 1 > cap:
            raise ValueError(
                f"brute force refuses VRP with {instance.n - 1} customers (limit {cap})")
        return _brute_vrp(instance)
    cap = max_n if max_n is not None else BRUTE_FORCE_MAX_NODES
    if instance.n > cap:
        raise ValueError(f"brute force refuses n = {instance.n} (limit {cap})")
    if instance.kind == ProblemKind.TSP:
        return _brute_tsp(instance)
    return _brute_tsptw(instance)


def _brute_tsp(instance: Instance) -> OracleResult:
    c = instance.cost_matrix()
    best_cost, best_seq, searched = math.inf, None, 0
    for perms in _perm_batches(list(range(1, instance.n))):
        costs = _tour_costs(c, perms)
        searched += len(perms)
        i = int(np.argmin(costs))
        # Permutations come in lexicographic order, so the first optimum
        # seen is the lexicographically smallest one.
        if costs[i] < best_cost:
            best_cost, best_seq = float(costs[i]), tuple(int(v) for v in perms[i])
    route = (DEPOT, *best_seq, DEPOT)
    return OracleResult(best_cost, (route,), searched)


def _brute_tsptw(instance: Instance) -> OracleResult:
    c = instance.cost_matrix()
    lo, hi = instance.time_windows[:, 0], instance.time_windows[:, 1]
    best_cost, best_seq, searched = math.inf, None, 0
    for perms in _perm_batches(list(range(1, instance.n))):
        searched += len(perms)
        t = np.maximum(c[DEPOT, perms[:, 0]], lo[perms[:, 0]])
        feas = t <= hi[perms[:, 0]]
        for i in range(perms.shape[1] - 1):
            nxt = perms[:, i + 1]
            t = np.maximum(t + c[perms[:, i], nxt], lo[nxt])
            feas &= t <= hi[nxt]
        feas &= t + c[perms[:, -1], DEPOT] <= hi[DEPOT]
        if not feas.any():
            continue
        costs = np.where(feas, _tour_costs(c, perms), math.inf)
        i = int(np.argmin(costs))
        if costs[i] < best_cost:
            best_cost, best_seq = float(costs[i]), tuple(int(v) for v in perms[i])
    if best_seq is None:
        return OracleResult(math.inf, None, searched)
    return OracleResult(best_cost, ((DEPOT, *best_seq, DEPOT),), searched)


def _brute_vrp(instance: Instance) -> OracleResult:
    c = instance.cost_matrix()
    demands = instance.demands
    customers = list(range(1, instance.n))
    searched = 0

    # Best open-ended depot-to-depot route per capacity-feasible subset.
    best_route: dict[frozenset[int], tuple[float, tuple[int, ...]]] = {}
    for r in range(1, len(customers) + 1):
        for combo in itertools.combinations(customers, r):
            if demands[list(combo)].sum() > instance.capacity:
                continue
            best = (math.inf, combo)
            for perm in itertools.permutations(combo):
                searched += 1
                cost = c[DEPOT, perm[0]] + c[perm[-1], DEPOT]
                for a, b in zip(perm, perm[1:]):
                    cost += c[a, b]
                if cost < best[0]:
                    best = (float(cost), perm)
            best_route[frozenset(combo)] = best

    remaining = frozenset(customers)
    memo: dict[frozenset[int], tuple[float, tuple[tuple[int, ...], ...]]] = {}

    def cover(rem: frozenset[int]) -> tuple[float, tuple[tuple[int, ...], ...]]:
        if not rem:
            return 0.0, ()
        if rem in memo:
            return memo[rem]
        anchor = min(rem)
        others = sorted(rem - {anchor})
        best = (math.inf, ())
        for r in range(len(others) + 1):
            for extra in itertools.combinations(others, r):
                block = frozenset((anchor, *extra))
                if block not in best_route:
                    continue
                bcost, bperm = best_route[block]
                rest_cost, rest_routes = cover(rem - block)
                total = bcost + rest_cost
                if total < best[0]:
                    best = (total, ((bperm), *rest_routes))
        memo[rem] = best
        return best

    total, perms = cover(remaining)
    routes = tuple(sorted((DEPOT, *p, DEPOT) for p in perms))
    return OracleResult(float(total), routes, searched)


def exact_dp(instance: Instance, max_n: int | None = None) -> OracleResult:
    """Full-state DP over (visited set, current node)."""
    n = instance.n
    if instance.kind == ProblemKind.TSP:
        cap = max_n if max_n is not None else EXACT_DP_MAX_NODES_TSP
    else:
        cap = max_n if max_n is not None else EXACT_DP_MAX_NODES
    if n > cap:
        raise ValueError(f"exact DP refuses n = {n} (limit {cap})")
    if instance.kind == ProblemKind.TSP:
        return _dp_tsp(instance)
    if instance.kind == ProblemKind.VRP:
        return _dp_vrp(instance)
    return _dp_tsptw(instance)


def _dp_tsp(instance: Instance) -> OracleResult:
    n = instance.n
    c = instance.cost_matrix()
    full = (1 << (n - 1)) - 1  # bit k = customer k + 1
    dp: dict[tuple[int, int], tuple[float, tuple[int, int] | None]] = {}
    for j in range(1, n):
        dp[(1 << (j - 1), j)] = (float(c[DEPOT, j]), None)
    for mask in range(1, full + 1):
        for j in range(1, n):
            state = (mask, j)
            if state not in dp:
                continue
            base, _ = dp[state]
            for k in range(1, n):
                bit = 1 << (k - 1)
                if mask & bit:
                    continue
                nxt = (mask | bit, k)
                cand = base + c[j, k]
                if nxt not in dp or cand < dp[nxt][0]:
                    dp[nxt] = (cand, state)
    best = (math.inf, None)
    for j in range(1, n):
        state = (full, j)
        total = dp[state][0] + c[j, DEPOT]
        if total < best[0]:
            best = (total, state)
    seq: list[int] = []
    state = best[1]
    while state is not None:
        seq.append(state[1])
        state = dp[state][1]
    seq.reverse()
    return OracleResult(float(best[0]), ((DEPOT, *seq, DEPOT),), len(dp))


def _front_insert(front: list[list], cost: float, aux: float, entry: list) -> None:
    # aux is maximized (remaining capacity; negated time for TSPTW).
    for e in front:
        if e[0] <= cost and e[1] >= aux:
            return
    front[:] = [e for e in front if not (cost <= e[0] and aux >= e[1])]
    front.append(entry)


def _dp_vrp(instance: Instance) -> OracleResult:
    n = instance.n
    c = instance.cost_matrix()
    d = instance.demands
    capacity = float(instance.capacity)
    full = (1 << (n - 1)) - 1
    # entry: [cost, remcap, parent_entry, action_node, via_flag]
    fronts: dict[tuple[int, int], list[list]] = {}
    for j in range(1, n):
        fronts[(1 << (j - 1), j)] = [[float(c[DEPOT, j]), capacity - d[j], None, j, True]]
    for mask in range(1, full + 1):
        for j in range(1, n):
            front = fronts.get((mask, j))
            if not front:
                continue
            for entry in front:
                cost, remcap = entry[0], entry[1]
                for k in range(1, n):
                    bit = 1 << (k - 1)
                    if mask & bit:
                        continue
                    nxt = fronts.setdefault((mask | bit, k), [])
                    if d[k] <= remcap:
                        _front_insert(nxt, cost + c[j, k], remcap - d[k],
                                      [cost + c[j, k], remcap - d[k], entry, k, False])
                    via_cost = cost + c[j, DEPOT] + c[DEPOT, k]
                    _front_insert(nxt, via_cost, capacity - d[k],
                                  [via_cost, capacity - d[k], entry, k, True])
    best_total, best_entry = math.inf, None
    for j in range(1, n):
        for entry in fronts.get((full, j), []):
            total = entry[0] + c[j, DEPOT]
            if total < best_total:
                best_total, best_entry = total, entry
    routes: list[list[int]] = []
    entry = best_entry
    chain: list[list] = []
    while entry is not None:
        chain.append(entry)
        entry = entry[2]
    for e in reversed(chain):
        if e[4]:
            routes.append([DEPOT, e[3]])
        else:
            routes[-1].append(e[3])
    decoded = tuple(sorted(tuple(r) + (DEPOT,) for r in routes))
    return OracleResult(float(best_total), decoded, len(fronts))


def _dp_tsptw(instance: Instance) -> OracleResult:
    n = instance.n
    c = instance.cost_matrix()
    lo, hi = instance.time_windows[:, 0], instance.time_windows[:, 1]
    full = (1 << (n - 1)) - 1
    # entry: [cost, -time, parent_entry, node]
    fronts: dict[tuple[int, int], list[list]] = {}
    for j in range(1, n):
        t = max(c[DEPOT, j], lo[j])
        if t <= hi[j]:
            fronts[(1 << (j - 1), j)] = [[float(c[DEPOT, j]), -t, None, j]]
    for mask in range(1, full + 1):
        for j in range(1, n):
            front = fronts.get((mask, j))
            if not front:
                continue
            for entry in front:
                cost, t = entry[0], -entry[1]
                for k in range(1, n):
                    bit = 1 << (k - 1)
                    if mask & bit:
                        continue
                    tk = max(t + c[j, k], lo[k])
                    if tk > hi[k]:
                        continue
                    nxt = fronts.setdefault((mask | bit, k), [])
                    _front_insert(nxt, cost + c[j, k], -tk,
                                  [cost + c[j, k], -tk, entry, k])
    best_total, best_entry = math.inf, None
    for j in range(1, n):
        for entry in fronts.get((full, j), []):
            if -entry[1] + c[j, DEPOT] > hi[DEPOT]:
                continue
            total = entry[0] + c[j, DEPOT]
            if total < best_total:
                best_total, best_entry = total, entry
    if best_entry is None:
        return OracleResult(math.inf, None, len(fronts))
    seq: list[int] = []
    entry = best_entry
    while entry is not None:
        seq.append(entry[3])
        entry = entry[2]
    seq.reverse()
    return OracleResult(float(best_total), ((DEPOT, *seq, DEPOT),), len(fronts))
