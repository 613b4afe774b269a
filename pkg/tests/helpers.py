"""Slow, independent reference implementations used to cross-check the
vectorized code paths.  Everything here is deliberately naive (pairwise
loops, from-scratch recomputation) and shares no code with the package
internals it checks."""

from __future__ import annotations

import numpy as np


def naive_single_best(state_id, cost, parent_slot, score):
    """Expected survivor mask: one minimum-cost candidate per state.

    Ties resolved by the canonical order (higher score first, then lower
    parent slot), matching the engine's tie keys.
    """
    m = len(state_id)
    keep = np.zeros(m, dtype=bool)
    for s in set(state_id.tolist()):
        members = [i for i in range(m) if state_id[i] == s]
        best = min(members, key=lambda i: (cost[i], -score[i], parent_slot[i]))
        keep[best] = True
    return keep


def naive_pareto(state_id, cost, obj, action, parent_slot, score, is_direct=None):
    """Expected Pareto survivor mask (cost minimized, obj maximized).

    A candidate is dropped iff some other candidate in the same state is at
    least as good in both dimensions and strictly better in one, or exactly
    ties both and precedes it in the canonical order (via-depot moves first
    where applicable, then higher score, lower parent slot, lower action).
    """
    m = len(state_id)

    def key(i):
        head = () if is_direct is None else (is_direct[i],)
        return head + (-score[i], parent_slot[i], action[i])

    keep = np.ones(m, dtype=bool)
    for i in range(m):
        for j in range(m):
            if i == j or state_id[i] != state_id[j]:
                continue
            if cost[j] == cost[i] and obj[j] == obj[i]:
                if key(j) < key(i):
                    keep[i] = False
                    break
            elif cost[j] <= cost[i] and obj[j] >= obj[i]:
                keep[i] = False
                break
    return keep


def random_candidate_groups(rng, n_states, with_ties=True):
    """Random flat candidate arrays spanning n_states DP states.

    Costs and objectives are drawn from a tiny integer grid (then scaled)
    so exact ties actually occur and exercise the tie-break rules.
    """
    sizes = rng.integers(1, 8, size=n_states)
    m = int(sizes.sum())
    state_id = np.repeat(np.arange(n_states, dtype=np.int64), sizes)
    grid = 4 if with_ties else 10**6
    cost = rng.integers(0, grid, size=m) / 3.0
    obj = rng.integers(0, grid, size=m) / 7.0
    action = rng.integers(0, 50, size=m).astype(np.int64)
    parent_slot = rng.integers(0, 50, size=m).astype(np.int64)
    score = rng.integers(0, grid, size=m) / 5.0
    is_direct = rng.integers(0, 2, size=m).astype(np.int8)
    return state_id, cost, obj, action, parent_slot, score, is_direct
