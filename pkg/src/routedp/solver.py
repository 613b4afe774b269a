"""Beam-restricted dynamic programming over routing state spaces.

One solve runs single-threaded: the beam for step t+1 is built from the
top-B scoring non-dominated expansions of the beam at step t.  Per-step
(parent, action) records go to a trace from which the winning solution is
backtracked and independently re-simulated before being returned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .decode import build_solution
from .heatmaps import Heatmap, SparseGraph, cost_heatmap, sparsify_knn, sparsify_threshold, symmetrize
from .instances import DEPOT, Instance, ProblemKind, Solution
from .policy import Policy, PolicyTables, build_policy_tables, initial_potential
from .pruning import prune_pareto_front, prune_single_best

WORD_BITS = 64


@dataclass(frozen=True)
class SolverConfig:
    beam_size: int
    policy: Policy = Policy.HEAT_POTENTIAL
    threshold: float | None = 1e-5
    knn: int | None = None
    dominance_enabled: bool = True
    use_score_bound_prefilter: bool = False
    invert_cost_heat: bool = False

    def __post_init__(self) -> None:
        if self.beam_size < 1:
            raise ValueError("beam_size must be >= 1")
        if self.threshold is not None and self.knn is not None:
            raise ValueError("threshold and knn are mutually exclusive")
        if self.threshold is None and self.knn is None:
            object.__setattr__(self, "threshold", 1e-5)


@dataclass
class SolveResult:
    solution: Solution | None
    failed_at_step: int | None = None
    steps: int = 0
    max_beam_width: int = 0

    @property
    def found(self) -> bool:
        return self.solution is not None


def pack_visited(mask: np.ndarray) -> np.ndarray:
    """Pack boolean visited rows into canonical little-endian 64-bit words."""
    m, n = mask.shape
    words = (n + WORD_BITS - 1) // WORD_BITS
    bytes_ = np.packbits(mask, axis=1, bitorder="little")
    pad = words * 8 - bytes_.shape[1]
    if pad:
        bytes_ = np.concatenate([bytes_, np.zeros((m, pad), dtype=np.uint8)], axis=1)
    return bytes_.view("<u8")


@dataclass
class Beam:
    """Struct-of-arrays beam state; row order is the trace slot order."""

    cost: np.ndarray
    current: np.ndarray
    heat: np.ndarray
    pot_total: np.ndarray
    score: np.ndarray
    visited: np.ndarray        # (m, n) bool
    packed: np.ndarray         # (m, words) uint64
    potential: np.ndarray      # (m, n) per-node remaining potential
    extra: np.ndarray | None   # remcap (VRP) / time (TSPTW)
    slots: np.ndarray          # trace slot of each row

    @property
    def width(self) -> int:
        return self.cost.shape[0]

    def permuted(self, perm: np.ndarray) -> "Beam":
        return Beam(self.cost[perm], self.current[perm], self.heat[perm],
                    self.pot_total[perm], self.score[perm], self.visited[perm],
                    self.packed[perm], self.potential[perm],
                    None if self.extra is None else self.extra[perm],
                    self.slots[perm])


def group_by_visited(beam: Beam) -> tuple[Beam, np.ndarray]:
    """Reorder the beam so equal visited sets are contiguous.

    Returns the permuted beam and a group ordinal per row.  Rows within a
    group follow the global tie-break order (score desc, cost asc, current
    asc, slot asc).
    """
    words = [beam.packed[:, w] for w in range(beam.packed.shape[1])]
    perm = np.lexsort((beam.slots, beam.current, beam.cost, -beam.score, *words))
    out = beam.permuted(perm)
    m = out.width
    first = np.empty(m, dtype=bool)
    first[0] = True
    first[1:] = (out.packed[1:] != out.packed[:-1]).any(axis=1)
    return out, np.cumsum(first) - 1


@dataclass
class Candidates:
    """Flat candidate arrays produced by one expansion step."""

    parent_pos: np.ndarray    # row in the (grouped) parent beam
    parent_slot: np.ndarray   # trace slot of the parent
    target: np.ndarray        # node being visited
    action: np.ndarray        # encoded action value
    state_id: np.ndarray
    cost: np.ndarray
    heat: np.ndarray
    pot: np.ndarray
    score: np.ndarray
    extra: np.ndarray | None = None
    is_direct: np.ndarray | None = None

    def __len__(self) -> int:
        return self.cost.shape[0]

    def take(self, idx: np.ndarray) -> "Candidates":
        return Candidates(self.parent_pos[idx], self.parent_slot[idx],
                          self.target[idx], self.action[idx], self.state_id[idx],
                          self.cost[idx], self.heat[idx], self.pot[idx],
                          self.score[idx],
                          None if self.extra is None else self.extra[idx],
                          None if self.is_direct is None else self.is_direct[idx])


@dataclass
class _Context:
    instance: Instance
    costs: np.ndarray
    adj: np.ndarray
    tables: PolicyTables
    config: SolverConfig

    @property
    def n(self) -> int:
        return self.instance.n


def _candidate_scores(ctx: _Context, cost: np.ndarray, heat: np.ndarray,
                      pot: np.ndarray) -> np.ndarray:
    if ctx.config.policy.ranks_by_cost:
        return -cost
    return heat + pot


def _potential_of_candidates(ctx: _Context, beam: Beam, ppos: np.ndarray,
                             tgt: np.ndarray, visited_sum: np.ndarray) -> np.ndarray:
    # Total potential after visiting tgt: parent total minus the target's own
    # remaining potential and minus the potential every still-counted node
    # loses from the target's incoming heat becoming unusable.
    delta = ctx.tables.delta
    row_loss = delta.sum(axis=1)
    return (beam.pot_total[ppos] - beam.potential[ppos, tgt]
            - row_loss[tgt] + visited_sum[ppos, tgt])


def _visited_delta_sums(ctx: _Context, beam: Beam) -> np.ndarray:
    # visited_sum[e, v] = sum of delta[v, i] over visited non-start nodes i.
    mask = beam.visited[:, 1:].astype(float)
    return mask @ ctx.tables.delta[:, 1:].T


def expand_tsp(beam: Beam, groups: np.ndarray, ctx: _Context) -> Candidates:
    feas = ctx.adj[beam.current] & ~beam.visited
    ppos, tgt = np.nonzero(feas)
    cur = beam.current[ppos]
    cost = beam.cost[ppos] + ctx.costs[cur, tgt]
    heat = beam.heat[ppos] + ctx.tables.heat[cur, tgt]
    vs = _visited_delta_sums(ctx, beam)
    pot = _potential_of_candidates(ctx, beam, ppos, tgt, vs)
    score = _candidate_scores(ctx, cost, heat, pot)
    return Candidates(ppos, beam.slots[ppos], tgt, tgt.copy(),
                      groups[ppos] * np.int64(ctx.n) + tgt,
                      cost, heat, pot, score)


def prune_tsp(cand: Candidates, groups: np.ndarray | None = None) -> Candidates:
    # Two candidates share a DP state only if their parents share a visited
    # set, so candidates from singleton groups survive without any check.
    contested = _contested_mask(cand, groups)
    if contested is None:
        keep = prune_single_best(cand.state_id, cand.cost,
                                 tie_keys=(cand.parent_slot, -cand.score))
        return cand.take(np.flatnonzero(keep))
    if not contested.any():
        return cand
    idx = np.flatnonzero(contested)
    keep_sub = prune_single_best(cand.state_id[idx], cand.cost[idx],
                                 tie_keys=(cand.parent_slot[idx], -cand.score[idx]))
    keep = np.ones(len(cand), dtype=bool)
    keep[idx] = keep_sub
    return cand.take(np.flatnonzero(keep))


def _contested_mask(cand: Candidates, groups: np.ndarray | None) -> np.ndarray | None:
    if groups is None or len(cand) == 0:
        return None
    gsize = np.bincount(groups)
    return gsize[groups[cand.parent_pos]] > 1


def expand_vrp(beam: Beam, groups: np.ndarray, ctx: _Context, step: int) -> Candidates:
    n = ctx.n
    demands = ctx.instance.demands
    capacity = float(ctx.instance.capacity)
    unvisited = ~beam.visited
    unvisited[:, DEPOT] = False
    vs = _visited_delta_sums(ctx, beam)

    parts: list[Candidates] = []

    if step > 0:
        feas = ctx.adj[beam.current] & unvisited & (demands[None, :] <= beam.extra[:, None])
        ppos, tgt = np.nonzero(feas)
        cur = beam.current[ppos]
        cost = beam.cost[ppos] + ctx.costs[cur, tgt]
        heat = beam.heat[ppos] + ctx.tables.heat[cur, tgt]
        pot = _potential_of_candidates(ctx, beam, ppos, tgt, vs)
        parts.append(Candidates(
            ppos, beam.slots[ppos], tgt, tgt.copy(),
            groups[ppos] * np.int64(n) + tgt,
            cost, heat, pot, _candidate_scores(ctx, cost, heat, pot),
            extra=beam.extra[ppos] - demands[tgt],
            is_direct=np.ones(len(ppos), dtype=np.int8)))

    # Via-depot moves: per visited-set group, only parents with the cheapest
    # return to the depot can yield non-dominated via-depot expansions.
    ret = beam.cost + ctx.costs[beam.current, DEPOT]
    at_depot = beam.current == DEPOT
    has_ret = at_depot | ctx.adj[beam.current, DEPOT]
    ret_masked = np.where(has_ret, ret, np.inf)
    ngroups = int(groups[-1]) + 1 if beam.width else 0
    group_starts = np.searchsorted(groups, np.arange(ngroups))
    group_min = np.minimum.reduceat(ret_masked, group_starts)
    eligible = has_ret & (ret == group_min[groups])

    feas_via = np.zeros((beam.width, n), dtype=bool)
    feas_via[eligible] = ctx.adj[DEPOT][None, :] & unvisited[eligible]
    ppos, tgt = np.nonzero(feas_via)
    cur = beam.current[ppos]
    cost = ret[ppos] + ctx.costs[DEPOT, tgt]
    heat = beam.heat[ppos] + ctx.tables.via_depot_heat[cur, tgt]
    pot = _potential_of_candidates(ctx, beam, ppos, tgt, vs)
    via = Candidates(
        ppos, beam.slots[ppos], tgt, tgt + n,
        groups[ppos] * np.int64(n) + tgt,
        cost, heat, pot, _candidate_scores(ctx, cost, heat, pot),
        extra=np.full(len(ppos), capacity) - demands[tgt],
        is_direct=np.zeros(len(ppos), dtype=np.int8))
    # Stage 1: a single surviving via-depot candidate per DP state.
    keep = prune_single_best(via.state_id, via.cost,
                             tie_keys=(via.parent_slot, -via.score))
    parts.append(via.take(np.flatnonzero(keep)))

    return _concat(parts)


def prune_capacity_time(cand: Candidates, objective: np.ndarray,
                        groups: np.ndarray | None = None) -> Candidates:
    """Stage 2: exact Pareto front per state, objective maximized.

    For TSPTW pass negated time and the parent group ids (singleton groups
    cannot collide); for VRP direct and via-depot moves from one parent do
    share states, so all candidates are checked.
    """
    contested = _contested_mask(cand, groups)
    if contested is not None and not contested.any():
        return cand

    def front(c: Candidates, obj: np.ndarray) -> np.ndarray:
        tie: tuple[np.ndarray, ...] = (c.action, c.parent_slot, -c.score)
        if c.is_direct is not None:
            tie = tie + (c.is_direct,)
        return prune_pareto_front(c.state_id, c.cost, obj, tie_keys=tie)

    if contested is None:
        return cand.take(np.flatnonzero(front(cand, objective)))
    idx = np.flatnonzero(contested)
    keep = np.ones(len(cand), dtype=bool)
    keep[idx] = front(cand.take(idx), objective[idx])
    return cand.take(np.flatnonzero(keep))


def expand_tsptw(beam: Beam, groups: np.ndarray, ctx: _Context) -> Candidates:
    n = ctx.n
    tw = ctx.instance.time_windows
    lo, hi = tw[:, 0], tw[:, 1]
    feas = ctx.adj[beam.current] & ~beam.visited
    ppos, tgt = np.nonzero(feas)
    cur = beam.current[ppos]
    arrive = np.maximum(beam.extra[ppos] + ctx.costs[cur, tgt], lo[tgt])
    ok = arrive <= hi[tgt]

    # One-step lookahead: arriving at v at time tau must leave every other
    # unvisited node j reachable before its deadline (tau + c_vj <= u_j).
    slack = hi[None, :] - ctx.costs            # slack[v, j] = u_j - c_vj
    ngroups = int(groups[-1]) + 1 if beam.width else 0
    group_rows = np.searchsorted(groups, np.arange(ngroups))
    latest = np.full((ngroups, n), np.inf)
    for g, row in enumerate(group_rows):
        cols = np.flatnonzero(~beam.visited[row])
        if cols.size == 0:
            continue
        sub = slack[:, cols].copy()
        sub[cols, np.arange(cols.size)] = np.inf   # exclude the target itself
        latest[g] = sub.min(axis=1)
    ok &= arrive <= latest[groups[ppos], tgt]

    idx = np.flatnonzero(ok)
    ppos, tgt, arrive = ppos[idx], tgt[idx], arrive[idx]
    cur = beam.current[ppos]
    cost = beam.cost[ppos] + ctx.costs[cur, tgt]
    heat = beam.heat[ppos] + ctx.tables.heat[cur, tgt]
    vs = _visited_delta_sums(ctx, beam)
    pot = _potential_of_candidates(ctx, beam, ppos, tgt, vs)
    return Candidates(ppos, beam.slots[ppos], tgt, tgt.copy(),
                      groups[ppos] * np.int64(n) + tgt,
                      cost, heat, pot, _candidate_scores(ctx, cost, heat, pot),
                      extra=arrive)


def _concat(parts: list[Candidates]) -> Candidates:
    parts = [p for p in parts if len(p)]
    if not parts:
        empty = np.empty(0)
        eint = np.empty(0, dtype=np.int64)
        return Candidates(eint, eint, eint, eint, eint, empty, empty, empty, empty)
    if len(parts) == 1:
        return parts[0]
    cat = np.concatenate
    return Candidates(
        cat([p.parent_pos for p in parts]), cat([p.parent_slot for p in parts]),
        cat([p.target for p in parts]), cat([p.action for p in parts]),
        cat([p.state_id for p in parts]), cat([p.cost for p in parts]),
        cat([p.heat for p in parts]), cat([p.pot for p in parts]),
        cat([p.score for p in parts]),
        None if parts[0].extra is None else cat([p.extra for p in parts]),
        None if parts[0].is_direct is None else cat([p.is_direct for p in parts]))


def select_top_b(cand: Candidates, beam_size: int) -> Candidates:
    """Best beam_size candidates under the global total order.

    The order is score desc, cost asc, current (target) asc, parent slot
    asc, action asc; survivors are returned in that order.
    """
    m = len(cand)
    if m > beam_size:
        neg = -cand.score
        kth = np.partition(neg, beam_size - 1)[beam_size - 1]
        sure = np.flatnonzero(neg < kth)
        need = beam_size - sure.size
        ties = np.flatnonzero(neg == kth)
        if need > 0:
            t_order = np.lexsort((cand.action[ties], cand.parent_slot[ties],
                                  cand.target[ties], cand.cost[ties]))
            ties = ties[t_order[:need]]
            sel = np.concatenate([sure, ties])
        else:
            sel = sure
        cand = cand.take(sel)
    order = np.lexsort((cand.action, cand.parent_slot, cand.target,
                        cand.cost, -cand.score))
    return cand.take(order)


def backtrack(trace: list[tuple[np.ndarray, np.ndarray]], winning_slot: int) -> list[int]:
    """Recover the action sequence ending at winning_slot of the last record."""
    actions: list[int] = []
    slot = winning_slot
    for parents, acts in reversed(trace):
        if not 0 <= slot < len(parents):
            raise RuntimeError(f"corrupt trace: slot {slot} out of range")
        actions.append(int(acts[slot]))
        slot = int(parents[slot])
    actions.reverse()
    return actions


def _init_beam(ctx: _Context) -> Beam:
    n = ctx.n
    kind = ctx.instance.kind
    visited = np.zeros((1, n), dtype=bool)
    extra: np.ndarray | None = None
    if kind == ProblemKind.VRP:
        extra = np.array([float(ctx.instance.capacity)])
        init_visited: set[int] = set()
    else:
        visited[0, DEPOT] = True
        init_visited = {DEPOT}
        if kind == ProblemKind.TSPTW:
            extra = np.array([0.0])
    pot = initial_potential(ctx.tables, init_visited)
    score = -0.0 if ctx.config.policy.ranks_by_cost else pot.total
    return Beam(np.zeros(1), np.full(1, DEPOT, dtype=np.int64), np.zeros(1),
                np.array([pot.total]), np.array([score]), visited,
                pack_visited(visited), pot.p[None, :].copy(), extra,
                np.zeros(1, dtype=np.int64))


def _next_beam(ctx: _Context, beam: Beam, cand: Candidates) -> Beam:
    n = ctx.n
    visited = beam.visited[cand.parent_pos].copy()
    visited[np.arange(len(cand)), cand.target] = True
    potential = beam.potential[cand.parent_pos] - ctx.tables.delta[cand.target]
    return Beam(cand.cost.copy(), cand.target.astype(np.int64), cand.heat.copy(),
                cand.pot.copy(), cand.score.copy(), visited, pack_visited(visited),
                potential, None if cand.extra is None else cand.extra.copy(),
                np.arange(len(cand), dtype=np.int64))


def effective_heatmap(instance: Instance, heatmap: Heatmap | None,
                      config: SolverConfig) -> Heatmap:
    """Heatmap the policy runs on: the supplied one, or the cost heuristic;
    symmetrized for the undirected problems."""
    if heatmap is None or config.policy.uses_cost_heat:
        heatmap = cost_heatmap(instance.cost_matrix(), invert=config.invert_cost_heat)
    if heatmap.n != instance.n:
        raise ValueError(f"heatmap dimension {heatmap.n} != instance size {instance.n}")
    if instance.kind != ProblemKind.TSPTW and heatmap.directed:
        heatmap = symmetrize(heatmap)
    return heatmap


def build_graph(instance: Instance, heatmap: Heatmap | None,
                config: SolverConfig) -> SparseGraph:
    """Sparse expansion graph per config (threshold on the supplied heatmap
    when available, otherwise on the cost-heuristic heat)."""
    vrp = instance.kind == ProblemKind.VRP
    if config.knn is not None:
        return sparsify_knn(instance.cost_matrix(), config.knn, vrp=vrp)
    h = effective_heatmap(instance, heatmap, replace(config, policy=Policy.HEAT_POTENTIAL)
                          if heatmap is not None else config)
    return sparsify_threshold(h, config.threshold, vrp=vrp)


def solve(
    instance: Instance,
    config: SolverConfig,
    heatmap: Heatmap | None = None,
    graph: SparseGraph | None = None,
) -> SolveResult:
    """Run the beam DP and return the best completed solution found.

    Deterministic in (instance, heatmap, config).  The returned solution is
    verified by independent re-simulation; if the beam dies before any
    solution completes, the result records the failing step instead.
    """
    kind = instance.kind
    n = instance.n
    costs = instance.cost_matrix()
    eff = effective_heatmap(instance, heatmap, config)
    if graph is None:
        graph = build_graph(instance, heatmap, config)
    tables = build_policy_tables(eff, costs, kind,
                                 use_potential=config.policy.uses_potential)
    ctx = _Context(instance, costs, graph.adjacency_matrix(), tables, config)

    beam = _init_beam(ctx)
    trace: list[tuple[np.ndarray, np.ndarray]] = []
    visit_steps = n - 1
    max_width = 1

    for step in range(visit_steps):
        beam, groups = group_by_visited(beam)
        if kind == ProblemKind.TSP:
            cand = expand_tsp(beam, groups, ctx)
        elif kind == ProblemKind.VRP:
            cand = expand_vrp(beam, groups, ctx, step)
        else:
            cand = expand_tsptw(beam, groups, ctx)
        if len(cand) == 0:
            return SolveResult(None, failed_at_step=step, steps=step,
                               max_beam_width=max_width)

        if config.use_score_bound_prefilter and len(cand) > config.beam_size:
            bound = np.partition(-cand.score, config.beam_size - 1)[config.beam_size - 1]
            cand = cand.take(np.flatnonzero(-cand.score <= bound))

        if config.dominance_enabled:
            if kind == ProblemKind.TSP:
                cand = prune_tsp(cand, groups)
            elif kind == ProblemKind.VRP:
                cand = prune_capacity_time(cand, cand.extra)
            else:
                cand = prune_capacity_time(cand, -cand.extra, groups)

        cand = select_top_b(cand, config.beam_size)
        trace.append((cand.parent_slot.copy(), cand.action.copy()))
        beam = _next_beam(ctx, beam, cand)
        max_width = max(max_width, beam.width)

    # Return step: close the tour / final route at the depot.
    final_cost = beam.cost + costs[beam.current, DEPOT]
    feas = (beam.current == DEPOT) | ctx.adj[beam.current, DEPOT]
    if kind == ProblemKind.TSPTW:
        u0 = instance.time_windows[DEPOT, 1]
        feas &= beam.extra + costs[beam.current, DEPOT] <= u0
    ok = np.flatnonzero(feas)
    if ok.size == 0:
        return SolveResult(None, failed_at_step=visit_steps, steps=visit_steps,
                           max_beam_width=max_width)
    order = np.lexsort((beam.slots[ok], -beam.score[ok], final_cost[ok]))
    win = ok[order[0]]
    trace.append((np.array([beam.slots[win]]), np.array([DEPOT])))

    actions = backtrack(trace, 0)
    solution = build_solution(instance, actions, graph=graph)
    if not solution.feasible:
        raise RuntimeError("internal error: backtracked solution failed re-simulation")
    if abs(solution.cost - float(final_cost[win])) > 1e-9:
        raise RuntimeError("internal error: re-simulated cost differs from beam cost")
    return SolveResult(solution, steps=visit_steps + 1, max_beam_width=max_width)
