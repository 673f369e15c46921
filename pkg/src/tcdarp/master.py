"""Set-partitioning master over the route pool with time-class regularity.

Every request of every period must be served by exactly one selected pool
route.  The regularity of a selection is priced per user-half: the number of
width-W windows needed to cover the user's selected pickup times, minus one.
Windows are anchored at observed pool times, so their count for a selection
is exactly the greedy class count of the selected times.

The exact solver is a depth-first branch and bound.  It branches on the
route that serves the first uncovered request (requests ordered by half,
user, day) and bounds a node by

    selected cost + sum over uncovered requests of the cheapest per-request
    share (route cost / requests served) among compatible routes
    + lambda x excess classes already forced by the selected routes.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Iterable, Mapping, Sequence

from .consistency import count_classes, time_classes
from .errors import MasterInfeasible, UncoveredRequest
from .model import Instance, Period
from .pool import PoolRoute

EPS = 1e-6
CAP_START_WEIGHT = Decimal("10000")  # currency per class when hunting a capped start


@dataclass(frozen=True)
class WeightedPenalty:
    lam: Decimal = Decimal("0")  # currency per excess class


@dataclass(frozen=True)
class HardCap:
    k: int = 1  # maximum classes per user-half


def group_of(user: str, period: Period, pooled: bool = False) -> tuple:
    return (user, -1 if pooled else int(period.half))


@dataclass
class MasterProblem:
    routes: tuple[PoolRoute, ...]
    requests: tuple[tuple[str, Period], ...]
    windows: dict[tuple, tuple[tuple[int, int], ...]]
    mode: WeightedPenalty | HardCap
    width: int
    pooled: bool = False
    incumbent: tuple[str, ...] = ()

    def route(self, rid: str) -> PoolRoute:
        for r in self.routes:
            if r.id == rid:
                return r
        raise KeyError(rid)


@dataclass(frozen=True)
class MasterSolution:
    selected: tuple[str, ...]
    windows: Mapping[tuple, tuple[tuple[int, int], ...]]
    objective: Decimal
    cost: Decimal
    consistency: int  # excess classes over all user-halves
    status: str  # "proved" or "time_limit"
    nodes: int = 0

    @property
    def proved(self) -> bool:
        return self.status == "proved"


def request_order(key: tuple[str, Period]) -> tuple:
    user, period = key
    return (int(period.half), user, int(period.day))


def build_master(pool: Iterable[PoolRoute], instance: Instance,
                 requests: Iterable[tuple[str, Period]], *,
                 incumbent: Iterable[PoolRoute] = (), n_per_request: int = 50,
                 mode: WeightedPenalty | HardCap = WeightedPenalty(), pooled: bool = False,
                 width: int | None = None) -> MasterProblem:
    """Keep the ``n_per_request`` cheapest routes serving each request, plus the incumbent.

    Only routes whose every passenger is among ``requests`` are eligible.
    """
    reqs = tuple(sorted(set(requests), key=request_order))
    wanted = set(reqs)
    routes = sorted((r for r in pool if r.served <= wanted), key=lambda r: (r.cost, r.signature))
    cover: dict[tuple, list[PoolRoute]] = {rq: [] for rq in reqs}
    for r in routes:
        for rq in r.served:
            cover[rq].append(r)
    for rq in reqs:
        if not cover[rq]:
            raise UncoveredRequest(rq[0], rq[1])
    keep = {r.signature: r for r in incumbent if r.served <= wanted}
    for rq in reqs:
        for r in cover[rq][:n_per_request]:
            keep.setdefault(r.signature, r)
    chosen = tuple(sorted(keep.values(), key=lambda r: (r.cost, r.signature)))
    windows: dict[tuple, set] = {}
    w = width if width is not None else instance.consistency_width
    for r in chosen:
        for uid, t in r.pickup_time.items():
            windows.setdefault(group_of(uid, r.period, pooled), set()).add((t, t + w))
    return MasterProblem(chosen, reqs, {g: tuple(sorted(v)) for g, v in sorted(windows.items())},
                         mode, w, pooled, tuple(sorted(r.id for r in incumbent if r.signature in keep)))


def _lam_cents(mode) -> int:
    if isinstance(mode, WeightedPenalty):
        return int((mode.lam * 100).to_integral_value())
    return 0


def evaluate_selection(problem: MasterProblem, selected: Iterable[PoolRoute]):
    """(cost cents, excess classes, per-group times) of a selection; no feasibility check."""
    times: dict[tuple, list[int]] = {}
    cost = 0
    for r in selected:
        cost += int(r.cost * 100)
        for uid, t in r.pickup_time.items():
            times.setdefault(group_of(uid, r.period, problem.pooled), []).append(t)
    excess = sum(max(0, count_classes(ts, problem.width) - 1) for ts in times.values())
    return cost, excess, times


def make_solution(problem: MasterProblem, selected: Sequence[PoolRoute], status: str, nodes: int = 0) -> MasterSolution:
    cost, excess, times = evaluate_selection(problem, selected)
    lam = _lam_cents(problem.mode)
    wins = {g: tuple(time_classes(ts, problem.width)[1]) for g, ts in sorted(times.items())}
    return MasterSolution(tuple(sorted(r.id for r in selected)), wins,
                          (Decimal(cost + lam * excess) / 100).quantize(Decimal("0.01")),
                          (Decimal(cost) / 100).quantize(Decimal("0.01")), excess, status, nodes)


def verify_master_solution(problem: MasterProblem, sol: MasterSolution) -> None:
    """Partition check plus window membership check; raises AssertionError."""
    chosen = [problem.route(rid) for rid in sol.selected]
    served = [rq for r in chosen for rq in r.served]
    assert sorted(served, key=request_order) == list(problem.requests), "selection is not a partition"
    for r in chosen:
        for uid, t in r.pickup_time.items():
            g = group_of(uid, r.period, problem.pooled)
            assert any(a <= t <= b for a, b in sol.windows[g]), f"{uid} at {t} outside selected windows"
            assert all(w in problem.windows[g] for w in sol.windows[g]), "window is not a candidate"
    if isinstance(problem.mode, HardCap):
        assert all(len(w) <= problem.mode.k for w in sol.windows.values()), "class cap exceeded"


# ---------------------------------------------------------------- branch and bound

class _Search:
    def __init__(self, problem: MasterProblem, comp_requests: list[int], comp_routes: list[int],
                 routes: list, deadline: float | None, node_limit: int | None, counter: list[int],
                 base: Mapping[tuple, list[int]] | None = None):
        self.p = problem
        # pickup times of routes fixed outside this search
        self.base = {g: list(ts) for g, ts in (base or {}).items()}
        self.req = comp_requests
        self.bit = {r: 1 << k for k, r in enumerate(comp_requests)}
        self.full = (1 << len(comp_requests)) - 1
        self.deadline = deadline
        self.node_limit = node_limit
        self.counter = counter
        self.hit_limit = False
        self.lam = _lam_cents(problem.mode)
        self.cap = problem.mode.k if isinstance(problem.mode, HardCap) else None
        self.cap_block = None
        # route tuples: (mask, cost cents, ((group, time), ...), index)
        self.routes = []
        for idx in comp_routes:
            pr, served_idx, gt = routes[idx]
            mask = 0
            for rq in served_idx:
                mask |= self.bit[rq]
            self.routes.append((mask, int(pr.cost * 100), gt, idx))
        self.cands = [[] for _ in comp_requests]
        self.shares = [[] for _ in comp_requests]
        for rt in self.routes:
            n = bin(rt[0]).count("1")
            for k in range(len(comp_requests)):
                if rt[0] >> k & 1:
                    self.cands[k].append(rt)
                    self.shares[k].append((rt[1] / n, rt[0]))
        for k in range(len(comp_requests)):
            self.cands[k].sort(key=lambda rt: (rt[1], routes[rt[3]][0].signature))
            self.shares[k].sort(key=lambda s: s[0])
        self.best_obj = None
        self.best_sel = None

    def _excess(self, times):
        total = 0
        for g, ts in times.items():
            c = count_classes(ts, self.p.width)
            if self.cap is not None and c > self.cap:
                return None, g
            total += c - 1
        return total, None

    def bound(self, covered: int, cost: int, excess: int) -> float:
        lb = cost + self.lam * excess
        free = self.full & ~covered
        while free:
            low = free & -free
            k = low.bit_length() - 1
            for share, mask in self.shares[k]:
                if not mask & covered:
                    lb += share
                    break
            else:
                return float("inf")
            free ^= low
        return lb

    def objective(self, cost, excess) -> int:
        return cost if self.cap is not None else cost + self.lam * excess

    def seed(self, selection: list[tuple]):
        covered, cost, times = 0, 0, {g: list(ts) for g, ts in self.base.items()}
        for rt in selection:
            if rt[0] & covered:
                return
            covered |= rt[0]
            cost += rt[1]
            for g, t in rt[2]:
                times.setdefault(g, []).append(t)
        if covered != self.full:
            return
        excess, _ = self._excess(times)
        if excess is None:
            return
        self.best_obj = self.objective(cost, excess)
        self.best_sel = list(selection)

    def _out_of_budget(self) -> bool:
        self.counter[0] += 1
        if self.node_limit is not None and self.counter[0] > self.node_limit:
            self.hit_limit = True
        elif self.deadline is not None and self.counter[0] % 256 == 0 and time.monotonic() > self.deadline:
            self.hit_limit = True
        return self.hit_limit

    def run(self):
        excess, _ = self._excess(self.base)
        if excess is None:
            return
        self._dfs(0, 0, dict(self.base), excess, [])

    def _dfs(self, covered, cost, times, excess, chosen):
        if self.hit_limit or self._out_of_budget():
            return
        if covered == self.full:
            obj = self.objective(cost, excess)
            if self.best_obj is None or obj < self.best_obj:
                self.best_obj, self.best_sel = obj, list(chosen)
            return
        free = self.full & ~covered
        k = (free & -free).bit_length() - 1
        children = []
        for rt in self.cands[k]:
            if rt[0] & covered:
                continue
            ntimes = dict(times)
            delta = 0
            blocked = None
            for g in {g for g, _ in rt[2]}:
                old = count_classes(times[g], self.p.width) if g in times else 1
                ntimes[g] = times.get(g, []) + [t for h, t in rt[2] if h == g]
                c = count_classes(ntimes[g], self.p.width)
                if self.cap is not None and c > self.cap:
                    blocked = g
                    break
                delta += c - old
            if blocked is not None:
                if self.cap_block is None:
                    self.cap_block = blocked
                continue
            ncov, ncost, nexc = covered | rt[0], cost + rt[1], excess + delta
            lb = self.bound(ncov, ncost, nexc)
            children.append((lb, rt[1], len(children), rt, ncov, ncost, ntimes, nexc))
        children.sort(key=lambda c: (c[0], c[1], c[2]))
        for lb, _, _, rt, ncov, ncost, ntimes, nexc in children:
            if self.best_obj is not None and lb > self.best_obj - 1 + EPS:
                break
            chosen.append(rt)
            self._dfs(ncov, ncost, ntimes, nexc, chosen)
            chosen.pop()
            if self.hit_limit:
                return


def _components(n_req: int, route_served: list[list[int]], groups: list[tuple]) -> list[list[int]]:
    parent = list(range(n_req))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    def union(a, b):
        ra, rb = find(a), find(b)
        if ra != rb:
            parent[max(ra, rb)] = min(ra, rb)

    for served in route_served:
        for a in served[1:]:
            union(served[0], a)
    first: dict[tuple, int] = {}
    for k, g in enumerate(groups):
        if g in first:
            union(first[g], k)
        else:
            first[g] = k
    comps: dict[int, list[int]] = {}
    for k in range(n_req):
        comps.setdefault(find(k), []).append(k)
    return [comps[r] for r in sorted(comps)]


def _reoptimise_periods(search: _Search, comp_routes: list[int], routes: list, deadline,
                        sub_nodes: int = 5_000, passes: int = 5) -> list[tuple]:
    """Improve a full selection one period at a time, the others held fixed.

    Each period is re-solved exactly (within ``sub_nodes``) given the pickup
    times fixed elsewhere; sweeps repeat until a pass changes nothing.
    """
    problem, comp = search.p, search.req
    by_index = {rt[3]: rt for rt in search.routes}
    period_of = {k: problem.requests[k][1] for k in comp}
    periods = sorted(set(period_of.values()))
    cur = list(search.best_sel)
    if len(periods) < 2:
        return cur

    def value(sel):
        cost, times = 0, {}
        for rt in sel:
            cost += rt[1]
            for g, t in rt[2]:
                times.setdefault(g, []).append(t)
        counts = [count_classes(ts, problem.width) for ts in times.values()]
        if search.cap is not None and any(c > search.cap for c in counts):
            return float("inf")
        return search.objective(cost, sum(c - 1 for c in counts))

    best = value(cur)
    for _ in range(passes):
        changed = False
        for period in periods:
            reqs = [k for k in comp if period_of[k] == period]
            mine = [i for i in comp_routes if routes[i][0].period == period]
            keep = [rt for rt in cur if routes[rt[3]][0].period != period]
            base: dict[tuple, list[int]] = {}
            for rt in keep:
                for g, t in rt[2]:
                    base.setdefault(g, []).append(t)
            sub = _Search(problem, reqs, mine, routes, deadline, sub_nodes, [0], base)
            sub.seed([rt for rt in sub.routes if any(rt[3] == c[3] for c in cur)])
            sub.run()
            if sub.best_sel is None:
                continue
            cand = keep + [by_index[rt[3]] for rt in sub.best_sel]
            val = value(cand)
            if val < best:
                cur, best, changed = cand, val, True
        if not changed:
            break
    return cur


def _cap_start(problem: MasterProblem, search: _Search, comp, comp_routes, routes, start, deadline) -> list[tuple]:
    """Starting selection for a capped search whose incumbent breaks the cap.

    The incumbent is re-optimised period by period under a heavy per-class
    weight; the result is returned only if it meets the cap.
    """
    heavy = replace(problem, mode=WeightedPenalty(CAP_START_WEIGHT))
    helper = _Search(heavy, comp, comp_routes, routes, deadline, None, [0])
    helper.seed([rt for rt in helper.routes if any(rt[3] == c[3] for c in start)])
    if helper.best_sel is None:
        return []
    by_index = {rt[3]: rt for rt in search.routes}
    return [by_index[rt[3]] for rt in _reoptimise_periods(helper, comp_routes, routes, deadline)]


def _indexed(problem: MasterProblem):
    """Routes as (pool route, served request indices, (group, time) pairs) plus per-request groups.

    With a zero penalty weight the groups do not interact, so each request
    gets its own group label and components split along routes only.
    """
    req_index = {rq: k for k, rq in enumerate(problem.requests)}
    if isinstance(problem.mode, WeightedPenalty) and _lam_cents(problem.mode) == 0:
        groups = [("request", k) for k in range(len(problem.requests))]
    else:
        groups = [group_of(u, p, problem.pooled) for u, p in problem.requests]
    routes = []
    for pr in problem.routes:
        served_idx = sorted(req_index[rq] for rq in pr.served)
        gt = tuple((group_of(u, pr.period, problem.pooled), t) for u, t in sorted(pr.pickup_time.items()))
        routes.append((pr, served_idx, gt))
    return routes, groups


def solve_master(problem: MasterProblem, time_limit: float | None = 60.0,
                 node_limit: int | None = None) -> MasterSolution:
    """Exact branch and bound; flags ``time_limit`` when a budget stopped the search.

    The problem splits into independent components (requests linked by a
    shared route or a shared user-half), each searched separately.
    """
    deadline = time.monotonic() + time_limit if time_limit is not None else None
    req_index = {rq: k for k, rq in enumerate(problem.requests)}
    routes, groups = _indexed(problem)
    incumbent = set(problem.incumbent)
    counter = [0]
    selected: list[PoolRoute] = []
    limited = False
    for comp in _components(len(problem.requests), [r[1] for r in routes], groups):
        cset = set(comp)
        comp_routes = [i for i, r in enumerate(routes) if r[1] and r[1][0] in cset]
        search = _Search(problem, comp, comp_routes, routes, deadline, node_limit, counter)
        start = [rt for rt in search.routes if routes[rt[3]][0].id in incumbent]
        search.seed(start)
        if search.best_sel is not None:
            search.seed(_reoptimise_periods(search, comp_routes, routes, deadline))
        elif search.cap is not None:
            search.seed(_cap_start(problem, search, comp, comp_routes, routes, start, deadline))
        search.run()
        limited |= search.hit_limit
        if search.best_sel is None:
            raise MasterInfeasible(search.cap_block if search.cap is not None else None,
                                   proved=not search.hit_limit)
        selected.extend(routes[rt[3]][0] for rt in search.best_sel)
    return make_solution(problem, selected, "time_limit" if limited else "proved", counter[0])


def replay_bounds(problem: MasterProblem, solution: MasterSolution) -> list[tuple[float, int]]:
    """(node bound, completion objective) along the branching path to ``solution``.

    Both values are in cents and refer to the component being searched;
    admissibility means bound <= completion objective at every node.
    """
    ids = set(solution.selected)
    routes, groups = _indexed(problem)
    out = []
    for comp in _components(len(problem.requests), [r[1] for r in routes], groups):
        cset = set(comp)
        comp_routes = [i for i, r in enumerate(routes) if r[1] and r[1][0] in cset]
        s = _Search(problem, comp, comp_routes, routes, None, None, [0])
        mine = [rt for rt in s.routes if routes[rt[3]][0].id in ids]
        final_times: dict = {}
        for rt in mine:
            for g, t in rt[2]:
                final_times.setdefault(g, []).append(t)
        final_excess = sum(count_classes(ts, problem.width) - 1 for ts in final_times.values())
        final = s.objective(sum(rt[1] for rt in mine), final_excess)
        covered, cost, times = 0, 0, {}
        out.append((s.bound(0, 0, 0), final))
        while covered != s.full:
            free = s.full & ~covered
            rt = next(r for r in mine if r[0] & (free & -free))
            covered |= rt[0]
            cost += rt[1]
            for g, t in rt[2]:
                times.setdefault(g, []).append(t)
            excess = sum(count_classes(ts, problem.width) - 1 for ts in times.values())
            out.append((s.bound(covered, cost, excess), final))
    return out
