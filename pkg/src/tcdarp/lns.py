"""Large neighbourhood search for one half-day dial-a-ride problem.

Each iteration removes a fraction of the requests (random, worst or related
removal, drawn uniformly), reinserts them (best or regret-2 insertion), and
accepts the candidate under a simulated-annealing rule.  Routes of every
accepted solution are collected for the weekly route pool.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from decimal import Decimal
from typing import Sequence

from .errors import VerificationError
from .model import Instance, Period
from .pool import PoolRoute, RoutePool
from .routing import (
    DELIVERY,
    PICKUP,
    Action,
    PeriodContext,
    Route,
    cents_to_money,
    insert_actions,
    verify_route,
)


@dataclass(frozen=True)
class LnsParams:
    iterations: int = 10_000
    removal_fraction: tuple[float, float] = (0.1, 0.4)
    sa_start_temp: float = 0.05  # fraction of the initial solution cost
    sa_cooling: float = 0.9997
    unassigned_penalty: Decimal | None = None  # None: 10x the dearest single-request route
    seed: int = 0
    pool_time_shifts: tuple[int, ...] = ()  # e.g. (-10, -5, 5, 10) adds shifted pool copies

    def __post_init__(self):
        lo, hi = self.removal_fraction
        if not 0 < lo <= hi < 1:
            raise ValueError("removal_fraction must satisfy 0 < min <= max < 1")
        if not 0 < self.sa_cooling < 1:
            raise ValueError("sa_cooling must lie in (0, 1)")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")


@dataclass(frozen=True)
class HalfDaySolution:
    period: Period
    routes: tuple[Route, ...]
    unassigned: frozenset[str]
    total_cost: Decimal
    penalty: Decimal = Decimal("0.00")

    @property
    def routing_cost(self) -> Decimal:
        return sum((r.cost for r in self.routes), Decimal("0.00"))

    def served(self) -> frozenset[str]:
        return frozenset(u for r in self.routes for u in r.users)


# ---------------------------------------------------------------- search state

@dataclass
class _State:
    routes: list[tuple[str, tuple[Action, ...]]]
    costs: list[int]
    unassigned: set[str] = field(default_factory=set)

    def copy(self) -> "_State":
        return _State(list(self.routes), list(self.costs), set(self.unassigned))

    def cost(self, penalty: int) -> int:
        return sum(self.costs) + penalty * len(self.unassigned)

    def assigned(self) -> list[str]:
        return sorted(a.user for _, acts in self.routes for a in acts if a.kind == PICKUP)

    def where(self) -> dict[str, int]:
        return {a.user: k for k, (_, acts) in enumerate(self.routes) for a in acts}

    def count(self, vid: str) -> int:
        return sum(1 for v, _ in self.routes if v == vid)


def _remove(ctx: PeriodContext, st: _State, users: set[str]) -> list[str]:
    """Drop users from their routes; a remainder that became infeasible is dissolved."""
    removed = set(users)
    routes, costs = [], []
    for (vid, acts), c in zip(st.routes, st.costs):
        if not any(a.user in users for a in acts):
            routes.append((vid, acts))
            costs.append(c)
            continue
        rest = tuple(a for a in acts if a.user not in users)
        if not rest:
            continue
        ev = ctx.evaluate(vid, rest)
        if ev is None:
            removed.update(a.user for a in rest)
            continue
        routes.append((vid, rest))
        costs.append(ev.cost)
    st.routes, st.costs = routes, costs
    return sorted(removed)


def _options(ctx: PeriodContext, st: _State, user: str):
    """Best insertion per route plus one opening option per vehicle type.

    Each entry is (delta, route index or -1, vehicle id, pickup_pos, delivery_pos).
    """
    opts = []
    for k, (vid, acts) in enumerate(st.routes):
        ins = ctx.best_insertion(vid, acts, user)
        if ins is not None:
            opts.append((ins[0], k, vid, ins[1], ins[2]))
    for vid, vt in ctx.vehicles.items():
        if vt.available is not None and st.count(vid) >= vt.available:
            continue
        ev = ctx.evaluate(vid, (Action(PICKUP, user), Action(DELIVERY, user)))
        if ev is not None:
            opts.append((ev.cost, -1, vid, 0, 0))
    opts.sort(key=lambda o: (o[0], o[1] < 0, o[1], o[2]))
    return opts


def _apply(ctx: PeriodContext, st: _State, user: str, opt) -> None:
    _, k, vid, i, j = opt
    if k < 0:
        acts = insert_actions((), user, 0, 0)
        st.routes.append((vid, acts))
        st.costs.append(ctx.evaluate(vid, acts).cost)
    else:
        acts = insert_actions(st.routes[k][1], user, i, j)
        st.routes[k] = (vid, acts)
        st.costs[k] = ctx.evaluate(vid, acts).cost


# ---------------------------------------------------------------- operators

def random_removal(ctx, st, q, rng, data):
    assigned = st.assigned()
    return _remove(ctx, st, set(rng.sample(assigned, min(q, len(assigned)))))


def worst_removal(ctx, st, q, rng, data, power: int = 3):
    removed: list[str] = []
    for _ in range(q):
        savings = []
        for (vid, acts), c in zip(st.routes, st.costs):
            for a in acts:
                if a.kind != PICKUP:
                    continue
                rest = tuple(b for b in acts if b.user != a.user)
                if not rest:
                    savings.append((c, a.user))
                    continue
                ev = ctx.evaluate(vid, rest)
                if ev is not None:
                    savings.append((c - ev.cost, a.user))
        if not savings:
            break
        savings.sort(key=lambda s: (-s[0], s[1]))
        pick = savings[int(rng.random() ** power * len(savings))][1]
        removed.extend(_remove(ctx, st, {pick}))
    return sorted(set(removed))


def related_removal(ctx, st, q, rng, data, power: int = 6):
    assigned = st.assigned()
    if not assigned:
        return []
    times = {}
    for vid, acts in st.routes:
        ev = ctx.evaluate(vid, acts)
        for a, t in zip(acts, ev.starts):
            if a.kind == PICKUP:
                times[a.user] = t
    spread = max(times.values()) - min(times.values()) or 1
    dist, dmax = data["pickup_distance"], data["pickup_distance_max"]
    chosen = [rng.choice(assigned)]
    left = [u for u in assigned if u != chosen[0]]
    while left and len(chosen) < q:
        ref = rng.choice(chosen)
        left.sort(key=lambda v: (dist[ref][v] / dmax + abs(times[ref] - times[v]) / spread, v))
        chosen.append(left.pop(int(rng.random() ** power * len(left))))
    return _remove(ctx, st, set(chosen))


def best_insertion(ctx, st, pending: Sequence[str], rng) -> None:
    pending = sorted(pending)
    while pending:
        best = None
        for u in pending:
            opts = _options(ctx, st, u)
            if opts and (best is None or opts[0][0] < best[1][0]):
                best = (u, opts[0])
        if best is None:
            break
        _apply(ctx, st, best[0], best[1])
        pending.remove(best[0])
    st.unassigned = set(pending)


def regret_insertion(ctx, st, pending: Sequence[str], rng) -> None:
    pending = sorted(pending)
    while pending:
        best = None
        for u in pending:
            opts = _options(ctx, st, u)
            if not opts:
                continue
            regret = opts[1][0] - opts[0][0] if len(opts) > 1 else math.inf
            if best is None or regret > best[0]:
                best = (regret, u, opts[0])
        if best is None:
            break
        _apply(ctx, st, best[1], best[2])
        pending.remove(best[1])
    st.unassigned = set(pending)


REMOVALS = (random_removal, worst_removal, related_removal)
REPAIRS = (best_insertion, regret_insertion)


# ---------------------------------------------------------------- drivers

def _default_penalty(ctx: PeriodContext) -> int:
    worst = 0
    for u in ctx.users:
        acts = (Action(PICKUP, u), Action(DELIVERY, u))
        costs = [ev.cost for vid in sorted(ctx.vehicles) if (ev := ctx.evaluate(vid, acts)) is not None]
        if costs:
            worst = max(worst, min(costs))
    return 10 * worst if worst else 10 * 100_00


def _initial(ctx: PeriodContext) -> _State:
    st = _State([], [])
    order = sorted(ctx.users, key=lambda u: (ctx.requests[u].pickup_window[0], u))
    for u in order:
        ins = [o for o in _options(ctx, st, u) if o[1] >= 0]
        if ins:
            _apply(ctx, st, u, ins[0])
            continue
        opening = [o for o in _options(ctx, st, u) if o[1] < 0]
        if opening:
            _apply(ctx, st, u, opening[0])
        else:
            st.unassigned.add(u)
    return st


def _solution(ctx: PeriodContext, base: PeriodContext, st: _State, penalty: int) -> HalfDaySolution:
    routes = tuple(sorted((_materialise(ctx, base, vid, acts) for vid, acts in st.routes),
                          key=lambda r: (r.vehicle.id, r.actions)))
    return HalfDaySolution(ctx.period, routes, frozenset(st.unassigned),
                           cents_to_money(st.cost(penalty)), cents_to_money(penalty))


def _materialise(ctx: PeriodContext, base: PeriodContext, vid: str, acts) -> Route:
    """Route scheduled in ``ctx`` but carrying the original stop windows of ``base``."""
    r = ctx.route(vid, acts)
    if ctx is base:
        return r
    return Route(r.vehicle, r.period, base.stops(acts), r.schedule, r.leg_configs, r.distance_m, r.cost)


def initial_solution(instance: Instance, period: Period) -> HalfDaySolution:
    """Greedy best insertion in order of earliest pickup; opens a vehicle only when needed."""
    ctx = PeriodContext(instance, period)
    penalty = _default_penalty(ctx)
    return _solution(ctx, ctx, _initial(ctx), penalty)


def _run(instance: Instance, period: Period, params: LnsParams, narrowed, history):
    params = params or LnsParams()
    base = PeriodContext(instance, period)
    ctx = PeriodContext(instance, period, narrowed) if narrowed else base
    if not ctx.users:
        return HalfDaySolution(period, (), frozenset(), Decimal("0.00")), set()
    if params.unassigned_penalty is not None:
        penalty = int(params.unassigned_penalty * 100)
    else:
        penalty = _default_penalty(base)
    rng = random.Random(params.seed)
    mtx = instance.matrix
    pd = {u: {v: (mtx.d(ctx.requests[u].pickup, ctx.requests[v].pickup)
                  + mtx.d(ctx.requests[v].pickup, ctx.requests[u].pickup)) / 2
              for v in ctx.users} for u in ctx.users}
    data = {"pickup_distance": pd,
            "pickup_distance_max": max(max(row.values()) for row in pd.values()) or 1.0}

    cur = _initial(ctx)
    cur_cost = cur.cost(penalty)
    best, best_cost = cur.copy(), cur_cost
    pooled: set[tuple[str, tuple[Action, ...]]] = set(cur.routes)
    temp = params.sa_start_temp * cur_cost
    lo, hi = params.removal_fraction
    n = len(ctx.users)
    for _ in range(params.iterations):
        cand = cur.copy()
        q = max(1, math.ceil(rng.uniform(lo, hi) * n))
        removal = REMOVALS[rng.randrange(len(REMOVALS))]
        repair = REPAIRS[rng.randrange(len(REPAIRS))]
        removed = removal(ctx, cand, q, rng, data)
        repair(ctx, cand, sorted(set(removed) | cand.unassigned), rng)
        cost = cand.cost(penalty)
        delta = cost - cur_cost
        u = rng.random()
        if delta <= 0 or (temp > 0 and u < math.exp(-delta / temp)):
            cur, cur_cost = cand, cost
            pooled.update(cur.routes)
            if cost < best_cost:
                best, best_cost = cand.copy(), cost
        temp *= params.sa_cooling
        if history is not None:
            history.append(best_cost)

    solution = _solution(ctx, base, best, penalty)
    pool = []
    for vid, acts in sorted(pooled):
        route = _materialise(ctx, base, vid, acts)
        verify_route(route, instance)
        pool.append(PoolRoute.from_route(route))
        for delta in params.pool_time_shifts:
            shifted = Route(route.vehicle, route.period, route.stops, route.schedule.shifted(delta),
                            route.leg_configs, route.distance_m, route.cost)
            try:
                verify_route(shifted, instance)
            except VerificationError:
                continue
            pool.append(PoolRoute.from_route(shifted))
    return solution, set(RoutePool(pool))


def solve_halfday(instance: Instance, period: Period, params: LnsParams | None = None,
                  *, history: list[int] | None = None) -> tuple[HalfDaySolution, set[PoolRoute]]:
    """Best solution found and the deduplicated routes of all accepted solutions.

    ``history``, when given, receives the best cost (cents) after each iteration.
    """
    return _run(instance, period, params, None, history)


def solve_halfday_constrained(instance: Instance, period: Period, params: LnsParams | None,
                              narrowed_windows: dict[str, tuple[int, int]],
                              *, history: list[int] | None = None) -> tuple[HalfDaySolution, set[PoolRoute]]:
    """As solve_halfday with some users' pickup windows narrowed.

    Narrowed windows must lie inside the original ones, so every route found
    is also feasible for the original instance; pooled routes are verified
    against the original windows.
    """
    base = PeriodContext(instance, period)
    for uid, (e, l) in narrowed_windows.items():
        if uid not in base.requests:
            raise ValueError(f"user {uid} has no request in {period}")
        oe, ol = base.requests[uid].pickup_window
        if not (oe <= e <= l <= ol):
            raise ValueError(f"narrowed window {[e, l]} of {uid} is not inside {[oe, ol]}")
    narrowed = {u: w for u, w in narrowed_windows.items() if w != base.requests[u].pickup_window}
    return _run(instance, period, params, narrowed, history)
