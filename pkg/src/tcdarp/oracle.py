"""Brute-force references for desk-scale inputs.

These share no search logic with the production solvers: schedules are
enumerated on the minute grid, configurations and time classes by
exhaustive assignment, half-days by enumerating every partition and stop
order, and master problems by enumerating every route subset.
"""
from __future__ import annotations

import itertools
from decimal import Decimal
from functools import lru_cache
from typing import Sequence

from .errors import CapacityInfeasible, Infeasible, MasterInfeasible, SizeLimit
from .lns import HalfDaySolution
from .master import HardCap, MasterProblem, MasterSolution, make_solution, request_order
from .model import Instance, Period, TravelMatrix, VehicleType, expand_requests
from .routing import (
    DELIVERY,
    PICKUP,
    Route,
    Schedule,
    Stop,
    cents_to_money,
    compute_schedule,
    cost_cents,
    request_stops,
)

INF = float("inf")
MAX_SCHEDULE_STOPS = 10
MAX_CLASS_TIMES = 8
MAX_HALFDAY_REQUESTS = 4
MAX_HALFDAY_VEHICLES = 2
MAX_MASTER_ROUTES = 15
# departures this many minutes before the first arrival that could be on time are also tried
DEPOT_SLACK = 3


def schedule_bruteforce(stops: Sequence[Stop], vehicle_type: VehicleType, matrix: TravelMatrix,
                        reconfig_legs=()) -> Schedule:
    """Minimum-duration schedule by minute-grid enumeration; latest depot departure on ties.

    Every depot departure minute is tried and, at each pickup, every service
    start minute in its window.  A delivery starts as soon as allowed: waiting
    there can always be moved to the next stop without breaking any
    constraint.  Raises Infeasible when no grid point is feasible.
    """
    m = len(stops)
    if m > MAX_SCHEDULE_STOPS:
        raise SizeLimit(f"schedule oracle limited to {MAX_SCHEDULE_STOPS} stops, got {m}")
    if m == 0:
        return Schedule(0, (), (), (), 0)
    svc = [s.service for s in stops]
    for k in reconfig_legs:
        svc[k - 1] += vehicle_type.reconfig_duration
    path = [vehicle_type.depot] + [s.location for s in stops] + [vehicle_type.depot]
    travel = [matrix.t(a, b) for a, b in zip(path, path[1:])]
    pickup_stop = {}
    for i, s in enumerate(stops):
        if s.action.kind == PICKUP:
            pickup_stop[s.action.user] = i
    # earliest possible offset from departing stop i to arriving at stop j
    reach = [[0] * (m + 1) for _ in range(m)]
    for i in range(m):
        acc = 0
        for j in range(i + 1, m + 1):
            acc += travel[j]
            reach[i][j] = acc
            if j < m:
                acc += svc[j]

    def pickup_range(i, avail, onboard):
        lo, hi = max(avail, stops[i].earliest), stops[i].latest
        for j in range(i + 1, m):
            hi = min(hi, stops[j].latest - reach[i][j] - svc[i])
        for user, dep in onboard:
            d = next(j for j in range(i + 1, m) if stops[j].action == (DELIVERY, user))
            hi = min(hi, dep + stops[d].max_ride - reach[i][d] - svc[i])
        return lo, hi

    @lru_cache(maxsize=None)
    def best_return(i: int, avail: int, onboard: tuple) -> float:
        if i == m:
            return avail
        s = stops[i]
        if s.action.kind == DELIVERY:
            start = max(avail, s.earliest)
            dep = dict(onboard)[s.action.user]
            if start > s.latest or start - dep > s.max_ride:
                return INF
            rest = tuple(x for x in onboard if x[0] != s.action.user)
            return best_return(i + 1, start + svc[i] + travel[i + 1], rest)
        lo, hi = pickup_range(i, avail, onboard)
        best = INF
        for start in range(lo, hi + 1):
            nxt = tuple(sorted(onboard + ((s.action.user, start + svc[i]),)))
            best = min(best, best_return(i + 1, start + svc[i] + travel[i + 1], nxt))
        return best

    hi0 = stops[0].latest - travel[0]
    lo0 = max(0, min(stops[0].earliest - travel[0], hi0) - DEPOT_SLACK)
    best = None
    for dep0 in range(lo0, hi0 + 1):
        end = best_return(0, dep0 + travel[0], ())
        if end == INF:
            continue
        dur = end - dep0
        if best is None or dur <= best[0]:
            best = (dur, dep0, int(end))
    if best is None:
        raise Infeasible("no feasible schedule on the minute grid")

    # rebuild one optimal grid path, preferring later service starts
    dur, dep0, end = best
    arrival, starts, departs = [], [], []
    avail, onboard = dep0 + travel[0], ()
    for i, s in enumerate(stops):
        arrival.append(avail)
        if s.action.kind == DELIVERY:
            start = max(avail, s.earliest)
            onboard = tuple(x for x in onboard if x[0] != s.action.user)
        else:
            lo, hi = pickup_range(i, avail, onboard)
            start = next(t for t in range(hi, lo - 1, -1)
                         if best_return(i + 1, t + svc[i] + travel[i + 1],
                                        tuple(sorted(onboard + ((s.action.user, t + svc[i]),)))) == end)
            onboard = tuple(sorted(onboard + ((s.action.user, start + svc[i]),)))
        starts.append(start)
        departs.append(start + svc[i])
        avail = start + svc[i] + travel[i + 1]
    return Schedule(dep0, tuple(arrival), tuple(starts), tuple(departs), end)


def config_bruteforce(stops: Sequence[Stop], vehicle_type: VehicleType) -> tuple[tuple[int, ...], int]:
    """Fewest configuration changes over every per-leg assignment (lexicographically first on ties)."""
    n_legs = len(stops) + 1 if stops else 0
    if n_legs == 0:
        return (), 0
    if n_legs > 12:
        raise SizeLimit("configuration oracle limited to 12 legs")
    loads = []
    load = [0, 0, 0]
    loads.append(tuple(load))
    for s in stops:
        load[s.passenger_type.index] += 1 if s.action.kind == PICKUP else -1
        loads.append(tuple(load))
    caps = [c.vector for c in vehicle_type.configurations]
    best: list = [None, None]

    def fits(c, ld):
        return all(a >= b for a, b in zip(caps[c], ld))

    def dfs(seq, changes):
        if best[0] is not None and changes > best[0]:
            return
        if len(seq) == n_legs:
            if best[0] is None or changes < best[0] or (changes == best[0] and tuple(seq) < best[1]):
                best[0], best[1] = changes, tuple(seq)
            return
        leg = len(seq)
        for c in range(len(caps)):
            if not fits(c, loads[leg]):
                continue
            if seq and c != seq[-1] and not vehicle_type.reconfigurable:
                continue
            dfs(seq + [c], changes + (1 if seq and c != seq[-1] else 0))

    dfs([], 0)
    if best[0] is None:
        leg = next((k for k, ld in enumerate(loads) if not any(fits(c, ld) for c in range(len(caps)))), 0)
        raise CapacityInfeasible(leg, loads[leg])
    return best[1], best[0]


def classes_bruteforce(times: Sequence[int], width: int) -> int:
    """Fewest blocks in a partition of ``times`` where every block spans at most ``width``."""
    times = list(times)
    if len(times) > MAX_CLASS_TIMES:
        raise SizeLimit(f"class oracle limited to {MAX_CLASS_TIMES} times")
    if not times:
        return 0
    best = [len(times)]

    def dfs(k, blocks):
        if len(blocks) >= best[0]:
            return
        if k == len(times):
            best[0] = len(blocks)
            return
        t = times[k]
        for b in blocks:
            lo, hi = b
            if max(hi, t) - min(lo, t) <= width:
                dfs(k + 1, [x if x is not b else (min(lo, t), max(hi, t)) for x in blocks])
        dfs(k + 1, blocks + [(t, t)])

    dfs(0, [])
    return best[0]


# ---------------------------------------------------------------- half-day

def _sequences(users: Sequence[str]):
    """Every action order of ``users`` with each pickup before its delivery."""
    def rec(seq, waiting, onboard):
        if not waiting and not onboard:
            yield tuple(seq)
            return
        for u in sorted(waiting):
            yield from rec(seq + [(PICKUP, u)], waiting - {u}, onboard | {u})
        for u in sorted(onboard):
            yield from rec(seq + [(DELIVERY, u)], waiting, onboard - {u})
    yield from rec([], frozenset(users), frozenset())


def _set_partitions(items):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for part in _set_partitions(rest):
        yield [[first]] + part
        for k in range(len(part)):
            yield part[:k] + [[first] + part[k]] + part[k + 1:]


def _best_route(instance: Instance, period: Period, group: Sequence[str], vehicle: VehicleType,
                stops_by_action, scheduler):
    best = None
    for seq in _sequences(group):
        stops = [stops_by_action[a] for a in seq]
        # necessary condition: on time without any waiting choice or reconfiguration delay
        path = [vehicle.depot] + [s.location for s in stops] + [vehicle.depot]
        t, ok = 0, True
        for i, s in enumerate(stops):
            t = max(t + instance.matrix.t(path[i], path[i + 1]), s.earliest)
            if t > s.latest:
                ok = False
                break
            t += s.service
        if not ok:
            continue
        try:
            configs, _ = config_bruteforce(stops, vehicle)
        except CapacityInfeasible:
            continue
        changes = frozenset(k for k in range(1, len(configs)) if configs[k] != configs[k - 1])
        try:
            sch = scheduler(stops, vehicle, instance.matrix, changes)
        except Infeasible:
            continue
        meters = sum(round(instance.matrix.d(a, b) * 1000) for a, b in zip(path, path[1:]))
        cents = cost_cents(vehicle, sch.duration, meters)
        if best is None or cents < best[0]:
            best = (cents, Route(vehicle, period, tuple(stops), sch, configs, meters, cents_to_money(cents)))
    return best


SCHEDULERS = {"bruteforce": schedule_bruteforce, "kernel": compute_schedule}


def halfday_bruteforce(instance: Instance, period: Period, penalty: Decimal | None = None,
                       scheduler: str = "bruteforce") -> HalfDaySolution:
    """Optimal half-day solution over all partitions, vehicle choices and stop orders.

    Requests may also stay unassigned at ``penalty`` each (default: ten
    times the dearest cheapest single-request route, as in the LNS).
    """
    requests = expand_requests(instance, period)
    if len(requests) > MAX_HALFDAY_REQUESTS:
        raise SizeLimit(f"half-day oracle limited to {MAX_HALFDAY_REQUESTS} requests")
    if len(instance.vehicle_types) > MAX_HALFDAY_VEHICLES:
        raise SizeLimit(f"half-day oracle limited to {MAX_HALFDAY_VEHICLES} vehicle types")
    if not requests:
        return HalfDaySolution(period, (), frozenset(), Decimal("0.00"))
    sched = SCHEDULERS[scheduler]
    stops_by_action = {}
    for r in requests:
        p, d = request_stops(r, instance)
        stops_by_action[(PICKUP, r.user)] = p
        stops_by_action[(DELIVERY, r.user)] = d
    users = [r.user for r in requests]
    table = {}
    for size in range(1, len(users) + 1):
        for group in itertools.combinations(users, size):
            for v in instance.vehicle_types:
                table[(group, v.id)] = _best_route(instance, period, group, v, stops_by_action, sched)
    if penalty is None:
        singles = [min((table[((u,), v.id)][0] for v in instance.vehicle_types if table[((u,), v.id)]),
                       default=None) for u in users]
        singles = [s for s in singles if s is not None]
        pen = 10 * max(singles) if singles else 10 * 100_00
    else:
        pen = int(penalty * 100)

    best = None
    for n_out in range(len(users) + 1):
        for out in itertools.combinations(users, n_out):
            rest = [u for u in users if u not in out]
            for part in _set_partitions(rest):
                blocks = [tuple(sorted(b)) for b in part]
                for vids in itertools.product([v.id for v in instance.vehicle_types], repeat=len(blocks)):
                    if any(instance.vehicle(v).available is not None and vids.count(v) > instance.vehicle(v).available
                           for v in set(vids)):
                        continue
                    entries = [table[(b, v)] for b, v in zip(blocks, vids)]
                    if any(e is None for e in entries):
                        continue
                    total = sum(e[0] for e in entries) + pen * len(out)
                    if best is None or total < best[0]:
                        best = (total, [e[1] for e in entries], frozenset(out))
    total, routes, out = best
    return HalfDaySolution(period, tuple(routes), out, cents_to_money(total), cents_to_money(pen))


# ---------------------------------------------------------------- master

def master_bruteforce(problem: MasterProblem) -> MasterSolution:
    """Optimal selection by enumerating every subset of the problem's routes."""
    routes = list(problem.routes)
    if len(routes) > MAX_MASTER_ROUTES:
        raise SizeLimit(f"master oracle limited to {MAX_MASTER_ROUTES} routes")
    target = sorted(problem.requests, key=request_order)
    cap = problem.mode.k if isinstance(problem.mode, HardCap) else None
    lam = 0 if cap is not None else int((problem.mode.lam * 100).to_integral_value())
    best = None
    for mask in range(1 << len(routes)):
        chosen = [routes[i] for i in range(len(routes)) if mask >> i & 1]
        served = sorted((rq for r in chosen for rq in r.served), key=request_order)
        if served != target:
            continue
        times: dict = {}
        for r in chosen:
            for uid, t in r.pickup_time.items():
                g = (uid, -1 if problem.pooled else int(r.period.half))
                times.setdefault(g, []).append(t)
        counts = [classes_bruteforce(ts, problem.width) for ts in times.values()]
        if cap is not None and any(c > cap for c in counts):
            continue
        cost = sum(int(r.cost * 100) for r in chosen)
        obj = cost + lam * sum(c - 1 for c in counts)
        if best is None or obj < best[0]:
            best = (obj, chosen)
    if best is None:
        raise MasterInfeasible(None)
    return make_solution(problem, best[1], "proved")


# ---------------------------------------------------------------- one-command cross-check

def oracle_checks(instance: Instance, period: Period, iterations: int = 2000, seed: int = 0) -> list[tuple]:
    """(name, passed, detail) for each production-vs-oracle comparison on one tiny period."""
    from .consistency import count_classes
    from .lns import LnsParams, solve_halfday
    from .master import WeightedPenalty, build_master, solve_master
    from .routing import assign_configurations

    results = []
    reference = halfday_bruteforce(instance, period)
    sol, pool = solve_halfday(instance, period, LnsParams(iterations=iterations, seed=seed))
    results.append(("halfday", sol.total_cost == reference.total_cost,
                    f"lns {sol.total_cost} vs exhaustive {reference.total_cost}"))

    routes = sorted(pool, key=lambda r: (r.cost, r.signature))
    agree_s = agree_c = 0
    for pr in routes:
        stops = pr.route.stops
        configs, n = assign_configurations(stops, pr.route.vehicle)
        _, n_ref = config_bruteforce(stops, pr.route.vehicle)
        agree_c += n == n_ref
        legs = frozenset(k for k in range(1, len(configs)) if configs[k] != configs[k - 1])
        try:
            ref = schedule_bruteforce(stops, pr.route.vehicle, instance.matrix, legs)
            agree_s += ref.duration == compute_schedule(stops, pr.route.vehicle, instance.matrix, legs).duration
        except SizeLimit:
            agree_s += 1  # too long to enumerate; counted as not contradicting
    results.append(("schedule", agree_s == len(routes), f"{agree_s}/{len(routes)} pooled routes agree"))
    results.append(("configuration", agree_c == len(routes), f"{agree_c}/{len(routes)} pooled routes agree"))

    times = [t for pr in routes for t in pr.pickup_time.values()][:MAX_CLASS_TIMES]
    w = instance.consistency_width
    results.append(("classes", count_classes(times, w) == classes_bruteforce(times, w),
                    f"{len(times)} pooled pickup times, width {w}"))

    subset = routes[:MAX_MASTER_ROUTES]
    served = sorted({rq for pr in subset for rq in pr.served}, key=request_order)
    try:
        problem = build_master(subset, instance, served, mode=WeightedPenalty(Decimal("1")))
        exact, brute = solve_master(problem, time_limit=None), master_bruteforce(problem)
        results.append(("master", exact.objective == brute.objective,
                        f"branch and bound {exact.objective} vs enumeration {brute.objective}"))
    except MasterInfeasible:
        results.append(("master", True, "no partition of the cheapest routes; nothing to compare"))
    return results
