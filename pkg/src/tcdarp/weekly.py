"""Weekly planning loop: half-day LNS, route pool, consistency master, targeted re-generation.

Round 0 solves the ten periods independently and takes the union as the
incumbent: cheap, but with no regard for regularity.  Each later round
selects routes from the pool with the master problem, adopts the selection
when it improves (target metric first, cost second), and then re-solves
the periods where a user's pickup falls outside that user's majority window
with the pickup window narrowed to it.  The penalty weight grows between
rounds.
"""
from __future__ import annotations

import os
from fractions import Fraction
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Callable, Iterable, Mapping, Sequence

from .consistency import ConsistencyReport, plan_consistency
from .errors import MasterInfeasible, VerificationError
from .lns import HalfDaySolution, LnsParams, solve_halfday, solve_halfday_constrained
from .master import HardCap, WeightedPenalty, build_master, group_of, solve_master
from .model import PERIODS, Instance, Period, expand_requests
from .pool import PoolRoute, RoutePool
from .routing import Route, cents_to_money, request_stops, verify_route

ZERO = Decimal("0.00")
LAMBDA_SEED = Decimal("1.00")  # first non-zero weight when starting from pure cost


@dataclass(frozen=True)
class WeeklyParams:
    lns: LnsParams = field(default_factory=LnsParams)
    lambda0: Decimal = Decimal("0")
    lambda_growth: Decimal = Decimal("2")
    max_rounds: int = 10
    max_classes: int | None = None  # None: aim for zero excess classes; K: at most K per user-half
    intensify: bool = True
    intensify_iterations: int = 2000
    width: int | None = None  # None: the instance's consistency width
    pool_subset_n: int = 50
    pooled_halves: bool = False
    master_time_limit: float | None = None
    master_node_limit: int | None = 20_000
    workers: int = 1

    def __post_init__(self):
        if self.lambda_growth <= 1:
            raise ValueError("lambda_growth must exceed 1")
        if self.lambda0 < 0:
            raise ValueError("lambda0 must be >= 0")
        if self.max_rounds < 0:
            raise ValueError("max_rounds must be >= 0")
        if self.intensify_iterations <= 0 or self.pool_subset_n <= 0:
            raise ValueError("budgets must be positive")
        if self.max_classes is not None and self.max_classes < 1:
            raise ValueError("max_classes must be >= 1")
        if self.width is not None and self.width <= 0:
            raise ValueError("width must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class TraceEntry:
    round: int
    total_cost: Decimal
    total_classes: int


@dataclass(frozen=True)
class RoundLog:
    round: int
    mode: str
    lam: Decimal
    status: str  # master status, "infeasible" or "skipped"
    nodes: int
    objective: Decimal | None
    adopted: bool
    pool_size: int
    new_routes: int


@dataclass(frozen=True)
class WeeklyPlan:
    solutions: Mapping[Period, HalfDaySolution]
    report: ConsistencyReport
    total_cost: Decimal
    trace: tuple[TraceEntry, ...] = ()
    target_met: bool = False
    rounds: tuple[RoundLog, ...] = ()


def plan_total(solutions: Mapping[Period, HalfDaySolution]) -> Decimal:
    return sum((s.total_cost for s in solutions.values()), ZERO)


def _metric(report: ConsistencyReport, params: WeeklyParams) -> int:
    if params.max_classes is None:
        return report.total_excess
    return report.cap_excess(params.max_classes)


def _workers_map(fn: Callable, jobs: Sequence, workers: int) -> list:
    if workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as ex:
        return list(ex.map(fn, *zip(*jobs)))


def _period_seed(seed: int, period: Period, salt: int = 0) -> int:
    return seed * 1_000 + salt * 10 + PERIODS.index(period)


def transplant(routes: Iterable[Route], instance: Instance) -> list[PoolRoute]:
    """Copies of routes, same stops and times, on other days of the same half.

    A copy is kept only when every passenger attends the target period and
    the copy passes route verification there.
    """
    out = []
    for route in routes:
        for target in PERIODS:
            if target == route.period or target.half != route.period.half:
                continue
            reqs = {r.user: r for r in expand_requests(instance, target)}
            if not route.users <= reqs.keys():
                continue
            stops = []
            for a in route.actions:
                pick, drop = request_stops(reqs[a.user], instance)
                stops.append(pick if a.kind == "pickup" else drop)
            copy = Route(route.vehicle, target, tuple(stops), route.schedule, route.leg_configs,
                         route.distance_m, route.cost)
            try:
                verify_route(copy, instance)
            except VerificationError:
                continue
            out.append(PoolRoute.from_route(copy))
    return out


def majority_window(times: Iterable[int], width: int) -> tuple[int, int]:
    """Window [t, t + width] anchored at an observed time that covers the most times; earliest on ties."""
    ts = sorted(times)
    best = max(ts, key=lambda a: (sum(a <= t <= a + width for t in ts), -a))
    return best, best + width


def intensification_targets(instance: Instance, solutions: Mapping[Period, HalfDaySolution],
                            width: int, pooled: bool = False) -> dict[Period, dict[str, tuple[int, int]]]:
    """Per period, the narrowed pickup windows of users whose time misses their majority window."""
    times: dict[tuple, dict[Period, int]] = {}
    for period, sol in solutions.items():
        for route in sol.routes:
            for uid, t in route.pickup_times().items():
                times.setdefault(group_of(uid, period, pooled), {})[period] = t
    out: dict[Period, dict[str, tuple[int, int]]] = {}
    for (uid, _), by_period in sorted(times.items()):
        if len({t for t in by_period.values()}) < 2:
            continue
        lo, hi = majority_window(by_period.values(), width)
        if all(lo <= t <= hi for t in by_period.values()):
            continue
        user = instance.user(uid)
        for period, t in sorted(by_period.items()):
            if lo <= t <= hi:
                continue
            e, l = user.pickup_window(period.half)
            ne, nl = max(e, lo), min(l, hi)
            if ne <= nl:
                out.setdefault(period, {})[uid] = (ne, nl)
    return dict(sorted(out.items()))


def _solve_period(instance, period, lns):
    return solve_halfday(instance, period, lns)


def _solve_constrained(instance, period, lns, narrowed):
    return solve_halfday_constrained(instance, period, lns, narrowed)


def _solutions_from(selected: Iterable[PoolRoute], base: Mapping[Period, HalfDaySolution]) -> dict:
    by_period: dict[Period, list[Route]] = {p: [] for p in base}
    for pr in selected:
        by_period[pr.period].append(pr.route)
    out = {}
    for p, old in base.items():
        routes = tuple(sorted(by_period[p], key=lambda r: (r.vehicle.id, r.actions)))
        cost = sum((r.cost for r in routes), ZERO) + old.penalty * len(old.unassigned)
        out[p] = HalfDaySolution(p, routes, old.unassigned, cost, old.penalty)
    return out


def solve_week(instance: Instance, params: WeeklyParams | None = None) -> WeeklyPlan:
    """Weekly plan with a cost-versus-regularity trace; deterministic for fixed parameters."""
    params = params or WeeklyParams()
    width = params.width or instance.consistency_width
    pooled = params.pooled_halves

    jobs = [(instance, p, replace(params.lns, seed=_period_seed(params.lns.seed, p))) for p in PERIODS]
    results = _workers_map(_solve_period, jobs, params.workers)
    solutions = {p: sol for p, (sol, _) in zip(PERIODS, results)}
    pool = RoutePool()
    for _, routes in results:
        pool.merge(routes)
    pool.merge(transplant((r for s in solutions.values() for r in s.routes), instance))

    def report_of(sols):
        return plan_consistency(sols, width, pooled=pooled, instance=instance)

    report = report_of(solutions)
    total = plan_total(solutions)
    trace = [TraceEntry(0, total, report.total_classes)]
    logs: list[RoundLog] = []
    lam = params.lambda0
    mode_name = "weighted" if params.max_classes is None else "hardcap"

    for rnd in range(1, params.max_rounds + 1):
        if _metric(report, params) == 0:
            break
        requests = [(u, p) for p, s in solutions.items() for u in sorted(s.served())]
        incumbent = [pool.add_route(r) for s in solutions.values() for r in s.routes]
        mode = HardCap(params.max_classes) if params.max_classes is not None else WeightedPenalty(lam)
        adopted, status, nodes, objective = False, "skipped", 0, None
        if requests:
            problem = build_master(pool, instance, requests, incumbent=incumbent,
                                   n_per_request=params.pool_subset_n, mode=mode,
                                   pooled=pooled, width=width)
            try:
                ms = solve_master(problem, params.master_time_limit, params.master_node_limit)
                status, nodes, objective = ms.status, ms.nodes, ms.objective
                cand = _solutions_from((problem.route(rid) for rid in ms.selected), solutions)
                cand_report = report_of(cand)
                cand_total = plan_total(cand)
                better = (_metric(cand_report, params), cand_total) < (_metric(report, params), total)
                if better and cand_report.total_classes <= report.total_classes:
                    solutions, report, total, adopted = cand, cand_report, cand_total, True
            except MasterInfeasible:
                status = "infeasible"

        before = len(pool)
        if params.intensify and _metric(report, params) > 0:
            targets = intensification_targets(instance, solutions, width, pooled)
            jobs = [(instance, p, replace(params.lns, iterations=params.intensify_iterations,
                                          seed=_period_seed(params.lns.seed, p, rnd)), narrowed)
                    for p, narrowed in targets.items()]
            for sol, routes in _workers_map(_solve_constrained, jobs, params.workers):
                pool.merge(routes)
                pool.merge(transplant(sol.routes, instance))
        logs.append(RoundLog(rnd, mode_name, lam if params.max_classes is None else ZERO, status,
                             nodes, objective, adopted, len(pool), len(pool) - before))
        trace.append(TraceEntry(rnd, total, report.total_classes))
        lam = LAMBDA_SEED if lam == 0 else lam * params.lambda_growth

    return WeeklyPlan(solutions, report, total, tuple(trace), _metric(report, params) == 0, tuple(logs))


def threads_from_env(default: int | None = None) -> int:
    raw = os.environ.get("TCDARP_THREADS")
    if raw is None:
        return default if default is not None else len(PERIODS)
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"TCDARP_THREADS must be a positive integer, got {raw!r}") from None
    if n < 1:
        raise ValueError(f"TCDARP_THREADS must be a positive integer, got {raw!r}")
    return n


# ---------------------------------------------------------------- evaluation

def verify_solutions(instance: Instance, solutions) -> None:
    """Each request of each period appears once, in a route or among the unassigned."""
    for period in PERIODS:
        sol = solutions.get(period)
        wanted = {r.user for r in expand_requests(instance, period)}
        seen: list[str] = [] if sol is None else [u for r in sol.routes for u in sorted(r.users)]
        seen += [] if sol is None else sorted(sol.unassigned)
        if len(seen) != len(set(seen)):
            dup = sorted({u for u in seen if seen.count(u) > 1})
            raise VerificationError(f"{period.name}: users {dup} served more than once")
        if set(seen) != wanted:
            missing, extra = sorted(wanted - set(seen)), sorted(set(seen) - wanted)
            raise VerificationError(f"{period.name}: missing {missing}, unexpected {extra}")


def evaluate_plan(instance: Instance, plan, emission_factor: float = 0.25) -> dict:
    """Cost, distance, duration, ride-time and regularity figures of a plan.

    Every route is re-verified against the instance first (plans may come
    from files); requests neither routed nor listed unassigned are an error.
    ``plan`` is a WeeklyPlan or a mapping of period to half-day solution.
    """
    solutions = plan.solutions if hasattr(plan, "solutions") else plan
    verify_solutions(instance, solutions)
    fixed = hourly = per_km = Fraction(0)
    meters = minutes = 0
    vehicles: dict[str, int] = {}
    rides: list[int] = []
    for period in PERIODS:
        sol = solutions.get(period)
        vehicles[period.name] = 0 if sol is None else len(sol.routes)
        if sol is None:
            continue
        for route in sol.routes:
            verify_route(route, instance)
            v = route.vehicle
            fixed += Fraction(v.fixed_cost)
            hourly += Fraction(v.cost_per_hour) * route.duration / 60
            per_km += Fraction(v.cost_per_km) * route.distance_m / 1000
            meters += route.distance_m
            minutes += route.duration
            rides.extend(route.ride_times().values())
    width = getattr(getattr(plan, "report", None), "width", None) or instance.consistency_width
    pooled = getattr(getattr(plan, "report", None), "pooled", False)
    report = plan_consistency(solutions, width, pooled=pooled, instance=instance)
    routing = sum((r.cost for s in solutions.values() for r in s.routes), ZERO)
    unassigned = sum(len(s.unassigned) for s in solutions.values())
    penalties = sum((s.penalty * len(s.unassigned) for s in solutions.values()), ZERO)
    km = meters / 1000

    def money(x: Fraction) -> Decimal:
        return cents_to_money(int((x * 100 + Fraction(1, 2)).__floor__()))

    return {
        "total_cost": routing + penalties,
        "routing_cost": routing,
        "cost_fixed": money(fixed),
        "cost_hourly": money(hourly),
        "cost_km": money(per_km),
        "unassigned": unassigned,
        "total_km": round(km, 3),
        "total_vehicle_hours": round(minutes / 60, 4),
        "vehicles_per_period": vehicles,
        "mean_ride_min": round(sum(rides) / len(rides), 4) if rides else 0.0,
        "max_ride_min": max(rides, default=0),
        "total_classes": report.total_classes,
        "total_excess_classes": report.total_excess,
        "max_classes": report.max_classes,
        "kg_co2": round(km * emission_factor, 4),
    }
