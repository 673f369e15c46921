"""Single-route feasibility kernel.

A route is a depot-to-depot sequence of stops, one pickup or delivery action
per stop.  Travel legs are numbered ``0..m``: leg 0 leaves the depot, leg
``k`` leaves stop ``k-1`` and leg ``m`` returns to the depot.  Each leg runs in
one seat configuration; switching configuration at stop ``k-1`` (so that
leg ``k`` differs from leg ``k-1``) adds ``reconfig_duration`` to that stop's
service time.

Schedules are computed exactly as a system of difference constraints on the
service start times, solved with Bellman-Ford shortest paths.
"""
from __future__ import annotations

from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from fractions import Fraction
from typing import Iterable, NamedTuple, Sequence

from .errors import (
    CapacityInfeasible,
    Infeasible,
    NoFeasibleInsertion,
    RideTimeViolation,
    VerificationError,
    WindowViolation,
)
from .model import (
    Instance,
    PassengerType,
    Period,
    Request,
    TravelMatrix,
    VehicleType,
    expand_requests,
)

PICKUP = "pickup"
DELIVERY = "delivery"
CENT = Decimal("0.01")


class Action(NamedTuple):
    kind: str
    user: str


@dataclass(frozen=True)
class Stop:
    location: str
    action: Action
    earliest: int
    latest: int
    service: int
    max_ride: int
    passenger_type: PassengerType


@dataclass(frozen=True)
class Schedule:
    depot_departure: int
    arrival: tuple[int, ...]
    service_start: tuple[int, ...]
    departure: tuple[int, ...]
    depot_return: int

    @property
    def duration(self) -> int:
        return self.depot_return - self.depot_departure

    def shifted(self, delta: int) -> "Schedule":
        return Schedule(self.depot_departure + delta,
                        tuple(t + delta for t in self.arrival),
                        tuple(t + delta for t in self.service_start),
                        tuple(t + delta for t in self.departure),
                        self.depot_return + delta)


EMPTY_SCHEDULE = Schedule(0, (), (), (), 0)


def request_stops(request: Request, instance: Instance,
                  pickup_window: tuple[int, int] | None = None) -> tuple[Stop, Stop]:
    pw = pickup_window or request.pickup_window
    pick = Stop(request.pickup, Action(PICKUP, request.user), pw[0], pw[1],
                instance.location(request.pickup).service_duration, request.max_ride,
                request.passenger_type)
    drop = Stop(request.delivery, Action(DELIVERY, request.user), request.delivery_window[0],
                request.delivery_window[1], instance.location(request.delivery).service_duration,
                request.max_ride, request.passenger_type)
    return pick, drop


def check_sequence(stops: Sequence[Stop]) -> None:
    """Each user must appear as one pickup followed later by one delivery."""
    seen: dict[str, str] = {}
    for s in stops:
        state = seen.get(s.action.user)
        if s.action.kind == PICKUP and state is None:
            seen[s.action.user] = PICKUP
        elif s.action.kind == DELIVERY and state == PICKUP:
            seen[s.action.user] = DELIVERY
        else:
            raise ValueError(f"invalid stop order for user {s.action.user}")
    if any(v != DELIVERY for v in seen.values()):
        raise ValueError("every pickup needs a later delivery")


# ---------------------------------------------------------------- scheduling

def _bellman_ford(nv: int, edges: list[tuple[int, int, int]], src: int) -> list[float] | None:
    dist = [float("inf")] * nv
    dist[src] = 0
    for _ in range(nv):
        changed = False
        for u, v, w in edges:
            du = dist[u]
            if du + w < dist[v]:
                dist[v] = du + w
                changed = True
        if not changed:
            return dist
    return None  # negative cycle


def _schedule_core(early, late, svc, travel, back, rides):
    """Latest minimum-duration service starts, or None if infeasible.

    ``travel[i]`` is the travel time into stop ``i`` (from the depot for i=0),
    ``back`` the return leg, ``rides`` holds (pickup index, delivery index,
    max ride).  Variables are the service starts; node ``m`` is time zero.
    """
    m = len(early)
    t = 0
    for i in range(m):
        t = max(t + travel[i], early[i])
        if t > late[i]:
            return None
        t += svc[i]
    z = m
    edges = []
    for i in range(m):
        edges.append((z, i, late[i]))
    for i in range(m - 1, 0, -1):
        edges.append((i, i - 1, -(svc[i - 1] + travel[i])))
    for p, d, r in rides:
        edges.append((p, d, r + svc[p]))
    for i in range(m):
        edges.append((i, z, -early[i]))
    # the vehicle cannot leave the depot before minute 0
    edges.append((0, z, -travel[0]))

    if _bellman_ford(m + 1, edges, z) is None:
        return None
    from_last = _bellman_ford(m + 1, edges, m - 1)
    span = -from_last[0]  # min over schedules of start(last) - start(first)
    edges.append((0, m - 1, span))
    latest = _bellman_ford(m + 1, edges, z)
    return [int(latest[i]) for i in range(m)]


def _build_schedule(starts, svc, travel, back) -> Schedule:
    arrival, departure = [], []
    prev = starts[0] - travel[0]
    dep0 = prev
    for i, b in enumerate(starts):
        arrival.append(prev + travel[i])
        prev = b + svc[i]
        departure.append(prev)
    return Schedule(dep0, tuple(arrival), tuple(starts), tuple(departure), prev + back)


def _arrays(stops: Sequence[Stop], vehicle: VehicleType, matrix: TravelMatrix,
            reconfig_legs: Iterable[int]):
    m = len(stops)
    early = [s.earliest for s in stops]
    late = [s.latest for s in stops]
    svc = [s.service for s in stops]
    for k in reconfig_legs:
        if not 1 <= k <= m:
            raise ValueError(f"reconfiguration leg {k} out of range 1..{m}")
        svc[k - 1] += vehicle.reconfig_duration
    locs = [vehicle.depot] + [s.location for s in stops] + [vehicle.depot]
    legs = [matrix.t(a, b) for a, b in zip(locs, locs[1:])]
    pick_at = {}
    rides = []
    for i, s in enumerate(stops):
        if s.action.kind == PICKUP:
            pick_at[s.action.user] = i
        else:
            rides.append((pick_at[s.action.user], i, s.max_ride))
    return early, late, svc, legs[:-1], legs[-1], rides


def _diagnose(early, late, svc, travel, back, rides) -> Infeasible:
    t = 0
    for i in range(len(early)):
        b = max(t + travel[i], early[i])
        if b > late[i]:
            return WindowViolation(i)
        t = b + svc[i]
    for k in range(1, len(rides) + 1):
        prefix = sorted(rides, key=lambda r: r[1])[:k]
        if _schedule_core(early, late, svc, travel, back, prefix) is None:
            return RideTimeViolation(prefix[-1][1])
    return Infeasible("infeasible schedule")


def compute_schedule(stops: Sequence[Stop], vehicle_type: VehicleType, matrix: TravelMatrix,
                     reconfig_legs: Iterable[int] = ()) -> Schedule:
    """Feasible schedule of minimum duration, departing the depot as late as possible.

    Waiting is allowed before any service.  Raises WindowViolation or
    RideTimeViolation (with the first offending stop) when none exists.
    """
    if not stops:
        return EMPTY_SCHEDULE
    check_sequence(stops)
    arrays = _arrays(stops, vehicle_type, matrix, reconfig_legs)
    starts = _schedule_core(*arrays)
    if starts is None:
        raise _diagnose(*arrays)
    early, late, svc, travel, back, _ = arrays
    return _build_schedule(starts, svc, travel, back)


# ---------------------------------------------------------------- configurations

def leg_loads(stops: Sequence[Stop]) -> list[tuple[int, int, int]]:
    """Onboard load vector on each of the ``len(stops) + 1`` legs."""
    load = [0, 0, 0]
    out = [(0, 0, 0)]
    for s in stops:
        k = s.passenger_type.index
        load[k] += 1 if s.action.kind == PICKUP else -1
        out.append(tuple(load))
    return out


def _assign_core(loads, vehicle: VehicleType):
    """(leg configs, number of changes) or (None, offending leg)."""
    caps = [c.vector for c in vehicle.configurations]
    nc = len(caps)
    n = len(loads)
    peak = [max(ld[k] for ld in loads) for k in range(3)]
    for c in range(nc):
        if caps[c][0] >= peak[0] and caps[c][1] >= peak[1] and caps[c][2] >= peak[2]:
            return (c,) * n, 0
    cover = []
    for leg, ld in enumerate(loads):
        ok = [c for c in range(nc) if caps[c][0] >= ld[0] and caps[c][1] >= ld[1] and caps[c][2] >= ld[2]]
        if not ok:
            return None, leg
        cover.append(ok)
    if not vehicle.reconfigurable:
        common = set(range(nc))
        for leg, ok in enumerate(cover):
            common &= set(ok)
            if not common:
                return None, leg
        return (min(common),) * n, 0
    # changes still needed from leg k onward when leg k runs configuration c
    to_go = [dict.fromkeys(cover[-1], 0)]
    for k in range(n - 2, -1, -1):
        nxt = to_go[-1]
        best_next = min(nxt.values())
        to_go.append({c: min(nxt.get(c, n + 1), best_next + 1) for c in cover[k]})
    to_go.reverse()
    first = min(to_go[0], key=lambda c: (to_go[0][c], c))
    seq = [first]
    for k in range(1, n):
        prev = seq[-1]
        seq.append(min(to_go[k], key=lambda c: (to_go[k][c] + (c != prev), c)))
    return tuple(seq), to_go[0][first]


def assign_configurations(stops: Sequence[Stop], vehicle_type: VehicleType) -> tuple[tuple[int, ...], int]:
    """Per-leg configuration indices with the fewest changes; ties take the lowest index."""
    if not stops:
        return (), 0
    loads = leg_loads(stops)
    configs, extra = _assign_core(loads, vehicle_type)
    if configs is None:
        raise CapacityInfeasible(extra, loads[extra])
    return configs, extra


def reconfig_legs_of(leg_configs: Sequence[int]) -> frozenset[int]:
    return frozenset(k for k in range(1, len(leg_configs)) if leg_configs[k] != leg_configs[k - 1])


# ---------------------------------------------------------------- cost

def cost_cents(vehicle: VehicleType, duration_min: int, meters: int) -> int:
    """Fixed + hourly + kilometric cost in integer cents, rounded half-up."""
    exact = (Fraction(vehicle.fixed_cost) + Fraction(vehicle.cost_per_hour) * duration_min / 60
             + Fraction(vehicle.cost_per_km) * meters / 1000) * 100
    return int((exact + Fraction(1, 2)).__floor__())


def cents_to_money(cents: int) -> Decimal:
    return (Decimal(cents) / 100).quantize(CENT)


@dataclass(frozen=True)
class Route:
    vehicle: VehicleType
    period: Period
    stops: tuple[Stop, ...]
    schedule: Schedule
    leg_configs: tuple[int, ...]
    distance_m: int
    cost: Decimal

    @property
    def vehicle_type(self) -> str:
        return self.vehicle.id

    @property
    def actions(self) -> tuple[Action, ...]:
        return tuple(s.action for s in self.stops)

    @property
    def users(self) -> frozenset[str]:
        return frozenset(s.action.user for s in self.stops)

    @property
    def duration(self) -> int:
        return self.schedule.duration if self.stops else 0

    @property
    def n_reconfigs(self) -> int:
        return len(reconfig_legs_of(self.leg_configs))

    def pickup_times(self) -> dict[str, int]:
        return {s.action.user: t for s, t in zip(self.stops, self.schedule.service_start)
                if s.action.kind == PICKUP}

    def ride_times(self) -> dict[str, int]:
        dep = {}
        out = {}
        for s, b, d in zip(self.stops, self.schedule.service_start, self.schedule.departure):
            if s.action.kind == PICKUP:
                dep[s.action.user] = d
            else:
                out[s.action.user] = b - dep[s.action.user]
        return out


def route_cost(route: Route) -> Decimal:
    if not route.stops:
        return Decimal("0.00")
    return cents_to_money(cost_cents(route.vehicle, route.schedule.duration, route.distance_m))


def _meters(matrix: TravelMatrix, vehicle: VehicleType, stops: Sequence[Stop]) -> int:
    locs = [vehicle.depot] + [s.location for s in stops] + [vehicle.depot]
    return sum(round(matrix.d(a, b) * 1000) for a, b in zip(locs, locs[1:]))


def build_route(stops: Sequence[Stop], vehicle: VehicleType, matrix: TravelMatrix, period: Period) -> Route:
    """Assign configurations, schedule and cost a stop sequence; raises Infeasible."""
    stops = tuple(stops)
    if not stops:
        return Route(vehicle, period, (), EMPTY_SCHEDULE, (), 0, Decimal("0.00"))
    configs, _ = assign_configurations(stops, vehicle)
    schedule = compute_schedule(stops, vehicle, matrix, reconfig_legs_of(configs))
    meters = _meters(matrix, vehicle, stops)
    return Route(vehicle, period, stops, schedule, configs, meters,
                 cents_to_money(cost_cents(vehicle, schedule.duration, meters)))


# ---------------------------------------------------------------- verification

def verify_route(route: Route, instance: Instance, pickup_windows: dict[str, tuple[int, int]] | None = None) -> None:
    """Independent check of every route invariant against the instance data.

    Windows, service times and ride limits are read from ``instance``, never
    from the route's own stop records.  Raises VerificationError.
    """
    tag = f"route {route.vehicle.id}/{route.period.name}"
    try:
        vehicle = instance.vehicle(route.vehicle.id)
    except KeyError:
        raise VerificationError(f"{tag}: unknown vehicle type") from None
    if vehicle != route.vehicle:
        raise VerificationError(f"{tag}: vehicle data differs from the instance")
    if not route.stops:
        if route.cost != 0:
            raise VerificationError(f"{tag}: empty route must cost 0")
        return
    requests = {r.user: r for r in expand_requests(instance, route.period)}
    mtx = instance.matrix
    sch = route.schedule
    m = len(route.stops)
    if not (len(sch.arrival) == len(sch.service_start) == len(sch.departure) == m):
        raise VerificationError(f"{tag}: schedule length mismatch")
    if len(route.leg_configs) != m + 1:
        raise VerificationError(f"{tag}: expected {m + 1} leg configurations")
    ncfg = len(vehicle.configurations)
    if any(not 0 <= c < ncfg for c in route.leg_configs):
        raise VerificationError(f"{tag}: configuration index out of range")
    if not vehicle.reconfigurable and len(set(route.leg_configs)) > 1:
        raise VerificationError(f"{tag}: vehicle cannot be reconfigured en route")
    if sch.depot_departure < 0:
        raise VerificationError(f"{tag}: departs before minute 0")

    state: dict[str, str] = {}
    load = [0, 0, 0]
    picked_dep: dict[str, int] = {}
    prev_loc, prev_dep = vehicle.depot, sch.depot_departure
    meters = 0
    for k, stop in enumerate(route.stops):
        user, kind = stop.action.user, stop.action.kind
        req = requests.get(user)
        if req is None:
            raise VerificationError(f"{tag}: user {user} has no request in this period")
        if kind == PICKUP:
            if user in state:
                raise VerificationError(f"{tag}: user {user} picked up twice")
            state[user] = PICKUP
            loc = req.pickup
            win = (pickup_windows or {}).get(user, req.pickup_window)
        elif kind == DELIVERY:
            if state.get(user) != PICKUP:
                raise VerificationError(f"{tag}: user {user} delivered before pickup")
            state[user] = DELIVERY
            loc = req.delivery
            win = req.delivery_window
        else:
            raise VerificationError(f"{tag}: unknown action {kind!r}")
        if stop.location != loc:
            raise VerificationError(f"{tag}: stop {k} at {stop.location}, request expects {loc}")
        if sch.arrival[k] != prev_dep + mtx.t(prev_loc, loc):
            raise VerificationError(f"{tag}: arrival at stop {k} inconsistent with travel time")
        meters += round(mtx.d(prev_loc, loc) * 1000)
        start = sch.service_start[k]
        if start < sch.arrival[k]:
            raise VerificationError(f"{tag}: service at stop {k} starts before arrival")
        if not win[0] <= start <= win[1]:
            raise VerificationError(f"{tag}: stop {k} (user {user}) served at {start}, window {list(win)}")
        service = instance.location(loc).service_duration
        if route.leg_configs[k + 1] != route.leg_configs[k]:
            service += vehicle.reconfig_duration
        if sch.departure[k] != start + service:
            raise VerificationError(f"{tag}: departure at stop {k} inconsistent with service time")
        idx = req.passenger_type.index
        if kind == PICKUP:
            load[idx] += 1
            picked_dep[user] = sch.departure[k]
        else:
            load[idx] -= 1
            if start - picked_dep[user] > req.max_ride:
                raise VerificationError(f"{tag}: user {user} rides {start - picked_dep[user]} min "
                                        f"> max {req.max_ride}")
        cap = vehicle.configurations[route.leg_configs[k + 1]].vector
        if any(x > c for x, c in zip(load, cap)):
            raise VerificationError(f"{tag}: load {tuple(load)} exceeds configuration on leg {k + 1}")
        prev_loc, prev_dep = loc, sch.departure[k]
    if any(v != DELIVERY for v in state.values()):
        raise VerificationError(f"{tag}: a picked-up user is never delivered")
    if sch.depot_return != prev_dep + mtx.t(prev_loc, vehicle.depot):
        raise VerificationError(f"{tag}: depot return inconsistent with travel time")
    meters += round(mtx.d(prev_loc, vehicle.depot) * 1000)
    if meters != route.distance_m:
        raise VerificationError(f"{tag}: distance {route.distance_m} m, recomputed {meters} m")
    expected = cents_to_money(cost_cents(vehicle, sch.depot_return - sch.depot_departure, meters))
    if route.cost != expected:
        raise VerificationError(f"{tag}: cost {route.cost}, recomputed {expected}")


# ---------------------------------------------------------------- cached evaluator

class _Eval(NamedTuple):
    cost: int  # cents
    configs: tuple[int, ...]
    starts: tuple[int, ...]


class PeriodContext:
    """Memoised route evaluation for one period of one instance.

    ``pickup_windows`` replaces the pickup window of selected users (used for
    constrained re-optimisation).  Evaluations are keyed by (vehicle id,
    action tuple) so repeated LNS states cost one dictionary lookup.
    """

    def __init__(self, instance: Instance, period: Period,
                 pickup_windows: dict[str, tuple[int, int]] | None = None):
        self.instance = instance
        self.period = period
        self.pickup_windows = dict(pickup_windows or {})
        self.requests = {r.user: r for r in expand_requests(instance, period)}
        self.users = tuple(sorted(self.requests))
        mtx = instance.matrix
        self._idx = mtx.index
        self._time = mtx.time
        self._meters = [[round(d * 1000) for d in row] for row in mtx.distance]
        self._stop: dict[Action, Stop] = {}
        self._info: dict[Action, tuple] = {}
        for uid, req in self.requests.items():
            for s in request_stops(req, instance, self.pickup_windows.get(uid)):
                self._stop[s.action] = s
                self._info[s.action] = (self._idx[s.location], s.earliest, s.latest, s.service,
                                        s.max_ride, s.passenger_type.index, s.action.kind == PICKUP)
        self.vehicles = {v.id: v for v in instance.vehicle_types}
        self._rates = {
            v.id: (Fraction(v.fixed_cost) * 100, Fraction(v.cost_per_hour) * 100 / 60,
                   Fraction(v.cost_per_km) * 100 / 1000)
            for v in instance.vehicle_types
        }
        self._cache: dict = {}
        self._ins_cache: dict = {}

    def stops(self, actions: Sequence[Action]) -> tuple[Stop, ...]:
        return tuple(self._stop[a] for a in actions)

    def evaluate(self, vid: str, actions: tuple[Action, ...]) -> _Eval | None:
        key = (vid, actions)
        try:
            return self._cache[key]
        except KeyError:
            pass
        res = self._evaluate(vid, actions)
        self._cache[key] = res
        return res

    def _evaluate(self, vid, actions):
        vt = self.vehicles[vid]
        info = [self._info[a] for a in actions]
        depot = self._idx[vt.depot]
        tm = self._time
        # window check on earliest arrivals; reconfiguration can only delay further
        t, prev = 0, depot
        for inf in info:
            t = max(t + tm[prev][inf[0]], inf[1])
            if t > inf[2]:
                return None
            t += inf[3]
            prev = inf[0]
        load = [0, 0, 0]
        loads = [(0, 0, 0)]
        for inf in info:
            load[inf[5]] += 1 if inf[6] else -1
            loads.append((load[0], load[1], load[2]))
        configs, _ = _assign_core(loads, vt)
        if configs is None:
            return None
        svc = [inf[3] for inf in info]
        for k in range(1, len(configs)):
            if configs[k] != configs[k - 1]:
                svc[k - 1] += vt.reconfig_duration
        depot = self._idx[vt.depot]
        nodes = [depot] + [inf[0] for inf in info] + [depot]
        tm, mm = self._time, self._meters
        legs = [tm[a][b] for a, b in zip(nodes, nodes[1:])]
        pick_at = {}
        rides = []
        for i, a in enumerate(actions):
            if info[i][6]:
                pick_at[a.user] = i
            else:
                rides.append((pick_at[a.user], i, info[i][4]))
        starts = _schedule_core([inf[1] for inf in info], [inf[2] for inf in info], svc,
                                legs[:-1], legs[-1], rides)
        if starts is None:
            return None
        duration = starts[-1] + svc[-1] + legs[-1] - (starts[0] - legs[0])
        meters = sum(mm[a][b] for a, b in zip(nodes, nodes[1:]))
        fixed, per_min, per_m = self._rates[vid]
        cents = int((fixed + per_min * duration + per_m * meters + Fraction(1, 2)).__floor__())
        return _Eval(cents, configs, tuple(starts))

    def route(self, vid: str, actions: Sequence[Action]) -> Route:
        """Full Route object; raises Infeasible when the sequence cannot run."""
        return build_route(self.stops(actions), self.vehicles[vid], self.instance.matrix, self.period)

    def best_insertion(self, vid: str, actions: tuple[Action, ...], user: str):
        """Cheapest (delta cents, pickup_pos, delivery_pos) or None; ties by smallest positions."""
        key = (vid, actions, user)
        try:
            return self._ins_cache[key]
        except KeyError:
            pass
        base = self.evaluate(vid, actions).cost if actions else 0
        pick, drop = Action(PICKUP, user), Action(DELIVERY, user)
        best = None
        m = len(actions)
        for i in range(m + 1):
            head = actions[:i] + (pick,)
            for j in range(i, m + 1):
                ev = self.evaluate(vid, head + actions[i:j] + (drop,) + actions[j:])
                if ev is not None and (best is None or ev.cost - base < best[0]):
                    best = (ev.cost - base, i, j)
        self._ins_cache[key] = best
        return best


def insert_actions(actions: tuple[Action, ...], user: str, i: int, j: int) -> tuple[Action, ...]:
    return actions[:i] + (Action(PICKUP, user),) + actions[i:j] + (Action(DELIVERY, user),) + actions[j:]


@dataclass(frozen=True)
class Insertion:
    pickup_pos: int
    delivery_pos: int
    cost_delta: Decimal
    route: Route


def evaluate_insertion(route: Route, request: Request, instance: Instance) -> Insertion:
    """Best position pair for ``request`` in ``route`` (positions index the old sequence).

    The pickup is inserted before old stop ``pickup_pos`` and the delivery
    before old stop ``delivery_pos``; when equal, pickup comes first.
    """
    if request.period != route.period:
        raise ValueError("request and route belong to different periods")
    if request.user in route.users:
        raise ValueError(f"user {request.user} already in route")
    ctx = PeriodContext(instance, route.period)
    actions = route.actions
    base = 0 if not actions else int(route.cost * 100)
    pick, drop = request_stops(request, instance)
    best = None
    m = len(actions)
    for i in range(m + 1):
        for j in range(i, m + 1):
            ev = ctx.evaluate(route.vehicle.id, insert_actions(actions, request.user, i, j))
            if ev is not None and (best is None or ev.cost - base < best[0]):
                best = (ev.cost - base, i, j)
    if best is None:
        raise NoFeasibleInsertion(f"no feasible position for user {request.user}")
    delta, i, j = best
    stops = route.stops[:i] + (pick,) + route.stops[i:j] + (drop,) + route.stops[j:]
    new = build_route(stops, route.vehicle, instance.matrix, route.period)
    return Insertion(i, j, cents_to_money(delta), new)
