from __future__ import annotations

import hashlib
import random
from decimal import Decimal

import pytest

from tcdarp.model import (
    PERIODS,
    Configuration,
    Instance,
    Location,
    PassengerType,
    Period,
    TravelMatrix,
    User,
    VehicleType,
)
from tcdarp.pool import PoolRoute
from tcdarp.routing import DELIVERY, PICKUP, Action, Stop

OPEN_DAY = (0, 1440)


def bus(**kw) -> VehicleType:
    base = dict(id="bus", depot="depot", configurations=(Configuration(4, 0, 0), Configuration(2, 1, 0)),
                fixed_cost=Decimal("50"), cost_per_km=Decimal("0.5"), cost_per_hour=Decimal("20"),
                reconfig_duration=3)
    base.update(kw)
    return VehicleType(**base)


def line_instance(n_users: int = 2, *, periods=PERIODS, vehicles=None, spacing_km: float = 2.0,
                  ptypes=None, max_ride: int = 120, width: int = 15) -> Instance:
    """Homes h0..h(n-1) on a line east of the depot, one establishment west of it; open windows."""
    locs = [Location("depot", 0.0, 0.0, 0), Location("est", -2.0, 0.0, 1)]
    locs += [Location(f"h{i}", spacing_km * (i + 1), 0.0, 2) for i in range(n_users)]
    users = []
    for i in range(n_users):
        pt = ptypes[i] if ptypes else PassengerType.SEATED
        users.append(User(f"u{i}", pt, f"h{i}", "est", max_ride, frozenset(periods),
                          OPEN_DAY, OPEN_DAY, OPEN_DAY, OPEN_DAY))
    return Instance(tuple(users), tuple(vehicles or (bus(),)), tuple(locs),
                    TravelMatrix.euclidean(locs), width)


def fake_route(period: Period, users, times, cost, vehicle: str = "v") -> PoolRoute:
    """Pool entry carrying only what the master reads."""
    users = tuple(users)
    sig = (period.name, vehicle, users, tuple(times))
    return PoolRoute(hashlib.sha1(repr(sig).encode()).hexdigest()[:12], period, None, Decimal(cost),
                     frozenset((u, period) for u in users), dict(zip(users, times)), sig)


def random_pool(rng: random.Random, max_routes: int = 15):
    """Small random pool over 1-3 users and 1-3 periods, pickup times on a coarse grid."""
    users = [f"u{i}" for i in range(rng.randint(1, 3))]
    periods = sorted(rng.sample(PERIODS, rng.randint(1, 3)))
    routes = {}
    for _ in range(rng.randint(2, max_routes)):
        p = rng.choice(periods)
        us = sorted(rng.sample(users, rng.randint(1, len(users))))
        ts = [rng.choice([480, 485, 490, 500, 510, 525]) for _ in us]
        r = fake_route(p, us, ts, f"{rng.randint(40, 300)}.{rng.randint(0, 99):02d}")
        routes[r.signature] = r
    return sorted(routes.values(), key=lambda r: r.signature)


def random_sequence(rng: random.Random, n_requests: int):
    """Random stop sequence (precedence respected) over a small planar matrix.

    Windows and ride limits are drawn around the direct travel times so that
    roughly half the sequences are feasible.
    """
    pts = [("depot", 0.0, 0.0)] + [(f"l{k}", rng.uniform(-3, 3), rng.uniform(-3, 3))
                                   for k in range(2 * n_requests)]
    locs = [Location(i, x, y, rng.randint(0, 2) if i != "depot" else 0) for i, x, y in pts]
    mtx = TravelMatrix.euclidean(locs)
    svc = {l.id: l.service_duration for l in locs}
    ptypes = list(PassengerType)
    stops = {}
    for r in range(n_requests):
        u = f"r{r}"
        p_loc, d_loc = f"l{2 * r}", f"l{2 * r + 1}"
        direct = mtx.t(p_loc, d_loc)
        e = rng.randint(10, 40)
        pw = (e, e + rng.randint(0, 30))
        de = e + direct + rng.randint(-5, 30)
        dw = (max(0, de), max(0, de) + rng.randint(5, 40))
        ride = direct + rng.randint(5, 40)
        pt = rng.choice(ptypes)
        stops[(PICKUP, u)] = Stop(p_loc, Action(PICKUP, u), pw[0], pw[1], svc[p_loc], ride, pt)
        stops[(DELIVERY, u)] = Stop(d_loc, Action(DELIVERY, u), dw[0], dw[1], svc[d_loc], ride, pt)
    # order mostly by window start, with enough noise to produce late and crossing visits
    key = {a: s.earliest + rng.uniform(-15, 15) for a, s in stops.items()}
    seq, waiting, onboard = [], [f"r{r}" for r in range(n_requests)], []
    while waiting or onboard:
        opts = [(PICKUP, u) for u in waiting] + [(DELIVERY, u) for u in onboard]
        kind, u = min(opts, key=lambda a: key[a])
        if kind == PICKUP:
            waiting.remove(u)
            onboard.append(u)
        else:
            onboard.remove(u)
        seq.append(stops[(kind, u)])
    return seq, mtx


@pytest.fixture
def rng():
    return random.Random(20240611)
