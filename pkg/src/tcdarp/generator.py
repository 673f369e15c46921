"""Synthetic weekly instances with geographically dispersed demand."""
from __future__ import annotations

import math
from dataclasses import dataclass
from decimal import Decimal

import numpy as np

from .model import (
    Configuration,
    Day,
    Half,
    Instance,
    Location,
    PassengerType,
    Period,
    TravelMatrix,
    User,
    VehicleType,
    validate_instance,
)

OPENING = 540  # establishments open at 9:00
CLOSING = 990  # and release users from 16:30
HOME_SERVICE = 2
ESTABLISHMENT_SERVICE = 1
CENTRAL_RADIUS_KM = 5.0
DEPOT = "depot"


def _minibus(reconfigurable: bool = True) -> VehicleType:
    # four seat layouts of the same vehicle, from all-seated to two electric chairs
    configs = (
        Configuration(8, 0, 0),
        Configuration(5, 2, 0),
        Configuration(3, 2, 1),
        Configuration(2, 1, 2),
    )
    return VehicleType("minibus", DEPOT, configs if reconfigurable else (Configuration(3, 2, 1),),
                       fixed_cost=Decimal("80"), cost_per_km=Decimal("0.40"),
                       cost_per_hour=Decimal("25"), reconfig_duration=5,
                       reconfigurable=reconfigurable)


def _car() -> VehicleType:
    return VehicleType("car", DEPOT, (Configuration(4, 0, 0),), fixed_cost=Decimal("40"),
                       cost_per_km=Decimal("0.30"), cost_per_hour=Decimal("20"),
                       reconfigurable=False)


VEHICLE_PRESETS = {
    "mixed": lambda: (_minibus(), _car()),
    "minibus": lambda: (_minibus(),),
    "fixed": lambda: (_minibus(reconfigurable=False),),
}


@dataclass(frozen=True)
class GeneratorParams:
    seed: int = 0
    n_establishments: int = 2
    n_users: int = 20
    dispersion_km: float = 8.0
    wheelchair_share: float = 0.3
    electric_share: float = 0.1
    attendance_prob: float = 0.8
    window_width_min: int = 15
    vehicle_catalog_preset: str = "mixed"


def max_ride_for(direct: int) -> int:
    return direct + max(15, math.ceil(direct / 2))


def generate_instance(params: GeneratorParams | None = None, **overrides) -> Instance:
    """Draw a reproducible instance; every attended day yields an AM and a PM trip.

    Keyword overrides are applied on top of ``params`` (or the defaults).
    """
    p = params or GeneratorParams()
    if overrides:
        p = GeneratorParams(**{**p.__dict__, **overrides})
    if p.n_establishments <= 0 or p.n_users <= 0:
        raise ValueError("n_establishments and n_users must be positive")
    for name in ("wheelchair_share", "electric_share", "attendance_prob"):
        if not 0.0 <= getattr(p, name) <= 1.0:
            raise ValueError(f"{name} must lie in [0, 1]")
    if p.wheelchair_share + p.electric_share > 1.0:
        raise ValueError("wheelchair_share + electric_share must not exceed 1")
    if p.dispersion_km <= 0 or p.window_width_min < 0:
        raise ValueError("dispersion_km must be > 0 and window_width_min >= 0")
    if p.vehicle_catalog_preset not in VEHICLE_PRESETS:
        raise ValueError(f"unknown vehicle preset {p.vehicle_catalog_preset!r}; "
                         f"choose from {sorted(VEHICLE_PRESETS)}")

    rng = np.random.default_rng(p.seed)
    locations = [Location(DEPOT, 0.0, 0.0, 0)]
    est_xy = []
    for k in range(p.n_establishments):
        r = CENTRAL_RADIUS_KM * math.sqrt(rng.random())
        a = 2 * math.pi * rng.random()
        xy = (round(r * math.cos(a), 3), round(r * math.sin(a), 3))
        est_xy.append(xy)
        locations.append(Location(f"e{k:02d}", xy[0], xy[1], ESTABLISHMENT_SERVICE))

    width = len(str(p.n_users - 1))
    homes, specs = [], []
    for i in range(p.n_users):
        est = int(rng.integers(p.n_establishments))
        dist = 0.5 + rng.exponential(p.dispersion_km)
        a = 2 * math.pi * rng.random()
        ex, ey = est_xy[est]
        hx, hy = round(ex + dist * math.cos(a), 3), round(ey + dist * math.sin(a), 3)
        hid = f"h{i:0{width}d}"
        homes.append(Location(hid, hx, hy, HOME_SERVICE))
        u = rng.random()
        if u < p.electric_share:
            ptype = PassengerType.ELECTRIC_WHEELCHAIR
        elif u < p.electric_share + p.wheelchair_share:
            ptype = PassengerType.WHEELCHAIR
        else:
            ptype = PassengerType.SEATED
        days = [d for d in Day if rng.random() < p.attendance_prob]
        if not days:
            days = [Day(int(rng.integers(5)))]
        specs.append((f"u{i:0{width}d}", ptype, hid, f"e{est:02d}", days))
    locations += homes
    matrix = TravelMatrix.euclidean(locations)

    users = []
    for uid, ptype, hid, eid, days in specs:
        go = matrix.t(hid, eid)
        back = matrix.t(eid, hid)
        ride = max_ride_for(max(go, back))
        w = p.window_width_min
        users.append(User(
            id=uid, passenger_type=ptype, home=hid, establishment=eid, max_ride=ride,
            attendance=frozenset(Period(d, h) for d in days for h in Half),
            pickup_window_am=(OPENING - w - ride - HOME_SERVICE, OPENING - go - HOME_SERVICE),
            delivery_window_am=(OPENING - w, OPENING),
            pickup_window_pm=(CLOSING, CLOSING + w),
            delivery_window_pm=(CLOSING + ESTABLISHMENT_SERVICE + back,
                                CLOSING + w + ESTABLISHMENT_SERVICE + ride),
        ))
    vehicles = VEHICLE_PRESETS[p.vehicle_catalog_preset]()
    return validate_instance(Instance(tuple(users), vehicles, tuple(locations), matrix))
