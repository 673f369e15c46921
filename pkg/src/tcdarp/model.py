"""Domain model: users, vehicles, periods, travel matrix and instance files.

All times are integer minutes from midnight, distances are kilometres and
money is held as :class:`decimal.Decimal`.  Every type is immutable so one
instance can be shared by concurrent solver workers.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from decimal import Decimal
from enum import Enum, IntEnum
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ParseError, ValidationError

SPEED_KMH = 30.0
DEFAULT_WIDTH = 15


class PassengerType(Enum):
    SEATED = "seated"
    WHEELCHAIR = "wheelchair"
    ELECTRIC_WHEELCHAIR = "electric_wheelchair"

    @property
    def index(self) -> int:
        return _PTYPE_INDEX[self]


PASSENGER_TYPES = tuple(PassengerType)
_PTYPE_INDEX = {p: i for i, p in enumerate(PASSENGER_TYPES)}


class Day(IntEnum):
    MON = 0
    TUE = 1
    WED = 2
    THU = 3
    FRI = 4


class Half(IntEnum):
    AM = 0
    PM = 1


@dataclass(frozen=True, order=True)
class Period:
    """One half-day of the planning week, ordered Mon-AM < Mon-PM < Tue-AM."""

    day: Day
    half: Half

    @property
    def name(self) -> str:
        return f"{self.day.name.lower()}-{self.half.name.lower()}"

    @classmethod
    def parse(cls, text: str) -> "Period":
        try:
            day, half = text.strip().lower().split("-")
            return cls(Day[day.upper()], Half[half.upper()])
        except (ValueError, KeyError):
            raise ValueError(f"unknown period {text!r}; expected e.g. 'mon-am'") from None

    def __str__(self) -> str:
        return self.name


PERIODS = tuple(Period(d, h) for d in Day for h in Half)


@dataclass(frozen=True)
class Location:
    id: str
    x: float
    y: float
    service_duration: int = 0


@dataclass(frozen=True)
class TravelMatrix:
    """Travel times (minutes) and distances (km) indexed by location id.

    Rows and columns follow ``ids``.  Asymmetric matrices are allowed and the
    triangle inequality is not assumed anywhere.
    """

    ids: tuple[str, ...]
    time: tuple[tuple[int, ...], ...]
    distance: tuple[tuple[float, ...], ...]
    index: Mapping[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "index", {lid: i for i, lid in enumerate(self.ids)})

    def t(self, a: str, b: str) -> int:
        return self.time[self.index[a]][self.index[b]]

    def d(self, a: str, b: str) -> float:
        return self.distance[self.index[a]][self.index[b]]

    @classmethod
    def euclidean(cls, locations: Sequence[Location], speed_kmh: float = SPEED_KMH) -> "TravelMatrix":
        """Planar distances rounded to the metre, times rounded up to the minute."""
        locs = sorted(locations, key=lambda l: l.id)
        dist, time = [], []
        for a in locs:
            drow, trow = [], []
            for b in locs:
                km = round(math.hypot(a.x - b.x, a.y - b.y), 3)
                drow.append(km)
                # 1e-9 guards against ceil(2.0000000001)
                trow.append(0 if a.id == b.id else int(math.ceil(km / speed_kmh * 60 - 1e-9)))
            dist.append(tuple(drow))
            time.append(tuple(trow))
        return cls(tuple(l.id for l in locs), tuple(time), tuple(dist))


@dataclass(frozen=True)
class User:
    id: str
    passenger_type: PassengerType
    home: str
    establishment: str
    max_ride: int
    attendance: frozenset[Period]
    pickup_window_am: tuple[int, int]
    delivery_window_am: tuple[int, int]
    pickup_window_pm: tuple[int, int]
    delivery_window_pm: tuple[int, int]

    def pickup_window(self, half: Half) -> tuple[int, int]:
        return self.pickup_window_am if half == Half.AM else self.pickup_window_pm

    def delivery_window(self, half: Half) -> tuple[int, int]:
        return self.delivery_window_am if half == Half.AM else self.delivery_window_pm


@dataclass(frozen=True)
class Request:
    """One trip of one user in one period (AM inbound, PM outbound)."""

    user: str
    period: Period
    pickup: str
    pickup_window: tuple[int, int]
    delivery: str
    delivery_window: tuple[int, int]
    passenger_type: PassengerType
    max_ride: int


@dataclass(frozen=True)
class Configuration:
    seated: int = 0
    wheelchair: int = 0
    electric_wheelchair: int = 0

    @property
    def vector(self) -> tuple[int, int, int]:
        return (self.seated, self.wheelchair, self.electric_wheelchair)

    def covers(self, load: Sequence[int]) -> bool:
        return all(c >= x for c, x in zip(self.vector, load))


@dataclass(frozen=True)
class VehicleType:
    id: str
    depot: str
    configurations: tuple[Configuration, ...]
    fixed_cost: Decimal = Decimal(0)
    cost_per_km: Decimal = Decimal(0)
    cost_per_hour: Decimal = Decimal(0)
    reconfig_duration: int = 0
    available: int | None = None  # None: unlimited, the fleet is sized by the solver
    reconfigurable: bool = True  # False: configuration fixed at the depot for the whole route


@dataclass(frozen=True)
class Instance:
    users: tuple[User, ...]
    vehicle_types: tuple[VehicleType, ...]
    locations: tuple[Location, ...]
    matrix: TravelMatrix
    consistency_width: int = DEFAULT_WIDTH
    _users: Mapping[str, User] = field(init=False, repr=False, compare=False)
    _vehicles: Mapping[str, VehicleType] = field(init=False, repr=False, compare=False)
    _locations: Mapping[str, Location] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "users", tuple(sorted(self.users, key=lambda u: u.id)))
        object.__setattr__(self, "vehicle_types", tuple(sorted(self.vehicle_types, key=lambda v: v.id)))
        object.__setattr__(self, "locations", tuple(sorted(self.locations, key=lambda l: l.id)))
        object.__setattr__(self, "_users", {u.id: u for u in self.users})
        object.__setattr__(self, "_vehicles", {v.id: v for v in self.vehicle_types})
        object.__setattr__(self, "_locations", {l.id: l for l in self.locations})

    def user(self, uid: str) -> User:
        return self._users[uid]

    def vehicle(self, vid: str) -> VehicleType:
        return self._vehicles[vid]

    def location(self, lid: str) -> Location:
        return self._locations[lid]


def expand_requests(instance: Instance, period: Period) -> list[Request]:
    """Requests of the users attending ``period``, sorted by user id."""
    out = []
    for u in instance.users:
        if period not in u.attendance:
            continue
        if period.half == Half.AM:
            out.append(Request(u.id, period, u.home, u.pickup_window_am, u.establishment,
                               u.delivery_window_am, u.passenger_type, u.max_ride))
        else:
            out.append(Request(u.id, period, u.establishment, u.pickup_window_pm, u.home,
                               u.delivery_window_pm, u.passenger_type, u.max_ride))
    return out


# ---------------------------------------------------------------- validation

def validate_instance(inst: Instance) -> Instance:
    """Check every structural invariant; raise ValidationError on the first failure."""
    loc_ids = [l.id for l in inst.locations]
    if len(set(loc_ids)) != len(loc_ids):
        raise ValidationError("locations", "duplicate location id")
    for i, l in enumerate(inst.locations):
        if l.service_duration < 0:
            raise ValidationError(f"locations[{i}].service_duration", "must be >= 0")
    m = inst.matrix
    if set(m.ids) != set(loc_ids) or len(m.ids) != len(loc_ids):
        raise ValidationError("matrix", "must be square over exactly the instance locations")
    n = len(m.ids)
    for name, mat in (("time", m.time), ("distance", m.distance)):
        if len(mat) != n or any(len(row) != n for row in mat):
            raise ValidationError(f"matrix.{name}", f"must be {n}x{n}")
        for i, row in enumerate(mat):
            for j, v in enumerate(row):
                if not math.isfinite(v) or v < 0:
                    raise ValidationError(f"matrix.{name}[{i}][{j}]", "must be finite and >= 0")
                if i == j and v != 0:
                    raise ValidationError(f"matrix.{name}[{i}][{i}]", "diagonal must be zero")
    if not inst.vehicle_types:
        raise ValidationError("vehicle_types", "at least one vehicle type is required")
    if inst.consistency_width <= 0:
        raise ValidationError("consistency_width", "must be > 0")
    known = set(loc_ids)
    vids = [v.id for v in inst.vehicle_types]
    if len(set(vids)) != len(vids):
        raise ValidationError("vehicle_types", "duplicate vehicle type id")
    for i, v in enumerate(inst.vehicle_types):
        p = f"vehicle_types[{i}]"
        if v.depot not in known:
            raise ValidationError(f"{p}.depot", f"unknown location {v.depot!r}")
        if not v.configurations:
            raise ValidationError(f"{p}.configurations", "must be non-empty")
        if len(set(v.configurations)) != len(v.configurations):
            raise ValidationError(f"{p}.configurations", "configurations must be pairwise distinct")
        for j, c in enumerate(v.configurations):
            if min(c.vector) < 0 or max(c.vector) <= 0:
                raise ValidationError(f"{p}.configurations[{j}]", "needs non-negative entries, one positive")
        for attr in ("fixed_cost", "cost_per_km", "cost_per_hour"):
            if getattr(v, attr) < 0:
                raise ValidationError(f"{p}.{attr}", "must be >= 0")
        if v.reconfig_duration < 0:
            raise ValidationError(f"{p}.reconfig_duration", "must be >= 0")
        if v.available is not None and v.available <= 0:
            raise ValidationError(f"{p}.available", "must be positive or null (unlimited)")
    uids = [u.id for u in inst.users]
    if len(set(uids)) != len(uids):
        raise ValidationError("users", "duplicate user id")
    for i, u in enumerate(inst.users):
        p = f"users[{i}]"
        for attr in ("home", "establishment"):
            if getattr(u, attr) not in known:
                raise ValidationError(f"{p}.{attr}", f"user {u.id}: unknown location {getattr(u, attr)!r}")
        if u.home == u.establishment:
            raise ValidationError(f"{p}.home", f"user {u.id}: home equals establishment")
        if u.max_ride <= 0:
            raise ValidationError(f"{p}.max_ride", f"user {u.id}: must be > 0")
        if not u.attendance:
            raise ValidationError(f"{p}.attendance", f"user {u.id}: must be non-empty")
        for attr in ("pickup_window_am", "delivery_window_am", "pickup_window_pm", "delivery_window_pm"):
            e, l = getattr(u, attr)
            if e > l:
                raise ValidationError(f"{p}.{attr}", f"user {u.id}: earliest {e} > latest {l}")
        k = u.passenger_type.index
        if not any(c.vector[k] >= 1 for v in inst.vehicle_types for c in v.configurations):
            raise ValidationError(f"{p}.passenger_type", f"user {u.id}: no vehicle configuration seats "
                                  f"{u.passenger_type.value}")
    return inst


# ---------------------------------------------------------------- file I/O

def _money(x: Decimal) -> float:
    return float(x)


def _window(w) -> list[int]:
    return [int(w[0]), int(w[1])]


def instance_to_dict(inst: Instance) -> dict:
    return {
        "consistency_width": inst.consistency_width,
        "locations": [
            {"id": l.id, "x": l.x, "y": l.y, "service_duration": l.service_duration}
            for l in inst.locations
        ],
        "matrix": {
            "time": [list(r) for r in inst.matrix.time],
            "distance": [list(r) for r in inst.matrix.distance],
        },
        "users": [
            {
                "id": u.id,
                "passenger_type": u.passenger_type.value,
                "home": u.home,
                "establishment": u.establishment,
                "max_ride": u.max_ride,
                "attendance": [p.name for p in sorted(u.attendance)],
                "pickup_window_am": _window(u.pickup_window_am),
                "delivery_window_am": _window(u.delivery_window_am),
                "pickup_window_pm": _window(u.pickup_window_pm),
                "delivery_window_pm": _window(u.delivery_window_pm),
            }
            for u in inst.users
        ],
        "vehicle_types": [
            {
                "id": v.id,
                "depot": v.depot,
                "configurations": [
                    {p.value: c.vector[p.index] for p in PASSENGER_TYPES} for c in v.configurations
                ],
                "fixed_cost": _money(v.fixed_cost),
                "cost_per_km": _money(v.cost_per_km),
                "cost_per_hour": _money(v.cost_per_hour),
                "reconfig_duration": v.reconfig_duration,
                "available": v.available,
                "reconfigurable": v.reconfigurable,
            }
            for v in inst.vehicle_types
        ],
    }


def _int(obj, key, path):
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"{path}.{key}: expected integer minutes, got {v!r}")
    return v


def _num(obj, key, path) -> float:
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


def _dec(obj, key, path, default=None) -> Decimal:
    if key not in obj and default is not None:
        return default
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float, str)):
        raise ParseError(f"{path}.{key}: expected a decimal amount, got {v!r}")
    try:
        return Decimal(str(v))
    except ArithmeticError:
        raise ParseError(f"{path}.{key}: invalid decimal {v!r}") from None


def _win(obj, key, path) -> tuple[int, int]:
    v = obj[key]
    if not (isinstance(v, list) and len(v) == 2 and all(isinstance(x, int) and not isinstance(x, bool) for x in v)):
        raise ParseError(f"{path}.{key}: expected [earliest, latest] integer minutes")
    return (v[0], v[1])


def instance_from_dict(data: dict) -> Instance:
    """Decode and validate.  A missing ``matrix`` is derived from coordinates."""
    try:
        locations = tuple(
            Location(str(l["id"]), _num(l, "x", f"locations[{i}]"), _num(l, "y", f"locations[{i}]"),
                     _int(l, "service_duration", f"locations[{i}]") if "service_duration" in l else 0)
            for i, l in enumerate(data["locations"])
        )
        by_id = sorted(locations, key=lambda l: l.id)
        if "matrix" in data:
            ids = tuple(l.id for l in by_id)
            mt = data["matrix"]
            for row in mt["time"]:
                if any(isinstance(x, bool) or not isinstance(x, int) for x in row):
                    raise ParseError("matrix.time: entries must be integer minutes")
            time = tuple(tuple(row) for row in mt["time"])
            dist = tuple(tuple(float(x) for x in row) for row in mt["distance"])
            matrix = TravelMatrix(ids, time, dist)
        else:
            matrix = TravelMatrix.euclidean(by_id)
        users = []
        for i, u in enumerate(data["users"]):
            p = f"users[{i}]"
            try:
                ptype = PassengerType(u["passenger_type"])
                attendance = frozenset(Period.parse(s) for s in u["attendance"])
            except ValueError as exc:
                raise ParseError(f"{p}: {exc}") from None
            users.append(User(
                id=str(u["id"]), passenger_type=ptype, home=str(u["home"]),
                establishment=str(u["establishment"]), max_ride=_int(u, "max_ride", p),
                attendance=attendance,
                pickup_window_am=_win(u, "pickup_window_am", p),
                delivery_window_am=_win(u, "delivery_window_am", p),
                pickup_window_pm=_win(u, "pickup_window_pm", p),
                delivery_window_pm=_win(u, "delivery_window_pm", p),
            ))
        vehicles = []
        for i, v in enumerate(data["vehicle_types"]):
            p = f"vehicle_types[{i}]"
            configs = []
            for c in v["configurations"]:
                unknown = set(c) - {pt.value for pt in PASSENGER_TYPES}
                if unknown:
                    raise ParseError(f"{p}.configurations: unknown passenger types {sorted(unknown)}")
                configs.append(Configuration(*(int(c.get(pt.value, 0)) for pt in PASSENGER_TYPES)))
            avail = v.get("available")
            if avail is not None and (isinstance(avail, bool) or not isinstance(avail, int)):
                raise ParseError(f"{p}.available: expected integer or null")
            vehicles.append(VehicleType(
                id=str(v["id"]), depot=str(v["depot"]), configurations=tuple(configs),
                fixed_cost=_dec(v, "fixed_cost", p, Decimal(0)),
                cost_per_km=_dec(v, "cost_per_km", p, Decimal(0)),
                cost_per_hour=_dec(v, "cost_per_hour", p, Decimal(0)),
                reconfig_duration=_int(v, "reconfig_duration", p) if "reconfig_duration" in v else 0,
                available=avail, reconfigurable=bool(v.get("reconfigurable", True)),
            ))
        width = data.get("consistency_width", DEFAULT_WIDTH)
        if isinstance(width, bool) or not isinstance(width, int):
            raise ParseError("consistency_width: expected integer minutes")
    except KeyError as exc:
        raise ParseError(f"missing field {exc}") from None
    except (TypeError, AttributeError) as exc:
        raise ParseError(f"malformed instance: {exc}") from None
    return validate_instance(Instance(tuple(users), tuple(vehicles), locations, matrix, width))


def dumps_canonical(data) -> str:
    return json.dumps(data, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def load_instance(path: str | Path) -> Instance:
    try:
        text = Path(path).read_text(encoding="utf-8")
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON ({exc})") from None
    except UnicodeDecodeError as exc:
        raise ParseError(f"{path}: not UTF-8 ({exc})") from None
    if not isinstance(data, dict):
        raise ParseError(f"{path}: top-level JSON value must be an object")
    return instance_from_dict(data)


def save_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_canonical(instance_to_dict(instance)), encoding="utf-8")


def total_requests(instance: Instance, periods: Iterable[Period] = PERIODS) -> int:
    return sum(len(expand_requests(instance, p)) for p in periods)
