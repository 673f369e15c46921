"""Plan files: canonical JSON, plus GeoJSON and CSV views of the routes.

Loading treats the file as untrusted: stops are rebuilt from the instance
and every route is re-verified before a plan object is returned.
"""
from __future__ import annotations

import csv
import io
import json
from decimal import Decimal, InvalidOperation
from pathlib import Path

from .consistency import ConsistencyReport, plan_consistency, report_to_dict
from .errors import ParseError, ValidationError, VerificationError
from .lns import HalfDaySolution
from .model import PERIODS, Instance, Period, dumps_canonical, expand_requests
from .routing import DELIVERY, PICKUP, Route, Schedule, request_stops, verify_route
from .weekly import RoundLog, TraceEntry, WeeklyPlan, plan_total, verify_solutions

FORMAT = "tcdarp-plan"
VERSION = 1


def _money(x: Decimal) -> float:
    return float(x)


def route_to_dict(route: Route, instance: Instance) -> dict:
    sch = route.schedule

    def xy(loc):
        l = instance.location(loc)
        return [l.x, l.y]

    return {
        "vehicle_type": route.vehicle.id,
        "depot": route.vehicle.depot,
        "depot_xy": xy(route.vehicle.depot),
        "depot_departure": sch.depot_departure,
        "depot_return": sch.depot_return,
        "duration_min": sch.duration,
        "distance_km": route.distance_m / 1000,
        "leg_configs": list(route.leg_configs),
        "cost": _money(route.cost),
        "stops": [
            {"location": s.location, "xy": xy(s.location), "kind": s.action.kind, "user": s.action.user,
             "arrival": sch.arrival[k], "service_start": sch.service_start[k],
             "departure": sch.departure[k]}
            for k, s in enumerate(route.stops)
        ],
    }


def solution_to_dict(sol: HalfDaySolution, instance: Instance) -> dict:
    return {
        "routes": [route_to_dict(r, instance) for r in sol.routes],
        "unassigned": sorted(sol.unassigned),
        "total_cost": _money(sol.total_cost),
        "penalty": _money(sol.penalty),
    }


def plan_to_dict(plan: WeeklyPlan, instance: Instance) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "total_cost": _money(plan.total_cost),
        "target_met": plan.target_met,
        "periods": {p.name: solution_to_dict(plan.solutions[p], instance)
                    for p in PERIODS if p in plan.solutions},
        "trace": [{"round": e.round, "total_cost": _money(e.total_cost), "total_classes": e.total_classes}
                  for e in plan.trace],
        "rounds": [
            {"round": r.round, "mode": r.mode, "lambda": _money(r.lam), "master_status": r.status,
             "nodes": r.nodes, "objective": None if r.objective is None else _money(r.objective),
             "adopted": r.adopted, "pool_size": r.pool_size, "new_routes": r.new_routes}
            for r in plan.rounds
        ],
        "report": report_to_dict(plan.report),
    }


def dumps_plan(plan: WeeklyPlan, instance: Instance) -> str:
    return dumps_canonical(plan_to_dict(plan, instance))


def save_plan(plan: WeeklyPlan, instance: Instance, path: str | Path) -> None:
    Path(path).write_text(dumps_plan(plan, instance))


def _get(obj, key, path, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ValidationError(path, f"missing field {key!r}")
    val = obj[key]
    if kind is int and (isinstance(val, bool) or not isinstance(val, int)):
        raise ValidationError(f"{path}.{key}", "expected an integer")
    if kind is list and not isinstance(val, list):
        raise ValidationError(f"{path}.{key}", "expected a list")
    return val


def _decimal(val, path) -> Decimal:
    if isinstance(val, bool) or not isinstance(val, (int, float, str)):
        raise ValidationError(path, "expected a number")
    try:
        return Decimal(str(val)).quantize(Decimal("0.01"))
    except InvalidOperation:
        raise ValidationError(path, "expected a number") from None


def route_from_dict(data: dict, instance: Instance, period: Period, path: str = "route") -> Route:
    vid = _get(data, "vehicle_type", path)
    try:
        vehicle = instance.vehicle(vid)
    except KeyError:
        raise ValidationError(f"{path}.vehicle_type", f"unknown vehicle type {vid!r}") from None
    requests = {r.user: r for r in expand_requests(instance, period)}
    stops, arr, start, dep = [], [], [], []
    for k, sd in enumerate(_get(data, "stops", path, list)):
        sp = f"{path}.stops[{k}]"
        user, kind = _get(sd, "user", sp), _get(sd, "kind", sp)
        if user not in requests:
            raise ValidationError(f"{sp}.user", f"user {user!r} has no request in {period.name}")
        if kind not in (PICKUP, DELIVERY):
            raise ValidationError(f"{sp}.kind", f"unknown action {kind!r}")
        pick, drop = request_stops(requests[user], instance)
        stop = pick if kind == PICKUP else drop
        if _get(sd, "location", sp) != stop.location:
            raise VerificationError(f"{sp}: location {sd['location']} does not match the request")
        stops.append(stop)
        arr.append(_get(sd, "arrival", sp, int))
        start.append(_get(sd, "service_start", sp, int))
        dep.append(_get(sd, "departure", sp, int))
    sch = Schedule(_get(data, "depot_departure", path, int), tuple(arr), tuple(start), tuple(dep),
                   _get(data, "depot_return", path, int))
    configs = _get(data, "leg_configs", path, list)
    if any(isinstance(c, bool) or not isinstance(c, int) for c in configs):
        raise ValidationError(f"{path}.leg_configs", "expected integers")
    km = _get(data, "distance_km", path)
    if isinstance(km, bool) or not isinstance(km, (int, float)):
        raise ValidationError(f"{path}.distance_km", "expected a number")
    route = Route(vehicle, period, tuple(stops), sch, tuple(configs), round(km * 1000),
                  _decimal(_get(data, "cost", path), f"{path}.cost"))
    verify_route(route, instance)
    return route


def plan_from_dict(data: dict, instance: Instance) -> WeeklyPlan:
    if not isinstance(data, dict) or data.get("format") != FORMAT:
        raise ValidationError("format", f"not a {FORMAT} file")
    periods = _get(data, "periods", "plan")
    if not isinstance(periods, dict):
        raise ValidationError("periods", "expected an object")
    solutions = {}
    for name, pd in periods.items():
        try:
            period = Period.parse(name)
        except ValueError as exc:
            raise ValidationError(f"periods.{name}", str(exc)) from None
        path = f"periods.{name}"
        routes = tuple(route_from_dict(rd, instance, period, f"{path}.routes[{k}]")
                       for k, rd in enumerate(_get(pd, "routes", path, list)))
        unassigned = frozenset(_get(pd, "unassigned", path, list))
        penalty = _decimal(pd.get("penalty", 0), f"{path}.penalty")
        total = sum((r.cost for r in routes), Decimal("0.00")) + penalty * len(unassigned)
        solutions[period] = HalfDaySolution(period, routes, unassigned, total, penalty)
    for period in PERIODS:
        if period not in solutions and expand_requests(instance, period):
            raise VerificationError(f"{period.name}: requests present but period missing from plan")
        solutions.setdefault(period, HalfDaySolution(period, (), frozenset(), Decimal("0.00")))
    verify_solutions(instance, solutions)
    report_data = data.get("report") or {}
    width = report_data.get("width", instance.consistency_width)
    pooled = bool(report_data.get("pooled", False))
    report: ConsistencyReport = plan_consistency(solutions, width, pooled=pooled, instance=instance)
    trace = tuple(TraceEntry(_get(e, "round", "trace", int), _decimal(_get(e, "total_cost", "trace"), "trace"),
                             _get(e, "total_classes", "trace", int))
                  for e in data.get("trace", []))
    total = plan_total(solutions)
    stated = data.get("total_cost")
    if stated is not None and _decimal(stated, "total_cost") != total:
        raise VerificationError(f"total_cost {stated} differs from the sum of periods {total}")
    rounds = []
    for k, r in enumerate(data.get("rounds", [])):
        rp = f"rounds[{k}]"
        obj = r.get("objective") if isinstance(r, dict) else None
        rounds.append(RoundLog(_get(r, "round", rp, int), str(_get(r, "mode", rp)),
                               _decimal(_get(r, "lambda", rp), f"{rp}.lambda"),
                               str(_get(r, "master_status", rp)), _get(r, "nodes", rp, int),
                               None if obj is None else _decimal(obj, f"{rp}.objective"),
                               bool(_get(r, "adopted", rp)), _get(r, "pool_size", rp, int),
                               _get(r, "new_routes", rp, int)))
    return WeeklyPlan(solutions, report, total, trace, bool(data.get("target_met", False)), tuple(rounds))


def load_plan(path: str | Path, instance: Instance) -> WeeklyPlan:
    return plan_from_dict(read_plan_data(path), instance)


# ---------------------------------------------------------------- exports
# exports read the file contents alone; coordinates travel with the stops

def read_plan_data(path: str | Path) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"{path}: {exc}") from None
    if not isinstance(data, dict) or data.get("format") != FORMAT or not isinstance(data.get("periods"), dict):
        raise ValidationError("format", f"not a {FORMAT} file")
    return data


def _period_names(data: dict) -> list[str]:
    try:
        return sorted(data["periods"], key=lambda n: PERIODS.index(Period.parse(n)))
    except ValueError as exc:
        raise ValidationError("periods", str(exc)) from None


def plan_to_geojson(data: dict) -> dict:
    """One LineString per route (depot to depot) and one Point per stop."""
    features = []
    for name in _period_names(data):
        for k, rd in enumerate(data["periods"][name]["routes"]):
            rid = f"{name}/{k}"
            line = [rd["depot_xy"]] + [s["xy"] for s in rd["stops"]] + [rd["depot_xy"]]
            features.append({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": line},
                "properties": {"route": rid, "period": name, "vehicle_type": rd["vehicle_type"],
                               "cost": rd["cost"], "distance_km": rd["distance_km"],
                               "depot_departure": rd["depot_departure"], "depot_return": rd["depot_return"]},
            })
            for i, s in enumerate(rd["stops"]):
                features.append({
                    "type": "Feature",
                    "geometry": {"type": "Point", "coordinates": s["xy"]},
                    "properties": {"route": rid, "period": name, "sequence": i, "location": s["location"],
                                   "kind": s["kind"], "user": s["user"], "arrival": s["arrival"],
                                   "service_start": s["service_start"], "departure": s["departure"],
                                   "leg_config": rd["leg_configs"][i + 1]},
                })
    return {"type": "FeatureCollection", "features": features}


CSV_COLUMNS = ["period", "route", "vehicle_type", "sequence", "location", "kind", "user",
               "arrival", "service_start", "departure", "leg_config", "x", "y"]


def plan_to_csv(data: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for name in _period_names(data):
        for k, rd in enumerate(data["periods"][name]["routes"]):
            for i, s in enumerate(rd["stops"]):
                w.writerow([name, k, rd["vehicle_type"], i, s["location"], s["kind"], s["user"],
                            s["arrival"], s["service_start"], s["departure"], rd["leg_configs"][i + 1],
                            *s["xy"]])
    return buf.getvalue()
