"""Time classes: how many distinct pickup-time slots a user sees over the week.

Two pickup times share a class when they fit in one closed window
``[t, t + W]``.  The class count of a set of times is the minimum number of
such windows covering it.  Sorting the times and opening a window at the
smallest uncovered time is optimal: any cover must contain a window holding
the smallest time ``t0``, and ``[t0, t0 + W]`` covers a superset of that
window's remaining times, so an exchange argument finishes the proof.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .errors import MissingService
from .model import PERIODS, Half, Instance, Period, expand_requests


def time_classes(times: Iterable[int], width: int) -> tuple[int, list[tuple[int, int]]]:
    if width <= 0:
        raise ValueError("width must be positive")
    windows: list[tuple[int, int]] = []
    for t in sorted(times):
        if not windows or t > windows[-1][1]:
            windows.append((t, t + width))
    return len(windows), windows


def count_classes(times: Iterable[int], width: int) -> int:
    return time_classes(times, width)[0]


@dataclass(frozen=True)
class UserConsistency:
    user: str
    times: Mapping[Period, int]
    am_classes: int
    pm_classes: int
    class_windows: tuple[tuple[int, int], ...]
    pooled_classes: int | None = None

    @property
    def classes(self) -> int:
        return self.pooled_classes if self.pooled_classes is not None else self.am_classes + self.pm_classes

    @property
    def excess(self) -> int:
        if self.pooled_classes is not None:
            return max(0, self.pooled_classes - 1)
        return max(0, self.am_classes - 1) + max(0, self.pm_classes - 1)

    def max_per_group(self) -> int:
        if self.pooled_classes is not None:
            return self.pooled_classes
        return max(self.am_classes, self.pm_classes)


@dataclass(frozen=True)
class ConsistencyReport:
    width: int
    users: tuple[UserConsistency, ...]
    pooled: bool = False
    total_classes: int = field(init=False)
    total_excess: int = field(init=False)
    max_classes: int = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "total_classes", sum(u.classes for u in self.users))
        object.__setattr__(self, "total_excess", sum(u.excess for u in self.users))
        object.__setattr__(self, "max_classes", max((u.max_per_group() for u in self.users), default=0))

    def user(self, uid: str) -> UserConsistency:
        for u in self.users:
            if u.user == uid:
                return u
        raise KeyError(uid)

    def cap_excess(self, k: int) -> int:
        """Classes above ``k`` summed over user-halves (0 when every group meets the cap)."""
        total = 0
        for u in self.users:
            groups = [u.pooled_classes] if u.pooled_classes is not None else [u.am_classes, u.pm_classes]
            total += sum(max(0, c - k) for c in groups)
        return total


def pickup_times_by_user(solutions: Mapping[Period, object]) -> dict[str, dict[Period, int]]:
    out: dict[str, dict[Period, int]] = {}
    for period, sol in solutions.items():
        for route in sol.routes:
            for uid, t in route.pickup_times().items():
                out.setdefault(uid, {})[period] = t
    return out


def plan_consistency(solutions: Mapping[Period, object], width: int, *, pooled: bool = False,
                     instance: Instance | None = None) -> ConsistencyReport:
    """Class counts per user from the pickup service starts of a weekly plan.

    ``solutions`` maps each period to an object with ``routes`` and
    ``unassigned``.  AM and PM are classed separately unless ``pooled``.  With
    ``instance`` given, every attended request must appear either in a route
    or among the unassigned, else MissingService.
    """
    times = pickup_times_by_user(solutions)
    if instance is not None:
        for period in PERIODS:
            sol = solutions.get(period)
            for req in expand_requests(instance, period):
                served = req.user in times and period in times[req.user]
                if not served and (sol is None or req.user not in sol.unassigned):
                    raise MissingService(req.user, period)
    users = []
    for uid in sorted(times):
        ut = times[uid]
        am = [t for p, t in ut.items() if p.half == Half.AM]
        pm = [t for p, t in ut.items() if p.half == Half.PM]
        if pooled:
            n, wins = time_classes(am + pm, width)
            users.append(UserConsistency(uid, dict(sorted(ut.items())), 0, 0, tuple(wins), n))
        else:
            n_am, w_am = time_classes(am, width)
            n_pm, w_pm = time_classes(pm, width)
            users.append(UserConsistency(uid, dict(sorted(ut.items())), n_am, n_pm, tuple(w_am + w_pm)))
    return ConsistencyReport(width, tuple(users), pooled)


def report_to_csv(report: ConsistencyReport) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["user_id", "am_classes", "pm_classes"] + [p.name for p in PERIODS])
    for u in report.users:
        am, pm = (u.am_classes, u.pm_classes) if not report.pooled else (u.pooled_classes, "")
        writer.writerow([u.user, am, pm] + [u.times.get(p, "") for p in PERIODS])
    return buf.getvalue()


def report_to_dict(report: ConsistencyReport) -> dict:
    return {
        "width": report.width,
        "pooled": report.pooled,
        "total_classes": report.total_classes,
        "total_excess": report.total_excess,
        "max_classes": report.max_classes,
        "users": [
            {
                "id": u.user,
                "am_classes": u.am_classes,
                "pm_classes": u.pm_classes,
                "pooled_classes": u.pooled_classes,
                "times": {p.name: t for p, t in u.times.items()},
                "class_windows": [list(w) for w in u.class_windows],
            }
            for u in report.users
        ],
    }
