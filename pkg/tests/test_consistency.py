from __future__ import annotations

import csv
import io
from types import SimpleNamespace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tcdarp.consistency import count_classes, plan_consistency, report_to_csv, time_classes
from tcdarp.errors import MissingService
from tcdarp.model import PERIODS, Day, Half, Period
from tcdarp.oracle import classes_bruteforce

from conftest import line_instance

MON_AM, TUE_AM, WED_AM = (Period(d, Half.AM) for d in (Day.MON, Day.TUE, Day.WED))


@pytest.mark.parametrize("times, expected", [
    ([480, 485, 490], 1),
    ([480, 500, 520, 540, 560], 5),
    ([480, 492, 504], 2),
    ([480, 495], 1),  # closed window: exactly W apart still shares a class
    ([], 0),
])
def test_class_counts(times, expected):
    assert count_classes(times, 15) == expected


def test_windows_open_at_first_uncovered_time():
    assert time_classes([504, 480, 492], 15) == (2, [(480, 495), (504, 519)])


def test_zero_width_rejected():
    with pytest.raises(ValueError):
        count_classes([1], 0)


times_st = st.lists(st.integers(300, 700), max_size=8)


@settings(max_examples=300, deadline=None)
@given(times_st, st.integers(1, 60))
def test_greedy_matches_partition_search(times, width):
    assert count_classes(times, width) == classes_bruteforce(times, width)


@given(times_st, st.integers(1, 60), st.randoms())
def test_order_does_not_matter(times, width, rnd):
    shuffled = list(times)
    rnd.shuffle(shuffled)
    assert count_classes(shuffled, width) == count_classes(times, width)


@given(times_st, st.integers(1, 60), st.integers(-200, 200))
def test_translation_invariant(times, width, shift):
    assert count_classes([t + shift for t in times], width) == count_classes(times, width)


@given(times_st, st.integers(1, 60), st.integers(0, 30))
def test_wider_windows_never_need_more_classes(times, width, extra):
    assert count_classes(times, width + extra) <= count_classes(times, width)


# ---------------------------------------------------------------- plan level

def _sol(times: dict[str, int], unassigned=()):
    routes = [SimpleNamespace(pickup_times=lambda t=times: dict(t))] if times else []
    return SimpleNamespace(routes=routes, unassigned=frozenset(unassigned))


def test_am_and_pm_classed_separately():
    sols = {MON_AM: _sol({"a": 480}), Period(Day.MON, Half.PM): _sol({"a": 960}),
            TUE_AM: _sol({"a": 482}), Period(Day.TUE, Half.PM): _sol({"a": 1000})}
    rep = plan_consistency(sols, 15)
    u = rep.user("a")
    assert (u.am_classes, u.pm_classes) == (1, 2)
    assert rep.total_classes == 3 and rep.total_excess == 1 and rep.max_classes == 2
    assert rep.cap_excess(1) == 1 and rep.cap_excess(2) == 0


def test_pooled_mode_mixes_halves():
    sols = {MON_AM: _sol({"a": 480}), Period(Day.MON, Half.PM): _sol({"a": 490})}
    rep = plan_consistency(sols, 15, pooled=True)
    assert rep.user("a").classes == 1 and rep.total_excess == 0


def test_missing_service_detected():
    inst = line_instance(2, periods=[MON_AM])
    with pytest.raises(MissingService) as err:
        plan_consistency({MON_AM: _sol({"u0": 480})}, 15, instance=inst)
    assert err.value.user == "u1"
    rep = plan_consistency({MON_AM: _sol({"u0": 480}, unassigned=["u1"])}, 15, instance=inst)
    assert [u.user for u in rep.users] == ["u0"]


def test_csv_has_one_row_per_user_and_period_columns():
    sols = {MON_AM: _sol({"a": 480, "b": 470}), WED_AM: _sol({"a": 500})}
    rows = list(csv.reader(io.StringIO(report_to_csv(plan_consistency(sols, 15)))))
    assert rows[0] == ["user_id", "am_classes", "pm_classes"] + [p.name for p in PERIODS]
    assert rows[1][:4] == ["a", "2", "0", "480"]
    assert rows[1][3 + PERIODS.index(WED_AM)] == "500"
    assert rows[2][:4] == ["b", "1", "0", "470"]
