from __future__ import annotations

from decimal import Decimal

import pytest

from tcdarp.generator import generate_instance
from tcdarp.lns import LnsParams, initial_solution, solve_halfday, solve_halfday_constrained
from tcdarp.model import PERIODS, Period, expand_requests
from tcdarp.oracle import halfday_bruteforce
from tcdarp.routing import verify_route

from conftest import line_instance

MON_AM = PERIODS[0]


def test_no_requests_gives_empty_solution():
    inst = line_instance(2, periods=[PERIODS[3]])
    sol, pool = solve_halfday(inst, MON_AM, LnsParams(iterations=10))
    assert sol.routes == () and sol.total_cost == 0 and pool == set()


def test_single_request_is_the_direct_route():
    inst = line_instance(1)
    sol, pool = solve_halfday(inst, MON_AM, LnsParams(iterations=20))
    ref = halfday_bruteforce(inst, MON_AM)
    assert len(sol.routes) == 1 and sol.total_cost == ref.total_cost
    assert sol.routes[0].actions == ref.routes[0].actions


def test_same_seed_same_answer():
    inst = generate_instance(seed=4, n_users=6, attendance_prob=1.0)
    a = solve_halfday(inst, MON_AM, LnsParams(iterations=150, seed=9))
    b = solve_halfday(inst, MON_AM, LnsParams(iterations=150, seed=9))
    assert a[0] == b[0]
    assert sorted(r.signature for r in a[1]) == sorted(r.signature for r in b[1])


def test_best_cost_history_never_rises():
    inst = generate_instance(seed=2, n_users=6, attendance_prob=1.0)
    hist: list[int] = []
    sol, _ = solve_halfday(inst, MON_AM, LnsParams(iterations=200, seed=1), history=hist)
    assert len(hist) == 200
    assert all(b <= a for a, b in zip(hist, hist[1:]))
    assert Decimal(hist[-1]) / 100 == sol.total_cost
    assert sol.total_cost <= initial_solution(inst, MON_AM).total_cost


def test_every_pooled_route_verifies():
    inst = generate_instance(seed=6, n_users=6, attendance_prob=1.0)
    sol, pool = solve_halfday(inst, MON_AM, LnsParams(iterations=150, seed=2))
    assert pool
    for pr in pool:
        verify_route(pr.route, inst)
    served = sorted(u for r in sol.routes for u in r.users) + sorted(sol.unassigned)
    assert sorted(served) == sorted(r.user for r in expand_requests(inst, MON_AM))


@pytest.mark.parametrize("seed", [1, 2, 3])
def test_matches_exhaustive_search_on_tiny_instances(seed):
    inst = generate_instance(seed=seed, n_users=3, attendance_prob=1.0, vehicle_catalog_preset="minibus")
    sol, _ = solve_halfday(inst, MON_AM, LnsParams(iterations=1500, seed=seed))
    assert sol.total_cost == halfday_bruteforce(inst, MON_AM).total_cost


def test_unchanged_windows_give_the_plain_run():
    inst = generate_instance(seed=3, n_users=5, attendance_prob=1.0)
    reqs = expand_requests(inst, MON_AM)
    same = {r.user: r.pickup_window for r in reqs}
    params = LnsParams(iterations=100, seed=5)
    assert solve_halfday_constrained(inst, MON_AM, params, same)[0] == solve_halfday(inst, MON_AM, params)[0]


def test_unreachable_narrowed_window_leaves_request_unassigned():
    inst = line_instance(2)
    sol, pool = solve_halfday_constrained(inst, MON_AM, LnsParams(iterations=30), {"u0": (0, 0)})
    assert sol.unassigned == {"u0"}
    assert all("u0" not in pr.route.users for pr in pool)


def test_narrowed_window_is_respected_and_original_kept():
    inst = line_instance(2)
    sol, pool = solve_halfday_constrained(inst, MON_AM, LnsParams(iterations=30), {"u1": (600, 600)})
    (route,) = [r for r in sol.routes if "u1" in r.users]
    assert route.pickup_times()["u1"] == 600
    # stops keep the instance windows, so the route is checked against the original
    assert [s for s in route.stops if s.action.user == "u1"][0].latest == 1440
    for pr in pool:
        verify_route(pr.route, inst)


def test_narrowing_outside_original_rejected():
    inst = generate_instance(seed=1, n_users=3, attendance_prob=1.0)
    req = expand_requests(inst, MON_AM)[0]
    lo, hi = req.pickup_window
    with pytest.raises(ValueError, match="not inside"):
        solve_halfday_constrained(inst, MON_AM, None, {req.user: (lo - 5, hi)})
    with pytest.raises(ValueError, match="no request"):
        solve_halfday_constrained(inst, MON_AM, None, {"nobody": (0, 1)})


def test_two_days_narrowed_to_one_time_share_it():
    inst = line_instance(3)
    mon, tue = Period.parse("mon-am"), Period.parse("tue-am")
    narrowed = {u: (550, 552) for u in ("u0", "u1", "u2")}
    a, _ = solve_halfday_constrained(inst, mon, LnsParams(iterations=50, seed=1), narrowed)
    b, _ = solve_halfday_constrained(inst, tue, LnsParams(iterations=50, seed=2), narrowed)
    for sol in (a, b):
        times = {u: t for r in sol.routes for u, t in r.pickup_times().items()}
        assert sorted(times) == ["u0", "u1", "u2"]
        assert all(550 <= t <= 552 for t in times.values())


def test_bad_params_rejected():
    with pytest.raises(ValueError):
        LnsParams(removal_fraction=(0.5, 0.2))
    with pytest.raises(ValueError):
        LnsParams(sa_cooling=1.0)
    with pytest.raises(ValueError):
        LnsParams(iterations=-1)
