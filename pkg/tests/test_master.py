from __future__ import annotations

import random
from decimal import Decimal

import pytest

from tcdarp.errors import MasterInfeasible, UncoveredRequest
from tcdarp.master import (
    HardCap,
    WeightedPenalty,
    build_master,
    replay_bounds,
    request_order,
    solve_master,
    verify_master_solution,
)
from tcdarp.model import Day, Half, Period
from tcdarp.oracle import master_bruteforce

from conftest import fake_route, random_pool

MON, TUE, WED = (Period(d, Half.AM) for d in (Day.MON, Day.TUE, Day.WED))


def problem(routes, mode=WeightedPenalty(), **kw):
    reqs = {rq for r in routes for rq in r.served}
    return build_master(routes, None, reqs, mode=mode, width=15, **kw)


def two_day_pool():
    # per day: a cheap route at an irregular time, a dearer one at 480
    return [fake_route(MON, ["a"], [480], "100"), fake_route(TUE, ["a"], [520], "90"),
            fake_route(TUE, ["a"], [482], "130")]


def test_zero_weight_takes_cheapest_partition():
    sol = solve_master(problem(two_day_pool()))
    assert sol.cost == Decimal("190.00") and sol.consistency == 1 and sol.proved


def test_weight_buys_regularity_once_it_pays():
    assert solve_master(problem(two_day_pool(), WeightedPenalty(Decimal("39.99")))).cost == Decimal("190.00")
    sol = solve_master(problem(two_day_pool(), WeightedPenalty(Decimal("40.01"))))
    assert sol.cost == Decimal("230.00") and sol.consistency == 0
    assert sol.windows[("a", int(Half.AM))] == ((480, 495),)


def test_hard_cap_forces_one_class():
    sol = solve_master(problem(two_day_pool(), HardCap(1)))
    assert sol.consistency == 0 and sol.objective == Decimal("230.00")


def test_unmeetable_cap_reports_blocking_group():
    pool = [fake_route(MON, ["a"], [480], "1"), fake_route(TUE, ["a"], [600], "1")]
    with pytest.raises(MasterInfeasible) as err:
        solve_master(problem(pool, HardCap(1)))
    assert err.value.group == ("a", int(Half.AM)) and err.value.proved


def test_uncovered_request():
    with pytest.raises(UncoveredRequest) as err:
        build_master([fake_route(MON, ["a"], [480], "1")], None, [("a", MON), ("b", MON)], width=15)
    assert err.value.user == "b"


def test_routes_with_foreign_passengers_are_dropped():
    pool = [fake_route(MON, ["a", "z"], [480, 481], "1"), fake_route(MON, ["a"], [480], "5")]
    prob = build_master(pool, None, [("a", MON)], width=15)
    assert [r.cost for r in prob.routes] == [Decimal(5)]


def test_pool_subset_keeps_n_cheapest_plus_incumbent():
    pool = [fake_route(MON, ["a"], [480 + k], f"{10 + k}") for k in range(6)]
    prob = build_master(pool, None, [("a", MON)], n_per_request=2, incumbent=[pool[5]], width=15)
    assert {r.cost for r in prob.routes} == {Decimal(10), Decimal(11), Decimal(15)}
    assert prob.incumbent == (pool[5].id,)


def test_candidate_windows_anchor_at_pool_times():
    prob = problem(two_day_pool())
    assert prob.windows[("a", int(Half.AM))] == ((480, 495), (482, 497), (520, 535))


def test_requests_ordered_by_half_user_day():
    pm = Period(Day.MON, Half.PM)
    keys = [("b", MON), ("a", pm), ("a", TUE), ("a", MON)]
    assert sorted(keys, key=request_order) == [("a", MON), ("a", TUE), ("b", MON), ("a", pm)]


def test_plain_partitioning_shares_routes_between_users():
    pool = [fake_route(MON, ["a", "b"], [480, 490], "120"), fake_route(MON, ["a"], [480], "70"),
            fake_route(MON, ["b"], [480], "70"), fake_route(TUE, ["b"], [480], "60")]
    sol = solve_master(problem(pool))
    assert sol.cost == Decimal("180.00")
    verify_master_solution(problem(pool), sol)


@pytest.mark.parametrize("mode", [WeightedPenalty(Decimal(0)), WeightedPenalty(Decimal(1)),
                                  WeightedPenalty(Decimal(100)), HardCap(1), HardCap(2)],
                         ids=["lam0", "lam1", "lam100", "cap1", "cap2"])
def test_agrees_with_enumeration(mode):
    rng = random.Random(hash(repr(mode)) % 1000)
    for _ in range(80):
        prob = problem(random_pool(rng), mode)
        try:
            exact = solve_master(prob, time_limit=None)
        except MasterInfeasible:
            exact = None
        try:
            brute = master_bruteforce(prob)
        except MasterInfeasible:
            brute = None
        assert (exact is None) == (brute is None)
        if exact:
            assert exact.objective == brute.objective
            verify_master_solution(prob, exact)


def test_bounds_along_the_optimal_path_are_admissible():
    rng = random.Random(11)
    checked = 0
    for _ in range(80):
        prob = problem(random_pool(rng), WeightedPenalty(Decimal(rng.choice([0, 5, 50]))))
        try:
            sol = solve_master(prob, time_limit=None)
        except MasterInfeasible:
            continue
        for bound, final in replay_bounds(prob, sol):
            assert bound <= final + 1e-6
            checked += 1
    assert checked > 80


def test_huge_weight_minimises_excess_first():
    rng = random.Random(5)
    compared = 0
    for _ in range(60):
        pool = random_pool(rng)
        try:
            heavy = solve_master(problem(pool, WeightedPenalty(Decimal(10) ** 6)))
        except MasterInfeasible:
            continue
        fewest = master_bruteforce(problem(pool, WeightedPenalty(Decimal(10) ** 6)))
        assert heavy.consistency == fewest.consistency
        try:
            capped = master_bruteforce(problem(pool, HardCap(1)))
        except MasterInfeasible:
            assert heavy.consistency > 0
            continue
        assert heavy.consistency == 0 and heavy.cost == capped.cost
        compared += 1
    assert compared > 10


def test_verify_catches_broken_partition():
    prob = problem(two_day_pool())
    sol = solve_master(prob)
    broken = type(sol)(sol.selected[:1], sol.windows, sol.objective, sol.cost, sol.consistency, sol.status)
    with pytest.raises(AssertionError, match="partition"):
        verify_master_solution(prob, broken)


def test_node_limit_flags_time_limit_status():
    rng = random.Random(2)
    pool = [fake_route(d, us, [rng.choice(range(470, 540, 5)) for _ in us], f"{rng.randint(50, 90)}")
            for d in (MON, TUE, WED) for us in (["a"], ["b"], ["a", "b"]) for _ in range(4)]
    prob = problem(pool, WeightedPenalty(Decimal(5)))
    full = solve_master(prob, time_limit=None)
    assert full.proved
    try:
        limited = solve_master(prob, time_limit=None, node_limit=3)
    except MasterInfeasible as exc:
        assert not exc.proved
    else:
        assert limited.status == "time_limit" and limited.objective >= full.objective
        verify_master_solution(prob, limited)
