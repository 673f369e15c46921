from __future__ import annotations

import json
from dataclasses import replace

import pytest

from tcdarp.errors import ParseError, ValidationError
from tcdarp.generator import OPENING, GeneratorParams, generate_instance, max_ride_for
from tcdarp.model import (
    PERIODS,
    Day,
    Half,
    PassengerType,
    Period,
    TravelMatrix,
    dumps_canonical,
    expand_requests,
    instance_from_dict,
    instance_to_dict,
    load_instance,
    save_instance,
    validate_instance,
)

from conftest import line_instance


def test_periods_are_ten_and_ordered():
    assert len(PERIODS) == len(set(PERIODS)) == 10
    assert PERIODS == tuple(sorted(PERIODS))
    assert PERIODS[0] == Period(Day.MON, Half.AM) < Period(Day.MON, Half.PM) < Period(Day.TUE, Half.AM)


@pytest.mark.parametrize("name", [p.name for p in PERIODS])
def test_period_names_round_trip(name):
    assert Period.parse(name).name == name


@pytest.mark.parametrize("bad", ["sat-am", "mon", "mon-xx", ""])
def test_period_parse_rejects(bad):
    with pytest.raises(ValueError):
        Period.parse(bad)


def test_requests_direction_follows_half():
    inst = line_instance(2)
    am = expand_requests(inst, Period(Day.WED, Half.AM))
    pm = expand_requests(inst, Period(Day.WED, Half.PM))
    assert [(r.pickup, r.delivery) for r in am] == [("h0", "est"), ("h1", "est")]
    assert [(r.pickup, r.delivery) for r in pm] == [("est", "h0"), ("est", "h1")]


def test_euclidean_matrix_rounds_up_minutes():
    inst = line_instance(1)
    m = inst.matrix
    assert m.d("depot", "h0") == pytest.approx(2.0)
    assert m.t("depot", "h0") == 4  # 2 km at 30 km/h
    assert m.t("h0", "h0") == 0


def test_validation_reports_field_path():
    inst = line_instance(1)
    u = replace(inst.users[0], home="est")
    with pytest.raises(ValidationError) as err:
        validate_instance(replace(inst, users=(u,)))
    assert err.value.path == "users[0].home"


def test_validation_rejects_unseatable_user():
    inst = line_instance(1, ptypes=[PassengerType.ELECTRIC_WHEELCHAIR])
    with pytest.raises(ValidationError, match="electric"):
        validate_instance(inst)


def test_validation_rejects_bad_window():
    inst = line_instance(1)
    u = replace(inst.users[0], pickup_window_am=(500, 400))
    with pytest.raises(ValidationError, match="earliest 500 > latest 400"):
        validate_instance(replace(inst, users=(u,)))


def test_validation_rejects_nonzero_diagonal():
    inst = line_instance(1)
    time = [list(r) for r in inst.matrix.time]
    time[0][0] = 1
    mtx = TravelMatrix(inst.matrix.ids, tuple(map(tuple, time)), inst.matrix.distance)
    with pytest.raises(ValidationError, match="diagonal"):
        validate_instance(replace(inst, matrix=mtx))


def test_instance_file_round_trip(tmp_path):
    inst = generate_instance(seed=3, n_users=5)
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    again = load_instance(path)
    assert again == inst
    assert dumps_canonical(instance_to_dict(again)) == path.read_text()


def test_missing_matrix_is_derived():
    data = instance_to_dict(generate_instance(seed=1, n_users=3))
    full = instance_from_dict(data)
    del data["matrix"]
    assert instance_from_dict(data).matrix == full.matrix


def test_load_rejects_garbage(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ParseError):
        load_instance(path)
    path.write_text("[1, 2]")
    with pytest.raises(ParseError):
        load_instance(path)


def test_float_travel_time_rejected():
    data = instance_to_dict(generate_instance(seed=1, n_users=2))
    data["matrix"]["time"][0][1] = 2.5
    with pytest.raises(ParseError):
        instance_from_dict(json.loads(json.dumps(data)))


def test_generator_is_deterministic():
    a = dumps_canonical(instance_to_dict(generate_instance(seed=11, n_users=7)))
    b = dumps_canonical(instance_to_dict(generate_instance(seed=11, n_users=7)))
    c = dumps_canonical(instance_to_dict(generate_instance(seed=12, n_users=7)))
    assert a == b != c


def test_generated_instance_is_valid_and_reachable():
    inst = generate_instance(GeneratorParams(seed=5, n_users=12, n_establishments=3))
    validate_instance(inst)
    for u in inst.users:
        assert u.attendance
        go = inst.matrix.t(u.home, u.establishment)
        # direct trip from the latest pickup arrives no later than opening
        assert u.pickup_window_am[1] + 2 + go <= OPENING
        assert u.max_ride == max_ride_for(max(go, inst.matrix.t(u.establishment, u.home)))


def test_generator_rejects_bad_shares():
    with pytest.raises(ValueError):
        generate_instance(wheelchair_share=0.8, electric_share=0.5)
    with pytest.raises(ValueError, match="preset"):
        generate_instance(vehicle_catalog_preset="tram")
