import copy
import json

import pytest
from conftest import SMALL

from ufls.scenario import (
    ScenarioError,
    apply_calibration,
    bundled,
    load_scenario,
    parse_scenario,
    predicted_rocof,
)


def test_bundled_scenarios_load_and_balance():
    for name in ("scenario1", "scenario2"):
        sc = bundled(name)
        assert abs(sc.imbalance_mw()) < 1e-6
        assert len(sc.loads) == 19
        assert sc.contingency_time == 5.0


@pytest.mark.parametrize("name,trip,mw", [
    ("scenario1", {"G4", "G6"}, 1000.0),
    ("scenario2", {"G4", "G5", "G6"}, 1500.0),
])
def test_bundled_trip_sizes(name, trip, mw):
    sc = bundled(name)
    assert {e.target for e in sc.events} == trip
    assert sum(g.pm_setpoint for g in sc.fleet if g.id in trip) == pytest.approx(mw)


def test_bundled_capacities():
    sc = bundled("scenario1")
    caps = {g.id: g.capacity for g in sc.fleet}
    assert caps["G1"] == 3000 and caps["G5"] == 520
    assert sum(caps[w] for w in ("WF1", "WF2", "WF3", "WF4")) == 1350
    assert all(g.inertia_H == 0 for g in sc.fleet if g.plant_type == "wind")


def test_calibration_on_load():
    raw = bundled("scenario1", calibrate=False)
    cal = bundled("scenario1")
    assert predicted_rocof(cal, ["G4", "G6"]) == pytest.approx(0.44, rel=1e-12)
    assert cal.inertia_scale == pytest.approx(predicted_rocof(raw, ["G4", "G6"]) / 0.44)
    # scenario 2 keeps the scenario 1 inertia
    s2 = bundled("scenario2")
    assert s2.inertia_scale == pytest.approx(cal.inertia_scale)
    assert predicted_rocof(s2, ["G4", "G5", "G6"]) > 0.44


def test_apply_calibration_rejects_unknown_units():
    sc = bundled("scenario1", calibrate=False)
    with pytest.raises(ScenarioError):
        apply_calibration(sc, 0.44, ["G4", "G99"])


def test_flat_profile_and_defaults():
    sc = parse_scenario(copy.deepcopy(SMALL))
    assert sc.scheme == "none" and sc.dt == 1e-3
    assert sc.loads[0].p_at(30.0) == 900.0
    assert sc.loads[1].p_at(2.5) == 600.0 and sc.loads[1].p_at(3.0) == 620.0


@pytest.mark.parametrize("mutate", [
    lambda d: d["loads"][0].update(p_mw=950.0),
    lambda d: d["events"][0].update(target="G99"),
    lambda d: d["events"].append({"time": 2.0, "kind": "load_step", "target": "99", "mw": 5}),
    lambda d: d.update(scheme="rocof_c"),
    lambda d: d.update(dt=0.003),
    lambda d: d.update(duration=0.0),
    lambda d: d["fleet"][0].update(droop_R=2.0),
    lambda d: d["loads"].append({"bus": "3", "p_mw": 0.0}),
    lambda d: d.pop("fleet"),
    lambda d: d.update(relay={"rocof_filter": "median"}),
    lambda d: d.update(estimator={"window_cycles": 0}),
])
def test_invalid_scenarios_rejected(mutate):
    data = copy.deepcopy(SMALL)
    mutate(data)
    with pytest.raises(ScenarioError):
        parse_scenario(data)


def test_with_scheme_copies(tmp_path):
    sc = parse_scenario(copy.deepcopy(SMALL))
    other = sc.with_scheme("rocof_b")
    assert sc.scheme == "none" and other.scheme == "rocof_b"
    with pytest.raises(ScenarioError):
        sc.with_scheme("nope")


def test_load_from_file(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps(SMALL))
    assert load_scenario(path).name == "small"
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "bad.json")
    with pytest.raises(ScenarioError):
        load_scenario(tmp_path / "missing.json")
