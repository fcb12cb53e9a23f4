import copy

import pytest

# three-bus, two-machine system; small enough for closed-loop runs in tests
SMALL = {
    "name": "small",
    "duration": 8.0,
    "damping_D": 0.0,
    "fleet": [
        {"id": "A", "plant_type": "thermal", "capacity": 3000, "inertia_H": 4.0,
         "governor_T": 3.0, "headroom": 450, "pm_setpoint": 1500},
        {"id": "B", "plant_type": "thermal", "capacity": 1000, "inertia_H": 4.0,
         "governor_T": 0.5, "headroom": 0, "pm_setpoint": 400},
        {"id": "W", "plant_type": "wind", "capacity": 300, "pm_setpoint": 100},
    ],
    "loads": [
        {"bus": "3", "p_mw": 900.0},
        {"bus": "4", "p_mw": [600.0] * 3 + [620.0] * 20},
        {"bus": "7", "p_mw": 500.0},
    ],
    "events": [{"time": 1.0, "kind": "generator_trip", "target": "B"}],
}


@pytest.fixture
def small_data():
    return copy.deepcopy(SMALL)
