"""Regenerate the bundled scenario files.

    python tools/make_scenarios.py [overrides-json] [out-dir]

The fleet follows the modified 39-bus system: one 3 GVA thermal unit, seven
1 GVA hydro units, one 520 MVA hydro unit and four wind farms. Load buses and
their relative sizes follow the 39-bus benchmark; the profiles are synthetic.
"""

import json
import math
import sys
from pathlib import Path

OUT = Path(__file__).resolve().parents[1] / "src" / "ufls" / "scenarios"

LOAD_SHARES = {
    "3": 322.0, "4": 500.0, "7": 233.8, "8": 522.0, "12": 7.5, "15": 320.0,
    "16": 329.0, "18": 158.0, "20": 628.0, "21": 274.0, "23": 247.5, "24": 308.6,
    "25": 224.0, "26": 139.0, "27": 281.0, "28": 206.0, "29": 283.5, "31": 9.2,
    "39": 1104.0,
}

PARAMS = dict(
    duration=60.0,
    trip_time=5.0,
    thermal_dispatch=2990.0,
    thermal_headroom=0.0,
    thermal_T=0.49,
    hydro_dispatch=500.0,
    hydro_headroom=264.0,
    g5_headroom=20.0,
    hydro_T=0.203,
    water_T=1.66,
    transient_droop=0.213,
    reset_T=3.28,
    wind=920.0,
    damping_D=0.0,
    load_trend=0.0,        # fractional change per minute, common to all loads
    ripple=0.0,            # fractional amplitude of the per-bus ripple
    pert_amplitude=0.0095,
    pert_tau=2.0,
    pert_f=2.5,
)


def _hydro(gid, cap, bus, head, p):
    return dict(id=gid, plant_type="hydro", capacity=cap, inertia_H=3.5, droop_R=0.05,
                governor_T=p["hydro_T"], headroom=head, pm_setpoint=p["hydro_dispatch"],
                water_T=p["water_T"], transient_droop=p["transient_droop"],
                reset_T=p["reset_T"], bus=bus)


def build(name, trip, p):
    fleet = [dict(id="G1", plant_type="thermal", capacity=3000.0, inertia_H=4.0, droop_R=0.05,
                  governor_T=p["thermal_T"], headroom=p["thermal_headroom"],
                  pm_setpoint=p["thermal_dispatch"], bus="39")]
    for i, bus in zip((2, 3, 4, 6, 7, 8, 9), ("31", "32", "33", "35", "36", "37", "38")):
        fleet.append(_hydro(f"G{i}", 1000.0, bus, p["hydro_headroom"], p))
    fleet.append(_hydro("G5", 520.0, "34", p["g5_headroom"], p))
    wind_caps = {"WF1": (300.0, "2"), "WF2": (150.0, "21"), "WF3": (400.0, "8"), "WF4": (500.0, "11")}
    total_wind_cap = sum(c for c, _ in wind_caps.values())
    for wid, (cap, bus) in wind_caps.items():
        fleet.append(dict(id=wid, plant_type="wind", capacity=cap, inertia_H=0.0,
                          pm_setpoint=p["wind"] * cap / total_wind_cap, bus=bus))

    gen = sum(g["pm_setpoint"] for g in fleet)
    share_total = sum(LOAD_SHARES.values())
    n = int(p["duration"]) + 1
    nb = len(LOAD_SHARES)
    loads = []
    for j, (bus, share) in enumerate(LOAD_SHARES.items()):
        base = gen * share / share_total
        prof = []
        for t in range(n):
            trend = p["load_trend"] * t / 60.0
            # per-bus ripple, zero at t = 0 so the initial balance is untouched
            rip = p["ripple"] * (math.sin(2 * math.pi * t / 20.0 + 2 * math.pi * j / nb)
                                 - math.sin(2 * math.pi * j / nb))
            prof.append(base * (1.0 + trend + rip))
        loads.append(dict(bus=bus, p_mw=prof, q_mvar=0.2 * base))
    # absorb floating-point residue so that the t = 0 balance is exact
    resid = gen - sum(ld["p_mw"][0] for ld in loads)
    loads[-1]["p_mw"] = [v + resid for v in loads[-1]["p_mw"]]

    phases = {bus: 2 * math.pi * j / nb for j, bus in enumerate(LOAD_SHARES)}
    return dict(
        name=name,
        f0=50.0,
        duration=p["duration"],
        dt=0.001,
        seed=0,
        scheme="none",
        damping_D=p["damping_D"],
        noise_std=0.0,
        fleet=fleet,
        loads=loads,
        events=[dict(time=p["trip_time"], kind="generator_trip", target=g) for g in trip],
        perturbation=dict(amplitude=p["pert_amplitude"], tau=p["pert_tau"], f_osc=p["pert_f"],
                          phases=phases),
        estimator=dict(window_cycles=3, eipdft_iterations=2),
        relay=dict(rocof_window=25, f_ls_debounce=2, lr_debounce=2, lr_delay=5.0),
        calibration=dict(target_rocof=0.44, trip=["G4", "G6"]),
    )


def main(argv):
    p = dict(PARAMS)
    if len(argv) > 1:
        p.update(json.loads(argv[1]))
    out = Path(argv[2]) if len(argv) > 2 else OUT
    out.mkdir(parents=True, exist_ok=True)
    for name, trip in (("scenario1", ["G4", "G6"]), ("scenario2", ["G4", "G5", "G6"])):
        (out / f"{name}.json").write_text(json.dumps(build(name, trip, p), indent=1) + "\n")


if __name__ == "__main__":
    main(sys.argv)
