"""Closed-loop orchestration: grid -> waveform -> PMU -> relay -> grid.

Every 20 ms reporting tick the grid is integrated over the tick, the bus
frequency trajectory of each load bus is rendered to 10 kHz samples, one PMU
frame per bus is estimated on the most recent window, and any relay command
is applied to the grid at the first dynamics step of the next tick.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .grid import COLLAPSE_HZ
from .pmu import PMU, Frame, write_frames_csv
from .relay import Command, Relay
from .scenario import Scenario

log = logging.getLogger(__name__)


class NoTrigger(LookupError):
    """The run produced no load-shedding command."""


@dataclass
class ScenarioReport:
    name: str
    scheme: str
    nadir_frequency: float
    nadir_time: float
    max_ls_factor: float
    duration_s: float
    incomplete: bool
    curtailed_energy: float
    collapse: bool
    contingency_time: float | None
    commands: list[Command] = field(default_factory=list)
    traces: dict = field(default_factory=dict)
    frames: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        try:
            latency = first_trigger_latency(self)
        except NoTrigger:
            latency = None
        return {
            "name": self.name,
            "scheme": self.scheme,
            "nadir_frequency_hz": self.nadir_frequency,
            "nadir_time_s": self.nadir_time,
            "max_ls_pct": self.max_ls_factor,
            "duration_s": self.duration_s,
            "curtailed_energy_mwh": self.curtailed_energy,
            "first_trigger_latency_s": latency,
            "collapse": self.collapse,
            "incomplete": self.incomplete,
            "n_commands": len(self.commands),
        }


def curtailed_energy(times, p_nominal, p_served) -> float:
    """Trapezoidal integral of (p_nominal - p_served) in MWh.

    ``times`` in seconds; powers in MW. Inputs may be 1-D (one load) or
    2-D with loads along the first axis. A step change is represented by a
    repeated time stamp, which the trapezoid rule handles exactly.
    """
    t = np.asarray(times, dtype=float)
    gap = np.atleast_2d(np.asarray(p_nominal, float) - np.asarray(p_served, float))
    return float(np.trapezoid(gap, t, axis=-1).sum() / 3600.0)


def first_trigger_latency(report: ScenarioReport) -> float:
    sheds = [c for c in report.commands if c.reason.startswith("ls_")]
    if not sheds:
        raise NoTrigger("no load-shedding command in the log")
    t0 = report.contingency_time or 0.0
    return sheds[0].time - t0


def _step_held(t_knots: np.ndarray, values: np.ndarray):
    """Expand per-interval values into a (time, value) polyline with vertical jumps."""
    t = np.repeat(t_knots, 2)[1:-1]
    v = np.repeat(values, 2, axis=-1)
    return t, v


def run_scenario(s: Scenario, t_end: float | None = None) -> ScenarioReport:
    """Simulate one scenario under its relay scheme.

    ``t_end`` truncates the run (used by causality checks); by default the
    scenario duration is used.
    """
    s.validate()
    grid = s.build_grid()
    state = grid.initial_state()
    est = s.estimator
    dt = s.dt
    duration = s.duration if t_end is None else min(t_end, s.duration)
    steps_per_tick = int(round(est.frame_interval / dt))
    n_ticks = int(round(duration / est.frame_interval))
    samples_per_step = est.sample_rate * dt
    if abs(samples_per_step - round(samples_per_step)) > 1e-9:
        raise ValueError("dt must be a whole number of sample periods")
    samples_per_step = int(round(samples_per_step))
    hop = est.hop
    n_win = est.window_len

    buses = s.load_buses
    nb = len(buses)
    rng = np.random.default_rng(s.seed)
    # deterministic per-bus initial angle, spread around the circle
    phase0 = 2 * np.pi * np.arange(nb) / max(nb, 1)
    phase_cycles = np.zeros(nb)
    buffer = np.zeros((nb, n_win))
    filled = 0
    pmus = [PMU(est) for _ in buses]
    relays = [Relay(b, s.scheme, cfg=s.relay) for b in buses]
    pert = s.perturbation

    pending_events = sorted(s.events, key=lambda e: e.time)
    ev_i = 0
    pending_cmds: dict[str, float] = {}
    commands: list[Command] = []
    frames = {b: [] for b in buses}

    n_steps = n_ticks * steps_per_tick
    coi = np.empty(n_steps + 1)
    coi[0] = state.f
    shed_mw = np.empty((nb, n_steps))
    nom_mw = np.empty((nb, n_steps))
    tick_t = np.empty(n_ticks + 1)
    tick_t[0] = 0.0
    bus_f_tick = np.empty((nb, n_ticks + 1))
    bus_f_tick[:, 0] = state.f
    sf_tick = np.empty((nb, n_ticks + 1))
    sf_tick[:, 0] = state.serve_factor
    nadir = (math.inf, 0.0)

    sub = np.arange(samples_per_step) / est.sample_rate
    tau = np.tile(sub, steps_per_tick)
    seg = np.repeat(np.arange(steps_per_tick), samples_per_step)

    for k in range(n_ticks):
        t_tick = k * est.frame_interval
        step0 = k * steps_per_tick
        if pending_cmds:
            state = grid.apply_shedding(state, pending_cmds)
            pending_cmds = {}

        # integrate the tick, splitting at event instants
        f_knots = np.empty(steps_per_tick + 1)
        f_knots[0] = state.f
        done = 0
        while done < steps_per_tick:
            t_now = (step0 + done) * dt
            due = []
            while ev_i < len(pending_events) and pending_events[ev_i].time <= t_now + 1e-9:
                due.append(pending_events[ev_i])
                ev_i += 1
            if due:
                state = grid.apply_events(state, due)
            nxt = steps_per_tick
            if ev_i < len(pending_events):
                j = int(math.ceil((pending_events[ev_i].time - 1e-9) / dt)) - step0
                if done < j < steps_per_tick:
                    nxt = j
            state = state if abs(state.t - t_now) < 1e-12 else _retime(state, t_now)
            nominal = grid.load_nominal(state)
            sl = slice(step0 + done, step0 + nxt)
            shed_mw[:, sl] = (nominal * (1.0 - state.serve_factor))[:, None]
            nom_mw[:, sl] = nominal[:, None]
            state, trace = grid.integrate(state, nxt - done, dt)
            f_knots[done + 1:nxt + 1] = grid.f0 + trace
            done = nxt
        state = _retime(state, (step0 + steps_per_tick) * dt)
        coi[step0 + 1:step0 + steps_per_tick + 1] = f_knots[1:]

        # per-bus frequency at the step knots
        t_knots = t_tick + np.arange(steps_per_tick + 1) * dt
        offs = np.array([[pert.offset(b, t, state.last_event_time) for t in t_knots] for b in buses]) \
            if pert.amplitude else np.zeros((nb, 1))
        fb = f_knots[None, :] + offs
        i_min = np.unravel_index(np.argmin(fb), fb.shape)
        if fb[i_min] < nadir[0]:
            nadir = (float(fb[i_min]), float(t_knots[i_min[1]]))

        # exact phase of the piecewise-linear frequency at each sample
        render = np.clip(fb, 40.0, 60.0)
        f_a = render[:, seg]
        f_b = render[:, seg + 1]
        cum = np.concatenate([np.zeros((nb, 1)), np.cumsum(0.5 * (render[:, 1:] + render[:, :-1]) * dt, axis=1)], axis=1)
        phi = phase_cycles[:, None] + cum[:, seg] + f_a * tau + (f_b - f_a) * tau ** 2 / (2 * dt)
        x = np.sqrt(2.0) * np.cos(2 * np.pi * phi + phase0[:, None])
        if s.noise_std > 0:
            x = x + rng.normal(0.0, s.noise_std, size=x.shape)
        phase_cycles = np.mod(phase_cycles + cum[:, -1], 1.0)
        buffer = np.concatenate([buffer[:, hop:], x], axis=1)
        filled = min(filled + hop, n_win)

        t_frame = t_tick + est.frame_interval
        if filled == n_win:
            t_start = t_frame - n_win / est.sample_rate
            for i, b in enumerate(buses):
                fr = pmus[i].process(buffer[i], t_start)
                frames[b].append(fr)
                cmd = relays[i].on_frame(fr, now=t_frame)
                if cmd is not None:
                    commands.append(cmd)
                    pending_cmds[b] = cmd.serve_factor / 100.0

        tick_t[k + 1] = t_frame
        bus_f_tick[:, k + 1] = fb[:, -1]
        sf_tick[:, k + 1] = [r.serve_factor / 100.0 for r in relays]

    t_steps = np.arange(n_steps + 1) * dt
    t_line, nom_line = _step_held(t_steps, nom_mw)
    _, shed_line = _step_held(t_steps, shed_mw)
    energy = curtailed_energy(t_line, nom_line, nom_line - shed_line)

    sheds = [c for c in commands if c.reason.startswith("ls_")]
    restores = [c for c in commands if c.reason.startswith("lr")]
    incomplete = any(r.state.level > 0 for r in relays)
    if sheds:
        end = restores[-1].time if restores else duration
        dur = max(0.0, end - sheds[0].time)
    else:
        dur = 0.0
    min_sf = min([100] + [c.serve_factor for c in commands])

    return ScenarioReport(
        name=s.name,
        scheme=s.scheme,
        nadir_frequency=nadir[0],
        nadir_time=nadir[1],
        max_ls_factor=float(100 - min_sf),
        duration_s=float(dur),
        incomplete=bool(incomplete and bool(sheds)),
        curtailed_energy=energy,
        collapse=bool(state.collapse or nadir[0] < COLLAPSE_HZ),
        contingency_time=s.contingency_time,
        commands=commands,
        traces={
            "t": t_steps,
            "coi_freq": coi,
            "shed_mw": shed_mw,
            "nominal_mw": nom_mw,
            "tick_t": tick_t,
            "bus_freq": {b: bus_f_tick[i] for i, b in enumerate(buses)},
            "serve_factor": {b: sf_tick[i] for i, b in enumerate(buses)},
        },
        frames=frames,
    )


def _retime(state, t):
    return replace(state, t=t)


def compare_schemes(s: Scenario, schemes) -> list[ScenarioReport]:
    """Run every scheme on the identical scenario (same seed, same grid)."""
    if not schemes:
        raise ValueError("at least one scheme is required")
    return [run_scenario(s.with_scheme(sc)) for sc in schemes]


TABLE_HEADER = ("LS-scheme", "Nadir frequency [Hz]", "Max LS [%]", "Duration [s]", "Energy [MWh]")


def summary_table(reports: list[ScenarioReport]) -> str:
    rows = [TABLE_HEADER]
    for r in reports:
        dur = f"{r.duration_s:.1f}" + ("*" if r.incomplete else "")
        rows.append((r.scheme, f"{r.nadir_frequency:.2f}", f"{r.max_ls_factor:g}", dur,
                     f"{r.curtailed_energy:.2f}"))
    widths = [max(len(row[i]) for row in rows) for i in range(len(TABLE_HEADER))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows]
    lines.insert(1, "  ".join("-" * w for w in widths))
    if any(r.incomplete for r in reports):
        lines.append("* restoration incomplete at end of run")
    return "\n".join(lines) + "\n"


# -- output files -------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_report(report: ScenarioReport, out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(json.dumps(report.metrics(), indent=2) + "\n")
    with open(out / "commands.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "bus", "serve_factor_pct", "reason"])
        for c in report.commands:
            w.writerow([_fmt(c.time), c.bus, c.serve_factor, c.reason])
    tt = report.traces["tick_t"]
    for bus, f in report.traces["bus_freq"].items():
        with open(out / f"frequency_{bus}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "freq_hz"])
            w.writerows([_fmt(t), _fmt(v)] for t, v in zip(tt, f))
    for bus, frames in report.frames.items():
        write_frames_csv(frames, out / f"frames_{bus}.csv")


def write_comparison(reports: list[ScenarioReport], out: str | Path) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    for r in reports:
        write_report(r, out / r.scheme)
    (out / "metrics.json").write_text(
        json.dumps({r.scheme: r.metrics() for r in reports}, indent=2) + "\n")
    (out / "summary.txt").write_text(summary_table(reports))
