"""Centre-of-inertia frequency model with droop governors and load curtailment.

All power quantities are MW, inertia constants are seconds on the unit's own
MVA rating. The swing equation is written for the frequency deviation in Hz:

    d(delta_f)/dt = f0 * (sum(Pm) + P_wind - P_served - D*S_sys*delta_f/f0) / (2*sum(H_i*S_i))

Each synchronous unit has a first-order governor/gate lag towards its droop
reference. Hydro units may additionally carry the classic linearised
water-column model (1 - Tw*s)/(1 + Tw/2*s) between gate and mechanical power,
and a transient-droop compensator

    C(s) = (1/R) * (1 + T_R*s) / (1 + (R_t/R)*T_R*s)

in front of the gate servo, which is what keeps such a unit stable. With
``transient_droop = 0`` the governor is a plain proportional droop.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

F0 = 50.0
COLLAPSE_HZ = 45.0
SERVE_FACTORS = (1.00, 0.95, 0.90, 0.85, 0.75, 0.60, 0.50)


class GridError(ValueError):
    pass


@dataclass
class Generator:
    id: str
    plant_type: str
    capacity: float
    inertia_H: float = 0.0
    droop_R: float = 0.05
    governor_T: float = 1.0
    headroom: float = 0.0
    pm_setpoint: float = 0.0
    water_T: float = 0.0
    transient_droop: float = 0.0
    reset_T: float = 5.0
    bus: str = ""
    online: bool = True

    def __post_init__(self):
        if self.plant_type not in ("thermal", "hydro", "wind"):
            raise GridError(f"{self.id}: unknown plant type {self.plant_type!r}")
        if self.capacity <= 0:
            raise GridError(f"{self.id}: capacity must be positive")
        if self.inertia_H < 0:
            raise GridError(f"{self.id}: inertia must be non-negative")
        if self.plant_type == "wind":
            if self.inertia_H != 0:
                raise GridError(f"{self.id}: wind units carry no inertia")
        else:
            if not 0 < self.droop_R <= 1:
                raise GridError(f"{self.id}: droop must lie in (0, 1]")
            if self.governor_T <= 0:
                raise GridError(f"{self.id}: governor time constant must be positive")
        if self.headroom < 0 or self.pm_setpoint < 0 or self.water_T < 0:
            raise GridError(f"{self.id}: negative headroom, setpoint or water time")
        if self.transient_droop and (self.transient_droop < self.droop_R or self.reset_T <= 0):
            raise GridError(f"{self.id}: transient droop must exceed the permanent droop")

    @property
    def synchronous(self) -> bool:
        return self.plant_type != "wind"


def _profile_at(profile: np.ndarray, t: float) -> float:
    """1 s resolution, zero-order hold, last value held past the end."""
    i = int(math.floor(t + 1e-9))
    return float(profile[min(max(i, 0), len(profile) - 1)])


@dataclass
class Load:
    bus: str
    p_nominal: np.ndarray
    q_nominal: np.ndarray | None = None
    serve_factor: float = 1.0

    def __post_init__(self):
        self.p_nominal = np.atleast_1d(np.asarray(self.p_nominal, dtype=float))
        if self.serve_factor not in SERVE_FACTORS:
            raise GridError(f"load {self.bus}: serve factor {self.serve_factor} not allowed")

    def p_at(self, t: float) -> float:
        return _profile_at(self.p_nominal, t)


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    target: str
    mw: float = 0.0

    def __post_init__(self):
        if self.time < 0:
            raise GridError("event time must be non-negative")
        if self.kind not in ("generator_trip", "load_step"):
            raise GridError(f"unknown event kind {self.kind!r}")


@dataclass(frozen=True)
class BusPerturbation:
    """Damped oscillation added to the COI frequency at each bus, restarted at every event."""

    amplitude: float = 0.0
    tau: float = 2.0
    f_osc: float = 1.0
    phases: dict = field(default_factory=dict)

    def offset(self, bus: str, t: float, t_event: float | None) -> float:
        if self.amplitude == 0.0 or t_event is None or t < t_event:
            return 0.0
        tp = t - t_event
        return self.amplitude * math.exp(-tp / self.tau) * math.sin(
            2 * math.pi * self.f_osc * tp + self.phases.get(bus, 0.0))


@dataclass(frozen=True)
class GridState:
    t: float
    delta_f: float
    gate: np.ndarray
    water: np.ndarray
    comp: np.ndarray
    online: np.ndarray
    serve_factor: np.ndarray
    load_offset: np.ndarray
    last_event_time: float | None = None
    collapse: bool = False
    f0: float = F0

    @property
    def f(self) -> float:
        return self.f0 + self.delta_f


class GridModel:
    """Static description of the fleet and loads plus the integrator."""

    def __init__(self, fleet: list[Generator], loads: list[Load],
                 damping_D: float = 1.0, f0: float = F0,
                 wind_profiles: dict[str, np.ndarray] | None = None):
        if not fleet:
            raise GridError("empty fleet")
        ids = [g.id for g in fleet]
        if len(set(ids)) != len(ids):
            raise GridError("duplicate generator ids")
        self.fleet = fleet
        self.loads = loads
        self.damping_D = damping_D
        self.f0 = f0
        self.gen_index = {g.id: i for i, g in enumerate(fleet)}
        self.load_index = {ld.bus: i for i, ld in enumerate(loads)}

        sync = [g for g in fleet if g.synchronous]
        self.sync_ids = [g.id for g in sync]
        self._sync_rows = np.array([self.gen_index[i] for i in self.sync_ids], dtype=int)
        self.S = np.array([g.capacity for g in sync])
        self.H = np.array([g.inertia_H for g in sync])
        self.R = np.array([g.droop_R for g in sync])
        self.Tg = np.array([g.governor_T for g in sync])
        self.Tw = np.array([g.water_T for g in sync])
        self.pset = np.array([g.pm_setpoint for g in sync])
        self.pmax = self.pset + np.array([g.headroom for g in sync])
        self._has_water = self.Tw > 0
        self._tw_half = np.where(self._has_water, self.Tw / 2, 1.0)
        rt = np.array([g.transient_droop for g in sync])
        self._has_comp = rt > 0
        # C(s) = 1/R_t + (1/R - 1/R_t) / (1 + a*s), a = (R_t/R)*T_R
        self._fast_gain = np.where(self._has_comp, 1.0 / np.where(self._has_comp, rt, 1.0), 1.0 / self.R)
        self._slow_gain = np.where(self._has_comp, 1.0 / self.R - self._fast_gain, 0.0)
        self._comp_T = np.where(self._has_comp,
                                rt / self.R * np.array([g.reset_T for g in sync]), 1.0)

        wind = [g for g in fleet if not g.synchronous]
        wind_profiles = dict(wind_profiles or {})
        self._wind = [np.atleast_1d(np.asarray(wind_profiles.get(g.id, [g.pm_setpoint]), float))
                      for g in wind]
        self._wind_ids = [g.id for g in wind]

    # -- bookkeeping -------------------------------------------------------

    def initial_state(self) -> GridState:
        n = len(self.sync_ids)
        online = np.array([self.fleet[r].online for r in self._sync_rows], dtype=bool)
        wind_online = np.array([g.online for g in self.fleet if not g.synchronous], dtype=bool)
        return GridState(
            t=0.0,
            delta_f=0.0,
            gate=self.pset.copy(),
            water=self.pset.copy(),
            comp=np.zeros(n),
            online=np.concatenate([online, wind_online]) if wind_online.size else online,
            serve_factor=np.array([ld.serve_factor for ld in self.loads], dtype=float),
            load_offset=np.zeros(len(self.loads)),
            f0=self.f0,
        )

    def _sync_online(self, state: GridState) -> np.ndarray:
        return state.online[: len(self.sync_ids)]

    def _wind_online(self, state: GridState) -> np.ndarray:
        return state.online[len(self.sync_ids):]

    def pm(self, gate: np.ndarray, water: np.ndarray) -> np.ndarray:
        return np.where(self._has_water, 3.0 * water - 2.0 * gate, gate)

    def wind_power(self, state: GridState, t: float | None = None) -> float:
        t = state.t if t is None else t
        on = self._wind_online(state)
        return float(sum(_profile_at(p, t) for p, o in zip(self._wind, on) if o))

    def load_nominal(self, state: GridState, t: float | None = None) -> np.ndarray:
        t = state.t if t is None else t
        return np.array([ld.p_at(t) for ld in self.loads]) + state.load_offset

    def served_power(self, state: GridState, t: float | None = None) -> float:
        return float(np.dot(self.load_nominal(state, t), state.serve_factor))

    def inertia_product(self, state: GridState) -> float:
        """sum(H_i * S_i) over online synchronous units, MW*s."""
        on = self._sync_online(state)
        return float(np.dot(self.H[on], self.S[on]))

    def system_capacity(self, state: GridState) -> float:
        return float(self.S[self._sync_online(state)].sum())

    def system_inertia(self, state: GridState) -> float:
        s = self.system_capacity(state)
        return self.inertia_product(state) / s if s > 0 else 0.0

    def power_residual(self, state: GridState) -> float:
        """Net accelerating power (MW) at the current state."""
        on = self._sync_online(state)
        pm = self.pm(state.gate, state.water)
        return (float(pm[on].sum()) + self.wind_power(state) - self.served_power(state)
                - self.damping_D * self.system_capacity(state) * state.delta_f / self.f0)

    # -- dynamics ----------------------------------------------------------

    def _derivs(self, y, on, hs, s_sys, p_ext):
        n = len(self.sync_ids)
        dfr, gate, water, comp = y[0], y[1:n + 1], y[n + 1:2 * n + 1], y[2 * n + 1:]
        speed_err = -dfr / self.f0
        # comp is the slow branch of the compensator, in MW
        dcomp = np.where(self._has_comp,
                         (self.S * self._slow_gain * speed_err - comp) / self._comp_T, 0.0)
        ref = np.clip(self.pset + self.S * self._fast_gain * speed_err + comp, 0.0, self.pmax)
        dgate = (ref - gate) / self.Tg
        dwater = np.where(self._has_water, (gate - water) / self._tw_half, dgate)
        pm = np.where(self._has_water, 3.0 * water - 2.0 * gate, gate)
        acc = pm[on].sum() + p_ext - self.damping_D * s_sys * dfr / self.f0
        ddf = self.f0 * acc / (2.0 * hs)
        # tripped units keep a frozen state
        dgate = np.where(on, dgate, 0.0)
        dwater = np.where(on, dwater, 0.0)
        dcomp = np.where(on, dcomp, 0.0)
        return np.concatenate(([ddf], dgate, dwater, dcomp))

    def apply_events(self, state: GridState, events) -> GridState:
        if not events:
            return state
        online = state.online.copy()
        offset = state.load_offset.copy()
        wind_pos = {gid: len(self.sync_ids) + i for i, gid in enumerate(self._wind_ids)}
        sync_pos = {gid: i for i, gid in enumerate(self.sync_ids)}
        last = state.last_event_time
        for ev in events:
            if ev.kind == "generator_trip":
                if ev.target in sync_pos:
                    online[sync_pos[ev.target]] = False
                elif ev.target in wind_pos:
                    online[wind_pos[ev.target]] = False
                else:
                    raise GridError(f"trip of unknown generator {ev.target!r}")
            else:
                if ev.target not in self.load_index:
                    raise GridError(f"load step at unknown bus {ev.target!r}")
                offset[self.load_index[ev.target]] += ev.mw
            last = ev.time if last is None else max(last, ev.time)
        if not online[: len(self.sync_ids)].any():
            raise GridError("no synchronous generation left online")
        return replace(state, online=online, load_offset=offset, last_event_time=last)

    def apply_shedding(self, state: GridState, shed_commands: dict | None) -> GridState:
        if not shed_commands:
            return state
        sf = state.serve_factor.copy()
        for bus, factor in shed_commands.items():
            if factor not in SERVE_FACTORS:
                raise GridError(f"serve factor {factor} not allowed")
            sf[self.load_index[bus]] = factor
        return replace(state, serve_factor=sf)

    def step(self, state: GridState, events_due=(), shed_commands=None, dt: float = 1e-3) -> GridState:
        """Advance one RK4 step; events and commands take effect at the step start."""
        state = self.apply_events(state, list(events_due))
        state = self.apply_shedding(state, shed_commands)
        return self.integrate(state, 1, dt)[0]

    def integrate(self, state: GridState, n_steps: int, dt: float = 1e-3):
        """Advance ``n_steps`` RK4 steps with loads, wind and topology frozen.

        Returns the new state and the frequency deviation after each step.
        Callers must not straddle a load-profile boundary (whole seconds).
        """
        if not 0 < dt <= 0.01:
            raise GridError("dt must lie in (0, 0.01] s")
        on = self._sync_online(state)
        hs = self.inertia_product(state)
        s_sys = self.system_capacity(state)
        p_ext = self.wind_power(state) - self.served_power(state)
        y = np.concatenate(([state.delta_f], state.gate, state.water, state.comp))
        trace = np.empty(n_steps)
        deriv = self._derivs
        for i in range(n_steps):
            k1 = deriv(y, on, hs, s_sys, p_ext)
            k2 = deriv(y + 0.5 * dt * k1, on, hs, s_sys, p_ext)
            k3 = deriv(y + 0.5 * dt * k2, on, hs, s_sys, p_ext)
            k4 = deriv(y + dt * k3, on, hs, s_sys, p_ext)
            y = y + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
            trace[i] = y[0]
        n = len(self.sync_ids)
        return replace(
            state,
            t=state.t + n_steps * dt,
            delta_f=float(y[0]),
            gate=y[1:n + 1],
            water=y[n + 1:2 * n + 1],
            comp=y[2 * n + 1:],
            collapse=state.collapse or bool(np.any(self.f0 + trace < COLLAPSE_HZ)),
        ), trace

    def rocof(self, state: GridState) -> float:
        """Instantaneous d(f)/dt from the swing equation."""
        return self.f0 * self.power_residual(state) / (2.0 * self.inertia_product(state))


def bus_frequency(state: GridState, bus: str, perturb: BusPerturbation | None = None) -> float:
    if perturb is None:
        return state.f
    return state.f + perturb.offset(bus, state.t, state.last_event_time)


def calibrate_inertia(target_rocof: float, tripped_mw: float, fleet: list[Generator],
                      f0: float = F0) -> float:
    """Scale factor on every H_i giving |df/dt| = target_rocof just after the trip.

    ``fleet`` is the set of synchronous units that survive the contingency.
    """
    if target_rocof <= 0 or tripped_mw <= 0:
        raise GridError("target ROCOF and tripped power must be positive")
    hs = sum(g.inertia_H * g.capacity for g in fleet if g.synchronous and g.online)
    if hs <= 0:
        raise GridError("no surviving synchronous inertia to calibrate")
    return f0 * tripped_mw / (2.0 * target_rocof * hs)
