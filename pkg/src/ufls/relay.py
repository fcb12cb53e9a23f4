"""Per-bus UFLS / load-restoration relay driven by PMU frames.

Shedding is triggered either by frequency (f-LS) or by ROCOF (two threshold
sets, A and B); restoration is always frequency-driven. By default the ROCOF
path only acts on a value that has held beyond a threshold for a full 500 ms
window (``rocof_filter="hold"``); ``"mean"`` uses the 25-frame moving average
instead. Restoration steps are spaced by a 5 s lockout.
"""

from __future__ import annotations

import copy
from collections import deque
from dataclasses import dataclass, field

from .pmu import Frame

SCHEMES = ("none", "f_ls", "rocof_a", "rocof_b")
# frame times sit on a 20 ms grid built from floats; compare timers with slack
_TIME_EPS = 1e-9


@dataclass(frozen=True)
class ThresholdTable:
    factors: tuple = (100, 95, 90, 85, 75, 60, 50)
    # index 0 is the 100 % column and has no LS threshold
    rocof_a: tuple = (None, 0.2, 0.4, 0.6, 0.7, 1.0, 1.3)
    rocof_b: tuple = (None, 0.2, 0.3, 0.4, 0.5, 1.0, 1.3)
    f_ls: tuple = (None, 48.9, 48.8, 48.6, 48.4, 48.2, 48.0)
    f_lr: tuple = (49.75, 49.6, 49.5, 49.4, 49.2, 49.0, None)

    def __post_init__(self):
        n = len(self.factors)
        for row in (self.rocof_a, self.rocof_b, self.f_ls, self.f_lr):
            if len(row) != n:
                raise ValueError("threshold rows must align with the factor row")

        def strictly(seq, up):
            vals = [v for v in seq if v is not None]
            return all((b > a) if up else (b < a) for a, b in zip(vals, vals[1:]))

        if not (strictly(self.factors, False) and strictly(self.rocof_a, True)
                and strictly(self.rocof_b, True) and strictly(self.f_ls, False)
                and strictly(self.f_lr, False)):
            raise ValueError("threshold table is not monotone")

    def ls_row(self, scheme: str):
        return {"rocof_a": self.rocof_a, "rocof_b": self.rocof_b, "f_ls": self.f_ls}.get(scheme)

    def serve_factor(self, level: int) -> int:
        return self.factors[level]


DEFAULT_TABLE = ThresholdTable()


@dataclass(frozen=True)
class RelayConfig:
    rocof_window: int = 25
    f_ls_debounce: int = 2
    lr_debounce: int = 2
    lr_delay: float = 5.0
    rocof_filter: str = "hold"

    def __post_init__(self):
        if self.rocof_filter not in ("hold", "mean"):
            raise ValueError("rocof_filter must be 'hold' or 'mean'")
        if min(self.rocof_window, self.f_ls_debounce, self.lr_debounce) < 1 or self.lr_delay < 0:
            raise ValueError("window and debounce lengths must be positive")


@dataclass
class RelayState:
    scheme: str = "none"
    level: int = 0
    rocof_window: deque = field(default_factory=lambda: deque(maxlen=25))
    f_ls_history: deque = field(default_factory=lambda: deque(maxlen=2))
    lr_history: deque = field(default_factory=lambda: deque(maxlen=2))
    last_shed_time: float | None = None
    last_action_time: float | None = None
    lr_lockout_until: float = float("-inf")
    rocof_filter: str = "hold"

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @classmethod
    def fresh(cls, scheme: str, cfg: RelayConfig = RelayConfig()) -> "RelayState":
        return cls(
            scheme=scheme,
            rocof_window=deque(maxlen=cfg.rocof_window),
            f_ls_history=deque(maxlen=cfg.f_ls_debounce),
            lr_history=deque(maxlen=cfg.lr_debounce),
            rocof_filter=cfg.rocof_filter,
        )

    def filtered_rocof(self) -> float | None:
        """Filtered ROCOF over the full window, or None until the window fills.

        "hold" returns the least severe (largest) value, so a threshold is
        crossed only once every frame of the last 500 ms is beyond it.
        """
        w = self.rocof_window
        if len(w) < w.maxlen:
            return None
        if self.rocof_filter == "mean":
            return sum(w) / len(w)
        return max(w)


@dataclass(frozen=True)
class Command:
    bus: str
    serve_factor: int
    reason: str
    time: float


def _deepest_rocof_level(row, filtered: float) -> int:
    k = 0
    for i, thr in enumerate(row):
        if thr is not None and filtered <= -thr:
            k = i
    return k


def _deepest_freq_level(row, freq: float) -> int:
    k = 0
    for i, thr in enumerate(row):
        if thr is not None and freq <= thr:
            k = i
    return k


def advance(state: RelayState, frame: Frame, table: ThresholdTable, bus: str = "",
            now: float | None = None, cfg: RelayConfig = RelayConfig()) -> Command | None:
    """In-place version of :func:`on_frame`."""
    now = frame.timestamp if now is None else now
    if not frame.valid:
        return None

    cmd = None
    row = table.ls_row(state.scheme)
    if state.scheme in ("rocof_a", "rocof_b"):
        if frame.rocof_valid:
            state.rocof_window.append(frame.rocof)
        filt = state.filtered_rocof()
        if filt is not None:
            k = _deepest_rocof_level(row, filt)
            if k > state.level:
                state.level = k
                cmd = Command(bus, table.serve_factor(k), f"ls_rocof({k})", now)
    elif state.scheme == "f_ls":
        state.f_ls_history.append(_deepest_freq_level(row, frame.frequency))
        if len(state.f_ls_history) == state.f_ls_history.maxlen:
            k = min(state.f_ls_history)
            if k > state.level:
                state.level = k
                cmd = Command(bus, table.serve_factor(k), f"ls_freq({k})", now)

    if cmd is not None:
        state.last_shed_time = now
        state.last_action_time = now
        state.lr_history.clear()
        return cmd

    state.lr_history.append(frame.frequency)
    if state.level > 0:
        gate = table.f_lr[state.level - 1]
        held = (len(state.lr_history) == state.lr_history.maxlen
                and all(f >= gate for f in state.lr_history))
        settled = (state.last_shed_time is None
                   or now >= state.last_shed_time + cfg.lr_delay - _TIME_EPS)
        if held and settled and now >= state.lr_lockout_until - _TIME_EPS:
            state.level -= 1
            state.lr_lockout_until = now + cfg.lr_delay
            state.last_action_time = now
            state.lr_history.clear()
            return Command(bus, table.serve_factor(state.level), f"lr({state.level})", now)
    return None


def on_frame(state: RelayState, frame: Frame, table: ThresholdTable = DEFAULT_TABLE,
             bus: str = "", now: float | None = None, cfg: RelayConfig = RelayConfig()):
    """Pure variant: returns (new_state, command or None); ``state`` is left untouched."""
    new = copy.deepcopy(state)
    return new, advance(new, frame, table, bus, now, cfg)


def reset(state: RelayState, cfg: RelayConfig = RelayConfig()) -> RelayState:
    return RelayState.fresh(state.scheme, cfg)


class Relay:
    """One relay per load bus; holds its own state and never talks to its neighbours."""

    def __init__(self, bus: str, scheme: str, table: ThresholdTable = DEFAULT_TABLE,
                 cfg: RelayConfig = RelayConfig()):
        self.bus = bus
        self.table = table
        self.cfg = cfg
        self.state = RelayState.fresh(scheme, cfg)

    @property
    def serve_factor(self) -> int:
        return self.table.serve_factor(self.state.level)

    def on_frame(self, frame: Frame, now: float | None = None) -> Command | None:
        return advance(self.state, frame, self.table, self.bus, now, self.cfg)

    def reset(self) -> None:
        self.state = RelayState.fresh(self.state.scheme, self.cfg)
