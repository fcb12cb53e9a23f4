"""Point-on-wave synthesis from piecewise-linear frequency trajectories."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

F_NOMINAL = 50.0
DEFAULT_SAMPLE_RATE = 10_000
REPORTING_RATE = 50
F_MIN, F_MAX = 40.0, 60.0


class SignalError(ValueError):
    pass


@dataclass(frozen=True)
class FrequencyTrajectory:
    """Piecewise-linear f(t), held constant outside the breakpoints."""

    times: np.ndarray
    freqs: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        f = np.asarray(self.freqs, dtype=float)
        if t.ndim != 1 or t.shape != f.shape or t.size == 0:
            raise SignalError("times and freqs must be equal-length 1-D sequences")
        if t.size > 1 and not np.all(np.diff(t) > 0):
            raise SignalError("breakpoint times must be strictly increasing")
        if np.any(f < F_MIN) or np.any(f > F_MAX):
            raise SignalError(f"frequencies must lie in [{F_MIN}, {F_MAX}] Hz")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "freqs", f)

    @classmethod
    def from_breakpoints(cls, breakpoints) -> "FrequencyTrajectory":
        pts = list(breakpoints)
        return cls(np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))

    @classmethod
    def constant(cls, freq: float, t0: float = 0.0) -> "FrequencyTrajectory":
        return cls(np.array([t0]), np.array([freq]))

    def frequency(self, t) -> np.ndarray:
        return np.interp(t, self.times, self.freqs)

    def rocof(self, t) -> np.ndarray:
        """Slope of the segment containing t (zero outside the breakpoints)."""
        t = np.asarray(t, dtype=float)
        if self.times.size < 2:
            return np.zeros_like(t)
        slopes = np.diff(self.freqs) / np.diff(self.times)
        idx = np.searchsorted(self.times, t, side="right") - 1
        inside = (idx >= 0) & (idx < slopes.size)
        return np.where(inside, slopes[np.clip(idx, 0, slopes.size - 1)], 0.0)

    def phase_cycles(self, t) -> np.ndarray:
        """Exact integral of f from 0 to t, in cycles.

        Each linear segment integrates to a quadratic, so there is no
        accumulation error regardless of sample rate.
        """
        t = np.asarray(t, dtype=float)
        tb, fb = self.times, self.freqs
        # knots include 0 so the integral is anchored there
        knots = np.union1d(tb, [0.0])
        fk = self.frequency(knots)
        seg = 0.5 * (fk[1:] + fk[:-1]) * np.diff(knots)
        cum = np.concatenate(([0.0], np.cumsum(seg)))
        cum -= cum[np.searchsorted(knots, 0.0)]

        idx = np.clip(np.searchsorted(knots, t, side="right") - 1, 0, knots.size - 1)
        tk = knots[idx]
        f_at_knot = fk[idx]
        f_at_t = self.frequency(t)
        # before the first knot f is constant, so the trapezoid is exact too
        return cum[idx] + 0.5 * (f_at_knot + f_at_t) * (t - tk)


@dataclass(frozen=True)
class SampleStream:
    sample_rate: float
    t0: float
    samples: np.ndarray

    def __post_init__(self):
        if self.sample_rate <= 0:
            raise SignalError("sample_rate must be positive")

    @property
    def duration(self) -> float:
        return len(self.samples) / self.sample_rate

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.samples)) / self.sample_rate

    def scaled(self, k: float) -> "SampleStream":
        return SampleStream(self.sample_rate, self.t0, self.samples * k)

    def to_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["time_s", "value_pu"])
            for t, v in zip(self.times(), self.samples):
                w.writerow([f"{t:.12g}", f"{v:.12g}"])


def check_sample_rate(sample_rate: float, reporting_rate: int = REPORTING_RATE,
                      divisor: int = 1) -> None:
    """The hop between frames must be a whole number of samples."""
    ratio = sample_rate / (reporting_rate * divisor)
    if sample_rate <= 0 or abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise SignalError(
            f"sample_rate {sample_rate} is not an integer multiple of "
            f"{reporting_rate * divisor} samples/s"
        )


def synthesize(traj: FrequencyTrajectory, amplitude: float = 1.0, phase0: float = 0.0,
               noise_std: float = 0.0, seed: int = 0, duration: float = 1.0,
               sample_rate: float = DEFAULT_SAMPLE_RATE, t0: float = 0.0) -> SampleStream:
    """Render amplitude*sqrt(2)*cos(2*pi*Phi(t) + phase0) plus optional Gaussian noise.

    ``amplitude`` is an RMS (phasor) magnitude in per-unit.
    """
    if duration <= 0:
        raise SignalError("duration must be positive")
    if noise_std < 0:
        raise SignalError("noise_std must be non-negative")
    check_sample_rate(sample_rate)

    n = int(round(duration * sample_rate))
    t = t0 + np.arange(n) / sample_rate
    x = amplitude * np.sqrt(2.0) * np.cos(2.0 * np.pi * traj.phase_cycles(t) + phase0)
    if noise_std > 0:
        rng = np.random.default_rng(seed)
        x = x + rng.normal(0.0, noise_std, size=n)
    return SampleStream(float(sample_rate), float(t0), x)


def ramp_test_signal(sample_rate: float = DEFAULT_SAMPLE_RATE):
    """45 Hz to 55 Hz at +1 Hz/s, noise-free, 1 pu."""
    traj = FrequencyTrajectory(np.array([0.0, 10.0]), np.array([45.0, 55.0]))
    return synthesize(traj, amplitude=1.0, duration=10.0, sample_rate=sample_rate), traj
