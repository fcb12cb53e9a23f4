"""P-class PMU model: enhanced interpolated DFT with finite-difference ROCOF.

The estimator works on a Hann-windowed block of ``window_cycles`` nominal
cycles. A two-point interpolation recovers the fractional bin of the
fundamental, and the spectral image of the negative-frequency component is
estimated and removed for ``eipdft_iterations`` rounds before the final
interpolation. ROCOF is the difference of two consecutive frequency
estimates divided by the reporting interval.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .signal import (
    F_NOMINAL,
    FrequencyTrajectory,
    SampleStream,
    check_sample_rate,
    ramp_test_signal,
    synthesize,
)


class NoSignalError(ValueError):
    """The window carries no energy, so no fundamental can be located."""


class PMUError(ValueError):
    pass


@dataclass(frozen=True)
class EstimatorConfig:
    window_cycles: int = 3
    sample_rate: int = 10_000
    eipdft_iterations: int = 2
    reporting_rate: int = 50
    f0: float = F_NOMINAL
    f_search: tuple[float, float] = (40.0, 60.0)

    def __post_init__(self):
        n = self.window_cycles * self.sample_rate / self.f0
        if self.window_cycles < 1 or abs(n - round(n)) > 1e-9:
            raise PMUError("window_cycles * sample_rate / f0 must be a positive integer")
        if self.eipdft_iterations < 0:
            raise PMUError("eipdft_iterations must be >= 0")
        check_sample_rate(self.sample_rate, self.reporting_rate)

    @property
    def window_len(self) -> int:
        return int(round(self.window_cycles * self.sample_rate / self.f0))

    @property
    def hop(self) -> int:
        return self.sample_rate // self.reporting_rate

    @property
    def frame_interval(self) -> float:
        return 1.0 / self.reporting_rate


@dataclass(frozen=True)
class Frame:
    timestamp: float
    magnitude: float
    phase: float
    frequency: float
    rocof: float
    valid: bool = True
    rocof_valid: bool = True

    @property
    def usable(self) -> bool:
        return self.valid and self.rocof_valid


@dataclass(frozen=True)
class ErrorReport:
    max_fe: float
    max_rfe: float
    rocof_std: float
    max_tve: float
    rocof_mean: float = float("nan")
    n_frames: int = 0


def _dirichlet(nu: np.ndarray, n: int) -> np.ndarray:
    """sum_{k<n} exp(-2j*pi*nu*k/n) in closed form."""
    nu = np.asarray(nu, dtype=float)
    num = np.sin(np.pi * nu)
    den = np.sin(np.pi * nu / n)
    with np.errstate(divide="ignore", invalid="ignore"):
        # nu is always well inside (-n, n), so den vanishes only at nu == 0
        ratio = np.where(np.abs(den) < 1e-14, float(n), num / den)
    return np.exp(-1j * np.pi * nu * (n - 1) / n) * ratio


def hann_kernel(nu, n: int) -> np.ndarray:
    """DFT of the periodic Hann window evaluated at fractional bin offset ``nu``."""
    nu = np.asarray(nu, dtype=float)
    return 0.5 * _dirichlet(nu, n) - 0.25 * _dirichlet(nu - 1, n) - 0.25 * _dirichlet(nu + 1, n)


_HANN_CACHE: dict[int, np.ndarray] = {}


def _hann(n: int) -> np.ndarray:
    w = _HANN_CACHE.get(n)
    if w is None:
        w = 0.5 - 0.5 * np.cos(2 * np.pi * np.arange(n) / n)
        _HANN_CACHE[n] = w
    return w


def _interpolate(spec: np.ndarray, k: int) -> float:
    """Fractional offset of the tone from bin k (Hann two-point formula)."""
    a_m, a_0, a_p = np.abs(spec[k - 1]), np.abs(spec[k]), np.abs(spec[k + 1])
    eps = 1 if a_p > a_m else -1
    a_e = a_p if eps == 1 else a_m
    return eps * (2 * a_e - a_0) / (a_0 + a_e)


def estimate_frame(window, cfg: EstimatorConfig = EstimatorConfig(), t_start: float = 0.0):
    """Estimate (magnitude, phase, frequency) for one analysis window.

    ``t_start`` is the absolute time of the first sample; the returned phase
    is the synchrophasor angle at the window centre, referred to a nominal
    cosine at that instant. Magnitude is RMS.
    """
    x = np.asarray(window, dtype=float)
    n = cfg.window_len
    if x.size != n:
        raise PMUError(f"window must hold {n} samples, got {x.size}")
    if not np.any(x):
        raise NoSignalError("all-zero window")

    spec = np.fft.rfft(x * _hann(n))
    k_lo = max(1, int(np.floor(cfg.f_search[0] * n / cfg.sample_rate)))
    k_hi = min(len(spec) - 2, int(np.ceil(cfg.f_search[1] * n / cfg.sample_rate)))
    k = k_lo + int(np.argmax(np.abs(spec[k_lo:k_hi + 1])))
    k = min(max(k, 1), len(spec) - 2)

    bins = np.array([k - 1, k, k + 1], dtype=float)
    local = spec[k - 1:k + 2]
    cleaned = local
    delta = _interpolate(local, 1)
    for _ in range(cfg.eipdft_iterations):
        k0 = k + delta
        b = cleaned[1] / hann_kernel(k - k0, n)
        # remove the negative-frequency image from the three bins used
        cleaned = local - np.conj(b) * hann_kernel(bins + k0, n)
        delta = _interpolate(cleaned, 1)

    k0 = k + delta
    b = cleaned[1] / hann_kernel(k - k0, n)
    freq = k0 * cfg.sample_rate / n
    magnitude = np.sqrt(2.0) * np.abs(b)
    t_center = t_start + (n // 2) / cfg.sample_rate
    inst_phase = np.angle(b) + np.pi * k0 * (2 * (n // 2)) / n
    phase = _wrap(inst_phase - 2 * np.pi * cfg.f0 * t_center)
    return float(magnitude), float(phase), float(freq)


def _wrap(a: float) -> float:
    """Wrap to (-pi, pi]."""
    w = np.mod(a + np.pi, 2 * np.pi) - np.pi
    return float(np.pi if w == -np.pi else w)


def rocof(frame_k_frequency: float, frame_k_minus_1_frequency: float,
          interval: float = 0.02) -> float:
    return (frame_k_frequency - frame_k_minus_1_frequency) / interval


class PMU:
    """Stateful per-bus estimator: feeds windows in order, differences frequency."""

    def __init__(self, cfg: EstimatorConfig = EstimatorConfig()):
        self.cfg = cfg
        self._last_freq: float | None = None

    def reset(self) -> None:
        self._last_freq = None

    def process(self, window, t_start: float) -> Frame:
        cfg = self.cfg
        t_center = t_start + (cfg.window_len // 2) / cfg.sample_rate
        try:
            mag, ph, freq = estimate_frame(window, cfg, t_start)
        except NoSignalError:
            self._last_freq = None
            return Frame(t_center, 0.0, 0.0, float("nan"), 0.0, valid=False, rocof_valid=False)
        if self._last_freq is None:
            fr = Frame(t_center, mag, ph, freq, 0.0, rocof_valid=False)
        else:
            fr = Frame(t_center, mag, ph, freq, rocof(freq, self._last_freq, cfg.frame_interval))
        self._last_freq = freq
        return fr


def frame_time(t0: float, m: int, cfg: EstimatorConfig = EstimatorConfig()) -> float:
    """Centre time of frame ``m`` of a stream starting at ``t0``.

    Built from integer sample counts so that frame spacing does not drift.
    """
    return t0 + (m * cfg.hop + cfg.window_len // 2) / cfg.sample_rate


def run_pmu(stream: SampleStream, cfg: EstimatorConfig = EstimatorConfig()) -> list[Frame]:
    if stream.sample_rate != cfg.sample_rate:
        raise PMUError("stream sample rate does not match estimator config")
    n, hop = cfg.window_len, cfg.hop
    if len(stream.samples) < n:
        raise PMUError("stream shorter than one analysis window")
    pmu = PMU(cfg)
    frames = []
    count = (len(stream.samples) - n) // hop + 1
    for m in range(count):
        s = m * hop
        fr = pmu.process(stream.samples[s:s + n], stream.t0 + s / cfg.sample_rate)
        frames.append(replace(fr, timestamp=frame_time(stream.t0, m, cfg)))
    return frames


def true_phasor(traj: FrequencyTrajectory, t, amplitude=1.0, phase0=0.0, f0=F_NOMINAL):
    t = np.asarray(t, dtype=float)
    ang = 2 * np.pi * (traj.phase_cycles(t) - f0 * t) + phase0
    return amplitude * np.exp(1j * ang)


def score_frames(frames: list[Frame], traj: FrequencyTrajectory, amplitude: float = 1.0,
                 phase0: float = 0.0, t_lo: float = -np.inf, t_hi: float = np.inf) -> ErrorReport:
    sel = [f for f in frames if f.usable and t_lo <= f.timestamp <= t_hi]
    if not sel:
        raise PMUError("no frames to score")
    ts = np.array([f.timestamp for f in sel])
    freq = np.array([f.frequency for f in sel])
    rf = np.array([f.rocof for f in sel])
    est = np.array([f.magnitude * np.exp(1j * f.phase) for f in sel])
    ref = true_phasor(traj, ts, amplitude, phase0)
    fe = np.abs(freq - traj.frequency(ts))
    rfe = np.abs(rf - traj.rocof(ts))
    tve = np.abs(est - ref) / np.abs(ref)
    return ErrorReport(
        max_fe=float(fe.max()),
        max_rfe=float(rfe.max()),
        rocof_std=float(np.std(rf, ddof=1)) if rf.size > 1 else 0.0,
        max_tve=float(tve.max()),
        rocof_mean=float(rf.mean()),
        n_frames=int(rf.size),
    )


def compliance_ramp_test(cfg: EstimatorConfig = EstimatorConfig()) -> ErrorReport:
    """Frequency ramp 45 -> 55 Hz at 1 Hz/s; edges of the ramp are excluded."""
    stream, traj = ramp_test_signal(cfg.sample_rate)
    frames = run_pmu(stream, cfg)
    guard = 2 * cfg.window_len / cfg.sample_rate
    return score_frames(frames, traj, t_lo=traj.times[0] + guard, t_hi=traj.times[-1] - guard)


def compliance_static_test(cfg: EstimatorConfig = EstimatorConfig(), freq: float = F_NOMINAL,
                           duration: float = 2.0) -> ErrorReport:
    traj = FrequencyTrajectory.constant(freq)
    stream = synthesize(traj, duration=duration, sample_rate=cfg.sample_rate)
    return score_frames(run_pmu(stream, cfg), traj)


def write_frames_csv(frames, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["timestamp_s", "mag_pu", "phase_rad", "freq_hz", "rocof_hzps", "valid"])
        for f in frames:
            w.writerow([f"{f.timestamp:.12g}", f"{f.magnitude:.12g}", f"{f.phase:.12g}",
                        f"{f.frequency:.12g}", f"{f.rocof:.12g}", int(f.usable)])
