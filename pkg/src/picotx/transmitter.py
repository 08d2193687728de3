"""Carrier PWM, modulation command streams, and their coupling into an RF buffer.

The coupling capacitor is modelled as a first-order smoother on the duty
command; the smoothed envelope multiplies the carrier waveform.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from picotx import kernels
from picotx.signal_core import PwmConfig, RateError, SignalBuffer, pwm_samples

NOMINAL_CARRIER_HZ = 31.25e6
DESK_SCALE = 250


@dataclass(frozen=True)
class TransmitterConfig:
    carrier: PwmConfig = field(default_factory=lambda: PwmConfig(NOMINAL_CARRIER_HZ / DESK_SCALE, 0.5))
    coupling_time_constant: float = 1e-3
    rf_sample_rate: int = 1_000_000

    def __post_init__(self):
        if self.rf_sample_rate < 2 * self.carrier.frequency:
            raise RateError(
                f"RF sample rate {self.rf_sample_rate} Hz is below twice the carrier "
                f"({self.carrier.frequency} Hz)"
            )
        if not self.coupling_time_constant > 0:
            raise ValueError("coupling_time_constant must be positive")

    @property
    def smoothing_alpha(self) -> float:
        return -math.expm1(-1.0 / (self.rf_sample_rate * self.coupling_time_constant))


class ModulationStream:
    """Ordered (duty, hold) commands, stored as two parallel arrays."""

    __slots__ = ("duties", "holds")

    def __init__(self, duties, holds=None):
        if holds is None:  # a sequence of (duty, hold) pairs
            pairs = list(duties)
            duties = [p[0] for p in pairs]
            holds = [p[1] for p in pairs]
        d = np.array(duties, dtype=np.float64).reshape(-1)
        h = np.array(holds, dtype=np.float64).reshape(-1)
        if d.shape != h.shape:
            raise ValueError("duties and holds differ in length")
        if np.any(h <= 0) or not np.all(np.isfinite(h)):
            raise ValueError("all holds must be positive")
        if np.any((d < 0) | (d > 1)):
            raise ValueError("duties must lie in [0, 1]")
        d.flags.writeable = False
        h.flags.writeable = False
        self.duties = d
        self.holds = h

    def __len__(self):
        return self.duties.size

    def __iter__(self):
        return zip(self.duties.tolist(), self.holds.tolist())

    def __eq__(self, other):
        return (isinstance(other, ModulationStream)
                and np.array_equal(self.duties, other.duties)
                and np.array_equal(self.holds, other.holds))

    def __repr__(self):
        return f"ModulationStream({len(self)} commands, {self.duration:.6g} s)"

    @property
    def duration(self) -> float:
        return math.fsum(self.holds.tolist())

    def __add__(self, other: "ModulationStream") -> "ModulationStream":
        return ModulationStream(np.concatenate([self.duties, other.duties]),
                                np.concatenate([self.holds, other.holds]))

    @classmethod
    def concat(cls, streams: Iterable["ModulationStream"]) -> "ModulationStream":
        streams = list(streams)
        if not streams:
            return cls([], [])
        return cls(np.concatenate([s.duties for s in streams]),
                   np.concatenate([s.holds for s in streams]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["duty", "hold_seconds"])
        for d, h in self:
            w.writerow([repr(d), repr(h)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ModulationStream":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if rows and rows[0][0].strip() == "duty":
            rows = rows[1:]
        return cls([float(r[0]) for r in rows], [float(r[1]) for r in rows])


def tone_stream(freq: float, duration: float, duty: float = 0.5) -> ModulationStream:
    """A square modulator tone: alternating duty-1 / duty-0 holds filling ``duration``.

    Boundaries are computed from the period index, not accumulated, so long
    tones do not drift.
    """
    if not freq > 0:
        raise ValueError("tone frequency must be positive")
    if not duration > 0:
        return ModulationStream([], [])
    period = 1.0 / freq
    cycles = math.ceil(duration * freq - 1e-9)
    starts = np.arange(cycles) * period
    bounds = np.empty(2 * cycles + 1)
    bounds[0:-1:2] = starts
    bounds[1::2] = starts + duty * period
    bounds[-1] = cycles * period
    bounds = np.minimum(bounds, duration)
    bounds[-1] = duration
    levels = np.tile([1.0, 0.0], cycles)
    holds = np.diff(bounds)
    keep = holds > 1e-12
    return _merge(levels[keep], holds[keep])


def _merge(duties: np.ndarray, holds: np.ndarray) -> ModulationStream:
    if duties.size == 0:
        return ModulationStream([], [])
    starts = np.concatenate([[True], duties[1:] != duties[:-1]])
    idx = np.flatnonzero(starts)
    return ModulationStream(duties[idx], np.add.reduceat(holds, idx))


def sweep_stream(step_count: int = 100, base: float = 200.0, increment: float = 10.0,
                 step_hold: float = 0.01, tone_duty: float = 0.5) -> ModulationStream:
    if step_count < 1:
        raise ValueError("step_count must be at least 1")
    return ModulationStream.concat(
        tone_stream(base + n * increment, step_hold, tone_duty) for n in range(step_count)
    )


def keying_to_stream(schedule, tone: float = 600.0, tone_duty: float = 0.5) -> ModulationStream:
    """Mark intervals become a keyed modulator tone, spaces become duty 0."""
    entries = list(schedule)
    if not entries:
        raise ValueError("keying schedule is empty")
    if not tone > 0:
        raise ValueError("tone must be positive")
    parts = []
    for level, d in entries:
        if not d > 0:
            raise ValueError(f"keying durations must be positive, got {d}")
        parts.append(tone_stream(tone, d, tone_duty) if level else ModulationStream([0.0], [d]))
    s = ModulationStream.concat(parts)
    return _merge(np.asarray(s.duties), np.asarray(s.holds))


def duty_per_sample(mod: ModulationStream, start: int, count: int, sample_rate: int,
                    edges: np.ndarray | None = None) -> np.ndarray:
    if edges is None:
        edges = np.cumsum(mod.holds)
    t = np.arange(start, start + count) / sample_rate
    idx = np.searchsorted(edges, t, side="right")
    return mod.duties[np.minimum(idx, mod.duties.size - 1)]


def iter_am_transmit(cfg: TransmitterConfig, mod: ModulationStream,
                     chunk_size: int = 1 << 18) -> Iterator[SignalBuffer]:
    """Yield the transmitted RF in chunks; concatenated they equal :func:`am_transmit`."""
    if len(mod) == 0:
        raise ValueError("modulation stream is empty")
    fs = cfg.rf_sample_rate
    total = int(round(mod.duration * fs))
    alpha = cfg.smoothing_alpha
    env_state = 0.0
    edges = np.cumsum(mod.holds)
    for start in range(0, total, chunk_size):
        count = min(chunk_size, total - start)
        cmd = duty_per_sample(mod, start, count, fs, edges)
        env, env_state = kernels.one_pole(np.ascontiguousarray(cmd), alpha, env_state)
        yield SignalBuffer(env * pwm_samples(cfg.carrier, start, count, fs), fs)


def am_transmit(cfg: TransmitterConfig, mod: ModulationStream) -> SignalBuffer:
    chunks = [c.samples for c in iter_am_transmit(cfg, mod)]
    return SignalBuffer(np.concatenate(chunks) if chunks else np.zeros(0), cfg.rf_sample_rate)


def carrier_envelope(cfg: TransmitterConfig, mod: ModulationStream) -> SignalBuffer:
    """The smoothed duty command alone (what multiplies the carrier)."""
    fs = cfg.rf_sample_rate
    total = int(round(mod.duration * fs))
    env, _ = kernels.one_pole(np.ascontiguousarray(duty_per_sample(mod, 0, total, fs)),
                              cfg.smoothing_alpha, 0.0)
    return SignalBuffer(env, fs)
