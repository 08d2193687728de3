"""Sampled-signal primitives: rectangular PWM synthesis, square-wave Fourier
series, amplitude spectra, and buffer file I/O."""
from __future__ import annotations

import csv
import math
import wave
from dataclasses import dataclass
from pathlib import Path

import numpy as np

# Tolerance used to snap sample phases onto exact period boundaries.
_PHASE_EPS = 1e-9


class RateError(ValueError):
    """A sample rate cannot represent the requested frequency content."""


@dataclass(frozen=True)
class SignalBuffer:
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        if self.sample_rate <= 0 or int(self.sample_rate) != self.sample_rate:
            raise ValueError(f"sample_rate must be a positive integer, got {self.sample_rate!r}")
        arr = np.array(self.samples, dtype=np.float64)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self):
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.samples.size) / self.sample_rate

    def scaled(self, factor: float) -> "SignalBuffer":
        return SignalBuffer(self.samples * factor, self.sample_rate)


@dataclass(frozen=True)
class PwmConfig:
    """One rectangular generator. ``duty`` is the high fraction of each period
    (a 16-bit register value ``duty_u16`` maps to ``duty_u16 / 65536``)."""

    frequency: float
    duty: float = 0.5
    low_level: float = -1.0
    high_level: float = 1.0
    phase: float = 0.0

    def __post_init__(self):
        if not self.frequency > 0:
            raise ValueError(f"frequency must be positive, got {self.frequency!r}")
        if not 0.0 <= self.duty <= 1.0:
            raise ValueError(f"duty must lie in [0, 1], got {self.duty!r}")
        if not 0.0 <= self.phase < 1.0:
            raise ValueError(f"phase must lie in [0, 1), got {self.phase!r}")
        if not self.low_level < self.high_level and self.duty not in (0.0, 1.0):
            raise ValueError("low_level must be below high_level")

    @classmethod
    def from_u16(cls, frequency: float, duty_u16: int, **kw) -> "PwmConfig":
        return cls(frequency, min(duty_u16, 65536) / 65536, **kw)


def pwm_samples(config: PwmConfig, start: int, count: int, sample_rate: float) -> np.ndarray:
    """Samples ``start .. start+count-1`` of the rectangular wave.

    A sample at time t is high iff frac(t*freq + phase) < duty; an instant that
    lands on a period boundary (within rounding) counts as that boundary.
    """
    if config.duty >= 1.0:
        return np.full(count, config.high_level, dtype=np.float64)
    if config.duty <= 0.0:
        return np.full(count, config.low_level, dtype=np.float64)
    idx = np.arange(start, start + count, dtype=np.float64)
    pos = idx * config.frequency / sample_rate + config.phase
    nearest = np.round(pos)
    pos = np.where(np.abs(pos - nearest) < _PHASE_EPS, nearest, pos)
    frac = pos - np.floor(pos)
    high = frac < config.duty - _PHASE_EPS
    return np.where(high, config.high_level, config.low_level).astype(np.float64)


def generate_pwm(config: PwmConfig, duration: float, sample_rate: int) -> SignalBuffer:
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration!r}")
    if sample_rate < 2 * config.frequency:
        raise RateError(
            f"sample rate {sample_rate} Hz is below twice the PWM frequency {config.frequency} Hz"
        )
    n = int(round(duration * sample_rate))
    return SignalBuffer(pwm_samples(config, 0, n, sample_rate), sample_rate)


def rect_fourier_coefficient(n: int) -> float:
    """Sine coefficient b_n of the 50%-duty +/-1 square wave: 4/(n*pi) for odd n, 0 for even n."""
    if int(n) != n or n < 1:
        raise ValueError(f"harmonic index must be a positive integer, got {n!r}")
    return 0.0 if n % 2 == 0 else 4.0 / (n * math.pi)


def synthesize_partial_sum(freq: float, k_max: int, duration: float, sample_rate: int) -> SignalBuffer:
    """Truncated odd-harmonic series of the +/-1 square wave through term ``k_max``."""
    if k_max < 0:
        raise ValueError("k_max must be non-negative")
    top = (2 * k_max + 1) * freq
    if top >= sample_rate / 2:
        raise RateError(f"harmonic at {top} Hz is not below Nyquist ({sample_rate / 2} Hz)")
    n = int(round(duration * sample_rate))
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for k in range(k_max + 1):
        m = 2 * k + 1
        out += rect_fourier_coefficient(m) * np.sin(2 * np.pi * m * freq * t)
    return SignalBuffer(out, sample_rate)


@dataclass(frozen=True)
class Spectrum:
    """Single-sided amplitude spectrum; a unit sine on a bin reads 1.0."""

    bin_magnitudes: np.ndarray
    bin_width: float
    window: str = "rect"
    fft_length: int = 0
    sample_rate: int = 0

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(self.bin_magnitudes.size) * self.bin_width

    @property
    def nyquist(self) -> float:
        return self.sample_rate / 2

    def peak_frequency(self, fmin: float = 0.0, fmax: float | None = None) -> float:
        freqs = self.frequencies
        mask = freqs >= fmin
        if fmax is not None:
            mask &= freqs <= fmax
        idx = np.flatnonzero(mask)
        k = idx[np.argmax(self.bin_magnitudes[idx])]
        return float(k * self.bin_width + _parabolic_offset(self.bin_magnitudes, k) * self.bin_width)

    def power(self) -> float:
        """Mean-square value implied by the amplitudes (DC and Nyquist counted once)."""
        mags = self.bin_magnitudes
        total = mags[0] ** 2 + 0.5 * np.sum(mags[1:] ** 2)
        if self.fft_length % 2 == 0 and mags.size > 1:
            total += 0.5 * mags[-1] ** 2
        return float(total)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["frequency_hz", "magnitude"])
            for f, m in zip(self.frequencies, self.bin_magnitudes):
                w.writerow([f"{f:.6f}", f"{m:.9g}"])


def _parabolic_offset(mags: np.ndarray, k: int) -> float:
    if k <= 0 or k >= mags.size - 1:
        return 0.0
    a, b, c = mags[k - 1], mags[k], mags[k + 1]
    denom = a - 2 * b + c
    if denom >= 0:  # not a local maximum
        return 0.0
    return 0.5 * (a - c) / denom


def _window(name: str, n: int) -> np.ndarray:
    if name == "rect":
        return np.ones(n)
    if name == "hann":
        return np.hanning(n + 1)[:-1]  # periodic Hann
    raise ValueError(f"unknown window {name!r}")


def analyze_spectrum(buf: SignalBuffer, fft_length: int, window: str = "rect") -> Spectrum:
    if fft_length < 2:
        raise ValueError("fft_length must be at least 2")
    if fft_length > len(buf):
        raise ValueError(f"fft_length {fft_length} exceeds buffer length {len(buf)}")
    w = _window(window, fft_length)
    spec = np.fft.rfft(buf.samples[:fft_length] * w)
    mags = np.abs(spec) / np.sum(w)
    mags[1:] *= 2
    if fft_length % 2 == 0:
        mags[-1] /= 2  # Nyquist bin has no mirror image
    return Spectrum(mags, buf.sample_rate / fft_length, window, fft_length, buf.sample_rate)


def measure_harmonic(spec: Spectrum, fundamental: float, n: int) -> float:
    """Parabolic-interpolated magnitude at the n-th harmonic of ``fundamental``."""
    target = n * fundamental
    if not 0 < target < spec.nyquist:
        raise RateError(f"harmonic {n} at {target} Hz lies outside the spectrum (Nyquist {spec.nyquist} Hz)")
    mags = spec.bin_magnitudes
    k = int(round(target / spec.bin_width))
    lo, hi = max(k - 1, 0), min(k + 1, mags.size - 1)
    k = lo + int(np.argmax(mags[lo:hi + 1]))
    if 0 < k < mags.size - 1:
        a, b, c = mags[k - 1], mags[k], mags[k + 1]
        denom = a - 2 * b + c
        if denom < 0:
            p = 0.5 * (a - c) / denom
            return float(b - 0.25 * (a - c) * p)
    return float(mags[k])


# --- file I/O --------------------------------------------------------------

_RAW_FORMATS = {
    "s16le": ("<i2", 32768.0, 0.0),
    "u8": ("u1", 128.0, 128.0),
    "u16le": ("<u2", 32768.0, 32768.0),
    "f32le": ("<f4", 1.0, 0.0),
}


def write_wav(buf: SignalBuffer, path) -> None:
    """PCM 16-bit signed mono; samples are clipped to [-1, 1)."""
    pcm = np.clip(np.round(buf.samples * 32767.0), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(buf.sample_rate)
        w.writeframes(pcm.tobytes())


def read_wav(path) -> SignalBuffer:
    with wave.open(str(path), "rb") as w:
        if w.getnchannels() != 1 or w.getsampwidth() != 2:
            raise ValueError(f"{path}: expected 16-bit mono PCM")
        rate = w.getframerate()
        data = np.frombuffer(w.readframes(w.getnframes()), dtype="<i2")
    return SignalBuffer(data / 32767.0, rate)


def decode_raw(data: bytes, sample_rate: int, fmt: str = "s16le") -> SignalBuffer:
    dtype, scale, offset = _RAW_FORMATS[fmt]
    width = np.dtype(dtype).itemsize
    if len(data) % width:
        raise ValueError(f"raw {fmt} data length {len(data)} is not a multiple of {width}")
    vals = np.frombuffer(data, dtype=dtype).astype(np.float64)
    return SignalBuffer((vals - offset) / scale, sample_rate)


def encode_raw(buf: SignalBuffer, fmt: str = "s16le") -> bytes:
    dtype, scale, offset = _RAW_FORMATS[fmt]
    if fmt == "f32le":
        return buf.samples.astype(dtype).tobytes()
    info = np.iinfo(np.dtype(dtype))
    vals = np.clip(np.round(buf.samples * scale + offset), info.min, info.max)
    return vals.astype(dtype).tobytes()


def read_raw(path, sample_rate: int, fmt: str = "s16le") -> SignalBuffer:
    return decode_raw(Path(path).read_bytes(), sample_rate, fmt)


def write_raw(buf: SignalBuffer, path, fmt: str = "s16le") -> None:
    Path(path).write_bytes(encode_raw(buf, fmt))


def read_signal(path, sample_rate: int | None = None, fmt: str = "s16le") -> SignalBuffer:
    """Read a WAV file, or a headerless file when ``sample_rate`` is given."""
    if str(path).lower().endswith(".wav"):
        return read_wav(path)
    if sample_rate is None:
        raise ValueError(f"{path}: raw input needs an explicit sample rate")
    return read_raw(path, sample_rate, fmt)


def write_signal(buf: SignalBuffer, path, fmt: str = "s16le") -> None:
    if str(path).lower().endswith(".wav"):
        write_wav(buf, path)
    else:
        write_raw(buf, path, fmt)
