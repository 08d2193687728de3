"""SDR-style AM receive chain: complex mixing, polyphase decimation, channel
filtering, envelope detection, DC removal and optional AGC, plus a rational
resampler for the audio leg.

All filtering is linear-phase FIR with the group delay removed, so output
sample k of a stage is aligned with input time k * down / up.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from fractions import Fraction

import numpy as np
from scipy.signal import detrend, firwin, kaiserord, upfirdn

from picotx import kernels
from picotx.signal_core import RateError, SignalBuffer

STOPBAND_DB = 60.0
DC_CORNER_HZ = 20.0
AGC_TIMES = {"slow": (0.2, 2.0), "medium": (0.05, 0.5)}  # attack, release in seconds
AGC_TARGET = 0.5


@dataclass(frozen=True)
class TunerConfig:
    center_frequency: float
    bandwidth: float = 3000.0
    agc: str = "off"

    def __post_init__(self):
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")
        if self.agc not in ("off", "slow", "medium"):
            raise ValueError(f"agc must be off, slow or medium, got {self.agc!r}")

    def check(self, rf_rate: float) -> None:
        if not 0 < self.center_frequency < rf_rate / 2:
            raise RateError(
                f"center frequency {self.center_frequency} Hz is outside (0, {rf_rate / 2}) Hz"
            )
        if (self.center_frequency - self.bandwidth / 2 < 0
                or self.center_frequency + self.bandwidth / 2 > rf_rate / 2):
            raise RateError(
                f"tuned band {self.center_frequency} +/- {self.bandwidth / 2} Hz leaves (0, {rf_rate / 2}) Hz"
            )


def design_lowpass(passband: float, stopband: float, fs: float,
                   attenuation: float = STOPBAND_DB) -> np.ndarray:
    """Kaiser-windowed sinc with odd length (integer group delay)."""
    if not 0 < passband < stopband <= fs / 2:
        raise ValueError(f"bad lowpass edges {passband}, {stopband} at fs={fs}")
    numtaps, beta = kaiserord(attenuation, (stopband - passband) / (fs / 2))
    numtaps |= 1
    return firwin(numtaps, (passband + stopband) / 2, window=("kaiser", beta), fs=fs)


class RateStage:
    """Streaming centred FIR rate changer (up/down), zero history before sample 0.

    Feeding a signal in any chunking and then calling :meth:`flush` gives the
    same output as one call on the whole signal; the output length is
    ``ceil(n * up / down)``.
    """

    def __init__(self, taps: np.ndarray, up: int = 1, down: int = 1, dtype=np.float64):
        taps = np.asarray(taps, dtype=np.float64)
        if taps.size % 2 == 0:
            raise ValueError("tap count must be odd")
        self.up, self.down = int(up), int(down)
        self.half = (taps.size - 1) // 2
        pad = (-self.half) % self.down
        self._g = np.concatenate([np.zeros(pad), taps * self.up])
        self._offset = (self.half + pad) // self.down
        self._dtype = dtype
        self._buf = np.zeros(0, dtype=dtype)
        self._base = 0  # absolute index of _buf[0]
        self._total = 0
        self._next = 0

    def _first_input(self, k: int) -> int:
        return -((self.half - k * self.down) // self.up)  # ceil((k*down - half) / up)

    def _emit(self, k1: int) -> np.ndarray:
        k0 = self._next
        if k1 < k0:
            return np.zeros(0, dtype=self._dtype)
        s = (self._first_input(k0) // self.down) * self.down
        m_hi = (k1 * self.down + self.half) // self.up
        lo = max(s, self._base)
        hi = min(m_hi + 1, self._base + self._buf.size)
        xw = np.zeros(m_hi + 1 - s, dtype=self._dtype)
        if hi > lo:
            xw[lo - s:hi - s] = self._buf[lo - self._base:hi - self._base]
        y = upfirdn(self._g, xw, self.up, self.down)
        j0 = k0 - s * self.up // self.down + self._offset
        out = y[j0:j0 + (k1 - k0 + 1)]
        self._next = k1 + 1
        keep_from = (self._first_input(self._next) // self.down) * self.down
        if keep_from > self._base:
            drop = min(keep_from - self._base, self._buf.size)
            self._buf = self._buf[drop:]
            self._base += drop
        return out

    def process(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=self._dtype)
        self._buf = np.concatenate([self._buf, x])
        self._total += x.size
        k_max = (self._total * self.up - 1 - self.half) // self.down
        return self._emit(k_max)

    def flush(self) -> np.ndarray:
        n_out = -(-self._total * self.up // self.down)
        return self._emit(n_out - 1)


def _rate_ratio(in_rate: int, out_rate: int) -> tuple[int, int]:
    r = Fraction(int(out_rate), int(in_rate))
    return r.numerator, r.denominator


class AmDemodulator:
    """Chunked AM receiver: ``process`` RF chunks, then ``flush`` the tail.

    Output lags input by the filter half-lengths while streaming; the
    concatenated output is independent of chunking.
    """

    def __init__(self, rf_rate: int, cfg: TunerConfig, audio_rate: int = 48_000):
        cfg.check(rf_rate)
        self.rf_rate, self.cfg, self.audio_rate = int(rf_rate), cfg, int(audio_rate)
        up, down = _rate_ratio(rf_rate, audio_rate)
        fs_up = rf_rate * up
        pb = min(cfg.bandwidth / 2, 0.45 * audio_rate)
        sb = min(audio_rate - pb, rf_rate - pb, fs_up / 2)
        self._decimator = RateStage(design_lowpass(pb, sb, fs_up), up, down, np.complex128)
        cutoff = cfg.bandwidth / 2
        self._channel = None
        if cutoff * 1.05 < 0.45 * audio_rate:
            width = 0.1 * cutoff
            self._channel = RateStage(
                design_lowpass(cutoff - width / 2, cutoff + width / 2, audio_rate),
                dtype=np.complex128)
        self._n_in = 0
        self._lo_step = cfg.center_frequency / rf_rate
        self._dc_r = math.exp(-2 * math.pi * DC_CORNER_HZ / audio_rate)
        self._dc_state = None
        if cfg.agc != "off":
            attack, release = AGC_TIMES[cfg.agc]
            self._agc = (-math.expm1(-1 / (audio_rate * attack)),
                         -math.expm1(-1 / (audio_rate * release)))
        else:
            self._agc = None
        self._agc_level = 0.0

    def _mix(self, x: np.ndarray) -> np.ndarray:
        idx = np.arange(self._n_in, self._n_in + x.size, dtype=np.float64)
        self._n_in += x.size
        cycles = np.mod(idx * self._lo_step, 1.0)
        return x * np.exp(-2j * np.pi * cycles)

    def _detect(self, z: np.ndarray) -> np.ndarray:
        env = 2.0 * np.abs(z)
        if env.size == 0:
            return env
        if self._dc_state is None:
            self._dc_state = (float(env[0]), 0.0)
        audio, xp, yp = kernels.dc_block(np.ascontiguousarray(env), self._dc_r, *self._dc_state)
        self._dc_state = (xp, yp)
        if self._agc is not None:
            audio, self._agc_level = kernels.agc(audio, self._agc[0], self._agc[1],
                                                 AGC_TARGET, 1e-6, self._agc_level)
        return audio

    def process(self, rf) -> np.ndarray:
        rf = np.asarray(rf, dtype=np.float64)
        z = self._decimator.process(self._mix(rf))
        if self._channel is not None:
            z = self._channel.process(z)
        return self._detect(z)

    def flush(self) -> np.ndarray:
        z = self._decimator.flush()
        if self._channel is not None:
            z = np.concatenate([self._channel.process(z), self._channel.flush()])
        return self._detect(z)


def tune_am(rf: SignalBuffer, cfg: TunerConfig, audio_rate: int = 48_000) -> SignalBuffer:
    demod = AmDemodulator(rf.sample_rate, cfg, audio_rate)
    audio = np.concatenate([demod.process(rf.samples), demod.flush()])
    return SignalBuffer(audio, audio_rate)


def resample(audio: SignalBuffer, out_rate: int) -> SignalBuffer:
    """Rational-ratio polyphase resampling with a 60 dB anti-alias filter.

    Each polyphase branch is normalised to unit DC gain, and the ends are
    extended with the edge values so constant signals stay constant.
    """
    if not out_rate > 0:
        raise ValueError("out_rate must be positive")
    in_rate = audio.sample_rate
    if out_rate == in_rate:
        return SignalBuffer(audio.samples.copy(), in_rate)
    x = audio.samples
    n_out = -(-x.size * int(out_rate) // in_rate)
    if x.size == 0:
        return SignalBuffer(np.zeros(0), out_rate)
    up, down = _rate_ratio(in_rate, out_rate)
    low = min(in_rate, out_rate)
    taps = design_lowpass(0.45 * low, 0.5 * low, in_rate * up)
    for r in range(up):
        taps[r::up] *= (1.0 / up) / taps[r::up].sum()
    stage = RateStage(taps, up, down)
    ext = (stage.half // up + 1)
    ext = -(-ext // down) * down  # keep output alignment integral
    padded = np.concatenate([np.full(ext, x[0]), x, np.full(ext, x[-1])])
    y = np.concatenate([stage.process(padded), stage.flush()])
    skip = ext * up // down
    return SignalBuffer(y[skip:skip + n_out], out_rate)


def retune(cfg: TunerConfig, center: float) -> TunerConfig:
    return replace(cfg, center_frequency=center)


def harmonic_retune_check(rf: SignalBuffer, base: float, multiple: int, cfg: TunerConfig,
                          audio_rate: int = 48_000) -> float:
    """Correlation between the audio recovered at ``base`` and at ``multiple * base``."""
    a = tune_am(rf, retune(cfg, base), audio_rate).samples
    if multiple == 1:
        return 1.0
    b = tune_am(rf, retune(cfg, multiple * base), audio_rate).samples
    if np.std(a) == 0 or np.std(b) == 0:
        return 0.0
    return float(np.corrcoef(a, b)[0, 1])


def retune_energy_ratio(rf: SignalBuffer, base: float, multiple: int, cfg: TunerConfig,
                        audio_rate: int = 48_000) -> float:
    """Audio energy recovered at ``multiple * base`` relative to ``base``."""
    a = tune_am(rf, retune(cfg, base), audio_rate).samples
    b = tune_am(rf, retune(cfg, multiple * base), audio_rate).samples
    return float(np.sum(b ** 2) / np.sum(a ** 2))


def spectrogram_ridge(audio: SignalBuffer, frame: float, hop: float | None = None,
                      fmin: float = 0.0, fmax: float | None = None,
                      resolution: float = 0.5) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Peak frequency per frame of a zero-padded, linearly detrended spectrogram.

    Detrending keeps slow DC-removal transients from pulling low peaks down.
    Returns frame centre times, peak frequencies and frame mean-square values.
    """
    hop = hop or frame
    fs = audio.sample_rate
    x = audio.samples
    n = int(round(frame * fs))
    step = int(round(hop * fs))
    nfft = max(1 << math.ceil(math.log2(fs / resolution)), n)
    freqs = np.fft.rfftfreq(nfft, 1 / fs)
    idx = np.flatnonzero((freqs >= fmin) & (freqs <= (fs / 2 if fmax is None else fmax)))
    times, peaks, energy = [], [], []
    for s in range(0, x.size - n + 1, step):
        seg = detrend(x[s:s + n], type="linear")
        mags = np.abs(np.fft.rfft(seg, nfft))[idx]
        k = int(np.argmax(mags))
        off = 0.0
        if 0 < k < mags.size - 1:
            a, b, c = mags[k - 1], mags[k], mags[k + 1]
            if a - 2 * b + c < 0:
                off = 0.5 * (a - c) / (a - 2 * b + c)
        times.append((s + n / 2) / fs)
        peaks.append(freqs[idx[k]] + off * fs / nfft)
        energy.append(float(np.mean(x[s:s + n] ** 2)))
    return np.array(times), np.array(peaks), np.array(energy)
