"""Propagation bookkeeping: a gain, seeded white Gaussian noise, and the
half-wave antenna length rule of thumb."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from picotx.signal_core import SignalBuffer

ANTENNA_CONSTANT = 142.6  # metres * MHz


@dataclass(frozen=True)
class ChannelConfig:
    gain: float = 1.0
    noise_rms: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not self.gain > 0:
            raise ValueError("gain must be positive")
        if self.noise_rms < 0:
            raise ValueError("noise_rms must be non-negative")


def channel_noise(n: int, cfg: ChannelConfig) -> np.ndarray:
    if cfg.noise_rms == 0:
        return np.zeros(n)
    return cfg.noise_rms * np.random.default_rng(cfg.seed).standard_normal(n)


def apply_channel(rf: SignalBuffer, cfg: ChannelConfig) -> SignalBuffer:
    return SignalBuffer(cfg.gain * rf.samples + channel_noise(len(rf), cfg), rf.sample_rate)


def noise_for_snr(rf: SignalBuffer, snr_db: float, seed: int = 0, gain: float = 1.0) -> ChannelConfig:
    """Channel whose noise sits ``snr_db`` below the (scaled) signal RMS over the full band."""
    rms = gain * float(np.sqrt(np.mean(rf.samples ** 2)))
    return ChannelConfig(gain, rms * 10 ** (-snr_db / 20), seed)


def optimal_antenna_length(carrier_mhz: float) -> float:
    if not carrier_mhz > 0:
        raise ValueError("carrier frequency must be positive")
    return ANTENNA_CONSTANT / carrier_mhz
