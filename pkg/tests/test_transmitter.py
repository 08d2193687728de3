import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picotx.morse_codec import KeyingSchedule
from picotx.signal_core import PwmConfig, RateError, SignalBuffer, analyze_spectrum, measure_harmonic
from picotx.transmitter import (
    ModulationStream,
    TransmitterConfig,
    am_transmit,
    carrier_envelope,
    duty_per_sample,
    iter_am_transmit,
    keying_to_stream,
    sweep_stream,
    tone_stream,
)

FS = 1_000_000
TAU = 1e-3


def _envelope_oracle(stream, fs, tau, n):
    """Piecewise closed-form exponential approach; commands switch on sample grid."""
    q = 1.0 - (-math.expm1(-1.0 / (fs * tau)))
    out = np.empty(n)
    y = 0.0
    edges = np.concatenate([[0.0], np.cumsum(stream.holds)])
    k = 0
    for i, d in enumerate(stream.duties):
        # samples whose time lies in [edges[i], edges[i+1])
        k_end = min(n, int(np.searchsorted(np.arange(n) / fs, edges[i + 1], side="left")))
        if i == len(stream.duties) - 1:
            k_end = n
        m = np.arange(1, k_end - k + 1)
        out[k:k_end] = d + (y - d) * q ** m
        if k_end > k:
            y = out[k_end - 1]
        k = k_end
    return out


# --- configuration ------------------------------------------------------------

def test_default_config_is_desk_scale():
    cfg = TransmitterConfig()
    assert cfg.carrier.frequency == 125_000.0
    assert cfg.rf_sample_rate == FS


def test_config_rejects_low_rate():
    with pytest.raises(RateError):
        TransmitterConfig(PwmConfig(125e3), rf_sample_rate=200_000)


def test_config_rejects_bad_tau():
    with pytest.raises(ValueError):
        TransmitterConfig(coupling_time_constant=0)


# --- modulation streams ------------------------------------------------------------

def test_stream_validation():
    with pytest.raises(ValueError):
        ModulationStream([0.5], [0.0])
    with pytest.raises(ValueError):
        ModulationStream([1.5], [1.0])
    with pytest.raises(ValueError):
        ModulationStream([0.5, 0.5], [1.0])


def test_stream_from_pairs_and_csv():
    s = ModulationStream([(1.0, 0.25), (0.0, 0.5)])
    assert s.duration == 0.75
    assert ModulationStream.from_csv(s.to_csv()) == s
    assert s.to_csv().splitlines()[0] == "duty,hold_seconds"


def test_tone_stream_period_and_duty():
    s = tone_stream(600.0, 0.05, 0.5)
    assert s.duration == pytest.approx(0.05, abs=1e-12)
    assert s.duties[:2].tolist() == [1.0, 0.0]
    assert s.holds[0] + s.holds[1] == pytest.approx(1 / 600)
    assert s.holds[0] == pytest.approx(0.5 / 600)


def test_tone_stream_quarter_duty():
    s = tone_stream(100.0, 0.1, 0.25)
    assert s.holds[0] == pytest.approx(0.0025)
    assert s.holds[1] == pytest.approx(0.0075)


def test_sweep_stream_steps():
    s = sweep_stream()
    assert s.duration == pytest.approx(1.0, abs=1e-9)
    # first mark + space is one period of the 200 Hz tone
    assert s.holds[0] + s.holds[1] == pytest.approx(1 / 200)
    t = np.cumsum(s.holds)
    k = np.searchsorted(t, 0.99 + 1e-9)
    assert s.holds[k + 1] + s.holds[k + 2] == pytest.approx(1 / 1190, rel=1e-6)


def test_keying_to_stream_examples():
    sched = KeyingSchedule(((1, 0.05), (0, 0.05)))
    s = keying_to_stream(sched, 600.0)
    assert s.duration == pytest.approx(0.10)
    assert s.duties[-1] == 0.0
    assert s.holds[-1] >= 0.05 - 1e-12
    assert keying_to_stream(KeyingSchedule(((0, 0.1),))) == ModulationStream([0.0], [0.1])


def test_keying_to_stream_rejects_empty():
    with pytest.raises(ValueError):
        keying_to_stream(KeyingSchedule(()))


def test_duty_per_sample():
    s = ModulationStream([0.2, 0.8], [0.5, 0.5])
    assert duty_per_sample(s, 0, 4, 4).tolist() == [0.2, 0.2, 0.8, 0.8]


# --- coupling ----------------------------------------------------------------------

def test_full_duty_converges_to_carrier():
    cfg = TransmitterConfig()
    rf = am_transmit(cfg, ModulationStream([1.0], [10 * TAU]))
    carrier = np.where(((np.arange(len(rf)) * 0.125) % 1.0) < 0.5, 1.0, -1.0)
    after = np.arange(len(rf)) >= int(5 * TAU * FS)
    assert np.max(np.abs(rf.samples - carrier)[after]) <= math.exp(-5)


def test_zero_duty_is_silent():
    rf = am_transmit(TransmitterConfig(), ModulationStream([0.0], [0.01]))
    assert np.all(rf.samples == 0)


def test_envelope_matches_closed_form():
    cfg = TransmitterConfig()
    stream = ModulationStream([1.0, 0.0, 1.0, 0.3], [0.004, 0.003, 0.002, 0.005])
    env = carrier_envelope(cfg, stream).samples
    np.testing.assert_allclose(env, _envelope_oracle(stream, FS, TAU, env.size), atol=1e-9)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0, 1), b=st.floats(0, 1))
def test_envelope_monotone_in_duty(a, b):
    lo, hi = sorted((a, b))
    cfg = TransmitterConfig()
    e_lo = carrier_envelope(cfg, ModulationStream([lo], [0.005])).samples
    e_hi = carrier_envelope(cfg, ModulationStream([hi], [0.005])).samples
    assert np.all(e_hi >= e_lo - 1e-15)


def test_keyed_edges_recoverable():
    cfg = TransmitterConfig()
    sched = KeyingSchedule(((1, 0.05), (0, 0.05), (1, 0.15), (0, 0.05)))
    env = carrier_envelope(cfg, keying_to_stream(sched, 600.0)).samples
    # a 10 ms average of the keyed envelope sits near 0.5 during marks
    w = int(0.01 * FS)
    level = np.convolve(env, np.ones(w) / w, mode="same")
    mask = level > 0.25
    rises = np.flatnonzero(np.diff(mask.astype(int)) == 1) / FS
    falls = np.flatnonzero(np.diff(mask.astype(int)) == -1) / FS
    tol = 2 * TAU + 2 / 600
    assert rises == pytest.approx([0.0, 0.10], abs=tol)
    assert falls == pytest.approx([0.05, 0.25], abs=tol)


def test_tone_modulation_peak():
    cfg = TransmitterConfig()
    env = carrier_envelope(cfg, tone_stream(600.0, 0.2)).samples
    buf = SignalBuffer(env[50_000:] - env[50_000:].mean(), FS)
    spec = analyze_spectrum(buf, len(buf))
    assert spec.peak_frequency(100.0) == pytest.approx(600.0, abs=spec.bin_width)


def test_transmitted_harmonics_present():
    cfg = TransmitterConfig()
    rf = am_transmit(cfg, ModulationStream([1.0], [0.02]))
    tail = SignalBuffer(rf.samples[10_000:], FS)
    spec = analyze_spectrum(tail, len(tail))
    assert measure_harmonic(spec, 125e3, 1) > 1.0
    assert measure_harmonic(spec, 125e3, 3) > 0.1


@pytest.mark.parametrize("chunk", [1000, 4096, 77_777])
def test_chunked_equals_batch(chunk):
    cfg = TransmitterConfig()
    stream = sweep_stream(5, step_hold=0.02)
    whole = am_transmit(cfg, stream).samples
    parts = np.concatenate([c.samples for c in iter_am_transmit(cfg, stream, chunk)])
    np.testing.assert_array_equal(parts, whole)


def test_transmit_deterministic():
    cfg = TransmitterConfig()
    s = tone_stream(440.0, 0.05)
    assert np.array_equal(am_transmit(cfg, s).samples, am_transmit(cfg, s).samples)


def test_empty_stream_rejected():
    with pytest.raises(ValueError):
        am_transmit(TransmitterConfig(), ModulationStream([], []))
