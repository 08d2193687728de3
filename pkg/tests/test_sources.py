import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picotx.receiver import TunerConfig, tune_am
from picotx.signal_core import SignalBuffer, analyze_spectrum
from picotx.sources import (
    NoteEvent,
    RawAudioConfig,
    SequenceFormatError,
    iter_live_chunks,
    live_stream,
    midi_number,
    note_to_frequency,
    parse_sequence,
    raw_pcm_to_stream,
    sequence_to_stream,
    serialize_sequence,
    strip_export,
)
from picotx.transmitter import TransmitterConfig, am_transmit


# --- raw PCM ---------------------------------------------------------------------

def test_raw_bytes_to_duty():
    s = raw_pcm_to_stream(bytes([0x00, 0x80, 0xFF]))
    assert s.duties.tolist() == [0.0, 0.5, 65280 / 65536]
    assert s.holds.tolist() == [1 / 16000] * 3


def test_raw_pacing_override():
    s = raw_pcm_to_stream(b"\x10\x20", RawAudioConfig(pacing=85e-6))
    assert s.holds.tolist() == [85e-6, 85e-6]


def test_raw_rejects_empty():
    with pytest.raises(ValueError):
        raw_pcm_to_stream(b"")


@pytest.mark.parametrize("kw", [dict(sample_rate=0), dict(pacing=0.0)])
def test_raw_config_validation(kw):
    with pytest.raises(ValueError):
        RawAudioConfig(**kw)


def test_raw_tone_survives_the_link():
    rate = 16_000
    t = np.arange(int(0.3 * rate)) / rate
    pcm = np.round(128 + 100 * np.sin(2 * np.pi * 440 * t)).astype(np.uint8).tobytes()
    audio = tune_am(am_transmit(TransmitterConfig(), raw_pcm_to_stream(pcm)), TunerConfig(125e3, 16_000))
    tail = SignalBuffer(audio.samples[4800:], audio.sample_rate)
    assert analyze_spectrum(tail, len(tail), "hann").peak_frequency(50) == pytest.approx(440, abs=3)


# --- live samples --------------------------------------------------------------------

def test_live_stream_values():
    s = live_stream([0, 32768, 65535], 8000)
    assert s.duties.tolist() == [0.0, 0.5, 65535 / 65536]
    assert s.holds.tolist() == [1 / 8000] * 3
    assert len(live_stream([], 8000)) == 0


def test_live_stream_range():
    with pytest.raises(ValueError):
        live_stream([65536], 8000)
    with pytest.raises(ValueError):
        live_stream([1], 0)


def test_live_chunks_handle_split_samples():
    data = np.arange(10, dtype="<u2").tobytes()

    class Dribble(io.RawIOBase):
        def __init__(self):
            self.pos = 0

        def read(self, n=-1):
            chunk = data[self.pos:self.pos + 3]  # odd sized reads
            self.pos += len(chunk)
            return chunk

    out = np.concatenate(list(iter_live_chunks(Dribble(), chunk_samples=2)))
    assert out.tolist() == list(range(10))


# --- notes -------------------------------------------------------------------------

@pytest.mark.parametrize("pitch,freq", [("A4", 440.0), ("C4", 261.6256), ("E5", 659.2551),
                                        ("A0", 27.5), ("C8", 4186.009), ("Bb3", 233.0819)])
def test_note_frequencies(pitch, freq):
    assert note_to_frequency(pitch) == pytest.approx(freq, abs=1e-3)


@pytest.mark.parametrize("pitch", ["G#0", "C#8", "H4", "C", ""])
def test_invalid_pitches(pitch):
    with pytest.raises(ValueError):
        midi_number(pitch)


def test_pitch_monotone_and_octaves():
    names = ["C", "C#", "D", "D#", "E", "F", "F#", "G", "G#", "A", "A#", "B"]
    freqs = [note_to_frequency(f"{n}{o}") for o in range(1, 8) for n in names]
    assert all(a < b for a, b in zip(freqs, freqs[1:]))
    assert note_to_frequency("G5") == pytest.approx(2 * note_to_frequency("G4"))


# --- sequencer text -----------------------------------------------------------------

def test_strip_export():
    body = "0 C4 1 0;1 E4 1 0"
    assert strip_export("x" * 25 + body + "']") == body
    assert strip_export("too short") == ""


def test_parse_sequence_examples():
    events = parse_sequence("0 C4 1 0;1 E4 2 0;")
    assert events == [NoteEvent(0, "C4", 1, 0), NoteEvent(1, "E4", 2, 0)]
    assert parse_sequence("") == []
    assert parse_sequence("2.0 A4 1.0 3") == [NoteEvent(2, "A4", 1, 3)]


@pytest.mark.parametrize("text,index", [("0 C4 1", 0), ("0 C4 1 0;1 X9 1 0", 1),
                                        ("0 C4 1.5 0", 0), ("0 C4 1 0;;-1 C4 1 0", 2),
                                        ("0 C4 0 0", 0)])
def test_parse_sequence_errors(text, index):
    with pytest.raises(SequenceFormatError) as exc:
        parse_sequence(text)
    assert exc.value.index == index


pitch = st.builds(lambda n, o: f"{n}{o}", st.sampled_from("CDEFGAB"), st.integers(1, 7))
event = st.builds(NoteEvent, st.integers(0, 200), pitch, st.integers(1, 16), st.integers(0, 15))


@settings(max_examples=100, deadline=None)
@given(st.lists(event, max_size=20))
def test_sequence_serialize_roundtrip(events):
    assert parse_sequence(serialize_sequence(events)) == events


# --- rendering ----------------------------------------------------------------------

def test_single_note_renders_one_tick():
    s = sequence_to_stream([NoteEvent(0, "E5", 1, 0)])
    assert s.duration == pytest.approx(0.04)
    assert s.holds[0] + s.holds[1] == pytest.approx(1 / note_to_frequency("E5"))


def test_gap_tick_is_silent():
    s = sequence_to_stream([NoteEvent(1, "A4")])
    assert s.duties[0] == 0.0
    assert s.holds[0] == pytest.approx(0.04)
    assert s.duration == pytest.approx(0.08)


def test_chord_arpeggiates():
    s = sequence_to_stream([NoteEvent(0, "A4"), NoteEvent(0, "A5")])
    assert s.duration == pytest.approx(0.04)
    t = np.concatenate([[0], np.cumsum(s.holds)])
    # 2 notes at 100 Hz arpeggio rate: 5 ms slices alternating A4, A5
    first = t[(t > 0) & (t < 0.005 - 1e-9)]
    second = t[(t > 0.005 + 1e-9) & (t < 0.01 - 1e-9)]
    assert np.diff(first[::2]) == pytest.approx(1 / 440)
    assert np.diff(second[::2]) == pytest.approx(1 / 880)


def test_empty_sequence_renders_nothing():
    assert len(sequence_to_stream([])) == 0
