"""Modulation sources: unsigned 8-bit PCM, sequencer note lists, and live
16-bit sample streams, each turned into a duty-command stream."""
from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from typing import BinaryIO, Iterable, Iterator

import numpy as np

from picotx.transmitter import ModulationStream, tone_stream

SEQUENCER_HEADER = 25
SEQUENCER_TRAILER = 2
TICK_SECONDS = 0.04
ARPEGGIO_RATE = 100.0

_NOTE_RE = re.compile(r"^([A-Ga-g])([#b]?)(-?\d+)$")
_SEMITONE = {"C": 0, "D": 2, "E": 4, "F": 5, "G": 7, "A": 9, "B": 11}
_MIDI_MIN, _MIDI_MAX = 21, 108  # A0 .. C8


class SequenceFormatError(ValueError):
    def __init__(self, index: int, record: str, reason: str):
        super().__init__(f"record {index} {record!r}: {reason}")
        self.index = index
        self.record = record


@dataclass(frozen=True)
class RawAudioConfig:
    """Unsigned 8-bit mono PCM. ``pacing`` defaults to one sample period."""

    sample_rate: int = 16000
    pacing: float | None = None

    def __post_init__(self):
        if not self.sample_rate > 0:
            raise ValueError("sample_rate must be positive")
        if self.pacing is not None and not self.pacing > 0:
            raise ValueError("pacing must be positive")

    @property
    def hold(self) -> float:
        return self.pacing if self.pacing is not None else 1.0 / self.sample_rate


def raw_pcm_to_stream(data: bytes, cfg: RawAudioConfig = RawAudioConfig()) -> ModulationStream:
    """Each byte b drives duty (b << 8) / 65536 for one pacing interval."""
    samples = np.frombuffer(bytes(data), dtype=np.uint8)
    if samples.size == 0:
        raise ValueError("raw PCM input is empty")
    duties = (samples.astype(np.int64) << 8) / 65536.0
    return ModulationStream(duties, np.full(samples.size, cfg.hold))


def live_stream(samples: Iterable[int], sample_rate: float) -> ModulationStream:
    """16-bit unsigned samples (an ADC reading) used directly as duty_u16 values."""
    if not sample_rate > 0:
        raise ValueError("sample_rate must be positive")
    v = np.asarray(list(samples) if not isinstance(samples, np.ndarray) else samples, dtype=np.int64)
    if np.any((v < 0) | (v > 65535)):
        raise ValueError("live samples must be 16-bit unsigned values")
    if v.size == 0:
        return ModulationStream([], [])
    return ModulationStream(v / 65536.0, np.full(v.size, 1.0 / sample_rate))


def iter_live_chunks(fh: BinaryIO | None = None, chunk_samples: int = 4096) -> Iterator[np.ndarray]:
    """Read little-endian u16 samples incrementally (stdin by default)."""
    fh = fh if fh is not None else sys.stdin.buffer
    pending = b""
    while True:
        block = fh.read(2 * chunk_samples)
        if not block:
            break
        block = pending + block
        cut = len(block) - len(block) % 2
        pending = block[cut:]
        if cut:
            yield np.frombuffer(block[:cut], dtype="<u2").astype(np.int64)


# --- sequencer music ---------------------------------------------------------

@dataclass(frozen=True)
class NoteEvent:
    start_tick: int
    pitch: str
    duration_ticks: int = 1
    instrument: int = 0

    def __post_init__(self):
        if self.start_tick < 0:
            raise ValueError("start_tick must be non-negative")
        if self.duration_ticks < 1:
            raise ValueError("duration_ticks must be at least 1")
        midi_number(self.pitch)

    @property
    def end_tick(self) -> int:
        return self.start_tick + self.duration_ticks


def midi_number(pitch: str) -> int:
    m = _NOTE_RE.match(pitch.strip())
    if not m:
        raise ValueError(f"unparseable pitch {pitch!r}")
    name, accidental, octave = m.groups()
    n = 12 * (int(octave) + 1) + _SEMITONE[name.upper()] + {"#": 1, "b": -1, "": 0}[accidental]
    if not _MIDI_MIN <= n <= _MIDI_MAX:
        raise ValueError(f"pitch {pitch!r} outside A0-C8")
    return n


def note_to_frequency(pitch: str) -> float:
    return 440.0 * 2.0 ** ((midi_number(pitch) - 69) / 12.0)


def strip_export(text: str, header: int = SEQUENCER_HEADER, trailer: int = SEQUENCER_TRAILER) -> str:
    """Drop the fixed-width export header and trailer around the note list."""
    return text[header:len(text) - trailer] if len(text) > header + trailer else ""


def _as_int(field: str) -> int:
    value = float(field)
    if value != int(value):
        raise ValueError(f"{field!r} is not a whole number")
    return int(value)


def parse_sequence(text: str) -> list[NoteEvent]:
    """Parse ``;``-separated ``start pitch duration instrument`` records."""
    events = []
    for i, record in enumerate(text.split(";")):
        if not record.strip():
            continue
        fields = record.split()
        if len(fields) != 4:
            raise SequenceFormatError(i, record, f"expected 4 fields, got {len(fields)}")
        try:
            events.append(NoteEvent(_as_int(fields[0]), fields[1], _as_int(fields[2]), _as_int(fields[3])))
        except ValueError as exc:
            raise SequenceFormatError(i, record, str(exc)) from None
    return events


def serialize_sequence(events: Iterable[NoteEvent]) -> str:
    return ";".join(f"{e.start_tick} {e.pitch} {e.duration_ticks} {e.instrument}" for e in events)


def sequence_to_stream(events: list[NoteEvent], tick_seconds: float = TICK_SECONDS,
                       arpeggio_rate: float = ARPEGGIO_RATE) -> ModulationStream:
    """Render one tick at a time. A chord of k notes is played as an arpeggio:
    each note sounds for 1 / (arpeggio_rate * k) seconds in turn."""
    if not tick_seconds > 0:
        raise ValueError("tick_seconds must be positive")
    if not events:
        return ModulationStream([], [])
    last = max(e.end_tick for e in events)
    parts = []
    for tick in range(last):
        active = [e for e in events if e.start_tick <= tick < e.end_tick]
        if not active:
            parts.append(ModulationStream([0.0], [tick_seconds]))
        elif len(active) == 1:
            parts.append(tone_stream(note_to_frequency(active[0].pitch), tick_seconds))
        else:
            slice_len = 1.0 / (arpeggio_rate * len(active))
            n_slices = int(np.ceil(tick_seconds / slice_len - 1e-9))
            for j in range(n_slices):
                dur = min(slice_len, tick_seconds - j * slice_len)
                if dur > 1e-12:
                    note = active[j % len(active)]
                    parts.append(tone_stream(note_to_frequency(note.pitch), dur))
    return ModulationStream.concat(parts)
