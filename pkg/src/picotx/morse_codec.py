"""Morse text <-> keying schedules, and a timing/tone based CW decoder."""
from __future__ import annotations

import csv
import io
import logging
import random
from dataclasses import dataclass
from types import MappingProxyType
from typing import Mapping

import numpy as np
from scipy.ndimage import median_filter

from picotx.signal_core import RateError, SignalBuffer

log = logging.getLogger(__name__)

MORSE_TABLE: Mapping[str, str] = MappingProxyType({
    'A': '.-', 'B': '-...', 'C': '-.-.', 'D': '-..',
    'E': '.', 'F': '..-.', 'G': '--.', 'H': '....',
    'I': '..', 'J': '.---', 'K': '-.-', 'L': '.-..',
    'M': '--', 'N': '-.', 'O': '---', 'P': '.--.',
    'Q': '--.-', 'R': '.-.', 'S': '...', 'T': '-',
    'U': '..-', 'V': '...-', 'W': '.--', 'X': '-..-',
    'Y': '-.--', 'Z': '--..',
    '0': '-----', '1': '.----', '2': '..---',
    '3': '...--', '4': '....-', '5': '.....',
    '6': '-....', '7': '--...', '8': '---..',
    '9': '----.',
    '.': '.-.-.-', ',': '--..--', '?': '..--..',
    "'": '.----.', '!': '-.-.--', '/': '-..-.',
    '(': '-.--.', ')': '-.--.-', '&': '.-...',
    ':': '---...', ';': '-.-.-.', '=': '-...-',
    '+': '.-.-.', '-': '-....-', '_': '..--.-',
    '"': '.-..-.', '$': '...-..-', '@': '.--.-.',
    ' ': '/',
})

DEFAULT_DT = 0.05


class UnsupportedCharacterError(ValueError):
    def __init__(self, char: str):
        super().__init__(f"character {char!r} has no Morse code")
        self.char = char


@dataclass(frozen=True)
class KeyingSchedule:
    """Ordered (level, duration) pairs; ``dt`` is the unit they were built from."""

    entries: tuple[tuple[int, float], ...]
    dt: float = DEFAULT_DT

    def __post_init__(self):
        entries = tuple((int(lvl), float(d)) for lvl, d in self.entries)
        for lvl, d in entries:
            if lvl not in (0, 1):
                raise ValueError(f"keying level must be 0 or 1, got {lvl}")
            if not d > 0:
                raise ValueError(f"keying durations must be positive, got {d}")
        object.__setattr__(self, "entries", entries)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def __getitem__(self, i):
        return self.entries[i]

    @property
    def duration(self) -> float:
        return float(sum(d for _, d in self.entries))

    def merged(self) -> "KeyingSchedule":
        out: list[list] = []
        for lvl, d in self.entries:
            if out and out[-1][0] == lvl:
                out[-1][1] += d
            else:
                out.append([lvl, d])
        return KeyingSchedule(tuple((lvl, d) for lvl, d in out), self.dt)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["level", "duration_s"])
        for lvl, d in self.entries:
            w.writerow([lvl, repr(d)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, dt: float = DEFAULT_DT) -> "KeyingSchedule":
        rows = list(csv.reader(io.StringIO(text)))
        if rows and rows[0] and rows[0][0].strip() == "level":
            rows = rows[1:]
        return cls(tuple((int(r[0]), float(r[1])) for r in rows if r), dt)


def _codes(text: str, table: Mapping[str, str]) -> list[tuple[str, str]]:
    out = []
    for raw in text:
        ch = raw.upper()
        if ch not in table:
            raise UnsupportedCharacterError(raw)
        out.append((ch, table[ch]))
    return out


def encode_legacy(text: str, dt: float = DEFAULT_DT, table: Mapping[str, str] = MORSE_TABLE) -> KeyingSchedule:
    """Older fixed-gap scheme: every mark is followed by one unit, every
    character by two more, and a space adds six. Entries are not merged."""
    x: list[tuple[int, float]] = []
    for _, code in _codes(text, table):
        for c in code:
            if c == '-':
                x.append((1, 3 * dt))
                x.append((0, dt))
            elif c == '.':
                x.append((1, dt))
                x.append((0, dt))
            elif c == '/':
                x.append((0, 6 * dt))
        x.append((0, 2 * dt))
    return KeyingSchedule(tuple(x), dt)


def _canonical_units(text: str, table: Mapping[str, str]) -> list[tuple[str, list[tuple[int, int]]]]:
    """Per input character, the (level, units) pieces it contributes.

    Marks are separated by one unit, characters by three; a word-final
    character is followed by seven. A space directly after a character is
    absorbed by that seven-unit gap; any other space adds seven units.
    """
    codes = _codes(text, table)
    out = []
    for i, (ch, code) in enumerate(codes):
        if ch == ' ':
            prev_is_char = i > 0 and codes[i - 1][0] != ' '
            out.append((ch, [] if prev_is_char else [(0, 7)]))
            continue
        pieces: list[tuple[int, int]] = []
        for j, c in enumerate(code):
            pieces.append((1, 3 if c == '-' else 1))
            if j < len(code) - 1:
                pieces.append((0, 1))
        word_final = i == len(codes) - 1 or codes[i + 1][0] == ' '
        pieces.append((0, 7 if word_final else 3))
        out.append((ch, pieces))
    return out


def encode_canonical(text: str, dt: float = DEFAULT_DT, table: Mapping[str, str] = MORSE_TABLE) -> KeyingSchedule:
    entries = [(lvl, u * dt) for _, pieces in _canonical_units(text, table) for lvl, u in pieces]
    return KeyingSchedule(tuple(entries), dt).merged()


def character_units(text: str, encoding: str = "canonical", table: Mapping[str, str] = MORSE_TABLE) -> list[int]:
    """Duration in units contributed by each character of ``text``."""
    if encoding == "canonical":
        return [sum(u for _, u in pieces) for _, pieces in _canonical_units(text, table)]
    if encoding == "legacy":
        return [int(round(encode_legacy(ch, 1.0, table).duration)) for ch in text]
    raise ValueError(f"unknown encoding {encoding!r}")


def shuffle_table(table: Mapping[str, str] = MORSE_TABLE, seed: int = 0) -> Mapping[str, str]:
    """Deterministically permute codes among characters; the word separator stays fixed."""
    keys = sorted(k for k in table if k != ' ')
    codes = [table[k] for k in keys]
    random.Random(seed).shuffle(codes)
    out = dict(zip(keys, codes))
    if ' ' in table:
        out[' '] = table[' ']
    return MappingProxyType(out)


def _estimate_unit(marks: np.ndarray, gaps: np.ndarray) -> float:
    """Typical one-unit duration: median of the shortest duration cluster.

    Marks and inner gaps both contain one-unit elements; the cluster is
    everything within twice the shortest non-glitch duration.
    """
    durs = np.concatenate([marks, gaps])
    durs = durs[durs >= 0.3 * np.median(durs)]
    shortest = durs.min()
    return float(np.median(durs[durs <= 2.0 * shortest]))


def decode_keying(schedule, dt_hint: float | None = None, table: Mapping[str, str] = MORSE_TABLE) -> str:
    """Classify marks and gaps by duration and map code groups back to text.

    ``dt_hint=None`` estimates the unit from the schedule itself.
    """
    if not isinstance(schedule, KeyingSchedule):
        schedule = KeyingSchedule(tuple(schedule))
    entries = list(schedule.merged())
    while entries and entries[0][0] == 0:
        entries.pop(0)
    while entries and entries[-1][0] == 0:
        entries.pop()
    if not entries:
        return ""
    marks = np.array([d for lvl, d in entries if lvl == 1])
    gaps = np.array([d for lvl, d in entries if lvl == 0])
    dt = float(dt_hint) if dt_hint else _estimate_unit(marks, gaps)

    reverse = {code: ch for ch, code in table.items() if ch != ' '}
    text: list[str] = []
    group: list[str] = []

    def flush():
        if group:
            code = "".join(group)
            ch = reverse.get(code)
            if ch is None:
                log.warning("undecodable code group %r", code)
                ch = "?"
            text.append(ch)
            group.clear()

    for lvl, d in entries:
        if lvl == 1:
            group.append('.' if d < 2.0 * dt else '-')
        elif d < 1.5 * dt:
            continue
        elif d < 5.0 * dt:
            flush()
        else:
            flush()
            text.append(' ')
    flush()
    return "".join(text)


def tone_envelope(audio: SignalBuffer, tone: float, window: float) -> np.ndarray:
    """Sliding single-bin DFT magnitude at ``tone``, centred boxcar of ``window`` seconds.

    Returns the tone amplitude estimate per sample.
    """
    x = audio.samples
    n = x.size
    w = max(int(round(window * audio.sample_rate)), 1)
    ph = 2 * np.pi * tone * np.arange(n) / audio.sample_rate
    z = x * np.exp(-1j * ph)
    c = np.concatenate([[0], np.cumsum(z)])
    lo = np.clip(np.arange(n) - w // 2, 0, n)
    hi = np.clip(lo + w, 0, n)
    return 2.0 * np.abs(c[hi] - c[lo]) / w


def _keying_from_mask(mask: np.ndarray, sample_rate: int) -> KeyingSchedule:
    if mask.size == 0:
        return KeyingSchedule(())
    edges = np.flatnonzero(np.diff(mask.astype(np.int8))) + 1
    bounds = np.concatenate([[0], edges, [mask.size]])
    entries = [(int(mask[a]), (b - a) / sample_rate) for a, b in zip(bounds[:-1], bounds[1:])]
    return KeyingSchedule(tuple(entries))


def detect_keying(audio: SignalBuffer, tone: float, window: float) -> KeyingSchedule:
    env = tone_envelope(audio, tone, window)
    ref = np.percentile(env, 95) if env.size else 0.0
    if ref <= 1e-6:
        return KeyingSchedule(())
    mask = env > 0.5 * ref
    # majority vote over half a window removes threshold chatter at the edges
    k = max(int(window * audio.sample_rate / 2) | 1, 3)
    mask = median_filter(mask.astype(np.uint8), size=k, mode="nearest").astype(bool)
    return _keying_from_mask(mask, audio.sample_rate)


def decode_audio(audio: SignalBuffer, tone: float = 600.0, dt_hint: float | None = None,
                 table: Mapping[str, str] = MORSE_TABLE) -> str:
    if audio.sample_rate < 4 * tone:
        raise RateError(f"sample rate {audio.sample_rate} Hz is below four times the tone ({tone} Hz)")
    if dt_hint:
        keying = detect_keying(audio, tone, dt_hint / 4)
        return decode_keying(keying, dt_hint, table)
    # coarse pass to estimate the unit, then refine the detector window
    keying = detect_keying(audio, tone, max(8.0 / tone, 0.005))
    if not any(lvl for lvl, _ in keying):
        return ""
    entries = list(keying.merged())
    marks = np.array([d for lvl, d in entries if lvl == 1])
    inner = [d for i, (lvl, d) in enumerate(entries) if lvl == 0 and 0 < i < len(entries) - 1]
    dt = _estimate_unit(marks, np.array(inner))
    keying = detect_keying(audio, tone, dt / 4)
    return decode_keying(keying, None, table)
