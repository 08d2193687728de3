"""Command-line experiments: sweep, Morse transmit, UDP listen/decode, audio
and sequencer playback, and harmonic spectrum reports.

Exit codes: 0 success, 1 usage or configuration error, 2 I/O error,
3 a requested decode produced no text.
"""
from __future__ import annotations

import argparse
import logging
import queue
import socket
import sys
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from picotx import channel, morse_codec, receiver, signal_core, sources, transmitter
from picotx.signal_core import PwmConfig, SignalBuffer

log = logging.getLogger("picotx")

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_EMPTY = 0, 1, 2, 3
UDP_PORT = 7355
UDP_RATE = 48_000
DECODE_RATE = 22_000
DATAGRAM_SAMPLES = 1024


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class PipelineSpec:
    """Everything one experiment needs; :meth:`validate` runs before any output."""

    tx: transmitter.TransmitterConfig
    tuner: receiver.TunerConfig
    audio_rate: int = UDP_RATE
    snr_db: float | None = None
    gain: float = 1.0
    seed: int = 0
    sinks: dict = field(default_factory=dict)
    tone: float | None = None

    def validate(self) -> None:
        self.tuner.check(self.tx.rf_sample_rate)
        top = self.tuner.center_frequency + self.tuner.bandwidth / 2
        if top > self.tx.rf_sample_rate / 2:
            raise signal_core.RateError("tuned band exceeds the RF Nyquist frequency")
        if self.audio_rate > self.tx.rf_sample_rate:
            raise signal_core.RateError("audio rate cannot exceed the RF sample rate")
        if self.tone is not None and min(self.audio_rate, DECODE_RATE) < 4 * self.tone:
            raise signal_core.RateError(f"tone {self.tone} Hz needs an audio rate of at least {4 * self.tone} Hz")
        for path in self.sinks.values():
            if path and not Path(path).parent.exists():
                raise OSError(f"output directory for {path} does not exist")

    def channel_for(self, rf: SignalBuffer) -> channel.ChannelConfig:
        if self.snr_db is None:
            return channel.ChannelConfig(self.gain, 0.0, self.seed)
        return channel.noise_for_snr(rf, self.snr_db, self.seed, self.gain)

    def run(self, mod: transmitter.ModulationStream) -> SignalBuffer:
        rf = transmitter.am_transmit(self.tx, mod)
        return channel.apply_channel(rf, self.channel_for(rf))

    def demodulate(self, rf: SignalBuffer) -> SignalBuffer:
        return receiver.tune_am(rf, self.tuner, self.audio_rate)


def _add_tx_args(p, bandwidth):
    g = p.add_argument_group("transmitter / channel / receiver")
    g.add_argument("--scale", type=float, default=transmitter.DESK_SCALE,
                   help="divide the 31.25 MHz carrier by this factor (default %(default)s)")
    g.add_argument("--carrier-hz", type=float, help="carrier frequency, overrides --scale")
    g.add_argument("--carrier-duty", type=float, default=0.5)
    g.add_argument("--rf-rate", type=int, default=1_000_000)
    g.add_argument("--tau", type=float, default=1e-3, help="coupling time constant (s)")
    g.add_argument("--snr-db", type=float, help="add white noise at this SNR")
    g.add_argument("--gain", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--bandwidth", type=float, default=bandwidth)
    g.add_argument("--agc", choices=["off", "slow", "medium"], default="off")
    g.add_argument("--audio-rate", type=int, default=UDP_RATE)


def _pipeline(args, sinks=(), tone=None) -> PipelineSpec:
    carrier_hz = args.carrier_hz or transmitter.NOMINAL_CARRIER_HZ / args.scale
    try:
        tx = transmitter.TransmitterConfig(PwmConfig(carrier_hz, args.carrier_duty), args.tau, args.rf_rate)
        tuner = receiver.TunerConfig(carrier_hz, args.bandwidth, args.agc)
        spec = PipelineSpec(tx, tuner, args.audio_rate, args.snr_db, args.gain, args.seed,
                            {s: getattr(args, s, None) for s in sinks}, tone)
        spec.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return spec


def send_udp(audio: SignalBuffer, host: str, port: int, speed: float = 10.0) -> int:
    """Send audio as headerless s16le mono datagrams at the wire rate; returns datagram count."""
    if audio.sample_rate != UDP_RATE:
        audio = receiver.resample(audio, UDP_RATE)
    payload = signal_core.encode_raw(audio, "s16le")
    step = 2 * DATAGRAM_SAMPLES
    pause = DATAGRAM_SAMPLES / UDP_RATE / speed if speed > 0 else 0.0
    count = 0
    with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as sock:
        for i in range(0, len(payload), step):
            sock.sendto(payload[i:i + step], (host, port))
            count += 1
            if pause:
                time.sleep(pause)
    return count


def _write_outputs(spec: PipelineSpec, rf: SignalBuffer, args) -> SignalBuffer | None:
    if getattr(args, "out", None):
        signal_core.write_signal(rf, args.out)
    audio = None
    if getattr(args, "demodulate", None) or getattr(args, "audio_out", None) or getattr(args, "udp", None) \
            or getattr(args, "decode", False):
        audio = spec.demodulate(rf)
    target = getattr(args, "demodulate", None) or getattr(args, "audio_out", None)
    if target:
        signal_core.write_signal(audio, target)
    return audio


# --- subcommands ---------------------------------------------------------------

def cmd_sweep(args) -> int:
    spec = _pipeline(args, ("out", "demodulate"))
    mod = transmitter.sweep_stream(args.steps, args.base, args.increment, args.step_hold, args.tone_duty)
    rf = spec.run(mod)
    _write_outputs(spec, rf, args)
    if not (args.out or args.demodulate):
        print(f"{len(rf)} RF samples at {rf.sample_rate} Hz, carrier {spec.tx.carrier.frequency:g} Hz")
    return EXIT_OK


def _parse_hostport(text: str) -> tuple[str, int]:
    host, _, port = text.rpartition(":")
    return host or "127.0.0.1", int(port)


def cmd_morse_tx(args) -> int:
    table = morse_codec.MORSE_TABLE
    if args.shuffle_seed is not None:
        table = morse_codec.shuffle_table(table, args.shuffle_seed)
    encode = morse_codec.encode_canonical if args.encoding == "canonical" else morse_codec.encode_legacy
    try:
        schedule = encode(args.text, args.dt, table)
    except morse_codec.UnsupportedCharacterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.verbose:
        print(args.text.upper())
        print(list(schedule))
    if args.schedule_csv:
        Path(args.schedule_csv).write_text(schedule.to_csv())
    spec = _pipeline(args, ("out", "audio_out"), tone=args.tone)
    if len(schedule) == 0:
        for path, rate in ((args.out, spec.tx.rf_sample_rate), (args.audio_out, spec.audio_rate)):
            if path:
                signal_core.write_signal(SignalBuffer(np.zeros(0), rate), path)
        return EXIT_OK
    one = transmitter.keying_to_stream(schedule, args.tone, args.tone_duty)
    mod = transmitter.ModulationStream.concat([one] * args.repeat)
    rf = spec.run(mod)
    if not (args.out or args.audio_out or args.udp):
        args.decode = True
    audio = _write_outputs(spec, rf, args)
    if args.udp:
        host, port = _parse_hostport(args.udp)
        n = send_udp(audio, host, port, args.udp_speed)
        log.info("sent %d datagrams to %s:%d", n, host, port)
    if args.decode:
        text = morse_codec.decode_audio(receiver.resample(audio, DECODE_RATE), args.tone, None, table)
        print(text)
        if not text:
            return EXIT_EMPTY
    return EXIT_OK


def _udp_reader(sock: socket.socket, out: queue.Queue, stop: threading.Event) -> None:
    while not stop.is_set():
        try:
            data = sock.recv(65536)
        except socket.timeout:
            continue
        except OSError:
            break
        try:
            out.put(data, timeout=1.0)
        except queue.Full:
            log.warning("decode queue full, dropping datagram")


def _decode_segment(samples: list[np.ndarray], args, table) -> str:
    pcm = np.concatenate(samples)
    audio = SignalBuffer(pcm / 32768.0, args.rate)
    if args.decode == "none":
        return ""
    return morse_codec.decode_audio(receiver.resample(audio, DECODE_RATE), args.tone, args.dt, table)


def cmd_listen(args) -> int:
    table = morse_codec.MORSE_TABLE
    if args.shuffle_seed is not None:
        table = morse_codec.shuffle_table(table, args.shuffle_seed)
    try:
        sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 8 << 20)
        sock.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot bind {args.host}:{args.port}: {exc}", file=sys.stderr)
        return EXIT_IO
    sock.settimeout(0.1)
    q: queue.Queue = queue.Queue(maxsize=4096)
    stop = threading.Event()
    reader = threading.Thread(target=_udp_reader, args=(sock, q, stop), daemon=True)
    reader.start()

    segment: list[np.ndarray] = []
    recorded: list[np.ndarray] = []
    malformed = 0
    printed = False
    last_data = time.monotonic()
    try:
        while True:
            try:
                data = q.get(timeout=0.05)
            except queue.Empty:
                idle = time.monotonic() - last_data
                if segment and idle >= args.idle:
                    text = _decode_segment(segment, args, table)
                    segment = []
                    if text:
                        sys.stdout.write(text)
                        sys.stdout.flush()
                        printed = True
                if args.timeout is not None and idle >= args.timeout:
                    break
                continue
            last_data = time.monotonic()
            if len(data) % 2:
                malformed += 1
                continue
            pcm = np.frombuffer(data, dtype="<i2").astype(np.float64)
            segment.append(pcm)
            if args.out:
                recorded.append(pcm)
    except KeyboardInterrupt:
        pass
    finally:
        stop.set()
        reader.join(timeout=1.0)
        sock.close()
    if printed:
        sys.stdout.write("\n")
    if malformed:
        print(f"skipped {malformed} malformed datagrams", file=sys.stderr)
    if args.out:
        pcm = np.concatenate(recorded) if recorded else np.zeros(0)
        signal_core.write_signal(SignalBuffer(pcm / 32768.0, args.rate), args.out)
    if args.decode == "morse" and not printed:
        return EXIT_EMPTY
    return EXIT_OK


def _detect_format(path: str, fmt: str) -> str:
    if fmt != "auto":
        return fmt
    suffix = Path(path).suffix.lower()
    return {".raw": "u8", ".u8": "u8", ".u16": "u16", ".txt": "sequence", ".seq": "sequence"}.get(suffix, "u8")


def cmd_play(args) -> int:
    spec = _pipeline(args, ("out", "demodulate"))
    fmt = _detect_format(args.file, args.format)
    if args.file == "-":
        data = sys.stdin.buffer.read()
    else:
        data = Path(args.file).read_bytes()
    if fmt == "sequence":
        text = data.decode("utf-8")
        if not args.no_strip:
            text = sources.strip_export(text)
        try:
            events = sources.parse_sequence(text)
        except sources.SequenceFormatError as exc:
            print(f"error: {args.file}: {exc}", file=sys.stderr)
            return EXIT_USAGE
        mod = sources.sequence_to_stream(events, args.tick, args.arpeggio)
    elif fmt == "u16":
        if len(data) % 2:
            print(f"error: {args.file}: odd byte count {len(data)} at offset {len(data) - 1}", file=sys.stderr)
            return EXIT_USAGE
        mod = sources.live_stream(np.frombuffer(data, dtype="<u2"), args.rate)
    else:
        if not data:
            mod = transmitter.ModulationStream([], [])
        else:
            pacing = args.pacing_us * 1e-6 if args.pacing_us else None
            mod = sources.raw_pcm_to_stream(data, sources.RawAudioConfig(args.rate, pacing))
    if len(mod) == 0:
        empty_rf = SignalBuffer(np.zeros(0), spec.tx.rf_sample_rate)
        if args.out:
            signal_core.write_signal(empty_rf, args.out)
        if args.demodulate:
            signal_core.write_signal(SignalBuffer(np.zeros(0), spec.audio_rate), args.demodulate)
        return EXIT_OK
    rf = spec.run(mod)
    _write_outputs(spec, rf, args)
    log.info("stream %.6f s, %d RF samples", mod.duration, len(rf))
    return EXIT_OK


def cmd_spectrum(args) -> int:
    rf = signal_core.read_signal(args.input, args.rate, args.raw_format)
    fft_length = args.fft_length or len(rf)
    spec = signal_core.analyze_spectrum(rf, fft_length, args.window)
    if args.csv_out:
        spec.to_csv(args.csv_out)
    print("n,measured,theoretical,rel_error")
    for n in range(1, args.harmonics + 1):
        if n * args.fundamental >= spec.nyquist:
            print(f"# harmonic {n} at {n * args.fundamental:g} Hz is above Nyquist", file=sys.stderr)
            break
        measured = signal_core.measure_harmonic(spec, args.fundamental, n) / args.amplitude
        theory = signal_core.rect_fourier_coefficient(n)
        err = abs(measured - theory) / theory if theory else float("nan")
        print(f"{n},{measured:.6f},{theory:.6f},{err:.6f}")
    return EXIT_OK


# --- argument parsing --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="picotx", description=__doc__.splitlines()[0])
    p.add_argument("-q", "--quiet", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sweep", help="transmit the 200..1190 Hz sweep")
    s.add_argument("--out", help="RF output (.wav or raw s16le)")
    s.add_argument("--demodulate", metavar="AUDIO", help="write the received audio here")
    s.add_argument("--steps", type=int, default=100)
    s.add_argument("--base", type=float, default=200.0)
    s.add_argument("--increment", type=float, default=10.0)
    s.add_argument("--step-hold", type=float, default=0.01)
    s.add_argument("--tone-duty", type=float, default=0.5)
    _add_tx_args(s, bandwidth=80e3)
    s.set_defaults(func=cmd_sweep)

    m = sub.add_parser("morse-tx", help="transmit text as keyed CW")
    m.add_argument("text")
    m.add_argument("--dt", type=float, default=morse_codec.DEFAULT_DT)
    m.add_argument("--tone", type=float, default=600.0)
    m.add_argument("--tone-duty", type=float, default=0.5)
    m.add_argument("--encoding", choices=["canonical", "legacy"], default="canonical")
    m.add_argument("--shuffle-seed", type=int)
    m.add_argument("--repeat", type=int, default=1)
    m.add_argument("--out", help="RF output file")
    m.add_argument("--audio-out", help="demodulated audio output file")
    m.add_argument("--udp", metavar="HOST:PORT", help="stream demodulated audio as UDP datagrams")
    m.add_argument("--udp-speed", type=float, default=10.0, help="send speed relative to real time (0 = unpaced)")
    m.add_argument("--decode", action="store_true", help="print the decoded text")
    m.add_argument("--schedule-csv", help="write the keying schedule as CSV")
    m.add_argument("-v", "--verbose", action="store_true")
    _add_tx_args(m, bandwidth=3000.0)
    m.set_defaults(func=cmd_morse_tx)

    li = sub.add_parser("listen", help="receive UDP audio and decode CW")
    li.add_argument("--port", type=int, default=UDP_PORT)
    li.add_argument("--host", default="127.0.0.1")
    li.add_argument("--rate", type=int, default=UDP_RATE)
    li.add_argument("--decode", choices=["morse", "none"], default="morse")
    li.add_argument("--tone", type=float, default=600.0)
    li.add_argument("--dt", type=float, help="unit duration hint (default: estimate)")
    li.add_argument("--shuffle-seed", type=int)
    li.add_argument("--idle", type=float, default=0.5, help="decode after this many idle seconds")
    li.add_argument("--timeout", type=float, help="exit after this many idle seconds")
    li.add_argument("--out", help="also record the received audio")
    li.set_defaults(func=cmd_listen)

    pl = sub.add_parser("play", help="transmit raw PCM, live u16 samples or sequencer music")
    pl.add_argument("file", help="input file, or - for standard input")
    pl.add_argument("--format", choices=["auto", "u8", "u16", "sequence"], default="auto")
    pl.add_argument("--rate", type=int, default=16000, help="PCM sample rate")
    pl.add_argument("--pacing-us", type=float, help="seconds per sample in microseconds (default 1/rate)")
    pl.add_argument("--tick", type=float, default=sources.TICK_SECONDS)
    pl.add_argument("--arpeggio", type=float, default=sources.ARPEGGIO_RATE)
    pl.add_argument("--no-strip", action="store_true", help="sequence text has no export header")
    pl.add_argument("--out", help="RF output file")
    pl.add_argument("--demodulate", metavar="AUDIO", help="write the received audio here")
    _add_tx_args(pl, bandwidth=16000.0)
    pl.set_defaults(func=cmd_play)

    sp = sub.add_parser("spectrum", help="harmonic table of an RF file against 4/(n*pi)")
    sp.add_argument("input")
    sp.add_argument("--fundamental", type=float, default=transmitter.NOMINAL_CARRIER_HZ / transmitter.DESK_SCALE)
    sp.add_argument("--harmonics", type=int, default=7)
    sp.add_argument("--amplitude", type=float, default=1.0, help="square-wave amplitude to normalise by")
    sp.add_argument("--rate", type=int, help="sample rate of a raw input")
    sp.add_argument("--raw-format", choices=["s16le", "u8", "u16le", "f32le"], default="s16le")
    sp.add_argument("--fft-length", type=int)
    sp.add_argument("--window", choices=["rect", "hann"], default="rect")
    sp.add_argument("--csv-out", help="write the full spectrum as CSV")
    sp.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
