"""Software model of a PWM-keyed AM transmitter (rectangular carrier and
modulator coupled through a capacitor) and an SDR-style receive chain."""
from picotx.channel import ChannelConfig, apply_channel, optimal_antenna_length
from picotx.morse_codec import (
    MORSE_TABLE,
    KeyingSchedule,
    decode_audio,
    decode_keying,
    encode_canonical,
    encode_legacy,
    shuffle_table,
)
from picotx.receiver import TunerConfig, harmonic_retune_check, resample, tune_am
from picotx.signal_core import (
    PwmConfig,
    SignalBuffer,
    Spectrum,
    analyze_spectrum,
    generate_pwm,
    measure_harmonic,
    rect_fourier_coefficient,
    synthesize_partial_sum,
)
from picotx.sources import (
    NoteEvent,
    RawAudioConfig,
    live_stream,
    note_to_frequency,
    parse_sequence,
    raw_pcm_to_stream,
    sequence_to_stream,
)
from picotx.transmitter import (
    ModulationStream,
    TransmitterConfig,
    am_transmit,
    keying_to_stream,
    sweep_stream,
)

__version__ = "0.1.0"
