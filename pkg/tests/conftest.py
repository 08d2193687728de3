import numpy as np
import pytest

from picotx.morse_codec import encode_canonical
from picotx.receiver import TunerConfig, tune_am
from picotx.transmitter import TransmitterConfig, am_transmit, keying_to_stream

CARRIER = 125_000.0
RF_RATE = 1_000_000

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def tx_cfg():
    return TransmitterConfig()


@pytest.fixture(scope="session")
def morse_rf(tx_cfg):
    """Clean keyed transmission of HELLO WORLD! at the desk-scale plan."""
    schedule = encode_canonical("HELLO WORLD!", 0.05)
    return am_transmit(tx_cfg, keying_to_stream(schedule, 600.0))


@pytest.fixture(scope="session")
def morse_audio(morse_rf):
    return tune_am(morse_rf, TunerConfig(CARRIER, 3000.0), 48_000)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
