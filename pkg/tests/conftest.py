import os
import sys

import numpy as np
import pytest
import scipy.signal

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))),
                                'MixCodec'))

from core import SampleBlock  # noqa: E402


def pytest_addoption(parser):
    parser.addoption('--runslow', action='store_true', default=False,
                     help='run the desk-scale corpus tests')


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: desk-scale corpus runs, need --runslow')


def pytest_collection_modifyitems(config, items):
    if config.getoption('--runslow'):
        return
    skip_slow = pytest.mark.skip(reason='need --runslow option to run')
    for item in items:
        if 'slow' in item.keywords:
            item.add_marker(skip_slow)


def correlated_block(seed, channels, length, noise=3.0, sample_rate=44100):
    """Channels share one AR(2) source with distinct gains, plus independent noise."""
    rng = np.random.default_rng(seed)
    src = rng.normal(0.0, 400.0, length)
    if length:
        src = scipy.signal.lfilter([1.0], [1.0, -1.6, 0.8], src)
    gains = np.linspace(1.0, 0.4, channels)
    x = gains[:, None] * src[None, :] + rng.normal(0.0, noise, (channels, length))
    return SampleBlock(np.clip(np.round(x), -32768, 32767).astype(np.int64), sample_rate)


def noise_block(seed, channels, length, sample_rate=44100):
    rng = np.random.default_rng(seed)
    return SampleBlock(rng.integers(-32768, 32768, size=(channels, length)), sample_rate)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
