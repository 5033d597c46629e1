"""
16-bit PCM WAV reading and writing.

5.0 material uses the channel order L, R, C, Ls, Rs. 5.1 input in the usual
WAV order L, R, C, LFE, Ls, Rs loses its LFE channel on reading.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile

from core import BITS_PER_SAMPLE, ChannelLayout, SampleBlock, WavFormatError

logger = logging.getLogger(__name__)

LFE_INDEX = 3
ACCEPTED_CHANNELS = (1, 2, 5, 6)


@dataclass(frozen=True)
class WavInfo:
    channels: int
    sample_rate: int
    frames: int
    bits_per_sample: int = BITS_PER_SAMPLE

    def __post_init__(self):
        if self.bits_per_sample != BITS_PER_SAMPLE:
            raise WavFormatError(f"only 16-bit PCM is supported, got {self.bits_per_sample}-bit")
        if self.channels not in ACCEPTED_CHANNELS:
            raise WavFormatError(f"unsupported channel count {self.channels}")

    @classmethod
    def of(cls, block: SampleBlock) -> "WavInfo":
        return cls(block.channels, block.sample_rate, block.length)


def read_wav(path):
    """Returns (WavInfo, SampleBlock) with planar samples.

    The WavInfo describes the file as stored (6 channels for 5.1); the block
    is what the codec sees (5.0 after dropping the LFE).
    """
    try:
        rate, frames = wavfile.read(path)
    except ValueError as e:
        raise WavFormatError(f"{path}: {e}") from None
    if frames.dtype != np.int16:
        bits = _header_bits(path) or frames.dtype.itemsize * 8
        raise WavFormatError(f"{path}: unsupported sample format ({bits}-bit {frames.dtype})")
    if frames.ndim == 1:
        frames = frames[:, None]
    channels = frames.shape[1]
    if channels not in ACCEPTED_CHANNELS:
        raise WavFormatError(f"{path}: unsupported channel count {channels}")
    info = WavInfo(channels, int(rate), frames.shape[0])
    if channels == 6:
        logger.debug("%s: dropping LFE channel", path)
        frames = np.delete(frames, LFE_INDEX, axis=1)
    return info, SampleBlock.from_interleaved(frames, int(rate))


def _header_bits(path):
    with open(path, 'rb') as f:
        head = f.read(64)
    pos = head.find(b'fmt ')
    if pos < 0 or len(head) < pos + 24:
        return None
    return int.from_bytes(head[pos + 22:pos + 24], 'little')


def write_wav(path, block: SampleBlock, info: WavInfo = None):
    if info is None:
        info = WavInfo.of(block)
    if info.channels != block.channels or info.sample_rate != block.sample_rate:
        raise WavFormatError(
            f"block ({block.channels} ch, {block.sample_rate} Hz) does not match "
            f"({info.channels} ch, {info.sample_rate} Hz)")
    ChannelLayout.from_channels(block.channels)
    frames = block.interleaved()
    if block.channels == 1:
        frames = frames[:, 0]
    wavfile.write(path, block.sample_rate, np.ascontiguousarray(frames, dtype=np.int16))
