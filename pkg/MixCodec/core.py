"""
Audio types shared by every stage of the codec: planar 16-bit sample blocks,
channel layouts, downmix/upmix pairs, the rounding convention mirrored by
encoder and decoder, the ITU 5.0 -> 2.0 downmix and the compression-ratio
metric.
"""
import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np

INT16_MIN = -32768
INT16_MAX = 32767
INT32_MIN = -(1 << 31)
INT32_MAX = (1 << 31) - 1

SAMPLE_SCALE = 32768.0
BITS_PER_SAMPLE = 16

ITU_CENTER_GAIN = 0.70710678118654752
ITU_NORM = 1.0 / (1.0 + 2.0 * ITU_CENTER_GAIN)


class CodecError(Exception):
    """Base class of every error raised by the codec."""


class ConfigError(CodecError, ValueError):
    pass


class LayoutError(CodecError, ValueError):
    pass


class RatioError(CodecError, ValueError):
    pass


class TransformError(CodecError, ValueError):
    pass


class RiceError(CodecError, ValueError):
    pass


class WavFormatError(CodecError, ValueError):
    pass


class StreamError(CodecError):
    """Corrupt or truncated container. Carries the position of the failure."""

    def __init__(self, message, frame_index=None, mix_index=None):
        self.frame_index = frame_index
        self.mix_index = mix_index
        where = []
        if mix_index is not None:
            where.append(f"mix {mix_index}")
        if frame_index is not None:
            where.append(f"frame {frame_index}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ChannelLayout(IntEnum):
    MONO = 1
    STEREO_2_0 = 2
    SURROUND_5_0 = 5

    @property
    def channels(self) -> int:
        return int(self.value)

    @property
    def channel_names(self):
        return {
            ChannelLayout.MONO: ("M",),
            ChannelLayout.STEREO_2_0: ("L", "R"),
            ChannelLayout.SURROUND_5_0: ("L", "R", "C", "Ls", "Rs"),
        }[self]

    @classmethod
    def from_channels(cls, channels: int) -> "ChannelLayout":
        try:
            return cls(channels)
        except ValueError:
            raise LayoutError(f"no layout with {channels} channels (supported: 1, 2, 5)") from None


@dataclass(frozen=True)
class SampleBlock:
    """Planar 16-bit PCM, ``data`` has shape (channels, length).

    The array is copied to int16 and made read-only on construction, so a
    block can be shared between threads and processes freely.
    """
    data: np.ndarray
    sample_rate: int = 44100

    def __post_init__(self):
        data = np.asarray(self.data)
        if data.ndim != 2 or data.shape[0] < 1:
            raise LayoutError(f"sample block must be (channels, length), got shape {data.shape}")
        if data.size and (data.min() < INT16_MIN or data.max() > INT16_MAX):
            raise LayoutError("sample values outside the 16-bit range")
        data = np.array(data, dtype=np.int16, order="C")
        data.flags.writeable = False
        object.__setattr__(self, "data", data)

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]

    @property
    def layout(self) -> ChannelLayout:
        return ChannelLayout.from_channels(self.channels)

    def section(self, start: int, end: int) -> "SampleBlock":
        return SampleBlock(self.data[:, start:end], self.sample_rate)

    def interleaved(self) -> np.ndarray:
        """(length, channels) view, the order samples take in a WAV file."""
        return np.ascontiguousarray(self.data.T)

    @classmethod
    def from_interleaved(cls, frames: np.ndarray, sample_rate: int = 44100) -> "SampleBlock":
        frames = np.asarray(frames)
        if frames.ndim == 1:
            frames = frames[:, None]
        return cls(frames.T, sample_rate)

    @classmethod
    def empty(cls, channels: int, sample_rate: int = 44100) -> "SampleBlock":
        return cls(np.zeros((channels, 0), dtype=np.int16), sample_rate)

    def __eq__(self, other):
        if not isinstance(other, SampleBlock):
            return NotImplemented
        return (self.sample_rate == other.sample_rate
                and self.data.shape == other.data.shape
                and bool(np.array_equal(self.data, other.data)))


@dataclass(frozen=True)
class MixPair:
    downmix: SampleBlock
    upmix: SampleBlock

    def __post_init__(self):
        if self.downmix.length != self.upmix.length:
            raise LayoutError(
                f"downmix has {self.downmix.length} samples, upmix has {self.upmix.length}")
        if self.downmix.sample_rate != self.upmix.sample_rate:
            raise LayoutError("downmix and upmix sample rates differ")

    @property
    def mixes(self):
        return [self.downmix, self.upmix]


def normalize(sample):
    """Map 16-bit samples to [-1, 1). Division by a power of two is exact."""
    if isinstance(sample, np.ndarray):
        return sample.astype(np.float64) / SAMPLE_SCALE
    return sample / SAMPLE_SCALE


def round_half_away(x: float) -> int:
    r = math.floor(abs(x) + 0.5)
    if x < 0:
        r = -r
    return min(max(r, INT32_MIN), INT32_MAX)


def round_half_away_array(x: np.ndarray) -> np.ndarray:
    """Elementwise :func:`round_half_away`; identical results, int64 output."""
    x = np.asarray(x, dtype=np.float64)
    mag = np.floor(np.abs(x) + 0.5)
    r = np.where(x < 0, -mag, mag)
    return np.clip(r, INT32_MIN, INT32_MAX).astype(np.int64)


def clamp16(x):
    return np.clip(x, INT16_MIN, INT16_MAX)


def itu_downmix_5to2(upmix: SampleBlock) -> SampleBlock:
    """ITU-R BS.775 stereo downmix of (L, R, C, Ls, Rs), sum-normalized so it
    can never leave the 16-bit range."""
    if upmix.channels != ChannelLayout.SURROUND_5_0.channels:
        raise LayoutError(f"ITU downmix needs a 5.0 block, got {upmix.channels} channels")
    x = upmix.data.astype(np.float64)
    left, right, center, left_s, right_s = x
    a = ITU_CENTER_GAIN
    lo = ITU_NORM * (left + a * center + a * left_s)
    ro = ITU_NORM * (right + a * center + a * right_s)
    out = round_half_away_array(clamp16(np.stack([lo, ro])))
    return SampleBlock(out, upmix.sample_rate)


def raw_bits(channels: int, length: int) -> int:
    return BITS_PER_SAMPLE * channels * length


def compression_ratio(compressed_bits: int, original: SampleBlock,
                      channels: Optional[int] = None) -> float:
    """Compressed bits over the bits of the raw 16-bit representation.

    ``channels`` overrides the channel count, used when several mixes of the
    same length are measured together (e.g. 2.0 + 5.0 -> 7 channels).
    """
    if original.length == 0:
        raise RatioError("compression ratio of an empty block is undefined")
    c = original.channels if channels is None else channels
    return compressed_bits / raw_bits(c, original.length)
