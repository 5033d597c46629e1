import logging
import os

import numpy as np
import scipy.signal
from tqdm import tqdm

from core import (INT16_MAX, ChannelLayout, CodecError, LayoutError, MixPair, SampleBlock,
                  itu_downmix_5to2, round_half_away_array, clamp16)
from wavio import read_wav, write_wav

logger = logging.getLogger(__name__)

# Paul Kellet's economy pink filter
PINK_B = [0.049922035, -0.095993537, 0.050612699, -0.004408786]
PINK_A = [1.0, -2.494956002, 2.017265875, -0.522189400]

CORPUS_PATTERN = 'item_{:03d}.wav'


def find_wavs(root):
    """Sorted WAV paths below ``root``."""
    paths = []
    for dirpath, _, filenames in os.walk(root):
        for name in filenames:
            if name.lower().endswith('.wav'):
                paths.append(os.path.join(dirpath, name))
    return sorted(paths)


def build_mix_pair(upmix: SampleBlock, hierarchical='itu', downmix_path=None) -> MixPair:
    """Pair a 5.0 upmix with its 2.0 downmix: the ITU formula or a WAV file."""
    if upmix.layout != ChannelLayout.SURROUND_5_0:
        raise LayoutError(f"hierarchical coding needs a 5.0 upmix, got {upmix.channels} channels")
    if hierarchical == 'itu':
        return MixPair(itu_downmix_5to2(upmix), upmix)
    if hierarchical == 'file':
        if not downmix_path:
            raise CodecError("a file downmix needs a downmix WAV path")
        _, downmix = read_wav(downmix_path)
        if downmix.layout != ChannelLayout.STEREO_2_0:
            raise LayoutError(f"{downmix_path}: downmix must be 2.0, got {downmix.channels} channels")
        return MixPair(downmix, upmix)
    raise CodecError(f"unknown downmix source '{hierarchical}'")


class CorpusDataset(object):
    """5.0/5.1 WAV files of a directory; items are (path, MixPair) with ITU downmix."""

    def __init__(self, root):
        self.root = root
        self.samples = find_wavs(root)
        if not self.samples:
            raise CodecError(f"no WAV files found in {root}")

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, index):
        path = self.samples[index]
        _, upmix = read_wav(path)
        return path, build_mix_pair(upmix)


def build_dataset(args):
    dataset = CorpusDataset(args.corpus)
    logger.info("Number of corpus files = %d", len(dataset))
    return dataset


def _pink(rng, n):
    return scipy.signal.lfilter(PINK_B, PINK_A, rng.standard_normal(n))


def _tones(rng, n, sample_rate, count=3):
    t = np.arange(n) / sample_rate
    out = np.zeros(n)
    for _ in range(count):
        freq = rng.uniform(80.0, 2000.0)
        out += rng.uniform(0.2, 1.0) * np.sin(2 * np.pi * freq * t + rng.uniform(0, 2 * np.pi))
    return out / count


def synthesize_item(seed, index, duration=10.0, sample_rate=44100) -> SampleBlock:
    """One 5.0 item: panned shared sources, per-channel AR coloration, dither.

    A dominant pink source feeds every channel with gain >= 0.5, which keeps
    the pairwise channel correlation well above 0.3.
    """
    rng = np.random.default_rng([seed, index])
    n = int(round(duration * sample_rate))
    channels = ChannelLayout.SURROUND_5_0.channels
    dominant = _pink(rng, n)
    dominant /= np.std(dominant) + 1e-12
    secondary = _pink(rng, n)
    secondary /= np.std(secondary) + 1e-12
    tones = _tones(rng, n, sample_rate)
    tones /= np.std(tones) + 1e-12

    mix = np.empty((channels, n))
    for c in range(channels):
        x = (rng.uniform(0.5, 1.0) * dominant
             + rng.uniform(0.0, 0.3) * secondary
             + rng.uniform(0.0, 0.4) * tones)
        mix[c] = scipy.signal.lfilter([1.0], [1.0, -rng.uniform(0.05, 0.4)], x)

    peak = np.max(np.abs(mix)) if n else 0.0
    if peak > 0:
        mix *= 0.5 * INT16_MAX / peak
    mix += rng.normal(0.0, 2.0, size=mix.shape)
    return SampleBlock(round_half_away_array(clamp16(mix)), sample_rate)


def generate_corpus(output_dir, seed=0, count=20, duration=10.0, sample_rate=44100):
    """Write ``count`` seeded 5.0 WAVs into ``output_dir``; returns their paths."""
    os.makedirs(output_dir, exist_ok=True)
    paths = []
    for i in tqdm(range(count), desc='gen_corpus', disable=count == 0):
        path = os.path.join(output_dir, CORPUS_PATTERN.format(i))
        write_wav(path, synthesize_item(seed, i, duration, sample_rate))
        paths.append(path)
    logger.info("wrote %d files to %s", count, output_dir)
    return paths
