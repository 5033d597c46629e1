import struct

import numpy as np
import pytest

from codec import (CHUNK_PREFIX, CONFIGURATIONS, HEADER_FORMAT, MIX_FORMAT, CodecConfig,
                   ContainerHeader, decode_container, decode_frame, encode_container,
                   encode_frame, inspect_stream, measure, read_chunk)
from core import (ConfigError, LayoutError, MixPair, SampleBlock, StreamError,
                  itu_downmix_5to2)
from solver import ModelKind, ModelSpec

from conftest import correlated_block, noise_block


def _spec(kind, order=8, dmx=2):
    return ModelSpec(kind, order, dmx if kind.uses_downmix else 0)


def _chunk_offset(n_mixes=1):
    return struct.calcsize(HEADER_FORMAT) + n_mixes * struct.calcsize(MIX_FORMAT)


def test_config_validation():
    with pytest.raises(ConfigError):
        CodecConfig(frame_size=0)
    with pytest.raises(ConfigError):
        CodecConfig(force_mode='fast')
    with pytest.raises(ConfigError):
        CodecConfig(rice_max=21)
    assert CodecConfig(force_mode='svd').svd


def test_silence_frame_costs_one_bit_per_sample():
    chunk = encode_frame(np.zeros((2, 512), dtype=np.int16), None, None, _spec(ModelKind.SEP))
    assert not chunk.svd_mode
    assert chunk.rice_params == [0, 0]
    assert chunk.escapes == [False, False]
    assert chunk.sections['payload'] == 2 * 504
    assert chunk.sections['warmup'] == 2 * 8 * 16


def test_noise_frame_is_stored_verbatim():
    frame = noise_block(0, 2, 4096).data
    spec = _spec(ModelKind.JOINT)
    chunk = encode_frame(frame, None, None, spec, CodecConfig(svd=True))
    assert chunk.escapes == [True, True]
    assert chunk.bit_count <= 1.05 * 16 * frame.size

    parsed = read_chunk(chunk.body, 2, 8, 4088, spec)
    np.testing.assert_array_equal(parsed.streams[0], frame[0, 8:])
    block = decode_frame(parsed, None, None, spec)
    np.testing.assert_array_equal(block.data, frame)


def test_correlated_frame_selects_svd():
    frame = correlated_block(1, 5, 2048, noise=1.0).data
    spec = _spec(ModelKind.SEP)
    auto = encode_frame(frame, None, None, spec, CodecConfig(svd=True))
    direct = encode_frame(frame, None, None, spec, CodecConfig(svd=True, force_mode='direct'))
    assert auto.svd_mode
    assert auto.bit_count < direct.bit_count


@pytest.mark.parametrize('seed', range(4))
def test_chosen_mode_is_never_worse(seed):
    frame = correlated_block(seed, 5, 1024, noise=float(10 ** seed)).data
    history = correlated_block(seed + 10, 5, 8).data
    spec = _spec(ModelKind.JOINT)
    auto = encode_frame(frame, history, None, spec, CodecConfig(svd=True))
    for mode in ('direct', 'svd'):
        forced = encode_frame(frame, history, None, spec, CodecConfig(force_mode=mode))
        assert auto.bit_count <= forced.bit_count


def test_force_svd_on_mono_falls_back_to_direct():
    frame = correlated_block(2, 1, 300).data
    chunk = encode_frame(frame, None, None, _spec(ModelKind.SEP), CodecConfig(force_mode='svd'))
    assert not chunk.svd_mode


def _content(kind, channels, n, seed):
    rng = np.random.default_rng(seed)
    if kind == 'silence':
        return SampleBlock(np.zeros((channels, n)))
    if kind == 'noise':
        return noise_block(seed, channels, n)
    if kind == 'tones':
        t = np.arange(n) / 44100.0
        freqs = rng.uniform(100, 3000, channels)
        return SampleBlock(np.round(8000 * np.sin(2 * np.pi * freqs[:, None] * t)))
    if kind == 'copies':
        one = correlated_block(seed, 1, n).data
        return SampleBlock(np.repeat(one, channels, axis=0))
    return correlated_block(seed, channels, n)


@pytest.mark.parametrize('kind', list(ModelKind))
@pytest.mark.parametrize('svd', [False, True])
@pytest.mark.parametrize('content', ['silence', 'noise', 'tones', 'copies', 'correlated'])
def test_container_roundtrip(kind, svd, content):
    up = _content(content, 5, 700, seed=len(content))
    down = itu_downmix_5to2(up)
    if kind.uses_downmix:
        mixes, models = [down, up], [_spec(ModelKind.SEP), _spec(kind)]
    else:
        mixes, models = [up], [_spec(kind)]
    stream = encode_container(mixes, models, CodecConfig(frame_size=256, svd=svd))
    decoded = decode_container(stream.to_bytes())
    assert decoded == mixes


@pytest.mark.parametrize('n', [0, 1, 7, 8, 9, 255, 256, 257])
def test_roundtrip_lengths_around_frame_edges(n):
    block = correlated_block(n, 2, n)
    stream = encode_container([block], [_spec(ModelKind.JOINT)], CodecConfig(frame_size=256))
    assert decode_container(stream) == [block]


def test_randomized_roundtrips():
    rng = np.random.default_rng(2024)
    for i in range(24):
        channels = int(rng.choice([2, 5]))
        n = int(rng.integers(0, 1200))
        kind = ModelKind(int(rng.integers(0, 4)))
        up = correlated_block(i, 5, n) if kind.uses_downmix else correlated_block(i, channels, n)
        config = CodecConfig(frame_size=int(rng.integers(8, 600)), svd=bool(rng.integers(0, 2)))
        if kind.uses_downmix:
            mixes = [itu_downmix_5to2(up), up]
            models = [_spec(ModelKind.SEP), _spec(kind)]
        else:
            mixes, models = [up], [_spec(kind)]
        assert decode_container(encode_container(mixes, models, config).to_bytes()) == mixes


def _downmix_for(up):
    if up.channels == 5:
        return itu_downmix_5to2(up)
    return SampleBlock(np.round(up.data.mean(axis=0, keepdims=True)), up.sample_rate)


@pytest.mark.slow
def test_randomized_roundtrips_at_scale():
    rng = np.random.default_rng(20000)
    contents = ['silence', 'noise', 'tones', 'correlated', 'copies']
    kinds = list(ModelKind)
    for i in range(1000):
        # every layout x model x svd x content combination recurs every 80 cases
        channels = (2, 5)[i % 2]
        kind = kinds[(i // 2) % 4]
        svd = bool((i // 8) % 2)
        content = contents[(i // 16) % 5]
        n = int(rng.integers(0, 20001))
        up = _content(content, channels, n, seed=i)
        if kind.uses_downmix:
            down = _downmix_for(up)
            mixes = [down, up]
            models = [_spec(ModelKind.SEP), _spec(kind, dmx=down.channels)]
        else:
            mixes, models = [up], [_spec(kind)]
        config = CodecConfig(svd=svd)
        decoded = decode_container(encode_container(mixes, models, config).to_bytes())
        assert decoded == mixes, (i, content, channels, kind.name, svd, n)


def test_hierarchical_stream_from_mix_pair():
    up = correlated_block(5, 5, 600)
    pair = MixPair(itu_downmix_5to2(up), up)
    models = [_spec(ModelKind.SEP), _spec(ModelKind.JOINT_DMX)]
    stream = encode_container(pair, models, CodecConfig(frame_size=200, svd=True))
    assert len(stream.chunks) == 3
    assert [len(frame) for frame in stream.chunks] == [2, 2, 2]
    assert decode_container(stream) == pair.mixes
    assert stream.total_bits == 8 * len(stream.to_bytes())


def test_three_level_hierarchy():
    up = correlated_block(6, 5, 400)
    stereo = itu_downmix_5to2(up)
    mono = SampleBlock(np.round(stereo.data.mean(axis=0, keepdims=True)))
    models = [_spec(ModelKind.SEP), _spec(ModelKind.SEP_DMX, dmx=1), _spec(ModelKind.JOINT_DMX)]
    stream = encode_container([mono, stereo, up], models, CodecConfig(frame_size=128, svd=True))
    assert decode_container(stream.to_bytes()) == [mono, stereo, up]


def test_empty_input_gives_header_only_stream():
    empty = SampleBlock.empty(5)
    stream = encode_container([empty], [_spec(ModelKind.JOINT)])
    data = stream.to_bytes()
    assert len(data) == _chunk_offset()
    decoded = decode_container(data)
    assert decoded[0].channels == 5 and decoded[0].length == 0
    assert inspect_stream(data) == []


def test_container_rejects_bad_hierarchies():
    up = correlated_block(0, 5, 100)
    with pytest.raises(ConfigError):
        encode_container([up], [_spec(ModelKind.JOINT_DMX)])
    with pytest.raises(ConfigError):
        encode_container([itu_downmix_5to2(up), up],
                         [_spec(ModelKind.SEP), _spec(ModelKind.JOINT_DMX, dmx=3)])
    with pytest.raises(LayoutError):
        encode_container([correlated_block(0, 2, 99), up],
                         [_spec(ModelKind.SEP), _spec(ModelKind.JOINT_DMX)])
    with pytest.raises(ConfigError):
        encode_container([up], [_spec(ModelKind.SEP)], CodecConfig(frame_size=4))
    with pytest.raises(LayoutError):
        encode_container([SampleBlock(np.zeros((3, 10)))], [_spec(ModelKind.SEP)])


def _mono_stream(n=300):
    block = correlated_block(9, 1, n)
    return block, bytearray(encode_container([block], [_spec(ModelKind.SEP)],
                                             CodecConfig(frame_size=128)).to_bytes())


def test_header_corruption_is_detected():
    _, data = _mono_stream()
    with pytest.raises(StreamError, match='magic'):
        decode_container(b'XXXX' + bytes(data[4:]))
    bad_version = bytearray(data)
    bad_version[4] = 9
    with pytest.raises(StreamError, match='version'):
        decode_container(bytes(bad_version))
    with pytest.raises(StreamError):
        decode_container(bytes(data[:10]))


def test_corrupt_sample_count_is_rejected_before_allocation():
    _, data = _mono_stream()
    # total_samples is the u64 after magic, version, depth, rate and frame size
    at = struct.calcsize('<4sBBII')
    huge = bytearray(data)
    struct.pack_into('<Q', huge, at, 2 ** 40)
    with pytest.raises(StreamError, match='truncated stream'):
        decode_container(bytes(huge))
    more = bytearray(data)
    struct.pack_into('<Q', more, at, 300 + 128 * 40)
    with pytest.raises(StreamError):
        decode_container(bytes(more))


def test_flipped_mode_bit_is_detected():
    _, data = _mono_stream()
    first_body = _chunk_offset() + struct.calcsize(CHUNK_PREFIX)
    data[first_body] ^= 0x80
    with pytest.raises(StreamError) as info:
        decode_container(bytes(data))
    assert info.value.frame_index == 0 and info.value.mix_index == 0


def test_rice_parameter_above_limit_is_detected():
    _, data = _mono_stream()
    start = _chunk_offset() + struct.calcsize(CHUNK_PREFIX)
    (size,) = struct.unpack_from(CHUNK_PREFIX, data, _chunk_offset())
    bits = np.unpackbits(np.frombuffer(bytes(data[start:start + size]), dtype=np.uint8))
    # flags (2) + warm-up (8 x 16) + coefficients (8 x 16), then the Rice parameter
    bits[258:263] = 1
    data[start:start + size] = np.packbits(bits).tobytes()
    with pytest.raises(StreamError, match='Rice parameter'):
        decode_container(bytes(data))


def test_length_prefix_and_truncation_are_detected():
    _, data = _mono_stream()
    prefix_at = _chunk_offset()
    (size,) = struct.unpack_from(CHUNK_PREFIX, data, prefix_at)

    longer = bytearray(data)
    struct.pack_into(CHUNK_PREFIX, longer, prefix_at, size + 1)
    with pytest.raises(StreamError):
        decode_container(bytes(longer))

    shorter = bytearray(data)
    struct.pack_into(CHUNK_PREFIX, shorter, prefix_at, size - 1)
    with pytest.raises(StreamError):
        decode_container(bytes(shorter))

    with pytest.raises(StreamError) as info:
        decode_container(bytes(data[:-5]))
    assert info.value.frame_index == 2

    with pytest.raises(StreamError, match='trailing'):
        decode_container(bytes(data) + b'\x00')


def test_header_roundtrip():
    up = correlated_block(0, 5, 10)
    stream = encode_container([itu_downmix_5to2(up), up],
                              [_spec(ModelKind.SEP), _spec(ModelKind.JOINT_DMX)])
    header, used = ContainerHeader.from_bytes(stream.header.to_bytes())
    assert used == _chunk_offset(2)
    assert header.mixes[1].model == ModelSpec(ModelKind.JOINT_DMX, 8, 2, 1e-4)
    assert header.frame_count == 1


def test_side_information_arithmetic():
    up = correlated_block(3, 5, 1024)
    models = [_spec(ModelKind.SEP), _spec(ModelKind.JOINT_DMX)]
    stream = encode_container([itu_downmix_5to2(up), up], models,
                              CodecConfig(frame_size=512, force_mode='svd'))
    records = [r for r in inspect_stream(stream) if r['mix'] == 1]
    assert [r['mode'] for r in records] == ['svd', 'svd']
    flags = 1 + 5
    expected = 5 * 42 * 16 + 25 * 16 + 10 * 5 + flags
    assert all(r['side_info_bits'] == expected for r in records)
    assert records[0]['warmup_bits'] == 8 * 5 * 16
    assert records[1]['warmup_bits'] == 0
    assert expected / (4096 * 5 * 16) < 0.012


def test_measure_reports_every_configuration():
    up = correlated_block(4, 5, 2048)
    result = measure(up, frame_size=1024)
    assert [row.name for row in result.rows] == [
        'SEP', 'JOINT', 'JOINT+SVD', 'SEP_DMX+SVD', 'JOINT_DMX', 'JOINT_DMX+SVD']
    assert len(result.rows) == len(CONFIGURATIONS)
    assert all(0 < row.upmix < 1.1 and 0 < row.total < 1.1 for row in result.rows)
    assert 0 < result.downmix_ratio < 1.1


def test_silence_measures_far_below_raw():
    result = measure(SampleBlock(np.zeros((5, 8192))))
    assert all(row.upmix < 0.1 and row.total < 0.1 for row in result.rows)


def test_noise_stays_near_raw_size():
    result = measure(noise_block(1, 5, 8192))
    assert all(0.95 <= row.upmix <= 1.05 for row in result.rows)


def test_upmix_built_from_downmix_is_nearly_free():
    rng = np.random.default_rng(8)
    left, right = np.clip(rng.normal(0, 3000, (2, 8192)), -10000, 10000).round()
    down = SampleBlock(np.stack([left, right]))
    dither = rng.integers(-1, 2, size=(5, 8192))
    up = SampleBlock(np.stack([left, right, left + right, left - right, -right]) + dither)
    result = measure(up, down)
    ratios = {row.name: row.upmix for row in result.rows}
    assert ratios['JOINT_DMX'] <= 0.15
    assert ratios['SEP'] >= 0.5
