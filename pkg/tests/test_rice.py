import numpy as np
import pytest

from core import RiceError
from rice import (RICE_MAX, BitSink, BitSource, best_rice_param, decode_block, encode_block,
                  rice_decode, rice_encode, rice_length, rice_total_bits, unzigzag, zigzag)

DOMAIN = np.arange(-2 ** 15, 2 ** 15, dtype=np.int64)


def _length_by_definition(n, r):
    u = 2 * n if n >= 0 else -2 * n - 1
    z = u // (2 ** r)
    return 1 + r + z


def test_zigzag_folding():
    np.testing.assert_array_equal(zigzag(np.array([0, -1, 1, -2, 2])), [0, 1, 2, 3, 4])
    assert zigzag(-32768) == 65535
    np.testing.assert_array_equal(unzigzag(zigzag(DOMAIN)), DOMAIN)
    assert unzigzag(zigzag(-7)) == -7


def test_zigzag_matches_32bit_formula():
    n = np.array([0, 5, -5, 2 ** 30, -2 ** 30], dtype=np.int64)
    np.testing.assert_array_equal(zigzag(n), (n << 1) ^ (n >> 31))


def test_rice_length_over_16bit_domain():
    values = DOMAIN.tolist()
    for r in range(RICE_MAX + 1):
        assert all(rice_length(n, r) == _length_by_definition(n, r) for n in values)


def test_rice_length_examples():
    assert rice_length(0, 0) == 1
    assert rice_length(-1, 0) == 2
    assert rice_length(3, 2) == 1 + 2 + 1
    with pytest.raises(RiceError):
        rice_length(0, 21)


def test_total_bits_is_sum_of_lengths(rng):
    values = rng.integers(-3000, 3000, 500)
    for r in (0, 3, 9):
        assert rice_total_bits(values, r) == sum(rice_length(int(v), r) for v in values)


@pytest.mark.parametrize('r', range(RICE_MAX + 1))
def test_block_roundtrip_over_16bit_domain(r):
    # small parameters give unary runs of up to 65535 ones; keep the stream bounded
    u = zigzag(DOMAIN)
    values = DOMAIN[(u >> r) <= 64]
    sink = BitSink()
    encode_block(values, r, sink)
    assert sink.bit_count == rice_total_bits(values, r)
    source = BitSource(sink.getvalue())
    np.testing.assert_array_equal(decode_block(source, values.size, r), values)
    assert source.remaining < 8


@pytest.mark.parametrize('n, r', [(-32768, 0), (32767, 0), (-32768, 20), (12345, 7)])
def test_scalar_roundtrip_at_extremes(n, r):
    sink = BitSink()
    rice_encode(n, r, sink)
    assert sink.bit_count == rice_length(n, r)
    assert rice_decode(BitSource(sink.getvalue()), r) == n


def test_block_and_scalar_coders_agree(rng):
    values = rng.integers(-200, 200, 300)
    a, b = BitSink(), BitSink()
    encode_block(values, 4, a)
    for v in values:
        rice_encode(int(v), 4, b)
    assert a.getvalue() == b.getvalue()


def test_bit_sink_is_msb_first_and_zero_padded():
    sink = BitSink()
    sink.write(5, 3)
    sink.write(1, 1)
    assert sink.getvalue() == b'\xb0'
    source = BitSource(b'\xb0')
    assert source.read(3) == 5
    assert source.read(1) == 1
    assert source.read(4) == 0


def test_write_and_read_uints():
    sink = BitSink()
    sink.write_uints([1, 0x7fff, 0xffff], 16)
    source = BitSource(sink.getvalue())
    np.testing.assert_array_equal(source.read_uints(3, 16), [1, 0x7fff, 0xffff])


def test_best_rice_param():
    assert best_rice_param(np.zeros(10)) == (0, 10)
    values = np.full(100, 1000)
    r, bits = best_rice_param(values)
    assert bits == min(rice_total_bits(values, k) for k in range(RICE_MAX + 1))
    assert bits == rice_total_bits(values, r)
    # ties resolve to the smaller parameter
    assert best_rice_param([-1, 1])[0] == 0
    with pytest.raises(RiceError):
        best_rice_param([])


def test_truncated_source_raises():
    sink = BitSink()
    encode_block(np.array([100, 200, 300]), 2, sink)
    data = sink.getvalue()[:-3]
    with pytest.raises(RiceError):
        decode_block(BitSource(data), 3, 2)
    with pytest.raises(RiceError):
        BitSource(b'').read(1)
    with pytest.raises(RiceError):
        decode_block(BitSource(b'\xff'), 1, 0)
