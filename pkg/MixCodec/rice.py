"""
Golomb-Rice coding of prediction residuals and MSB-first bit I/O.

A value n is sign-folded to u = zigzag(n) and written as (u >> r) one-bits,
a terminating zero-bit, then the low r bits of u, most significant first.
Its length is 1 + r + (u >> r).
"""
import numpy as np

from core import RiceError

RICE_MAX = 20
RICE_PARAM_BITS = 5


def zigzag(n):
    """Fold signed to unsigned: 0, -1, 1, -2, 2 -> 0, 1, 2, 3, 4.

    Works on Python ints and int64 arrays alike. Within the 32-bit range this
    is exactly (n << 1) ^ (n >> 31).
    """
    if isinstance(n, np.ndarray):
        n = n.astype(np.int64)
    return (n << 1) ^ (n >> 63)


def unzigzag(u):
    if isinstance(u, np.ndarray):
        u = u.astype(np.int64)
    return (u >> 1) ^ -(u & 1)


def _check_param(r: int):
    if not 0 <= r <= RICE_MAX:
        raise RiceError(f"Rice parameter {r} outside [0, {RICE_MAX}]")


def rice_length(n: int, r: int) -> int:
    _check_param(r)
    return 1 + r + (zigzag(int(n)) >> r)


def rice_total_bits(values: np.ndarray, r: int) -> int:
    values = np.asarray(values, dtype=np.int64)
    return int(values.size * (1 + r) + (zigzag(values) >> r).sum())


def best_rice_param(values, rice_max: int = RICE_MAX):
    """Exhaustive search for the parameter with the fewest total bits.

    Ties resolve to the smaller parameter. Returns (r, total_bits).
    """
    values = np.asarray(values, dtype=np.int64)
    if values.size == 0:
        raise RiceError("cannot choose a Rice parameter for an empty sequence")
    u = zigzag(values.ravel())
    best_r, best_bits = 0, None
    for r in range(rice_max + 1):
        bits = int(u.size * (1 + r) + (u >> r).sum())
        if best_bits is None or bits < best_bits:
            best_r, best_bits = r, bits
    return best_r, best_bits


class BitSink(object):
    """Collects bits most-significant-first; ``getvalue`` pads to a byte."""

    def __init__(self):
        self.chunks = []
        self.bit_count = 0

    def write_bits(self, bits):
        bits = np.asarray(bits, dtype=np.uint8)
        self.chunks.append(bits)
        self.bit_count += bits.size

    def write(self, value: int, nbits: int):
        if nbits == 0:
            return
        shifts = np.arange(nbits - 1, -1, -1, dtype=np.uint64)
        self.write_bits((np.uint64(value) >> shifts) & np.uint64(1))

    def write_uints(self, values, nbits: int):
        values = np.asarray(values, dtype=np.uint64).ravel()
        if nbits == 0 or values.size == 0:
            return
        shifts = np.arange(nbits - 1, -1, -1, dtype=np.uint64)
        self.write_bits(((values[:, None] >> shifts) & np.uint64(1)).ravel())

    def getvalue(self) -> bytes:
        if not self.chunks:
            return b""
        return np.packbits(np.concatenate(self.chunks)).tobytes()


class BitSource(object):
    def __init__(self, data: bytes):
        self.bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
        self.pos = 0
        self._zeros = None

    @property
    def remaining(self) -> int:
        return self.bits.size - self.pos

    def _take(self, nbits: int) -> np.ndarray:
        if nbits > self.remaining:
            raise RiceError(f"bit source exhausted: need {nbits} bits, {self.remaining} left")
        out = self.bits[self.pos:self.pos + nbits]
        self.pos += nbits
        return out

    def read(self, nbits: int) -> int:
        value = 0
        for b in self._take(nbits):
            value = (value << 1) | int(b)
        return value

    def read_uints(self, count: int, nbits: int) -> np.ndarray:
        if count == 0 or nbits == 0:
            self._take(0)
            return np.zeros(count, dtype=np.uint64)
        bits = self._take(count * nbits).reshape(count, nbits).astype(np.uint64)
        weights = np.uint64(1) << np.arange(nbits - 1, -1, -1, dtype=np.uint64)
        return (bits * weights).sum(axis=1, dtype=np.uint64)

    def zero_positions(self) -> np.ndarray:
        if self._zeros is None:
            self._zeros = np.flatnonzero(self.bits == 0)
        return self._zeros


def rice_encode(n: int, r: int, sink: BitSink):
    _check_param(r)
    u = zigzag(int(n))
    q = u >> r
    sink.write_bits(np.ones(q, dtype=np.uint8))
    sink.write(0, 1)
    sink.write(u & ((1 << r) - 1), r)


def rice_decode(source: BitSource, r: int) -> int:
    _check_param(r)
    q = 0
    while source.read(1):
        q += 1
    return unzigzag((q << r) | source.read(r))


def encode_block(values, r: int, sink: BitSink):
    """Rice-code a whole sequence at once; same bits as repeated rice_encode."""
    _check_param(r)
    u = zigzag(np.asarray(values, dtype=np.int64).ravel())
    if u.size == 0:
        return
    q = u >> r
    lengths = q + 1 + r
    starts = np.cumsum(lengths) - lengths
    bits = np.zeros(int(lengths.sum()), dtype=np.uint8)
    ones = int(q.sum())
    if ones:
        run_starts = np.repeat(starts, q)
        run_offsets = np.arange(ones) - np.repeat(np.cumsum(q) - q, q)
        bits[run_starts + run_offsets] = 1
    for b in range(r):
        bits[starts + q + 1 + b] = (u >> (r - 1 - b)) & 1
    sink.write_bits(bits)


def decode_block(source: BitSource, count: int, r: int) -> np.ndarray:
    _check_param(r)
    if count == 0:
        return np.zeros(0, dtype=np.int64)
    zeros = source.zero_positions()
    total = source.bits.size
    quotients = np.empty(count, dtype=np.int64)
    rem_starts = np.empty(count, dtype=np.int64)
    pos = source.pos
    k = int(np.searchsorted(zeros, pos))
    n_zeros = zeros.size
    for i in range(count):
        while k < n_zeros and zeros[k] < pos:
            k += 1
        if k == n_zeros:
            raise RiceError("bit source exhausted inside a unary code")
        z = int(zeros[k])
        quotients[i] = z - pos
        rem_starts[i] = z + 1
        pos = z + 1 + r
        if pos > total:
            raise RiceError("bit source exhausted inside a remainder")
    source.pos = pos
    u = quotients << r
    if r:
        idx = rem_starts[:, None] + np.arange(r)
        weights = 1 << np.arange(r - 1, -1, -1, dtype=np.int64)
        u = u | (source.bits[idx].astype(np.int64) @ weights)
    return unzigzag(u)
