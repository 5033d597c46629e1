"""
Frame pipeline and container.

Every frame of every mix becomes one chunk:

    u32 little-endian body length, then the body as MSB-first bits:
      svd_mode (1) | escape flag per channel (C)
      warm-up samples, first frame only (w x C x 16)
      coefficients, binary16, canonical order (C x K x 16)
      projection matrix, svd mode only (C x C x 16)
      Rice parameter per coded stream (5 each; C direct, 2C svd)
      payload: per stream Rice codes, or 16-bit raw samples if escaped
      zero padding to the byte boundary

Chunks are interleaved by frame (mix 1 frame k, mix 2 frame k, ...) so a
decoder can reconstruct the downmix of frame k before the upmix of frame k.
"""
import logging
import math
import struct
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from core import (BITS_PER_SAMPLE, ChannelLayout, CodecError, ConfigError, LayoutError, MixPair,
                  RiceError, SampleBlock, StreamError, compression_ratio, itu_downmix_5to2)
from predictor import ResidualBlock, compute_residuals, reconstruct_frame
from rice import (RICE_MAX, RICE_PARAM_BITS, BitSink, BitSource, best_rice_param, decode_block,
                  encode_block)
from solver import ModelKind, ModelSpec, config_name, fit_frame
from transform import ProjectionMatrix, fit_projection, forward_project, inverse_project

logger = logging.getLogger(__name__)

MAGIC = b"MLC1"
VERSION = 1
FRAME_SIZE_DEFAULT = 4096
HEADER_FORMAT = "<4sBBIIQB"
MIX_FORMAT = "<BBBBBd"
CHUNK_PREFIX = "<I"
COEFF_BITS = 16

# rows of the bench report, in order
CONFIGURATIONS = [
    (ModelKind.SEP, False),
    (ModelKind.JOINT, False),
    (ModelKind.JOINT, True),
    (ModelKind.SEP_DMX, True),
    (ModelKind.JOINT_DMX, False),
    (ModelKind.JOINT_DMX, True),
]


@dataclass(frozen=True)
class CodecConfig:
    frame_size: int = FRAME_SIZE_DEFAULT
    svd: bool = False
    force_mode: Optional[str] = None
    rice_max: int = RICE_MAX

    def __post_init__(self):
        if self.frame_size < 1 or self.frame_size > 0xFFFFFFFF:
            raise ConfigError(f"frame size must be a positive 32-bit count, got {self.frame_size}")
        if self.force_mode not in (None, "direct", "svd"):
            raise ConfigError(f"force_mode must be 'direct' or 'svd', got {self.force_mode!r}")
        if self.force_mode == "svd" and not self.svd:
            object.__setattr__(self, "svd", True)
        if not 0 <= self.rice_max <= RICE_MAX:
            raise ConfigError(f"rice_max must lie in [0, {RICE_MAX}]")


@dataclass
class MixEntry:
    layout: ChannelLayout
    model: ModelSpec

    @property
    def channels(self) -> int:
        return self.layout.channels


@dataclass
class ContainerHeader:
    sample_rate: int
    frame_size: int
    total_samples: int
    mixes: List[MixEntry]
    version: int = VERSION
    bit_depth: int = BITS_PER_SAMPLE

    @property
    def frame_count(self) -> int:
        return math.ceil(self.total_samples / self.frame_size)

    def frame_bounds(self, k: int):
        start = k * self.frame_size
        return start, min(start + self.frame_size, self.total_samples)

    def to_bytes(self) -> bytes:
        out = [struct.pack(HEADER_FORMAT, MAGIC, self.version, self.bit_depth, self.sample_rate,
                           self.frame_size, self.total_samples, len(self.mixes))]
        for mix in self.mixes:
            m = mix.model
            out.append(struct.pack(MIX_FORMAT, int(mix.layout), mix.channels, int(m.kind), m.order,
                                   m.downmix_channels, m.delta))
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes):
        """Parse a header; returns (header, bytes consumed)."""
        base = struct.calcsize(HEADER_FORMAT)
        if len(data) < base:
            raise StreamError("truncated header")
        magic, version, depth, rate, frame_size, total, count = struct.unpack_from(HEADER_FORMAT, data)
        if magic != MAGIC:
            raise StreamError(f"bad magic {magic!r}")
        if version != VERSION:
            raise StreamError(f"unsupported version {version}")
        if depth != BITS_PER_SAMPLE:
            raise StreamError(f"unsupported bit depth {depth}")
        if frame_size < 1:
            raise StreamError("frame size of zero")
        entry = struct.calcsize(MIX_FORMAT)
        if len(data) < base + count * entry:
            raise StreamError("truncated mix table")
        mixes = []
        for i in range(count):
            tag, channels, kind, order, dmx, delta = struct.unpack_from(MIX_FORMAT, data, base + i * entry)
            try:
                layout = ChannelLayout(tag)
                model = ModelSpec(ModelKind(kind), order, dmx, delta)
            except (ValueError, CodecError) as e:
                raise StreamError(f"invalid mix entry: {e}", mix_index=i) from None
            if layout.channels != channels:
                raise StreamError("layout and channel count disagree", mix_index=i)
            mixes.append(MixEntry(layout, model))
        header = cls(rate, frame_size, total, mixes, version, depth)
        validate_hierarchy(header.mixes, frame_size, error=StreamError)
        return header, base + count * entry


def validate_hierarchy(mixes: Sequence[MixEntry], frame_size: int, error=ConfigError):
    for i, mix in enumerate(mixes):
        model = mix.model
        if model.kind.uses_downmix:
            if i == 0:
                raise error(f"{model.kind.name} needs a downmix; the lowest mix must use SEP or JOINT")
            if model.downmix_channels != mixes[i - 1].channels:
                raise error(f"mix {i} predicts from {model.downmix_channels} downmix channels but "
                            f"mix {i - 1} has {mixes[i - 1].channels}")
        if frame_size < model.order:
            raise error(f"frame size {frame_size} is shorter than prediction order {model.order}")


@dataclass
class FrameChunk:
    channels: int
    svd_mode: bool
    escapes: List[bool]
    warmup: np.ndarray
    coefficients: np.ndarray
    projection: Optional[ProjectionMatrix]
    rice_params: List[int]
    streams: List[np.ndarray]
    sections: dict = field(default_factory=dict)
    body: bytes = b""

    @property
    def side_info_bits(self) -> int:
        s = self.sections
        return s["flags"] + s["coefficients"] + s["projection"] + s["rice_params"]

    @property
    def bit_count(self) -> int:
        return 8 * (struct.calcsize(CHUNK_PREFIX) + len(self.body))

    def pack(self) -> "FrameChunk":
        sink = BitSink()
        sections = {}

        def section(name):
            sections[name] = sink.bit_count - sum(sections.values())

        sink.write(int(self.svd_mode), 1)
        sink.write_uints(np.array(self.escapes, dtype=np.uint64), 1)
        section("flags")
        sink.write_uints(self.warmup.astype(np.int16).view(np.uint16), BITS_PER_SAMPLE)
        section("warmup")
        sink.write_uints(self.coefficients.astype(np.float16).view(np.uint16), COEFF_BITS)
        section("coefficients")
        if self.svd_mode:
            sink.write_uints(self.projection.q.view(np.uint16), COEFF_BITS)
        section("projection")
        sink.write_uints(np.array(self.rice_params, dtype=np.uint64), RICE_PARAM_BITS)
        section("rice_params")
        for i, (stream, r) in enumerate(zip(self.streams, self.rice_params)):
            if not self.svd_mode and self.escapes[i]:
                sink.write_uints(stream.astype(np.int16).view(np.uint16), BITS_PER_SAMPLE)
            else:
                encode_block(stream, r, sink)
        section("payload")
        self.body = sink.getvalue()
        self.sections = sections
        self.sections["padding"] = 8 * len(self.body) - sink.bit_count
        return self

    def to_bytes(self) -> bytes:
        return struct.pack(CHUNK_PREFIX, len(self.body)) + self.body


def _direct_plan(residuals: np.ndarray, rice_max: int):
    params, escapes, cost = [], [], 0
    rows = residuals.shape[1]
    for stream in residuals:
        r, bits = best_rice_param(stream, rice_max) if rows else (0, 0)
        escape = bits > BITS_PER_SAMPLE * rows
        params.append(0 if escape else r)
        escapes.append(escape)
        cost += BITS_PER_SAMPLE * rows if escape else bits
    return params, escapes, cost


def encode_frame(frame, history, downmix_frame, model: ModelSpec,
                 config: CodecConfig = CodecConfig()) -> FrameChunk:
    """Solve, quantize, predict and entropy-code one frame of one mix.

    ``history`` is None for the stream's first frame, whose first ``order``
    samples are then sent verbatim. The cheaper of direct and SVD mode wins
    (direct on ties), unless ``config.force_mode`` pins one.
    """
    frame = frame.data if isinstance(frame, SampleBlock) else np.asarray(frame)
    channels, n = frame.shape
    coeffs = fit_frame(frame, history, downmix_frame, model)
    residuals = compute_residuals(frame, history, downmix_frame, coeffs, model).data
    rows = residuals.shape[1]
    warmup = frame[:, :n - rows] if history is None else frame[:, :0]

    params, escapes, direct_cost = _direct_plan(residuals, config.rice_max)
    direct_cost += RICE_PARAM_BITS * channels
    streams = [np.where(esc, frame[c, n - rows:], residuals[c])
               for c, esc in enumerate(escapes)]
    chunk = FrameChunk(channels, False, escapes, warmup, coeffs, None, params, streams)

    svd_possible = config.svd and channels >= 2 and rows > 0 and config.force_mode != "direct"
    if svd_possible:
        projection = fit_projection(ResidualBlock(residuals))
        t, corr = forward_project(ResidualBlock(residuals), projection)
        svd_params, svd_cost = [], COEFF_BITS * channels * channels
        for stream in list(t) + list(corr):
            r, bits = best_rice_param(stream, config.rice_max)
            svd_params.append(r)
            svd_cost += bits + RICE_PARAM_BITS
        if config.force_mode == "svd" or svd_cost < direct_cost:
            chunk = FrameChunk(channels, True, [False] * channels, warmup, coeffs, projection,
                               svd_params, list(t) + list(corr))
        logger.debug("frame of %d samples: direct %d bits, svd %d bits", n, direct_cost, svd_cost)
    return chunk.pack()


def read_chunk(body: bytes, channels: int, warmup_len: int, rows: int,
               model: ModelSpec, frame_index: Optional[int] = None,
               mix_index: Optional[int] = None) -> FrameChunk:
    """Parse a chunk body without reconstructing samples."""
    def fail(message):
        return StreamError(message, frame_index=frame_index, mix_index=mix_index)

    source = BitSource(body)
    sections = {}

    def section(name):
        sections[name] = source.pos - sum(sections.values())

    try:
        svd_mode = bool(source.read(1))
        escapes = [bool(b) for b in source.read_uints(channels, 1)]
        section("flags")
        if svd_mode and channels < 2:
            raise fail("svd mode signalled for a single-channel mix")
        if svd_mode and any(escapes):
            raise fail("escape flags set in svd mode")
        warmup = source.read_uints(channels * warmup_len, BITS_PER_SAMPLE).astype(np.uint16)
        warmup = warmup.view(np.int16).astype(np.int64).reshape(channels, warmup_len)
        section("warmup")
        k = model.coefficient_count(channels)
        coeffs = source.read_uints(channels * k, COEFF_BITS).astype(np.uint16)
        coeffs = coeffs.view(np.float16).reshape(channels, k)
        if not np.all(np.isfinite(coeffs)):
            raise fail("non-finite coefficient")
        section("coefficients")
        projection = None
        if svd_mode:
            q = source.read_uints(channels * channels, COEFF_BITS).astype(np.uint16)
            projection = ProjectionMatrix(q.view(np.float16).reshape(channels, channels))
            if not np.all(np.isfinite(projection.q)):
                raise fail("non-finite projection entry")
        section("projection")
        n_streams = 2 * channels if svd_mode else channels
        params = [int(r) for r in source.read_uints(n_streams, RICE_PARAM_BITS)]
        if any(r > RICE_MAX for r in params):
            raise fail(f"Rice parameter above {RICE_MAX}")
        section("rice_params")
        streams = []
        for i, r in enumerate(params):
            if not svd_mode and escapes[i]:
                raw = source.read_uints(rows, BITS_PER_SAMPLE).astype(np.uint16)
                streams.append(raw.view(np.int16).astype(np.int64))
            else:
                streams.append(decode_block(source, rows, r))
        section("payload")
    except RiceError as e:
        raise fail(f"truncated chunk: {e}") from None

    padding = source.remaining
    if padding >= 8:
        raise fail(f"chunk declares {len(body)} bytes but only {len(body) - padding // 8} are used")
    if padding and source.read(padding) != 0:
        raise fail("non-zero padding bits")
    sections["padding"] = padding
    return FrameChunk(channels, svd_mode, escapes, warmup, coeffs, projection, params, streams,
                      sections, body)


def decode_frame(chunk: FrameChunk, history, downmix_frame, model: ModelSpec,
                 sample_rate: int = 44100, frame_index: Optional[int] = None,
                 mix_index: Optional[int] = None) -> SampleBlock:
    c = chunk.channels
    if chunk.svd_mode:
        residuals = inverse_project(np.array(chunk.streams[:c]), np.array(chunk.streams[c:]),
                                    chunk.projection)
        verbatim = None
    else:
        residuals = ResidualBlock(np.stack([np.zeros_like(s) if esc else s
                                            for s, esc in zip(chunk.streams, chunk.escapes)]))
        verbatim = {i: chunk.streams[i] for i in range(c) if chunk.escapes[i]}
    try:
        return reconstruct_frame(residuals, history, downmix_frame, chunk.coefficients, model,
                                 warmup=chunk.warmup if history is None else None,
                                 sample_rate=sample_rate, verbatim=verbatim)
    except LayoutError as e:
        raise StreamError(f"reconstruction failed: {e}", frame_index=frame_index,
                          mix_index=mix_index) from None


@dataclass
class EncodedStream:
    header: ContainerHeader
    chunks: List[List[FrameChunk]]

    @property
    def header_bits(self) -> int:
        return 8 * len(self.header.to_bytes())

    def mix_bits(self, mix_index: int) -> int:
        return sum(frame[mix_index].bit_count for frame in self.chunks)

    @property
    def total_bits(self) -> int:
        return self.header_bits + sum(self.mix_bits(m) for m in range(len(self.header.mixes)))

    def to_bytes(self) -> bytes:
        parts = [self.header.to_bytes()]
        for frame in self.chunks:
            parts.extend(chunk.to_bytes() for chunk in frame)
        return b"".join(parts)


def _as_mixes(mixes) -> List[SampleBlock]:
    if isinstance(mixes, MixPair):
        return mixes.mixes
    if isinstance(mixes, SampleBlock):
        return [mixes]
    return list(mixes)


def encode_container(mixes, models: Sequence[ModelSpec],
                     config: CodecConfig = CodecConfig()) -> EncodedStream:
    """Encode one or more mixes of the same content, lowest mix first.

    A DMX model on mix m predicts from mix m-1; by losslessness the encoder's
    copy of that mix is what the decoder will have reconstructed.
    """
    mixes = _as_mixes(mixes)
    models = list(models)
    if not mixes:
        raise ConfigError("nothing to encode")
    if len(models) != len(mixes):
        raise ConfigError(f"{len(mixes)} mixes but {len(models)} models")
    n = mixes[0].length
    rate = mixes[0].sample_rate
    for m, mix in enumerate(mixes):
        if mix.length != n:
            raise LayoutError(f"mix {m} has {mix.length} samples, mix 0 has {n}")
        if mix.sample_rate != rate:
            raise LayoutError(f"mix {m} has sample rate {mix.sample_rate}, mix 0 has {rate}")
    entries = [MixEntry(mix.layout, model) for mix, model in zip(mixes, models)]
    validate_hierarchy(entries, config.frame_size)
    header = ContainerHeader(rate, config.frame_size, n, entries)

    chunks = []
    for k in range(header.frame_count):
        start, end = header.frame_bounds(k)
        frame_chunks = []
        for m, (mix, model) in enumerate(zip(mixes, models)):
            history = None if k == 0 else mix.data[:, start - model.order:start]
            downmix = mixes[m - 1].data[:, start:end] if model.kind.uses_downmix else None
            chunk = encode_frame(mix.data[:, start:end], history, downmix, model, config)
            logger.debug("mix %d frame %d: %s mode, %d bits", m, k,
                         "svd" if chunk.svd_mode else "direct", chunk.bit_count)
            frame_chunks.append(chunk)
        chunks.append(frame_chunks)
    return EncodedStream(header, chunks)


def _iter_chunks(data: bytes):
    """Yield (header, frame, mix, start, end, chunk) for every chunk, in order."""
    header, pos = ContainerHeader.from_bytes(data)
    prefix = struct.calcsize(CHUNK_PREFIX)
    for k in range(header.frame_count):
        start, end = header.frame_bounds(k)
        for m, mix in enumerate(header.mixes):
            if len(data) < pos + prefix:
                raise StreamError("truncated chunk length", frame_index=k, mix_index=m)
            (size,) = struct.unpack_from(CHUNK_PREFIX, data, pos)
            pos += prefix
            if len(data) < pos + size:
                raise StreamError(f"chunk declares {size} bytes, {len(data) - pos} left",
                                  frame_index=k, mix_index=m)
            body = data[pos:pos + size]
            pos += size
            n = end - start
            warmup_len = min(mix.model.order, n) if k == 0 else 0
            chunk = read_chunk(body, mix.channels, warmup_len, n - warmup_len, mix.model,
                               frame_index=k, mix_index=m)
            yield header, k, m, start, end, chunk
    if pos != len(data):
        raise StreamError(f"{len(data) - pos} trailing bytes after the last chunk")


def decode_container(stream) -> List[SampleBlock]:
    data = stream.to_bytes() if isinstance(stream, EncodedStream) else bytes(stream)
    header, pos = ContainerHeader.from_bytes(data)
    # every chunk carries at least its length prefix
    needed = header.frame_count * len(header.mixes) * struct.calcsize(CHUNK_PREFIX)
    if needed > len(data) - pos:
        raise StreamError(f"truncated stream: {header.frame_count} frames need at least "
                          f"{needed} bytes, {len(data) - pos} left")
    out = [np.zeros((mix.channels, header.total_samples), dtype=np.int16) for mix in header.mixes]
    for _, k, m, start, end, chunk in _iter_chunks(data):
        model = header.mixes[m].model
        history = None if k == 0 else out[m][:, start - model.order:start]
        downmix = out[m - 1][:, start:end] if model.kind.uses_downmix else None
        block = decode_frame(chunk, history, downmix, model, header.sample_rate,
                             frame_index=k, mix_index=m)
        out[m][:, start:end] = block.data
    return [SampleBlock(x, header.sample_rate) for x in out]


def inspect_stream(stream) -> List[dict]:
    """Per-chunk records: mode, escapes and bit counts of every section."""
    data = stream.to_bytes() if isinstance(stream, EncodedStream) else bytes(stream)
    records = []
    for header, k, m, start, end, chunk in _iter_chunks(data):
        record = {
            "frame": k,
            "mix": m,
            "samples": end - start,
            "mode": "svd" if chunk.svd_mode else "direct",
            "escapes": sum(chunk.escapes),
            "rice_params": list(chunk.rice_params),
            "side_info_bits": chunk.side_info_bits,
            "bits": chunk.bit_count,
        }
        record.update({f"{name}_bits": bits for name, bits in chunk.sections.items()})
        records.append(record)
    return records


@dataclass
class RatioRow:
    name: str
    upmix: float
    total: float


@dataclass
class MeasureResult:
    rows: List[RatioRow]
    downmix_ratio: float
    samples: int


def measure(upmix: SampleBlock, downmix: Optional[SampleBlock] = None,
            configurations=CONFIGURATIONS, order: int = 8, delta: float = 1e-4,
            frame_size: int = FRAME_SIZE_DEFAULT) -> MeasureResult:
    """Upmix-only and total (downmix SEP + upmix) ratios per configuration.

    Bits count chunk bodies and their length prefixes; the container header
    is a per-file constant and is left out.
    """
    if downmix is None:
        downmix = itu_downmix_5to2(upmix)
    sep = ModelSpec(ModelKind.SEP, order)
    base = encode_container([downmix], [sep], CodecConfig(frame_size))
    downmix_bits = base.mix_bits(0)
    both = upmix.channels + downmix.channels
    rows = []
    for kind, svd in configurations:
        config = CodecConfig(frame_size, svd=svd)
        if kind.uses_downmix:
            model = ModelSpec(kind, order, downmix.channels, delta)
            upmix_bits = encode_container([downmix, upmix], [sep, model], config).mix_bits(1)
        else:
            model = ModelSpec(kind, order, 0, delta)
            upmix_bits = encode_container([upmix], [model], config).mix_bits(0)
        rows.append(RatioRow(config_name(model, svd),
                             compression_ratio(upmix_bits, upmix),
                             compression_ratio(downmix_bits + upmix_bits, upmix, channels=both)))
        logger.debug("%s: upmix %.4f total %.4f", rows[-1].name, rows[-1].upmix, rows[-1].total)
    return MeasureResult(rows, compression_ratio(downmix_bits, downmix), upmix.length)
