"""
Integer prediction shared by encoder and decoder.

Losslessness only holds if both sides compute every prediction with the same
floating-point operations. The contract is:

  * regressors are normalized samples (x / 32768, exact),
  * coefficients are dequantized binary16 values (exact in double),
  * the products are summed one at a time in canonical coefficient order,
    starting from 0.0, each product and each sum rounded to double
    (separate multiply and add, never fused),
  * the sum is scaled by 32768 and rounded half away from zero.

The encoder evaluates this vectorized over time (one numpy multiply and one
add per coefficient); the decoder evaluates it sample by sample with Python
floats. Both are plain IEEE double arithmetic in the same order.
"""
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from core import LayoutError, SAMPLE_SCALE, SampleBlock, round_half_away, round_half_away_array
from solver import (ModelSpec, as_planar, dequantize_coefficients, extend_with_history,
                    regressor_matrix)


@dataclass
class ResidualBlock:
    """Prediction residuals of one frame, shape (channels, length).

    ``length`` covers only the predictable part of the frame; on the first
    frame of a stream it excludes the warm-up samples.
    """
    data: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.int64)
        if self.data.ndim != 2:
            raise LayoutError(f"residual block must be (channels, length), got {self.data.shape}")

    @property
    def channels(self) -> int:
        return self.data.shape[0]

    @property
    def length(self) -> int:
        return self.data.shape[1]


def predict_sample(context: Sequence[float], coeffs: Sequence[float]) -> int:
    if len(context) != len(coeffs):
        raise LayoutError(f"context has {len(context)} values, {len(coeffs)} coefficients")
    acc = 0.0
    for w, x in zip(coeffs, context):
        acc += float(w) * float(x)
    return round_half_away(acc * SAMPLE_SCALE)


def predict_frame(frame, history, downmix_frame, coeffs, model: ModelSpec) -> np.ndarray:
    """Predictions for every predictable sample of a frame, shape (C, rows)."""
    extended, offset = extend_with_history(frame, history, model.order)
    channels = extended.shape[0]
    weights = dequantize_coefficients(coeffs)
    if weights.shape != (channels, model.coefficient_count(channels)):
        raise LayoutError(f"coefficient array has shape {weights.shape}, expected "
                          f"{(channels, model.coefficient_count(channels))}")
    rows = max(extended.shape[1] - model.order, 0)
    out = np.zeros((channels, rows), dtype=np.int64)
    for c in range(channels):
        x = regressor_matrix(extended, offset, downmix_frame, model, c)
        acc = np.zeros(rows)
        for j in range(x.shape[1]):
            acc = acc + weights[c, j] * x[:, j]
        out[c] = round_half_away_array(acc * SAMPLE_SCALE)
    return out


def compute_residuals(frame, history, downmix_frame, coeffs, model: ModelSpec) -> ResidualBlock:
    extended, _ = extend_with_history(frame, history, model.order)
    predictions = predict_frame(frame, history, downmix_frame, coeffs, model)
    return ResidualBlock(extended[:, model.order:] - predictions)


def _terms(weights: np.ndarray, model: ModelSpec, channels: int):
    # zero coefficients add exact zeros and are skipped
    lag_terms, dmx_terms = [], []
    for c in range(channels):
        sources = range(channels) if model.kind.joint else [c]
        lags = []
        j = 0
        for src in sources:
            for k in range(1, model.order + 1):
                if weights[c, j] != 0.0:
                    lags.append((src, k, float(weights[c, j])))
                j += 1
        lag_terms.append(lags)
        dmx_terms.append([(d, float(weights[c, j + d])) for d in range(model.downmix_channels)
                          if weights[c, j + d] != 0.0])
    return lag_terms, dmx_terms


def reconstruct_frame(residuals: ResidualBlock, history, downmix_frame, coeffs,
                      model: ModelSpec, warmup=None, sample_rate: int = 44100,
                      verbatim=None) -> SampleBlock:
    """Invert :func:`compute_residuals`, one sample at a time.

    ``history`` holds the previous frame's last ``order`` decoded samples; on
    the first frame pass ``history=None`` and the verbatim ``warmup`` samples
    instead. ``verbatim`` maps escaped channels to their raw samples, which
    replace prediction plus residual. Returns the whole frame, warm-up included.
    """
    e = residuals.data
    channels, rows = e.shape
    head = as_planar(history) if history is not None else as_planar(warmup)
    if head is None:
        head = np.zeros((channels, 0), dtype=np.int64)
    if head.shape[0] != channels:
        raise LayoutError(f"context has {head.shape[0]} channels, residuals have {channels}")
    if rows and head.shape[1] != model.order:
        raise LayoutError(f"need {model.order} context samples per channel, got {head.shape[1]}")
    n_frame = rows if history is not None else head.shape[1] + rows

    weights = dequantize_coefficients(coeffs)
    if weights.shape != (channels, model.coefficient_count(channels)):
        raise LayoutError(f"coefficient array has shape {weights.shape}")
    lag_terms, dmx_terms = _terms(weights, model, channels)

    dmx = []
    if model.kind.uses_downmix:
        downmix = as_planar(downmix_frame)
        if downmix is None or downmix.shape[1] != n_frame:
            raise LayoutError("decoded downmix frame missing or of the wrong length")
        dmx = (downmix[:, n_frame - rows:] / SAMPLE_SCALE).tolist()

    xs = (head / SAMPLE_SCALE).tolist()
    samples = head.tolist() if history is None else [[] for _ in range(channels)]
    res = e.tolist()
    raw = {c: np.asarray(v, dtype=np.int64).tolist() for c, v in (verbatim or {}).items()}
    base = head.shape[1]
    for i in range(rows):
        t = base + i
        for c in range(channels):
            if c in raw:
                s = raw[c][i]
                samples[c].append(s)
                xs[c].append(s / SAMPLE_SCALE)
                continue
            acc = 0.0
            for src, k, w in lag_terms[c]:
                acc += w * xs[src][t - k]
            for d, w in dmx_terms[c]:
                acc += w * dmx[d][i]
            s = res[c][i] + round_half_away(acc * SAMPLE_SCALE)
            samples[c].append(s)
            xs[c].append(s / SAMPLE_SCALE)
    return SampleBlock(np.array(samples, dtype=np.int64).reshape(channels, n_frame), sample_rate)
