"""
SVD projection of a frame's residual block, made lossless by an integer
correction term.

    T    = round(e Q)          projected residuals
    Corr = e - round(T Q^T)    what the rounded back-projection misses

The decoder recomputes round(T Q^T) with the same arithmetic and adds Corr,
so the round trip is exact for any finite Q, orthonormal or not.
"""
from dataclasses import dataclass

import numpy as np

from core import TransformError, round_half_away_array
from predictor import ResidualBlock
from solver import quantize_coefficients


@dataclass
class ProjectionMatrix:
    """C x C binary16 matrix; column j is the j-th right singular vector."""
    q: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=np.float16)
        if self.q.ndim != 2 or self.q.shape[0] != self.q.shape[1]:
            raise TransformError(f"projection must be square, got shape {self.q.shape}")

    @property
    def channels(self) -> int:
        return self.q.shape[0]

    def as_float(self) -> np.ndarray:
        return self.q.astype(np.float64)


def orient_columns(v: np.ndarray) -> np.ndarray:
    """Flip columns so each one's largest-magnitude entry is positive.

    Ties go to the lowest row index (np.argmax returns the first maximum).
    """
    v = np.array(v, dtype=np.float64)
    rows = np.argmax(np.abs(v), axis=0)
    signs = np.where(v[rows, np.arange(v.shape[1])] < 0, -1.0, 1.0)
    return v * signs


def singular_vectors(e: np.ndarray) -> np.ndarray:
    """Right singular vectors (as columns) of the N x C matrix ``e``."""
    n, c = e.shape
    # a thin SVD only yields min(N, C) vectors
    _, _, vt = np.linalg.svd(e, full_matrices=n < c)
    return orient_columns(vt.T)


def fit_projection(residuals: ResidualBlock) -> ProjectionMatrix:
    if residuals.channels < 2:
        raise TransformError("projection needs at least two channels")
    if residuals.length == 0:
        raise TransformError("cannot fit a projection to an empty residual block")
    v = singular_vectors(residuals.data.T.astype(np.float64))
    return ProjectionMatrix(quantize_coefficients(v))


def _project(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """round(x @ m) per row with a left-to-right sum over the inner index.

    ``x`` is (C, N) planar, ``m`` is C x C; returns (C, N) planar int64.
    """
    c, n = x.shape
    xf = x.astype(np.float64)
    out = np.zeros((c, n), dtype=np.int64)
    for j in range(c):
        acc = np.zeros(n)
        for i in range(c):
            acc = acc + xf[i] * m[i, j]
        out[j] = round_half_away_array(acc)
    return out


def _check(residuals: np.ndarray, projection: ProjectionMatrix):
    if residuals.shape[0] != projection.channels:
        raise TransformError(
            f"block has {residuals.shape[0]} channels, projection is {projection.channels}x"
            f"{projection.channels}")


def forward_project(residuals: ResidualBlock, projection: ProjectionMatrix):
    """Returns (T, Corr), both (C, N) int64 arrays."""
    e = residuals.data
    _check(e, projection)
    q = projection.as_float()
    t = _project(e, q)
    corr = e - _project(t, q.T)
    return t, corr


def inverse_project(t, corr, projection: ProjectionMatrix) -> ResidualBlock:
    t = np.asarray(t, dtype=np.int64)
    corr = np.asarray(corr, dtype=np.int64)
    _check(t, projection)
    if corr.shape != t.shape:
        raise TransformError(f"projected block {t.shape} and correction {corr.shape} differ")
    return ResidualBlock(_project(t, projection.as_float().T) + corr)
