"""
Per-frame linear prediction systems and their least-squares solutions.

Four signal models are supported:

    SEP        s_c(t) = sum_k beta_k s_c(t-k)
    JOINT      s_c(t) = sum_c' sum_k beta_c',k s_c'(t-k)
    SEP_DMX    SEP   + sum_d gamma_d s_d(t)
    JOINT_DMX  JOINT + sum_d gamma_d s_d(t)

where s_d is channel d of the (already decoded) downmix. Regressor columns
always follow the canonical coefficient order: source channel ascending, lag
ascending, then downmix channel ascending. The predictor evaluates
coefficients in the same order.
"""
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

import numpy as np
import scipy.linalg

from core import ConfigError, LayoutError, SampleBlock, normalize

ORDER_DEFAULT = 8
DELTA_DEFAULT = 1e-4
RCOND = 1e-12
FLOAT16_MAX = 65504.0
# order and downmix width are stored as single bytes in the mix table
FIELD_MAX = 255


class ModelKind(IntEnum):
    SEP = 0
    JOINT = 1
    SEP_DMX = 2
    JOINT_DMX = 3

    @property
    def joint(self) -> bool:
        return self in (ModelKind.JOINT, ModelKind.JOINT_DMX)

    @property
    def uses_downmix(self) -> bool:
        return self in (ModelKind.SEP_DMX, ModelKind.JOINT_DMX)

    @property
    def cli_name(self) -> str:
        return self.name.lower().replace("_", "-")


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind = ModelKind.SEP
    order: int = ORDER_DEFAULT
    downmix_channels: int = 0
    delta: float = DELTA_DEFAULT

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind(self.kind))
        if not 1 <= self.order <= FIELD_MAX:
            raise ConfigError(f"prediction order must lie in [1, {FIELD_MAX}], got {self.order}")
        if self.downmix_channels > FIELD_MAX:
            raise ConfigError(f"at most {FIELD_MAX} downmix channels, got {self.downmix_channels}")
        if self.kind.uses_downmix and self.downmix_channels < 1:
            raise ConfigError(f"{self.kind.name} needs at least one downmix channel")
        if not self.kind.uses_downmix and self.downmix_channels != 0:
            raise ConfigError(f"{self.kind.name} takes no downmix channels")
        if not np.isfinite(self.delta) or self.delta < 0:
            raise ConfigError(f"regularization weight must be finite and >= 0, got {self.delta}")
        if self.kind == ModelKind.SEP:
            # the single-channel baseline is solved unregularized
            object.__setattr__(self, "delta", 0.0)

    @classmethod
    def from_name(cls, name: str, order: int = ORDER_DEFAULT, downmix_channels: int = 0,
                  delta: float = DELTA_DEFAULT) -> "ModelSpec":
        try:
            kind = ModelKind[name.upper().replace("-", "_")]
        except KeyError:
            choices = ", ".join(k.cli_name for k in ModelKind)
            raise ConfigError(f"unknown model '{name}' (choose from {choices})") from None
        if not kind.uses_downmix:
            downmix_channels = 0
        return cls(kind, order, downmix_channels, delta)

    def coefficient_count(self, channels: int) -> int:
        """Coefficients per target channel."""
        lags = self.order * channels if self.kind.joint else self.order
        return lags + self.downmix_channels

    def total_parameters(self, channels: int) -> int:
        return channels * self.coefficient_count(channels)


def config_name(model, svd: bool) -> str:
    """Bench row label such as "JOINT_DMX+SVD"; takes a ModelSpec or a ModelKind."""
    kind = getattr(model, "kind", model)
    return ModelKind(kind).name + ("+SVD" if svd else "")


@dataclass
class DesignSystem:
    matrix: np.ndarray
    target: np.ndarray

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def columns(self) -> int:
        return self.matrix.shape[1]


def as_planar(x) -> Optional[np.ndarray]:
    if x is None:
        return None
    if isinstance(x, SampleBlock):
        x = x.data
    x = np.asarray(x, dtype=np.int64)
    if x.ndim == 1:
        x = x[None, :]
    return x


def extend_with_history(frame, history, order: int):
    """Prepend the previous frame's trailing samples to ``frame``.

    Returns the extended planar array and the offset of the frame's first
    sample inside it. Without history the first ``order`` samples of the
    frame are warm-up and only later samples get a prediction.
    """
    frame = as_planar(frame)
    history = as_planar(history)
    if history is None or history.shape[1] == 0:
        return frame, 0
    if history.shape[0] != frame.shape[0]:
        raise LayoutError(f"history has {history.shape[0]} channels, frame has {frame.shape[0]}")
    if history.shape[1] != order:
        raise LayoutError(f"history must hold {order} samples per channel, got {history.shape[1]}")
    return np.concatenate([history, frame], axis=1), order


def regressor_matrix(extended: np.ndarray, offset: int, downmix, model: ModelSpec,
                     target_channel: int) -> np.ndarray:
    """Normalized regressors for every predictable sample of the frame.

    Row i belongs to frame-relative time ``order - offset + i``; columns are in
    canonical coefficient order.
    """
    p = model.order
    channels, total = extended.shape
    n_frame = total - offset
    rows = max(total - p, 0)
    first = p - offset

    downmix = as_planar(downmix)
    if model.kind.uses_downmix:
        if downmix is None:
            raise LayoutError(f"{model.kind.name} needs the decoded downmix")
        if downmix.shape[1] != n_frame:
            raise LayoutError(f"downmix frame has {downmix.shape[1]} samples, frame has {n_frame}")
        if downmix.shape[0] != model.downmix_channels:
            raise LayoutError(
                f"model expects {model.downmix_channels} downmix channels, got {downmix.shape[0]}")
    if rows == 0:
        return np.zeros((0, model.coefficient_count(channels)))

    sources = range(channels) if model.kind.joint else [target_channel]
    columns = []
    for src in sources:
        for k in range(1, p + 1):
            columns.append(extended[src, p - k:total - k])
    for d in range(model.downmix_channels):
        columns.append(downmix[d, first:n_frame])
    return normalize(np.stack(columns, axis=1))


def build_design_system(frame, history, downmix_frame, model: ModelSpec,
                        target_channel: int) -> DesignSystem:
    extended, offset = extend_with_history(frame, history, model.order)
    if not 0 <= target_channel < extended.shape[0]:
        raise LayoutError(f"target channel {target_channel} out of range")
    matrix = regressor_matrix(extended, offset, downmix_frame, model, target_channel)
    target = normalize(extended[target_channel, model.order:])
    return DesignSystem(matrix, target)


def solve_plain(system: DesignSystem) -> np.ndarray:
    """Minimum-norm least squares, argmin ||s - S'a||, via LAPACK gelsd."""
    if system.columns == 0 or system.rows == 0:
        return np.zeros(system.columns)
    alpha, *_ = scipy.linalg.lstsq(system.matrix, system.target, cond=RCOND,
                                   lapack_driver="gelsd", check_finite=False)
    return alpha


def solve_regularized(system: DesignSystem, delta: float) -> np.ndarray:
    """Tikhonov-regularized solve of (S'^T S' + delta I) a = S'^T s."""
    if delta < 0:
        raise ConfigError(f"regularization weight must be >= 0, got {delta}")
    if system.columns == 0 or system.rows == 0:
        return np.zeros(system.columns)
    s = system.matrix
    gram = s.T @ s + delta * np.eye(system.columns)
    rhs = s.T @ system.target
    alpha, *_ = scipy.linalg.lstsq(gram, rhs, cond=RCOND,
                                   lapack_driver="gelsd", check_finite=False)
    return alpha


def solve(system: DesignSystem, model: ModelSpec) -> np.ndarray:
    if model.kind == ModelKind.SEP:
        return solve_plain(system)
    return solve_regularized(system, model.delta)


def quantize_coefficients(alpha) -> np.ndarray:
    """Round to IEEE binary16 (nearest-even), clamping to the finite range."""
    alpha = np.nan_to_num(np.asarray(alpha, dtype=np.float64), nan=0.0,
                          posinf=FLOAT16_MAX, neginf=-FLOAT16_MAX)
    return np.clip(alpha, -FLOAT16_MAX, FLOAT16_MAX).astype(np.float16)


def dequantize_coefficients(coeffs) -> np.ndarray:
    return np.asarray(coeffs, dtype=np.float16).astype(np.float64)


def fit_frame(frame, history, downmix_frame, model: ModelSpec) -> np.ndarray:
    """Quantized coefficients for every channel of a frame, shape (C, K)."""
    extended, offset = extend_with_history(frame, history, model.order)
    channels = extended.shape[0]
    coeffs = np.zeros((channels, model.coefficient_count(channels)), dtype=np.float16)
    for c in range(channels):
        matrix = regressor_matrix(extended, offset, downmix_frame, model, c)
        system = DesignSystem(matrix, normalize(extended[c, model.order:]))
        coeffs[c] = quantize_coefficients(solve(system, model))
    return coeffs
