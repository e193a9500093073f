"""Plug-in transfer entropy from histograms of coarse-grained series.

This estimator shares no code with the local-model estimator and serves as an independent reference for it on
small problems. It has no bias correction: with `B` bins and `N` samples, independent series give roughly
`(B - 1)^2 B / (2 N ln 2)` bits.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np
from numpy.typing import ArrayLike, NDArray

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BinningConfig:
    """Equal-width binning into `n_bins` bins over `value_range`, or over the data's own min/max when it is None."""

    n_bins: int = 8
    value_range: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.n_bins < 2:
            raise ValueError(f"at least 2 bins are required, got n_bins={self.n_bins}")
        if self.value_range is not None:
            lo, hi = self.value_range
            if not (math.isfinite(lo) and math.isfinite(hi) and lo < hi):
                raise ValueError(f"value range must satisfy lo < hi with finite bounds, got {self.value_range}")


def discretize(values: ArrayLike, config: BinningConfig = BinningConfig()) -> NDArray[np.intp]:
    """Map every value to its bin code in `[0, n_bins)`; the last bin is closed on the right.

    >>> discretize([0.0, 0.49, 0.5, 1.0], BinningConfig(n_bins=2)).tolist()
    [0, 0, 1, 1]

    :raises ValueError: If the series is constant (data range) or leaves the fixed range
    """
    v = np.asarray(values, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise ValueError(f"expected a non-empty one-dimensional series, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("cannot discretize a series containing NaN or infinite values")

    if config.value_range is None:
        lo, hi = float(v.min()), float(v.max())
        if lo == hi:
            raise ValueError(f"cannot bin a constant series (every value is {lo})")
    else:
        lo, hi = config.value_range
        outside = np.flatnonzero((v < lo) | (v > hi))
        if outside.size:
            raise ValueError(f"value {v[outside[0]]} at sample {outside[0]} lies outside the bin range [{lo}, {hi}]")

    codes = np.floor((v - lo) / (hi - lo) * config.n_bins).astype(np.intp)
    return np.clip(codes, 0, config.n_bins - 1)


def _joint_counts(source: ArrayLike, target: ArrayLike, config: BinningConfig) -> NDArray[np.intp]:
    s = np.asarray(source, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if s.shape != t.shape:
        raise ValueError(f"source and target must have equal lengths, got {s.size} and {t.size}")
    if t.size < 3 * config.n_bins:
        raise ValueError(f"{config.n_bins} bins need at least {3 * config.n_bins} samples, got {t.size}")

    bins = config.n_bins
    s_codes = discretize(s, config)
    t_codes = discretize(t, config)
    nxt, cur, src = t_codes[1:], t_codes[:-1], s_codes[:-1]
    return np.bincount((nxt * bins + cur) * bins + src, minlength=bins**3).reshape(bins, bins, bins)


def joint_histogram(
    source: ArrayLike, target: ArrayLike, config: BinningConfig = BinningConfig()
) -> NDArray[np.float64]:
    """Relative frequencies of the triples `(t[n+1], t[n], s[n])`, indexed in that order.

    :raises ValueError: Under the same conditions as `te_binned`
    """
    counts = _joint_counts(source, target, config)
    return counts / counts.sum()


def te_binned(source: ArrayLike, target: ArrayLike, config: BinningConfig = BinningConfig()) -> float:
    """Transfer entropy from `source` to `target` in bits per step, from histogram frequencies.

    Counts are taken over the triples `(t[n+1], t[n], s[n])` and the sum
    `sum p(t', t, s) log2 [p(t' | t, s) / p(t' | t)]` is evaluated with `0 log 0 = 0`.
    Small negative results from rounding are clamped to zero.

    :param source: The driving series
    :param target: The driven series, same length as `source`
    :param config: Binning of both series
    :returns: A non-negative transfer entropy
    :raises ValueError: On a length mismatch, fewer than `3 * n_bins` samples, or a constant series
    """
    bins = config.n_bins
    joint = _joint_counts(source, target, config)
    c_next_cur = joint.sum(axis=2)
    c_cur_src = joint.sum(axis=0)
    c_cur = c_next_cur.sum(axis=0)

    a, b, c = np.nonzero(joint)
    c_abc = joint[a, b, c]
    # integer products keep the ratio exactly 1 wherever the source adds nothing
    ratio = (c_abc * c_cur[b]) / (c_cur_src[b, c] * c_next_cur[a, b])
    total = int(c_abc.sum())
    value = float(np.sum(c_abc / total * np.log2(ratio)))

    logger.debug("binned TE over %d triples with %d bins: %.6f bits", total, bins, value)
    return max(value, 0.0)
