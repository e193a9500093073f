from collections.abc import Callable, Iterable, Mapping, Sequence
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import partial
import logging
import math
import sys
from typing import NamedTuple, TypeVar

import numpy as np
from numpy.typing import ArrayLike, NDArray

if sys.version_info >= (3, 11):
    from typing import Self
else:
    from typing_extensions import Self

from .density import logistic_log_density, resolve_r, RPolicy
from .localmodel import default_m, fit_local_model, floor_sigma, ModelOrder
from .series import Dataset, delay_embed, joint_embed, StateSeries

logger = logging.getLogger(__name__)

# per-sample log ratios beyond this many bits are clamped before averaging
LOG_RATIO_CLAMP_BITS = 64.0
MIN_SAMPLES = 20
MIN_SURROGATES = 19

_T = TypeVar("_T")
_R = TypeVar("_R")


class TeEstimate(NamedTuple):
    """A directed transfer entropy estimate, in bits per step."""

    value_bits: float
    n_samples: int
    r_used_joint: float
    r_used_self: float
    sigma_joint: float
    sigma_self: float
    n_clamped: int = 0
    per_sample_logs: NDArray[np.float64] | None = None
    source_informative: bool = True


class SurrogateSummary(NamedTuple):
    """Transfer entropy of the original pair against its distribution under cyclically shifted sources."""

    original: float
    mean: float
    std: float
    z_score: float
    p_value: float
    values: NDArray[np.float64]
    offsets: NDArray[np.int64]


def net_flow(matrix: ArrayLike) -> NDArray[np.float64]:
    """Return the net information flow of every element: outgoing minus incoming transfer.

    `matrix[i][j]` is the transfer from element `i` to element `j`.
    """
    te = np.asarray(matrix, dtype=np.float64)
    if te.ndim != 2 or te.shape[0] != te.shape[1]:
        raise ValueError(f"transfer matrix must be square, got shape {te.shape}")
    return np.asarray(te.sum(axis=1) - te.sum(axis=0), dtype=np.float64)


@dataclass(frozen=True, eq=False)
class FlowResult:
    """Pairwise transfer entropies between channels and the net flow of each channel.

    `te_matrix[i][j]` is the transfer from `labels[i]` to `labels[j]`; the diagonal is zero.
    """

    labels: tuple[str, ...]
    te_matrix: NDArray[np.float64]
    net_flow: NDArray[np.float64]
    estimates: Mapping[tuple[str, str], TeEstimate] = field(default_factory=dict)

    @classmethod
    def from_matrix(
        cls,
        labels: Sequence[str],
        matrix: ArrayLike,
        estimates: Mapping[tuple[str, str], TeEstimate] | None = None,
    ) -> Self:
        te = np.array(matrix, dtype=np.float64)
        if te.shape != (len(labels), len(labels)):
            raise ValueError(f"transfer matrix of shape {te.shape} does not match {len(labels)} labels")
        np.fill_diagonal(te, 0.0)
        return cls(tuple(labels), te, net_flow(te), dict(estimates or {}))

    @property
    def total_net_flow(self) -> float:
        """Sum of all net flows; zero up to rounding."""
        return float(np.sum(self.net_flow))

    def te(self, source: str, target: str) -> float:
        """Return the transfer from channel `source` to channel `target`."""
        return float(self.te_matrix[self.labels.index(source), self.labels.index(target)])


def parallel_map(func: Callable[[_T], _R], items: Iterable[_T], threads: int) -> list[_R]:
    """Apply `func` to every item on up to `threads` worker threads; results keep the order of `items`."""
    if threads < 1:
        raise ValueError(f"thread count must be positive, got {threads}")
    if threads == 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(func, items))


def transfer_entropy(
    source: StateSeries,
    target: StateSeries,
    *,
    k: int = 1,
    order: ModelOrder = ModelOrder.ZERO,
    policy: RPolicy = RPolicy(),
    window: int = 0,
    m: int | None = None,
    require_improvement: bool = False,
    keep_samples: bool = False,
) -> TeEstimate:
    """Estimate the transfer entropy from `source` to `target` from local-model conditional densities.

    The estimate is the sample mean over states `n` of
    `log2 p(t[n+1] | t[n], s[n]) - log2 p(t[n+1] | t[n])`, where the numerator density is centered on a local
    model of the joint (target, source) states and the denominator on a local model of the target states alone.
    Each density uses an `r` derived from its own model's residual spread. Both first-order models use the same
    neighborhood size `m` (default: that of the joint space).

    With `require_improvement`, the source counts as informative only when the joint model's residual spread is
    strictly smaller than that of the target-only model. Otherwise the joint density is replaced by the target-only
    one, every log ratio is 0 and the estimate is exactly 0. Without the check an uninformative source usually
    gives a negative estimate: joint-space neighbors lie farther away, so the joint residuals are larger.

    :param source: Embedded source channel
    :param target: Embedded target channel, aligned with `source`
    :param k: Zero-order neighbor count
    :param order: Local model order
    :param policy: How `r` is derived from the residual spread
    :param window: Temporal exclusion window for neighbor searches
    :param m: First-order neighborhood size
    :param require_improvement: Whether a source that does not improve the prediction yields exactly 0
    :param keep_samples: Whether to return the per-sample log ratios
    :returns: The estimate with the `r` values used
    :raises ValueError: If the series are misaligned or shorter than 20 states
    """
    joint = joint_embed(target, source)
    if len(target) < MIN_SAMPLES:
        raise ValueError(f"transfer entropy needs at least {MIN_SAMPLES} aligned states, got {len(target)}")

    order = ModelOrder(order)
    if order is ModelOrder.FIRST and m is None:
        m = default_m(joint.d)

    fit_joint = fit_local_model(joint, order, m, window, k=k)
    fit_self = fit_local_model(target, order, m, window, k=k)

    usable = fit_joint.evaluated & fit_self.evaluated
    if not np.any(usable):
        raise ValueError(f"no state of {target.name!r} can be evaluated by both the joint and the self model")

    sigma_joint = floor_sigma(fit_joint.stats.sigma, target.successors)
    sigma_self = floor_sigma(fit_self.stats.sigma, target.successors)
    r_joint = resolve_r(policy, sigma_joint)
    r_self = resolve_r(policy, sigma_self)

    informative = not require_improvement or sigma_joint < sigma_self
    if not informative:
        logger.info(
            "%s -> %s: joint residual sigma %.3g does not improve on %.3g; source treated as uninformative",
            source.name,
            target.name,
            sigma_joint,
            sigma_self,
        )
        fit_joint, r_joint = fit_self, r_self

    observed = target.successors[usable]
    log_joint = logistic_log_density(fit_joint.predicted[usable], r_joint, observed)
    log_self = logistic_log_density(fit_self.predicted[usable], r_self, observed)
    log_ratios = (log_joint - log_self) / math.log(2.0)

    n_clamped = int(np.count_nonzero(np.abs(log_ratios) > LOG_RATIO_CLAMP_BITS))
    if n_clamped:
        logger.warning(
            "%s -> %s: clamped %d of %d log ratios to +/-%g bits",
            source.name,
            target.name,
            n_clamped,
            log_ratios.size,
            LOG_RATIO_CLAMP_BITS,
        )
    log_ratios = np.clip(log_ratios, -LOG_RATIO_CLAMP_BITS, LOG_RATIO_CLAMP_BITS)

    value = float(np.mean(log_ratios))
    logger.info("TE %s -> %s = %.6f bits (%d samples)", source.name, target.name, value, log_ratios.size)
    return TeEstimate(
        value,
        int(log_ratios.size),
        r_joint,
        r_self,
        sigma_joint,
        sigma_self,
        n_clamped,
        log_ratios if keep_samples else None,
        informative,
    )


def te_matrix(
    dataset: Dataset,
    *,
    d: int = 1,
    tau: int = 1,
    k: int = 1,
    order: ModelOrder = ModelOrder.ZERO,
    policy: RPolicy = RPolicy(),
    window: int = 0,
    m: int | None = None,
    require_improvement: bool = False,
    standardize: bool = False,
    threads: int = 1,
) -> FlowResult:
    """Estimate the transfer entropy between every ordered pair of channels and the net flow of each channel.

    :param dataset: At least two channels
    :param d: Embedding dimension applied to every channel
    :param tau: Embedding delay applied to every channel
    :param require_improvement: Report 0 for sources that do not improve the prediction (see `transfer_entropy`)
    :param standardize: Z-score every channel before embedding
    :param threads: Worker threads across pairs; results do not depend on it
    :returns: The transfer matrix and net flows
    :raises ValueError: If fewer than 2 channels are given
    """
    if len(dataset) < 2:
        raise ValueError(f"a transfer matrix needs at least 2 channels, got {len(dataset)}")

    if standardize:
        dataset = dataset.standardized()

    embedded = [delay_embed(channel, d, tau) for channel in dataset]
    pairs = [(i, j) for i in range(len(embedded)) for j in range(len(embedded)) if i != j]

    def estimate(pair: tuple[int, int]) -> TeEstimate:
        i, j = pair
        return transfer_entropy(
            embedded[i],
            embedded[j],
            k=k,
            order=order,
            policy=policy,
            window=window,
            m=m,
            require_improvement=require_improvement,
        )

    results = parallel_map(estimate, pairs, threads)

    labels = dataset.names
    matrix = np.zeros((len(labels), len(labels)))
    estimates: dict[tuple[str, str], TeEstimate] = {}
    for (i, j), result in zip(pairs, results):
        matrix[i, j] = result.value_bits
        estimates[(labels[i], labels[j])] = result

    return FlowResult.from_matrix(labels, matrix, estimates)


def directionality_index(i_ab: TeEstimate | float, i_ba: TeEstimate | float) -> float:
    """Return the normalized asymmetry `(I_ab - I_ba) / (I_ab + I_ba)`; +1 means transfer from a to b only.

    >>> directionality_index(0.3, 0.1)
    0.5

    :raises ValueError: If the two transfers sum to zero
    """
    ab = i_ab.value_bits if isinstance(i_ab, TeEstimate) else float(i_ab)
    ba = i_ba.value_bits if isinstance(i_ba, TeEstimate) else float(i_ba)

    total = ab + ba
    if total == 0.0:
        raise ValueError(f"directionality index is undefined when the transfers sum to zero ({ab} + {ba})")

    index = (ab - ba) / total
    if abs(index) > 1.0:
        logger.warning("directionality index %.4f lies outside [-1, 1]: one of the transfers is negative", index)
    return index


def surrogate_baseline(
    source: StateSeries,
    target: StateSeries,
    n_surrogates: int = MIN_SURROGATES,
    seed: int = 0,
    *,
    k: int = 1,
    order: ModelOrder = ModelOrder.ZERO,
    policy: RPolicy = RPolicy(),
    window: int = 0,
    m: int | None = None,
    require_improvement: bool = False,
    threads: int = 1,
) -> SurrogateSummary:
    """Compare the transfer entropy of a pair against sources cyclically shifted by random offsets.

    Offsets are drawn uniformly from `[ceil(N / 10), N - ceil(N / 10)]`, so no surrogate is close to the
    original alignment.

    :param n_surrogates: Number of shifted sources, at least 19
    :param seed: Seed of the offset generator
    :returns: The original value and the surrogate distribution summary
    :raises ValueError: If fewer than 19 surrogates are requested
    """
    if n_surrogates < MIN_SURROGATES:
        raise ValueError(f"at least {MIN_SURROGATES} surrogates are required, got {n_surrogates}")

    estimate = partial(
        transfer_entropy,
        k=k,
        order=order,
        policy=policy,
        window=window,
        m=m,
        require_improvement=require_improvement,
    )
    original = estimate(source, target).value_bits

    n = len(source)
    min_shift = math.ceil(n / 10)
    rng = np.random.default_rng(seed)
    offsets = rng.integers(min_shift, n - min_shift, size=n_surrogates, endpoint=True)

    def shifted(offset: np.int64) -> float:
        return estimate(source.with_states(np.roll(source.states, int(offset), axis=0)), target).value_bits

    values = np.array(parallel_map(shifted, offsets, threads))
    mean = float(np.mean(values))
    std = float(np.std(values, ddof=1))
    if std > 0:
        z_score = (original - mean) / std
    else:
        z_score = 0.0 if original == mean else math.copysign(math.inf, original - mean)
    p_value = (1 + int(np.count_nonzero(values >= original))) / (n_surrogates + 1)

    logger.info(
        "surrogates %s -> %s: original %.6f, mean %.6f, std %.6f, z %.2f",
        source.name,
        target.name,
        original,
        mean,
        std,
        z_score,
    )
    return SurrogateSummary(original, mean, std, z_score, p_value, values, offsets)
