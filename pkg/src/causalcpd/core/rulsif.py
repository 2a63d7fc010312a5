"""
Relative Pearson divergence between the two halves of a sliding window.

The relative mixture is q = (1 - ab) p + ab p' throughout, with p the law of
the first half and p' the law of the second. On a finite domain the plug-in
estimator is exact given the frequencies; the kernel estimator fits the
relative density ratio r = p / q with a Gaussian-kernel linear model by
regularized least squares.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist, pdist

from causalcpd.utils.error_handler import EstimationError

from .constants import SIMPLEX_TOLERANCE
from .segments import Segment
from .types import Estimator, KernelParams, PeParams

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PeSeries:
    """Divergence score per window of one segment, with the windows' original-time spans."""

    component: int
    config_index: int
    scores: np.ndarray
    first_spans: np.ndarray  # (m, 2): times of the first and last sample of W1_i
    second_spans: np.ndarray  # (m, 2): times of the first and last sample of W2_i
    flag: Optional[str] = None

    def __len__(self) -> int:
        return int(len(self.scores))

    @property
    def segment_ref(self) -> Tuple[int, int]:
        return (self.component, self.config_index)

    @property
    def is_empty(self) -> bool:
        return len(self) == 0

    def midpoints(self) -> np.ndarray:
        """Midpoint between the last sample of W1_i and the first of W2_i."""
        if self.is_empty:
            return np.empty(0)
        return (self.first_spans[:, 1] + self.second_spans[:, 0]) / 2.0


def n_windows(t_sub: int, n_w: int, n_st: int) -> int:
    if t_sub < 2 * n_w:
        return 0
    return (t_sub - 2 * n_w) // n_st + 1


def _check_simplex(name: str, v: np.ndarray) -> None:
    if v.ndim != 1 or np.any(v < 0) or abs(v.sum() - 1.0) > SIMPLEX_TOLERANCE:
        raise ValueError(f"{name} is not a probability vector: {v.tolist()}")


def relative_pe(p: np.ndarray, p_prime: np.ndarray, alpha_beta: float) -> np.ndarray:
    """
    PE along the last axis, written as 1/2 sum (ab (p - p'))^2 / q.

    Equal to 1/2 sum p^2/q - 1/2 but nonnegative and exactly zero at ab = 0
    or p == p' in floating point. +inf where q = 0 but p > 0.
    """
    q = (1.0 - alpha_beta) * p + alpha_beta * p_prime
    diff = alpha_beta * (p - p_prime)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(q > 0, diff * diff / np.where(q > 0, q, 1.0), 0.0)
    result = 0.5 * terms.sum(axis=-1)
    unbounded = np.any((q <= 0) & (p > 0), axis=-1)
    return np.where(unbounded, np.inf, result)


def pe_closed_form(p: Sequence[float], p_prime: Sequence[float], alpha_beta: float) -> float:
    """
    Relative Pearson divergence of p from q = (1 - ab) p + ab p'.

    Returns ``1/2 * sum_h p_h^2 / q_h - 1/2``, or +inf when some q_h is zero
    while p_h is positive.
    """
    p = np.asarray(p, dtype=float)
    p_prime = np.asarray(p_prime, dtype=float)
    if p.shape != p_prime.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {p_prime.shape}")
    if not 0.0 <= alpha_beta <= 1.0:
        raise ValueError(f"alpha_beta must lie in [0, 1], got {alpha_beta}")
    _check_simplex("p", p)
    _check_simplex("p_prime", p_prime)
    value = float(relative_pe(p, p_prime, alpha_beta))
    if np.isinf(value):
        logger.warning("pe_closed_form: q vanishes where p > 0, divergence is unbounded")
    return value


def _frequencies(codes: np.ndarray, s: int) -> np.ndarray:
    codes = np.asarray(codes, dtype=np.int64)
    return np.bincount(codes, minlength=s)[:s] / len(codes)


def pe_plugin(
    first_half: Sequence[int],
    second_half: Sequence[int],
    alpha: float,
    n_symbols: Optional[int] = None,
) -> float:
    """Plug-in PE: the closed form evaluated at the two halves' empirical frequencies."""
    first = np.asarray(first_half, dtype=np.int64)
    second = np.asarray(second_half, dtype=np.int64)
    if len(first) == 0 or len(second) == 0:
        raise ValueError("both halves must be nonempty")
    s = n_symbols if n_symbols is not None else int(max(first.max(), second.max())) + 1
    return pe_closed_form(_frequencies(first, s), _frequencies(second, s), alpha)


# ---------------------------------------------------------------------------
# Kernel estimator
# ---------------------------------------------------------------------------
def median_width(pooled: np.ndarray, floor: float) -> float:
    """Median pairwise distance of the pooled window, never below ``floor``."""
    pooled = np.asarray(pooled, dtype=float).reshape(-1, 1)
    if len(pooled) < 2:
        return floor
    return max(float(np.median(pdist(pooled))), floor)


def _gaussian_kernel(x: np.ndarray, centers: np.ndarray, sigma: float) -> np.ndarray:
    d2 = cdist(x.reshape(-1, 1), centers.reshape(-1, 1), "sqeuclidean")
    return np.exp(-d2 / (2.0 * sigma * sigma))


def _centers(first: np.ndarray, max_centers: int) -> np.ndarray:
    b = min(max_centers, len(first))
    positions = np.linspace(0, len(first) - 1, b).round().astype(np.int64)
    return first[positions]


def _fit_ratio(
    first: np.ndarray,
    second: np.ndarray,
    centers: np.ndarray,
    sigma: float,
    ridge: float,
    alpha: float,
) -> np.ndarray:
    """Coefficients of r(x) = sum_l theta_l k(x, c_l) from (H + lambda I) theta = h."""
    k_first = _gaussian_kernel(first, centers, sigma)
    k_second = _gaussian_kernel(second, centers, sigma)
    H = (1.0 - alpha) * (k_first.T @ k_first) / len(first) + alpha * (k_second.T @ k_second) / len(second)
    h = k_first.mean(axis=0)
    try:
        return linalg.solve(H + ridge * np.eye(len(centers)), h, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as e:
        raise EstimationError(f"kernel ratio system could not be solved: {e}") from e


def _held_out_loss(first, second, centers, theta, sigma, alpha) -> float:
    r_first = _gaussian_kernel(first, centers, sigma) @ theta
    r_second = _gaussian_kernel(second, centers, sigma) @ theta
    return 0.5 * ((1.0 - alpha) * np.mean(r_first**2) + alpha * np.mean(r_second**2)) - np.mean(r_first)


def pe_kernel_cv(
    first_half: Sequence[float],
    second_half: Sequence[float],
    params: KernelParams,
    alpha: float,
) -> Tuple[float, float]:
    """Pick (sigma, lambda) on the grid minimizing the k-fold held-out squared loss."""
    first = np.asarray(first_half, dtype=float)
    second = np.asarray(second_half, dtype=float)
    base = params.sigma or median_width(np.concatenate([first, second]), params.sigma_floor)
    folds_first = np.arange(len(first)) % params.cv_folds
    folds_second = np.arange(len(second)) % params.cv_folds

    best: Tuple[float, float, float] = (np.inf, base, params.ridge)
    for factor in params.cv_sigma_factors:
        sigma = max(base * factor, params.sigma_floor)
        for ridge in params.cv_ridges:
            losses = []
            for fold in range(params.cv_folds):
                train_first, test_first = first[folds_first != fold], first[folds_first == fold]
                train_second, test_second = second[folds_second != fold], second[folds_second == fold]
                if min(len(train_first), len(test_first), len(train_second), len(test_second)) == 0:
                    continue
                centers = _centers(train_first, params.max_centers)
                theta = _fit_ratio(train_first, train_second, centers, sigma, ridge, alpha)
                losses.append(_held_out_loss(test_first, test_second, centers, theta, sigma, alpha))
            if losses and np.mean(losses) < best[0]:
                best = (float(np.mean(losses)), sigma, ridge)
    logger.debug(f"kernel CV selected sigma={best[1]:.4g}, lambda={best[2]:.4g}")
    return best[1], best[2]


def pe_kernel(
    first_half: Sequence[float],
    second_half: Sequence[float],
    params: KernelParams,
    alpha: float,
) -> float:
    """
    Kernel (RuLSIF) estimate of the relative PE divergence.

    ``-(1-a)/2 mean_1[r^2] - a/2 mean_2[r^2] + mean_1[r] - 1/2`` with r fitted
    on both halves.
    """
    first = np.asarray(first_half, dtype=float)
    second = np.asarray(second_half, dtype=float)
    if len(first) == 0 or len(second) == 0:
        raise ValueError("both halves must be nonempty")

    if params.cross_validate:
        sigma, ridge = pe_kernel_cv(first, second, params, alpha)
    else:
        sigma = params.sigma or median_width(np.concatenate([first, second]), params.sigma_floor)
        ridge = params.ridge

    centers = _centers(first, params.max_centers)
    theta = _fit_ratio(first, second, centers, sigma, ridge, alpha)
    r_first = _gaussian_kernel(first, centers, sigma) @ theta
    r_second = _gaussian_kernel(second, centers, sigma) @ theta
    score = (
        -0.5 * (1.0 - alpha) * np.mean(r_first**2)
        - 0.5 * alpha * np.mean(r_second**2)
        + np.mean(r_first)
        - 0.5
    )
    if not np.isfinite(score):
        raise EstimationError(f"kernel PE estimate is not finite (sigma={sigma}, lambda={ridge})")
    return float(score)


# ---------------------------------------------------------------------------
# Sliding windows
# ---------------------------------------------------------------------------
def _plugin_scores(values: np.ndarray, n_w: int, n_st: int, m: int, alpha: float) -> np.ndarray:
    """All window scores at once from cumulative symbol counts."""
    s = int(values.max()) + 1
    one_hot = np.zeros((len(values) + 1, s))
    one_hot[np.arange(1, len(values) + 1), values] = 1.0
    cumulative = np.cumsum(one_hot, axis=0)
    starts = np.arange(m) * n_st
    p = (cumulative[starts + n_w] - cumulative[starts]) / n_w
    p_prime = (cumulative[starts + 2 * n_w] - cumulative[starts + n_w]) / n_w
    return relative_pe(p, p_prime, alpha)


def pe_series(seg: Segment, params: PeParams) -> PeSeries:
    """
    Score every window i of the segment.

    W1_i covers positions [i n_st, i n_st + n_w) and W2_i the next n_w
    positions. Segments shorter than 2 n_w give an empty, flagged series.
    """
    n_w, n_st = params.n_w, params.n_st
    m = n_windows(seg.length, n_w, n_st)
    if m == 0:
        empty_spans = np.empty((0, 2), dtype=np.int64)
        return PeSeries(
            component=seg.component,
            config_index=seg.config_index,
            scores=np.empty(0),
            first_spans=empty_spans,
            second_spans=empty_spans,
            flag=f"too_short: T_sub={seg.length} < 2*n_w={2 * n_w}",
        )

    values = np.asarray(seg.values, dtype=np.int64)
    if params.estimator is Estimator.plugin:
        scores = _plugin_scores(values, n_w, n_st, m, params.alpha)
    else:
        scores = np.empty(m)
        for i in range(m):
            start = i * n_st
            scores[i] = pe_kernel(
                values[start : start + n_w],
                values[start + n_w : start + 2 * n_w],
                params.kernel,
                params.alpha,
            )

    starts = np.arange(m) * n_st
    times = seg.time_indices
    first_spans = np.stack([times[starts], times[starts + n_w - 1]], axis=1)
    second_spans = np.stack([times[starts + n_w], times[starts + 2 * n_w - 1]], axis=1)
    flag = None
    if np.isposinf(scores).any():
        flag = "unbounded_ratio"
        logger.warning(
            f"segment ({seg.component}, {seg.config_index}): +inf divergence, the halves have disjoint support"
        )
    return PeSeries(
        component=seg.component,
        config_index=seg.config_index,
        scores=scores,
        first_spans=first_spans,
        second_spans=second_spans,
        flag=flag,
    )
