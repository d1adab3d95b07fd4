"""Set-valued tracking metrics: OSPA distance, cardinality statistics, and
error CDFs for matched pairs."""

from __future__ import annotations

import numpy as np
from scipy.optimize import linear_sum_assignment

from .config import OspaConfig


def ospa(truth: np.ndarray, estimates: np.ndarray, config: OspaConfig | None = None) -> float:
    """OSPA distance between two planar point sets.

    truth/estimates: (m, 2) and (n, 2) arrays, orderings irrelevant. Both
    empty gives 0; one empty gives the cut-off.
    """
    cfg = config if config is not None else OspaConfig()
    c, p = cfg.cutoff, cfg.order
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    m, n = len(truth), len(estimates)
    if m == 0 and n == 0:
        return 0.0
    if m == 0 or n == 0:
        return float(c)
    if m > n:
        truth, estimates = estimates, truth
        m, n = n, m
    d = np.linalg.norm(truth[:, None, :] - estimates[None, :, :], axis=-1)
    cost = np.minimum(d, c) ** p
    rows, cols = linear_sum_assignment(cost)
    total = cost[rows, cols].sum() + (n - m) * c**p
    return float((total / n) ** (1.0 / p))


def matched_errors(truth: np.ndarray, estimates: np.ndarray, config: OspaConfig | None = None) -> np.ndarray:
    """Distances of OSPA-matched pairs closer than the cut-off.

    The pool behind the localization error CDF: pairs at or beyond the
    cut-off count as cardinality errors, not localization errors.
    """
    cfg = config if config is not None else OspaConfig()
    truth = np.asarray(truth, dtype=float).reshape(-1, 2)
    estimates = np.asarray(estimates, dtype=float).reshape(-1, 2)
    if len(truth) == 0 or len(estimates) == 0:
        return np.zeros(0)
    d = np.linalg.norm(truth[:, None, :] - estimates[None, :, :], axis=-1)
    cost = np.minimum(d, cfg.cutoff) ** cfg.order
    rows, cols = linear_sum_assignment(cost)
    matched = d[rows, cols]
    return matched[matched < cfg.cutoff]


def cardinality_stats(run_counts, truth_counts) -> dict:
    """Per-step mean/std of estimated cardinality across runs, plus truth.

    run_counts: (runs, steps) histories of estimated set sizes; truth_counts
    the (steps,) ground-truth cardinality.
    """
    runs = np.asarray(run_counts, dtype=float)
    if runs.ndim == 1:
        runs = runs[None, :]
    if runs.shape[0] == 0:
        raise ValueError("need at least one run")
    truth = np.asarray(truth_counts, dtype=float)
    if truth.shape != (runs.shape[1],):
        raise ValueError("truth length must match run history length")
    std = (runs.std(axis=0, ddof=1) if runs.shape[0] > 1
           else np.zeros(runs.shape[1]))
    return {
        "mean": runs.mean(axis=0),
        "std": std,
        "truth": truth,
        "mean_abs_error": float(np.mean(np.abs(runs - truth[None, :]))),
    }


def error_cdf(errors: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF support and values for a pool of error magnitudes."""
    errs = np.sort(np.asarray(errors, dtype=float))
    if len(errs) == 0:
        return np.zeros(0), np.zeros(0)
    cdf = np.arange(1, len(errs) + 1) / len(errs)
    return errs, cdf


def cdf_quantile(errors: np.ndarray, q: float) -> float:
    """Quantile of the error pool; empty pools give nan."""
    errs = np.asarray(errors, dtype=float)
    if len(errs) == 0:
        return float("nan")
    return float(np.quantile(errs, q))
