# Copyright 2025 Canonical Ltd.
# See LICENSE file for licensing details.

"""Module for deterministic sampling and binomial confidence bounds."""

import logging

import numpy as np
from scipy import stats

from filippov_toolkit.expr import FloatArray

logger = logging.getLogger(__name__)

_KEY_MODULUS = 2**64


def generator(seed: int, stream: int = 0) -> np.random.Generator:
    """Create a counter based generator keyed by (seed, stream).

    Args:
        seed: The run seed.
        stream: The substream identifier.

    Returns:
        A Philox backed generator; equal keys give equal sequences on every platform.
    """
    key = np.array([seed % _KEY_MODULUS, stream % _KEY_MODULUS], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def uniform_in_box(
    rng: np.random.Generator, lower: FloatArray, upper: FloatArray, count: int
) -> FloatArray:
    """Draw points uniformly from a box.

    Args:
        rng: The generator.
        lower: The lower corner.
        upper: The upper corner.
        count: The number of points.

    Returns:
        Points of shape (count, m).
    """
    lower = np.asarray(lower, dtype=np.float64)
    upper = np.asarray(upper, dtype=np.float64)
    return lower + (upper - lower) * rng.random((count, lower.shape[0]))


def normal_quantile(confidence: float) -> float:
    """Two sided standard normal quantile.

    Args:
        confidence: The confidence level, e.g. 0.99.

    Returns:
        The quantile z with P(|Z| <= z) = confidence.
    """
    return float(stats.norm.ppf(0.5 + confidence / 2.0))


def proportion_half_width(hits: int, trials: int, confidence: float) -> float:
    """Normal approximation half width of a hit proportion.

    Args:
        hits: Number of successes.
        trials: Number of trials.
        confidence: The confidence level.

    Returns:
        Half width of the confidence interval of the proportion.
    """
    proportion = hits / trials
    return normal_quantile(confidence) * float(np.sqrt(proportion * (1.0 - proportion) / trials))


def lower_confidence_bound(hits: int, trials: int, confidence: float) -> float:
    """One sided Clopper-Pearson lower bound of a hit proportion.

    Args:
        hits: Number of successes.
        trials: Number of trials.
        confidence: The confidence level.

    Returns:
        The exact binomial lower bound, 0 without hits.
    """
    if hits == 0:
        return 0.0
    return float(stats.beta.ppf(1.0 - confidence, hits, trials - hits + 1))
