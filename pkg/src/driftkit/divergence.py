"""Divergence measures over sparse relative-popularity distributions.

Standard Jensen-Shannon divergence is reported in bits (base-2 logs), which
bounds it between 0 (identical distributions) and 1 (disjoint supports). The
per-item decomposition uses

    partial_i = 1/2 * (p_i log2(2 p_i / (p_i + q_i)) + q_i log2(2 q_i / (p_i + q_i)))

with 0 * log(.) == 0; the sum of partials equals the entropy form
H(M) - (H(P) + H(Q)) / 2 with M = (P + Q) / 2. The 1/2 factor is required for
that agreement and for the 1-bit bound: without it the disjoint case would
score 2 rather than 1.

All sums go through math.fsum, so results are independent of key order and
symmetry holds bit-exactly. Inputs can be RelativeDistribution objects or
plain mappings of item id to probability.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

JSD_BITS = "jsd_bits"
JACCARD = "jaccard"

DEFAULT_GROUP_BOUNDS = (100, 1000, 10000, 50000)


def alpha_label(alpha: float) -> str:
    return f"jsd_alpha_norm({alpha:g})"


@dataclass(frozen=True)
class Measure:
    """Which divergence to compute: 'jsd' (bits), 'jsd_alpha' (needs alpha), or 'jaccard'."""

    kind: str = "jsd"
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in ("jsd", "jsd_alpha", "jaccard"):
            raise ValueError(f"unknown measure kind {self.kind!r}")
        if self.kind == "jsd_alpha" and self.alpha is None:
            raise ValueError("jsd_alpha requires alpha")

    @property
    def label(self) -> str:
        if self.kind == "jsd":
            return JSD_BITS
        if self.kind == "jaccard":
            return JACCARD
        return alpha_label(self.alpha)


@dataclass(frozen=True)
class DriftValue:
    """One divergence value with its measure tag and the input loan totals."""

    value: float
    measure: str = JSD_BITS
    n_left: int | None = None
    n_right: int | None = None


class ContributionBreakdown:
    """Per-item partial JSD in bits, plus the ranking they induce.

    ``total_bits`` is the exact sum of the partials; ``ranking`` lists item
    ids by descending partial (ties by id) and is computed on first access.
    Group bounds are the rank bands used for contribution-group analysis
    (1-100, 101-1K, 1K-10K, 10K-50K, rest).
    """

    def __init__(
        self,
        partials: dict[str, float],
        total_bits: float,
        group_bounds: tuple[int, ...] = DEFAULT_GROUP_BOUNDS,
        ranking: list[str] | None = None,
    ):
        self.partials = partials
        self.total_bits = total_bits
        self.group_bounds = group_bounds
        self._ranking = ranking

    @property
    def ranking(self) -> list[str]:
        if self._ranking is None:
            ids = list(self.partials)
            parts = np.fromiter(self.partials.values(), dtype=np.float64, count=len(ids))
            self._ranking = _ranked_ids(ids, parts)
        return self._ranking

    @ranking.setter
    def ranking(self, value: list[str]):
        self._ranking = value

    def group_of_rank(self, rank: int) -> int:
        """1-based rank to 1-based group number."""
        for g, bound in enumerate(self.group_bounds, start=1):
            if rank <= bound:
                return g
        return len(self.group_bounds) + 1


def _probs(dist) -> Mapping[str, float]:
    return getattr(dist, "probs", dist)


def _aligned(p_map: Mapping[str, float], q_map: Mapping[str, float]):
    """Union-support alignment of two sparse mappings into paired arrays."""
    ids = list(p_map)
    extra = [k for k in q_map if k not in p_map]
    n_p, n = len(ids), len(ids) + len(extra)
    ids.extend(extra)
    p = np.zeros(n, dtype=np.float64)
    p[:n_p] = np.fromiter(p_map.values(), dtype=np.float64, count=n_p)
    q = np.fromiter((q_map.get(k, 0.0) for k in ids), dtype=np.float64, count=n)
    return ids, p, q


def _fsum(values: np.ndarray) -> float:
    return math.fsum(values.tolist())


def _entropy_bits(p: np.ndarray) -> float:
    nz = p[p > 0.0]
    if nz.size == 0:
        return 0.0
    return -_fsum(nz * np.log2(nz)) + 0.0


def shannon_entropy(dist) -> float:
    """H(P) = -sum p_i log2 p_i, in bits."""
    p_map = _probs(dist)
    p = np.fromiter(p_map.values(), dtype=np.float64, count=len(p_map))
    return _entropy_bits(p)


def _jsd_bits_from_arrays(p: np.ndarray, q: np.ndarray) -> float:
    m = 0.5 * (p + q)
    value = _entropy_bits(m) - 0.5 * (_entropy_bits(p) + _entropy_bits(q))
    # rounding dust can stray a few ulp past the [0, 1] bits bound; clip it
    if value <= 0.0:
        return 0.0
    return value if value < 1.0 else min(value, 1.0)


def jsd(P, Q, n_left: int | None = None, n_right: int | None = None) -> DriftValue:
    """Jensen-Shannon divergence in bits, via the entropy form over the union support."""
    p_map, q_map = _probs(P), _probs(Q)
    if not p_map or not q_map:
        raise ValueError("jsd needs two non-empty distributions")
    _, p, q = _aligned(p_map, q_map)
    return DriftValue(_jsd_bits_from_arrays(p, q), JSD_BITS, n_left, n_right)


def _partial_terms(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    s = p + q
    safe = np.where(s > 0.0, s, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        tp = np.where(p > 0.0, p * np.log2(np.where(p > 0.0, 2.0 * p / safe, 1.0)), 0.0)
        tq = np.where(q > 0.0, q * np.log2(np.where(q > 0.0, 2.0 * q / safe, 1.0)), 0.0)
    # each partial is nonnegative by the log-sum inequality; clip rounding dust
    return np.maximum(0.5 * (tp + tq), 0.0)


def _ranked_ids(ids: list, parts: np.ndarray) -> list:
    """Item ids by descending partial, ties resolved by id."""
    order = np.argsort(-parts, kind="stable")
    ranked = [ids[i] for i in order.tolist()]
    if len(ranked) > 1:
        values = parts[order]
        bounds = np.flatnonzero(np.diff(values) != 0.0)
        starts = np.concatenate(([0], bounds + 1))
        ends = np.concatenate((bounds + 1, [len(ranked)]))
        for j in np.flatnonzero(ends - starts > 1).tolist():
            s, e = int(starts[j]), int(ends[j])
            ranked[s:e] = sorted(ranked[s:e])
    return ranked


def jsd_with_contributions(
    P, Q, n_left: int | None = None, n_right: int | None = None
) -> tuple[DriftValue, ContributionBreakdown]:
    """JSD plus each item's additive share of it.

    The returned DriftValue is the entropy-form JSD; the breakdown's
    ``total_bits`` is the exact partial sum. The two agree to ~1e-15.
    Items carrying no mass in either input contribute nothing and are
    excluded. Ranking ties break by item id.
    """
    p_map, q_map = _probs(P), _probs(Q)
    if not p_map or not q_map:
        raise ValueError("jsd needs two non-empty distributions")
    ids, p, q = _aligned(p_map, q_map)
    parts = _partial_terms(p, q)
    partials = dict(zip(ids, parts.tolist()))
    total = math.fsum(parts.tolist())
    value = _jsd_bits_from_arrays(p, q)
    return (
        DriftValue(value, JSD_BITS, n_left, n_right),
        ContributionBreakdown(partials, total),
    )


def _tsallis_from_array(p: np.ndarray, alpha: float) -> float:
    nz = p[p > 0.0]
    return (_fsum(nz**alpha) - 1.0) / (1.0 - alpha) + 0.0


def tsallis_entropy(dist, alpha: float) -> float:
    """Order-alpha entropy (sum p_i^alpha - 1) / (1 - alpha), logarithm-free units.

    alpha = 1 is the Shannon limit and must go through shannon_entropy instead.
    """
    if alpha < 0:
        raise ValueError("alpha must be >= 0")
    if alpha == 1:
        raise ValueError("order 1 is the Shannon limit; use shannon_entropy")
    p_map = _probs(dist)
    p = np.fromiter(p_map.values(), dtype=np.float64, count=len(p_map))
    return _tsallis_from_array(p, alpha)


def jsd_alpha_normalized(
    P, Q, alpha: float, n_left: int | None = None, n_right: int | None = None
) -> DriftValue:
    """Generalized JSD of order alpha divided by its analytic maximum, in [0, 1].

    alpha > 1 emphasizes changes among popular items, alpha < 1 among rare
    ones. Order 1 is handled by its limit (the maximum tends to ln 2, so the
    value equals the standard JSD in bits) and order 0 by its closed form,
    one minus the Dice overlap of the supports.
    """
    if not 0.0 <= alpha <= 2.0:
        warnings.warn(
            f"alpha={alpha:g} outside [0, 2]; the square root of the result is "
            "not a metric there",
            stacklevel=2,
        )
    p_map, q_map = _probs(P), _probs(Q)
    if not p_map or not q_map:
        raise ValueError("divergence needs two non-empty distributions")
    label = alpha_label(alpha)

    if alpha == 1.0:
        return DriftValue(jsd(p_map, q_map).value, label, n_left, n_right)
    if alpha == 0.0:
        sp = {k for k, v in p_map.items() if v > 0.0}
        sq = {k for k, v in q_map.items() if v > 0.0}
        value = 1.0 - 2.0 * len(sp & sq) / (len(sp) + len(sq))
        return DriftValue(value, label, n_left, n_right)

    _, p, q = _aligned(p_map, q_map)
    m = 0.5 * (p + q)
    ha_p = _tsallis_from_array(p, alpha)
    ha_q = _tsallis_from_array(q, alpha)
    numerator = _tsallis_from_array(m, alpha) - 0.5 * (ha_p + ha_q)
    if numerator <= 0.0:
        return DriftValue(0.0, label, n_left, n_right)
    maximum = 0.5 * (2.0 ** (1.0 - alpha) - 1.0) * (ha_p + ha_q + 2.0 / (1.0 - alpha))
    value = numerator / maximum
    return DriftValue(min(max(value, 0.0), 1.0), label, n_left, n_right)


def jaccard_distance(
    P, Q, n_left: int | None = None, n_right: int | None = None
) -> DriftValue:
    """One minus the Jaccard overlap of the two supports; blind to popularity."""
    p_map, q_map = _probs(P), _probs(Q)
    sp = {k for k, v in p_map.items() if v > 0.0}
    sq = {k for k, v in q_map.items() if v > 0.0}
    if not sp or not sq:
        raise ValueError("jaccard_distance needs two non-empty supports")
    inter = len(sp & sq)
    union = len(sp) + len(sq) - inter
    return DriftValue(1.0 - inter / union, JACCARD, n_left, n_right)


def divergence_of(measure: Measure, P, Q, n_left=None, n_right=None) -> DriftValue:
    """Dispatch a Measure to its implementation."""
    if measure.kind == "jsd":
        return jsd(P, Q, n_left, n_right)
    if measure.kind == "jaccard":
        return jaccard_distance(P, Q, n_left, n_right)
    return jsd_alpha_normalized(P, Q, measure.alpha, n_left, n_right)
