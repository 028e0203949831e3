"""Statistical-parity metrics for a single ranking.

Three families:

* prefix fairness: log-discounted distribution distances over successive
  prefixes (every ``step`` positions, plus the full list), normalized by the
  worst arrangement of the same composition; 0 is fair, 1 maximally unfair.
* FAIR: mean binomial probability that each prefix does not significantly
  under-represent the protected group; 1 is fair, over-representation is
  never penalized.
* attention-weighted rank fairness (AWRF): distance between the normalized
  group-exposure distribution and a target distribution; 0 is fair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import binom

from .core import (
    AlignmentMatrix,
    Degenerate,
    DegenerateDenominator,
    Direction,
    FairRankError,
    GroupSpace,
    Ranking,
    RelevanceTable,
    TargetDistribution,
    UndefinedNormalizer,
    protected_mask,
    restrict_to_labeled,
)
from .distance import DISTANCE_KINDS, delta, delta_kl
from .exposure import WeightModel, group_exposure, position_weights


@dataclass(frozen=True)
class SingleListResult:
    """A single-ranking metric value with its fairness direction.

    ``degenerate`` names the edge case when the input admits no meaningful
    score; the value is then NaN, or a defined-by-convention constant (the
    short-list and undefined-normalizer cases score 0, maximally fair).
    """

    value: float
    direction: Direction
    degenerate: str | None = None

    @property
    def ok(self) -> bool:
        return self.degenerate is None


def prefix_schedule(n: int, step: int) -> list[int]:
    """Prefix lengths step, 2*step, ..., plus n itself when not a multiple."""
    if step < 1:
        raise FairRankError(f"step must be >= 1, got {step}")
    ks = list(range(step, n + 1, step))
    if not ks or ks[-1] != n:
        ks.append(n)
    return ks


def _prefix_raw_binomial(mask: np.ndarray, p_hat: float, dist: str, step: int) -> float:
    """Sum over the prefix schedule of |delta(prefix share, p_hat)| / log2(i)."""
    ks = np.array(prefix_schedule(mask.size, step))
    shares = np.cumsum(mask)[ks - 1] / ks
    if dist == "nd":
        deltas = shares - p_hat
    else:  # rd
        if p_hat >= 1:
            raise DegenerateDenominator("target places all mass on the protected group")
        if np.any(shares >= 1):
            raise DegenerateDenominator("a prefix contains no unprotected documents")
        deltas = shares / (1.0 - shares) - p_hat / (1.0 - p_hat)
    return float(np.sum(np.abs(deltas) / np.log2(ks)))


def _prefix_raw_kl(rows: np.ndarray, target: np.ndarray, step: int) -> float:
    n = rows.shape[0]
    cum = np.cumsum(rows, axis=0)
    raw = 0.0
    for i in prefix_schedule(n, step):
        raw += delta_kl(cum[i - 1] / i, target) / math.log2(i)
    return raw


def pref_normalizer(
    n: int,
    n_protected: int,
    p_hat: float,
    dist: str = "nd",
    step: int = 10,
) -> float:
    """Worst-case raw prefix score over arrangements of the same composition.

    Checked arrangements: all protected first, all protected last.  For the
    nd distance the prefix share is monotone in how early protected items
    sit, so one of the extremes is exactly the maximum; for rd it is an upper
    -bound heuristic (arrangements whose prefixes make rd undefined are
    skipped).  Raises when no arrangement can score above zero: such a
    composition admits no unfairness.
    """
    if not 0 <= n_protected <= n:
        raise FairRankError("n_protected must lie in [0, n]")
    best: float | None = None
    for first in (True, False):
        mask = np.zeros(n, dtype=bool)
        if first:
            mask[:n_protected] = True
        else:
            mask[n - n_protected:] = True
        try:
            raw = _prefix_raw_binomial(mask, p_hat, dist, step)
        except Degenerate:
            continue
        best = raw if best is None else max(best, raw)
    if best is None:
        raise Degenerate("no extreme arrangement is scorable under this distance")
    if best <= 0:
        raise UndefinedNormalizer("composition admits no prefix unfairness")
    return best


def _kl_normalizer(rows: np.ndarray, target: np.ndarray, step: int) -> float:
    """Worst raw score over per-group sorted arrangements of the rows."""
    best = 0.0
    for g in range(rows.shape[1]):
        order = np.argsort(rows[:, g], kind="stable")
        for arrangement in (rows[order], rows[order[::-1]]):
            best = max(best, _prefix_raw_kl(arrangement, target, step))
    if best <= 0:
        raise UndefinedNormalizer("composition admits no prefix unfairness")
    return best


def pref_fairness(
    ranking: Ranking,
    alignment: AlignmentMatrix,
    groups: GroupSpace,
    target: TargetDistribution | None = None,
    dist: str = "nd",
    step: int = 10,
    threshold: float = 0.5,
) -> SingleListResult:
    """Normalized prefix unfairness in [0, 1]; 0 is fair.

    ``target`` defaults to the list's own composition (so the score asks how
    evenly that composition is spread across prefixes); pass an explicit
    target to compare against a global distribution instead.  A list with
    fewer than ``step`` labeled documents is maximally fair by convention.
    """
    if dist not in DISTANCE_KINDS:
        raise FairRankError(f"unknown distance function {dist!r}")
    restricted = restrict_to_labeled(ranking, alignment)
    if restricted.is_empty:
        return SingleListResult(math.nan, Direction.ZERO_IS_FAIR, degenerate="no_labeled_docs")
    n = len(restricted)
    if n < step:
        return SingleListResult(0.0, Direction.ZERO_IS_FAIR, degenerate="short_list")

    if dist == "kl":
        rows = np.stack([alignment.row(d) for d in restricted.docs])
        tvec = target.probs if target is not None else rows.mean(axis=0)
        raw = _prefix_raw_kl(rows, tvec, step)
        try:
            z = _kl_normalizer(rows, tvec, step)
        except UndefinedNormalizer:
            return SingleListResult(0.0, Direction.ZERO_IS_FAIR, degenerate="undefined_normalizer")
    else:
        mask = protected_mask(restricted, alignment, groups, threshold)
        n_protected = int(mask.sum())
        p_hat = target.scalar(groups.require_protected()) if target is not None else n_protected / n
        raw = _prefix_raw_binomial(mask, p_hat, dist, step)
        try:
            z = pref_normalizer(n, n_protected, p_hat, dist, step)
        except UndefinedNormalizer:
            return SingleListResult(0.0, Direction.ZERO_IS_FAIR, degenerate="undefined_normalizer")

    # The extremes bound every arrangement for nd; rd/kl are heuristic, so
    # guard against a raw score nosing past the estimated maximum.
    return SingleListResult(min(raw / z, 1.0), Direction.ZERO_IS_FAIR)


def fair_score(
    mask: np.ndarray,
    p_hat: float,
    paper_verbatim: bool = False,
) -> SingleListResult:
    """Mean binomial probability that each prefix's protected count is acceptable.

    ``mask`` is the protected-membership sequence in rank order (labeled
    documents only).  The default uses the full binomial CDF
    P(X <= c_k); ``paper_verbatim`` drops the X = 0 term from the sum.
    1 is fair; over-representation is not penalized.
    """
    mask = np.asarray(mask, dtype=bool)
    if mask.size == 0:
        return SingleListResult(math.nan, Direction.ONE_IS_FAIR, degenerate="no_labeled_docs")
    if not 0 < p_hat < 1:
        raise FairRankError(f"p_hat must lie in (0, 1), got {p_hat}")
    n = mask.size
    ks = np.arange(1, n + 1)
    counts = np.cumsum(mask)
    probs = binom.cdf(counts, ks, p_hat)
    if paper_verbatim:
        probs = np.where(counts >= 1, probs - (1.0 - p_hat) ** ks, 0.0)
    return SingleListResult(float(np.mean(probs)), Direction.ONE_IS_FAIR)


def awrf(
    ranking: Ranking,
    alignment: AlignmentMatrix,
    groups: GroupSpace,
    model: WeightModel,
    target: TargetDistribution,
    dist: str = "nd",
    relevance: RelevanceTable | None = None,
    signed: bool = False,
) -> SingleListResult:
    """Distance between attention-weighted group exposure and the target.

    Exposure is normalized to a distribution before comparison.  The default
    reports the unfairness magnitude |delta|; ``signed`` exposes the raw
    signed value for the binomial distances (positive = protected group
    over-exposed).
    """
    weights = position_weights(model, ranking, relevance)
    try:
        eps = group_exposure(ranking, alignment, weights, groups, normalize=True)
    except Degenerate as exc:
        return SingleListResult(math.nan, Direction.ZERO_IS_FAIR, degenerate=exc.reason)
    p = groups.protected_index if dist != "kl" else None
    d = delta(dist, eps, target.probs, protected_index=p)
    return SingleListResult(d if signed else abs(d), Direction.ZERO_IS_FAIR)
