"""Core domain types shared by every metric module.

Identifiers are plain strings.  Rankings, group spaces, alignment tables,
relevance judgments, and ranking sequences are small immutable containers;
once constructed they are safe to share read-only across threads.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Mapping, Sequence

import numpy as np

# Absolute tolerance for "this vector is a probability distribution" checks.
DISTRIBUTION_ATOL = 1e-9


class FairRankError(Exception):
    """Base class for all errors raised by fairrank."""


class Degenerate(FairRankError):
    """The input admits no meaningful metric value (edge case, not a bug)."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


class DegenerateDenominator(Degenerate):
    """A ratio's denominator is zero (e.g. no unprotected exposure)."""


class DegenerateUtility(Degenerate):
    """A group's utility is zero, making a utility-normalized ratio undefined."""


class UndefinedNormalizer(Degenerate):
    """No arrangement of the list can be unfair, so the normalizer is zero."""


class NoPairs(Degenerate):
    """No document pairs satisfy the requested group conditioning."""


class EmptyGroup(Degenerate):
    """A group has no members in any request's candidate pool."""


class AllDegenerate(FairRankError):
    """Every request was degenerate; the aggregate is undefined."""


class UnknownRequest(FairRankError):
    """A referenced request id is absent from the run."""


class ParseError(FairRankError):
    """Malformed input file; carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(FairRankError):
    """Invalid evaluation configuration; carries the offending key path."""

    def __init__(self, message: str, path: str | None = None):
        if path is not None:
            message = f"{path}: {message}"
        super().__init__(message)
        self.path = path


class Direction(enum.Enum):
    """Which end of a metric's range is the fair one."""

    ZERO_IS_FAIR = "ZeroIsFair"
    ONE_IS_FAIR = "OneIsFair"
    HIGHER_IS_BETTER = "HigherIsBetter"


@dataclass(frozen=True)
class Ranking:
    """An ordered list of distinct document ids for one request.

    ``positions`` holds the original 1-based rank of each document and is
    only set on rankings derived by filtering (see ``restrict_to_labeled``);
    ``None`` means the documents sit at ranks 1..N.  ``scores`` are optional
    per-document system scores aligned with ``docs``.
    """

    request: str
    docs: tuple[str, ...]
    scores: tuple[float, ...] | None = None
    positions: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "docs", tuple(self.docs))
        if len(set(self.docs)) != len(self.docs):
            raise FairRankError(f"duplicate document in ranking for request {self.request!r}")
        if self.scores is not None:
            scores = tuple(float(s) for s in self.scores)
            if len(scores) != len(self.docs):
                raise FairRankError("scores length does not match docs length")
            object.__setattr__(self, "scores", scores)
        if self.positions is not None:
            pos = tuple(int(p) for p in self.positions)
            if len(pos) != len(self.docs):
                raise FairRankError("positions length does not match docs length")
            if any(p < 1 for p in pos) or any(b <= a for a, b in zip(pos, pos[1:])):
                raise FairRankError("positions must be strictly increasing 1-based ranks")
            object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return len(self.docs)

    @property
    def is_empty(self) -> bool:
        return not self.docs

    @property
    def original_positions(self) -> tuple[int, ...]:
        if self.positions is not None:
            return self.positions
        return tuple(range(1, len(self.docs) + 1))

    @cached_property
    def _index(self) -> dict[str, int]:
        return {d: i for i, d in enumerate(self.docs)}

    def rank_of(self, doc: str) -> int:
        """1-based position of ``doc`` within this ranking."""
        try:
            return self._index[doc] + 1
        except KeyError:
            raise FairRankError(f"document {doc!r} not in ranking") from None

    def doc_at(self, rank: int) -> str:
        """Document at 1-based position ``rank``."""
        if not 1 <= rank <= len(self.docs):
            raise FairRankError(f"rank {rank} out of range 1..{len(self.docs)}")
        return self.docs[rank - 1]

    def prefix(self, k: int) -> "Ranking":
        """The first ``k`` entries, retaining scores and original positions."""
        k = min(k, len(self.docs))
        return Ranking(
            self.request,
            self.docs[:k],
            self.scores[:k] if self.scores is not None else None,
            self.positions[:k] if self.positions is not None else None,
        )


@dataclass(frozen=True)
class GroupSpace:
    """Ordered group labels, with optional protected and unknown designations."""

    names: tuple[str, ...]
    protected_index: int | None = None
    unknown_index: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "names", tuple(self.names))
        if not self.names:
            raise FairRankError("group space needs at least one group")
        if len(set(self.names)) != len(self.names):
            raise FairRankError("group labels must be unique")
        for attr in ("protected_index", "unknown_index"):
            idx = getattr(self, attr)
            if idx is not None and not 0 <= idx < len(self.names):
                raise FairRankError(f"{attr} {idx} out of range")
        if self.protected_index is not None and self.protected_index == self.unknown_index:
            raise FairRankError("protected group cannot be the unknown group")

    @property
    def g(self) -> int:
        return len(self.names)

    def index_of(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise FairRankError(f"unknown group label {name!r}") from None

    def require_protected(self) -> int:
        if self.protected_index is None:
            raise FairRankError("this operation needs a designated protected group")
        return self.protected_index


class AlignmentMatrix:
    """Soft group-membership rows keyed by document id.

    Every stored row is a length-g vector of non-negative entries summing to
    one (tolerance 1e-9).  Documents absent from the map are unlabeled.
    """

    def __init__(self, rows: Mapping[str, Sequence[float]], n_groups: int | None = None):
        store: dict[str, np.ndarray] = {}
        for doc, raw in rows.items():
            vec = np.asarray(raw, dtype=float)
            if n_groups is None:
                n_groups = vec.size
            if vec.ndim != 1 or vec.size != n_groups:
                raise FairRankError(f"alignment row for {doc!r} has wrong length")
            if not np.all(np.isfinite(vec)) or np.any(vec < 0):
                raise FairRankError(f"alignment row for {doc!r} must be finite and non-negative")
            if abs(float(vec.sum()) - 1.0) > DISTRIBUTION_ATOL:
                raise FairRankError(f"alignment row for {doc!r} does not sum to 1")
            vec.flags.writeable = False
            store[doc] = vec
        if n_groups is None:
            raise FairRankError("cannot infer group count from an empty alignment")
        self._rows = store
        self.n_groups = int(n_groups)
        self._doc_index: dict[str, int] | None = None
        self._dense: np.ndarray | None = None

    def __contains__(self, doc: str) -> bool:
        return doc in self._rows

    def __len__(self) -> int:
        return len(self._rows)

    def row(self, doc: str) -> np.ndarray | None:
        return self._rows.get(doc)

    def docs(self) -> Iterable[str]:
        return self._rows.keys()

    def items(self) -> Iterable[tuple[str, np.ndarray]]:
        return self._rows.items()

    def labeled(self, docs: Iterable[str]) -> list[str]:
        """The subsequence of ``docs`` that have alignment rows."""
        return [d for d in docs if d in self._rows]

    def dense(self) -> np.ndarray:
        """All rows stacked into one read-only (n_labeled, g) matrix."""
        # lazy; a concurrent first call can only rebuild the identical matrix
        if self._dense is None:
            self._doc_index = {d: i for i, d in enumerate(self._rows)}
            dense = (np.stack(list(self._rows.values()))
                     if self._rows else np.zeros((0, self.n_groups)))
            dense.flags.writeable = False
            self._dense = dense
        return self._dense

    def gather(self, docs: Sequence[str]) -> tuple[np.ndarray, np.ndarray]:
        """(positions of labeled docs within ``docs``, their dense-row indices)."""
        self.dense()
        assert self._doc_index is not None
        get = self._doc_index.get
        raw = np.fromiter((get(d, -1) for d in docs), dtype=np.intp, count=len(docs))
        kept = np.nonzero(raw >= 0)[0]
        return kept, raw[kept]

    def mean_row(self) -> np.ndarray:
        """Mean alignment mass over all labeled documents (catalog composition)."""
        if not self._rows:
            raise Degenerate("alignment matrix is empty")
        return np.mean(np.stack(list(self._rows.values())), axis=0)


class RelevanceTable:
    """Graded ground-truth relevance y(d|q), keyed by request then document."""

    def __init__(self, entries: Mapping[str, Mapping[str, float]] | None = None):
        table: dict[str, dict[str, float]] = {}
        for req, docs in (entries or {}).items():
            inner: dict[str, float] = {}
            for doc, grade in docs.items():
                grade = float(grade)
                if not np.isfinite(grade) or grade < 0:
                    raise FairRankError(f"grade for ({req!r}, {doc!r}) must be finite and >= 0")
                inner[doc] = grade
            table[req] = inner
        self._table = table

    @classmethod
    def from_pairs(cls, pairs: Mapping[tuple[str, str], float]) -> "RelevanceTable":
        nested: dict[str, dict[str, float]] = {}
        for (req, doc), grade in pairs.items():
            nested.setdefault(req, {})[doc] = grade
        return cls(nested)

    def grade(self, request: str, doc: str, default: float = 0.0) -> float:
        return self._table.get(request, {}).get(doc, default)

    def judged(self, request: str) -> Mapping[str, float]:
        return self._table.get(request, {})

    def requests(self) -> Iterable[str]:
        return self._table.keys()

    def max_grade(self) -> float:
        best = 0.0
        for docs in self._table.values():
            for grade in docs.values():
                if grade > best:
                    best = grade
        return best

    def __len__(self) -> int:
        return sum(len(d) for d in self._table.values())


@dataclass(frozen=True)
class TargetDistribution:
    """Target group distribution p-hat the observed exposure is compared to."""

    probs: np.ndarray

    def __post_init__(self):
        vec = np.asarray(self.probs, dtype=float)
        if vec.ndim != 1 or vec.size == 0:
            raise FairRankError("target distribution must be a non-empty vector")
        if np.any(vec < 0) or np.any(vec > 1) or not np.all(np.isfinite(vec)):
            raise FairRankError("target entries must lie in [0, 1]")
        if abs(float(vec.sum()) - 1.0) > DISTRIBUTION_ATOL:
            raise FairRankError("target distribution must sum to 1")
        vec = vec.copy()
        vec.flags.writeable = False
        object.__setattr__(self, "probs", vec)

    @classmethod
    def equal(cls, g: int) -> "TargetDistribution":
        return cls(np.full(g, 1.0 / g))

    def scalar(self, protected_index: int) -> float:
        """The binomial target: probability mass of the protected group."""
        return float(self.probs[protected_index])


@dataclass(frozen=True)
class RankingSequence:
    """Ordered draws of (request, ranking) pairs: an empirical policy.

    ``request_weights`` optionally fixes the request arrival distribution;
    when absent, ``rho()`` falls back to the empirical draw frequencies.
    """

    draws: tuple[tuple[str, Ranking], ...]
    request_weights: Mapping[str, float] | None = None

    def __post_init__(self):
        draws = tuple((str(q), r) for q, r in self.draws)
        for q, ranking in draws:
            if ranking.request != q:
                raise FairRankError(f"draw key {q!r} does not match ranking request {ranking.request!r}")
        object.__setattr__(self, "draws", draws)
        if self.request_weights is not None:
            total = sum(self.request_weights.values())
            if abs(total - 1.0) > DISTRIBUTION_ATOL:
                raise FairRankError("request weights must sum to 1")

    def __len__(self) -> int:
        return len(self.draws)

    def requests(self) -> list[str]:
        """Distinct request ids in first-draw order."""
        seen: dict[str, None] = {}
        for q, _ in self.draws:
            seen.setdefault(q)
        return list(seen)

    def draws_for(self, request: str) -> list[Ranking]:
        return [r for q, r in self.draws if q == request]

    def rho(self) -> dict[str, float]:
        """Request arrival distribution: explicit weights or draw frequencies."""
        if self.request_weights is not None:
            return dict(self.request_weights)
        counts: dict[str, int] = {}
        for q, _ in self.draws:
            counts[q] = counts.get(q, 0) + 1
        total = len(self.draws)
        return {q: c / total for q, c in counts.items()}

    @classmethod
    def single_draws(cls, rankings: Mapping[str, Ranking]) -> "RankingSequence":
        """Deterministic-policy fallback: one draw per distinct request."""
        return cls(tuple((q, rankings[q]) for q in sorted(rankings)))


def restrict_to_labeled(ranking: Ranking, alignment: AlignmentMatrix) -> Ranking:
    """Drop unlabeled documents, retaining each survivor's original rank.

    Idempotent; the result may be empty (``is_empty``) when nothing is labeled.
    """
    keep = [i for i, d in enumerate(ranking.docs) if d in alignment]
    pos = ranking.original_positions
    return Ranking(
        ranking.request,
        tuple(ranking.docs[i] for i in keep),
        tuple(ranking.scores[i] for i in keep) if ranking.scores is not None else None,
        tuple(pos[i] for i in keep),
    )


def protected_mask(
    ranking: Ranking,
    alignment: AlignmentMatrix,
    groups: GroupSpace,
    threshold: float = 0.5,
) -> np.ndarray:
    """Boolean protected-membership per labeled document, in rank order.

    A document is protected iff its protected alignment mass is >= threshold.
    Unlabeled documents are excluded (they belong to neither class), so the
    mask may be shorter than the ranking.
    """
    p = groups.require_protected()
    if not 0 < threshold <= 1:
        raise FairRankError(f"threshold must lie in (0, 1], got {threshold}")
    _, rows = alignment.gather(ranking.docs)
    return alignment.dense()[rows, p] >= threshold


def binarize(
    alignment: AlignmentMatrix,
    groups: GroupSpace,
    threshold: float = 0.5,
) -> tuple[AlignmentMatrix, GroupSpace]:
    """Collapse soft alignment to hard protected/rest membership.

    Metrics built on binomial group counts or ratios need definitive
    membership; this applies the same >= threshold rule as ``protected_mask``.
    Unlabeled documents stay unlabeled.
    """
    p = groups.require_protected()
    if not 0 < threshold <= 1:
        raise FairRankError(f"threshold must lie in (0, 1], got {threshold}")
    plus = np.array([1.0, 0.0])
    minus = np.array([0.0, 1.0])
    rows = {d: (plus if row[p] >= threshold else minus) for d, row in alignment.items()}
    space = GroupSpace((groups.names[p], "rest"), protected_index=0)
    return AlignmentMatrix(rows, n_groups=2), space


UNKNOWN_POLICIES = ("exclude", "group", "error")


def apply_unknown_policy(
    alignment: AlignmentMatrix,
    groups: GroupSpace,
    universe: Iterable[str],
    policy: str = "exclude",
    unknown_label: str = "unknown",
) -> tuple[AlignmentMatrix, GroupSpace]:
    """Resolve documents that have no alignment row.

    ``exclude`` leaves them unlabeled; ``group`` assigns them wholly to an
    unknown pseudo-group (appended to the space if not already present);
    ``error`` refuses to proceed when any document in ``universe`` is unlabeled.
    """
    if policy not in UNKNOWN_POLICIES:
        raise FairRankError(f"unknown policy {policy!r}")
    if policy == "exclude":
        return alignment, groups
    missing = sorted(d for d in set(universe) if d not in alignment)
    if policy == "error":
        if missing:
            raise FairRankError(f"{len(missing)} unlabeled documents (first: {missing[0]!r})")
        return alignment, groups
    if groups.unknown_index is not None:
        names = groups.names
        u = groups.unknown_index
        rows = dict(alignment.items())
    else:
        if unknown_label in groups.names:
            raise FairRankError(f"group {unknown_label!r} exists but is not flagged as unknown")
        names = groups.names + (unknown_label,)
        u = len(names) - 1
        rows = {d: np.append(row, 0.0) for d, row in alignment.items()}
    onehot = np.zeros(len(names))
    onehot[u] = 1.0
    for d in missing:
        rows[d] = onehot
    space = GroupSpace(names, protected_index=groups.protected_index, unknown_index=u)
    return AlignmentMatrix(rows, n_groups=len(names)), space
