"""Dataset curation: TSV ingest, score orientation, filtering, dedup.

Input rows are ``keyphrase \\t leaf_category \\t search_score \\t
recall_score``.  Scores are opaque non-negative floats whose meaning is
declared by a :class:`ScoreOrientation` (raw counts: higher search is
better; rank positions: lower is better).  Curation filters on the search
score under that orientation, deduplicates per (keyphrase, leaf), and
groups the survivors by leaf category.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

from .vocab import DEFAULT_NORMALIZER, Normalizer, tokenize


@dataclass(frozen=True)
class ScoreOrientation:
    """Declares how raw search/recall scores are to be compared.

    Canonical form used internally: larger canonical search is better and
    smaller canonical recall is better, regardless of the raw convention.
    Canonicalization is its own inverse, so raw values can be recovered
    for display.
    """

    search_higher_better: bool
    recall_lower_better: bool

    @classmethod
    def from_name(cls, name: str) -> "ScoreOrientation":
        if name == "count":
            return cls(search_higher_better=True, recall_lower_better=True)
        if name == "rank":
            return cls(search_higher_better=False, recall_lower_better=False)
        raise ValueError(f"unknown score orientation: {name!r}")

    @property
    def name(self) -> str:
        if self == ScoreOrientation(True, True):
            return "count"
        if self == ScoreOrientation(False, False):
            return "rank"
        return f"custom({self.search_higher_better},{self.recall_lower_better})"

    def canonical_search(self, raw: float) -> float:
        return raw if self.search_higher_better else -raw

    def canonical_recall(self, raw: float) -> float:
        return raw if self.recall_lower_better else -raw

    # Canonicalization is an involution; expose the inverse by name so
    # call sites read correctly.
    raw_search = canonical_search
    raw_recall = canonical_recall


COUNT_ORIENTATION = ScoreOrientation(search_higher_better=True, recall_lower_better=True)
RANK_ORIENTATION = ScoreOrientation(search_higher_better=False, recall_lower_better=False)


@dataclass(frozen=True)
class RawKeyphraseRow:
    """One parsed input row, scores still in their raw convention."""

    keyphrase: str
    leaf_category: int
    search_score: float
    recall_score: float


@dataclass(frozen=True)
class RowError:
    line_no: int
    message: str


@dataclass
class IngestReport:
    """Parse outcome counters; malformed rows never abort the stream."""

    rows_ok: int = 0
    errors: list[RowError] = field(default_factory=list)

    @property
    def rows_bad(self) -> int:
        return len(self.errors)


def _parse_score(text: str, what: str) -> float:
    value = float(text)
    if not math.isfinite(value) or value < 0:
        raise ValueError(f"{what} must be a non-negative finite number, got {text!r}")
    return value


def _looks_like_header(fields: list[str]) -> bool:
    if len(fields) != 4:
        return True
    try:
        float(fields[2])
        float(fields[3])
    except ValueError:
        return True
    return False


def ingest(
    source: IO[str] | str,
    report: IngestReport | None = None,
    has_header: bool | None = None,
) -> Iterator[RawKeyphraseRow]:
    """Parse a TSV stream into :class:`RawKeyphraseRow` values.

    ``source`` is a path or an open text handle.  Malformed rows (wrong
    column count, empty keyphrase, unparseable leaf or scores) are
    recorded in ``report`` with their 1-based line numbers and skipped.
    With ``has_header=None`` the first line is sniffed: it is treated as a
    header when its last two columns do not both parse as numbers.
    """
    if report is None:
        report = IngestReport()

    def lines(handle: IO[str]) -> Iterator[RawKeyphraseRow]:
        first = True
        for line_no, line in enumerate(handle, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            fields = line.split("\t")
            if first:
                first = False
                skip = has_header if has_header is not None else _looks_like_header(fields)
                if skip:
                    continue
            try:
                if len(fields) != 4:
                    raise ValueError(f"expected 4 tab-separated columns, got {len(fields)}")
                keyphrase, leaf_text, search_text, recall_text = fields
                if not keyphrase.strip():
                    raise ValueError("empty keyphrase")
                leaf = int(leaf_text)
                search = _parse_score(search_text, "search score")
                recall = _parse_score(recall_text, "recall score")
            except ValueError as exc:
                report.errors.append(RowError(line_no, str(exc)))
                continue
            report.rows_ok += 1
            yield RawKeyphraseRow(keyphrase, leaf, search, recall)

    if isinstance(source, str):
        with open(source, "r", encoding="utf-8") as handle:
            yield from lines(handle)
    else:
        yield from lines(source)


@dataclass(frozen=True)
class CuratedKeyphrase:
    """A retained keyphrase: normalized text plus raw scores."""

    text: str
    search_score: float
    recall_score: float


@dataclass
class CurationStats:
    rows_in: int = 0
    kept: int = 0
    dropped_by_threshold: int = 0
    dropped_empty: int = 0
    deduplicated: int = 0


@dataclass
class CuratedDataset:
    """Threshold-filtered, deduplicated keyphrases grouped by leaf category."""

    meta_category: str
    orientation: ScoreOrientation
    leaves: dict[int, list[CuratedKeyphrase]]
    stats: CurationStats
    warnings: list[str] = field(default_factory=list)

    @property
    def num_keyphrases(self) -> int:
        return sum(len(group) for group in self.leaves.values())

    @property
    def is_vacuous(self) -> bool:
        return not self.leaves


def curate(
    rows: Iterable[RawKeyphraseRow],
    min_search: float | None = None,
    orientation: ScoreOrientation = COUNT_ORIENTATION,
    meta_category: str = "",
    normalizer: Normalizer = DEFAULT_NORMALIZER,
) -> CuratedDataset:
    """Filter, deduplicate, and group rows by leaf category.

    ``min_search`` is interpreted under ``orientation``: with count-like
    scores rows below the threshold are dropped, with rank-like scores
    rows ranked worse (numerically above) are dropped.  ``None`` disables
    the filter.  Duplicate (keyphrase, leaf) pairs keep the row whose
    search score is best under the orientation; exact ties keep the first
    occurrence.  Keyphrase text is normalized through the shared
    tokenizer, so graph construction and curation can never disagree on
    token identity.
    """
    stats = CurationStats()
    warnings: list[str] = []
    min_canonical = None if min_search is None else orientation.canonical_search(min_search)

    # (leaf, normalized text) -> (canonical search, CuratedKeyphrase)
    best: dict[int, dict[str, tuple[float, CuratedKeyphrase]]] = {}
    for row in rows:
        stats.rows_in += 1
        tokens = tokenize(row.keyphrase, normalizer)
        if not tokens:
            stats.dropped_empty += 1
            continue
        canonical = orientation.canonical_search(row.search_score)
        if min_canonical is not None and canonical < min_canonical:
            stats.dropped_by_threshold += 1
            continue
        text = " ".join(tokens)
        group = best.setdefault(row.leaf_category, {})
        kept = group.get(text)
        if kept is not None:
            stats.deduplicated += 1
            if canonical > kept[0]:
                group[text] = (canonical, CuratedKeyphrase(text, row.search_score, row.recall_score))
            continue
        group[text] = (canonical, CuratedKeyphrase(text, row.search_score, row.recall_score))
        stats.kept += 1

    leaves = {
        leaf: [kept for _, (_, kept) in sorted(group.items())]
        for leaf, group in sorted(best.items())
    }
    dataset = CuratedDataset(meta_category, orientation, leaves, stats, warnings)
    if dataset.is_vacuous:
        warnings.append(
            "curation produced an empty dataset: "
            f"{stats.rows_in} rows in, {stats.dropped_by_threshold} below threshold, "
            f"{stats.dropped_empty} empty after normalization"
        )
    return dataset
