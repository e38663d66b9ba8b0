"""Review corpora: loading, validation, app filtering, and concern-label
distribution statistics.

Two interchange formats are supported. JSONL has one object per line with
fields id (optional), app, text, labels. CSV has a header row with columns
id,app,text,labels where labels are joined with "|". Both are UTF-8.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

from reviewkg.errors import (
    DuplicateId,
    EmptyCorpus,
    ParseError,
    UnknownConcernName,
)

DEFAULT_CONCERN_TYPES = (
    "Safety",
    "Accountability",
    "Scam",
    "Discrimination",
    "Transparency",
    "Privacy",
    "Accessibility",
    "Sustainability",
    "Identity Theft",
    "Cyberbullying/Toxicity",
    "Spreading False Information",
    "Inappropriate Content",
)


class ConcernVocabulary:
    """Closed vocabulary of concern-type names.

    Membership is case-insensitive; `canonical` maps any casing to the
    declared display name.
    """

    def __init__(self, names: tuple[str, ...] = DEFAULT_CONCERN_TYPES):
        cleaned = []
        for name in names:
            if not name or not name.strip():
                raise UnknownConcernName("empty concern name in vocabulary")
            cleaned.append(name.strip())
        self.names = tuple(cleaned)
        self._by_folded = {n.casefold(): n for n in self.names}
        if len(self._by_folded) != len(self.names):
            raise UnknownConcernName("vocabulary names collide case-insensitively")

    def canonical(self, name: str) -> str:
        key = name.strip().casefold()
        if key not in self._by_folded:
            raise UnknownConcernName(f"unknown concern type {name!r}")
        return self._by_folded[key]

    def __contains__(self, name: str) -> bool:
        return name.strip().casefold() in self._by_folded

    def __eq__(self, other) -> bool:
        return isinstance(other, ConcernVocabulary) and self.names == other.names

    @classmethod
    def from_file(cls, path: str | Path) -> "ConcernVocabulary":
        """Read one concern name per line; blank lines and # comments skipped."""
        names = []
        for raw in Path(path).read_text(encoding="utf-8").splitlines():
            line = raw.strip()
            if line and not line.startswith("#"):
                names.append(line)
        return cls(tuple(names))


@dataclass(frozen=True)
class Review:
    id: str
    app: str
    text: str
    concern_labels: frozenset[str] = frozenset()


@dataclass(frozen=True)
class Corpus:
    reviews: tuple[Review, ...]
    app_filter: str | None = None

    def __len__(self) -> int:
        return len(self.reviews)

    def __iter__(self):
        return iter(self.reviews)


@dataclass(frozen=True)
class DistributionEntry:
    name: str
    count: int
    share: float


@dataclass(frozen=True)
class DistributionReport:
    entries: tuple[DistributionEntry, ...]
    total_labels: int


def _make_review(
    line_no: int,
    rec_index: int,
    raw_id,
    app,
    text,
    labels,
    vocabulary: ConcernVocabulary,
) -> Review:
    if not isinstance(app, str) or not app.strip():
        raise ParseError(line_no, "missing or empty app name")
    if not isinstance(text, str) or not text.strip():
        raise ParseError(line_no, "missing or empty review text")
    app = app.strip()
    rid = raw_id if raw_id else f"{app}-{rec_index}"
    if not isinstance(rid, str) or not rid.strip():
        raise ParseError(line_no, "review id must be a nonempty string")
    try:
        canon = frozenset(vocabulary.canonical(lbl) for lbl in labels if str(lbl).strip())
    except UnknownConcernName as exc:
        raise ParseError(line_no, str(exc)) from exc
    return Review(id=rid.strip(), app=app, text=text, concern_labels=canon)


def load_reviews(
    path: str | Path,
    format: str = "jsonl",
    vocabulary: ConcernVocabulary | None = None,
) -> Corpus:
    """Load a review file into a Corpus.

    Records missing an id get "<app>-<index>" with the 0-based record index.
    Raises ParseError (with the offending line number) on malformed records
    and DuplicateId when two records share an id.
    """
    vocabulary = vocabulary or ConcernVocabulary()
    path = Path(path)
    reviews: list[Review] = []
    seen: set[str] = set()

    if format == "jsonl":
        with path.open(encoding="utf-8") as fh:
            rec_index = 0
            for line_no, raw in enumerate(fh, start=1):
                if not raw.strip():
                    continue
                try:
                    rec = json.loads(raw)
                except json.JSONDecodeError as exc:
                    raise ParseError(line_no, f"invalid JSON: {exc.msg}") from exc
                if not isinstance(rec, dict):
                    raise ParseError(line_no, "record is not an object")
                review = _make_review(
                    line_no,
                    rec_index,
                    rec.get("id"),
                    rec.get("app"),
                    rec.get("text"),
                    rec.get("labels", []),
                    vocabulary,
                )
                if review.id in seen:
                    raise DuplicateId(f"duplicate review id {review.id!r} at line {line_no}")
                seen.add(review.id)
                reviews.append(review)
                rec_index += 1
    elif format == "csv":
        with path.open(encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or not {"app", "text"} <= set(reader.fieldnames):
                raise ParseError(1, "expected header with columns id,app,text,labels")
            for rec_index, rec in enumerate(reader):
                line_no = reader.line_num
                labels = [p for p in (rec.get("labels") or "").split("|") if p.strip()]
                review = _make_review(
                    line_no, rec_index, rec.get("id"), rec.get("app"), rec.get("text"), labels, vocabulary
                )
                if review.id in seen:
                    raise DuplicateId(f"duplicate review id {review.id!r} at line {line_no}")
                seen.add(review.id)
                reviews.append(review)
    else:
        raise ValueError(f"unsupported corpus format {format!r}")

    return Corpus(reviews=tuple(reviews))


def write_reviews(corpus: Corpus, path: str | Path, format: str = "jsonl") -> None:
    """Serialize a corpus so that load_reviews reads back an equal Corpus."""
    path = Path(path)
    if format == "jsonl":
        with path.open("w", encoding="utf-8") as fh:
            for r in corpus.reviews:
                rec = {
                    "id": r.id,
                    "app": r.app,
                    "text": r.text,
                    "labels": sorted(r.concern_labels),
                }
                fh.write(json.dumps(rec, ensure_ascii=False) + "\n")
    elif format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["id", "app", "text", "labels"])
            for r in corpus.reviews:
                writer.writerow([r.id, r.app, r.text, "|".join(sorted(r.concern_labels))])
    else:
        raise ValueError(f"unsupported corpus format {format!r}")


def filter_by_app(corpus: Corpus, app: str) -> Corpus:
    """Keep exactly the reviews whose app matches case-insensitively."""
    want = app.strip().casefold()
    kept = tuple(r for r in corpus.reviews if r.app.casefold() == want)
    return Corpus(reviews=kept, app_filter=app.strip())


def concern_distribution(corpus: Corpus) -> DistributionReport:
    """Tally concern labels over all (review, label) pairs.

    Each label of a review counts once. Shares are fractions of the total
    label occurrences; entries come back sorted by descending share, then
    name, so output is deterministic.
    """
    counts: dict[str, int] = {}
    for r in corpus.reviews:
        for label in r.concern_labels:
            counts[label] = counts.get(label, 0) + 1
    total = sum(counts.values())
    if total == 0:
        raise EmptyCorpus("no concern labels present in corpus")
    entries = tuple(
        DistributionEntry(name=name, count=c, share=c / total)
        for name, c in sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    )
    return DistributionReport(entries=entries, total_labels=total)


def render_distribution(report: DistributionReport) -> str:
    """Aligned-column text table for terminal display."""
    width = max(len(e.name) for e in report.entries)
    lines = [f"{'concern':<{width}}  count  share"]
    for e in report.entries:
        lines.append(f"{e.name:<{width}}  {e.count:>5}  {e.share * 100:5.1f}%")
    lines.append(f"{'total':<{width}}  {report.total_labels:>5}")
    return "\n".join(lines)
