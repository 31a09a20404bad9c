"""Cohort construction: section extraction, quality filters, stratified split."""

from __future__ import annotations

import json
import random
import re
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

MIN_WORDS = 40
MIN_CLASS_COUNT = 2
TEST_FRACTION = 0.10

_COURSE_HEADER = re.compile(r"^\s*brief\s+hospital\s+course\s*(?::\s*(?P<inline>.*))?$", re.IGNORECASE)
_CONNECTORS = frozenset({"of", "on", "at", "and", "or", "to", "the", "for", "in", "with", "by"})


@dataclass(frozen=True)
class RawNote:
    stay_id: str
    full_text: str
    drg_description: str
    drg_version_tag: str | None = None

    @classmethod
    def from_json(cls, obj: Mapping) -> RawNote:
        return cls(str(obj["stay_id"]), obj["text"], obj["drg_description"], obj.get("drg_version_tag"))


@dataclass(frozen=True)
class CandidateStay:
    """A note after extraction and harmonization, before filtering."""

    stay_id: str
    course_text: str | None
    drg_code: int | None


@dataclass(frozen=True)
class StayRecord:
    stay_id: str
    course_text: str
    drg_code: int

    @property
    def word_count(self) -> int:
        return word_count(self.course_text)


@dataclass
class CohortSplit:
    train: list[StayRecord]
    test: list[StayRecord]
    seed: int


@dataclass
class DropReport:
    counts: Counter = field(default_factory=Counter)

    def to_dict(self) -> dict[str, int]:
        return dict(sorted(self.counts.items()))


def word_count(text: str) -> int:
    return len(text.split())


def _is_section_header(line: str) -> bool:
    stripped = line.strip()
    if not stripped.endswith(":") or len(stripped) < 2:
        return False
    words = stripped[:-1].split()
    if not 1 <= len(words) <= 6:
        return False
    if not words[0][:1].isupper():
        return False
    return all(w[:1].isupper() or w in _CONNECTORS for w in words)


def extract_brief_hospital_course(note: RawNote | str) -> str | None:
    """Text between the course header and the next section header.

    A section header is a line of at most six capitalized words (lowercase
    connectors like "on" allowed) that ends in a colon.
    """
    text = note.full_text if isinstance(note, RawNote) else note
    lines = text.splitlines()
    for i, line in enumerate(lines):
        m = _COURSE_HEADER.match(line)
        if m is None:
            continue
        body = [m.group("inline")] if m.group("inline") else []
        for nxt in lines[i + 1:]:
            if _is_section_header(nxt):
                break
            body.append(nxt)
        return "\n".join(body).strip()
    return None


def filter_cohort(records: Iterable[CandidateStay]) -> tuple[list[StayRecord], DropReport]:
    kept: list[StayRecord] = []
    report = DropReport()
    seen_text: set[str] = set()
    for r in records:
        if r.course_text is None:
            report.counts["missing_section"] += 1
        elif r.drg_code is None:
            report.counts["unmapped_drg"] += 1
        elif word_count(r.course_text) < MIN_WORDS:
            report.counts["too_short"] += 1
        elif r.course_text in seen_text:
            report.counts["duplicate"] += 1
        else:
            seen_text.add(r.course_text)
            kept.append(StayRecord(r.stay_id, r.course_text, r.drg_code))
    return kept, report


def drop_rare_drgs(records: Sequence[StayRecord], min_count: int = MIN_CLASS_COUNT) -> list[StayRecord]:
    counts = Counter(r.drg_code for r in records)
    return [r for r in records if counts[r.drg_code] >= min_count]


def train_count(n: int, test_fraction: float = TEST_FRACTION) -> int:
    """Round-half-up share of a class kept for training, clamped to [1, n]."""
    if n == 0:
        return 0
    share = Fraction(n) * (1 - Fraction(str(test_fraction)))
    return min(n, max(1, int(share + Fraction(1, 2))))


def stratified_split(records: Sequence[StayRecord], test_fraction: float = TEST_FRACTION,
                     seed: int = 0) -> CohortSplit:
    buckets: dict[int, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        buckets[r.drg_code].append(i)
    rng = random.Random(seed)
    train_idx: list[int] = []
    test_idx: list[int] = []
    for code in sorted(buckets):
        members = buckets[code][:]
        rng.shuffle(members)
        k = train_count(len(members), test_fraction)
        train_idx += members[:k]
        test_idx += members[k:]
    return CohortSplit(
        train=[records[i] for i in sorted(train_idx)],
        test=[records[i] for i in sorted(test_idx)],
        seed=seed,
    )


def cohort_stats(records: Sequence[StayRecord], split: CohortSplit | None = None) -> dict:
    counts = Counter(r.drg_code for r in records)
    stats = {
        "n_records": len(records),
        "n_classes": len(counts),
        "class_counts": {str(k): v for k, v in sorted(counts.items())},
        "median_cases_per_class": statistics.median(counts.values()) if counts else 0,
        "mean_word_count": statistics.fmean(r.word_count for r in records) if records else 0.0,
    }
    if split is not None:
        stats["unique_labels"] = {
            "train": len({r.drg_code for r in split.train}),
            "test": len({r.drg_code for r in split.test}),
        }
        train_counts = Counter(r.drg_code for r in split.train)
        stats["median_train_cases_per_class"] = statistics.median(train_counts.values()) if train_counts else 0
    return stats


# ---------------------------------------------------------------------------
# file formats

def read_jsonl(text: str) -> list[dict]:
    return [json.loads(line) for line in text.splitlines() if line.strip()]


def write_cohort(split: CohortSplit) -> str:
    lines = []
    for name, part in (("train", split.train), ("test", split.test)):
        for r in part:
            lines.append(json.dumps(
                {"stay_id": r.stay_id, "course_text": r.course_text, "drg_code": r.drg_code, "split": name}
            ))
    return "\n".join(lines) + ("\n" if lines else "")


def read_cohort(text: str, seed: int = 0) -> CohortSplit:
    train, test = [], []
    for obj in read_jsonl(text):
        rec = StayRecord(str(obj["stay_id"]), obj["course_text"], int(obj["drg_code"]))
        (train if obj["split"] == "train" else test).append(rec)
    return CohortSplit(train, test, seed)


def build_candidates(notes: Iterable[RawNote], mapping: Mapping[str, int | str],
                     normalize=None) -> list[CandidateStay]:
    """Attach harmonized codes; EXCLUDE and unknown descriptions become None.

    ``mapping`` is keyed by raw historical description; ``normalize`` (optional)
    gives a second lookup key for descriptions that match only after it.
    """
    out = []
    seen: set[str] = set()
    for note in notes:
        if note.stay_id in seen:
            raise ValueError(f"duplicate stay_id {note.stay_id!r}")
        seen.add(note.stay_id)
        code = mapping.get(note.drg_description)
        if code is None and normalize is not None:
            code = mapping.get(normalize(note.drg_description))
        out.append(CandidateStay(
            note.stay_id,
            extract_brief_hospital_course(note),
            code if isinstance(code, int) else None,
        ))
    return out
