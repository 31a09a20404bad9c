"""Map historical DRG descriptions onto the reference catalog.

Descriptions from older grouper years differ in abbreviations and case
("URINARY STONES W/O MCC").  They are normalized, matched exactly, then by a
token-sort edit-distance ratio; anything ambiguous goes to a review queue that
a human resolves in a decisions file.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from drgkit import kernels
from drgkit.catalog import DrgCatalog
from drgkit.errors import ConfigurationError, IncompleteReviewError, ReviewValidationError

EXCLUDE = "EXCLUDE"
TOP_K = 5
DEFAULT_ACCEPT = 0.95
DEFAULT_REVIEW = 0.70

DEFAULT_RULES: tuple[tuple[str, str], ...] = (
    ("W/O", "WITHOUT"),
    ("CATH", "CATHETERIZATION"),
    ("PROC", "PROCEDURES"),
    ("W", "WITH"),
)


@dataclass(frozen=True)
class NormalizationRuleSet:
    rules: tuple[tuple[str, str], ...] = DEFAULT_RULES
    case_fold: bool = True

    def __post_init__(self):
        table = {}
        for pattern, replacement in self.rules:
            key = pattern.upper() if self.case_fold else pattern
            table.setdefault(key, replacement.upper() if self.case_fold else replacement)
        object.__setattr__(self, "_table", table)
        # a replacement that is itself a pattern would break idempotence
        for replacement in table.values():
            if replacement in table and table[replacement] != replacement:
                raise ConfigurationError(f"rule output {replacement!r} is itself rewritten")

    def apply(self, token: str) -> str:
        return self._table.get(token, token)

    @classmethod
    def from_csv(cls, path: str | Path, extend_defaults: bool = True) -> NormalizationRuleSet:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [
                (r["pattern"].strip(), r["replacement"].strip())
                for r in csv.DictReader(fh)
                if r.get("pattern", "").strip()
            ]
        # user rules take precedence over the defaults
        rules = tuple(rows) + (DEFAULT_RULES if extend_defaults else ())
        return cls(rules)


def normalize_description(raw: str, rules: NormalizationRuleSet | None = None) -> str:
    """Uppercase, collapse whitespace and rewrite whole-token abbreviations."""
    rules = rules or NormalizationRuleSet()
    text = raw.upper() if rules.case_fold else raw
    return " ".join(rules.apply(tok) for tok in text.split())


def _token_sort(text: str) -> str:
    return " ".join(sorted(text.split()))


def fuzzy_score(a: str, b: str) -> float:
    """Token-sort Levenshtein ratio, 1 - distance / max length."""
    sa, sb = _token_sort(a), _token_sort(b)
    longest = max(len(sa), len(sb))
    if longest == 0:
        return 1.0
    return 1.0 - kernels.levenshtein(sa, sb) / longest


@dataclass(frozen=True)
class MatchCandidate:
    code: int
    score: float


@dataclass(frozen=True)
class Matched:
    code: int
    exact: bool = False


@dataclass(frozen=True)
class NeedsReview:
    historical_description: str
    candidates: tuple[MatchCandidate, ...] = ()


@dataclass(frozen=True)
class Excluded:
    historical_description: str


HarmonizationOutcome = Matched | NeedsReview | Excluded


@dataclass(frozen=True)
class ReviewDecision:
    historical_description: str
    decision: int | str  # catalog code or EXCLUDE


class Harmonizer:
    """Scores historical descriptions against one catalog.

    Sorted-token forms of the catalog descriptions are computed once.
    """

    def __init__(self, catalog: DrgCatalog, rules: NormalizationRuleSet | None = None,
                 accept_threshold: float = DEFAULT_ACCEPT, review_threshold: float = DEFAULT_REVIEW):
        if len(catalog) == 0:
            raise ConfigurationError("cannot harmonize against an empty catalog")
        if not 0.0 <= review_threshold <= accept_threshold <= 1.0:
            raise ConfigurationError(
                f"need 0 <= review ({review_threshold}) <= accept ({accept_threshold}) <= 1"
            )
        self.catalog = catalog
        self.rules = rules or NormalizationRuleSet()
        self.accept_threshold = accept_threshold
        self.review_threshold = review_threshold
        self._targets = [
            (e.code, normalize_description(e.drg.description, self.rules)) for e in catalog.entries
        ]
        self._exact = {}
        for code, desc in sorted(self._targets):
            self._exact.setdefault(desc, code)
        self._sorted = [(code, _token_sort(desc)) for code, desc in self._targets]

    def rank(self, normalized: str) -> list[MatchCandidate]:
        query = _token_sort(normalized)
        lev = kernels.levenshtein
        out = []
        for code, target in self._sorted:
            longest = max(len(query), len(target))
            score = 1.0 if longest == 0 else 1.0 - lev(query, target) / longest
            out.append(MatchCandidate(code, score))
        out.sort(key=lambda c: (-c.score, c.code))
        return out

    def harmonize(self, historical: str) -> HarmonizationOutcome:
        normalized = normalize_description(historical, self.rules)
        if normalized in self._exact:
            return Matched(self._exact[normalized], exact=True)
        ranked = self.rank(normalized)
        best = ranked[0]
        unique = len(ranked) == 1 or ranked[1].score < best.score
        if best.score >= self.accept_threshold and unique:
            return Matched(best.code)
        if best.score >= self.review_threshold:
            return NeedsReview(historical, tuple(ranked[:TOP_K]))
        return NeedsReview(historical)

    def harmonize_many(self, descriptions: Iterable[str], workers: int = 1) -> dict[str, HarmonizationOutcome]:
        """Outcome per distinct description, in first-seen order."""
        unique = list(dict.fromkeys(descriptions))
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                outcomes = list(pool.map(self.harmonize, unique))
        else:
            outcomes = [self.harmonize(d) for d in unique]
        return dict(zip(unique, outcomes))


def harmonize_code(historical: str, catalog: DrgCatalog, accept_threshold: float = DEFAULT_ACCEPT,
                   review_threshold: float = DEFAULT_REVIEW,
                   rules: NormalizationRuleSet | None = None) -> HarmonizationOutcome:
    return Harmonizer(catalog, rules, accept_threshold, review_threshold).harmonize(historical)


def apply_review_decisions(queue: Sequence[NeedsReview], decisions: Sequence[ReviewDecision],
                           catalog: DrgCatalog) -> dict[str, int | str]:
    """Resolve every queued item to a catalog code or EXCLUDE."""
    pending = [q.historical_description for q in queue]
    by_text: dict[str, int | str] = {}
    for d in decisions:
        if d.historical_description in by_text:
            raise ReviewValidationError(f"duplicate decision for {d.historical_description!r}")
        value = d.decision
        if value != EXCLUDE:
            if not isinstance(value, int) or value not in catalog:
                raise ReviewValidationError(
                    f"decision for {d.historical_description!r} names unknown code {value!r}"
                )
        by_text[d.historical_description] = value

    missing = [t for t in pending if t not in by_text]
    if missing:
        raise IncompleteReviewError(f"{len(missing)} queue item(s) lack a decision, first: {missing[0]!r}")
    extra = sorted(set(by_text) - set(pending))
    if extra:
        raise ReviewValidationError(f"decision for {extra[0]!r} does not match any queue item")
    return {t: by_text[t] for t in pending}


# ---------------------------------------------------------------------------
# file formats

QUEUE_HEADER = ["historical_description"] + [
    f"candidate_{i}_{part}" for i in range(1, TOP_K + 1) for part in ("code", "score")
]


def write_review_queue(queue: Sequence[NeedsReview]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(QUEUE_HEADER)
    for item in queue:
        row = [item.historical_description]
        for i in range(TOP_K):
            if i < len(item.candidates):
                c = item.candidates[i]
                row += [c.code, f"{c.score:.6f}"]
            else:
                row += ["", ""]
        w.writerow(row)
    return buf.getvalue()


def read_review_queue(text: str) -> list[NeedsReview]:
    out = []
    for row in csv.DictReader(io.StringIO(text)):
        cands = []
        for i in range(1, TOP_K + 1):
            code = (row.get(f"candidate_{i}_code") or "").strip()
            if code:
                cands.append(MatchCandidate(int(code), float(row[f"candidate_{i}_score"])))
        out.append(NeedsReview(row["historical_description"], tuple(cands)))
    return out


def read_decisions(text: str) -> list[ReviewDecision]:
    out = []
    for lineno, row in enumerate(csv.DictReader(io.StringIO(text)), start=2):
        raw = (row.get("decision") or "").strip()
        if raw.upper() == EXCLUDE:
            value: int | str = EXCLUDE
        else:
            try:
                value = int(raw)
            except ValueError:
                raise ReviewValidationError(f"line {lineno}: decision {raw!r} is neither a code nor EXCLUDE") from None
        out.append(ReviewDecision(row["historical_description"], value))
    return out


def write_mapping(mapping: dict[str, int | str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["historical_description", "code"])
    for text, code in mapping.items():
        w.writerow([text, code])
    return buf.getvalue()


def read_mapping(text: str) -> dict[str, int | str]:
    out: dict[str, int | str] = {}
    for row in csv.DictReader(io.StringIO(text)):
        raw = row["code"].strip()
        out[row["historical_description"]] = EXCLUDE if raw.upper() == EXCLUDE else int(raw)
    return out


@dataclass
class HarmonizationResult:
    mapping: dict[str, int] = field(default_factory=dict)
    queue: list[NeedsReview] = field(default_factory=list)


def harmonize_descriptions(descriptions: Iterable[str], harmonizer: Harmonizer,
                           workers: int = 1) -> HarmonizationResult:
    result = HarmonizationResult()
    for text, outcome in harmonizer.harmonize_many(descriptions, workers).items():
        if isinstance(outcome, Matched):
            result.mapping[text] = outcome.code
        else:
            result.queue.append(outcome)
    return result
