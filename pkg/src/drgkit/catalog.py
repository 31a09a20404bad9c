"""DRG catalog: parsing, base/arm dissection, split topology and composition.

Every MS-DRG description ends (optionally) in a severity descriptor such as
``WITH MCC`` or ``WITHOUT CC/MCC``.  Stripping that descriptor yields the base
DRG text shared by all severity arms of one principal diagnosis or procedure.
The prediction side uses a five-valued CC/MCC label; :func:`compose` turns a
(base, label) pair back into a concrete catalog code.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import dataclass
from enum import Enum, IntEnum
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Mapping

from drgkit.errors import (
    CatalogConflictError,
    CatalogParseError,
    InconsistentCatalogError,
    NotFoundError,
)


class SeverityArm(str, Enum):
    WITH_MCC = "WITH_MCC"
    WITH_CC = "WITH_CC"
    WITH_CC_MCC = "WITH_CC_MCC"
    WITHOUT_CC_MCC = "WITHOUT_CC_MCC"
    WITHOUT_MCC = "WITHOUT_MCC"
    NONE = "NONE"

    @property
    def descriptor(self) -> str:
        return ARM_DESCRIPTORS.get(self, "")


class CcMccLabel(IntEnum):
    """Prediction label space; the integer value is the head row offset."""

    WITHOUT_CC_MCC = 0
    WITH_CC = 1
    WITH_MCC = 2
    WITHOUT_MCC = 3
    NOT_APPLICABLE = 4


class SplitType(str, Enum):
    THREE_WAY = "THREE_WAY"
    TWO_WAY_CCMCC_VS_NONE = "TWO_WAY_CCMCC_VS_NONE"
    TWO_WAY_MCC_VS_REST = "TWO_WAY_MCC_VS_REST"
    NO_SPLIT = "NO_SPLIT"


ARM_DESCRIPTORS: dict[SeverityArm, str] = {
    SeverityArm.WITH_MCC: "WITH MCC",
    SeverityArm.WITH_CC_MCC: "WITH CC/MCC",
    SeverityArm.WITH_CC: "WITH CC",
    SeverityArm.WITHOUT_CC_MCC: "WITHOUT CC/MCC",
    SeverityArm.WITHOUT_MCC: "WITHOUT MCC",
}

# longest descriptor first so "WITH CC/MCC" wins over "WITH CC"
_DESCRIPTORS_BY_LENGTH = sorted(ARM_DESCRIPTORS.items(), key=lambda kv: -len(kv[1]))

_SPLIT_BY_ARMS: dict[frozenset, SplitType] = {
    frozenset({SeverityArm.WITH_MCC, SeverityArm.WITH_CC, SeverityArm.WITHOUT_CC_MCC}): SplitType.THREE_WAY,
    frozenset({SeverityArm.WITH_CC_MCC, SeverityArm.WITHOUT_CC_MCC}): SplitType.TWO_WAY_CCMCC_VS_NONE,
    frozenset({SeverityArm.WITH_MCC, SeverityArm.WITHOUT_MCC}): SplitType.TWO_WAY_MCC_VS_REST,
    frozenset({SeverityArm.NONE}): SplitType.NO_SPLIT,
}

_ARM_TO_LABEL: dict[SeverityArm, CcMccLabel] = {
    SeverityArm.WITH_MCC: CcMccLabel.WITH_MCC,
    SeverityArm.WITH_CC: CcMccLabel.WITH_CC,
    SeverityArm.WITHOUT_CC_MCC: CcMccLabel.WITHOUT_CC_MCC,
    SeverityArm.WITHOUT_MCC: CcMccLabel.WITHOUT_MCC,
    SeverityArm.NONE: CcMccLabel.NOT_APPLICABLE,
    # no dedicated label exists for the merged arm; use the weakest condition it implies
    SeverityArm.WITH_CC_MCC: CcMccLabel.WITH_CC,
}

_L = CcMccLabel
_A = SeverityArm
LABEL_TO_ARM: dict[SplitType, dict[CcMccLabel, SeverityArm]] = {
    SplitType.NO_SPLIT: {label: _A.NONE for label in _L},
    SplitType.TWO_WAY_MCC_VS_REST: {
        _L.WITH_MCC: _A.WITH_MCC,
        _L.WITH_CC: _A.WITHOUT_MCC,
        _L.WITHOUT_CC_MCC: _A.WITHOUT_MCC,
        _L.WITHOUT_MCC: _A.WITHOUT_MCC,
        _L.NOT_APPLICABLE: _A.WITHOUT_MCC,
    },
    SplitType.THREE_WAY: {
        _L.WITH_MCC: _A.WITH_MCC,
        _L.WITH_CC: _A.WITH_CC,
        _L.WITHOUT_CC_MCC: _A.WITHOUT_CC_MCC,
        _L.WITHOUT_MCC: _A.WITHOUT_CC_MCC,
        _L.NOT_APPLICABLE: _A.WITHOUT_CC_MCC,
    },
    SplitType.TWO_WAY_CCMCC_VS_NONE: {
        _L.WITH_MCC: _A.WITH_CC_MCC,
        _L.WITH_CC: _A.WITH_CC_MCC,
        _L.WITHOUT_CC_MCC: _A.WITHOUT_CC_MCC,
        _L.WITHOUT_MCC: _A.WITHOUT_CC_MCC,
        _L.NOT_APPLICABLE: _A.WITHOUT_CC_MCC,
    },
}
del _L, _A


@dataclass(frozen=True)
class DrgCode:
    code: int
    description: str
    version_tag: str = "v34.0"


@dataclass(frozen=True)
class CatalogEntry:
    drg: DrgCode
    base_id: int
    arm: SeverityArm

    @property
    def code(self) -> int:
        return self.drg.code


@dataclass(frozen=True)
class BaseDrg:
    base_id: int
    base_text: str
    members: Mapping[SeverityArm, DrgCode]
    split: SplitType

    @property
    def codes(self) -> list[int]:
        return sorted(d.code for d in self.members.values())


def dissect_description(description: str) -> tuple[str, SeverityArm]:
    """Split a normalized description into (base text, severity arm).

    Only a terminal descriptor counts; one buried mid-string stays in the base.
    """
    for arm, desc in _DESCRIPTORS_BY_LENGTH:
        if description.endswith(" " + desc):
            base = description[: -len(desc)].rstrip()
            if base:
                return base, arm
    return description.rstrip(), SeverityArm.NONE


def recompose_description(base_text: str, arm: SeverityArm) -> str:
    return f"{base_text} {arm.descriptor}" if arm is not SeverityArm.NONE else base_text


def classify_split(arms: Iterable[SeverityArm]) -> SplitType:
    key = frozenset(arms)
    try:
        return _SPLIT_BY_ARMS[key]
    except KeyError:
        listed = ", ".join(sorted(a.value for a in key)) or "<empty>"
        raise InconsistentCatalogError(f"arm set {{{listed}}} matches no known split type") from None


def arm_to_label(arm: SeverityArm) -> CcMccLabel:
    return _ARM_TO_LABEL[arm]


def label_valid_set(base: BaseDrg) -> frozenset[CcMccLabel]:
    return frozenset(arm_to_label(a) for a in base.members)


def map_label_to_arm(label: CcMccLabel, split: SplitType) -> SeverityArm:
    return LABEL_TO_ARM[split][CcMccLabel(label)]


class DrgCatalog:
    """Immutable reference code set with base/arm indices."""

    def __init__(self, entries: list[CatalogEntry], bases: list[BaseDrg]):
        self._entries = tuple(entries)
        self._bases = tuple(bases)
        self._by_code = MappingProxyType({e.code: e for e in entries})
        self._by_base_text = MappingProxyType({b.base_text: b for b in bases})
        self._by_description = MappingProxyType({e.drg.description: e for e in entries})

    @property
    def entries(self) -> tuple[CatalogEntry, ...]:
        return self._entries

    @property
    def bases(self) -> tuple[BaseDrg, ...]:
        return self._bases

    @property
    def codes(self) -> list[int]:
        """All codes, ascending; this is the single-label head order."""
        return sorted(self._by_code)

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, code: object) -> bool:
        return code in self._by_code

    def entry(self, code: int) -> CatalogEntry:
        try:
            return self._by_code[code]
        except KeyError:
            raise NotFoundError(f"DRG code {code} not in catalog") from None

    def base(self, base_id: int) -> BaseDrg:
        if not 0 <= base_id < len(self._bases):
            raise NotFoundError(f"base id {base_id} not in catalog")
        return self._bases[base_id]

    def base_by_text(self, base_text: str) -> BaseDrg:
        try:
            return self._by_base_text[base_text]
        except KeyError:
            raise NotFoundError(f"base DRG {base_text!r} not in catalog") from None

    def by_description(self, description: str) -> CatalogEntry | None:
        return self._by_description.get(description)

    def split_counts(self) -> dict[SplitType, int]:
        counts = {s: 0 for s in SplitType}
        for b in self._bases:
            counts[b.split] += 1
        return counts

    def two_label_target(self, code: int) -> tuple[int, CcMccLabel]:
        e = self.entry(code)
        return e.base_id, arm_to_label(e.arm)

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        for e in sorted(self._entries, key=lambda e: e.code):
            h.update(f"{e.code}\t{e.drg.description}\n".encode())
        return h.hexdigest()

    def summary(self) -> dict:
        return {
            "codes": len(self._entries),
            "bases": len(self._bases),
            "splits": {s.value: n for s, n in self.split_counts().items()},
        }

    def to_dict(self) -> dict:
        return {
            "entries": [
                {"code": e.code, "description": e.drg.description, "base_id": e.base_id, "arm": e.arm.value}
                for e in self._entries
            ],
            "bases": [
                {
                    "base_id": b.base_id,
                    "base_text": b.base_text,
                    "split": b.split.value,
                    "members": {arm.value: d.code for arm, d in b.members.items()},
                }
                for b in self._bases
            ],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def compose(base_id: int, label: CcMccLabel, catalog: DrgCatalog) -> DrgCode:
    base = catalog.base(base_id)
    label = CcMccLabel(label)
    for arm, drg in base.members.items():
        if arm_to_label(arm) == label:
            return drg
    return base.members[map_label_to_arm(label, base.split)]


def build_catalog(rows: Iterable[tuple[int, str]], version_tag: str = "v34.0") -> DrgCatalog:
    """Dissect (code, description) pairs into a catalog.

    Bases are numbered by first appearance in ascending code order, so base ids
    are stable for a given code set regardless of input row order.
    """
    seen: dict[int, str] = {}
    for code, desc in rows:
        if code in seen:
            raise CatalogConflictError(f"duplicate DRG code {code}")
        seen[code] = desc

    grouped: dict[str, dict[SeverityArm, DrgCode]] = {}
    arm_of: dict[int, tuple[str, SeverityArm]] = {}
    for code in sorted(seen):
        drg = DrgCode(code, seen[code], version_tag)
        base_text, arm = dissect_description(drg.description)
        members = grouped.setdefault(base_text, {})
        if arm in members:
            raise InconsistentCatalogError(
                f"codes {members[arm].code} and {code} share base {base_text!r} and arm {arm.value}"
            )
        members[arm] = drg
        arm_of[code] = (base_text, arm)

    bases: list[BaseDrg] = []
    base_ids: dict[str, int] = {}
    for base_text, members in grouped.items():
        try:
            split = classify_split(members)
        except InconsistentCatalogError as exc:
            raise InconsistentCatalogError(f"base {base_text!r}: {exc}") from None
        ordered = dict(sorted(members.items(), key=lambda kv: kv[1].code))
        base_ids[base_text] = len(bases)
        bases.append(BaseDrg(len(bases), base_text, MappingProxyType(ordered), split))

    entries = [
        CatalogEntry(DrgCode(code, seen[code], version_tag), base_ids[arm_of[code][0]], arm_of[code][1])
        for code in sorted(seen)
    ]
    return DrgCatalog(entries, bases)


def _clean_description(raw: str) -> str:
    return " ".join(raw.split())


def parse_catalog(table_text: str, version_tag: str = "v34.0") -> DrgCatalog:
    """Parse ``code,description`` CSV text (header optional) into a catalog."""
    rows: list[tuple[int, str]] = []
    first_line: dict[int, int] = {}
    reader = csv.reader(io.StringIO(table_text))
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and [c.strip().lower() for c in row] == ["code", "description"]:
            continue
        if len(row) != 2:
            raise CatalogParseError(lineno, f"expected 2 fields, got {len(row)}")
        code_s, desc = row[0].strip(), _clean_description(row[1])
        try:
            code = int(code_s, 10)
        except ValueError:
            raise CatalogParseError(lineno, f"code {code_s!r} is not an integer") from None
        if not desc:
            raise CatalogParseError(lineno, "empty description")
        if desc != desc.upper():
            raise CatalogParseError(lineno, f"description not uppercase: {desc!r}")
        if code in first_line:
            raise CatalogConflictError(f"line {lineno}: duplicate DRG code {code} (first on line {first_line[code]})")
        first_line[code] = lineno
        rows.append((code, desc))
    return build_catalog(rows, version_tag)


def load_catalog(path: str | Path) -> DrgCatalog:
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    if path.suffix == ".json":
        data = json.loads(text)
        return build_catalog((e["code"], e["description"]) for e in data["entries"])
    return parse_catalog(text)


def bundled_catalog_path() -> Path:
    """Synthetic stand-in for the v34.0 table with the reference counts."""
    return Path(__file__).parent / "data" / "msdrg_v34_synthetic.csv"
