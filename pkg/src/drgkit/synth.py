"""Deterministic synthetic data: a v34-shaped DRG table and discharge notes.

The public MS-DRG v34.0 table is not redistributed here.  The synthetic table
keeps its shape (757 codes, 340 bases, 154/44/65/77 split topology) and uses
real descriptions for the handful of codes whose text is public knowledge
(11-13, 52-53, 56-57, 69, 88-90); every other base text is generated.
"""

from __future__ import annotations

import csv
import io
import random
from dataclasses import dataclass

from drgkit.catalog import (
    ARM_DESCRIPTORS,
    DrgCatalog,
    SeverityArm,
    SplitType,
)

SPLIT_SIZES = {
    SplitType.THREE_WAY: 154,
    SplitType.TWO_WAY_CCMCC_VS_NONE: 44,
    SplitType.TWO_WAY_MCC_VS_REST: 65,
    SplitType.NO_SPLIT: 77,
}

SPLIT_ARMS = {
    SplitType.THREE_WAY: (SeverityArm.WITH_MCC, SeverityArm.WITH_CC, SeverityArm.WITHOUT_CC_MCC),
    SplitType.TWO_WAY_CCMCC_VS_NONE: (SeverityArm.WITH_CC_MCC, SeverityArm.WITHOUT_CC_MCC),
    SplitType.TWO_WAY_MCC_VS_REST: (SeverityArm.WITH_MCC, SeverityArm.WITHOUT_MCC),
    SplitType.NO_SPLIT: (SeverityArm.NONE,),
}

# (first code, base text, split) for descriptions taken verbatim from public DRG listings
ANCHORS = [
    (11, "TRACHEOSTOMY FOR FACE MOUTH AND NECK DIAGNOSES", SplitType.THREE_WAY),
    (52, "SPINAL DISORDERS AND INJURIES", SplitType.TWO_WAY_CCMCC_VS_NONE),
    (56, "DEGENERATIVE NERVOUS SYSTEM DISORDERS", SplitType.TWO_WAY_MCC_VS_REST),
    (69, "TRANSIENT ISCHEMIA", SplitType.NO_SPLIT),
    (88, "CONCUSSION", SplitType.THREE_WAY),
    (693, "URINARY STONES WITHOUT ESW LITHOTRIPSY", SplitType.TWO_WAY_MCC_VS_REST),
]

_SITES = [
    "CARDIAC", "RENAL", "HEPATIC", "PANCREATIC", "PULMONARY", "ESOPHAGEAL", "GASTRIC",
    "BILIARY", "THYROID", "ADRENAL", "PROSTATIC", "OVARIAN", "UTERINE", "SPLENIC",
    "CEREBRAL", "RETINAL", "CUTANEOUS", "SKELETAL", "VASCULAR", "LYMPHATIC",
]
_CONDITIONS = [
    "DISORDERS", "NEOPLASMS", "INFECTIONS", "TRAUMA", "PROCEDURES", "MALFORMATIONS",
    "OBSTRUCTION", "HEMORRHAGE", "RESECTION", "BYPASS", "TRANSPLANT", "BIOPSY",
    "INFLAMMATION", "FAILURE", "REPAIR", "IMPLANT", "DRAINAGE", "STENOSIS",
]


def _generated_base_texts(n: int, seed: int) -> list[str]:
    pool = [f"{s} {c}" for s in _SITES for c in _CONDITIONS]
    random.Random(seed).shuffle(pool)
    return pool[:n]


def synthetic_catalog_rows(seed: int = 34) -> list[tuple[int, str]]:
    """757 (code, description) rows with exact v34.0 split counts."""
    rng = random.Random(seed)
    remaining = dict(SPLIT_SIZES)
    for _, _, split in ANCHORS:
        remaining[split] -= 1
    splits = [s for s, n in remaining.items() for _ in range(n)]
    rng.shuffle(splits)
    texts = _generated_base_texts(len(splits), seed)

    reserved: dict[int, tuple[str, SeverityArm]] = {}
    for first, text, split in ANCHORS:
        for offset, arm in enumerate(SPLIT_ARMS[split]):
            reserved[first + offset] = (text, arm)

    rows: dict[int, str] = {}
    for code, (text, arm) in reserved.items():
        rows[code] = f"{text} {arm.descriptor}".strip()

    code = 1
    for text, split in zip(texts, splits):
        for arm in SPLIT_ARMS[split]:
            while code in reserved:
                code += 1
            rows[code] = f"{text} {ARM_DESCRIPTORS.get(arm, '')}".strip()
            code += 1
    return sorted(rows.items())


def synthetic_catalog_csv(seed: int = 34) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["code", "description"])
    w.writerows(synthetic_catalog_rows(seed))
    return buf.getvalue()


# ---------------------------------------------------------------------------
# notes

MCC_TERMS = ["sepsis", "shock", "intubated", "encephalopathy", "pressors", "hemorrhage",
             "arrest", "ventilator", "bacteremia", "coagulopathy"]
CC_TERMS = ["hyponatremia", "anemia", "afib", "hypokalemia", "cellulitis", "ckd",
            "copd", "dehydration", "delirium", "malnutrition"]
PLAIN_TERMS = ["uncomplicated", "ambulating", "routine", "unremarkable", "afebrile",
               "independent", "euvolemic", "asymptomatic"]

_FILLER = """patient was admitted to the floor and seen by the team overnight labs were
reviewed and the plan was discussed with family home medications continued vital signs
monitored pain controlled with oral agents physical therapy evaluated mobility diet advanced
as tolerated imaging obtained on hospital day two consults followed daily nursing reported no
acute events overnight fluids given and electrolytes repleted as needed follow up arranged with
primary care provider discharge planning started early social work involved case management
reviewed insurance medication reconciliation completed on day of discharge patient understood
instructions and agreed with plan repeat labs in one week blood pressure within goal glucose
checked before meals wound checked daily telemetry without events""".split()

_SYLLABLES = ["ka", "lo", "mi", "ren", "tor", "vex", "zu", "pra", "qui", "sel", "dan", "bri",
              "cor", "fen", "gal", "hux", "jor", "lum", "nep", "oss"]


def _marker_terms(base_id: int, k: int = 2) -> list[str]:
    """Per-base pseudo-words; deterministic and unique across bases."""
    rng = random.Random(f"marker:{base_id}")
    terms = []
    for j in range(k):
        syl = "".join(rng.choice(_SYLLABLES) for _ in range(3))
        terms.append(f"{syl}{base_id}x{j}")
    return terms


def _arm_terms(arm: SeverityArm, rng: random.Random) -> list[str]:
    if arm is SeverityArm.WITH_MCC:
        pool = MCC_TERMS
    elif arm is SeverityArm.WITH_CC:
        pool = CC_TERMS
    elif arm is SeverityArm.WITHOUT_CC_MCC:
        pool = PLAIN_TERMS
    elif arm is SeverityArm.WITHOUT_MCC:
        pool = rng.choice([CC_TERMS, PLAIN_TERMS])
    elif arm is SeverityArm.WITH_CC_MCC:
        pool = rng.choice([MCC_TERMS, CC_TERMS])
    else:
        pool = rng.choice([MCC_TERMS, CC_TERMS, PLAIN_TERMS])
    return rng.sample(pool, 2)


def historical_variant(description: str, rng: random.Random) -> str:
    """Render a description in an older, abbreviated style."""
    out = description
    out = out.replace(" WITHOUT ", " W/O ").replace(" WITH ", " W ")
    if out.endswith(" PROCEDURES") or " PROCEDURES " in out:
        out = out.replace("PROCEDURES", "PROC")
    if rng.random() < 0.5:
        out = out.title()
    return out


@dataclass
class NoteSpec:
    n_notes: int = 5000
    n_bases: int = 60
    seed: int = 7
    arm_noise: float = 0.04
    historical_rate: float = 0.3
    short_rate: float = 0.01
    duplicate_rate: float = 0.005
    missing_section_rate: float = 0.005
    unmapped_rate: float = 0.005


def choose_bases(catalog: DrgCatalog, n_bases: int) -> list[int]:
    """Evenly spaced base ids; split types are interleaved in the table."""
    ids = [b.base_id for b in catalog.bases]
    if n_bases >= len(ids):
        return ids
    step = len(ids) / n_bases
    return [ids[int(i * step)] for i in range(n_bases)]


def _course_text(base_words: list[str], markers: list[str], arm_terms: list[str],
                 rng: random.Random, n_words: int) -> str:
    words = [rng.choice(_FILLER) for _ in range(n_words)]
    for term in base_words + markers + arm_terms:
        words.insert(rng.randrange(len(words) + 1), term)
    return " ".join(words)


def _wrap_note(course: str | None, rng: random.Random) -> str:
    parts = [
        "Name:  ___                     Unit No:   ___",
        "Chief Complaint:",
        rng.choice(["shortness of breath", "abdominal pain", "fall", "fever", "weakness"]),
        "History of Present Illness:",
        " ".join(rng.choice(_FILLER) for _ in range(20)),
    ]
    if course is not None:
        parts += ["Brief Hospital Course:", course]
    parts += [
        "Medications on Admission:",
        "aspirin 81 mg daily",
        "Discharge Disposition:",
        "Home",
    ]
    return "\n".join(parts)


def synthetic_notes(catalog: DrgCatalog, params: NoteSpec | None = None) -> list[dict]:
    """Raw note objects (``stay_id``, ``text``, ``drg_description``).

    Course text mixes filler with base-specific words and arm-correlated
    severity terms; a small share of notes is short, duplicated, missing the
    course section, or carries an unmappable historical DRG.
    """
    params = params or NoteSpec()
    rng = random.Random(params.seed)
    bases = [catalog.base(i) for i in choose_bases(catalog, params.n_bases)]
    codes = [(b, arm, drg) for b in bases for arm, drg in b.members.items()]
    all_pools = [MCC_TERMS, CC_TERMS, PLAIN_TERMS]

    notes: list[dict] = []
    previous_course: str | None = None
    for i in range(params.n_notes):
        base, arm, drg = codes[i % len(codes)] if i < len(codes) else rng.choice(codes)
        base_words = [w.lower() for w in base.base_text.split() if len(w) > 3]
        base_words = rng.sample(base_words, min(2, len(base_words)))
        terms = _arm_terms(arm, rng)
        if rng.random() < params.arm_noise:
            terms[0] = rng.choice(rng.choice(all_pools))
        roll = rng.random()
        n_words = rng.randint(45, 90)
        if roll < params.short_rate:
            n_words = rng.randint(5, 25)
        course = _course_text(base_words, _marker_terms(base.base_id), terms, rng, n_words)
        if params.short_rate <= roll < params.short_rate + params.duplicate_rate and previous_course:
            course = previous_course
        description = drg.description
        if rng.random() < params.historical_rate:
            description = historical_variant(description, rng)
        if rng.random() < params.unmapped_rate:
            description = "URINARY STONES W MCC"
        has_section = rng.random() >= params.missing_section_rate
        notes.append({
            "stay_id": f"S{i:06d}",
            "text": _wrap_note(course if has_section else None, rng),
            "drg_description": description,
        })
        previous_course = course
    return notes

