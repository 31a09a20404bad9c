import itertools
import json

import pytest

from drgkit.catalog import (
    CcMccLabel,
    SeverityArm,
    SplitType,
    arm_to_label,
    bundled_catalog_path,
    classify_split,
    compose,
    dissect_description,
    label_valid_set,
    map_label_to_arm,
    parse_catalog,
    recompose_description,
)
from drgkit.errors import CatalogConflictError, CatalogParseError, InconsistentCatalogError, NotFoundError
from drgkit.synth import SPLIT_ARMS, synthetic_catalog_csv

A, L, S = SeverityArm, CcMccLabel, SplitType


def test_two_row_table_gives_one_mcc_vs_rest_base():
    cat = parse_catalog("56, DEGENERATIVE NERVOUS SYSTEM DISORDERS WITH MCC\n"
                        "57, DEGENERATIVE NERVOUS SYSTEM DISORDERS WITHOUT MCC\n")
    assert len(cat.bases) == 1
    assert cat.bases[0].split is S.TWO_WAY_MCC_VS_REST
    assert cat.bases[0].base_text == "DEGENERATIVE NERVOUS SYSTEM DISORDERS"


def test_empty_input():
    cat = parse_catalog("")
    assert len(cat) == 0 and len(cat.bases) == 0


def test_bundled_table_counts(catalog):
    assert len(catalog) == 757
    assert len(catalog.bases) == 340
    assert catalog.split_counts() == {S.THREE_WAY: 154, S.TWO_WAY_CCMCC_VS_NONE: 44,
                                      S.TWO_WAY_MCC_VS_REST: 65, S.NO_SPLIT: 77}


def test_bundled_file_matches_generator():
    assert bundled_catalog_path().read_text() == synthetic_catalog_csv()


@pytest.mark.parametrize("text,expected", [
    ("TRACHEOSTOMY FOR FACE MOUTH AND NECK DIAGNOSES WITH MCC",
     ("TRACHEOSTOMY FOR FACE MOUTH AND NECK DIAGNOSES", A.WITH_MCC)),
    ("TRANSIENT ISCHEMIA", ("TRANSIENT ISCHEMIA", A.NONE)),
    ("SPINAL DISORDERS AND INJURIES WITH CC/MCC", ("SPINAL DISORDERS AND INJURIES", A.WITH_CC_MCC)),
    ("SPINAL DISORDERS AND INJURIES WITHOUT CC/MCC", ("SPINAL DISORDERS AND INJURIES", A.WITHOUT_CC_MCC)),
    ("CONCUSSION WITH CC", ("CONCUSSION", A.WITH_CC)),
    ("DEGENERATIVE NERVOUS SYSTEM DISORDERS WITHOUT MCC", ("DEGENERATIVE NERVOUS SYSTEM DISORDERS", A.WITHOUT_MCC)),
    # mid-string descriptor stays in the base
    ("OTHER BACK PROCEDURES WITH MCC OR DISC DEVICE", ("OTHER BACK PROCEDURES WITH MCC OR DISC DEVICE", A.NONE)),
    ("WITH MCC", ("WITH MCC", A.NONE)),
])
def test_dissect(text, expected):
    assert dissect_description(text) == expected


@pytest.mark.parametrize("arms,expected", [
    ({A.WITH_MCC, A.WITH_CC, A.WITHOUT_CC_MCC}, S.THREE_WAY),
    ({A.WITH_CC_MCC, A.WITHOUT_CC_MCC}, S.TWO_WAY_CCMCC_VS_NONE),
    ({A.WITH_MCC, A.WITHOUT_MCC}, S.TWO_WAY_MCC_VS_REST),
    ({A.NONE}, S.NO_SPLIT),
])
def test_classify_split(arms, expected):
    assert classify_split(arms) is expected


@pytest.mark.parametrize("arms", [{A.WITH_CC, A.NONE}, {A.WITH_MCC}, set(), {A.WITH_MCC, A.WITH_CC}])
def test_classify_split_rejects(arms):
    with pytest.raises(InconsistentCatalogError):
        classify_split(arms)


def test_arm_to_label_table():
    assert arm_to_label(A.NONE) is L.NOT_APPLICABLE
    assert arm_to_label(A.WITH_MCC) is L.WITH_MCC
    assert arm_to_label(A.WITH_CC_MCC) is L.WITH_CC
    assert {arm_to_label(a) for a in A} == set(L)


def test_label_valid_sets(small_catalog):
    by_code = {e.code: e.base_id for e in small_catalog.entries}
    assert label_valid_set(small_catalog.base(by_code[69])) == {L.NOT_APPLICABLE}
    assert label_valid_set(small_catalog.base(by_code[56])) == {L.WITH_MCC, L.WITHOUT_MCC}
    assert label_valid_set(small_catalog.base(by_code[52])) == {L.WITH_CC, L.WITHOUT_CC_MCC}


def test_cc_label_order():
    assert [l.name for l in L] == ["WITHOUT_CC_MCC", "WITH_CC", "WITH_MCC", "WITHOUT_MCC", "NOT_APPLICABLE"]
    assert len(L) == 5


def test_mapping_examples():
    assert map_label_to_arm(L.WITH_CC, S.TWO_WAY_MCC_VS_REST) is A.WITHOUT_MCC
    assert map_label_to_arm(L.WITH_MCC, S.NO_SPLIT) is A.NONE
    assert map_label_to_arm(L.WITHOUT_MCC, S.THREE_WAY) is A.WITHOUT_CC_MCC


@pytest.mark.parametrize("label,split", list(itertools.product(L, S)))
def test_mapping_total_and_member(label, split):
    assert map_label_to_arm(label, split) in SPLIT_ARMS[split]


def test_compose_examples(small_catalog):
    ischemia = small_catalog.base_by_text("TRANSIENT ISCHEMIA").base_id
    degen = small_catalog.base_by_text("DEGENERATIVE NERVOUS SYSTEM DISORDERS").base_id
    assert compose(ischemia, L.WITH_MCC, small_catalog).code == 69
    assert compose(degen, L.WITH_CC, small_catalog).code == 57
    assert compose(degen, L.WITH_MCC, small_catalog).code == 56
    with pytest.raises(NotFoundError):
        compose(99, L.WITH_MCC, small_catalog)


def test_round_trip_and_composition_soundness(catalog):
    for e in catalog.entries:
        base = catalog.base(e.base_id)
        assert recompose_description(base.base_text, e.arm) == e.drg.description
        assert compose(e.base_id, arm_to_label(e.arm), catalog).code == e.code


def test_parse_errors():
    with pytest.raises(CatalogParseError, match="line 2"):
        parse_catalog("code,description\nabc,FOO\n")
    with pytest.raises(CatalogParseError):
        parse_catalog("1,FOO,BAR\n")
    with pytest.raises(CatalogParseError):
        parse_catalog("1,lowercase text\n")
    with pytest.raises(CatalogConflictError):
        parse_catalog("1,FOO\n1,BAR\n")
    with pytest.raises(InconsistentCatalogError):
        parse_catalog("1,FOO WITH CC\n2,FOO\n")


def test_quoted_description_with_comma():
    cat = parse_catalog('code,description\n5,"ECMO OR TRACHEOSTOMY, MAJOR O.R. WITH MCC"\n6,"ECMO OR TRACHEOSTOMY, MAJOR O.R. WITHOUT MCC"\n')
    assert cat.bases[0].base_text == "ECMO OR TRACHEOSTOMY, MAJOR O.R."


def test_base_ids_independent_of_row_order(small_catalog):
    from conftest import SMALL_TABLE
    lines = SMALL_TABLE.strip().splitlines()
    shuffled = parse_catalog("\n".join([lines[0]] + lines[:0:-1]))
    assert shuffled.to_dict() == small_catalog.to_dict()


def test_dump_schema(small_catalog):
    d = json.loads(small_catalog.dumps())
    assert set(d) == {"entries", "bases"}
    assert set(d["entries"][0]) == {"code", "description", "base_id", "arm"}
    assert set(d["bases"][0]) == {"base_id", "base_text", "split", "members"}
