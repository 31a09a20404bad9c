import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drgkit.preprocess import (
    CandidateStay,
    RawNote,
    StayRecord,
    build_candidates,
    cohort_stats,
    drop_rare_drgs,
    extract_brief_hospital_course,
    filter_cohort,
    read_cohort,
    stratified_split,
    train_count,
    write_cohort,
)


def words(n, tag="w"):
    return " ".join(f"{tag}{i}" for i in range(n))


def test_extract_section():
    note = "Chief Complaint:\nfall\nBrief Hospital Course:\nPatient admitted...\nMedications on Admission:\naspirin"
    assert extract_brief_hospital_course(note) == "Patient admitted..."


def test_extract_missing_and_lowercase_header():
    assert extract_brief_hospital_course("History of Present Illness:\nfoo") is None
    assert extract_brief_hospital_course("brief hospital course:\nbody text\nDischarge Disposition:\nHome") == "body text"


def test_extract_inline_and_runs_to_end():
    note = RawNote("1", "Brief Hospital Course: starts here\nand continues", "X")
    assert extract_brief_hospital_course(note) == "starts here\nand continues"


def test_sentence_ending_in_colon_is_not_a_header():
    note = "Brief Hospital Course:\nthe plan was as follows:\nrest\nFollowup Instructions:\nnone"
    assert extract_brief_hospital_course(note) == "the plan was as follows:\nrest"


def test_filter_word_boundary_and_duplicates():
    recs = [
        CandidateStay("a", words(39), 69),
        CandidateStay("b", words(40), 69),
        CandidateStay("c", words(40), 69),
        CandidateStay("d", None, 69),
        CandidateStay("e", words(50), None),
    ]
    kept, report = filter_cohort(recs)
    assert [r.stay_id for r in kept] == ["b"]
    assert report.to_dict() == {"duplicate": 1, "missing_section": 1, "too_short": 1, "unmapped_drg": 1}


def test_drop_rare():
    recs = [StayRecord(str(i), "t", c) for i, c in enumerate([1, 2, 2, 3, 3, 3])]
    assert [r.drg_code for r in drop_rare_drgs(recs)] == [2, 2, 3, 3, 3]
    assert drop_rare_drgs([]) == []


@pytest.mark.parametrize("n,expected", [(0, 0), (1, 1), (2, 2), (3, 3), (5, 5), (10, 9), (15, 14), (20, 18), (25, 23)])
def test_train_count_round_half_up(n, expected):
    # 0.9 * 5 = 4.5 rounds up to 5; 0.9 * 15 = 13.5 to 14; 0.9 * 25 = 22.5 to 23
    assert train_count(n) == expected


def _fixture(sizes):
    recs = []
    for code, n in sizes.items():
        recs += [StayRecord(f"{code}-{i}", f"text {code} {i}", code) for i in range(n)]
    random.Random(1).shuffle(recs)
    return recs


def test_split_counts_fixture():
    split = stratified_split(_fixture({1: 2, 2: 3, 3: 10, 4: 20}), seed=0)
    assert Counter(r.drg_code for r in split.train) == {1: 2, 2: 3, 3: 9, 4: 18}
    assert Counter(r.drg_code for r in split.test) == {3: 1, 4: 2}


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.integers(1, 30), st.integers(1, 25), min_size=1, max_size=6), st.integers(0, 10**6))
def test_split_properties(sizes, seed):
    recs = _fixture(sizes)
    a = stratified_split(recs, seed=seed)
    b = stratified_split(recs, seed=seed)
    assert a.train == b.train and a.test == b.test
    assert sorted(r.stay_id for r in a.train + a.test) == sorted(r.stay_id for r in recs)
    other = stratified_split(recs, seed=seed + 1)
    for code, n in sizes.items():
        got = sum(r.drg_code == code for r in a.train)
        assert got == train_count(n) == sum(r.drg_code == code for r in other.train)


def test_cohort_stats_median():
    recs = _fixture({1: 1, 2: 2, 3: 3, 4: 4})
    assert cohort_stats(recs)["median_cases_per_class"] == 2.5
    assert cohort_stats(_fixture({7: 5}))["median_cases_per_class"] == 5


def test_cohort_round_trip():
    split = stratified_split(_fixture({1: 4, 2: 6}), seed=3)
    back = read_cohort(write_cohort(split))
    assert back.train == split.train and back.test == split.test


def test_build_candidates():
    notes = [RawNote("1", "Brief Hospital Course:\nx", "A W CC"), RawNote("2", "nothing", "EXCL")]
    cands = build_candidates(notes, {"A WITH CC": 5, "EXCL": "EXCLUDE"}, normalize=lambda s: s.replace(" W ", " WITH "))
    assert cands == [CandidateStay("1", "x", 5), CandidateStay("2", None, None)]
    with pytest.raises(ValueError):
        build_candidates(notes + notes[:1], {})
