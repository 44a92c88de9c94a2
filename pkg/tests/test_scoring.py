import statistics

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from da_seqlab.scoring import (
    DEFAULT_ORIENTATION,
    INDICATORS,
    CompositeScore,
    ProficiencyRecord,
    composite_scores,
    dump_proficiency,
    gains_and_groups,
    load_proficiency,
    zscore,
)

FIXTURE = {
    # learner: (pre, post), indicator order as INDICATORS
    "a": ([12.0, 1.4, 5.0, 9.0, 1.8, 14.0], [15.0, 1.9, 3.5, 6.0, 2.6, 10.0]),
    "b": ([9.5, 1.2, 4.0, 8.5, 2.1, 12.5], [10.0, 1.3, 4.2, 8.0, 2.2, 12.0]),
    "c": ([11.0, 1.7, 6.5, 11.0, 1.5, 16.0], [11.5, 1.6, 6.0, 10.5, 1.6, 15.5]),
    "d": ([8.0, 1.1, 3.0, 7.0, 2.4, 11.0], [9.5, 1.5, 2.5, 6.5, 2.9, 9.0]),
}


def records(table=FIXTURE, swap=False):
    out = []
    for lid, (pre, post) in table.items():
        if swap:
            pre, post = post, pre
        out.append(ProficiencyRecord(lid, "pre", dict(zip(INDICATORS, pre))))
        out.append(ProficiencyRecord(lid, "post", dict(zip(INDICATORS, post))))
    return out


def composites_oracle(table):
    """Step-by-step recomputation with numpy (sample sd), independent of the package."""
    lids = sorted(table)
    signs = np.array([DEFAULT_ORIENTATION[i] for i in INDICATORS], dtype=float)
    out = {}
    for t, tp in enumerate(("pre", "post")):
        m = np.array([table[lid][t] for lid in lids])
        z = (m - m.mean(axis=0)) / m.std(axis=0, ddof=1)
        comp = (z * signs).mean(axis=1)
        for lid, c in zip(lids, comp):
            out[(lid, tp)] = c
    return out


def test_zscore_small():
    assert zscore([1, 2, 3]) == pytest.approx([-1.0, 0.0, 1.0], abs=1e-15)


def test_zscore_zero_variance():
    with pytest.raises(ValueError, match="zero variance"):
        zscore([5, 5, 5])


def test_zscore_standardizes():
    z = zscore([2, 4, 4, 4, 5, 5, 7, 9])
    assert abs(statistics.fmean(z)) <= 1e-12
    assert abs(statistics.stdev(z) - 1) <= 1e-12


@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40))
def test_zscore_property(values):
    assume(statistics.pstdev(values) > 1e-3)
    z = zscore(values)
    assert abs(statistics.fmean(z)) <= 1e-12
    assert abs(statistics.stdev(z) - 1) <= 1e-12


def test_composites_match_oracle():
    got = {(s.learner_id, s.timepoint): s.composite for s in composite_scores(records())}
    want = composites_oracle(FIXTURE)
    assert got.keys() == want.keys()
    for k in want:
        assert abs(got[k] - want[k]) <= 1e-12


def test_orientation_makes_good_learner_positive():
    # learner "d" is above average on higher-is-better and below on lower-is-better at post
    table = {
        "a": ([1, 1, 1, 1, 1, 1], [1, 1, 5, 5, 1, 5]),
        "b": ([2, 2, 2, 2, 2, 2], [2, 2, 4, 4, 2, 4]),
        "c": ([3, 3, 3, 3, 3, 3], [3, 3, 3, 3, 3, 3]),
        "d": ([4, 4, 4, 4, 4, 4], [9, 9, 0, 0, 9, 0]),
    }
    scores = {(s.learner_id, s.timepoint): s.composite for s in composite_scores(records(table))}
    assert scores[("d", "post")] > 0
    assert all(v > 0 for k, v in composite_scores(records(table))[-1].z_indicators.items())


def test_identical_learners_error():
    same = ([1, 2, 3, 4, 5, 6], [1, 2, 3, 4, 5, 6])
    with pytest.raises(ValueError, match="zero variance"):
        composite_scores(records({"a": same, "b": same}))


def test_missing_timepoint_errors():
    recs = [r for r in records() if not (r.learner_id == "a" and r.timepoint == "post")]
    with pytest.raises(ValueError, match="missing"):
        composite_scores(recs)


def test_location_invariance():
    base = {(s.learner_id, s.timepoint): s for s in composite_scores(records())}
    shifted = {k: (list(v[0]), list(v[1])) for k, v in FIXTURE.items()}
    for lid in shifted:
        shifted[lid][0][2] += 100.0
    moved = {(s.learner_id, s.timepoint): s for s in composite_scores(records(shifted))}
    for k in base:
        assert moved[k].z_indicators["lexical_accuracy"] == pytest.approx(base[k].z_indicators["lexical_accuracy"], abs=1e-12)


def test_pooled_standardization_differs():
    within = composite_scores(records())
    pooled = composite_scores(records(), standardize="pooled")
    allz = [s.composite for s in pooled]
    assert abs(sum(allz)) < 1e-12
    assert [s.composite for s in within] != allz


# --- gains and groups ---------------------------------------------------------

def scores_from_gains(gains):
    out = []
    for lid, g in gains.items():
        out += [CompositeScore(lid, "pre", {}, 0.0), CompositeScore(lid, "post", {}, float(g))]
    return out


def test_gain_split_simple():
    _, groups = gains_and_groups(scores_from_gains({"a": 3, "b": 2, "c": 1, "d": 0}))
    assert groups.learners_in("HP") == ["a", "b"]
    assert groups.learners_in("LP") == ["c", "d"]
    assert groups.warnings == []


def test_twelve_learners_split_evenly():
    _, groups = gains_and_groups(scores_from_gains({f"L{i:02d}": i * 0.1 for i in range(12)}))
    assert len(groups.learners_in("HP")) == len(groups.learners_in("LP")) == 6


def test_all_equal_gains_deterministic_with_warning():
    _, groups = gains_and_groups(scores_from_gains({"d": 1, "c": 1, "b": 1, "a": 1}))
    assert groups.learners_in("HP") == ["a", "b"]
    assert any("tied" in w for w in groups.warnings)


def test_odd_count_warns():
    _, groups = gains_and_groups(scores_from_gains({"a": 3, "b": 2, "c": 1}))
    assert groups.learners_in("HP") == ["a"]
    assert any("odd" in w for w in groups.warnings)


def test_swap_pre_post_negates_gains_and_exchanges_groups():
    g1, grp1 = gains_and_groups(composite_scores(records()))
    g2, grp2 = gains_and_groups(composite_scores(records(swap=True)))
    d1 = {g.learner_id: g.gain for g in g1}
    d2 = {g.learner_id: g.gain for g in g2}
    for lid in d1:
        assert abs(d1[lid] + d2[lid]) <= 1e-12
    assert grp1.learners_in("HP") == grp2.learners_in("LP")
    assert grp1.learners_in("LP") == grp2.learners_in("HP")


@given(st.lists(st.integers(-1000, 1000), min_size=4, max_size=12, unique=True).filter(lambda v: len(v) % 2 == 0),
       st.floats(0.01, 100), st.floats(-100, 100))
def test_groups_invariant_under_positive_affine(gains, scale, shift):
    lids = [f"L{i:02d}" for i in range(len(gains))]
    _, g1 = gains_and_groups(scores_from_gains(dict(zip(lids, gains))))
    _, g2 = gains_and_groups(scores_from_gains({l: scale * g + shift for l, g in zip(lids, gains)}))
    assert g1.learner_groups == g2.learner_groups


def test_proficiency_csv_roundtrip(tmp_path):
    recs = records()
    dump_proficiency(recs, tmp_path / "p.csv")
    assert load_proficiency(tmp_path / "p.csv") == recs
