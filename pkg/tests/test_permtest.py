import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import make_session
from da_seqlab.corpus import Corpus, EventStream
from da_seqlab.permtest import (
    ClusterDesign,
    exact_masks,
    exact_permutation_test,
    monte_carlo_permutation_test,
    pattern_stat,
    random_masks,
    read_results_csv,
    test_pattern_set,
    write_results_csv,
)
from da_seqlab.scoring import GroupAssignment
from da_seqlab.seqmine import Pattern

HIT = [("s", ["Q"]), ("t", ["Cp"]), ("t", ["A"]), ("s", ["D"]), ("t", ["Q"]), ("s", ["R"])]
MISS = [("t", ["Q"]), ("s", ["R"])]
P1 = ("[s]Q", "[t]Cp")
P2 = ("[t]A", "[s]D")
EVERYWHERE = ("[t]Q", "[s]R")


def build(hits_per_learner, sessions=6, n_hp=None):
    """Learner i has ``hits_per_learner[i]`` sessions containing P1 and P2."""
    n = len(hits_per_learner)
    n_hp = n // 2 if n_hp is None else n_hp
    lids = [f"L{i:02d}" for i in range(n)]
    out = []
    for lid, h in zip(lids, hits_per_learner):
        for j in range(sessions):
            out.append(make_session(f"{lid}-{j}", lid, HIT if j < h else MISS))
    corpus = Corpus.from_sessions(out)
    groups = GroupAssignment({lid: ("HP" if i < n_hp else "LP") for i, lid in enumerate(lids)})
    groups = groups.for_corpus(corpus)
    return corpus, groups, ClusterDesign.from_groups(corpus, groups)


def enumerate_p(hits, n_hp):
    """Independent oracle: loop over every HP subset with itertools."""
    n = len(hits)
    obs = sum(hits[:n_hp]) - sum(hits[n_hp:])
    extreme = total = 0
    for hp in itertools.combinations(range(n), n_hp):
        s = sum(hits[i] for i in hp)
        total += 1
        extreme += abs(s - (sum(hits) - s)) >= abs(obs)
    return extreme, total


# --- exact ---------------------------------------------------------------------------------

def test_two_vs_two_hand_enumeration():
    # sessions of the two observed-HP learners contain the pattern; |stat| = 2 is reached
    # by {a,b} (+2) and {c,d} (-2) only, so p = 2/6
    corpus, groups, design = build([1, 1, 0, 0], sessions=1)
    r = exact_permutation_test(P1, corpus, design)
    assert enumerate_p([1, 1, 0, 0], 2) == (2, 6)
    assert r.p_raw == 2 / 6
    assert r.n_permutations == 6
    assert (r.support_hp, r.support_lp, r.observed_stat) == (2, 0, 2)


def test_everywhere_pattern_has_p_one():
    corpus, _, design = build([6, 6, 6, 6])
    assert exact_permutation_test(P1, corpus, design).p_raw == 1.0
    assert monte_carlo_permutation_test(P1, corpus, design, n=500, seed=3).p_raw == 1.0


def test_pattern_stat_examples():
    corpus, groups, _ = build([3, 3, 1, 0], sessions=4)
    assert pattern_stat(P1, corpus, groups) == 5
    assert pattern_stat(("[s]G",), corpus, groups) == 0
    flipped = {sid: ("LP" if g == "HP" else "HP") for sid, g in groups.session_groups.items()}
    assert pattern_stat(P1, corpus, flipped) == -5


def test_twelve_learner_p_is_multiple_of_924():
    hits = [6, 5, 5, 3, 5, 6, 1, 4, 1, 1, 2, 0]
    corpus, _, design = build(hits)
    r = exact_permutation_test(P1, corpus, design)
    assert r.n_permutations == 924
    assert r.p_raw * 924 == pytest.approx(round(r.p_raw * 924), abs=1e-9)
    assert round(r.p_raw * 924) == enumerate_p(hits, 6)[0] == 4


def test_exact_cap():
    with pytest.raises(ValueError, match="cap"):
        exact_masks(30, 15, cap=1000)
    assert exact_masks(4, 2).sum(axis=1).tolist() == [2] * 6


hit_vectors = st.lists(st.integers(0, 3), min_size=4, max_size=8).filter(lambda v: len(v) % 2 == 0)


@settings(max_examples=40)
@given(hit_vectors, st.randoms(use_true_random=False))
def test_exact_matches_oracle_and_invariances(hits, rnd):
    corpus, groups, design = build(hits, sessions=3)
    n_hp = len(hits) // 2
    r = exact_permutation_test(P1, corpus, design)
    extreme, total = enumerate_p(hits, n_hp)
    assert r.p_raw == extreme / total
    assert r.p_raw >= 1 / math.comb(len(hits), n_hp)

    # relabel learners and reorder sessions
    perm = list(range(len(hits)))
    rnd.shuffle(perm)
    rename = {f"L{i:02d}": f"X{perm[i]:02d}" for i in range(len(hits))}
    sessions = []
    for s in corpus:
        sessions.append(type(s)("z" + s.session_id, rename[s.learner_id], s.turns))
    rnd.shuffle(sessions)
    c2 = Corpus.from_sessions(sessions)
    g2 = GroupAssignment({rename[k]: v for k, v in groups.learner_groups.items()}).for_corpus(c2)
    assert exact_permutation_test(P1, c2, ClusterDesign.from_groups(c2, g2)).p_raw == r.p_raw

    # exchange group labels
    g3 = GroupAssignment({k: ("LP" if v == "HP" else "HP") for k, v in groups.learner_groups.items()})
    assert exact_permutation_test(P1, corpus, ClusterDesign.from_groups(corpus, g3.for_corpus(corpus))).p_raw == r.p_raw


# --- Monte Carlo ----------------------------------------------------------------------------

def test_mc_deterministic_and_close_to_exact():
    corpus, _, design = build([6, 5, 5, 3, 5, 6, 1, 4, 1, 1, 2, 0])
    a = monte_carlo_permutation_test(P1, corpus, design, n=20_000, seed=11)
    b = monte_carlo_permutation_test(P1, corpus, design, n=20_000, seed=11)
    exact = exact_permutation_test(P1, corpus, design).p_raw
    assert a == b
    assert abs(a.p_raw - exact) <= 0.02


def test_mc_within_three_sigma_in_most_seeds():
    corpus, _, design = build([4, 2, 3, 1, 3, 0, 2, 1, 2, 0, 1, 3])
    exact = exact_permutation_test(P1, corpus, design).p_raw
    n = 2000
    sigma = math.sqrt(exact * (1 - exact) / n)
    ok = sum(
        abs(monte_carlo_permutation_test(P1, corpus, design, n=n, seed=s).p_raw - exact) <= 3 * sigma + 1 / n
        for s in range(100)
    )
    assert ok >= 99


def test_mc_needs_enough_draws():
    corpus, _, design = build([1, 0])
    with pytest.raises(ValueError):
        monte_carlo_permutation_test(P1, corpus, design, n=50)


def test_random_masks_block_seeding():
    a = random_masks(12, 6, 3000, seed=5)
    b = random_masks(12, 6, 1024, seed=5)
    assert (a[:1024] == b).all()
    assert (a.sum(axis=1) == 6).all()


# --- pattern sets -----------------------------------------------------------------------------

ENGINEERED = [6, 5, 5, 3, 5, 6, 1, 4, 1, 1, 2, 0]


def test_two_small_p_among_nine():
    corpus, _, design = build(ENGINEERED)
    family = [P1, P2, EVERYWHERE, ("[t]Q",), ("[s]R",), ("[s]R", "[t]Q"), ("[s]D", "[t]Q"),
              ("[t]Cp", "[t]A"), ("[s]Q", "[t]Cp", "[t]A")]
    res = test_pattern_set(family, corpus, design)
    assert len(res) == 9
    first, second = res[0], res[1]
    assert first.p_raw == second.p_raw == 4 / 924
    for r in (first, second):
        assert r.p_adj == pytest.approx(9 * 4 / 924, abs=1e-15)  # 0.03896
        assert r.flag == "*"
    assert all(r.mode == "exact" for r in res)


def test_single_pattern_family_is_unadjusted():
    corpus, _, design = build(ENGINEERED)
    (r,) = test_pattern_set([P1], corpus, design)
    assert r.p_adj == r.p_raw


def test_empty_family_errors():
    corpus, _, design = build([1, 0])
    with pytest.raises(ValueError):
        test_pattern_set([], corpus, design)


def test_selection_modes_are_more_conservative():
    corpus, _, design = build(ENGINEERED)
    universe = [Pattern(P1, 0), Pattern(P2, 0), Pattern(EVERYWHERE, 0), Pattern(("[t]Cp", "[t]A"), 0)]
    plain = test_pattern_set([P1], corpus, design)[0]
    cond = test_pattern_set([P1], corpus, design, selection="conditional", selection_threshold=10)[0]
    mx = test_pattern_set([P1], corpus, design, selection="max", selection_threshold=10, universe=universe)[0]
    assert plain.p_raw <= cond.p_raw <= 1
    assert plain.p_raw <= mx.p_raw <= 1
    with pytest.raises(ValueError):
        test_pattern_set([P1], corpus, design, selection="max")


def test_selection_rejects_unselected_pattern():
    corpus, _, design = build(ENGINEERED)
    with pytest.raises(ValueError, match="threshold"):
        test_pattern_set([EVERYWHERE], corpus, design, selection="conditional")


def test_prespecified_null_family_rarely_significant():
    from da_seqlab.synth import GeneratorSpec, generate

    family = [("[t]Q", "[s]R"), ("[s]R", "[t]A"), ("[t]A", "[t]Q"), ("[s]R", "[t]Q"),
              ("[t]Q", "[s]R", "[t]Q"), ("[t]S", "[s]R"), ("[s]Q", "[t]A"), ("[t]Cp", "[s]R"),
              ("[s]S", "[t]A")]
    flagged = 0
    for seed in range(40):
        corpus, groups, _ = generate(GeneratorSpec(seed=seed))
        design = ClusterDesign.from_groups(corpus, groups)
        flagged += any(r.flag == "*" for r in test_pattern_set(family, corpus, design))
    assert flagged <= 2  # >= 95% of runs clean


def test_results_csv_roundtrip(tmp_path):
    corpus, _, design = build(ENGINEERED)
    res = test_pattern_set([P1, P2], corpus, design)
    write_results_csv(res, tmp_path / "r.csv")
    back = read_results_csv(tmp_path / "r.csv")
    assert [b["pattern"] for b in back] == [P1, P2]
    assert back[0]["p"] == pytest.approx(res[0].p_raw, abs=1e-6)
    assert back[0]["flag"] == res[0].flag


def test_event_streams_accepted():
    corpus, _, design = build([1, 1, 0, 0], sessions=1)
    streams = [EventStream(s.session_id, tuple(e for t in s.turns for e in t.labels)) for s in corpus]
    assert exact_permutation_test(P1, streams, design).p_raw == 2 / 6
    assert np.isclose(exact_permutation_test(P1, corpus, design, statistic="proportion").p_raw, 2 / 6)
