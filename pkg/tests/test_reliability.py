from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from conftest import write_jsonl
from da_seqlab.reliability import (
    DualAnnotation,
    cohen_kappa_binary,
    icc_two_way,
    kappa_all,
    kappa_per_code,
    load_annotations,
)


def anns_from_presence(code, a, b):
    return [
        DualAnnotation("x", i, frozenset([code] if x else []), frozenset([code] if y else []))
        for i, (x, y) in enumerate(zip(a, b))
    ]


def kappa_oracle(a, b):
    """Exact rational kappa from the 2x2 table."""
    n = len(a)
    p_o = Fraction(sum(x == y for x, y in zip(a, b)), n)
    pa, pb = Fraction(sum(a), n), Fraction(sum(b), n)
    p_e = pa * pb + (1 - pa) * (1 - pb)
    return (p_o - p_e) / (1 - p_e), p_o, p_e


A = [1, 1, 1, 0, 0, 0, 0, 0, 0, 0]
B = [1, 1, 0, 1, 0, 0, 0, 0, 0, 0]


def test_hand_fixture():
    r = kappa_per_code(anns_from_presence("Q", A, B), "Q")
    k, p_o, p_e = kappa_oracle(A, B)
    assert (p_o, p_e) == (Fraction(4, 5), Fraction(29, 50))
    assert r.observed_agreement == pytest.approx(0.8)
    assert r.expected_agreement == pytest.approx(0.58)
    assert r.kappa == pytest.approx(float(k), abs=1e-12)
    assert r.kappa == pytest.approx(0.5238, abs=1e-4)
    assert r.n == 10


def test_identical_coders():
    r = kappa_per_code(anns_from_presence("S", A, A), "S")
    assert r.kappa == 1.0 and not r.degenerate


def test_constant_identical_coders_degenerate():
    r = kappa_per_code(anns_from_presence("S", [1] * 4, [1] * 4), "S")
    assert r.kappa == 1.0 and r.degenerate


def test_chance_coders_near_zero():
    a = [1, 1, 0, 0] * 25
    b = [1, 0, 1, 0] * 25
    assert kappa_per_code(anns_from_presence("A", a, b), "A").kappa == pytest.approx(0.0, abs=1e-12)


def test_empty_list_errors():
    with pytest.raises(ValueError):
        kappa_per_code([], "Q")


def test_three_codes_rejected():
    with pytest.raises(ValueError):
        DualAnnotation("x", 0, frozenset({"Q", "A", "S"}), frozenset())


def test_kappa_all_ranks_low_agreement_first():
    # D: 16 turns, each coder marks 8, overlap 5 -> p_o = 10/16, p_e = 1/2, kappa = 1/4
    d_a = [1] * 8 + [0] * 8
    d_b = [1] * 5 + [0] * 3 + [1] * 3 + [0] * 5
    q = [i % 3 == 0 for i in range(16)]
    anns = [
        DualAnnotation("x", i, frozenset({"D"} if d_a[i] else set()) | ({"Q"} if q[i] else set()),
                       frozenset({"D"} if d_b[i] else set()) | ({"Q"} if q[i] else set()))
        for i in range(16)
    ]
    res = kappa_all(anns)
    assert [r.code for r in res] == ["D", "Q"]
    assert res[0].kappa == pytest.approx(0.25)
    assert res[1].kappa == 1.0


def test_kappa_all_single_code():
    assert len(kappa_all(anns_from_presence("G", A, B))) == 1


def test_by_label_splits_roles(tmp_path):
    path = write_jsonl(tmp_path / "a.jsonl", [
        {"session_id": "x", "turn": 0, "a": ["Q"], "b": ["Q"], "speaker": "chatbot"},
        {"session_id": "x", "turn": 1, "a": ["Q"], "b": [], "speaker": "student"},
        {"session_id": "x", "turn": 2, "a": ["R"], "b": ["R"], "speaker": "student"},
    ])
    anns = load_annotations(path)
    keys = {r.code for r in kappa_all(anns, by_label=True)}
    assert keys == {"[t]Q", "[s]Q", "[s]R"}
    assert {r.code for r in kappa_all(anns)} == {"Q", "R"}


def test_load_annotations_reports_line(tmp_path):
    path = write_jsonl(tmp_path / "a.jsonl", [{"session_id": "x", "turn": 0, "a": ["Z"], "b": []}])
    with pytest.raises(ValueError, match="line 1"):
        load_annotations(path)


presence = st.lists(st.tuples(st.booleans(), st.booleans()), min_size=1, max_size=40)


@given(presence)
def test_kappa_matches_rational_oracle_and_is_symmetric(pairs):
    a = [x for x, _ in pairs]
    b = [y for _, y in pairs]
    k, p_o, p_e, degenerate = cohen_kappa_binary(a, b)
    k_swap = cohen_kappa_binary(b, a)[0]
    assert k == pytest.approx(k_swap, abs=1e-12)
    if not degenerate:
        ok, _, _ = kappa_oracle([int(x) for x in a], [int(y) for y in b])
        assert k == pytest.approx(float(ok), abs=1e-12)
        flipped = cohen_kappa_binary([not x for x in a], [not y for y in b])[0]
        assert k == pytest.approx(flipped, abs=1e-12)
        assert -1 - 1e-12 <= k <= 1 + 1e-12


# --- ICC -------------------------------------------------------------------------

def test_icc_identical_raters():
    assert icc_two_way([[1, 1], [2, 2], [5, 5]]).icc == pytest.approx(1.0)


def test_icc_negative_three_subjects():
    # by hand: SSR = 0, SSC = 24, SSE = 4 -> MSR 0, MSC 24, MSE 2
    # ICC = (0 - 2) / (0 + 2 + 2 * (24 - 2) / 3) = -3/25
    r = icc_two_way([[1, -1], [2, -2], [3, -3]])
    assert (r.ms_rows, r.ms_cols, r.ms_error) == pytest.approx((0.0, 24.0, 2.0))
    assert r.icc == pytest.approx(-0.12, abs=1e-12)
    assert r.icc < 0


def test_icc_four_subject_fixture():
    # grand mean 5.25; SSR 22.5, SSC 0.5, SST 25.5, SSE 2.5
    # MSR 7.5, MSC 0.5, MSE 5/6 -> ICC = (20/3) / (49/6) = 40/49
    r = icc_two_way([[4, 5], [6, 6], [8, 7], [2, 4]])
    assert r.ms_rows == pytest.approx(7.5, abs=1e-9)
    assert r.ms_cols == pytest.approx(0.5, abs=1e-9)
    assert r.ms_error == pytest.approx(5 / 6, abs=1e-9)
    assert r.icc == pytest.approx(40 / 49, abs=1e-9)
    assert (r.n_subjects, r.n_raters, r.model) == (4, 2, "ICC(2,1)")


def test_icc_constant_is_degenerate():
    r = icc_two_way([[3, 3], [3, 3]])
    assert r.icc == 1.0 and r.degenerate


@pytest.mark.parametrize("bad", [[[1, 2]], [[1, 2, 3], [4, 5, 6]], [[1, np.nan], [2, 3]]])
def test_icc_rejects_bad_shapes(bad):
    with pytest.raises(ValueError):
        icc_two_way(bad)


matrix = st.lists(
    st.tuples(st.integers(-50, 50), st.integers(-50, 50)), min_size=2, max_size=12
)


@given(matrix, st.integers(-1000, 1000))
def test_icc_shift_invariant_and_bounded(rows, c):
    x = np.array(rows, dtype=float)
    assume(np.ptp(x) > 0)
    r = icc_two_way(x)
    assert icc_two_way(x + c).icc == pytest.approx(r.icc, abs=1e-9)
    assert icc_two_way(x[:, ::-1]).icc == pytest.approx(r.icc, abs=1e-9)
    assert r.icc <= 1 + 1e-12
