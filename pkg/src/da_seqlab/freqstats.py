"""Per-label frequency tables by group and label-vs-rest chi-square tests."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

from .corpus import Corpus, flatten, order_labels
from .scoring import HP, LP, GroupAssignment


@dataclass(frozen=True)
class FrequencyRow:
    label: str
    n_total: int
    pct_total: float
    n_hp: int
    pct_hp: float
    n_lp: int
    pct_lp: float


@dataclass(frozen=True)
class FrequencyTable:
    rows: tuple[FrequencyRow, ...]
    total: int
    total_hp: int
    total_lp: int

    def __len__(self) -> int:
        return len(self.rows)

    def row(self, label: str) -> FrequencyRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    @classmethod
    def from_counts(cls, hp: dict[str, int], lp: dict[str, int]) -> "FrequencyTable":
        """Build a table from per-group label counts."""
        labels = set(hp) | set(lp)
        total_hp = sum(hp.values())
        total_lp = sum(lp.values())
        total = total_hp + total_lp
        totals = {lab: hp.get(lab, 0) + lp.get(lab, 0) for lab in labels}

        def pct(n: int, d: int) -> float:
            return 100.0 * n / d if d else 0.0

        rows = tuple(
            FrequencyRow(
                lab,
                totals[lab],
                pct(totals[lab], total),
                hp.get(lab, 0),
                pct(hp.get(lab, 0), total_hp),
                lp.get(lab, 0),
                pct(lp.get(lab, 0), total_lp),
            )
            for lab in order_labels(totals)
        )
        return cls(rows, total, total_hp, total_lp)


def frequency_table(corpus: Corpus, groups: GroupAssignment) -> FrequencyTable:
    """Count every flattened DA event by label and group."""
    counts = {HP: Counter(), LP: Counter()}
    for s in corpus.sessions:
        group = groups.session_groups.get(s.session_id)
        if group is None:
            group = groups.learner_groups.get(s.learner_id)
        if group not in counts:
            raise ValueError(f"session {s.session_id!r} has no group")
        counts[group].update(flatten(s).events)
    return FrequencyTable.from_counts(dict(counts[HP]), dict(counts[LP]))


def chi2_sf_1df(x: float) -> float:
    """Upper tail of the chi-square distribution with one degree of freedom."""
    if x <= 0.0:
        return 1.0
    return math.erfc(math.sqrt(x / 2.0))


def chisq_2x2_yates(
    k1: int, n1: int, k2: int, n2: int, *, correction: bool = True
) -> tuple[float, int, float]:
    """Chi-square test of ``k1/n1`` vs ``k2/n2`` on the 2x2 table
    ``[[k1, n1-k1], [k2, n2-k2]]``.

    With ``correction`` (the default) each ``|O - E|`` is reduced by 0.5,
    floored at zero.  Returns ``(statistic, df, p)``.
    """
    if n1 <= 0 or n2 <= 0:
        raise ValueError("group totals must be positive")
    if not (0 <= k1 <= n1 and 0 <= k2 <= n2):
        raise ValueError("counts must satisfy 0 <= k <= n")
    observed = ((k1, n1 - k1), (k2, n2 - k2))
    n = n1 + n2
    col = (k1 + k2, n - k1 - k2)
    rows = (n1, n2)
    stat = 0.0
    for i in range(2):
        for j in range(2):
            expected = rows[i] * col[j] / n
            if expected == 0.0:
                raise ValueError("degenerate table: an expected count is zero")
            dev = abs(observed[i][j] - expected)
            if correction:
                dev = max(dev - 0.5, 0.0)
            stat += dev * dev / expected
    return stat, 1, chi2_sf_1df(stat)


def holm_bonferroni(p_values: Sequence[float]) -> list[float]:
    """Holm step-down adjusted p-values, in input order."""
    m = len(p_values)
    for p in p_values:
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"p-value {p} outside [0, 1]")
    order = sorted(range(m), key=lambda i: p_values[i])
    adjusted = [0.0] * m
    running = 0.0
    for rank, i in enumerate(order):
        running = max(running, min(1.0, (m - rank) * p_values[i]))
        adjusted[i] = running
    return adjusted


def flag(p_adj: float, alpha: float = 0.05, marginal: float = 0.10) -> str:
    """``"*"`` when significant, ``"†"`` in the marginal band, else ``""``."""
    if p_adj < alpha:
        return "*"
    if p_adj < marginal:
        return "†"
    return ""


@dataclass(frozen=True)
class TestResult:
    key: str
    statistic: float
    df: int
    p_raw: float
    p_adj: float
    significant: bool
    flag: str = ""


def compare_frequencies(
    table: FrequencyTable,
    *,
    correction: bool = True,
    alpha: float = 0.05,
    marginal: float = 0.10,
) -> list[TestResult]:
    """One label-vs-rest chi-square per row; Holm family is all rows."""
    if not table.rows:
        raise ValueError("frequency table has no label rows")
    raw = [
        chisq_2x2_yates(r.n_hp, table.total_hp, r.n_lp, table.total_lp, correction=correction)
        for r in table.rows
    ]
    adjusted = holm_bonferroni([p for _, _, p in raw])
    return [
        TestResult(r.label, stat, df, p, adj, adj < alpha, flag(adj, alpha, marginal))
        for r, (stat, df, p), adj in zip(table.rows, raw, adjusted)
    ]
