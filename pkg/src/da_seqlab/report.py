"""CSV and Markdown emitters for the pipeline's tables."""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

from .corpus import CorpusSummary
from .freqstats import FrequencyTable, TestResult
from .permtest import PermutationResult
from .reliability import KappaResult
from .scoring import CompositeScore, GainRecord, GroupAssignment
from .seqmine import Pattern

FORMATS = ("csv", "md", "both")

FREQ_COLUMNS = [
    "da", "overall_n", "overall_pct", "hp_n", "hp_pct", "lp_n", "lp_pct",
    "chi2", "p", "p_adj", "flag",
]
PATTERN_TEST_COLUMNS = ["pattern", "hp_sup", "lp_sup", "sup_diff", "p", "p_adj", "flag"]


def markdown_table(header: Sequence[str], rows: Sequence[Sequence[object]]) -> str:
    lines = ["| " + " | ".join(header) + " |", "|" + "|".join("---" for _ in header) + "|"]
    for row in rows:
        lines.append("| " + " | ".join(str(c) for c in row) + " |")
    return "\n".join(lines) + "\n"


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit(out_dir: Path, stem: str, header, rows, fmt: str = "both", md_header=None, md_rows=None,
         title: str | None = None) -> list[Path]:
    """Write ``stem.csv`` and/or ``stem.md``; returns the written paths."""
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}")
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt in ("csv", "both"):
        path = out_dir / f"{stem}.csv"
        write_csv(path, header, rows)
        written.append(path)
    if fmt in ("md", "both"):
        path = out_dir / f"{stem}.md"
        text = (f"## {title}\n\n" if title else "") + markdown_table(md_header or header, md_rows or rows)
        path.write_text(text, encoding="utf-8")
        written.append(path)
    return written


def _p(x: float) -> str:
    return f"{x:.3f}"


# --- per-stage tables ----------------------------------------------------

def frequency_rows(table: FrequencyTable, results: Sequence[TestResult]):
    by_label = {r.key: r for r in results}
    csv_rows, md_rows = [], []
    for row in table.rows:
        t = by_label[row.label]
        csv_rows.append([
            row.label, row.n_total, f"{row.pct_total:.4f}", row.n_hp, f"{row.pct_hp:.4f}",
            row.n_lp, f"{row.pct_lp:.4f}", f"{t.statistic:.6f}", f"{t.p_raw:.6g}",
            f"{t.p_adj:.6g}", t.flag,
        ])
        md_rows.append([
            row.label, row.n_total, f"{row.pct_total:.1f}", row.n_hp, f"{row.pct_hp:.1f}",
            row.n_lp, f"{row.pct_lp:.1f}", f"{t.statistic:.2f}", _p(t.p_raw),
            _p(t.p_adj) + t.flag,
        ])
    md_rows.append(["SUM", table.total, "100", table.total_hp, "100", table.total_lp, "100", "", "", ""])
    md_header = ["DA", "Overall n", "%", "HP n", "%", "LP n", "%", "χ²(1)", "p", "p_adj"]
    return csv_rows, md_header, md_rows


def pattern_test_rows(results: Sequence[PermutationResult]):
    csv_rows, md_rows = [], []
    for i, r in enumerate(results, start=1):
        csv_rows.append([r.text, r.support_hp, r.support_lp, r.support_diff,
                         f"{r.p_raw:.6f}", f"{r.p_adj:.6f}", r.flag])
        md_rows.append([i, r.text, r.support_hp, r.support_lp, r.support_diff,
                        _p(r.p_raw), _p(r.p_adj) + r.flag])
    md_header = ["No.", "DA pattern", "HP SUP", "LP SUP", "SUP DIFF", "p", "p_adj"]
    return csv_rows, md_header, md_rows


def pattern_rows(patterns: Sequence[Pattern]):
    def opt(v):
        return "" if v is None else v

    return [
        [p.text, len(p.labels), p.support_total, opt(p.support_hp), opt(p.support_lp), opt(p.support_diff)]
        for p in patterns
    ]


def summary_rows(s: CorpusSummary):
    head = [
        ["sessions", s.n_sessions], ["learners", s.n_learners], ["turns", s.n_turns],
        ["mean_turns_per_session", s.mean_turns_text], ["da_events", s.n_events],
        ["removed_empty_turns", s.removed_empty_turns],
    ]
    labels = [[lab, n] for lab, n in s.label_counts.items()]
    return head, labels


def kappa_rows(results: Sequence[KappaResult]):
    return [
        [r.code, f"{r.kappa:.4f}", f"{r.observed_agreement:.4f}", f"{r.expected_agreement:.4f}",
         r.n, "degenerate" if r.degenerate else ""]
        for r in results
    ]


def score_rows(scores: Sequence[CompositeScore], gains: Sequence[GainRecord], groups: GroupAssignment):
    comp = {(s.learner_id, s.timepoint): s.composite for s in scores}
    return [
        [g.learner_id, f"{comp[(g.learner_id, 'pre')]:.6f}", f"{comp[(g.learner_id, 'post')]:.6f}",
         f"{g.gain:.6f}", groups.learner_groups[g.learner_id]]
        for g in sorted(gains, key=lambda g: (-g.gain, g.learner_id))
    ]
