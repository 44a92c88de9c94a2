"""CAF composite proficiency scores, pre-post gains and the HP/LP split."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus

logger = logging.getLogger(__name__)

INDICATORS: tuple[str, ...] = (
    "lexical_complexity",
    "grammatical_complexity",
    "lexical_accuracy",
    "grammatical_accuracy",
    "speed_fluency",
    "breakdown_repair_fluency",
)

# CSV column -> indicator
CSV_COLUMNS: dict[str, str] = {
    "lex_cx": "lexical_complexity",
    "gram_cx": "grammatical_complexity",
    "lex_acc": "lexical_accuracy",
    "gram_acc": "grammatical_accuracy",
    "speed_flu": "speed_fluency",
    "bdr_flu": "breakdown_repair_fluency",
}

# error and dysfluency rates: lower is better
DEFAULT_ORIENTATION: dict[str, int] = {
    "lexical_complexity": 1,
    "grammatical_complexity": 1,
    "lexical_accuracy": -1,
    "grammatical_accuracy": -1,
    "speed_fluency": 1,
    "breakdown_repair_fluency": -1,
}

TIMEPOINTS = ("pre", "post")
HP, LP = "HP", "LP"


@dataclass(frozen=True)
class ProficiencyRecord:
    learner_id: str
    timepoint: str
    indicators: Mapping[str, float]

    def __post_init__(self) -> None:
        if self.timepoint not in TIMEPOINTS:
            raise ValueError(f"timepoint must be 'pre' or 'post', got {self.timepoint!r}")
        missing = set(INDICATORS) - set(self.indicators)
        if missing:
            raise ValueError(f"{self.learner_id}/{self.timepoint}: missing {sorted(missing)}")
        for name in INDICATORS:
            if not math.isfinite(self.indicators[name]):
                raise ValueError(f"{self.learner_id}/{self.timepoint}: {name} is not finite")


@dataclass(frozen=True)
class CompositeScore:
    learner_id: str
    timepoint: str
    z_indicators: Mapping[str, float]
    composite: float


@dataclass(frozen=True)
class GainRecord:
    learner_id: str
    gain: float


@dataclass
class GroupAssignment:
    learner_groups: dict[str, str]
    session_groups: dict[str, str] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def for_corpus(self, corpus: Corpus) -> "GroupAssignment":
        """Attach session groups; every session inherits its learner's group."""
        missing = sorted(corpus.learners - self.learner_groups.keys())
        if missing:
            raise ValueError(f"learners without a group: {missing}")
        sessions = {s.session_id: self.learner_groups[s.learner_id] for s in corpus.sessions}
        return GroupAssignment(dict(self.learner_groups), sessions, list(self.warnings))

    def learners_in(self, group: str) -> list[str]:
        return sorted(lid for lid, g in self.learner_groups.items() if g == group)


def load_proficiency(path: str | Path) -> list[ProficiencyRecord]:
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"learner_id", "timepoint", *CSV_COLUMNS}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise ValueError(f"proficiency CSV must have columns {sorted(need)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                ind = {CSV_COLUMNS[c]: float(row[c]) for c in CSV_COLUMNS}
                records.append(ProficiencyRecord(row["learner_id"], row["timepoint"], ind))
            except ValueError as exc:
                raise ValueError(f"line {lineno}: {exc}") from None
    return records


def dump_proficiency(records: Iterable[ProficiencyRecord], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["learner_id", "timepoint", *CSV_COLUMNS])
        for r in records:
            values = [repr(float(r.indicators[ind])) for ind in CSV_COLUMNS.values()]
            w.writerow([r.learner_id, r.timepoint, *values])


def load_groups(path: str | Path) -> GroupAssignment:
    groups = {}
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            g = row["group"].strip().upper()
            if g not in (HP, LP):
                raise ValueError(f"unknown group {row['group']!r} for {row['learner_id']}")
            groups[row["learner_id"]] = g
    return GroupAssignment(groups)


def dump_groups(groups: GroupAssignment, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["learner_id", "group"])
        for lid in sorted(groups.learner_groups):
            w.writerow([lid, groups.learner_groups[lid]])


def zscore(values: Sequence[float]) -> list[float]:
    """Standardize with the sample standard deviation (divisor n - 1)."""
    n = len(values)
    if n < 2:
        raise ValueError("z-score needs at least 2 values")
    mean = math.fsum(values) / n
    var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
    if var == 0.0:
        raise ValueError("zero variance")
    sd = math.sqrt(var)
    return [(v - mean) / sd for v in values]


def composite_scores(
    records: Sequence[ProficiencyRecord],
    orientation: Mapping[str, int] | None = None,
    *,
    standardize: str = "within",
) -> list[CompositeScore]:
    """Z-score every indicator across learners, flip lower-is-better
    indicators, and average the six oriented z-scores.

    ``standardize="within"`` computes z-scores separately per timepoint;
    ``"pooled"`` standardizes pre and post values together.
    """
    orientation = dict(DEFAULT_ORIENTATION if orientation is None else orientation)
    if set(orientation) != set(INDICATORS) or any(s not in (1, -1) for s in orientation.values()):
        raise ValueError("orientation must map each of the six indicators to +1 or -1")
    if standardize not in ("within", "pooled"):
        raise ValueError(f"unknown standardization {standardize!r}")

    table: dict[tuple[str, str], ProficiencyRecord] = {}
    for r in records:
        key = (r.learner_id, r.timepoint)
        if key in table:
            raise ValueError(f"duplicate record for {r.learner_id}/{r.timepoint}")
        table[key] = r
    learners = sorted({lid for lid, _ in table})
    for lid in learners:
        for tp in TIMEPOINTS:
            if (lid, tp) not in table:
                raise ValueError(f"learner {lid} is missing the {tp} timepoint")
    if len(learners) < 2:
        raise ValueError("need at least 2 learners")

    blocks = [[tp] for tp in TIMEPOINTS] if standardize == "within" else [list(TIMEPOINTS)]
    z: dict[tuple[str, str], dict[str, float]] = {k: {} for k in table}
    for tps in blocks:
        keys = [(lid, tp) for tp in tps for lid in learners]
        for ind in INDICATORS:
            try:
                zs = zscore([table[k].indicators[ind] for k in keys])
            except ValueError as exc:
                raise ValueError(f"{ind} ({'/'.join(tps)}): {exc}") from None
            for k, v in zip(keys, zs):
                z[k][ind] = orientation[ind] * v

    return [
        CompositeScore(lid, tp, z[(lid, tp)], math.fsum(z[(lid, tp)].values()) / len(INDICATORS))
        for tp in TIMEPOINTS
        for lid in learners
    ]


def gains_and_groups(scores: Sequence[CompositeScore]) -> tuple[list[GainRecord], GroupAssignment]:
    """Gain = post - pre composite; top half of learners by gain are HP.

    Ties are broken by learner id; an odd learner goes to LP.  Both cases
    are recorded in ``GroupAssignment.warnings``.
    """
    by_key = {(s.learner_id, s.timepoint): s.composite for s in scores}
    learners = sorted({s.learner_id for s in scores})
    gains = []
    for lid in learners:
        if (lid, "pre") not in by_key or (lid, "post") not in by_key:
            raise ValueError(f"missing composite for learner {lid}")
        gains.append(GainRecord(lid, by_key[(lid, "post")] - by_key[(lid, "pre")]))

    ranked = sorted(gains, key=lambda g: (-g.gain, g.learner_id))
    n_hp = len(ranked) // 2
    warnings = []
    if len(ranked) % 2:
        warnings.append(f"odd learner count ({len(ranked)}); extra learner assigned to LP")
    if 0 < n_hp < len(ranked) and ranked[n_hp - 1].gain == ranked[n_hp].gain:
        warnings.append(
            f"tied gain {ranked[n_hp].gain:.6g} straddles the median; split by learner_id"
        )
    for w in warnings:
        logger.warning(w)
    groups = {g.learner_id: (HP if i < n_hp else LP) for i, g in enumerate(ranked)}
    return gains, GroupAssignment(groups, warnings=warnings)
