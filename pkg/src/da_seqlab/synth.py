"""Seeded synthetic corpora: Markov DA streams with an optional planted pattern.

Roles alternate turn by turn (chatbot first).  Each turn draws its first
code from the transition row of the previous event restricted to the
speaker's labels; a second, distinct code is added with the role's
two-code rate.  A planted pattern is spliced in as whole turns at a
uniformly chosen turn boundary, independently per session, with a
per-group probability.

Every session draws from its own generator seeded with
``[seed, learner_index, session_index]``, so sessions can be generated in
any order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Corpus, DACode, DALabel, Session, SpeakerRole, Turn, dump_corpus
from .scoring import (
    DEFAULT_ORIENTATION,
    HP,
    INDICATORS,
    LP,
    GroupAssignment,
    ProficiencyRecord,
    dump_groups,
    dump_proficiency,
)

# overall label counts of the reference corpus (6,957 coded DAs)
REFERENCE_COUNTS: dict[str, int] = {
    "[t]Q": 2186, "[s]R": 1895, "[t]A": 1323, "[t]S": 331, "[t]R": 179,
    "[t]Cp": 169, "[s]S": 128, "[s]Q": 110, "[s]M": 96, "[s]G": 93,
    "[t]G": 82, "[t]Ce": 78, "[s]T": 68, "[t]Cr": 66, "[t]T": 54,
    "[s]D": 47, "[s]A": 19, "[t]D": 17, "[t]M": 16,
}


def reference_marginals() -> dict[str, float]:
    total = sum(REFERENCE_COUNTS.values())
    return {lab: n / total for lab, n in REFERENCE_COUNTS.items()}


@dataclass(frozen=True)
class PlantedPattern:
    labels: tuple[str, ...]
    rate_hp: float
    rate_lp: float

    def __post_init__(self) -> None:
        if not self.labels:
            raise ValueError("planted pattern is empty")
        for lab in self.labels:
            DALabel.parse(lab)
        for r in (self.rate_hp, self.rate_lp):
            if not 0.0 <= r <= 1.0:
                raise ValueError("injection rates must lie in [0, 1]")


@dataclass(frozen=True)
class GeneratorSpec:
    n_learners: int = 12
    sessions_per_learner: int = 6
    turns_min: int = 60
    turns_max: int = 80
    initial: Mapping[str, float] | None = None  # None: reference marginals
    transitions: Mapping[str, Mapping[str, float]] | None = None  # None: rows = initial
    two_code_rate: float = 0.4  # chatbot turns
    student_two_code_rate: float = 0.0
    planted: PlantedPattern | None = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_learners < 2 or self.sessions_per_learner < 1:
            raise ValueError("need >= 2 learners and >= 1 session per learner")
        if not 1 <= self.turns_min <= self.turns_max:
            raise ValueError("need 1 <= turns_min <= turns_max")
        for r in (self.two_code_rate, self.student_two_code_rate):
            if not 0.0 <= r <= 1.0:
                raise ValueError("two-code rates must lie in [0, 1]")
        _check_distribution("initial", self.initial_probs())
        for lab, row in self.transition_probs().items():
            _check_distribution(f"transition row {lab}", row)

    def initial_probs(self) -> dict[str, float]:
        return dict(reference_marginals() if self.initial is None else self.initial)

    def transition_probs(self) -> dict[str, dict[str, float]]:
        init = self.initial_probs()
        if self.transitions is None:
            return {lab: dict(init) for lab in init}
        return {lab: dict(row) for lab, row in self.transitions.items()}


def _check_distribution(name: str, probs: Mapping[str, float]) -> None:
    for lab, p in probs.items():
        DALabel.parse(lab)
        if p < 0 or not np.isfinite(p):
            raise ValueError(f"{name}: invalid probability {p} for {lab}")
    if abs(sum(probs.values()) - 1.0) > 1e-9:
        raise ValueError(f"{name}: probabilities sum to {sum(probs.values())}, not 1")


class _Sampler:
    def __init__(self, spec: GeneratorSpec) -> None:
        self.initial = spec.initial_probs()
        self.rows = spec.transition_probs()
        self._cache: dict = {}

    def draw(self, rng: np.random.Generator, prev: str | None, role: SpeakerRole, exclude=()) -> str | None:
        key = (prev, role, tuple(exclude))
        if key not in self._cache:
            row = self.rows.get(prev, self.initial) if prev is not None else self.initial
            choice = self._restricted(row, role, exclude)
            if choice is None:
                choice = self._restricted(self.initial, role, exclude)
            self._cache[key] = choice
        choice = self._cache[key]
        if choice is None:
            return None
        labels, cum = choice
        i = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
        return labels[min(i, len(labels) - 1)]

    @staticmethod
    def _restricted(row: Mapping[str, float], role: SpeakerRole, exclude):
        labels = sorted(
            lab for lab, p in row.items()
            if p > 0 and lab.startswith(role.prefix) and lab not in exclude
        )
        if not labels:
            return None
        return labels, np.cumsum([row[lab] for lab in labels])


def planted_turns(labels: Sequence[str]) -> list[tuple[SpeakerRole, tuple[DACode, ...]]]:
    """Group a label run into turns: same-role neighbours share a turn (max 2 codes)."""
    turns: list[tuple[SpeakerRole, list[DACode]]] = []
    for text in labels:
        lab = DALabel.parse(text)
        if turns and turns[-1][0] is lab.role and len(turns[-1][1]) < 2 and lab.code not in turns[-1][1]:
            turns[-1][1].append(lab.code)
        else:
            turns.append((lab.role, [lab.code]))
    return [(role, tuple(codes)) for role, codes in turns]


def learner_ids(n: int) -> list[str]:
    width = max(2, len(str(n)))
    return [f"L{i + 1:0{width}d}" for i in range(n)]


def observed_groups(spec: GeneratorSpec) -> dict[str, str]:
    """First half of learners (by id) are HP; an odd extra learner is LP."""
    ids = learner_ids(spec.n_learners)
    n_hp = spec.n_learners // 2
    return {lid: (HP if i < n_hp else LP) for i, lid in enumerate(ids)}


def _session(spec: GeneratorSpec, sampler: _Sampler, li: int, si: int, lid: str, group: str):
    rng = np.random.default_rng([spec.seed, li, si])
    n_turns = int(rng.integers(spec.turns_min, spec.turns_max + 1))
    raw: list[tuple[SpeakerRole, tuple[DACode, ...]]] = []
    prev: str | None = None
    for t in range(n_turns):
        role = SpeakerRole.CHATBOT if t % 2 == 0 else SpeakerRole.STUDENT
        rate = spec.two_code_rate if role is SpeakerRole.CHATBOT else spec.student_two_code_rate
        first = sampler.draw(rng, prev, role)
        if first is None:
            raise ValueError(f"no labels available for role {role.value}")
        codes = [first]
        if rng.random() < rate:
            second = sampler.draw(rng, first, role, exclude=(first,))
            if second is not None:
                codes.append(second)
        raw.append((role, tuple(DALabel.parse(c).code for c in codes)))
        prev = codes[-1]

    injection = None
    if spec.planted is not None:
        rate = spec.planted.rate_hp if group == HP else spec.planted.rate_lp
        if rng.random() < rate:
            at = int(rng.integers(0, len(raw) + 1))
            raw[at:at] = planted_turns(spec.planted.labels)
            injection = at
    sid = f"{lid}-S{si + 1:02d}"
    turns = tuple(Turn(i, role, codes) for i, (role, codes) in enumerate(raw))
    return Session(sid, lid, turns), injection


def generate(spec: GeneratorSpec) -> tuple[Corpus, GroupAssignment, dict]:
    """Generate a corpus, its group assignment and a ground-truth manifest."""
    sampler = _Sampler(spec)
    groups = observed_groups(spec)
    sessions = []
    injections = []
    for li, lid in enumerate(learner_ids(spec.n_learners)):
        for si in range(spec.sessions_per_learner):
            session, at = _session(spec, sampler, li, si, lid, groups[lid])
            sessions.append(session)
            if at is not None:
                injections.append(
                    {"session_id": session.session_id, "learner_id": lid,
                     "group": groups[lid], "turn": at}
                )
    corpus = Corpus.from_sessions(sessions)
    manifest = {
        "seed": spec.seed,
        "planted": None if spec.planted is None else {
            "labels": list(spec.planted.labels),
            "rate_hp": spec.planted.rate_hp,
            "rate_lp": spec.planted.rate_lp,
        },
        "injections": injections,
    }
    return corpus, GroupAssignment(groups).for_corpus(corpus), manifest


def generate_proficiency(spec: GeneratorSpec, groups: GroupAssignment, effect: float = 2.0) -> list[ProficiencyRecord]:
    """Pre/post indicator records whose composite gains reproduce ``groups``.

    HP learners improve by ``effect`` (in indicator units, noise sd 1) on
    every indicator in the better direction; LP learners do not.
    """
    rng = np.random.default_rng([spec.seed, 0x5C0E])
    base = {
        "lexical_complexity": 10.0, "grammatical_complexity": 1.5, "lexical_accuracy": 4.0,
        "grammatical_accuracy": 8.0, "speed_fluency": 2.0, "breakdown_repair_fluency": 12.0,
    }
    records = []
    for lid in sorted(groups.learner_groups):
        shift = effect if groups.learner_groups[lid] == HP else 0.0
        pre = {ind: base[ind] + rng.normal(0.0, 1.0) for ind in INDICATORS}
        post = {
            ind: pre[ind] + DEFAULT_ORIENTATION[ind] * shift + rng.normal(0.0, 0.1)
            for ind in INDICATORS
        }
        records.append(ProficiencyRecord(lid, "pre", pre))
        records.append(ProficiencyRecord(lid, "post", post))
    return records


def write_fixture(spec: GeneratorSpec, out_dir: str | Path) -> dict[str, Path]:
    """Write corpus.jsonl, groups.csv, proficiency.csv and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus, groups, manifest = generate(spec)
    paths = {
        "corpus": out / "corpus.jsonl",
        "groups": out / "groups.csv",
        "proficiency": out / "proficiency.csv",
        "manifest": out / "manifest.json",
    }
    dump_corpus(corpus, paths["corpus"])
    dump_groups(groups, paths["groups"])
    dump_proficiency(generate_proficiency(spec, groups), paths["proficiency"])
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return paths
