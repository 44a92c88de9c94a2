"""Annotated dialogue data model, JSONL ingestion, validation and flattening.

A corpus is a set of sessions; a session is an ordered list of turns; each
turn carries a speaker role and one or two dialogue-act codes.  Mining and
counting operate on the *flattened* event stream, where every code becomes
one role-prefixed label (``"[t]Cp"``) and within-turn code order is kept.
"""

from __future__ import annotations

import enum
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Iterator

logger = logging.getLogger(__name__)


class Dimension(str, enum.Enum):
    MEANING = "meaning-focused"
    FORM = "form-focused"


class Function(str, enum.Enum):
    INVITING = "inviting"
    SUSTAINING = "sustaining"
    CONTENT_FEEDBACK = "content-feedback"
    CORRECTIVE_FEEDBACK = "corrective-feedback"


class DACode(str, enum.Enum):
    """The eleven dialogue-act codes of the coding scheme."""

    Q = "Q"  # referential question
    G = "G"  # greeting / closing
    T = "T"  # topic shifting
    S = "S"  # seeking clarification
    A = "A"  # agreement
    D = "D"  # disagreement
    M = "M"  # misinterpretation
    R = "R"  # response
    Cr = "Cr"  # recast
    Cp = "Cp"  # prompt
    Ce = "Ce"  # explicit correction

    @property
    def function(self) -> Function:
        return _FUNCTION[self]

    @property
    def dimension(self) -> Dimension:
        if self.function is Function.CORRECTIVE_FEEDBACK:
            return Dimension.FORM
        return Dimension.MEANING

    @property
    def is_corrective(self) -> bool:
        return self.function is Function.CORRECTIVE_FEEDBACK

    @classmethod
    def parse(cls, symbol: str) -> "DACode":
        try:
            return cls(symbol)
        except ValueError:
            raise ValueError(f"unknown DA code {symbol!r}") from None


_FUNCTION = {
    DACode.Q: Function.INVITING,
    DACode.G: Function.INVITING,
    DACode.T: Function.INVITING,
    DACode.S: Function.SUSTAINING,
    DACode.A: Function.SUSTAINING,
    DACode.D: Function.SUSTAINING,
    DACode.M: Function.SUSTAINING,
    DACode.R: Function.CONTENT_FEEDBACK,
    DACode.Cr: Function.CORRECTIVE_FEEDBACK,
    DACode.Cp: Function.CORRECTIVE_FEEDBACK,
    DACode.Ce: Function.CORRECTIVE_FEEDBACK,
}


class SpeakerRole(str, enum.Enum):
    STUDENT = "student"
    CHATBOT = "chatbot"

    @property
    def prefix(self) -> str:
        return "[s]" if self is SpeakerRole.STUDENT else "[t]"

    @classmethod
    def from_prefix(cls, prefix: str) -> "SpeakerRole":
        for role in cls:
            if role.prefix == prefix:
                return role
        raise ValueError(f"unknown role prefix {prefix!r}")


@dataclass(frozen=True, order=True)
class DALabel:
    """Role-prefixed dialogue-act code, the atomic unit of counting and mining."""

    role: SpeakerRole
    code: DACode

    def __str__(self) -> str:
        return self.role.prefix + self.code.value

    @classmethod
    def parse(cls, text: str) -> "DALabel":
        text = text.strip()
        if len(text) < 4 or text[0] != "[" or text[2] != "]":
            raise ValueError(f"malformed DA label {text!r}")
        return cls(SpeakerRole.from_prefix(text[:3]), DACode.parse(text[3:]))


ALL_LABELS: tuple[str, ...] = tuple(
    role.prefix + code.value for role in SpeakerRole for code in DACode
)


@dataclass(frozen=True)
class Turn:
    index: int
    speaker: SpeakerRole
    codes: tuple[DACode, ...]

    def __post_init__(self) -> None:
        if not 1 <= len(self.codes) <= 2:
            raise ValueError(
                f"turn {self.index}: expected 1-2 codes, got {len(self.codes)}"
            )
        if len(set(self.codes)) != len(self.codes):
            raise ValueError(f"turn {self.index}: duplicate code within turn")

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(self.speaker.prefix + c.value for c in self.codes)


@dataclass(frozen=True)
class Session:
    session_id: str
    learner_id: str
    turns: tuple[Turn, ...]

    def __len__(self) -> int:
        return len(self.turns)

    @property
    def n_events(self) -> int:
        return sum(len(t.codes) for t in self.turns)


@dataclass(frozen=True)
class Corpus:
    sessions: tuple[Session, ...]
    learners: frozenset[str]
    removed_empty_turns: int = 0

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for s in self.sessions:
            if s.session_id in seen:
                raise ValueError(f"duplicate session_id {s.session_id!r}")
            seen.add(s.session_id)
            if s.learner_id not in self.learners:
                raise ValueError(
                    f"session {s.session_id!r}: learner {s.learner_id!r} not in learners"
                )

    @classmethod
    def from_sessions(cls, sessions: Iterable[Session], removed_empty_turns: int = 0) -> "Corpus":
        sessions = tuple(sessions)
        return cls(sessions, frozenset(s.learner_id for s in sessions), removed_empty_turns)

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def session(self, session_id: str) -> Session:
        for s in self.sessions:
            if s.session_id == session_id:
                return s
        raise KeyError(session_id)

    def sessions_by_learner(self) -> dict[str, list[str]]:
        out: dict[str, list[str]] = {lid: [] for lid in sorted(self.learners)}
        for s in self.sessions:
            out[s.learner_id].append(s.session_id)
        return out

    def __eq__(self, other: object) -> bool:
        # the cleaning counter is load metadata, not content
        if not isinstance(other, Corpus):
            return NotImplemented
        return self.sessions == other.sessions and self.learners == other.learners

    def __hash__(self) -> int:
        return hash((self.sessions, self.learners))


@dataclass(frozen=True)
class EventStream:
    session_id: str
    events: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.events)


class CorpusFormatError(ValueError):
    """Raised when a corpus file cannot be parsed or violates the schema."""

    def __init__(self, message: str, line: int | None = None) -> None:
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


_SESSION_KEYS = {"session_id", "learner_id", "turns"}
_TURN_KEYS = {"speaker", "codes"}


def session_from_record(record: dict, *, line: int | None = None) -> tuple[Session, int]:
    """Build a session from one JSON record; returns the session and the
    number of empty turns dropped."""
    if not isinstance(record, dict):
        raise CorpusFormatError("record is not a JSON object", line)
    missing = _SESSION_KEYS - record.keys()
    if missing:
        raise CorpusFormatError(f"missing keys {sorted(missing)}", line)
    extra = record.keys() - _SESSION_KEYS
    if extra:
        logger.warning("line %s: ignoring unknown keys %s", line, sorted(extra))
    if not isinstance(record["turns"], list):
        raise CorpusFormatError("'turns' must be a list", line)

    turns: list[Turn] = []
    dropped = 0
    for raw in record["turns"]:
        if not isinstance(raw, dict) or not _TURN_KEYS <= raw.keys():
            raise CorpusFormatError("turn must be an object with 'speaker' and 'codes'", line)
        try:
            speaker = SpeakerRole(raw["speaker"])
        except ValueError:
            raise CorpusFormatError(f"unknown speaker {raw['speaker']!r}", line) from None
        codes = raw["codes"]
        if not isinstance(codes, list):
            raise CorpusFormatError("'codes' must be a list", line)
        if not codes:
            dropped += 1
            continue
        if len(codes) > 2:
            raise CorpusFormatError(
                f"turn has {len(codes)} codes; at most 2 codes per turn are allowed", line
            )
        try:
            parsed = tuple(DACode.parse(c) for c in codes)
            turns.append(Turn(len(turns), speaker, parsed))
        except ValueError as exc:
            raise CorpusFormatError(str(exc), line) from None
    session = Session(str(record["session_id"]), str(record["learner_id"]), tuple(turns))
    return session, dropped


def session_to_record(session: Session) -> dict:
    return {
        "session_id": session.session_id,
        "learner_id": session.learner_id,
        "turns": [
            {"speaker": t.speaker.value, "codes": [c.value for c in t.codes]}
            for t in session.turns
        ],
    }


def load_corpus(path: str | Path, format: str = "jsonl") -> Corpus:
    """Read a JSONL corpus, dropping empty-code turns.

    Raises :class:`CorpusFormatError` with the offending line number on
    malformed records, unknown codes, turns with more than two codes and
    duplicate session ids.
    """
    if format != "jsonl":
        raise ValueError(f"unsupported corpus format {format!r}")
    sessions: list[Session] = []
    seen: set[str] = set()
    removed = 0
    with open(path, encoding="utf-8") as fh:
        for lineno, text in enumerate(fh, start=1):
            if not text.strip():
                continue
            try:
                record = json.loads(text)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"invalid JSON ({exc.msg})", lineno) from None
            session, dropped = session_from_record(record, line=lineno)
            if session.session_id in seen:
                raise CorpusFormatError(f"duplicate session_id {session.session_id!r}", lineno)
            seen.add(session.session_id)
            removed += dropped
            sessions.append(session)
    if removed:
        logger.info("removed %d empty turns while loading %s", removed, path)
    return Corpus.from_sessions(sessions, removed_empty_turns=removed)


def dump_corpus(corpus: Corpus, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for s in corpus.sessions:
            fh.write(json.dumps(session_to_record(s), ensure_ascii=False) + "\n")


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" | "warning"
    message: str
    session_id: str | None = None
    turn: int | None = None

    def __str__(self) -> str:
        loc = ""
        if self.session_id is not None:
            loc = f"[{self.session_id}" + (f":{self.turn}" if self.turn is not None else "") + "] "
        return f"{self.severity}: {loc}{self.message}"


@dataclass
class ValidationReport:
    issues: list[Issue] = field(default_factory=list)

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def __len__(self) -> int:
        return len(self.issues)


def validate_corpus(corpus: Corpus) -> ValidationReport:
    """Check structural invariants; corrective-feedback codes on student turns
    are reported as warnings only (the coding scheme does not forbid them)."""
    report = ValidationReport()
    seen: set[str] = set()
    for s in corpus.sessions:
        if s.session_id in seen:
            report.issues.append(Issue("error", "duplicate session_id", s.session_id))
        seen.add(s.session_id)
        if s.learner_id not in corpus.learners:
            report.issues.append(Issue("error", f"unknown learner {s.learner_id!r}", s.session_id))
        if not s.turns:
            report.issues.append(Issue("error", "session has no turns after cleaning", s.session_id))
        for pos, t in enumerate(s.turns):
            if t.index != pos:
                report.issues.append(
                    Issue("error", f"turn index {t.index} at position {pos}", s.session_id, pos)
                )
            if not 1 <= len(t.codes) <= 2 or len(set(t.codes)) != len(t.codes):
                report.issues.append(Issue("error", "invalid code list", s.session_id, pos))
            if t.speaker is SpeakerRole.STUDENT:
                for c in t.codes:
                    if c.is_corrective:
                        report.issues.append(
                            Issue(
                                "warning",
                                f"corrective-feedback code {c.value} on a student turn",
                                s.session_id,
                                pos,
                            )
                        )
    return report


def flatten(session: Session) -> EventStream:
    events = tuple(label for t in session.turns for label in t.labels)
    return EventStream(session.session_id, events)


def flatten_corpus(corpus: Corpus) -> list[EventStream]:
    return [flatten(s) for s in corpus.sessions]


def order_labels(counts: dict[str, int]) -> list[str]:
    """Descending frequency, ties broken on label text."""
    return sorted(counts, key=lambda lab: (-counts[lab], lab))


@dataclass(frozen=True)
class CorpusSummary:
    n_sessions: int
    n_learners: int
    n_turns: int
    mean_turns: float | None  # None when the corpus is empty
    n_events: int
    label_counts: dict[str, int]
    removed_empty_turns: int = 0

    @property
    def mean_turns_text(self) -> str:
        return "undefined" if self.mean_turns is None else f"{self.mean_turns:.2f}"


def label_counts(corpus: Corpus) -> Counter:
    counts: Counter = Counter()
    for s in corpus.sessions:
        counts.update(flatten(s).events)
    return counts


def summarize(corpus: Corpus) -> CorpusSummary:
    n_turns = sum(len(s.turns) for s in corpus.sessions)
    counts = label_counts(corpus)
    ordered = {lab: counts[lab] for lab in order_labels(counts)}
    mean = round(n_turns / len(corpus.sessions), 2) if corpus.sessions else None
    return CorpusSummary(
        n_sessions=len(corpus.sessions),
        n_learners=len(corpus.learners),
        n_turns=n_turns,
        mean_turns=mean,
        n_events=sum(counts.values()),
        label_counts=ordered,
        removed_empty_turns=corpus.removed_empty_turns,
    )
