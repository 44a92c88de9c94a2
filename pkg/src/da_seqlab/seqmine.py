"""Gap-constrained sequential pattern mining over flattened DA event streams.

:func:`mine` is a CM-SPAM style vertical miner: every label gets one
position bitmap per session (a Python int, bit ``i`` = event ``i``), a
pattern is grown by s-extension (shift the prefix's end-position bitmap
across the gap window, AND with the label's bitmap), and a precomputed
co-occurrence map prunes extensions whose (last label, new label) pair is
infrequent within the gap.  :func:`brute_force_mine` is an independent
oracle that counts support with :func:`occurs` directly.

Support is presence-based: the number of sessions containing at least one
occurrence.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .corpus import Corpus, EventStream, flatten_corpus
from .scoring import HP, LP

ARROW = " → "

# safety bounds for the brute-force oracle
BRUTE_MAX_STREAMS = 50
BRUTE_MAX_LENGTH = 200
BRUTE_MAX_ALPHABET = 22


@dataclass(frozen=True)
class MiningParams:
    """Mining parameters.

    ``min_support`` is an absolute session count when given as an ``int``
    and a fraction of sessions (rounded up) when given as a ``float``.
    ``gap_semantics="delta"`` reads ``max_gap`` as the largest position
    difference between consecutive matched events (1 = adjacent);
    ``"intervening"`` reads it as the number of events allowed in between.
    """

    min_len: int = 2
    max_len: int = 4
    max_gap: int = 1
    min_support: int | float = 0.20
    gap_semantics: str = "delta"

    def __post_init__(self) -> None:
        if self.min_len < 1:
            raise ValueError("min_len must be >= 1")
        if self.max_len < self.min_len:
            raise ValueError("max_len must be >= min_len")
        if self.gap_semantics not in ("delta", "intervening"):
            raise ValueError(f"unknown gap semantics {self.gap_semantics!r}")
        if self.max_gap < (1 if self.gap_semantics == "delta" else 0):
            raise ValueError("max_gap too small")
        ms = self.min_support
        if isinstance(ms, bool) or not isinstance(ms, (int, float)):
            raise ValueError("min_support must be an int or a float")
        if isinstance(ms, int) and ms < 1:
            raise ValueError("absolute min_support must be >= 1")
        if isinstance(ms, float) and not 0.0 < ms <= 1.0:
            raise ValueError("fractional min_support must be in (0, 1]")

    @property
    def max_delta(self) -> int:
        return self.max_gap if self.gap_semantics == "delta" else self.max_gap + 1

    def support_threshold(self, n_sessions: int) -> int:
        if isinstance(self.min_support, int):
            return self.min_support
        # exact decimal arithmetic: 0.20 * 70 must give 14, not 15
        return max(1, math.ceil(Fraction(repr(self.min_support)) * n_sessions))


@dataclass(frozen=True)
class Pattern:
    labels: tuple[str, ...]
    support_total: int
    support_hp: int | None = None
    support_lp: int | None = None

    @property
    def support_diff(self) -> int | None:
        if self.support_hp is None or self.support_lp is None:
            return None
        return self.support_hp - self.support_lp

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def text(self) -> str:
        return ARROW.join(self.labels)


def _sort_key(p: Pattern):
    return (-p.support_total, len(p.labels), p.labels)


def occurs(stream: Sequence[str] | EventStream, pattern: Sequence[str], max_gap: int = 1) -> bool:
    """True iff ``pattern`` matches at positions ``p1 < ... < pk`` with
    ``p[i+1] - p[i] <= max_gap``."""
    events = stream.events if isinstance(stream, EventStream) else stream
    if not pattern:
        raise ValueError("empty pattern")
    n = len(events)
    ends = {i for i, e in enumerate(events) if e == pattern[0]}
    for label in pattern[1:]:
        if not ends:
            return False
        ends = {
            q + d
            for q in ends
            for d in range(1, max_gap + 1)
            if q + d < n and events[q + d] == label
        }
    return bool(ends)


def _as_streams(data: Corpus | Iterable[EventStream] | Iterable[Sequence[str]]) -> list[EventStream]:
    if isinstance(data, Corpus):
        return flatten_corpus(data)
    out = []
    for i, s in enumerate(data):
        out.append(s if isinstance(s, EventStream) else EventStream(str(i), tuple(s)))
    return out


def _group_vector(streams: list[EventStream], groups: Mapping[str, str] | None) -> list[str] | None:
    if groups is None:
        return None
    try:
        return [groups[s.session_id] for s in streams]
    except KeyError as exc:
        raise ValueError(f"session {exc.args[0]!r} has no group") from None


def _make_pattern(labels: tuple[str, ...], sessions: Iterable[int], gvec: list[str] | None) -> Pattern:
    sessions = list(sessions)
    if gvec is None:
        return Pattern(labels, len(sessions))
    hp = sum(1 for s in sessions if gvec[s] == HP)
    lp = sum(1 for s in sessions if gvec[s] == LP)
    return Pattern(labels, len(sessions), hp, lp)


def _session_groups(groups) -> Mapping[str, str] | None:
    if groups is None:
        return None
    return getattr(groups, "session_groups", groups)


def mine(data, params: MiningParams = MiningParams(), groups=None) -> list[Pattern]:
    """Frequent gap-constrained label sequences of length ``min_len..max_len``.

    ``data`` is a :class:`Corpus`, a list of :class:`EventStream` or a list
    of label sequences.  ``groups`` maps session_id to ``"HP"``/``"LP"``
    (a :class:`GroupAssignment` works too); when given, per-group supports
    are filled in.
    """
    streams = _as_streams(data)
    gvec = _group_vector(streams, _session_groups(groups))
    if not streams:
        return []
    minsup = params.support_threshold(len(streams))
    delta = params.max_delta

    # vertical database: label -> {session index -> position bitmap}
    vertical: dict[str, dict[int, int]] = defaultdict(dict)
    for sid, st in enumerate(streams):
        for pos, label in enumerate(st.events):
            bm = vertical[label]
            bm[sid] = bm.get(sid, 0) | (1 << pos)

    frequent = sorted(lab for lab, bms in vertical.items() if len(bms) >= minsup)
    if not frequent:
        return []

    def window(bm: int) -> int:
        w = 0
        for d in range(1, delta + 1):
            w |= bm << d
        return w

    # co-occurrence map: (a, b) -> sessions where b follows a within the gap
    cmap: dict[tuple[str, str], int] = defaultdict(int)
    fset = set(frequent)
    for sid in range(len(streams)):
        present = [(lab, vertical[lab][sid]) for lab in frequent if sid in vertical[lab]]
        for a, bma in present:
            wa = window(bma)
            for b, bmb in present:
                if wa & bmb:
                    cmap[(a, b)] += 1
    successors = {
        a: [b for b in frequent if cmap.get((a, b), 0) >= minsup] for a in fset
    }

    results: list[Pattern] = []

    def extend(labels: tuple[str, ...], ends: dict[int, int]) -> None:
        if len(labels) >= params.min_len:
            results.append(_make_pattern(labels, ends, gvec))
        if len(labels) == params.max_len:
            return
        for b in successors[labels[-1]]:
            vb = vertical[b]
            new = {}
            for sid, bm in ends.items():
                bmb = vb.get(sid)
                if bmb is not None:
                    hit = window(bm) & bmb
                    if hit:
                        new[sid] = hit
            if len(new) >= minsup:
                extend(labels + (b,), new)

    for lab in frequent:
        extend((lab,), dict(vertical[lab]))

    results.sort(key=_sort_key)
    return results


def brute_force_mine(data, params: MiningParams = MiningParams(), groups=None) -> list[Pattern]:
    """Reference miner: grow candidates over every observed label and count
    support with :func:`occurs`.  Small inputs only."""
    streams = _as_streams(data)
    gvec = _group_vector(streams, _session_groups(groups))
    alphabet = sorted({e for st in streams for e in st.events})
    if len(streams) > BRUTE_MAX_STREAMS:
        raise ValueError(f"brute force limited to {BRUTE_MAX_STREAMS} streams")
    if any(len(st) > BRUTE_MAX_LENGTH for st in streams):
        raise ValueError(f"brute force limited to streams of length {BRUTE_MAX_LENGTH}")
    if len(alphabet) > BRUTE_MAX_ALPHABET:
        raise ValueError(f"brute force limited to {BRUTE_MAX_ALPHABET} labels")
    if not streams:
        return []
    minsup = params.support_threshold(len(streams))
    delta = params.max_delta
    out: list[Pattern] = []

    def grow(labels: tuple[str, ...]) -> None:
        hits = [i for i, st in enumerate(streams) if occurs(st.events, labels, delta)]
        if len(hits) < minsup:
            return
        if len(labels) >= params.min_len:
            out.append(_make_pattern(labels, hits, gvec))
        if len(labels) < params.max_len:
            for lab in alphabet:
                grow(labels + (lab,))

    for lab in alphabet:
        grow((lab,))
    out.sort(key=_sort_key)
    return out


def filter_by_support_diff(patterns: Iterable[Pattern], threshold: int = 10) -> list[Pattern]:
    """Keep patterns with ``|support_hp - support_lp| >= threshold``."""
    kept = []
    for p in patterns:
        if p.support_diff is None:
            raise ValueError(f"pattern {p.text!r} has no group supports")
        if abs(p.support_diff) >= threshold:
            kept.append(p)
    return kept


def closed_patterns(patterns: Sequence[Pattern]) -> list[Pattern]:
    """Drop patterns contained (contiguously) in a longer pattern of equal support."""

    def contains(big: tuple[str, ...], small: tuple[str, ...]) -> bool:
        k = len(small)
        return any(big[i : i + k] == small for i in range(len(big) - k + 1))

    kept = []
    for p in patterns:
        if not any(
            len(q.labels) > len(p.labels)
            and q.support_total == p.support_total
            and contains(q.labels, p.labels)
            for q in patterns
        ):
            kept.append(p)
    return kept


def pattern_support(data, labels: Sequence[str], max_gap: int = 1, groups=None) -> Pattern:
    streams = _as_streams(data)
    gvec = _group_vector(streams, _session_groups(groups))
    hits = [i for i, st in enumerate(streams) if occurs(st.events, labels, max_gap)]
    return _make_pattern(tuple(labels), hits, gvec)


# --- interchange formats ----------------------------------------------------

PATTERN_COLUMNS = ["pattern", "len", "sup_total", "sup_hp", "sup_lp", "sup_diff"]


def write_patterns_csv(patterns: Iterable[Pattern], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PATTERN_COLUMNS)
        for p in patterns:
            w.writerow(
                [
                    p.text,
                    len(p.labels),
                    p.support_total,
                    "" if p.support_hp is None else p.support_hp,
                    "" if p.support_lp is None else p.support_lp,
                    "" if p.support_diff is None else p.support_diff,
                ]
            )


def read_patterns_csv(path: str | Path) -> list[Pattern]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != PATTERN_COLUMNS:
            raise ValueError(f"pattern CSV must have columns {PATTERN_COLUMNS}")
        for row in reader:
            labels = tuple(row["pattern"].split(ARROW))
            if int(row["len"]) != len(labels):
                raise ValueError(f"length mismatch for {row['pattern']!r}")
            hp = int(row["sup_hp"]) if row["sup_hp"] else None
            lp = int(row["sup_lp"]) if row["sup_lp"] else None
            p = Pattern(labels, int(row["sup_total"]), hp, lp)
            if row["sup_diff"] and p.support_diff != int(row["sup_diff"]):
                raise ValueError(f"sup_diff mismatch for {row['pattern']!r}")
            out.append(p)
    return out


def read_sequence_db(path: str | Path) -> list[EventStream]:
    """One stream per line, whitespace-separated labels; ids are line indices."""
    streams = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            streams.append(EventStream(str(len(streams)), tuple(line.split())))
    return streams


def write_sequence_db(streams: Iterable[EventStream | Sequence[str]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for st in streams:
            events = st.events if isinstance(st, EventStream) else st
            fh.write(" ".join(events) + "\n")
