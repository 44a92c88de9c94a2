"""Learner-clustered permutation tests for group differences in pattern support.

Group labels are shuffled across learners, never across individual
sessions, so all sessions of one learner always move together.  With the
observed group sizes held fixed there are ``C(n_learners, n_hp)``
assignments; exact mode enumerates them all, Monte-Carlo mode samples them
with a block-seeded generator (block ``b`` uses ``default_rng([seed, b])``),
so results do not depend on how blocks are scheduled.

The p-value is two-sided on the absolute support difference, with ties
counted as extreme.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Corpus, EventStream, flatten
from .freqstats import flag, holm_bonferroni
from .scoring import HP, LP, GroupAssignment
from .seqmine import ARROW, Pattern, occurs

DEFAULT_EXACT_CAP = 1_000_000
MC_BLOCK = 1024
# relative tolerance for ">= observed" on the proportion statistic
_TIE_EPS = 1e-12


@dataclass(frozen=True)
class ClusterDesign:
    """Sessions nested in learners plus the observed learner grouping."""

    learner_sessions: Mapping[str, tuple[str, ...]]
    observed: Mapping[str, str]

    def __post_init__(self) -> None:
        if set(self.learner_sessions) != set(self.observed):
            raise ValueError("every learner needs sessions and an observed group")
        seen: set[str] = set()
        for sessions in self.learner_sessions.values():
            for sid in sessions:
                if sid in seen:
                    raise ValueError(f"session {sid!r} belongs to more than one learner")
                seen.add(sid)
        if any(g not in (HP, LP) for g in self.observed.values()):
            raise ValueError("groups must be HP or LP")

    @classmethod
    def from_groups(cls, corpus: Corpus, groups: GroupAssignment) -> "ClusterDesign":
        by_learner = corpus.sessions_by_learner()
        missing = sorted(set(by_learner) - groups.learner_groups.keys())
        if missing:
            raise ValueError(f"learners without a group: {missing}")
        return cls(
            {lid: tuple(sids) for lid, sids in by_learner.items()},
            {lid: groups.learner_groups[lid] for lid in by_learner},
        )

    @property
    def learners(self) -> list[str]:
        return sorted(self.learner_sessions)

    @property
    def n_hp(self) -> int:
        return sum(1 for g in self.observed.values() if g == HP)

    @property
    def n_lp(self) -> int:
        return sum(1 for g in self.observed.values() if g == LP)

    @property
    def n_assignments(self) -> int:
        return math.comb(len(self.learner_sessions), self.n_hp)

    def observed_mask(self) -> np.ndarray:
        return np.array([self.observed[lid] == HP for lid in self.learners])


@dataclass(frozen=True)
class PermutationResult:
    pattern: tuple[str, ...]
    support_hp: int
    support_lp: int
    observed_stat: float
    p_raw: float
    p_adj: float
    mode: str  # "exact" | "monte_carlo"
    n_permutations: int
    seed: int | None = None
    flag: str = ""

    @property
    def text(self) -> str:
        return ARROW.join(self.pattern)

    @property
    def support_diff(self) -> int:
        return self.support_hp - self.support_lp


def _streams_by_id(data) -> dict[str, tuple[str, ...]]:
    if isinstance(data, dict):
        return data
    if isinstance(data, Corpus):
        return {s.session_id: flatten(s).events for s in data.sessions}
    out = {}
    for st in data:
        if not isinstance(st, EventStream):
            raise TypeError("expected a Corpus or EventStreams with session ids")
        out[st.session_id] = st.events
    return out


def _labels(pattern) -> tuple[str, ...]:
    return pattern.labels if isinstance(pattern, Pattern) else tuple(pattern)


def learner_counts(pattern, data, design: ClusterDesign, max_gap: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Per learner (sorted by id): sessions containing the pattern, and sessions."""
    streams = _streams_by_id(data)
    labels = _labels(pattern)
    hits, sizes = [], []
    for lid in design.learners:
        sids = design.learner_sessions[lid]
        try:
            hits.append(sum(1 for sid in sids if occurs(streams[sid], labels, max_gap)))
        except KeyError as exc:
            raise ValueError(f"session {exc.args[0]!r} not in data") from None
        sizes.append(len(sids))
    return np.array(hits, dtype=np.int64), np.array(sizes, dtype=np.int64)


def _stats(masks: np.ndarray, hits: np.ndarray, sizes: np.ndarray, statistic: str) -> np.ndarray:
    """Statistic for each row of a (n_assignments, n_learners) HP mask."""
    m = masks.astype(np.int64)
    hp_hits = m @ hits
    lp_hits = hits.sum() - hp_hits
    if statistic == "diff":
        return hp_hits - lp_hits
    if statistic == "proportion":
        hp_n = m @ sizes
        lp_n = sizes.sum() - hp_n
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(hp_n > 0, hp_hits / np.maximum(hp_n, 1), 0.0) - np.where(
                lp_n > 0, lp_hits / np.maximum(lp_n, 1), 0.0
            )
    raise ValueError(f"unknown statistic {statistic!r}")


def _extreme(stats: np.ndarray, observed: float, statistic: str) -> int:
    if statistic == "diff":
        return int(np.count_nonzero(np.abs(stats) >= abs(observed)))
    tol = _TIE_EPS * max(1.0, abs(observed))
    return int(np.count_nonzero(np.abs(stats) >= abs(observed) - tol))


def pattern_stat(pattern, data, assignment: Mapping[str, str] | GroupAssignment, max_gap: int = 1) -> int:
    """HP sessions containing the pattern minus LP sessions containing it.

    ``assignment`` maps session ids to groups, or is a GroupAssignment with
    session groups attached.
    """
    groups = assignment.session_groups if isinstance(assignment, GroupAssignment) else assignment
    labels = _labels(pattern)
    stat = 0
    for sid, events in _streams_by_id(data).items():
        if occurs(events, labels, max_gap):
            g = groups[sid]
            stat += 1 if g == HP else -1 if g == LP else 0
    return stat


def exact_masks(n_learners: int, n_hp: int, cap: int = DEFAULT_EXACT_CAP) -> np.ndarray:
    """All HP masks with ``n_hp`` of ``n_learners`` learners in HP."""
    total = math.comb(n_learners, n_hp)
    if total > cap:
        raise ValueError(
            f"{total} assignments exceed the exact cap of {cap}; use monte_carlo mode"
        )
    masks = np.zeros((total, n_learners), dtype=bool)
    for row, combo in enumerate(itertools.combinations(range(n_learners), n_hp)):
        masks[row, list(combo)] = True
    return masks


def random_masks(n_learners: int, n_hp: int, n: int, seed: int) -> np.ndarray:
    """``n`` uniform HP masks; block ``b`` of draws is seeded with ``[seed, b]``."""
    blocks = []
    for b in range(math.ceil(n / MC_BLOCK)):
        size = min(MC_BLOCK, n - b * MC_BLOCK)
        rng = np.random.default_rng([seed, b])
        order = np.argsort(rng.random((size, n_learners)), axis=1)
        mask = np.zeros((size, n_learners), dtype=bool)
        np.put_along_axis(mask, order[:, :n_hp], True, axis=1)
        blocks.append(mask)
    return np.concatenate(blocks) if blocks else np.zeros((0, n_learners), dtype=bool)


def _p_value(extreme: int, n: int, mode: str) -> float:
    return extreme / n if mode == "exact" else (1 + extreme) / (1 + n)


def _result(pattern, hits, sizes, design, masks, mode, seed, statistic) -> PermutationResult:
    obs_mask = design.observed_mask()
    observed = _stats(obs_mask[None, :], hits, sizes, statistic)[0]
    stats = _stats(masks, hits, sizes, statistic)
    n = len(masks)
    p = _p_value(_extreme(stats, observed, statistic), n, mode)
    sup_hp = int(hits[obs_mask].sum())
    sup_lp = int(hits[~obs_mask].sum())
    obs = int(observed) if statistic == "diff" else float(observed)
    return PermutationResult(_labels(pattern), sup_hp, sup_lp, obs, p, p, mode, n, seed)


def exact_permutation_test(
    pattern,
    data,
    design: ClusterDesign,
    *,
    max_gap: int = 1,
    cap: int = DEFAULT_EXACT_CAP,
    statistic: str = "diff",
) -> PermutationResult:
    """Enumerate every learner-level assignment with the observed group sizes."""
    masks = exact_masks(len(design.learners), design.n_hp, cap)
    hits, sizes = learner_counts(pattern, data, design, max_gap)
    return _result(pattern, hits, sizes, design, masks, "exact", None, statistic)


def monte_carlo_permutation_test(
    pattern,
    data,
    design: ClusterDesign,
    n: int = 10_000,
    seed: int = 0,
    *,
    max_gap: int = 1,
    statistic: str = "diff",
) -> PermutationResult:
    """Sampled permutation test; ``p = (1 + #extreme) / (1 + n)``."""
    if n < 100:
        raise ValueError("monte_carlo mode needs n >= 100 permutations")
    masks = random_masks(len(design.learners), design.n_hp, n, seed)
    hits, sizes = learner_counts(pattern, data, design, max_gap)
    return _result(pattern, hits, sizes, design, masks, "monte_carlo", seed, statistic)


SELECTION_MODES = ("none", "conditional", "max")


def test_pattern_set(
    patterns: Sequence,
    data,
    design: ClusterDesign,
    *,
    mode: str = "auto",
    n: int = 10_000,
    seed: int = 0,
    max_gap: int = 1,
    cap: int = DEFAULT_EXACT_CAP,
    statistic: str = "diff",
    alpha: float = 0.05,
    marginal: float = 0.10,
    selection: str = "none",
    selection_threshold: int = 10,
    universe: Sequence | None = None,
) -> list[PermutationResult]:
    """Permutation p per pattern, Holm-adjusted across the whole set.

    ``mode="auto"`` uses exact enumeration when the assignment count is
    within ``cap`` and Monte Carlo otherwise.

    ``selection`` says how the raw p accounts for the patterns having been
    picked by ``|support_hp - support_lp| >= selection_threshold`` on the
    same grouping:

    ``"none"``
        plain permutation p of each pattern on its own.  Testing filtered
        patterns this way reuses the grouping that selected them, so
        false positives are inflated.
    ``"conditional"``
        p over only those assignments under which the pattern would also
        pass the filter.
    ``"max"``
        the mine-and-filter step is repeated under every assignment: p is
        the share of assignments whose largest statistic over ``universe``
        (the full mined set, which does not depend on the grouping)
        reaches the pattern's observed statistic.
    """
    if not patterns:
        raise ValueError("no patterns to test")
    if selection not in SELECTION_MODES:
        raise ValueError(f"unknown selection mode {selection!r}")
    if selection == "max" and universe is None:
        raise ValueError("selection='max' needs the mined pattern universe")
    if mode == "auto":
        mode = "exact" if design.n_assignments <= cap else "monte_carlo"
    if mode == "exact":
        masks = exact_masks(len(design.learners), design.n_hp, cap)
        used_seed = None
    elif mode in ("monte_carlo", "mc"):
        if n < 100:
            raise ValueError("monte_carlo mode needs n >= 100 permutations")
        mode = "monte_carlo"
        masks = random_masks(len(design.learners), design.n_hp, n, seed)
        used_seed = seed
    else:
        raise ValueError(f"unknown mode {mode!r}")

    data = _streams_by_id(data)
    cache: dict[tuple[str, ...], tuple[np.ndarray, np.ndarray]] = {}

    def counts(p):
        key = _labels(p)
        if key not in cache:
            cache[key] = learner_counts(key, data, design, max_gap)
        return cache[key]

    null_max = None
    if selection == "max":
        keys = list(dict.fromkeys([_labels(u) for u in universe] + [_labels(p) for p in patterns]))
        null_max = np.zeros(len(masks))
        for key in keys:
            hits, sizes = counts(key)
            np.maximum(null_max, np.abs(_stats(masks, hits, sizes, statistic)), out=null_max)

    raw = []
    for p in patterns:
        hits, sizes = counts(p)
        r = _result(p, hits, sizes, design, masks, mode, used_seed, statistic)
        if selection != "none":
            diff = abs(r.support_diff)
            if diff < selection_threshold:
                raise ValueError(f"pattern {r.text!r} does not pass the selection threshold")
            if selection == "conditional":
                kept = np.abs(_stats(masks, hits, sizes, "diff")) >= selection_threshold
                stats = _stats(masks[kept], hits, sizes, statistic)
                n_ref = int(np.count_nonzero(kept))
                extreme = _extreme(stats, r.observed_stat, statistic)
            else:
                n_ref = len(masks)
                extreme = _extreme(null_max, r.observed_stat, statistic)
            p_sel = _p_value(extreme, n_ref, mode)
            r = PermutationResult(
                r.pattern, r.support_hp, r.support_lp, r.observed_stat, p_sel, p_sel,
                r.mode, r.n_permutations, r.seed,
            )
        raw.append(r)
    adjusted = holm_bonferroni([r.p_raw for r in raw])
    return [
        PermutationResult(
            r.pattern, r.support_hp, r.support_lp, r.observed_stat, r.p_raw, adj,
            r.mode, r.n_permutations, r.seed, flag(adj, alpha, marginal),
        )
        for r, adj in zip(raw, adjusted)
    ]


# keep pytest from collecting the function above as a test
test_pattern_set.__test__ = False

RESULT_COLUMNS = ["pattern", "hp_sup", "lp_sup", "sup_diff", "p", "p_adj", "flag"]


def write_results_csv(results: Iterable[PermutationResult], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RESULT_COLUMNS)
        for r in results:
            w.writerow(
                [r.text, r.support_hp, r.support_lp, r.support_diff,
                 f"{r.p_raw:.6f}", f"{r.p_adj:.6f}", r.flag]
            )


def read_results_csv(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != RESULT_COLUMNS:
            raise ValueError(f"results CSV must have columns {RESULT_COLUMNS}")
        rows = []
        for row in reader:
            rows.append(
                {
                    "pattern": tuple(row["pattern"].split(ARROW)),
                    "hp_sup": int(row["hp_sup"]),
                    "lp_sup": int(row["lp_sup"]),
                    "sup_diff": int(row["sup_diff"]),
                    "p": float(row["p"]),
                    "p_adj": float(row["p_adj"]),
                    "flag": row["flag"],
                }
            )
    return rows
