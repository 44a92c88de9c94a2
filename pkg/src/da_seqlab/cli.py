"""Command-line front end.

Every stage reads its inputs from flags or a JSON config (flags win) and
writes deterministic CSV and/or Markdown artifacts to ``--out``.

Exit codes: 0 success, 1 validation or stage error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import report
from .config import ConfigError, PipelineConfig
from .corpus import Corpus, CorpusFormatError, load_corpus, summarize, validate_corpus
from .freqstats import compare_frequencies, frequency_table
from .permtest import ClusterDesign, test_pattern_set
from .reliability import icc_two_way, kappa_all, load_annotations
from .scoring import (
    GroupAssignment,
    composite_scores,
    dump_groups,
    gains_and_groups,
    load_groups,
    load_proficiency,
)
from .seqmine import (
    PATTERN_COLUMNS,
    Pattern,
    closed_patterns,
    filter_by_support_diff,
    mine,
    read_patterns_csv,
)
from .synth import GeneratorSpec, PlantedPattern, write_fixture

log = logging.getLogger("da_seqlab")

SEED_ENV = "DA_SEQLAB_SEED"
STAGES = (
    "validate", "summarize", "reliability", "score", "compare-freq",
    "mine", "filter", "permtest", "run-all", "synth",
)


class UsageError(Exception):
    pass


class StageError(Exception):
    def __init__(self, stage: str, message: str) -> None:
        self.stage = stage
        super().__init__(f"[{stage}] {message}")


# --- argument parsing --------------------------------------------------------

def _support(text: str) -> int | float:
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON pipeline config")
    common.add_argument("--corpus", help="corpus JSONL")
    common.add_argument("--proficiency", help="proficiency CSV (pre/post CAF indicators)")
    common.add_argument("--groups", help="groups CSV (learner_id,group)")
    common.add_argument("--annotations", help="dual-annotation JSONL")
    common.add_argument("--ratings", help="two-rater CSV (subject,rater_a,rater_b) for ICC")
    common.add_argument("--patterns", help="pattern CSV from a previous mine/filter stage")
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int)
    common.add_argument("--min-support", type=_support, help="fraction (0.2) or session count (14)")
    common.add_argument("--max-gap", type=int)
    common.add_argument("--min-len", type=int)
    common.add_argument("--max-len", type=int)
    common.add_argument("--diff-threshold", type=int)
    common.add_argument("--perm-mode", choices=["auto", "exact", "mc"])
    common.add_argument("--perm-n", type=int)
    common.add_argument("--perm-selection", choices=["none", "conditional", "max"])
    common.add_argument("--format", choices=["csv", "md", "both"])
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="da-seqlab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, parents=[common])
        if name == "synth":
            p.add_argument("--learners", type=int, default=12)
            p.add_argument("--sessions", type=int, default=6)
            p.add_argument("--turns-min", type=int, default=60)
            p.add_argument("--turns-max", type=int, default=80)
            p.add_argument("--planted", help="comma-separated labels, e.g. '[s]Q,[t]Cp,[s]R'")
            p.add_argument("--rate-hp", type=float, default=0.9)
            p.add_argument("--rate-lp", type=float, default=0.1)
            p.add_argument("--two-code-rate", type=float, default=0.4)
    return parser


_FLAG_TO_FIELD = {
    "corpus": "corpus", "proficiency": "proficiency", "groups": "groups",
    "annotations": "annotations", "ratings": "ratings", "patterns": "patterns", "out": "out",
    "seed": "seed", "min_support": "min_support", "max_gap": "max_gap", "min_len": "min_len",
    "max_len": "max_len", "diff_threshold": "diff_threshold", "perm_mode": "perm_mode",
    "perm_n": "perm_n", "perm_selection": "perm_selection", "format": "format",
}


def resolve_config(args: argparse.Namespace, environ=os.environ) -> PipelineConfig:
    raw: dict = {}
    if args.config:
        try:
            raw = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from None
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
    for flag, name in _FLAG_TO_FIELD.items():
        value = getattr(args, flag, None)
        if value is not None:
            raw[name] = value
    if "seed" not in raw and environ.get(SEED_ENV):
        try:
            raw["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise ConfigError(f"{SEED_ENV} must be an integer") from None
    try:
        return PipelineConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


# --- stages --------------------------------------------------------------------

def _require(cfg: PipelineConfig, *names: str) -> None:
    for name in names:
        path = getattr(cfg, name)
        if not path:
            raise UsageError(f"--{name} is required")
        if not Path(path).exists():
            raise UsageError(f"{name} file not found: {path}")


def _corpus(cfg: PipelineConfig) -> Corpus:
    _require(cfg, "corpus")
    corpus = load_corpus(cfg.corpus)
    rep = validate_corpus(corpus)
    for issue in rep.warnings:
        log.warning("%s", issue)
    if not rep.ok:
        raise StageError("validate", "; ".join(str(i) for i in rep.errors))
    return corpus


def _out(cfg: PipelineConfig) -> Path:
    path = Path(cfg.out)
    path.mkdir(parents=True, exist_ok=True)
    return path


@dataclass
class ScoreOutput:
    groups: GroupAssignment
    rows: list


def stage_score(cfg: PipelineConfig, write: bool = True) -> ScoreOutput:
    _require(cfg, "proficiency")
    try:
        records = load_proficiency(cfg.proficiency)
        scores = composite_scores(records, cfg.orientation, standardize=cfg.standardize)
        gains, groups = gains_and_groups(scores)
    except ValueError as exc:
        raise StageError("score", str(exc)) from None
    rows = report.score_rows(scores, gains, groups)
    if write:
        out = _out(cfg)
        report.emit(out, "scores", ["learner_id", "composite_pre", "composite_post", "gain", "group"],
                    rows, cfg.format, title="Composite scores and groups")
        dump_groups(groups, out / "groups.csv")
    return ScoreOutput(groups, rows)


def _groups(cfg: PipelineConfig, corpus: Corpus, write: bool = False) -> GroupAssignment:
    if cfg.groups:
        _require(cfg, "groups")
        groups = load_groups(cfg.groups)
    elif cfg.proficiency:
        groups = stage_score(cfg, write=write).groups
    else:
        raise UsageError("--groups or --proficiency is required")
    try:
        return groups.for_corpus(corpus)
    except ValueError as exc:
        raise StageError("score", str(exc)) from None


def stage_compare_freq(cfg, corpus, groups):
    try:
        table = frequency_table(corpus, groups)
        results = compare_frequencies(
            table, correction=cfg.chisq_correction, alpha=cfg.alpha, marginal=cfg.marginal
        )
    except ValueError as exc:
        raise StageError("compare-freq", str(exc)) from None
    csv_rows, md_header, md_rows = report.frequency_rows(table, results)
    report.emit(_out(cfg), "da_frequencies", report.FREQ_COLUMNS, csv_rows, cfg.format,
                md_header=md_header, md_rows=md_rows, title="DA distributions by group")
    return table, results, md_header, md_rows


def stage_mine(cfg, corpus, groups) -> list[Pattern]:
    try:
        patterns = mine(corpus, cfg.mining_params(), groups)
    except ValueError as exc:
        raise StageError("mine", str(exc)) from None
    if cfg.closed_only:
        patterns = closed_patterns(patterns)
    report.emit(_out(cfg), "patterns", PATTERN_COLUMNS, report.pattern_rows(patterns), cfg.format,
                title="Frequent DA patterns")
    return patterns


def stage_filter(cfg, patterns: list[Pattern]) -> list[Pattern]:
    try:
        kept = filter_by_support_diff(patterns, cfg.diff_threshold)
    except ValueError as exc:
        raise StageError("filter", str(exc)) from None
    report.emit(_out(cfg), "filtered", PATTERN_COLUMNS, report.pattern_rows(kept), cfg.format,
                title=f"Patterns with |support difference| >= {cfg.diff_threshold}")
    return kept


def stage_permtest(cfg, corpus, groups, filtered, universe):
    if not filtered:
        log.warning("no patterns passed the support-difference filter; nothing to test")
        results = []
    else:
        try:
            results = test_pattern_set(
                filtered, corpus, ClusterDesign.from_groups(corpus, groups),
                mode="monte_carlo" if cfg.perm_mode == "mc" else cfg.perm_mode,
                n=cfg.perm_n, seed=cfg.seed, max_gap=cfg.mining_params().max_delta,
                cap=cfg.exact_cap, statistic=cfg.perm_statistic, alpha=cfg.alpha,
                marginal=cfg.marginal, selection=cfg.perm_selection,
                selection_threshold=cfg.diff_threshold, universe=universe,
            )
        except ValueError as exc:
            raise StageError("permtest", str(exc)) from None
    csv_rows, md_header, md_rows = report.pattern_test_rows(results)
    report.emit(_out(cfg), "pattern_tests", report.PATTERN_TEST_COLUMNS, csv_rows, cfg.format,
                md_header=md_header, md_rows=md_rows, title="Group differences in DA patterns")
    return results, md_header, md_rows


# --- commands -------------------------------------------------------------------

def cmd_validate(cfg: PipelineConfig) -> int:
    _require(cfg, "corpus")
    corpus = load_corpus(cfg.corpus)
    rep = validate_corpus(corpus)
    for issue in rep.issues:
        print(issue)
    print(f"{len(corpus)} sessions, {len(rep.errors)} errors, {len(rep.warnings)} warnings"
          f", {corpus.removed_empty_turns} empty turns removed")
    return 0 if rep.ok else 1


def cmd_summarize(cfg: PipelineConfig) -> int:
    corpus = _corpus(cfg)
    s = summarize(corpus)
    head, labels = report.summary_rows(s)
    out = _out(cfg)
    report.emit(out, "summary", ["metric", "value"], head, cfg.format, title="Corpus summary")
    report.emit(out, "label_counts", ["label", "n"], labels, cfg.format, title="DA label counts")
    print(f"{s.n_sessions} sessions, {s.n_turns} turns (M = {s.mean_turns_text}), {s.n_events} DA events")
    return 0


def cmd_reliability(cfg: PipelineConfig) -> int:
    if not cfg.annotations and not cfg.ratings:
        raise UsageError("--annotations and/or --ratings is required")
    out = _out(cfg)
    if cfg.annotations:
        _require(cfg, "annotations")
        try:
            results = kappa_all(load_annotations(cfg.annotations), by_label=cfg.kappa_by_label)
        except ValueError as exc:
            raise StageError("reliability", str(exc)) from None
        report.emit(out, "kappa", ["code", "kappa", "p_o", "p_e", "n", "note"],
                    report.kappa_rows(results), cfg.format, title="Per-code Cohen's kappa")
        for r in results:
            print(f"{r.code}\tkappa={r.kappa:.3f}")
    if cfg.ratings:
        _require(cfg, "ratings")
        import csv

        with open(cfg.ratings, newline="", encoding="utf-8") as fh:
            rows = [(float(r["rater_a"]), float(r["rater_b"])) for r in csv.DictReader(fh)]
        try:
            icc = icc_two_way(rows)
        except ValueError as exc:
            raise StageError("reliability", str(exc)) from None
        report.emit(out, "icc", ["model", "icc", "n_subjects", "n_raters", "note"],
                    [[icc.model, f"{icc.icc:.4f}", icc.n_subjects, icc.n_raters,
                      "degenerate" if icc.degenerate else ""]], cfg.format, title="ICC")
        print(f"{icc.model} = {icc.icc:.3f}")
    return 0


def cmd_score(cfg: PipelineConfig) -> int:
    res = stage_score(cfg)
    for row in res.rows:
        print("\t".join(str(c) for c in row))
    return 0


def cmd_compare_freq(cfg: PipelineConfig) -> int:
    corpus = _corpus(cfg)
    _, results, _, _ = stage_compare_freq(cfg, corpus, _groups(cfg, corpus))
    for r in results:
        print(f"{r.key}\tchi2={r.statistic:.2f}\tp={r.p_raw:.4f}\tp_adj={r.p_adj:.3f}{r.flag}")
    return 0


def cmd_mine(cfg: PipelineConfig) -> int:
    corpus = _corpus(cfg)
    groups = _groups(cfg, corpus) if (cfg.groups or cfg.proficiency) else None
    patterns = stage_mine(cfg, corpus, groups)
    print(f"{len(patterns)} frequent patterns")
    return 0


def _mined_or_loaded(cfg, corpus, groups) -> list[Pattern]:
    if cfg.patterns:
        _require(cfg, "patterns")
        return read_patterns_csv(cfg.patterns)
    return stage_mine(cfg, corpus, groups)


def cmd_filter(cfg: PipelineConfig) -> int:
    if cfg.patterns:
        _require(cfg, "patterns")
        patterns = read_patterns_csv(cfg.patterns)
    else:
        corpus = _corpus(cfg)
        patterns = stage_mine(cfg, corpus, _groups(cfg, corpus))
    kept = stage_filter(cfg, patterns)
    print(f"{len(kept)} of {len(patterns)} patterns kept")
    return 0


def cmd_permtest(cfg: PipelineConfig) -> int:
    corpus = _corpus(cfg)
    groups = _groups(cfg, corpus)
    universe = mine(corpus, cfg.mining_params(), groups)
    if cfg.patterns:
        _require(cfg, "patterns")
        filtered = read_patterns_csv(cfg.patterns)
    else:
        filtered = filter_by_support_diff(universe, cfg.diff_threshold)
    results, _, _ = stage_permtest(cfg, corpus, groups, filtered, universe)
    for r in results:
        print(f"{r.text}\t{r.support_hp}\t{r.support_lp}\tp={r.p_raw:.4f}\tp_adj={r.p_adj:.3f}{r.flag}")
    return 0


def cmd_run_all(cfg: PipelineConfig) -> int:
    corpus = _corpus(cfg)
    out = _out(cfg)
    groups = _groups(cfg, corpus, write=True)
    summary = summarize(corpus)
    _, freq_results, freq_header, freq_rows = stage_compare_freq(cfg, corpus, groups)
    patterns = stage_mine(cfg, corpus, groups)
    filtered = stage_filter(cfg, patterns)
    results, test_header, test_rows = stage_permtest(cfg, corpus, groups, filtered, patterns)

    n_hp = len(groups.learners_in("HP"))
    n_lp = len(groups.learners_in("LP"))
    lines = [
        "# DA analysis report",
        "",
        f"Sessions: {summary.n_sessions} from {summary.n_learners} learners "
        f"({n_hp} HP, {n_lp} LP); turns: {summary.n_turns} (M = {summary.mean_turns_text}); "
        f"DA events: {summary.n_events}.",
        "",
        "## DA distributions by group",
        "",
        report.markdown_table(freq_header, freq_rows),
        f"Chi-square with{'' if cfg.chisq_correction else 'out'} continuity correction; "
        f"Holm family of {len(freq_results)} labels. * p_adj < {cfg.alpha}; "
        f"† {cfg.alpha} <= p_adj < {cfg.marginal}.",
        "",
        "## Group differences in sequential DA patterns",
        "",
        f"{len(patterns)} frequent patterns (length {cfg.min_len}-{cfg.max_len}, max gap "
        f"{cfg.max_gap}, min support {cfg.min_support}); {len(filtered)} with |support "
        f"difference| >= {cfg.diff_threshold}.",
        "",
        report.markdown_table(test_header, test_rows) if test_rows else "No pattern passed the filter.\n",
        f"Learner-level permutation tests ({results[0].mode if results else cfg.perm_mode}, "
        f"selection adjustment: {cfg.perm_selection}); Holm family of {len(filtered)} patterns.",
        "",
    ]
    (out / "report.md").write_text("\n".join(lines), encoding="utf-8")
    (out / "config.json").write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                                     encoding="utf-8")
    sig = [r for r in results if r.flag == "*"]
    print(f"{len(filtered)} patterns tested, {len(sig)} significant; report: {out / 'report.md'}")
    return 0


def cmd_synth(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    planted = None
    if args.planted:
        labels = tuple(x.strip() for x in args.planted.split(","))
        planted = PlantedPattern(labels, args.rate_hp, args.rate_lp)
    spec = GeneratorSpec(
        n_learners=args.learners, sessions_per_learner=args.sessions,
        turns_min=args.turns_min, turns_max=args.turns_max,
        two_code_rate=args.two_code_rate, planted=planted, seed=cfg.seed,
    )
    paths = write_fixture(spec, cfg.out)
    for name, path in paths.items():
        print(f"{name}: {path}")
    return 0


COMMANDS = {
    "validate": cmd_validate, "summarize": cmd_summarize, "reliability": cmd_reliability,
    "score": cmd_score, "compare-freq": cmd_compare_freq, "mine": cmd_mine,
    "filter": cmd_filter, "permtest": cmd_permtest, "run-all": cmd_run_all,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        cfg = resolve_config(args)
        if args.command == "synth":
            return cmd_synth(cfg, args)
        return COMMANDS[args.command](cfg)
    except (UsageError, ConfigError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 2
    except CorpusFormatError as exc:
        print(f"error [validate]: {exc}", file=sys.stderr)
        return 1
    except StageError as exc:
        print(f"error {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
