"""Shared in-memory mine -> filter -> test pipeline for the simulation scripts."""

from da_seqlab.config import PipelineConfig
from da_seqlab.permtest import ClusterDesign, test_pattern_set
from da_seqlab.seqmine import filter_by_support_diff, mine
from da_seqlab.synth import GeneratorSpec, generate


def run(spec: GeneratorSpec, selection: str, cfg: PipelineConfig | None = None):
    """Return the permutation results for one synthetic corpus (empty if nothing passes the filter)."""
    cfg = cfg or PipelineConfig()
    corpus, groups, _ = generate(spec)
    params = cfg.mining_params()
    universe = mine(corpus, params, groups)
    kept = filter_by_support_diff(universe, cfg.diff_threshold)
    if not kept:
        return []
    return test_pattern_set(
        kept, corpus, ClusterDesign.from_groups(corpus, groups), mode="auto", n=cfg.perm_n,
        seed=spec.seed, max_gap=params.max_delta, selection=selection,
        selection_threshold=cfg.diff_threshold, universe=universe,
    )
