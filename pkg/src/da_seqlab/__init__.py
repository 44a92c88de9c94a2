"""Dialogue-act analysis toolkit for annotated learner-chatbot sessions."""

from .corpus import (
    Corpus,
    DACode,
    DALabel,
    EventStream,
    Session,
    SpeakerRole,
    Turn,
    flatten,
    load_corpus,
    summarize,
    validate_corpus,
)
from .freqstats import chisq_2x2_yates, compare_frequencies, frequency_table, holm_bonferroni
from .permtest import (
    ClusterDesign,
    exact_permutation_test,
    monte_carlo_permutation_test,
    pattern_stat,
    test_pattern_set,
)
from .reliability import icc_two_way, kappa_all, kappa_per_code
from .scoring import composite_scores, gains_and_groups, zscore
from .seqmine import MiningParams, Pattern, brute_force_mine, filter_by_support_diff, mine, occurs

__version__ = "0.1.0"
