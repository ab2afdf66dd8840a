"""Probability models, lineage inference and the possible-worlds oracle."""

from .lineage import Lineage, VarTable, ce_marginal, make_conjunct
from .models import (CPT, ProbModelConfig, apply_decay, apply_rule_prob, combine_noisy_or, map_query,
                     match_prob_independent, match_prob_markov)
from .oracle import (OracleResult, oracle_conjunction_prob, oracle_marginal, oracle_marginals,
                     oracle_match_probs)

__all__ = [
    "Lineage", "VarTable", "ce_marginal", "make_conjunct", "CPT", "ProbModelConfig", "apply_decay",
    "apply_rule_prob", "combine_noisy_or", "map_query", "match_prob_independent", "match_prob_markov",
    "OracleResult", "oracle_conjunction_prob", "oracle_marginal", "oracle_marginals", "oracle_match_probs",
]
