"""Lower-bound optimality at the population level.

The corpus-level acceptance check can lose to a perturbation that happens to
sit closer to the sample's maximum-likelihood estimate than the true grammar
does.  The expected per-token cross-entropy has no such noise: the true
grammar minimizes it exactly.  G2 generates exactly one string per length,
so the expectation is a sum over lengths.
"""

import math

import numpy as np

from pcfgbound.grammar_core import Grammar
from pcfgbound.inside_outside import inside

from fixtures import G2, grammar, oracle_for
from oracles import inside_table
from test_acceptance import _perturb

MAX_LEN = 300


def _length_logprobs(g):
    og = oracle_for(g)
    top = inside_table(og, ["x"] * MAX_LEN)
    with np.errstate(divide="ignore"):
        return np.log(top[0, 1:, og.idx[og.start]])


def _population_ppl(true_logp, model_logp):
    p = np.exp(true_logp)
    lengths = np.arange(1, MAX_LEN + 1)
    return math.exp(-(p @ model_logp) / (p @ lengths))


def test_truncation_is_negligible():
    p = np.exp(_length_logprobs(grammar(G2)))
    assert 1 - p.sum() < 1e-12


def test_oracle_matches_engine_on_long_strings():
    g = grammar(G2)
    ref = _length_logprobs(g)
    for n in (1, 2, 7, 40, 120):
        assert abs(inside(g, ["x"] * n).sentence_logp - ref[n - 1]) < 1e-9


def test_true_grammar_minimizes_expected_perplexity():
    truth = grammar(G2)
    true_logp = _length_logprobs(truth)
    base = _population_ppl(true_logp, true_logp)
    rng = np.random.default_rng(31)   # same perturbations as the acceptance check
    for _ in range(10):
        q = _perturb(rng, G2)
        assert isinstance(q, Grammar)
        assert _population_ppl(true_logp, _length_logprobs(q)) > base
