"""Shared grammars and sentence sets for the tests and the acceptance gate."""

from functools import lru_cache

import numpy as np

from pcfgbound.grammar_core import parse_grammar_text, random_pcfg
from pcfgbound.sampler import sample_many

from oracles import OracleGrammar

G1 = ("S -> A B 1.0\n", "A a 1.0\nB b 0.5\nB c 0.5\n")
G2 = ("S -> S S 0.3\n", "S x 0.7\n")
G3 = ("S -> X 1.0\n", "X y 1.0\n")
CYCLIC = ("!start A\nA -> B 0.5\nB -> A 0.5\n", "A a 0.5\nB b 0.5\n")

NAMED = {"G1": G1, "G2": G2, "G3": G3}


def grammar(texts):
    return parse_grammar_text(*texts)


def _random_params(i):
    rng = np.random.default_rng(1000 + i)
    return dict(n_phrasal=int(rng.integers(1, 4)), n_tags=int(rng.integers(2, 4)),
                n_terminals=int(rng.integers(2, 6)), n_binary=int(rng.integers(3, 10)),
                n_unary=int(rng.integers(0, 3)), tags_per_terminal=int(rng.integers(1, 3)),
                max_branching=0.6, acyclic=bool(i % 3 == 2), seed=i)


@lru_cache(maxsize=None)
def random_grammars(count=20):
    """``count`` random proper grammars with at most 30 rules each."""
    out = []
    for i in range(count):
        g = random_pcfg(**_random_params(i))
        assert len(g.rules) <= 30
        out.append(("R%02d" % i, g))
    return tuple(out)


@lru_cache(maxsize=None)
def fixture_set(count=20):
    """(name, grammar) for G1, G2, G3 and the random grammars."""
    named = tuple((k, grammar(v)) for k, v in NAMED.items())
    return named + random_grammars(count)


def oracle_for(g):
    return OracleGrammar(*g.to_text())


def sample_sentences(g, n=50, seed=0, max_len=10):
    """``n`` sampled sentences of length <= ``max_len``."""
    out = []
    draw_seed = seed
    while len(out) < n:
        for d in sample_many(g, 4 * n, seed=draw_seed, max_rule_expansions=500):
            if d is not None and len(d.tokens) <= max_len:
                out.append(d.tokens)
                if len(out) == n:
                    break
        draw_seed += 7919
    return out
