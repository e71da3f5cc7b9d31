"""Inside/outside charts, masked-token distributions and pseudo-perplexity.

Positions in the public API are 1-based, matching the score files.  Chart
arrays are 0-based half-open spans: the token at position ``i`` occupies
``[i - 1, i)``.

Each span carries two layers of inside and outside scores.  The *bottom*
layer covers derivations whose root rule is binary or lexical; the *top*
layer adds unary chains above it via the unary closure.  Binary rules take
top-layer children, so the bottom layer at a one-token span holds exactly the
preterminals that emit the token.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import NoContextParse, NoParse

MASK = None


@dataclass
class Chart:
    """Per-sentence chart.  ``inside``/``outside`` are top-layer log scores,
    ``inside_bottom``/``outside_bottom`` the bottom layer; all indexed
    ``[p, q, nonterminal]``."""

    token_ids: list
    inside: np.ndarray
    inside_bottom: np.ndarray
    sentence_logp: float
    outside: np.ndarray = None
    outside_bottom: np.ndarray = None

    @property
    def n(self):
        return len(self.token_ids)

    @property
    def no_parse(self):
        return self.sentence_logp == -math.inf

    def alpha_beta(self, position):
        """(outside, inside) bottom-layer log scores at a 1-based position."""
        if self.outside_bottom is None:
            raise ValueError("outside scores not computed")
        i = position - 1
        return self.outside_bottom[i, i + 1], self.inside_bottom[i, i + 1]


@dataclass
class MaskedDistribution:
    position: int
    support: np.ndarray
    logps: np.ndarray
    tokens: tuple = ()

    def as_dict(self):
        return {t: math.exp(lp) for t, lp in zip(self.tokens, self.logps)}

    def logp(self, token):
        try:
            return float(self.logps[self.tokens.index(token)])
        except ValueError:
            return -math.inf


@dataclass
class PseudoLL:
    value: float
    per_position: np.ndarray

    def __len__(self):
        return len(self.per_position)


def _beam(prune):
    return math.inf if prune is None else float(prune)


def inside(grammar, tokens, prune=None):
    """Inside chart for ``tokens``; ``None`` entries are wildcard slots.

    An unparseable sentence yields ``sentence_logp == -inf`` (``no_parse``)
    rather than an exception.
    """
    ids = grammar.encode(tokens)
    lex = grammar.lexical_logp_table(ids)
    bot, top = _kernels.inside_chart(
        lex, grammar.bin_lhs, grammar.bin_left, grammar.bin_right,
        grammar.bin_prob, grammar.closure_csr, _beam(prune))
    n = len(ids)
    logp = float(top[0, n, grammar.start]) if n else -math.inf
    return Chart(ids, top, bot, logp)


def outside(grammar, chart):
    out_bot, out_top = _kernels.outside_chart(
        chart.inside_bottom, chart.inside, grammar.bin_lhs, grammar.bin_left,
        grammar.bin_right, grammar.bin_prob, grammar.closure_t_csr, grammar.start)
    chart.outside = out_top
    chart.outside_bottom = out_bot
    return chart


def inside_outside(grammar, tokens, prune=None):
    return outside(grammar, inside(grammar, tokens, prune))


def sentence_logprob(grammar, tokens, prune=None, strict=False):
    logp = inside(grammar, tokens, prune).sentence_logp
    if strict and logp == -math.inf:
        raise NoParse("sentence has no parse: %s" % " ".join(tokens))
    return logp


def _logsumexp(v):
    m = np.max(v) if len(v) else -math.inf
    if m == -math.inf:
        return -math.inf
    return float(m + np.log(np.exp(v - m).sum()))


def context_logprob(grammar, chart, position):
    """log P(context, length n) from bottom-layer outside scores at a slot:
    log sum_j alpha_j * sum_w P(j -> w)."""
    alpha, _ = chart.alpha_beta(position)
    with np.errstate(divide="ignore"):
        return _logsumexp(alpha + np.log(grammar.lexical_mass))


def masked_distribution(grammar, tokens, position, prune=None):
    """Distribution over the token at 1-based ``position`` given the rest.

    The slot is replaced by a wildcard whose lexical weight per preterminal is
    its total lexical mass; the result is
    ``sum_j alpha_j P(j -> w) / sum_j alpha_j sum_w P(j -> w)``.
    """
    masked = list(tokens)
    masked[position - 1] = MASK
    chart = inside_outside(grammar, masked, prune)
    alpha, _ = chart.alpha_beta(position)
    m = alpha.max()
    if m == -math.inf or chart.no_parse:
        raise NoContextParse("no terminal at position %d yields a parse" % position)
    weights = np.exp(alpha - m) @ grammar.lexical_matrix
    total = weights.sum()
    if total <= 0:
        raise NoContextParse("no terminal at position %d yields a parse" % position)
    support = np.flatnonzero(weights)
    logps = np.log(weights[support] / total)
    terms = grammar.symbols.terminals
    return MaskedDistribution(position, support, logps, tuple(terms[t] for t in support))


def masked_logprobs(grammar, tokens, prune=None, chart=None):
    """log P(w_i | w_\\i) for every position from a single inside-outside pass.

    Outside scores of a one-token span never depend on the token itself, so
    the chart of the observed sentence already carries every masked context.
    """
    if chart is None:
        chart = inside_outside(grammar, tokens, prune)
    elif chart.outside_bottom is None:
        outside(grammar, chart)
    with np.errstate(divide="ignore"):
        loglex = np.log(grammar.lexical_mass)
    out = np.empty(chart.n)
    for i in range(chart.n):
        ctx = _logsumexp(chart.outside_bottom[i, i + 1] + loglex)
        if ctx == -math.inf:
            raise NoContextParse("no terminal at position %d yields a parse" % (i + 1))
        out[i] = chart.sentence_logp - ctx
    return out


def pseudo_ll(grammar, tokens, prune=None):
    per = masked_logprobs(grammar, tokens, prune)
    return PseudoLL(float(per.sum()), per)


def pseudo_ppl(psi_ll, length):
    """exp(-psi_ll / length); pass corpus totals for the corpus-level value."""
    if length <= 0:
        raise ValueError("length must be positive")
    return math.exp(-psi_ll / length)


def corpus_pseudo_ppl(results):
    """Pseudo-perplexity over a corpus of :class:`PseudoLL` results."""
    total = sum(r.value for r in results)
    count = sum(len(r) for r in results)
    return pseudo_ppl(total, count)
