"""Corpus naturalness diagnostics: Zipf-Mandelbrot fits, length histograms,
n-gram rank correlation."""

import logging
import math
import warnings
from collections import Counter
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize
from scipy.stats import rankdata

from .errors import DegenerateInput, EmptyHalf, FitDiverged

log = logging.getLogger(__name__)

ZIPF_STARTS = ((1.0, 0.0), (1.5, 2.0), (0.5, 1.0), (2.0, 5.0), (1.0, 10.0))
ALPHA_BOUNDS = (1e-9, 20.0)
BETA_BOUNDS = (-1.0 + 1e-9, 1e4)
FLAT_ALPHA = 1e-3
MIN_RANKS = 10


class FlatnessWarning(UserWarning):
    """The fitted exponent sits at the alpha -> 0 boundary."""


@dataclass(frozen=True)
class FreqTable:
    counts: dict
    total: int

    @classmethod
    def from_counter(cls, counter):
        counts = {k: int(v) for k, v in counter.items() if v > 0}
        return cls(counts, sum(counts.values()))

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, item):
        return self.counts.get(item, 0)


@dataclass(frozen=True)
class ZipfFit:
    alpha: float
    beta: float
    loglik: float
    residuals: np.ndarray
    ranks: np.ndarray
    flat: bool = False

    def summary(self):
        r = self.residuals
        return {
            "alpha": self.alpha, "beta": self.beta, "loglik": self.loglik,
            "n_ranks": int(len(r)), "flat": self.flat,
            "residual_mean": float(r.mean()), "residual_sd": float(r.std()),
            "residual_max_abs": float(np.abs(r).max()),
        }


def _tokens(sentence):
    return sentence.tokens if hasattr(sentence, "tokens") else sentence


def token_counts(corpus):
    c = Counter()
    for s in corpus:
        c.update(_tokens(s))
    return c


def rank_table(counts):
    """1-based frequency ranks; ties broken by lexicographic token order."""
    order = sorted(counts, key=lambda t: (-counts[t], t))
    return {t: r for r, t in enumerate(order, 1)}


def split_half_rank_freq(corpus):
    """Ranks from the even-indexed sentences, frequencies from the odd ones.

    Tokens seen only in the frequency half get rank ``|V_A| + 1``.
    """
    corpus = list(corpus)
    half_a, half_b = corpus[0::2], corpus[1::2]
    counts_a, counts_b = token_counts(half_a), token_counts(half_b)
    if not counts_a or not counts_b:
        raise EmptyHalf("both halves need at least one token")
    ranks = rank_table(counts_a)
    sentinel = len(ranks) + 1
    for t in counts_b:
        ranks.setdefault(t, sentinel)
    return ranks, FreqTable.from_counter(counts_b)


def _zm_objective(params, ranks, props):
    alpha, beta = params
    logw = -alpha * np.log(ranks + beta)
    m = logw.max()
    lognorm = m + math.log(np.exp(logw - m).sum())
    return -float(props @ (logw - lognorm))


def fit_zipf_mandelbrot(ranks, freqs):
    """Maximum-likelihood Zipf-Mandelbrot fit, f(r) proportional to (r + beta)^-alpha.

    ``ranks`` maps items to ranks, ``freqs`` is a :class:`FreqTable` (or a
    mapping) of counts from an independent sample.  The multinomial is
    normalized over the ranks of the items with nonzero frequency.  The
    objective is the mean per-token log-likelihood, so rescaling all counts
    leaves the fit unchanged.
    """
    counts = freqs.counts if isinstance(freqs, FreqTable) else dict(freqs)
    items = sorted((ranks[t], c) for t, c in counts.items() if c > 0)
    if len({r for r, _ in items}) < MIN_RANKS:
        raise FitDiverged("need at least %d distinct ranks, got %d"
                          % (MIN_RANKS, len({r for r, _ in items})))
    r = np.array([i[0] for i in items], dtype=float)
    c = np.array([i[1] for i in items], dtype=float)
    total = c.sum()
    props = c / total

    best = None
    for start in ZIPF_STARTS:
        res = minimize(_zm_objective, start, args=(r, props), method="Nelder-Mead",
                       bounds=(ALPHA_BOUNDS, BETA_BOUNDS),
                       options={"xatol": 1e-8, "fatol": 1e-14, "maxiter": 20000,
                                "maxfev": 40000})
        if np.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    if best is None:
        raise FitDiverged("no start produced a finite likelihood")
    alpha, beta = (float(v) for v in best.x)
    logw = -alpha * np.log(r + beta)
    logfit = logw - np.log(np.exp(logw - logw.max()).sum()) - logw.max()
    flat = alpha < FLAT_ALPHA
    if flat:
        warnings.warn("Zipf-Mandelbrot exponent at the alpha -> 0 boundary "
                      "(frequencies are flat in rank)", FlatnessWarning, stacklevel=2)
    return ZipfFit(alpha, beta, -best.fun * total, np.log(props) - logfit, r, flat)


def sentence_length_histogram(corpus):
    lengths = Counter(len(_tokens(s)) for s in corpus)
    n = sum(lengths.values())
    if n == 0:
        raise DegenerateInput("empty corpus")
    return {k: lengths[k] / n for k in sorted(lengths)}


def ngram_counts(corpus, n):
    if n < 1:
        raise ValueError("n-gram order must be >= 1")
    c = Counter()
    for s in corpus:
        toks = tuple(_tokens(s))
        c.update(toks[i:i + n] for i in range(len(toks) - n + 1))
    return c


def _rank_corr(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        raise DegenerateInput("constant input has no rank correlation")
    rx, ry = rankdata(x), rankdata(y)
    rx -= rx.mean()
    ry -= ry.mean()
    rho = float(rx @ ry / math.sqrt((rx @ rx) * (ry @ ry)))
    return max(-1.0, min(1.0, rho))


def spearman(x, y):
    """Spearman's rho: Pearson correlation of average-tie ranks."""
    if len(x) != len(y):
        raise ValueError("inputs differ in length")
    if len(x) < 3:
        raise DegenerateInput("need at least 3 pairs")
    return _rank_corr(x, y)


def ngram_spearman(corpus_a, corpus_b, n):
    """Rank correlation of n-gram frequencies over the union of both corpora
    (missing n-grams count zero)."""
    ca, cb = ngram_counts(corpus_a, n), ngram_counts(corpus_b, n)
    keys = sorted(set(ca) | set(cb))
    if len(keys) < 2:
        raise DegenerateInput("fewer than 2 distinct %d-grams" % n)
    return _rank_corr([ca[k] for k in keys], [cb[k] for k in keys])
