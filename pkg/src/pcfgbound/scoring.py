"""Corpus-level scoring with the chart engines, optionally across processes."""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .earley_prefix import prefix_chart
from .errors import NoContextParse
from .inside_outside import inside, masked_logprobs, outside
from .lm_compare import ScoreRecord

log = logging.getLogger(__name__)

OBJECTIVES = ("masked", "causal")


@dataclass
class SentenceScore:
    logps: np.ndarray         # per-position log-probabilities (-inf if undefined)
    sentence_logp: float      # log P(w) from the inside chart


def score_sentence(grammar, tokens, objective, prune=None):
    chart = inside(grammar, tokens, prune)
    if objective == "masked":
        outside(grammar, chart)
        try:
            logps = masked_logprobs(grammar, tokens, chart=chart)
        except NoContextParse:
            logps = np.full(len(tokens), -math.inf)
    elif objective == "causal":
        prefix = prefix_chart(grammar, tokens, chart=chart).prefix_logp
        with np.errstate(invalid="ignore"):
            logps = np.diff(prefix)
        logps[~np.isfinite(prefix[1:])] = -math.inf
    else:
        raise ValueError("objective must be one of %s" % (OBJECTIVES,))
    return SentenceScore(logps, chart.sentence_logp)


_worker = {}


def _init_worker(grammar, objective, prune):
    _worker.update(grammar=grammar, objective=objective, prune=prune)


def _score_one(tokens):
    return score_sentence(_worker["grammar"], tokens, _worker["objective"], _worker["prune"])


def score_corpus(grammar, sentences, objective, prune=None, threads=1):
    """Score token sequences; results come back in input order whatever the
    worker count."""
    sentences = [tuple(s) for s in sentences]
    for s in sentences:
        grammar.encode(s)   # fail fast on unknown tokens
    if threads <= 1 or len(sentences) < 2:
        return [score_sentence(grammar, s, objective, prune) for s in sentences]
    chunk = max(1, len(sentences) // (threads * 8))
    with ProcessPoolExecutor(threads, initializer=_init_worker,
                             initargs=(grammar, objective, prune)) as pool:
        return list(pool.map(_score_one, sentences, chunksize=chunk))


def records(sentences, scores, tags=None, first_id=1):
    """Flatten sentence scores into :class:`ScoreRecord` objects."""
    out = []
    for i, (toks, sc) in enumerate(zip(sentences, scores)):
        sent_tags = tags[i] if tags is not None and tags[i] is not None else (None,) * len(toks)
        for pos, (w, t, lp) in enumerate(zip(toks, sent_tags, sc.logps), 1):
            out.append(ScoreRecord(first_id + i, pos, w, float(lp), t))
    return out


def summarize(scores, objective):
    lp = np.concatenate([s.logps for s in scores]) if scores else np.zeros(0)
    finite = np.isfinite(lp)
    n_tokens = int(len(lp))
    summary = {"objective": objective, "sentences": len(scores), "tokens": n_tokens,
               "nonfinite_tokens": int((~finite).sum())}
    if finite.any():
        summary["ppl"] = math.exp(-lp[finite].sum() / finite.sum())
    sent = np.array([s.sentence_logp for s in scores])
    if len(sent) and np.all(np.isfinite(sent)):
        summary["sentence_ppl"] = math.exp(-sent.sum() / n_tokens)
    return summary
