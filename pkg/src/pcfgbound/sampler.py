"""Sampling derivations and train/dev/test/eval corpora from a grammar.

Length bounds are enforced by rejecting whole derivations, so accepted
sentences follow the grammar's distribution conditioned on length.  Splits
are generated in a fixed order and a sentence whose surface string already
occurs in an earlier split is rejected.
"""

import json
import logging
from bisect import bisect_right
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import accumulate
from pathlib import Path

import numpy as np

from .errors import ExhaustedBudget, Rejected
from .grammar_core import LEXICAL

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test", "eval")
DEFAULT_MAX_EXPANSIONS = 10_000
FORMATS = ("tokens", "tagged", "trees")


@dataclass(frozen=True)
class Derivation:
    tokens: tuple
    tags: tuple
    tree: tuple
    logp: float

    @property
    def text(self):
        return " ".join(self.tokens)

    def bracketed(self):
        return bracketed(self.tree)


def bracketed(tree):
    """Single-line bracketed form, e.g. ``(S (A a) (B b))``."""
    parts = []
    stack = [tree]
    while stack:
        item = stack.pop()
        if isinstance(item, str):
            parts.append(item)
        elif item is None:
            parts.append(")")
        else:
            parts.append("(" + item[0])
            stack.append(None)
            stack.extend(reversed(item[1:]))
    # closing parens attach to the preceding token
    out = []
    for tok in parts:
        if tok == ")":
            out[-1] += ")"
        else:
            out.append(tok)
    return " ".join(out)


@dataclass
class CorpusSpec:
    n_train: int = 0
    n_dev: int = 0
    n_test: int = 0
    n_eval: int = 0
    min_len: int = 1
    max_len: int = 10**9
    seed: int = 0
    max_rule_expansions: int = DEFAULT_MAX_EXPANSIONS
    max_attempts_per_sentence: int = 1000

    def __post_init__(self):
        if not 0 < self.min_len <= self.max_len:
            raise ValueError("need 0 < min_len <= max_len")
        counts = [self.n_train, self.n_dev, self.n_test, self.n_eval]
        if any(c < 0 for c in counts) or sum(counts) == 0:
            raise ValueError("split sizes must be non-negative and not all zero")
        if self.max_rule_expansions < 1:
            raise ValueError("max_rule_expansions must be positive")

    def sizes(self):
        return dict(zip(SPLITS, (self.n_train, self.n_dev, self.n_test, self.n_eval)))


class _Uniforms:
    """Buffered uniform draws from a numpy Generator."""

    def __init__(self, rng, block=4096):
        self.rng = rng
        self.block = block
        self.buf = []

    def __call__(self):
        if not self.buf:
            self.buf = self.rng.random(self.block).tolist()
            self.buf.reverse()
        return self.buf.pop()


class Sampler:
    """Top-down sampler bound to one grammar."""

    def __init__(self, grammar):
        self.grammar = grammar
        nts = grammar.symbols.nonterminals
        terms = grammar.symbols.terminals
        self._choices = {}
        for lhs, idx in grammar.index_by_lhs.items():
            rules = [grammar.rules[i] for i in idx]
            cum = list(accumulate(r.prob for r in rules))
            expansions = []
            for r in rules:
                if r.kind == LEXICAL:
                    expansions.append((True, terms[r.rhs[0]], r.logp))
                else:
                    expansions.append((False, tuple(r.rhs), r.logp))
            self._choices[lhs] = (cum, expansions)
        self._names = nts

    def sample(self, uniform, max_rule_expansions=DEFAULT_MAX_EXPANSIONS,
               max_len=None):
        """Draw one derivation or raise :class:`Rejected`.

        ``Rejected("depth")`` marks a derivation that exceeded the expansion
        cap; ``Rejected("length")`` is raised early once the sentence can no
        longer fit in ``max_len`` (each pending nonterminal yields a token).
        """
        names, choices = self._names, self._choices
        start = self.grammar.start
        root = [names[start]]
        stack = [(start, root)]
        tokens, tags = [], []
        logp = 0.0
        expansions = 0
        while stack:
            nt, node = stack.pop()
            expansions += 1
            if expansions > max_rule_expansions:
                raise Rejected("depth")
            try:
                cum, exps = choices[nt]
            except KeyError:
                raise Rejected("dead-end") from None
            i = bisect_right(cum, uniform() * cum[-1])
            lexical, rhs, lp = exps[min(i, len(exps) - 1)]
            logp += lp
            if lexical:
                node.append(rhs)
                tokens.append(rhs)
                tags.append(node[0])
            else:
                kids = [[names[c]] for c in rhs]
                node.extend(kids)
                for c, kid in zip(reversed(rhs), reversed(kids)):
                    stack.append((c, kid))
            if max_len is not None and len(tokens) + len(stack) > max_len:
                raise Rejected("length")
        return Derivation(tuple(tokens), tuple(tags), _freeze(root), logp)


def _freeze(root):
    """Nested lists to nested tuples, iteratively (trees can be deep)."""
    done = {}
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            done[id(node)] = (node[0],) + tuple(
                c if isinstance(c, str) else done[id(c)] for c in node[1:])
        else:
            stack.append((node, True))
            stack.extend((c, False) for c in node[1:] if not isinstance(c, str))
    return done[id(root)]


def sample_derivation(grammar, rng, max_rule_expansions=DEFAULT_MAX_EXPANSIONS):
    """Sample one derivation with a numpy Generator (raises Rejected)."""
    return Sampler(grammar).sample(_Uniforms(rng, block=64), max_rule_expansions)


def sample_many(grammar, n, seed=0, max_rule_expansions=DEFAULT_MAX_EXPANSIONS):
    """n unconstrained draws; rejected draws are returned as None."""
    sampler = Sampler(grammar)
    uniform = _Uniforms(np.random.default_rng(seed))
    out = []
    for _ in range(n):
        try:
            out.append(sampler.sample(uniform, max_rule_expansions))
        except Rejected:
            out.append(None)
    return out


@dataclass
class Corpus:
    splits: dict
    report: dict = field(default_factory=dict)

    def __getitem__(self, name):
        return self.splits[name]


def _stream(seed, split_index, worker):
    return np.random.default_rng(np.random.SeedSequence([seed, split_index, worker]))


def _generate_chunk(grammar, spec, split_index, worker, count, forbidden):
    sampler = grammar if isinstance(grammar, Sampler) else Sampler(grammar)
    uniform = _Uniforms(_stream(spec.seed, split_index, worker))
    stats = {"attempts": 0, "rejected_length": 0, "rejected_depth": 0,
             "rejected_collision": 0}
    budget = count * spec.max_attempts_per_sentence
    out = []
    while len(out) < count:
        if stats["attempts"] >= budget:
            raise ExhaustedBudget(
                "%s split: %d sentences after %d attempts (%s)"
                % (SPLITS[split_index], len(out), stats["attempts"], stats))
        stats["attempts"] += 1
        try:
            d = sampler.sample(uniform, spec.max_rule_expansions, spec.max_len)
        except Rejected as e:
            key = "rejected_" + e.reason.replace("-", "_")
            stats[key] = stats.get(key, 0) + 1
            continue
        if len(d.tokens) < spec.min_len:
            stats["rejected_length"] += 1
            continue
        if forbidden and d.text in forbidden:
            stats["rejected_collision"] += 1
            continue
        out.append(d)
    return out, stats


def _chunks(count, workers):
    base, extra = divmod(count, workers)
    return [base + (1 if w < extra else 0) for w in range(workers)]


def generate_corpus(grammar, spec, workers=1):
    """Generate all splits of ``spec``; deterministic given (seed, workers).

    Worker ``w`` of split ``s`` draws from the stream seeded by
    ``(seed, s, w)`` and fills a fixed slice of the split.
    """
    workers = max(1, int(workers))
    splits, report = {}, {"seed": spec.seed, "workers": workers,
                          "min_len": spec.min_len, "max_len": spec.max_len,
                          "splits": {}}
    seen = set()
    pool = ProcessPoolExecutor(workers) if workers > 1 else None
    sampler = Sampler(grammar)
    try:
        for s_idx, (name, count) in enumerate(spec.sizes().items()):
            if count == 0:
                continue
            frozen = frozenset(seen)
            sizes = _chunks(count, workers)
            if pool is None:
                results = [_generate_chunk(sampler, spec, s_idx, 0, count, frozen)]
            else:
                futures = [pool.submit(_generate_chunk, grammar, spec, s_idx, w, c, frozen)
                           for w, c in enumerate(sizes) if c]
                results = [f.result() for f in futures]
            sents, totals = [], {}
            for chunk, stats in results:
                sents.extend(chunk)
                for k, v in stats.items():
                    totals[k] = totals.get(k, 0) + v
            totals["sentences"] = len(sents)
            splits[name] = sents
            report["splits"][name] = totals
            seen.update(d.text for d in sents)
            log.info("%s: %d sentences, %s", name, len(sents), totals)
    finally:
        if pool is not None:
            pool.shutdown()
    return Corpus(splits, report)


def format_derivation(d, fmt="tokens"):
    if fmt == "tokens":
        return d.text
    if fmt == "tagged":
        return " ".join("%s/%s" % (w, t) for w, t in zip(d.tokens, d.tags))
    if fmt == "trees":
        return d.bracketed()
    raise ValueError("unknown corpus format %r" % fmt)


def write_split(derivations, path, fmt="tokens"):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for d in derivations:
            f.write(format_derivation(d, fmt))
            f.write("\n")


def write_corpus(corpus, out_dir, formats=("tokens",)):
    """Write ``<split>.<format>`` files plus ``report.json``; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, sents in corpus.splits.items():
        for fmt in formats:
            path = out_dir / ("%s.%s" % (name, fmt))
            write_split(sents, path, fmt)
            paths.append(path)
    report_path = out_dir / "report.json"
    report_path.write_text(json.dumps(corpus.report, indent=2, sort_keys=True) + "\n",
                           encoding="utf-8")
    paths.append(report_path)
    return paths
