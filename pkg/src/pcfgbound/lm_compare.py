"""Comparing language-model score files with exact grammar scores."""

import json
import logging
import math
import re
import warnings
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

from .corpus_stats import spearman
from .errors import DegenerateInput, RawLogits, TokenMismatch, UnmappedTag

log = logging.getLogger(__name__)

UNK = "<unk>"
LOGIT_TOL = 1e-9

DEFAULT_CLASSES = {
    "noun": ("NN", "NNS", "NNP", "NNPS"),
    "verb": ("VB", "VBD", "VBG", "VBN", "VBP", "VBZ", "MD"),
    "adj_adv": ("JJ", "JJR", "JJS", "RB", "RBR", "RBS", "WRB"),
    "pronoun": ("PRP", "PRP$", "WP", "WP$", "EX"),
    "function": ("DT", "PDT", "WDT", "IN", "TO", "CC", "RP", "POS"),
    "punct": (".", ",", ":", "``", "''", "-LRB-", "-RRB-", "#", "$", "HYPH", "NFP"),
}
OTHER = "other"
_SPLIT_SUFFIX = re.compile(r"(?:[_^]\w*|-\d+)$")


class BelowBoundWarning(UserWarning):
    """An LM perplexity came out below the grammar's exact lower bound."""


@dataclass(frozen=True)
class ScoreRecord:
    sentence_id: int
    position: int
    token: str
    logp: float
    gold_tag: str = None

    @property
    def key(self):
        return (self.sentence_id, self.position)


@dataclass
class ScoreFile:
    label: str
    records: list

    def __post_init__(self):
        seen = set()
        for r in self.records:
            if r.key in seen:
                raise ValueError("duplicate (sentence_id, position) %r in %s" % (r.key, self.label))
            seen.add(r.key)
            if r.logp > LOGIT_TOL:
                raise RawLogits("%s: positive log-probability %g at %r; raw logits?"
                                % (self.label, r.logp, r.key))

    def __len__(self):
        return len(self.records)

    def by_key(self):
        return {r.key: r for r in self.records}


def record_to_json(r, objective=None):
    d = {"sentence_id": r.sentence_id, "position": r.position, "token": r.token,
         "gold_tag": r.gold_tag, "logp": r.logp if math.isfinite(r.logp) else None}
    if objective is not None:
        d["objective"] = objective
    return json.dumps(d, ensure_ascii=False)


def read_score_file(path, label=None):
    """Load a JSONL score file; a null ``logp`` reads as -inf."""
    records = []
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            d = json.loads(line)
            try:
                logp = -math.inf if d["logp"] is None else float(d["logp"])
                records.append(ScoreRecord(int(d["sentence_id"]), int(d["position"]),
                                           str(d["token"]), logp, d.get("gold_tag")))
            except KeyError as e:
                raise ValueError("%s:%d: missing field %s" % (path, lineno, e)) from None
    return ScoreFile(label or str(path), records)


def write_score_file(records, path, objective=None):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in records:
            f.write(record_to_json(r, objective))
            f.write("\n")


@dataclass(frozen=True)
class Vocab:
    tokens: frozenset
    unk: str = UNK

    def __contains__(self, token):
        return token in self.tokens

    def map(self, token):
        return token if token in self.tokens else self.unk


def build_vocab(corpus, min_freq=5, unk=UNK):
    """Tokens seen at least ``min_freq`` times; the rest map to ``unk``."""
    if min_freq < 1:
        raise ValueError("min_freq must be >= 1")
    counts = Counter()
    for s in corpus:
        counts.update(s.tokens if hasattr(s, "tokens") else s)
    return Vocab(frozenset(t for t, c in counts.items() if c >= min_freq), unk)


@dataclass
class AlignmentReport:
    pairs: list = field(default_factory=list)   # (grammar record, lm logp)
    skipped: Counter = field(default_factory=Counter)

    @property
    def matched(self):
        return len(self.pairs)

    @property
    def total(self):
        return self.matched + sum(self.skipped.values())

    def grammar_logps(self):
        return np.array([g.logp for g, _ in self.pairs])

    def lm_logps(self):
        return np.array([lm for _, lm in self.pairs])


def align(grammar_scores, lm_scores, vocab=None):
    """Pair records on (sentence_id, position).

    Skip reasons: ``unk`` (token outside ``vocab``), ``missing`` (absent from
    the LM file) and ``nonfinite`` (either log-probability is -inf).  A
    surface-token disagreement raises :class:`TokenMismatch`.
    """
    lm = lm_scores.by_key()
    report = AlignmentReport()
    for g in grammar_scores.records:
        other = lm.get(g.key)
        if other is not None and other.token != g.token:
            raise TokenMismatch(g.key, g.token, other.token)
        if vocab is not None and g.token not in vocab:
            report.skipped["unk"] += 1
        elif other is None:
            report.skipped["missing"] += 1
        elif not (math.isfinite(g.logp) and math.isfinite(other.logp)):
            report.skipped["nonfinite"] += 1
        else:
            report.pairs.append((g, other.logp))
    return report


def r_squared(x, y):
    """Coefficient of determination of the least-squares line predicting y from x."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if len(x) != len(y):
        raise ValueError("inputs differ in length")
    if len(x) < 3:
        raise DegenerateInput("need at least 3 pairs")
    if np.ptp(x) == 0:
        raise DegenerateInput("predictor is constant")
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0:
        raise DegenerateInput("response is constant")
    slope, intercept = np.polyfit(x, y, 1)
    ss_res = float(((y - (slope * x + intercept)) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def perplexity(logps):
    logps = np.asarray(logps, dtype=float)
    if len(logps) == 0:
        raise ValueError("no scored tokens")
    return math.exp(-logps.mean())


def relative_perplexity(lm_ppl, bound_ppl):
    """LM perplexity over the grammar's exact lower bound (warns if < 1)."""
    if lm_ppl <= 0 or bound_ppl <= 0:
        raise ValueError("perplexities must be positive")
    ratio = lm_ppl / bound_ppl
    if ratio < 1.0:
        warnings.warn("LM perplexity %.6g is below the lower bound %.6g"
                      % (lm_ppl, bound_ppl), BelowBoundWarning, stacklevel=2)
    return ratio


class PosClassMap:
    """Preterminal tag to POS base class.

    Lookup tries the tag itself, then the tag with a state-split suffix
    (``NN_12``, ``NN^g``, ``NN-3``) stripped.  The default map sends every
    tag outside the six named classes to ``other``.
    """

    def __init__(self, mapping, fallback=None):
        self.mapping = dict(mapping)
        self.fallback = fallback

    @classmethod
    def default(cls):
        mapping = {t: c for c, tags in DEFAULT_CLASSES.items() for t in tags}
        return cls(mapping, fallback=OTHER)

    @classmethod
    def from_tsv(cls, path):
        mapping = {}
        with open(path, encoding="utf-8") as f:
            for lineno, line in enumerate(f, 1):
                line = line.rstrip("\n")
                if not line.strip() or line.startswith("#"):
                    continue
                parts = line.split("\t")
                if len(parts) != 2 or not parts[1]:
                    raise ValueError("%s:%d: expected TAG<TAB>CLASS" % (path, lineno))
                mapping[parts[0]] = parts[1]
        return cls(mapping)

    def classes(self):
        out = set(self.mapping.values())
        if self.fallback:
            out.add(self.fallback)
        return sorted(out)

    def __getitem__(self, tag):
        if tag is None:
            raise UnmappedTag(tag)
        t = tag
        while True:
            if t in self.mapping:
                return self.mapping[t]
            stripped = _SPLIT_SUFFIX.sub("", t)
            if not stripped or stripped == t:
                break
            t = stripped
        if self.fallback is not None:
            return self.fallback
        raise UnmappedTag(tag)

    def check_covers(self, tags):
        for t in tags:
            self[t]


def pos_divergence(report, pos_map):
    """Per POS class: mean signed and absolute LM-minus-grammar log-prob gap."""
    sums = {}
    for g, lm in report.pairs:
        cls = pos_map[g.gold_tag]
        d = lm - g.logp
        s = sums.setdefault(cls, [0.0, 0.0, 0])
        s[0] += d
        s[1] += abs(d)
        s[2] += 1
    return {c: {"signed": s[0] / s[2], "abs": s[1] / s[2], "count": s[2]}
            for c, s in sorted(sums.items())}


def _safe(fn, *args):
    try:
        return fn(*args)
    except DegenerateInput as e:
        log.warning("%s undefined: %s", fn.__name__, e)
        return float("nan")


def checkpoint_row(label, grammar_scores, lm_scores, pos_map, vocab=None):
    rep = align(grammar_scores, lm_scores, vocab)
    g, lm = rep.grammar_logps(), rep.lm_logps()
    row = {"checkpoint": label, "matched": rep.matched,
           "skipped": sum(rep.skipped.values())}
    row["spearman"] = _safe(spearman, lm, g)
    row["r2"] = _safe(r_squared, lm, g)
    if rep.matched:
        row["lm_ppl"] = perplexity(lm)
        row["bound_ppl"] = perplexity(g)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", BelowBoundWarning)
            row["relative_ppl"] = relative_perplexity(row["lm_ppl"], row["bound_ppl"])
    else:
        row["lm_ppl"] = row["bound_ppl"] = row["relative_ppl"] = float("nan")
    div = pos_divergence(rep, pos_map)
    for cls in pos_map.classes():
        d = div.get(cls)
        row["div_signed:" + cls] = d["signed"] if d else float("nan")
        row["div_abs:" + cls] = d["abs"] if d else float("nan")
    return row


def checkpoint_series(lm_files, grammar_scores, pos_map, vocab=None):
    """One metric row per LM score file, in the given order."""
    return [checkpoint_row(f.label, grammar_scores, f, pos_map, vocab) for f in lm_files]


def write_rows_tsv(rows, path):
    if not rows:
        raise ValueError("no rows")
    cols = list(rows[0])
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("\t".join(cols) + "\n")
        for row in rows:
            f.write("\t".join(_fmt(row[c]) for c in cols) + "\n")


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_rows_json(rows, path):
    with open(path, "w", encoding="utf-8") as f:
        json.dump([{k: (None if isinstance(v, float) and math.isnan(v) else v)
                    for k, v in r.items()} for r in rows], f, indent=2)
        f.write("\n")
