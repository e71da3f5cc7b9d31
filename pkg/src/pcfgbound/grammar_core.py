"""Loading, validating and indexing binarized PCFGs.

Rule file format, one rule per line::

    !start S
    S -> NP VP 0.7
    S -> VP 0.3

Lexicon file format::

    NN dog 0.25

Lines starting with ``#`` are comments.  Probabilities are decimal literals
in (0, 1]; they are converted to natural-log space exactly once.
"""

import logging
import math
from collections import defaultdict
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import (ArityError, DivergentClosure, MalformedLine,
                     NormalizationError, UnknownStart, UnknownToken)

log = logging.getLogger(__name__)

BINARY, UNARY, LEXICAL = "binary", "unary", "lexical"
ARROW = "->"
START_DIRECTIVE = "!start"
NORM_TOL = 1e-6
CLOSURE_TOL = 1e-12
CLOSURE_MAX_TERMS = 10_000


@dataclass(frozen=True)
class SymbolTable:
    nonterminals: tuple
    terminals: tuple
    start: int
    nt_index: dict = field(repr=False, compare=False, default=None)
    t_index: dict = field(repr=False, compare=False, default=None)

    def __post_init__(self):
        nt_index = {name: i for i, name in enumerate(self.nonterminals)}
        t_index = {name: i for i, name in enumerate(self.terminals)}
        if len(nt_index) != len(self.nonterminals):
            raise ValueError("duplicate nonterminal names")
        if len(t_index) != len(self.terminals):
            raise ValueError("duplicate terminal names")
        if not 0 <= self.start < len(self.nonterminals):
            raise UnknownStart("start id %r out of range" % self.start)
        object.__setattr__(self, "nt_index", nt_index)
        object.__setattr__(self, "t_index", t_index)

    def nt(self, name):
        return self.nt_index[name]

    def term(self, token, position=None):
        try:
            return self.t_index[token]
        except KeyError:
            raise UnknownToken(token, position) from None


@dataclass(frozen=True)
class Rule:
    """A rewrite rule.  ``rhs`` holds nonterminal ids, or one terminal id
    for lexical rules.  ``prob`` keeps the parsed decimal so that
    serialization round-trips bit-exactly."""

    lhs: int
    rhs: tuple
    kind: str
    logp: float
    prob: float

    @property
    def is_binary(self):
        return self.kind == BINARY


class Grammar:
    """Immutable, indexed PCFG.

    Besides the rule list this carries dense numpy views consumed by the chart
    kernels: binary rule arrays, the unary closure matrix and a per-terminal
    lexical index.
    """

    def __init__(self, symbols, rules):
        self.symbols = symbols
        self.rules = tuple(rules)
        n = len(symbols.nonterminals)

        by_lhs = defaultdict(list)
        binary_by_children = defaultdict(list)
        lexical_by_terminal = defaultdict(list)
        for i, r in enumerate(self.rules):
            by_lhs[r.lhs].append(i)
            if r.kind == BINARY:
                binary_by_children[r.rhs].append(i)
            elif r.kind == LEXICAL:
                lexical_by_terminal[r.rhs[0]].append(i)
        self.index_by_lhs = {k: tuple(v) for k, v in by_lhs.items()}
        self.index_binary_by_children = {
            k: tuple(v) for k, v in binary_by_children.items()}
        self.index_lexical_by_terminal = {
            k: tuple(v) for k, v in lexical_by_terminal.items()}

        binary = [r for r in self.rules if r.kind == BINARY]
        # sorted by lhs so kernels can write each parent contiguously
        binary.sort(key=lambda r: (r.lhs, r.rhs))
        self.bin_lhs = _frozen(np.array([r.lhs for r in binary], dtype=np.intp))
        self.bin_left = _frozen(np.array([r.rhs[0] for r in binary], dtype=np.intp))
        self.bin_right = _frozen(np.array([r.rhs[1] for r in binary], dtype=np.intp))
        self.bin_prob = _frozen(np.array([r.prob for r in binary], dtype=float))

        unary = np.zeros((n, n))
        lexmass = np.zeros(n)
        for r in self.rules:
            if r.kind == UNARY:
                unary[r.lhs, r.rhs[0]] += r.prob
            elif r.kind == LEXICAL:
                lexmass[r.lhs] += r.prob
        self.unary_matrix = _frozen(unary)
        self.lexical_mass = _frozen(lexmass)
        self.unary_closure = _frozen(unary_closure(self))

        lex_tags, lex_logp = [], []
        for t in range(len(symbols.terminals)):
            idx = self.index_lexical_by_terminal.get(t, ())
            lex_tags.append(_frozen(np.array([self.rules[i].lhs for i in idx], dtype=np.intp)))
            lex_logp.append(_frozen(np.array([self.rules[i].logp for i in idx])))
        self._lex_tags = lex_tags
        self._lex_logp = lex_logp

    @property
    def n_nonterminals(self):
        return len(self.symbols.nonterminals)

    @property
    def n_terminals(self):
        return len(self.symbols.terminals)

    @property
    def start(self):
        return self.symbols.start

    @cached_property
    def log_unary_closure(self):
        with np.errstate(divide="ignore"):
            return _frozen(np.log(self.unary_closure))

    @cached_property
    def left_corner_matrix(self):
        """One-step left-corner probabilities P_L[X, Y] (Y first child of X)."""
        n = self.n_nonterminals
        lc = np.array(self.unary_matrix)
        np.add.at(lc, (self.bin_lhs, self.bin_left), self.bin_prob)
        return _frozen(lc.reshape(n, n))

    @cached_property
    def left_corner_closure(self):
        """Reflexive-transitive left-corner closure (I - P_L)^-1."""
        return _frozen(closure_matrix(self.left_corner_matrix, what="left-corner"))

    @cached_property
    def closure_csr(self):
        return csr(self.unary_closure)

    @cached_property
    def closure_t_csr(self):
        return csr(self.unary_closure.T)

    @cached_property
    def left_corner_t_csr(self):
        return csr(self.left_corner_closure.T)

    @cached_property
    def lexical_matrix(self):
        """Dense (nonterminal x terminal) matrix of lexical rule probabilities."""
        m = np.zeros((self.n_nonterminals, self.n_terminals))
        for r in self.rules:
            if r.kind == LEXICAL:
                m[r.lhs, r.rhs[0]] = r.prob
        return _frozen(m)

    @cached_property
    def preterminals(self):
        return tuple(int(i) for i in np.flatnonzero(self.lexical_mass > 0))

    def lexical_entries(self, terminal_id):
        """(tag ids, log-probabilities) of the lexical rules emitting a terminal."""
        return self._lex_tags[terminal_id], self._lex_logp[terminal_id]

    def encode(self, tokens):
        """Map surface tokens to terminal ids; ``None`` marks a masked slot."""
        term = self.symbols.term
        return [None if w is None else term(w, i + 1) for i, w in enumerate(tokens)]

    def lexical_logp_table(self, token_ids):
        """Per-position log lexical weights (n x N).  A ``None`` position is a
        wildcard whose weight for nonterminal A is log sum_w P(A -> w)."""
        n = self.n_nonterminals
        out = np.full((len(token_ids), n), -np.inf)
        with np.errstate(divide="ignore"):
            wildcard = np.log(self.lexical_mass)
        for i, t in enumerate(token_ids):
            if t is None:
                out[i] = wildcard
            else:
                tags, lp = self._lex_tags[t], self._lex_logp[t]
                out[i, tags] = lp
        return out

    def rule_string(self, rule):
        nts, ts = self.symbols.nonterminals, self.symbols.terminals
        if rule.kind == LEXICAL:
            return "%s %s %r" % (nts[rule.lhs], ts[rule.rhs[0]], rule.prob)
        rhs = " ".join(nts[c] for c in rule.rhs)
        return "%s %s %s %r" % (nts[rule.lhs], ARROW, rhs, rule.prob)

    def to_text(self):
        """Serialize to (rule_text, lexicon_text)."""
        lines = ["%s %s" % (START_DIRECTIVE, self.symbols.nonterminals[self.start])]
        lex = []
        for r in self.rules:
            (lex if r.kind == LEXICAL else lines).append(self.rule_string(r))
        return "\n".join(lines) + "\n", "\n".join(lex) + ("\n" if lex else "")

    def __repr__(self):
        counts = defaultdict(int)
        for r in self.rules:
            counts[r.kind] += 1
        return "<Grammar %d nonterminals, %d terminals, %d binary, %d unary, %d lexical>" % (
            self.n_nonterminals, self.n_terminals,
            counts[BINARY], counts[UNARY], counts[LEXICAL])

    def __getstate__(self):
        rule_text, lex_text = self.to_text()
        return {"rule_text": rule_text, "lexicon_text": lex_text}

    def __setstate__(self, state):
        g = parse_grammar_text(state["rule_text"], state["lexicon_text"])
        self.__dict__.update(g.__dict__)


def csr(m):
    """Nonzeros of a dense matrix as a CSR triple (indptr, indices, data)."""
    rows, cols = np.nonzero(m)
    indptr = np.zeros(m.shape[0] + 1, dtype=np.intp)
    np.cumsum(np.bincount(rows, minlength=m.shape[0]), out=indptr[1:])
    return (indptr, cols.astype(np.intp), np.ascontiguousarray(m[rows, cols], dtype=float))


def _frozen(a):
    a.setflags(write=False)
    return a


def _parse_prob(text, lineno, line):
    try:
        p = float(text)
    except ValueError:
        raise MalformedLine(lineno, line, "bad probability") from None
    if not (0.0 < p <= 1.0) or not math.isfinite(p):
        raise MalformedLine(lineno, line, "probability outside (0, 1]")
    return p


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line and not line.startswith("#"):
            yield lineno, line


def parse_grammar_text(rule_text, lexicon_text="", *, floor=0.0,
                       renormalize=False, tol=NORM_TOL):
    """Parse rule and lexicon text into a validated :class:`Grammar`.

    ``floor`` drops rules whose probability is below it; ``renormalize``
    rescales the surviving rules of each left-hand side to sum to one.  If no
    ``!start`` directive is present the first rule's left-hand side is used.
    """
    start_name = None
    raw = []   # (lhs, rhs names, kind, prob)
    for lineno, line in _content_lines(rule_text):
        fields = line.split()
        if fields[0] == START_DIRECTIVE:
            if len(fields) != 2:
                raise MalformedLine(lineno, line, "start directive takes one symbol")
            if start_name is not None:
                raise MalformedLine(lineno, line, "start symbol declared twice")
            start_name = fields[1]
            continue
        if len(fields) < 4 or fields[1] != ARROW:
            raise MalformedLine(lineno, line, "expected 'LHS -> RHS1 [RHS2] PROB'")
        rhs = tuple(fields[2:-1])
        if len(rhs) > 2:
            raise ArityError(lineno, line, "more than two children")
        prob = _parse_prob(fields[-1], lineno, line)
        raw.append((fields[0], rhs, BINARY if len(rhs) == 2 else UNARY, prob, lineno, line))
    for lineno, line in _content_lines(lexicon_text):
        fields = line.split()
        if len(fields) != 3:
            raise MalformedLine(lineno, line, "expected 'TAG token PROB'")
        prob = _parse_prob(fields[2], lineno, line)
        raw.append((fields[0], (fields[1],), LEXICAL, prob, lineno, line))

    if floor > 0:
        kept = [r for r in raw if r[3] >= floor]
        if len(kept) < len(raw):
            log.info("dropped %d rules below probability floor %g", len(raw) - len(kept), floor)
        raw = kept

    nonterminals, terminals = {}, {}
    if start_name is not None:
        nonterminals[start_name] = None
    for lhs, rhs, kind, *_ in raw:
        nonterminals.setdefault(lhs, None)
        if kind == LEXICAL:
            terminals.setdefault(rhs[0], None)
        else:
            for c in rhs:
                nonterminals.setdefault(c, None)
    if start_name is None:
        if not raw:
            raise UnknownStart("empty grammar and no start symbol")
        start_name = raw[0][0]
    has_rules = {r[0] for r in raw}
    if start_name not in has_rules:
        raise UnknownStart("start symbol %r has no rules" % start_name)

    nt_names = tuple(nonterminals)
    symbols = SymbolTable(nt_names, tuple(terminals), nt_names.index(start_name))
    nt_id, t_id = symbols.nt_index, symbols.t_index

    seen = set()
    totals = defaultdict(float)
    for lhs, rhs, kind, prob, lineno, line in raw:
        key = (lhs, kind == LEXICAL, rhs)
        if key in seen:
            raise MalformedLine(lineno, line, "duplicate rule")
        seen.add(key)
        totals[lhs] += prob
    rules = []
    for lhs, rhs, kind, prob, lineno, line in raw:
        if renormalize:
            prob = prob / totals[lhs]
        ids = (t_id[rhs[0]],) if kind == LEXICAL else tuple(nt_id[c] for c in rhs)
        rules.append(Rule(nt_id[lhs], ids, kind, math.log(prob), prob))

    check_normalization(rules, symbols, tol)
    return Grammar(symbols, rules)


def check_normalization(rules, symbols, tol=NORM_TOL):
    totals = defaultdict(float)
    for r in rules:
        totals[r.lhs] += r.prob
    for lhs, total in totals.items():
        if abs(total - 1.0) > tol:
            raise NormalizationError(symbols.nonterminals[lhs], total)


def load_grammar(rule_path, lexicon_path=None, **kwargs):
    with open(rule_path, encoding="utf-8") as f:
        rule_text = f.read()
    lexicon_text = ""
    if lexicon_path is not None:
        with open(lexicon_path, encoding="utf-8") as f:
            lexicon_text = f.read()
    return parse_grammar_text(rule_text, lexicon_text, **kwargs)


def closure_matrix(step, tol=CLOSURE_TOL, max_terms=CLOSURE_MAX_TERMS, what="unary"):
    """Sum the series I + M + M^2 + ... for a nonnegative matrix M.

    Partial sums are doubled (S_2m = S_m + M^m S_m), so reaching the
    equivalent of ``max_terms`` plain fixpoint iterations takes only
    log2(max_terms) products.
    """
    n = step.shape[0]
    total = np.eye(n)
    if n == 0 or not step.any():
        return total
    power = np.array(step, dtype=float)
    terms = 1
    while True:
        incr = power @ total
        total = total + incr
        terms *= 2
        if not np.all(np.isfinite(total)):
            break
        if incr.max() < tol * 1e-1:
            return total
        if terms >= max_terms:
            break
        power = power @ power
    raise DivergentClosure(
        "%s closure did not converge within %d terms (supercritical cycle)" % (what, max_terms))


def unary_closure(grammar):
    """Closure weights C[A, B]: total probability of unary chains A =>* B
    (including the empty chain, so C[A, A] >= 1)."""
    return closure_matrix(np.asarray(grammar.unary_matrix), what="unary")


def vocabulary(grammar):
    """Terminals with their total lexical mass sum_A P(A -> w), in id order."""
    mass = np.zeros(grammar.n_terminals)
    for r in grammar.rules:
        if r.kind == LEXICAL:
            mass[r.rhs[0]] += r.prob
    return [(t, float(m)) for t, m in zip(grammar.symbols.terminals, mass)]


def spectral_radius(m):
    if m.size == 0:
        return 0.0
    return float(np.max(np.abs(np.linalg.eigvals(m))))


def expectation_matrix(grammar):
    """Expected number of each nonterminal child per expansion of a nonterminal."""
    n = grammar.n_nonterminals
    m = np.array(grammar.unary_matrix)
    np.add.at(m, (grammar.bin_lhs, grammar.bin_left), grammar.bin_prob)
    np.add.at(m, (grammar.bin_lhs, grammar.bin_right), grammar.bin_prob)
    return m.reshape(n, n)


def is_consistent(grammar):
    """True when derivations terminate almost surely (subcritical branching)."""
    return spectral_radius(expectation_matrix(grammar)) < 1.0


def random_pcfg(n_phrasal=3, n_tags=3, n_terminals=4, n_binary=6, n_unary=1,
                tags_per_terminal=1, seed=0, max_branching=0.8, acyclic=False):
    """Generate a proper, consistent random grammar (for fixtures and scale tests).

    Phrasal nonterminals ``P0..`` (``P0`` is the start) rewrite to pairs of
    phrasal/tag symbols; tags ``T0..`` rewrite to terminals ``w0..``.  Binary
    mass is rescaled until the branching spectral radius is at most
    ``max_branching``.  With ``acyclic`` phrasal children always have a higher
    index than the parent, so the language is finite.
    """
    rng = np.random.default_rng(seed)
    phr = ["P%d" % i for i in range(n_phrasal)]
    tags = ["T%d" % i for i in range(n_tags)]
    words = ["w%d" % i for i in range(n_terminals)]

    def children(parent):
        if acyclic:
            return phr[parent + 1:] + tags
        return phr + tags

    rules = {p: {} for p in range(n_phrasal)}
    # every phrasal symbol needs a tag-only expansion to terminate
    for p in range(n_phrasal):
        rules[p][tuple(rng.choice(tags, size=2))] = None
    budget = max(0, n_binary - n_phrasal)
    attempts = 0
    while budget > 0 and attempts < 100 * n_binary:
        attempts += 1
        p = int(rng.integers(n_phrasal))
        pool = children(p)
        rhs = tuple(rng.choice(pool, size=2))
        if rhs not in rules[p]:
            rules[p][rhs] = None
            budget -= 1
    for _ in range(n_unary):
        p = int(rng.integers(n_phrasal))
        pool = [c for c in children(p) if c != phr[p]]
        rhs = (str(rng.choice(pool)),)
        rules[p].setdefault(rhs, None)
    for p in rules:
        keys = list(rules[p])
        w = rng.dirichlet(np.ones(len(keys)))
        rules[p] = dict(zip(keys, w))

    def radius():
        idx = {s: i for i, s in enumerate(phr)}
        m = np.zeros((n_phrasal, n_phrasal))
        for p, rs in rules.items():
            for rhs, prob in rs.items():
                for c in rhs:
                    if c in idx:
                        m[p, idx[c]] += prob
        return spectral_radius(m)

    for _ in range(200):
        if radius() <= max_branching:
            break
        for p, rs in rules.items():
            recursive = {k: v * 0.8 for k, v in rs.items() if any(c in phr for c in k)}
            if not recursive:
                continue
            rest = {k: v for k, v in rs.items() if k not in recursive}
            scale = (1.0 - sum(recursive.values())) / sum(rest.values())
            rs.update(recursive)
            rs.update({k: v * scale for k, v in rest.items()})

    lexicon = {t: {} for t in tags}
    order = rng.permutation(n_terminals)
    for i, wi in enumerate(order):
        owners = {tags[i % n_tags]}
        while len(owners) < min(tags_per_terminal, n_tags):
            owners.add(str(rng.choice(tags)))
        for t in owners:
            lexicon[t][words[wi]] = None
    for t in tags:
        if not lexicon[t]:
            lexicon[t][words[int(rng.integers(n_terminals))]] = None
        keys = list(lexicon[t])
        lexicon[t] = dict(zip(keys, rng.dirichlet(np.ones(len(keys)) * 2)))

    rule_lines = ["%s %s" % (START_DIRECTIVE, phr[0])]
    for p, rs in rules.items():
        for rhs, prob in rs.items():
            rule_lines.append("%s -> %s %r" % (phr[p], " ".join(rhs), float(prob)))
    lex_lines = ["%s %s %r" % (t, w, float(prob))
                 for t, ws in lexicon.items() for w, prob in ws.items()]
    return parse_grammar_text("\n".join(rule_lines), "\n".join(lex_lines))
