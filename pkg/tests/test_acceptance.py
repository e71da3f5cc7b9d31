"""Headline acceptance criteria, one test each.

Every test prints a single ``[PASS]``/``[FAIL]`` line with the measured value
and the threshold; the lines are also collected into a summary section at the
end of the pytest run.
"""

import math
import os
import time
from collections import Counter

import numpy as np
import pytest

from pcfgbound.corpus_stats import fit_zipf_mandelbrot, split_half_rank_freq
from pcfgbound.earley_prefix import causal_scores, prefix_logprob
from pcfgbound.grammar_core import parse_grammar_text, random_pcfg
from pcfgbound.inside_outside import inside, inside_outside, masked_distribution
from pcfgbound.lm_compare import relative_perplexity
from pcfgbound.sampler import CorpusSpec, generate_corpus, sample_many
from pcfgbound.scoring import score_corpus

from conftest import ACCEPTANCE_LINES
from fixtures import G1, G2, fixture_set, grammar, oracle_for, sample_sentences
from oracles import enumerate_strings, length_masses, masked_oracle, prefix_oracle

pytestmark = pytest.mark.acceptance


def report(name, ok, detail):
    line = "[%s] %s: %s" % ("PASS" if ok else "FAIL", name, detail)
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


def _sentences(count=50):
    return [(name, g, sample_sentences(g, count, seed=17, max_len=12))
            for name, g in fixture_set()]


def test_masked_normalization():
    fixtures = _sentences()
    t0 = time.perf_counter()
    worst = 0.0
    positions = 0
    for _, g, sents in fixtures:
        for sent in sents:
            for i in range(1, len(sent) + 1):
                d = masked_distribution(g, sent, i)
                worst = max(worst, abs(math.fsum(np.exp(d.logps)) - 1.0))
                positions += 1
    elapsed = time.perf_counter() - t0
    report("masked normalization", worst <= 1e-9 and elapsed < 10,
           "%d grammars, %d positions, max |sum-1| = %.2e (tol 1e-9), %.2fs (limit 10s)"
           % (len(fixtures), positions, worst, elapsed))


def test_inside_outside_identity():
    worst = 0.0
    positions = 0
    for _, g, sents in _sentences():
        for sent in sents:
            c = inside_outside(g, sent)
            for i in range(1, len(sent) + 1):
                alpha, beta = c.alpha_beta(i)
                total = np.logaddexp.reduce(alpha + beta)
                worst = max(worst, abs(math.expm1(total - c.sentence_logp)))
                positions += 1
    report("inside-outside identity", worst <= 1e-9,
           "%d positions, max relative error %.2e (tol 1e-9)" % (positions, worst))


def test_oracle_equivalence():
    small = [(name, g) for name, g in fixture_set() if len(g.rules) <= 20]
    t0 = time.perf_counter()
    worst_masked = worst_prefix = worst_tail = 0.0
    checks = 0
    for name, g in small:
        og = oracle_for(g)
        lengths = length_masses(og)
        worst_tail = max(worst_tail, lengths[1])
        for sent in sample_sentences(g, 6, seed=23, max_len=8):
            for i in range(1, len(sent) + 1):
                got = masked_distribution(g, sent, i).as_dict()
                want = masked_oracle(og, sent, i)
                for w in set(got) | set(want):
                    worst_masked = max(worst_masked, abs(got.get(w, 0.0) - want.get(w, 0.0)))
                want_prefix, _ = prefix_oracle(og, sent[:i], lengths=lengths)
                worst_prefix = max(worst_prefix,
                                   abs(math.exp(prefix_logprob(g, sent[:i])) - want_prefix))
                checks += 1
    elapsed = time.perf_counter() - t0
    ok = max(worst_masked, worst_prefix) <= 1e-6 and worst_tail < 1e-9 and elapsed < 60
    report("oracle equivalence", ok,
           "%d grammars <= 20 rules, %d positions; max masked err %.2e, max prefix err "
           "%.2e (tol 1e-6); oracle tail <= %.1e; %.1fs (limit 60s)"
           % (len(small), checks, worst_masked, worst_prefix, worst_tail, elapsed))


def test_chain_identity():
    worst = 0.0
    violations = 0
    n = 0
    for _, g, sents in _sentences():
        for sent in sents:
            chain = math.fsum(s.logp for s in causal_scores(g, sent))
            full = prefix_logprob(g, sent)
            worst = max(worst, abs(chain - full))
            if full < inside(g, sent).sentence_logp - 1e-12:
                violations += 1
            n += 1
    report("chain identity", worst <= 1e-9 and violations == 0,
           "%d sentences, max |sum cond - prefix| = %.2e (tol 1e-9), "
           "prefix < inside in %d cases" % (n, worst, violations))


def _l1(counts, exact):
    total = sum(counts.values())
    return sum(abs(counts.get(k, 0) / total - exact.get(k, 0.0))
               for k in set(counts) | set(exact))


def test_sampler_consistency():
    g1 = grammar(G1)
    exact1 = {" ".join(s): p for s, p in enumerate_strings(oracle_for(g1), 4).items()}
    draws = sample_many(g1, 100_000, seed=2024)
    l1_g1 = _l1(Counter(d.text for d in draws), exact1)

    g2 = grammar(G2)
    exact2 = {" ".join(s): p for s, p in enumerate_strings(oracle_for(g2), 3).items()}
    z = sum(exact2.values())
    exact2 = {k: v / z for k, v in exact2.items()}
    corpus = generate_corpus(g2, CorpusSpec(n_train=100_000, min_len=1, max_len=3, seed=2024))
    l1_g2 = _l1(Counter(d.text for d in corpus["train"]), exact2)
    report("sampler consistency", l1_g1 < 0.01 and l1_g2 < 0.01,
           "G1 L1 = %.4f, G2 length-[1,3] L1 = %.4f at 100k samples (tol 0.01)"
           % (l1_g1, l1_g2))


def _perturb(rng, texts):
    """Multiply every rule probability by a factor in [0.5, 2], renormalize per LHS."""
    rules, lex = texts
    lines = [ln.split() for ln in (rules + lex).splitlines() if ln.strip()]
    factors = rng.uniform(0.5, 2.0, size=len(lines))
    weights = [float(ln[-1]) * f for ln, f in zip(lines, factors)]
    totals = Counter()
    for ln, w in zip(lines, weights):
        totals[ln[0]] += w
    out = [" ".join(ln[:-1] + [repr(float(w / totals[ln[0]]))]) for ln, w in zip(lines, weights)]
    rule_lines = [o for o in out if " -> " in o]
    lex_lines = [o for o in out if " -> " not in o]
    return parse_grammar_text("\n".join(rule_lines) + "\n", "\n".join(lex_lines) + "\n")


def _sentence_ppl(g, sents):
    logp = math.fsum(inside(g, s).sentence_logp for s in sents)
    return math.exp(-logp / sum(len(s) for s in sents))


def test_gibbs_lower_bound():
    truth = grammar(G2)
    corpus = generate_corpus(truth, CorpusSpec(n_train=10_000, seed=31))
    sents = [d.tokens for d in corpus["train"]]
    base = _sentence_ppl(truth, sents)
    rng = np.random.default_rng(31)
    ppls = [_sentence_ppl(_perturb(rng, G2), sents) for _ in range(10)]
    wins = sum(p > base for p in ppls)
    n = np.array([len(s) for s in sents])
    p_hat = (n - 1).sum() / (2 * n - 1).sum()   # sample MLE of P(S -> S S)
    report("Gibbs lower bound", wins == 10,
           "true-grammar sentence PPL %.6f; perturbed PPL > true in %d/10 (min %.6f); "
           "sample MLE of P(S -> S S) = %.5f vs true 0.3" % (base, wins, min(ppls), p_hat))


def test_zipf_recovery():
    from oracles import zipf_mandelbrot_corpus
    t0 = time.perf_counter()
    fits = []
    for seed in range(5):
        corpus = zipf_mandelbrot_corpus(1.5, 2.0, 1000, 200_000, seed=seed)
        fit = fit_zipf_mandelbrot(*split_half_rank_freq(corpus))
        fits.append((fit.alpha, fit.beta))
    elapsed = time.perf_counter() - t0
    good = sum(abs(a - 1.5) <= 0.1 and abs(b - 2.0) <= 0.5 for a, b in fits)
    report("Zipf recovery", good == 5 and elapsed < 30,
           "%d/5 seeds within (alpha +-0.1, beta +-0.5): %s; %.1fs (limit 30s)"
           % (good, ", ".join("(%.3f, %.3f)" % f for f in fits), elapsed))


def test_relative_perplexity_arithmetic():
    masked = relative_perplexity(71.1, 63.9)
    causal = relative_perplexity(192.8, 183.1)
    ok = abs(masked - 1.1127) <= 1e-4 and abs(causal - 1.0530) <= 1e-4
    report("relative perplexity arithmetic", ok,
           "71.1/63.9 = %.5f (want 1.1127), 192.8/183.1 = %.5f (want 1.0530), tol 1e-4"
           % (masked, causal))


def test_scale_smoke():
    g = random_pcfg(n_phrasal=30, n_tags=20, n_terminals=200, n_binary=570, n_unary=31,
                    tags_per_terminal=2, seed=1, max_branching=0.9)
    corpus = generate_corpus(g, CorpusSpec(n_eval=10_000, min_len=6, max_len=25, seed=5))
    sents = [d.tokens for d in corpus["eval"]]
    threads = os.cpu_count() or 1
    t0 = time.perf_counter()
    masked = score_corpus(g, sents, "masked", threads=threads)
    causal = score_corpus(g, sents, "causal", threads=threads)
    elapsed = time.perf_counter() - t0
    finite = all(np.isfinite(s.logps).all() for s in masked + causal)
    report("scale smoke test", len(g.rules) == 1000 and finite and elapsed < 300,
           "%d rules, %d sentences (%d tokens), masked+causal exact in %.1fs on %d "
           "core(s) (limit 300s)" % (len(g.rules), len(sents), sum(map(len, sents)),
                                     elapsed, threads))
