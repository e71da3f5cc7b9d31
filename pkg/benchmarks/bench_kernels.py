"""Time the compiled chart kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py --rules 1000 --sentences 50

Both backends run the same inside, outside and prefix passes on the same
sentences; results are checked for agreement before timings are reported.
"""

import argparse
import json
import math
import time

import numpy as np

from pcfgbound import _kernels
from pcfgbound.grammar_core import random_pcfg
from pcfgbound.sampler import CorpusSpec, generate_corpus

# parameters giving roughly the requested rule count
SIZES = {
    100: dict(n_phrasal=6, n_tags=6, n_terminals=30, n_binary=55, n_unary=5),
    1000: dict(n_phrasal=30, n_tags=20, n_terminals=200, n_binary=570, n_unary=31),
}


def passes(mod, g, lex):
    t0 = time.perf_counter()
    bot, top = mod.inside_chart(lex, g.bin_lhs, g.bin_left, g.bin_right, g.bin_prob,
                                g.closure_csr, math.inf)
    t1 = time.perf_counter()
    ob, ot = mod.outside_chart(bot, top, g.bin_lhs, g.bin_left, g.bin_right, g.bin_prob,
                               g.closure_t_csr, g.start)
    t2 = time.perf_counter()
    fwd, prefix = mod.prefix_forward(top, lex, g.bin_lhs, g.bin_left, g.bin_right,
                                     g.bin_prob, g.left_corner_t_csr, g.start)
    t3 = time.perf_counter()
    return (t1 - t0, t2 - t1, t3 - t2), (top, ot, prefix)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--rules", type=int, choices=sorted(SIZES), default=1000)
    ap.add_argument("--sentences", type=int, default=50)
    ap.add_argument("--min-len", type=int, default=6)
    ap.add_argument("--max-len", type=int, default=25)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--json", help="also write results here")
    args = ap.parse_args(argv)

    g = random_pcfg(tags_per_terminal=2, seed=1, max_branching=0.9, **SIZES[args.rules])
    spec = CorpusSpec(n_eval=args.sentences, min_len=args.min_len, max_len=args.max_len,
                      seed=args.seed)
    sents = [d.tokens for d in generate_corpus(g, spec)["eval"]]
    lexes = [g.lexical_logp_table(g.encode(s)) for s in sents]
    backends = _kernels.available_backends()
    print("grammar: %d rules, %d nonterminals; %d sentences, %d tokens; backends: %s"
          % (len(g.rules), g.n_nonterminals, len(sents), sum(map(len, sents)),
             ", ".join(backends)))

    totals, outputs = {}, {}
    for name in backends:
        mod = _kernels.load_backend(name)
        passes(mod, g, lexes[0])   # warm-up
        acc = np.zeros(3)
        outs = []
        for lex in lexes:
            t, out = passes(mod, g, lex)
            acc += t
            outs.append(out)
        totals[name] = acc
        outputs[name] = outs

    if len(backends) == 2:
        for a, b in zip(outputs["cython"], outputs["python"]):
            for x, y in zip(a, b):
                fin = np.isfinite(x)
                assert np.array_equal(fin, np.isfinite(y))
                np.testing.assert_allclose(x[fin], y[fin], rtol=1e-10, atol=1e-10)
        print("outputs agree (rtol 1e-10)")

    print("%-8s %10s %10s %10s %10s" % ("backend", "inside", "outside", "prefix", "total"))
    for name, acc in totals.items():
        print("%-8s %9.3fs %9.3fs %9.3fs %9.3fs" % (name, *acc, acc.sum()))
    if len(backends) == 2:
        print("speed-up: %.1fx" % (totals["python"].sum() / totals["cython"].sum()))
    if args.json:
        with open(args.json, "w", encoding="utf-8") as f:
            json.dump({"rules": len(g.rules), "sentences": len(sents),
                       "seconds": {k: dict(zip(("inside", "outside", "prefix"), v.tolist()))
                                   for k, v in totals.items()}}, f, indent=2)


if __name__ == "__main__":
    main()
