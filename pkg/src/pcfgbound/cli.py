"""Command-line entry point: ``pcfgbound sample|score|stats|compare|pos-div``.

Every numeric option can also come from ``--config FILE`` (``key = value``
lines, keys named like the long options); the command line wins.  Logs go to
stderr; the last stdout line is ``SUMMARY <json>``.
"""

import argparse
import json
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from . import BACKEND, __version__
from .corpus_io import read_corpus
from .corpus_stats import (fit_zipf_mandelbrot, ngram_spearman,
                           sentence_length_histogram, split_half_rank_freq)
from .errors import ConfigError, PCFGError
from .grammar_core import load_grammar
from .lm_compare import (PosClassMap, align, build_vocab, checkpoint_series,
                         pos_divergence, read_score_file, write_rows_json,
                         write_rows_tsv, write_score_file)
from .sampler import FORMATS, CorpusSpec, generate_corpus, write_corpus
from .scoring import OBJECTIVES, records, score_corpus, summarize

log = logging.getLogger("pcfgbound")


def _grammar_args(p):
    p.add_argument("--grammar", required=True, help="rule file")
    p.add_argument("--lexicon", help="lexicon file")
    p.add_argument("--floor", type=float, default=0.0,
                   help="drop rules with probability below this at load")
    p.add_argument("--renormalize", action="store_true",
                   help="renormalize rules per LHS after --floor")


def _common(p):
    p.add_argument("--config", help="key = value option file")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    p.add_argument("--out", required=True)
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser():
    parser = argparse.ArgumentParser(prog="pcfgbound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", help="generate train/dev/test/eval corpora")
    _grammar_args(p)
    _common(p)
    p.add_argument("--min-len", type=int, default=6)
    p.add_argument("--max-len", type=int, default=25)
    for split in ("train", "dev", "test", "eval"):
        p.add_argument("--n-" + split, type=int, default=0)
    p.add_argument("--max-expansions", type=int, default=10_000)
    p.add_argument("--max-attempts", type=int, default=1000,
                   help="attempt budget per requested sentence")
    p.add_argument("--formats", default="tokens,tagged,trees")

    p = sub.add_parser("score", help="exact per-token grammar log-probabilities")
    _grammar_args(p)
    _common(p)
    p.add_argument("--corpus", required=True)
    p.add_argument("--format", choices=FORMATS, help="corpus format (default: by extension)")
    p.add_argument("--objective", choices=OBJECTIVES, default="masked")
    p.add_argument("--prune", type=float, default=None,
                   help="log-beam width for chart pruning (default: exact)")

    p = sub.add_parser("stats", help="corpus naturalness statistics")
    _common(p)
    p.add_argument("--corpus", required=True, nargs="+")
    p.add_argument("--format", choices=FORMATS)
    p.add_argument("--analysis", choices=("zipf", "lengths", "ngram"), default="zipf")
    p.add_argument("--n", type=int, default=1, help="n-gram order")
    p.add_argument("--plot", action="store_true", help="also write gnuplot .dat files")

    for name, helptext in (("compare", "metric table per LM checkpoint"),
                           ("pos-div", "per-POS-class divergence")):
        p = sub.add_parser(name, help=helptext)
        _common(p)
        p.add_argument("--scores", required=True, help="grammar score file (JSONL)")
        p.add_argument("--lm", required=True, nargs="+", help="LM score files, in order")
        p.add_argument("--map", help="TAG<TAB>CLASS file (default: built-in 7 classes)")
        p.add_argument("--corpus", help="training corpus for the unk vocabulary")
        p.add_argument("--format", choices=FORMATS)
        p.add_argument("--min-freq", type=int, default=5)
    return parser


def read_config(path):
    """``key = value`` lines; ``#`` comments."""
    out = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError("%s:%d: expected key = value" % (path, lineno))
            key, value = (s.strip() for s in line.split("=", 1))
            out[key.replace("-", "_")] = value
    return out


def parse_args(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        if not os.path.exists(args.config):
            raise ConfigError("config file not found: %s" % args.config)
        conf = read_config(args.config)
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        actions = {a.dest: a for a in subparser._actions}
        defaults = {}
        for key, value in conf.items():
            if key not in actions or key in ("config", "help"):
                raise ConfigError("unknown config key %r for %s" % (key, args.command))
            action = actions[key]
            if action.nargs == 0:
                defaults[key] = value.lower() in ("1", "true", "yes")
            elif action.nargs == "+":
                defaults[key] = value.split()
            else:
                conv = action.type or str
                try:
                    defaults[key] = conv(value)
                except ValueError:
                    raise ConfigError("bad value for %s: %r" % (key, value)) from None
            action.required = False
        subparser.set_defaults(**defaults)
        args = parser.parse_args(argv)
    return args


def _need(path, what):
    if path is not None and not os.path.exists(path):
        raise ConfigError("%s not found: %s" % (what, path))


def validate(args):
    for attr, what in (("grammar", "grammar file"), ("lexicon", "lexicon file"),
                       ("scores", "score file"), ("map", "POS map"),
                       ("config", "config file")):
        _need(getattr(args, attr, None), what)
    corpus = getattr(args, "corpus", None)
    for c in ([corpus] if isinstance(corpus, str) else corpus or []):
        _need(c, "corpus")
    for f in getattr(args, "lm", None) or []:
        _need(f, "LM score file")
    if args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    if args.command == "sample":
        if not 0 < args.min_len <= args.max_len:
            raise ConfigError("need 0 < --min-len <= --max-len")
        if args.n_train + args.n_dev + args.n_test + args.n_eval <= 0:
            raise ConfigError("request at least one sentence (--n-train etc.)")
        bad = set(args.formats.split(",")) - set(FORMATS)
        if bad:
            raise ConfigError("unknown formats: %s" % ", ".join(sorted(bad)))
    if args.command == "stats":
        if args.analysis == "ngram" and len(args.corpus) != 2:
            raise ConfigError("ngram analysis takes exactly two corpora")
        if args.n < 1:
            raise ConfigError("--n must be >= 1")
    if args.command in ("compare", "pos-div") and args.min_freq < 1:
        raise ConfigError("--min-freq must be >= 1")


def _load_grammar(args):
    g = load_grammar(args.grammar, args.lexicon, floor=args.floor,
                     renormalize=args.renormalize)
    log.info("loaded %r", g)
    return g


def cmd_sample(args):
    grammar = _load_grammar(args)
    spec = CorpusSpec(args.n_train, args.n_dev, args.n_test, args.n_eval,
                      args.min_len, args.max_len, args.seed, args.max_expansions,
                      args.max_attempts)
    corpus = generate_corpus(grammar, spec, workers=args.threads)
    paths = write_corpus(corpus, args.out, tuple(args.formats.split(",")))
    return {"files": [str(p) for p in paths], **corpus.report}


def cmd_score(args):
    grammar = _load_grammar(args)
    sents = read_corpus(args.corpus, args.format)
    tokens = [s.tokens for s in sents]
    scores = score_corpus(grammar, tokens, args.objective, args.prune, args.threads)
    recs = records(tokens, scores, [s.tags for s in sents])
    out = Path(args.out)
    if out.parent:
        out.parent.mkdir(parents=True, exist_ok=True)
    write_score_file(recs, out, args.objective)
    summary = summarize(scores, args.objective)
    summary.update(records=len(recs), file=str(out), prune=args.prune,
                   seed=args.seed, backend=BACKEND)
    return summary


def _write_json(path, obj):
    with open(path, "w", encoding="utf-8") as f:
        json.dump(obj, f, indent=2, sort_keys=True)
        f.write("\n")


def cmd_stats(args):
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    corpora = [[s.tokens for s in read_corpus(c, args.format)] for c in args.corpus]
    result = {"analysis": args.analysis, "seed": args.seed, "corpus": args.corpus}
    if args.analysis == "zipf":
        ranks, freqs = split_half_rank_freq(corpora[0])
        fit = fit_zipf_mandelbrot(ranks, freqs)
        result.update(fit.summary())
        rows = sorted((ranks[t], t, c) for t, c in freqs.counts.items())
        r = np.array([row[0] for row in rows], dtype=float)
        logw = -fit.alpha * np.log(r + fit.beta)
        logfit = logw - logsumexp(logw)
        total = freqs.total
        with open(out / "zipf.tsv", "w", encoding="utf-8") as f:
            f.write("rank\ttoken\tfreq\tfitted_freq\tlog_residual\n")
            for (rk, t, c), lf in zip(rows, logfit):
                f.write("%d\t%s\t%d\t%r\t%r\n"
                        % (rk, t, c, math.exp(lf) * total, math.log(c / total) - lf))
        if args.plot:
            with open(out / "zipf.dat", "w", encoding="utf-8") as f:
                f.write("# log_rank log_proportion log_fitted_proportion\n")
                for (rk, _, c), lf in zip(rows, logfit):
                    f.write("%r %r %r\n" % (math.log(rk), math.log(c / total), float(lf)))
        _write_json(out / "zipf.json", result)
    elif args.analysis == "lengths":
        hists = {c: sentence_length_histogram(corp) for c, corp in zip(args.corpus, corpora)}
        result["histograms"] = {c: {str(k): v for k, v in h.items()} for c, h in hists.items()}
        with open(out / "lengths.tsv", "w", encoding="utf-8") as f:
            f.write("corpus\tlength\tproportion\n")
            for c, h in hists.items():
                for k, v in h.items():
                    f.write("%s\t%d\t%r\n" % (c, k, v))
        if args.plot:
            for i, (c, h) in enumerate(hists.items()):
                with open(out / ("lengths_%d.dat" % i), "w", encoding="utf-8") as f:
                    f.write("# %s\n# length proportion\n" % c)
                    for k, v in h.items():
                        f.write("%d %r\n" % (k, v))
        _write_json(out / "lengths.json", result)
    else:
        rho = ngram_spearman(corpora[0], corpora[1], args.n)
        result.update(n=args.n, spearman=rho)
        _write_json(out / "ngram.json", result)
    return result


def _compare_inputs(args):
    grammar_scores = read_score_file(args.scores, label="grammar")
    lm_files = [read_score_file(p, label=Path(p).stem) for p in args.lm]
    pos_map = PosClassMap.from_tsv(args.map) if args.map else PosClassMap.default()
    vocab = None
    if args.corpus:
        vocab = build_vocab([s.tokens for s in read_corpus(args.corpus, args.format)],
                            args.min_freq)
    return grammar_scores, lm_files, pos_map, vocab


def cmd_compare(args):
    grammar_scores, lm_files, pos_map, vocab = _compare_inputs(args)
    rows = checkpoint_series(lm_files, grammar_scores, pos_map, vocab)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_rows_tsv(rows, out / "compare.tsv")
    write_rows_json(rows, out / "compare.json")
    return {"seed": args.seed, "checkpoints": len(rows),
            "rows": [{k: r[k] for k in ("checkpoint", "matched", "spearman", "r2",
                                          "relative_ppl")} for r in rows]}


def cmd_pos_div(args):
    grammar_scores, lm_files, pos_map, vocab = _compare_inputs(args)
    rows = []
    for f in lm_files:
        rep = align(grammar_scores, f, vocab)
        for cls, d in pos_divergence(rep, pos_map).items():
            rows.append({"checkpoint": f.label, "class": cls, "count": d["count"],
                         "signed": d["signed"], "abs": d["abs"]})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if rows:
        write_rows_tsv(rows, out / "pos_div.tsv")
    write_rows_json(rows, out / "pos_div.json")
    return {"seed": args.seed, "rows": len(rows)}


COMMANDS = {"sample": cmd_sample, "score": cmd_score, "stats": cmd_stats,
            "compare": cmd_compare, "pos-div": cmd_pos_div}


def _clean(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_clean(v) for v in obj]
    return obj


def main(argv=None):
    try:
        args = parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format="%(asctime)s %(levelname)s %(name)s: %(message)s",
                            stream=sys.stderr)
        validate(args)
    except ConfigError as e:
        print(json.dumps({"status": "error", "kind": "config", "error": type(e).__name__,
                          "message": str(e)}), file=sys.stderr)
        return 2
    t0 = time.perf_counter()
    try:
        summary = COMMANDS[args.command](args)
    except (PCFGError, OSError, ValueError) as e:
        log.error("%s: %s", type(e).__name__, e)
        print(json.dumps({"status": "error", "kind": "runtime", "error": type(e).__name__,
                          "message": str(e)}), file=sys.stderr)
        return 1
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    summary = {"status": "ok", "command": args.command, **summary}
    print("SUMMARY " + json.dumps(_clean(summary), sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
