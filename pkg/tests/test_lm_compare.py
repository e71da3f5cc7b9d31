import math

import pytest
from hypothesis import given, settings, strategies as st

from pcfgbound.errors import DegenerateInput, RawLogits, TokenMismatch, UnmappedTag
from pcfgbound.lm_compare import (UNK, BelowBoundWarning, PosClassMap, ScoreFile,
                                  ScoreRecord, align, build_vocab, checkpoint_series,
                                  pos_divergence, r_squared, read_score_file,
                                  relative_perplexity, write_rows_json, write_rows_tsv,
                                  write_score_file)
from pcfgbound.corpus_stats import spearman

TAGS = ["NN", "VBZ", "DT", "JJ", "NN"]
TOKS = ["dog", "runs", "the", "big", "cat"]


def _file(label, logps, tokens=TOKS, tags=TAGS, sid=1):
    return ScoreFile(label, [ScoreRecord(sid, i, t, lp, g)
                             for i, (t, lp, g) in enumerate(zip(tokens, logps, tags), 1)])


GRAMMAR = _file("grammar", [-1.0, -2.5, -0.3, -4.0, -1.7])


def test_build_vocab_examples():
    v = build_vocab([["a"] * 10 + ["b"] * 4], min_freq=5)
    assert "a" in v and "b" not in v and v.map("b") == UNK
    corpus = [["x", "y"], ["y", "z"]]
    assert build_vocab(corpus, 1).tokens == frozenset({"x", "y", "z"})
    assert build_vocab([], 5).tokens == frozenset()
    with pytest.raises(ValueError):
        build_vocab(corpus, 0)


def test_align_examples():
    vocab = build_vocab([TOKS[:4]], 1)
    rep = align(GRAMMAR, GRAMMAR, vocab)
    assert rep.matched == 4 and rep.skipped["unk"] == 1 and rep.total == 5
    rep = align(GRAMMAR, GRAMMAR)
    assert rep.matched == 5 and sum(rep.skipped.values()) == 0
    bad = _file("lm", [-1.0] * 5, tokens=["dog", "runs", "a", "big", "cat"])
    with pytest.raises(TokenMismatch):
        align(GRAMMAR, bad)


def test_align_missing_and_nonfinite():
    lm = ScoreFile("lm", GRAMMAR.records[:3] + [ScoreRecord(1, 4, "big", -math.inf, "JJ")])
    rep = align(GRAMMAR, lm)
    assert rep.matched == 3 and rep.skipped == {"missing": 1, "nonfinite": 1}
    assert rep.matched + sum(rep.skipped.values()) == len(GRAMMAR)


def test_align_symmetric_counts():
    lm = _file("lm", [-0.5, -1.5, -0.1, -3.0, -2.0])
    assert align(GRAMMAR, lm).matched == align(lm, GRAMMAR).matched


def test_raw_logits_rejected():
    with pytest.raises(RawLogits):
        _file("lm", [1.5, -1, -1, -1, -1])


def test_duplicate_keys_rejected():
    r = ScoreRecord(1, 1, "a", -1.0)
    with pytest.raises(ValueError):
        ScoreFile("x", [r, r])


def test_r_squared_examples():
    x = [-1.0, -2.0, -3.5, -0.2]
    assert r_squared(x, x) == pytest.approx(1.0)
    assert r_squared(x, [2 * v - 3 for v in x]) == pytest.approx(1.0)
    assert r_squared([-1, 1, -1, 1], [0, 0, 1, 1]) == pytest.approx(0.0, abs=1e-12)
    with pytest.raises(DegenerateInput):
        r_squared([1, 1, 1], [1, 2, 3])
    with pytest.raises(DegenerateInput):
        r_squared([1, 2], [1, 2])


def test_relative_perplexity_examples():
    assert relative_perplexity(71.1, 63.9) == pytest.approx(1.11268, abs=1e-5)
    assert relative_perplexity(192.8, 183.1) == pytest.approx(1.05298, abs=1e-5)
    assert relative_perplexity(5.0, 5.0) == 1.0
    with pytest.warns(BelowBoundWarning):
        relative_perplexity(50.0, 60.0)


def test_pos_divergence_examples():
    pmap = PosClassMap.default()
    zero = pos_divergence(align(GRAMMAR, GRAMMAR), pmap)
    assert all(d["signed"] == 0 and d["abs"] == 0 for d in zero.values())
    shifted = _file("lm", [r.logp - 0.5 for r in GRAMMAR.records])
    div = pos_divergence(align(GRAMMAR, shifted), pmap)
    assert all(d["signed"] == pytest.approx(-0.5) for d in div.values())
    g4 = _file("g", [-1.0, -1.0, -2.0, -2.0], TOKS[:4], ["NN", "NN", "VBZ", "VBZ"])
    lm4 = _file("lm", [-1.2, -1.2, -2.8, -2.8], TOKS[:4], ["NN", "NN", "VBZ", "VBZ"])
    div = pos_divergence(align(g4, lm4), pmap)
    assert div["noun"]["signed"] == pytest.approx(-0.2)
    assert div["verb"]["signed"] == pytest.approx(-0.8)
    assert div["verb"]["abs"] == pytest.approx(0.8)


def test_pos_class_map():
    pmap = PosClassMap.default()
    assert len(pmap.classes()) == 7
    assert pmap["NN_12"] == "noun" and pmap["VBZ^g"] == "verb" and pmap["XYZ"] == "other"
    strict = PosClassMap({"NN": "noun"})
    with pytest.raises(UnmappedTag):
        strict["VB"]
    with pytest.raises(UnmappedTag):
        pos_divergence(align(GRAMMAR, GRAMMAR), strict)


def test_map_from_tsv(tmp_path):
    p = tmp_path / "map.tsv"
    p.write_text("NN\tnoun\nVBZ\tverb\n", encoding="utf-8")
    assert PosClassMap.from_tsv(p)["NN"] == "noun"
    p.write_text("NN noun\n", encoding="utf-8")
    with pytest.raises(ValueError):
        PosClassMap.from_tsv(p)


def test_checkpoint_series_examples(tmp_path):
    pmap = PosClassMap.default()
    shifts = [-1.0, -0.5, -0.25, 0.0]
    files = [_file("ckpt%d" % i, [r.logp + s for r in GRAMMAR.records])
             for i, s in enumerate(shifts)]
    rows = checkpoint_series(files, GRAMMAR, pmap)
    assert [r["checkpoint"] for r in rows] == ["ckpt0", "ckpt1", "ckpt2", "ckpt3"]
    assert all(r["div_signed:noun"] == 0 for r in rows[3:])
    noun = [r["div_abs:noun"] for r in rows]
    assert noun == sorted(noun, reverse=True) and noun[-1] == 0
    assert all(r["spearman"] == pytest.approx(1.0) and r["r2"] == pytest.approx(1.0)
               for r in rows)
    assert len(checkpoint_series(files[:1], GRAMMAR, pmap)) == 1
    assert list(rows[0]) == list(rows[1])
    write_rows_tsv(rows, tmp_path / "t.tsv")
    write_rows_json(rows, tmp_path / "t.json")
    header = (tmp_path / "t.tsv").read_text().splitlines()[0].split("\t")
    assert header[:4] == ["checkpoint", "matched", "skipped", "spearman"]


def test_score_file_round_trip(tmp_path):
    recs = GRAMMAR.records + [ScoreRecord(2, 1, "dog", -math.inf, "NN")]
    write_score_file(recs, tmp_path / "s.jsonl", "masked")
    back = read_score_file(tmp_path / "s.jsonl")
    assert back.records == recs
    assert '"objective": "masked"' in (tmp_path / "s.jsonl").read_text()


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(-2000, -1), min_size=5, max_size=30, unique=True),
       st.floats(0.1, 10), st.floats(-5, 5))
def test_transform_invariance(g, scale, shift):
    g = [v / 100 for v in g]
    lm = [v * 1.3 + 0.2 * (i % 3) for i, v in enumerate(g)]
    if len(set(lm)) < 3:
        return
    rho = spearman(lm, g)
    r2 = r_squared(lm, g)
    # strictly increasing (exp-like) transform preserves rho; affine preserves R^2
    assert spearman([math.exp(v / 20) for v in lm], g) == pytest.approx(rho, abs=1e-9)
    assert r_squared([scale * v + shift for v in lm], g) == pytest.approx(r2, abs=1e-9)
