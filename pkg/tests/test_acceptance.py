"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines.
"""

import json
import time

import numpy as np
import pytest

from reqtag import crf
from reqtag.cli import main as cli_main
from reqtag.data import Corpus, align_bio, clean_tokens, save_corpus
from reqtag.embeddings import encode_tokens
from reqtag.evaluation import compute_metrics, extract_spans
from reqtag.network import (ModelDims, bilstm_encode, decode_tags_inference,
                            decode_tags_training, init_model, param_blocks,
                            predict_tags, self_attention, sentence_loss,
                            sentence_loss_and_grads, zero_grad_blocks)
from reqtag.training import TrainConfig, cross_validate, train
from conftest import make_synthetic_corpus


def report(criterion, ok, detail=""):
    line = f"ACCEPTANCE {criterion}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def random_crf_instance(rng, n):
    emissions = rng.normal(scale=3.0, size=(n, 3))
    transitions = crf.init_transitions()
    free = ~crf.forbidden_mask()
    transitions[free] = rng.normal(scale=2.0, size=free.sum())
    return emissions, transitions


def test_criterion_1_crf_oracle_suite():
    rng = np.random.default_rng(101)
    start = time.monotonic()
    for _ in range(200):
        n = int(rng.integers(1, 7))
        e, t = random_crf_instance(rng, n)
        log_z = crf.crf_log_partition(e, t)
        assert abs(log_z - crf.brute_force_log_partition(e, t)) <= 1e-8
        path, score = crf.crf_viterbi(e, t)
        bpath, bscore = crf.brute_force_viterbi(e, t)
        assert abs(score - bscore) <= 1e-8
        assert path == bpath
    elapsed = time.monotonic() - start
    report("1 crf-oracle-suite", elapsed < 10.0, f"{elapsed:.1f}s")


def test_criterion_2_gradient_suite():
    start = time.monotonic()
    dims = ModelDims(embedding_dim=4, h_enc=3, d_att=4, h_dec=3, d_tag=2)
    params = init_model(10, dims, np.random.default_rng(6))
    batch = [([2, 3, 4, 5, 2], [0, 1, 2, 2, 0]), ([6, 7, 8], [0, 1, 0])]

    def batch_loss():
        return sum(sentence_loss(params, i, g) for i, g in batch) / len(batch)

    grads = zero_grad_blocks(params)
    for i, g in batch:
        _, gr = sentence_loss_and_grads(params, i, g)
        for k in grads:
            grads[k] += gr[k] / len(batch)

    forbidden = crf.forbidden_mask()
    h = 1e-4
    worst = 0.0
    for name, arr in param_blocks(params).items():
        it = np.nditer(arr, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            if name == "transitions" and forbidden[idx]:
                continue
            orig = arr[idx]
            arr[idx] = orig + h
            lp = batch_loss()
            arr[idx] = orig - h
            lm = batch_loss()
            arr[idx] = orig
            fd = (lp - lm) / (2 * h)
            err = abs(fd - grads[name][idx]) / max(abs(fd),
                                                   abs(grads[name][idx]), 1e-8)
            worst = max(worst, err)
            assert err <= 1e-4, f"block {name} at {idx}: {err}"
    elapsed = time.monotonic() - start
    report("2 gradient-suite", elapsed < 60.0,
           f"worst rel err {worst:.2e}, {elapsed:.1f}s")


def test_criterion_3_constraint_guarantee():
    rng = np.random.default_rng(103)
    dims = ModelDims(embedding_dim=4, h_enc=3, d_att=4, h_dec=3, d_tag=2)
    params = init_model(20, dims, rng)
    violations = 0
    for _ in range(500):
        n = int(rng.integers(1, 10))
        e, t = random_crf_instance(rng, n)
        path, _ = crf.crf_viterbi(e, t)
        if not crf.is_valid_bio(path):
            violations += 1
    for _ in range(500):
        n = int(rng.integers(1, 10))
        idx = list(rng.integers(2, 20, size=n))
        if not crf.is_valid_bio(predict_tags(params, idx)):
            violations += 1
    report("3 constraint-guarantee", violations == 0,
           f"{violations} violations in 1000 decodes")


def _padded_emissions(params, indices, gold, pad_to):
    """Run the padded-batch pipeline at width pad_to; returns emissions
    pairs (teacher-forced, inference) for the real positions."""
    n = len(indices)
    mat = np.full((1, pad_to), 0, dtype=np.int64)
    mat[0, :n] = indices
    tags = np.zeros((1, pad_to), dtype=np.int64)
    tags[0, :n] = gold
    enc = bilstm_encode(params, mat, [n])
    att = self_attention(params, enc, [n])
    e_train = decode_tags_training(params, att, tags, [n])[0, :n]
    e_inf = decode_tags_inference(params, att, [n])[0, :n]
    return e_train, e_inf


def test_criterion_4_padding_invariance():
    rng = np.random.default_rng(104)
    dims = ModelDims(embedding_dim=4, h_enc=3, d_att=4, h_dec=3, d_tag=2)
    params = init_model(15, dims, rng)
    for _ in range(100):
        n = int(rng.integers(1, 7))
        extra = int(rng.integers(1, 5))
        indices = list(rng.integers(2, 15, size=n))
        gold = [crf.O] * n
        runs = rng.integers(0, 2, size=n)
        prev = crf.O
        for i in range(n):  # random but valid BIO gold
            if runs[i] and prev != crf.O:
                gold[i] = crf.I
            elif runs[i]:
                gold[i] = crf.B
            prev = gold[i]
        e1_train, e1_inf = _padded_emissions(params, indices, gold, n)
        e2_train, e2_inf = _padded_emissions(params, indices, gold, n + extra)
        loss1 = crf.crf_nll(e1_train, params.transitions, gold)
        loss2 = crf.crf_nll(e2_train, params.transitions, gold)
        assert abs(loss1 - loss2) <= 1e-9
        p1, _ = crf.crf_viterbi(e1_inf, params.transitions)
        p2, _ = crf.crf_viterbi(e2_inf, params.transitions)
        assert p1 == p2
    report("4 masking-padding", True, "100 random cases")


def test_criterion_5_learnability():
    start = time.monotonic()
    corpus = make_synthetic_corpus(200, 3, seed=0)
    cfg = TrainConfig(learning_rate=0.003, batch_size=8, embedding_dim=32,
                      h_enc=32, d_att=32, h_dec=32, d_tag=8,
                      epochs=10, runs_per_fold=1, seed=0)
    reports = cross_validate(cfg, corpus)
    elapsed = time.monotonic() - start
    f1s = {r.held_out_domain: round(r.mean_f1, 3) for r in reports}
    ok = all(r.mean_f1 >= 0.90 for r in reports) and elapsed < 300.0
    report("5 learnability", ok, f"fold F1 {f1s}, {elapsed:.0f}s")


def test_criterion_6_overfit_oracle():
    corpus = make_synthetic_corpus(8, 1, seed=4)
    target = next(s for s in corpus.sentences if "B" in s.tags)
    single = Corpus(sentences=[target])
    cfg = TrainConfig(learning_rate=0.005, embedding_dim=16, h_enc=8,
                      d_att=8, h_dec=8, d_tag=4, epochs=200,
                      runs_per_fold=1, seed=0)
    params, vocab, _ = train(cfg, single, [target.domain])
    pred = predict_tags(params, encode_tokens(target.tokens, vocab))
    gold_spans = [(s.start, s.end) for s in extract_spans(target.tags)]
    pred_spans = [(s.start, s.end) for s in extract_spans(pred)]
    tp = len(set(gold_spans) & set(pred_spans))
    m = compute_metrics(tp, len(pred_spans) - tp, len(gold_spans) - tp)
    report("6 overfit-oracle", m.f1 == 1.0, f"F1 {m.f1}")


def test_criterion_7_metric_oracles():
    m1 = compute_metrics(1, 1, 0)
    assert (m1.precision, m1.recall) == (0.5, 1.0)
    assert m1.f1 == 2 * 0.5 * 1.0 / (0.5 + 1.0)
    m2 = compute_metrics(2, 1, 2)
    assert m2.f1 == 2 * (2 / 3) * 0.5 / ((2 / 3) + 0.5)
    rng = np.random.default_rng(107)
    for _ in range(10_000):
        tags = list(rng.integers(0, 3, size=rng.integers(1, 12)))
        spans = extract_spans(tags)
        transitions = sum(1 for i, t in enumerate(tags)
                          if t != 0 and (i == 0 or tags[i - 1] == 0))
        assert len(spans) == transitions
    report("7 metric-oracles", True, "goldens + 10000 random sequences")


def test_criterion_8_pipeline_fidelity():
    tokens = clean_tokens("Can you add audio format for text to speech?")
    tags, misses = align_bio(tokens, [clean_tokens("audio format"),
                                      clean_tokens("text to speech")])
    ok = (tags == ["O", "O", "O", "B", "I", "O", "B", "I", "I"]
          and misses == 0)
    report("8 pipeline-fidelity", ok, f"tags {tags}")


def test_criterion_9_crossval_determinism(tmp_path):
    corpus_path = tmp_path / "corpus.jsonl"
    save_corpus(corpus_path, make_synthetic_corpus(24, 2, seed=1))
    config_path = tmp_path / "cfg.json"
    config_path.write_text(json.dumps({
        "embedding_dim": 16, "h_enc": 8, "d_att": 8, "h_dec": 8, "d_tag": 4,
        "epochs": 2, "runs_per_fold": 2, "batch_size": 8, "seed": 0,
    }), encoding="utf-8")
    outs = []
    for name in ("run1", "run2"):
        out = tmp_path / name
        assert cli_main(["crossval", "--corpus", str(corpus_path),
                         "--config", str(config_path), "--out", str(out)]) == 0
        outs.append(out)
    identical = all(
        (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes()
        for f in ("fold_dom0.json", "fold_dom1.json", "report.json",
                  "report.txt"))
    report("9 crossval-determinism", identical, "fold reports byte-identical")
