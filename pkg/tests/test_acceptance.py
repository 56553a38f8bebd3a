"""Acceptance suite: one test per release criterion, each printing a
PASS/FAIL line (run with ``pytest tests/test_acceptance.py -s``).

Desk-scale policy: everything here rests on hand-derived oracles, property
checks, and seeded synthetic corpora.  The survey-data reproduction needs
the registration-gated GLES files and only runs when OPENCODING_GLES_CSV
points at a prepared dataset.
"""
import os
import time
import warnings

import numpy as np
import pytest
from click.testing import CliRunner

from opencoding import pipeline, svm
from opencoding.cli import main as cli_main
from opencoding.evaluation import PredictionRecord, hamming_loss, zero_one_loss
from opencoding.features import fit_tfidf, transform, transform_many
from opencoding.multilabel import (
    ChainSpec,
    ECCConfig,
    LabelSpace,
    br_fit,
    br_predict,
    cc_fit,
    cc_predict,
    ecc_fit,
    ecc_predict,
    force_min_one_label,
    label_matrix,
    lp_fit,
    lp_predict,
)
from opencoding.svm import ConvergenceWarning, TrainConfig
from opencoding.textprep import Document

from _oracles import linear_dual_qp, rbf_decision, rbf_dual_qp, small_svm_fixtures
from _synth import correlated_pairs_corpus, write_dataset_csv

SPACE3 = LabelSpace(("A", "B", "C"))


def _report(name):
    print(f"PASS: {name}")


def _rec(i, true, pred):
    return PredictionRecord(str(i), frozenset(pred), frozenset(true), None, "m")


def test_metric_oracle():
    """5-record fixture: 0/1 = 0.4, Hamming = 2/15; Hamming <= 0/1 on 1,000
    random fixtures; runtime < 1 s."""
    start = time.monotonic()
    five = [
        _rec(1, {"A"}, {"A"}),
        _rec(2, {"A", "B"}, {"A"}),
        _rec(3, {"C"}, {"C"}),
        _rec(4, {"B"}, {"B", "C"}),
        _rec(5, {"A"}, {"A"}),
    ]
    assert abs(zero_one_loss(five) - 0.4) < 1e-12
    assert abs(hamming_loss(five, SPACE3) - 2.0 / 15.0) < 1e-12

    rng = np.random.default_rng(2024)
    codes = ("A", "B", "C")
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        records = []
        for i in range(n):
            true = frozenset(rng.choice(codes, size=int(rng.integers(1, 4)), replace=False))
            k_pred = int(rng.integers(0, 4))
            pred = frozenset(rng.choice(codes, size=k_pred, replace=False))
            records.append(_rec(i, true, pred))
        assert hamming_loss(records, SPACE3) <= zero_one_loss(records) + 1e-12
    elapsed = time.monotonic() - start
    assert elapsed < 1.0, f"metric oracle took {elapsed:.2f}s"
    _report("metric oracle (0.4, 2/15, hamming <= zero-one on 1000 fixtures)")


def test_svm_oracle():
    """DCD and SMO vs the quadratic-programming oracle on every <=10-point
    fixture, 1e-3 band, KKT constraints at convergence; runtime < 10 s."""
    start = time.monotonic()
    lin = TrainConfig(C=100.0, kernel="linear", tolerance=1e-6)
    rbf = TrainConfig(C=100.0, kernel="rbf", gamma=0.5, tolerance=1e-5)
    for X, y in small_svm_fixtures():
        model = svm.train_binary(X, y, lin)
        w, b, alpha = linear_dual_qp(X, y, lin.C)
        mine = np.array([svm.decision(model, x) for x in X])
        assert np.abs(mine - (X @ w + b)).max() < 1e-3
        assert model.kkt_violation < lin.tolerance  # stationarity at the box

        kernel_model = svm.train_binary(X, y, rbf)
        alpha_o, bias_o = rbf_dual_qp(X, y, rbf.C, rbf.gamma)
        mine = np.array([svm.decision(kernel_model, x) for x in X])
        oracle = rbf_decision(X, y, alpha_o, bias_o, rbf.gamma, X)
        assert np.abs(mine - oracle).max() < 1e-3
        assert np.all(np.abs(kernel_model.alphas) <= rbf.C + 1e-6)  # box
        assert svm.dual_equality_residual(kernel_model) <= rbf.tolerance * rbf.C
    elapsed = time.monotonic() - start
    assert elapsed < 10.0, f"svm oracle took {elapsed:.2f}s"
    _report("svm oracle (DCD and SMO within 1e-3 of the QP solver, KKT ok)")


def test_tfidf_oracle():
    """Hand-computed example to 1e-4; df round-trip on random corpora."""
    docs = [Document("1", ("krieg", "krieg", "frieden")), Document("2", ("frieden",))]
    model = fit_tfidf(docs)
    vec = transform(docs[0], model)
    values = {model.vocabulary.terms[i]: v for i, v in vec}
    assert abs(values["krieg"] - 0.94216) < 1e-4
    assert abs(values["frieden"] - 0.33518) < 1e-4

    rng = np.random.default_rng(7)
    vocabulary = [f"w{k}" for k in range(12)]
    for _ in range(50):
        corpus = []
        for i in range(int(rng.integers(1, 15))):
            size = int(rng.integers(0, 6))
            corpus.append(Document(str(i), tuple(rng.choice(vocabulary, size=size))))
        if not any(d.tokens for d in corpus):
            continue
        fitted = fit_tfidf(corpus)
        X = transform_many(corpus, fitted)
        recomputed = np.asarray((X != 0).sum(axis=0)).ravel()
        assert np.array_equal(recomputed, fitted.vocabulary.doc_freq)
    _report("tf-idf oracle (hand example to 1e-4, df round-trip)")


def _keyword_training_set():
    token_lists = [
        ["krieg", "und"], ["steuern", "zu"], ["krieg", "steuern"], ["frieden"],
        ["krieg"], ["steuern"], ["und", "zu"], ["krieg", "zu"],
    ]
    labels = [{"A"}, {"B"}, {"A", "B"}, {"C"}, {"A"}, {"B"}, {"C"}, {"A"}]
    docs = [Document(str(i), tuple(t)) for i, t in enumerate(token_lists)]
    tfidf = fit_tfidf(docs)
    X = transform_many(docs, tfidf)
    Y = label_matrix(labels, SPACE3)
    return X, Y


def test_meta_algorithm_structure():
    """LP never empty over 10,000 random predictions; ECC(1 chain, no
    bootstrap, fixed order) == CC; BR == union of binary predictions."""
    X, Y = _keyword_training_set()
    cfg = TrainConfig(C=100.0, seed=0)

    lp = lp_fit(X, Y, SPACE3, cfg)
    rng = np.random.default_rng(31)
    import scipy.sparse as sp

    for _ in range(10_000):
        dense = rng.random(X.shape[1]) * (rng.random(X.shape[1]) < 0.4)
        assert lp_predict(lp, sp.csr_matrix(dense.reshape(1, -1))) != frozenset()

    order = (2, 0, 1)
    ecc = ecc_fit(X, Y, SPACE3, ECCConfig(n_chains=1, seed=8), cfg,
                  bootstrap=False, orders=[order])
    cc = cc_fit(X, Y, SPACE3, ChainSpec(order), cfg)
    for i in range(X.shape[0]):
        ecc_set, _ = ecc_predict(ecc, X.getrow(i))
        cc_set, _, _ = cc_predict(cc, X.getrow(i))
        assert ecc_set == cc_set

    br = br_fit(X, Y, SPACE3, cfg)
    for i in range(X.shape[0]):
        x = X.getrow(i)
        predicted, _ = br_predict(br, x)
        union = {
            SPACE3.codes[j]
            for j, m in enumerate(br.models)
            if svm.predict_binary(m, x) == 1
        }
        assert predicted == union
    _report("meta-algorithm structure (LP nonempty x10k, ECC(1)=CC, BR=union)")


def test_force_min_one_label_policy():
    """100 seeded synthetic experiments: post-fallback zero-label rate is
    exactly 0 and the 0/1 loss never increases."""
    rng = np.random.default_rng(55)
    codes = tuple(str(c) for c in range(8))
    space = LabelSpace(codes)
    for _ in range(100):
        n = int(rng.integers(20, 60))
        before, after = [], []
        empties = 0
        for i in range(n):
            truth = frozenset(rng.choice(codes, size=int(rng.integers(1, 3)), replace=False))
            if rng.random() < 0.3:
                pred = frozenset()
            else:
                pred = frozenset(rng.choice(codes, size=int(rng.integers(1, 3)), replace=False))
            scores = rng.normal(size=len(codes))
            fixed = force_min_one_label(pred, scores, space)
            empties += int(not fixed)
            before.append(int(pred != truth))
            after.append(int(fixed != truth))
        assert empties == 0
        assert sum(after) <= sum(before)
    _report("force-min-one-label (zero-label rate 0, loss never increases, x100)")


# Pinned on the frozen generator (corpus seed 0, split seed 0, solver seed 0,
# ECC seed 0): BR 32/200 wrong, ECC 23/200 wrong on the 200-record test part.
PINNED_BR_LOSS = 0.1600
PINNED_ECC_LOSS = 0.1150


def test_synthetic_end_to_end_ordering():
    """1,000-record correlated-pairs corpus: ECC 0/1 <= BR 0/1 at the fixed
    seed, both values pinned; runtime < 2 min."""
    start = time.monotonic()
    records = correlated_pairs_corpus(1000, seed=0)
    stats = pipeline.dataset_stats(records)
    assert 1.1 <= stats.cardinality <= 1.3  # mildly multi-label by design
    space = LabelSpace.from_observed(c for r in records for c in r.labels)
    parts = pipeline.split(records, pipeline.SplitConfig(seed=0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        br = pipeline.run_experiment(
            records, space, parts, "br", train_cfg=TrainConfig(C=100.0, seed=0)
        )
        ecc = pipeline.run_experiment(
            records, space, parts, "ecc",
            train_cfg=TrainConfig(C=100.0, seed=0), ecc_cfg=ECCConfig(seed=0),
        )
    assert ecc.report.overall_zero_one <= br.report.overall_zero_one
    assert abs(br.report.overall_zero_one - PINNED_BR_LOSS) < 1e-9
    assert abs(ecc.report.overall_zero_one - PINNED_ECC_LOSS) < 1e-9
    elapsed = time.monotonic() - start
    assert elapsed < 120.0, f"end-to-end took {elapsed:.1f}s"
    _report(
        f"synthetic end-to-end (ECC {ecc.report.overall_zero_one:.4f} <= "
        f"BR {br.report.overall_zero_one:.4f}, pinned)"
    )


def test_determinism_byte_identical_interchange(tmp_path):
    """Two train+predict CLI runs with the same config and seed produce
    byte-identical interchange files for every algorithm including ECC."""
    data = tmp_path / "answers.csv"
    write_dataset_csv(correlated_pairs_corpus(150, seed=5), data)
    config = tmp_path / "config.yaml"
    config.write_text("seed: 5\nsvm:\n  C: 100.0\necc:\n  n_chains: 4\n", encoding="utf-8")
    runner = CliRunner()
    split_file = tmp_path / "split.json"
    result = runner.invoke(cli_main, [
        "--config", str(config), "split", "--data", str(data), "--out", str(split_file)
    ], catch_exceptions=False)
    assert result.exit_code == 0
    for algorithm in ("br", "lp", "cc", "ecc"):
        blobs = []
        for attempt in ("one", "two"):
            model_dir = tmp_path / f"{algorithm}-{attempt}"
            preds = tmp_path / f"{algorithm}-{attempt}.jsonl"
            for args in (
                ["train", "--data", str(data), "--split", str(split_file),
                 "--algorithm", algorithm, "--out", str(model_dir)],
                ["predict", "--model", str(model_dir), "--data", str(data),
                 "--split", str(split_file), "--out", str(preds)],
            ):
                result = runner.invoke(
                    cli_main, ["--config", str(config)] + args, catch_exceptions=False
                )
                assert result.exit_code == 0, result.output
            blobs.append(preds.read_bytes())
        assert blobs[0] == blobs[1], f"{algorithm} interchange files differ"
    _report("determinism (byte-identical train+predict for br/lp/cc/ecc)")


def test_leakage_sentinel():
    """A token occurring only in the test part stays out of the vocabulary."""
    records = correlated_pairs_corpus(200, seed=3)
    parts = pipeline.split(records, pipeline.SplitConfig(seed=3))
    sentinel = "zzzsentinelzzz"
    test_ids = set(parts.test_ids)
    patched = [
        pipeline.AnswerRecord(r.record_id, f"{r.text} {sentinel}", r.labels)
        if r.record_id in test_ids
        else r
        for r in records
    ]
    space = LabelSpace.from_observed(c for r in patched for c in r.labels)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        result = pipeline.run_experiment(
            patched, space, parts, "br", train_cfg=TrainConfig(C=10.0, seed=3)
        )
    assert sentinel not in result.tfidf.vocabulary.term_to_index
    _report("leakage sentinel (test-only token absent from the vocabulary)")


GLES_ENV = "OPENCODING_GLES_CSV"


@pytest.mark.skipif(GLES_ENV not in os.environ, reason="survey data not available")
def test_gles_data_gated():
    """Optional survey-data tier: dataset statistics must match the published
    figures exactly; tuned-config losses within +-0.03 of the reference."""
    spec = pipeline.DatasetSpec(os.environ[GLES_ENV])
    records, space = pipeline.load_dataset(spec)
    stats = pipeline.dataset_stats(records)
    assert stats.n_records == 17_584
    assert stats.n_labels == 55
    assert round(stats.cardinality, 2) == 1.17
    assert round(stats.pct_multi_label, 1) == 12.6
    assert stats.max_labels == 5

    parts = pipeline.split(records, pipeline.SplitConfig(seed=0))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        ecc = pipeline.run_experiment(
            records, space, parts, "ecc",
            train_cfg=TrainConfig(C=100.0, seed=0), ecc_cfg=ECCConfig(seed=0),
        )
        lp = pipeline.run_experiment(
            records, space, parts, "lp",
            train_cfg=TrainConfig(C=100.0, kernel="rbf", gamma=0.5, seed=0),
        )
        br = pipeline.run_experiment(
            records, space, parts, "br", train_cfg=TrainConfig(C=100.0, seed=0)
        )
    assert abs(ecc.report.overall_zero_one - 0.1891) <= 0.03
    assert abs(lp.report.overall_zero_one - 0.1959) <= 0.03
    assert abs(br.report.overall_zero_one - 0.2161) <= 0.03
    _report("survey-data tier (stats exact, losses within +-0.03)")
