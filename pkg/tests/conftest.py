import warnings

import pytest

from opencoding import pipeline
from opencoding.multilabel import ECCConfig, LabelSpace
from opencoding.svm import ConvergenceWarning, TrainConfig

from _synth import correlated_pairs_corpus, disjoint_vocab_corpus


def _space_of(records):
    return LabelSpace.from_observed(c for r in records for c in r.labels)


@pytest.fixture(scope="session")
def disjoint_experiments():
    """BR/ECC/LP on the per-label-separable corpus (test part has 500 records)."""
    records = disjoint_vocab_corpus(2500, seed=11)
    space = _space_of(records)
    split = pipeline.split(records, pipeline.SplitConfig(seed=11))
    out = {"records": records, "space": space, "split": split}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for algorithm in ("br", "ecc", "lp"):
            out[algorithm] = pipeline.run_experiment(
                records,
                space,
                split,
                algorithm,
                train_cfg=TrainConfig(C=100.0, seed=11),
                ecc_cfg=ECCConfig(seed=11),
            )
    return out


@pytest.fixture(scope="session")
def correlated_experiments():
    """BR and ECC on the 1,000-record correlated-pairs corpus, seed 0."""
    records = correlated_pairs_corpus(1000, seed=0)
    space = _space_of(records)
    split = pipeline.split(records, pipeline.SplitConfig(seed=0))
    out = {"records": records, "space": space, "split": split}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ConvergenceWarning)
        for algorithm in ("br", "ecc"):
            out[algorithm] = pipeline.run_experiment(
                records,
                space,
                split,
                algorithm,
                train_cfg=TrainConfig(C=100.0, seed=0),
                ecc_cfg=ECCConfig(seed=0),
            )
    return out
