"""Multi-label coding of open-ended survey answers.

Library layout: :mod:`~opencoding.textprep` normalizes raw answers,
:mod:`~opencoding.features` fits TF-IDF vectors, :mod:`~opencoding.svm`
holds the base learners, :mod:`~opencoding.multilabel` the BR/LP/CC/ECC
meta-algorithms, :mod:`~opencoding.evaluation` the 0/1-loss-centric metric
suite, and :mod:`~opencoding.pipeline` ties everything into experiments,
file formats, and the semi-automatic triage policy.
"""

__version__ = "0.1.0"
