"""Whole-document term-similarity baselines: BM25 thresholding and SimNet."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from cigmatch.data import DatasetSplit
from cigmatch.estimator import _check_fitted, check_labels, check_pairs
from cigmatch.model import MatcherModel, ModelConfig, PairFeatures, binary_metrics, evaluate, train
from cigmatch.termsim import IdfTable, idf_table, similarity_features
from cigmatch.textprep import make_document


def _tokens(pairs) -> list[tuple[list[str], list[str]]]:
    return [(make_document(a).tokens(), make_document(b).tokens()) for a, b in pairs]


def best_threshold(scores: np.ndarray, y: np.ndarray) -> float:
    """Threshold (predict 1 when ``score >= t``) with the highest accuracy.

    Candidates are the observed scores plus +inf; ties go to the lowest one.
    """
    scores = np.asarray(scores, dtype=float)
    y = np.asarray(y, dtype=int)
    best_t, best_acc = np.inf, np.mean(y == 0)
    for t in np.unique(scores):
        acc = np.mean((scores >= t).astype(int) == y)
        if acc > best_acc:
            best_t, best_acc = float(t), acc
    return best_t


class BM25ThresholdClassifier(ClassifierMixin, BaseEstimator):
    """Predict "same story" when the BM25-weighted cosine clears a tuned threshold.

    IDF comes from the training documents; the threshold is tuned on
    ``eval_set`` when given, otherwise on the training pairs.
    """

    def __init__(self, k1=1.2, b=0.75):
        self.k1 = k1
        self.b = b

    def fit(self, X, y, eval_set=None):
        pairs = check_pairs(X)
        y = check_labels(y, len(pairs))
        toks = _tokens(pairs)
        self.idf_ = idf_table(t for pair in toks for t in pair)
        if eval_set is not None:
            tune_pairs = check_pairs(eval_set[0])
            tune_y = check_labels(eval_set[1], len(tune_pairs))
            scores = self._scores(_tokens(tune_pairs))
        else:
            tune_y, scores = y, self._scores(toks)
        self.threshold_ = best_threshold(scores, tune_y)
        self.classes_ = np.array([0, 1])
        return self

    def _scores(self, toks) -> np.ndarray:
        return np.array([similarity_features(a, b, self.idf_, self.k1, self.b).bm25_cos for a, b in toks])

    def decision_function(self, X) -> np.ndarray:
        _check_fitted(self, "idf_")
        return self._scores(_tokens(check_pairs(X)))

    def predict(self, X) -> np.ndarray:
        return (self.decision_function(X) >= self.threshold_).astype(int)


def global_features(pairs, idf: IdfTable) -> list[PairFeatures]:
    """Whole-pair similarity vectors packed as one-vertex graphs."""
    return [
        PairFeatures(adjacency=np.ones((1, 1)), term=similarity_features(a, b, idf).as_array().reshape(1, -1))
        for a, b in _tokens(pairs)
    ]


class SimNetClassifier(ClassifierMixin, BaseEstimator):
    """The five global similarities fed to the matcher's classifier head.

    Shares the head, loss and optimiser settings with :class:`CIGMatcher`.
    """

    def __init__(self, epochs=10, batch_size=32, learning_rate=1e-3, warmup_steps=1000, dropout=0.1, random_state=0):
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.warmup_steps = warmup_steps
        self.dropout = dropout
        self.random_state = random_state

    def fit(self, X, y, eval_set=None):
        pairs = check_pairs(X)
        y = check_labels(y, len(pairs))
        cfg = ModelConfig.for_variant(
            "cig-sim",
            epochs=self.epochs,
            batch=self.batch_size,
            learning_rate=self.learning_rate,
            warmup_steps=self.warmup_steps,
            dropout=self.dropout,
            seed=self.random_state,
        )
        idf = idf_table(t for pair in _tokens(pairs) for t in pair)
        model = MatcherModel(cfg, idf)
        dev = dev_y = None
        if eval_set is not None:
            dev_pairs = check_pairs(eval_set[0])
            dev_y = check_labels(eval_set[1], len(dev_pairs))
            dev = global_features(dev_pairs, idf)
        self.history_ = train(model, global_features(pairs, idf), y, dev, dev_y)
        self.model_ = model
        self.classes_ = np.array([0, 1])
        return self

    def predict_proba(self, X) -> np.ndarray:
        _check_fitted(self, "model_")
        p = self.model_.predict_proba(global_features(check_pairs(X), self.model_.idf))
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)


def _xy(pairs):
    return [(p.doc_a, p.doc_b) for p in pairs], [p.label for p in pairs]


def bm25_classify(data: DatasetSplit, k1: float = 1.2, b: float = 0.75) -> dict[str, float]:
    """Fit IDF on train, tune the threshold on dev, report test accuracy and F1."""
    X, y = _xy(data.train)
    clf = BM25ThresholdClassifier(k1, b).fit(X, y, eval_set=_xy(data.dev) if data.dev else None)
    Xt, yt = _xy(data.test)
    return {**binary_metrics(yt, clf.predict(Xt)), "threshold": clf.threshold_}


def simnet_classify(data: DatasetSplit, **params) -> dict[str, float]:
    X, y = _xy(data.train)
    clf = SimNetClassifier(**params).fit(X, y, eval_set=_xy(data.dev) if data.dev else None)
    Xt, yt = _xy(data.test)
    return evaluate(clf.model_, global_features(Xt, clf.model_.idf), yt)
