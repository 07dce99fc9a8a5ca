"""scikit-learn compatible front end: graph building transformer and the matcher."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.exceptions import NotFittedError

from cigmatch import tensor as T
from cigmatch.cig import ConceptInteractionGraph, build_pair_cig, extract_keywords
from cigmatch.data import LabeledPair
from cigmatch.model import MatcherModel, ModelConfig, evaluate, train
from cigmatch.termsim import IdfTable, idf_table
from cigmatch.textprep import Document, EmbeddingTable, Vocabulary, load_embeddings, make_document, random_embeddings

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# input validation


def check_pairs(X) -> list[tuple[str, str]]:
    """Coerce ``X`` to a list of ``(doc_a, doc_b)`` strings.

    Accepts pair tuples, an ``(n, 2)`` array, a DataFrame with ``doc_a`` and
    ``doc_b`` columns, or :class:`LabeledPair` objects.
    """
    if hasattr(X, "columns") and {"doc_a", "doc_b"} <= set(X.columns):
        X = list(zip(X["doc_a"], X["doc_b"]))
    if isinstance(X, np.ndarray):
        if X.ndim != 2 or X.shape[1] != 2:
            raise ValueError(f"expected an (n_pairs, 2) array of texts, got shape {X.shape}")
        X = X.tolist()
    if isinstance(X, (str, bytes)):
        raise ValueError("expected a sequence of (doc_a, doc_b) pairs, got a single string")
    out = []
    for i, item in enumerate(X):
        if isinstance(item, LabeledPair):
            item = (item.doc_a, item.doc_b)
        try:
            a, b = item
        except (TypeError, ValueError):
            raise ValueError(f"pair {i}: expected (doc_a, doc_b), got {type(item).__name__}") from None
        if not isinstance(a, str) or not isinstance(b, str):
            raise ValueError(f"pair {i}: documents must be strings")
        out.append((a, b))
    if not out:
        raise ValueError("no pairs given")
    return out


def check_labels(y, n: int) -> np.ndarray:
    y = np.asarray(y)
    if y.ndim != 1 or len(y) != n:
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("labels must be 0 or 1")
    return y.astype(int)


def _check_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        raise NotFittedError(f"{type(est).__name__} is not fitted yet; call fit() first")


# ---------------------------------------------------------------------------
# graph construction


@dataclass
class PreparedPair:
    doc_a: Document
    doc_b: Document
    cig: ConceptInteractionGraph


def prepare_pair(
    text_a: str,
    text_b: str,
    use_communities: bool = False,
    top_k: int = 10,
    window: int = 3,
    min_size: int = 2,
    max_size: int = 6,
) -> PreparedPair:
    doc_a = extract_keywords(make_document(text_a, "a"), top_k, window)
    doc_b = extract_keywords(make_document(text_b, "b"), top_k, window)
    return PreparedPair(doc_a, doc_b, build_pair_cig(doc_a, doc_b, use_communities, min_size, max_size))


def prepare_pairs(pairs: Sequence[tuple[str, str]], n_jobs: int | None = None, **kwargs) -> list[PreparedPair]:
    if n_jobs in (None, 1) or len(pairs) < 2:
        return [prepare_pair(a, b, **kwargs) for a, b in pairs]
    return Parallel(n_jobs=n_jobs)(delayed(prepare_pair)(a, b, **kwargs) for a, b in pairs)


class PairGraphBuilder(TransformerMixin, BaseEstimator):
    """Turn ``(doc_a, doc_b)`` text pairs into merged concept interaction graphs."""

    def __init__(self, use_communities=False, top_k=10, window=3, min_size=2, max_size=6, n_jobs=None):
        self.use_communities = use_communities
        self.top_k = top_k
        self.window = window
        self.min_size = min_size
        self.max_size = max_size
        self.n_jobs = n_jobs

    def fit(self, X, y=None):
        check_pairs(X)
        self.n_features_in_ = 2
        return self

    def transform(self, X) -> list[PreparedPair]:
        return prepare_pairs(
            check_pairs(X),
            n_jobs=self.n_jobs,
            use_communities=self.use_communities,
            top_k=self.top_k,
            window=self.window,
            min_size=self.min_size,
            max_size=self.max_size,
        )


# ---------------------------------------------------------------------------
# the matcher


class CIGMatcher(ClassifierMixin, BaseEstimator):
    """Binary same-story classifier for article pairs.

    ``variant`` picks the vertex encoders and whether GCN layers and
    community detection are used (see :data:`cigmatch.model.VARIANTS`).
    ``fit`` accepts ``eval_set=(X_dev, y_dev)``; the epoch with the best dev
    accuracy is kept.
    """

    def __init__(
        self,
        variant="cig-sim-gcn",
        gcn_layers=3,
        gcn_hidden=128,
        epochs=10,
        batch_size=32,
        learning_rate=1e-3,
        warmup_steps=1000,
        dropout=0.1,
        embedding_dim=64,
        embeddings_path=None,
        max_len=100,
        top_k=10,
        random_state=0,
        n_jobs=None,
    ):
        self.variant = variant
        self.gcn_layers = gcn_layers
        self.gcn_hidden = gcn_hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.warmup_steps = warmup_steps
        self.dropout = dropout
        self.embedding_dim = embedding_dim
        self.embeddings_path = embeddings_path
        self.max_len = max_len
        self.top_k = top_k
        self.random_state = random_state
        self.n_jobs = n_jobs

    def _config(self) -> ModelConfig:
        return ModelConfig.for_variant(
            self.variant,
            gcn_layers=self.gcn_layers,
            gcn_hidden=self.gcn_hidden,
            epochs=self.epochs,
            batch=self.batch_size,
            learning_rate=self.learning_rate,
            warmup_steps=self.warmup_steps,
            dropout=self.dropout,
            embedding_dim=self.embedding_dim,
            max_len=self.max_len,
            top_k=self.top_k,
            seed=self.random_state,
        )

    def _prepare(self, pairs, cfg: ModelConfig) -> list[PreparedPair]:
        return prepare_pairs(
            pairs,
            n_jobs=self.n_jobs,
            use_communities=cfg.use_communities,
            top_k=cfg.top_k,
            window=cfg.window,
            min_size=cfg.min_community,
            max_size=cfg.max_community,
        )

    def fit(self, X, y, eval_set=None, on_epoch=None):
        pairs = check_pairs(X)
        y = check_labels(y, len(pairs))
        cfg = self._config()
        prepared = self._prepare(pairs, cfg)

        docs = [d for p in prepared for d in (p.doc_a, p.doc_b)]
        idf = idf_table(d.tokens() for d in docs)
        vocab = emb = None
        if cfg.use_siamese:
            vocab = Vocabulary.from_documents(docs)
            if self.embeddings_path:
                emb = load_embeddings(self.embeddings_path, vocab)
                if emb.dim != cfg.embedding_dim:
                    cfg.embedding_dim = emb.dim
            else:
                emb = random_embeddings(vocab, cfg.embedding_dim, seed=cfg.seed)

        model = MatcherModel(cfg, idf, vocab, emb)
        feats = [model.featurize(p.cig, p.doc_a, p.doc_b) for p in prepared]
        dev_feats = dev_y = None
        if eval_set is not None:
            dev_pairs = check_pairs(eval_set[0])
            dev_y = check_labels(eval_set[1], len(dev_pairs))
            dev_feats = [model.featurize(p.cig, p.doc_a, p.doc_b) for p in self._prepare(dev_pairs, cfg)]

        self.history_ = train(model, feats, y, dev_feats, dev_y, on_epoch=on_epoch)
        self.model_ = model
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = 2
        self.n_parameters_ = model.n_parameters()
        return self

    def featurize(self, X) -> list:
        _check_fitted(self, "model_")
        prepared = self._prepare(check_pairs(X), self.model_.cfg)
        return [self.model_.featurize(p.cig, p.doc_a, p.doc_b) for p in prepared]

    def predict_proba(self, X) -> np.ndarray:
        feats = self.featurize(X)
        p = self.model_.predict_proba(feats)
        return np.column_stack([1.0 - p, p])

    def predict(self, X) -> np.ndarray:
        return (self.predict_proba(X)[:, 1] >= 0.5).astype(int)

    def evaluate(self, X, y) -> dict[str, float]:
        feats = self.featurize(X)
        return evaluate(self.model_, feats, check_labels(y, len(feats)))

    # -- persistence -------------------------------------------------------

    def save(self, path, binary: bool = True, extra_meta: dict | None = None) -> None:
        _check_fitted(self, "model_")
        m = self.model_
        arrays = m.state_arrays()
        if m.embeddings is not None:
            arrays["frozen.embeddings"] = m.embeddings.matrix
        meta = {
            "estimator": self.get_params(),
            "config": m.cfg.to_dict(),
            "idf": m.idf.to_dict(),
            "vocab": m.vocab.itos if m.vocab is not None else None,
            "history": self.history_,
            **(extra_meta or {}),
        }
        T.save_params(path, arrays, meta, binary=binary)

    @classmethod
    def load(cls, path) -> "CIGMatcher":
        arrays, meta = T.load_params(path)
        est = cls(**meta["estimator"])
        cfg = ModelConfig.from_dict(meta["config"])
        vocab = emb = None
        if meta.get("vocab") is not None:
            vocab = Vocabulary(meta["vocab"][1:])
            matrix = arrays.pop("frozen.embeddings")
            emb = EmbeddingTable(matrix.shape[1], matrix)
        model = MatcherModel(cfg, IdfTable.from_dict(meta["idf"]), vocab, emb)
        model.load_state_arrays(arrays)
        est.model_ = model
        est.history_ = meta.get("history", [])
        est.classes_ = np.array([0, 1])
        est.n_features_in_ = 2
        est.n_parameters_ = model.n_parameters()
        est.meta_ = meta
        return est
