"""Vertex encoders, GCN aggregation, classifier head, and the training loop."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Callable, Sequence

import numpy as np

from cigmatch import tensor as T
from cigmatch.cig import ConceptInteractionGraph
from cigmatch.termsim import FEATURE_NAMES, IdfTable, similarity_features, vertex_term_features
from cigmatch.textprep import Document, EmbeddingTable, Vocabulary

logger = logging.getLogger(__name__)

N_TERM_FEATURES = len(FEATURE_NAMES)

# Ablation variants, keyed by lower-cased model names.
VARIANTS: dict[str, dict] = {
    "cig-siam": dict(use_siamese=True, use_term_features=False, use_communities=False, use_global_sim=False, use_gcn=False),
    "cig-siam-gcn": dict(use_siamese=True, use_term_features=False, use_communities=False, use_global_sim=False, use_gcn=True),
    "cig_cd-siam-gcn": dict(use_siamese=True, use_term_features=False, use_communities=True, use_global_sim=False, use_gcn=True),
    "cig-sim": dict(use_siamese=False, use_term_features=True, use_communities=False, use_global_sim=False, use_gcn=False),
    "cig-sim-gcn": dict(use_siamese=False, use_term_features=True, use_communities=False, use_global_sim=False, use_gcn=True),
    "cig_cd-sim-gcn": dict(use_siamese=False, use_term_features=True, use_communities=True, use_global_sim=False, use_gcn=True),
    "cig-sim-siam-gcn": dict(use_siamese=True, use_term_features=True, use_communities=False, use_global_sim=False, use_gcn=True),
    "cig-sim-siam-gcn-simg": dict(use_siamese=True, use_term_features=True, use_communities=False, use_global_sim=True, use_gcn=True),
}


class UnknownVariantError(ValueError):
    pass


@dataclass
class ModelConfig:
    use_siamese: bool = False
    use_term_features: bool = True
    use_communities: bool = False
    use_global_sim: bool = False
    gcn_layers: int = 3
    gcn_hidden: int = 128
    gcn_out: int = 16
    conv_filters: int = 32
    kernel_size: int = 3
    classifier_hidden: int = 16
    embedding_dim: int = 64
    max_len: int = 100
    dropout: float = 0.1
    epochs: int = 10
    batch: int = 32
    learning_rate: float = 1e-3
    warmup_steps: int = 1000
    weight_decay: float = 3e-7
    clip_norm: float = 5.0
    seed: int = 0
    top_k: int = 10
    window: int = 3
    min_community: int = 2
    max_community: int = 6

    def __post_init__(self):
        if not (self.use_siamese or self.use_term_features):
            raise ValueError("enable the Siamese encoder, the term features, or both")
        if self.gcn_layers < 0:
            raise ValueError("gcn_layers must be >= 0")
        if self.batch < 1 or self.epochs < 1:
            raise ValueError("batch and epochs must be positive")

    @classmethod
    def for_variant(cls, name: str, gcn_layers: int = 3, **overrides) -> "ModelConfig":
        try:
            flags = dict(VARIANTS[name.lower()])
        except KeyError:
            raise UnknownVariantError(
                f"unknown variant {name!r}; valid names: {', '.join(VARIANTS)}"
            ) from None
        use_gcn = flags.pop("use_gcn")
        return cls(**flags, gcn_layers=gcn_layers if use_gcn else 0, **overrides)

    @property
    def input_dim(self) -> int:
        return 2 * self.conv_filters * self.use_siamese + N_TERM_FEATURES * self.use_term_features

    def gcn_sizes(self) -> list[int]:
        if self.gcn_layers == 0:
            return []
        hidden = self.gcn_hidden if self.use_siamese else self.gcn_out
        return [hidden] * (self.gcn_layers - 1) + [self.gcn_out]

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class PairFeatures:
    """Everything the network needs for one pair, computed once up front."""

    adjacency: np.ndarray
    term: np.ndarray | None = None
    ids_a: list[np.ndarray] = field(default_factory=list)
    ids_b: list[np.ndarray] = field(default_factory=list)
    global_sim: np.ndarray | None = None

    @property
    def n_vertices(self) -> int:
        return self.adjacency.shape[0]

    def swapped(self) -> "PairFeatures":
        return PairFeatures(self.adjacency, self.term, self.ids_b, self.ids_a, self.global_sim)


def featurize(
    cig: ConceptInteractionGraph,
    doc_a: Document,
    doc_b: Document,
    cfg: ModelConfig,
    idf: IdfTable,
    vocab: Vocabulary | None = None,
) -> PairFeatures:
    if len(cig) == 0:
        raise ValueError("graph has no vertices")
    feats = PairFeatures(adjacency=T.normalize_adjacency(cig.adjacency))
    if cfg.use_term_features:
        feats.term = np.stack([vertex_term_features(v, doc_a, doc_b, idf).as_array() for v in cig.vertices])
    if cfg.use_siamese:
        if vocab is None:
            raise ValueError("the Siamese encoder needs a vocabulary")
        for v in cig.vertices:
            side_a = [t for i in v.sentences_a for t in doc_a.sentences[i]][: cfg.max_len]
            side_b = [t for i in v.sentences_b for t in doc_b.sentences[i]][: cfg.max_len]
            feats.ids_a.append(np.asarray(vocab.encode(side_a), dtype=np.int64))
            feats.ids_b.append(np.asarray(vocab.encode(side_b), dtype=np.int64))
    if cfg.use_global_sim:
        feats.global_sim = similarity_features(doc_a.tokens(), doc_b.tokens(), idf).as_array()
    return feats


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int, shape) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


def init_params(cfg: ModelConfig, rng: np.random.Generator) -> dict[str, T.Tensor]:
    params: dict[str, T.Tensor] = {}

    def add(name, data):
        params[name] = T.Tensor(data, requires_grad=True, name=name)

    if cfg.use_siamese:
        k, e, f = cfg.kernel_size, cfg.embedding_dim, cfg.conv_filters
        add("conv.weight", _glorot(rng, k * e, f, (k, e, f)))
        add("conv.bias", np.zeros(f))
    dim = cfg.input_dim
    for i, out in enumerate(cfg.gcn_sizes()):
        add(f"gcn.{i}.weight", _glorot(rng, dim, out, (dim, out)))
        dim = out
    if cfg.use_global_sim:
        dim += N_TERM_FEATURES
    add("clf.0.weight", _glorot(rng, dim, cfg.classifier_hidden, (dim, cfg.classifier_hidden)))
    add("clf.0.bias", np.zeros(cfg.classifier_hidden))
    add("clf.1.weight", _glorot(rng, cfg.classifier_hidden, 1, (cfg.classifier_hidden, 1)))
    add("clf.1.bias", np.zeros(1))
    return params


def classifier_head(x: T.Tensor, params, p_drop: float, train: bool, rng) -> T.Tensor:
    """linear -> ReLU -> (dropout) -> linear; returns the 1×1 logit."""
    h = T.relu(T.add(T.matmul(x, params["clf.0.weight"]), params["clf.0.bias"]))
    h = T.dropout(h, p_drop, train, rng)
    return T.add(T.matmul(h, params["clf.1.weight"]), params["clf.1.bias"])


def context_vector(ids: np.ndarray, emb: EmbeddingTable, params) -> T.Tensor:
    w = params["conv.weight"]
    if len(ids) == 0:
        return T.Tensor(np.zeros((1, w.shape[2])))
    seq = T.Tensor(emb.lookup(ids))
    return T.maxpool_time(T.relu(T.conv1d(seq, w, params["conv.bias"])))


def siamese_encode(ids_a: np.ndarray, ids_b: np.ndarray, emb: EmbeddingTable, params) -> T.Tensor:
    """Shared-weight CNN context vectors combined as ``(|c_a - c_b|, c_a * c_b)``."""
    ca = context_vector(ids_a, emb, params)
    cb = context_vector(ids_b, emb, params)
    return T.concat([T.abs_diff(ca, cb), T.hadamard(ca, cb)], axis=1)


class MatcherModel:
    """Trainable parameters plus the frozen resources a forward pass reads."""

    def __init__(
        self,
        cfg: ModelConfig,
        idf: IdfTable,
        vocab: Vocabulary | None = None,
        embeddings: EmbeddingTable | None = None,
        params: dict[str, T.Tensor] | None = None,
    ):
        if cfg.use_siamese:
            if vocab is None or embeddings is None:
                raise ValueError("the Siamese encoder needs a vocabulary and embeddings")
            if embeddings.dim != cfg.embedding_dim:
                raise ValueError(f"embedding dim {embeddings.dim} != configured {cfg.embedding_dim}")
        self.cfg = cfg
        self.idf = idf
        self.vocab = vocab
        self.embeddings = embeddings
        self.params = params if params is not None else init_params(cfg, np.random.default_rng(cfg.seed))

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def featurize(self, cig: ConceptInteractionGraph, doc_a: Document, doc_b: Document) -> PairFeatures:
        return featurize(cig, doc_a, doc_b, self.cfg, self.idf, self.vocab)

    def vertex_matrix(self, feats: PairFeatures) -> T.Tensor:
        parts = []
        if self.cfg.use_siamese:
            rows = [siamese_encode(a, b, self.embeddings, self.params) for a, b in zip(feats.ids_a, feats.ids_b)]
            parts.append(T.concat(rows, axis=0))
        if self.cfg.use_term_features:
            parts.append(T.Tensor(feats.term))
        return parts[0] if len(parts) == 1 else T.concat(parts, axis=1)

    def logit(self, feats: PairFeatures, train: bool = False, rng: np.random.Generator | None = None) -> T.Tensor:
        cfg = self.cfg
        h = self.vertex_matrix(feats)
        a_norm = T.Tensor(feats.adjacency)
        for i in range(len(cfg.gcn_sizes())):
            h = T.gcn_layer(h, a_norm, self.params[f"gcn.{i}.weight"], T.relu)
            h = T.dropout(h, cfg.dropout, train, rng)
        pooled = T.mean_rows(h)
        if cfg.use_global_sim:
            pooled = T.concat([pooled, T.Tensor(feats.global_sim.reshape(1, -1))], axis=1)
        return classifier_head(pooled, self.params, cfg.dropout, train, rng)

    def predict_proba_one(self, feats: PairFeatures) -> float:
        return float(T.sigmoid(self.logit(feats)).item())

    def predict_proba(self, feats: Sequence[PairFeatures]) -> np.ndarray:
        return np.array([self.predict_proba_one(f) for f in feats])

    def batch_loss(self, feats: Sequence[PairFeatures], labels: Sequence[int], train: bool = False, rng=None) -> T.Tensor:
        losses = [T.bce_with_logits(self.logit(f, train, rng), float(y)) for f, y in zip(feats, labels)]
        return T.scale(T.add_n(losses), 1.0 / len(losses))

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        for name, p in self.params.items():
            if name not in arrays:
                raise KeyError(f"checkpoint is missing parameter {name!r}")
            if arrays[name].shape != p.shape:
                raise ValueError(f"parameter {name!r}: shape {arrays[name].shape} != {p.shape}")
            p.data = np.array(arrays[name], dtype=np.float64)


def binary_metrics(y_true: Sequence[int], y_pred: Sequence[int]) -> dict[str, float]:
    from sklearn.metrics import f1_score

    y_true = np.asarray(y_true, dtype=int)
    y_pred = np.asarray(y_pred, dtype=int)
    if y_true.size == 0:
        raise ValueError("cannot evaluate an empty split")
    return {
        "accuracy": float(np.mean(y_true == y_pred)),
        "f1": float(f1_score(y_true, y_pred, pos_label=1, zero_division=0)),
    }


def evaluate(model: MatcherModel, feats: Sequence[PairFeatures], labels: Sequence[int]) -> dict[str, float]:
    """Accuracy and positive-class F1 at a 0.5 probability threshold."""
    if len(feats) == 0:
        raise ValueError("cannot evaluate an empty split")
    probs = model.predict_proba(feats)
    return binary_metrics(labels, (probs >= 0.5).astype(int))


def train(
    model: MatcherModel,
    feats: Sequence[PairFeatures],
    labels: Sequence[int],
    dev_feats: Sequence[PairFeatures] | None = None,
    dev_labels: Sequence[int] | None = None,
    on_epoch: Callable[[dict], None] | None = None,
) -> list[dict]:
    """Mini-batch Adam training with warm-up, L2 decay and global-norm clipping.

    After training the model holds the parameters of the epoch with the best
    dev accuracy (or of the last epoch when no dev split is given). Returns
    one metrics record per epoch and split.
    """
    cfg = model.cfg
    if len(feats) == 0:
        raise ValueError("empty training set")
    labels = np.asarray(labels, dtype=int)
    rng = np.random.default_rng(cfg.seed + 1)
    state = T.AdamState()
    history: list[dict] = []
    best_acc, best_state = -1.0, None

    for epoch in range(1, cfg.epochs + 1):
        order = rng.permutation(len(feats))
        total = 0.0
        for start in range(0, len(order), cfg.batch):
            idx = order[start : start + cfg.batch]
            model.zero_grad()
            loss = model.batch_loss([feats[i] for i in idx], labels[idx], train=True, rng=rng)
            loss.backward()
            total += loss.item() * len(idx)
            T.l2_decay(model.params, cfg.weight_decay)
            T.clip_global_norm([p.grad for p in model.params.values()], cfg.clip_norm)
            lr = T.lr_schedule(state.step + 1, cfg.learning_rate, cfg.warmup_steps)
            T.adam_step(model.params, state, lr)
        model.zero_grad()

        record = {"epoch": epoch, "split": "train", "loss": total / len(feats), **evaluate(model, feats, labels)}
        history.append(record)
        if on_epoch:
            on_epoch(record)
        score = record["accuracy"]
        if dev_feats is not None and len(dev_feats) > 0:
            dev_loss = model.batch_loss(dev_feats, dev_labels).item()
            dev = {"epoch": epoch, "split": "dev", "loss": dev_loss, **evaluate(model, dev_feats, dev_labels)}
            history.append(dev)
            if on_epoch:
                on_epoch(dev)
            score = dev["accuracy"]
        logger.info("epoch %d: %s", epoch, history[-1])
        if dev_feats is None or score > best_acc:
            best_acc, best_state = score, model.state_arrays()

    model.load_state_arrays(best_state)
    return history
