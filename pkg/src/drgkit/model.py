"""Linear DRG classifier over tf-idf features.

Two target layouts share one head:

* single-label: one logit per catalog code, trained with softmax cross-entropy;
* two-label: one logit per base DRG followed by five CC/MCC logits, trained with
  ``CE(base) + lambda_cc * CE(cc)`` and decoded by a constrained argmax over the
  CC/MCC labels valid for the predicted base, then composed back into a code.

An optional low-rank adapter adds ``(alpha / r) * B @ A`` to the frozen head.
"""

from __future__ import annotations

import base64
import json
import logging
from dataclasses import asdict, dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Sequence

import numpy as np

from drgkit import kernels
from drgkit.catalog import CcMccLabel, DrgCatalog, compose, label_valid_set
from drgkit.errors import ModeMismatchError, NonFiniteGradientError
from drgkit.features import FeatureMatrix, Vocabulary, build_vocab, featurize
from drgkit.preprocess import CohortSplit

log = logging.getLogger(__name__)

N_CC = len(CcMccLabel)
ARTIFACT_VERSION = 1


class Mode(str, Enum):
    SINGLE = "single"
    TWO_LABEL = "two_label"


@dataclass
class TrainConfig:
    learning_rate: float = 1e-2
    weight_decay: float = 0.01
    epochs: int = 3
    batch_size: int = 4
    lambda_cc: float = 0.5
    seed: int = 0
    adapter: bool = False
    lora_rank: int = 8
    lora_alpha: float = 8.0
    lora_dropout: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    min_df: int = 2

    def __post_init__(self):
        if self.learning_rate <= 0 or self.weight_decay < 0 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError(f"invalid optimizer settings in {self}")
        if not 0.0 <= self.lambda_cc <= 1.0:
            raise ValueError(f"lambda_cc must lie in [0, 1], got {self.lambda_cc}")
        if self.lora_rank < 1 or not 0.0 <= self.lora_dropout < 1.0:
            raise ValueError("lora_rank must be >= 1 and lora_dropout in [0, 1)")

    @classmethod
    def llm_preset(cls, **overrides) -> TrainConfig:
        """Large-model fine-tuning schedule: lr 2e-5, otherwise the defaults."""
        return cls(**{"learning_rate": 2e-5, **overrides})

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class LinearHead:
    weight: np.ndarray  # (C, V)
    bias: np.ndarray  # (C,)
    mode: Mode

    @property
    def n_outputs(self) -> int:
        return self.weight.shape[0]


@dataclass
class LoraAdapter:
    A: np.ndarray  # (r, V)
    B: np.ndarray  # (C, r)
    rank: int
    alpha: float

    @property
    def scale(self) -> float:
        return self.alpha / self.rank

    @classmethod
    def init(cls, n_outputs: int, n_features: int, rank: int, alpha: float,
             rng: np.random.Generator) -> LoraAdapter:
        bound = 1.0 / np.sqrt(max(n_features, 1))
        A = rng.uniform(-bound, bound, size=(rank, n_features))
        return cls(np.ascontiguousarray(A), np.zeros((n_outputs, rank)), rank, alpha)

    def delta(self) -> np.ndarray:
        return self.scale * (self.B @ self.A)


@dataclass
class ModelArtifact:
    vocabulary: Vocabulary
    head: LinearHead
    adapter: LoraAdapter | None
    mode: Mode
    catalog_fingerprint: str
    config: TrainConfig
    classes: list[int] = field(default_factory=list)  # codes (single) or base ids (two-label)
    history: list[float] = field(default_factory=list)

    @property
    def n_bases(self) -> int:
        return self.head.n_outputs - N_CC if self.mode is Mode.TWO_LABEL else 0


# ---------------------------------------------------------------------------
# forward and losses

def forward(x: FeatureMatrix, head: LinearHead, adapter: LoraAdapter | None = None) -> np.ndarray:
    """Logits, one row per feature row."""
    if x.n_features != head.weight.shape[1]:
        raise ValueError(f"feature dimension {x.n_features} != head input dimension {head.weight.shape[1]}")
    logits = kernels.sparse_matmul(x.indptr, x.indices, x.data, head.weight) + head.bias
    if adapter is not None:
        ax = kernels.sparse_matmul(x.indptr, x.indices, x.data, adapter.A)
        logits = logits + adapter.scale * (ax @ adapter.B.T)
    return logits


def log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - np.max(logits, axis=-1, keepdims=True)
    return z - np.log(np.sum(np.exp(z), axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    return np.exp(log_softmax(logits))


def single_label_loss(logits: np.ndarray, y: int) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    if not 0 <= y < logits.shape[-1]:
        raise ValueError(f"target {y} outside [0, {logits.shape[-1]})")
    lsm = log_softmax(logits)
    grad = np.exp(lsm)
    grad[y] -= 1.0
    return float(-lsm[y]), grad


def two_label_loss(logits: np.ndarray, y_base: int, y_cc: int, lambda_cc: float = 0.5,
                   ) -> tuple[float, np.ndarray]:
    logits = np.asarray(logits, dtype=np.float64)
    n_base = logits.shape[-1] - N_CC
    if not 0 <= y_base < n_base or not 0 <= y_cc < N_CC:
        raise ValueError(f"targets ({y_base}, {y_cc}) outside ({n_base}, {N_CC})")
    base_loss, base_grad = single_label_loss(logits[:n_base], y_base)
    cc_loss, cc_grad = single_label_loss(logits[n_base:], y_cc)
    return base_loss + lambda_cc * cc_loss, np.concatenate([base_grad, lambda_cc * cc_grad])


def _batch_xent(logits: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    lsm = log_softmax(logits)
    rows = np.arange(len(y))
    grad = np.exp(lsm)
    grad[rows, y] -= 1.0
    return -lsm[rows, y], grad


def batch_loss(logits: np.ndarray, targets: np.ndarray, mode: Mode, lambda_cc: float
               ) -> tuple[float, np.ndarray]:
    """Mean loss over the batch and its gradient w.r.t. the logits."""
    n = len(logits)
    if mode is Mode.SINGLE:
        losses, grad = _batch_xent(logits, targets)
    else:
        n_base = logits.shape[1] - N_CC
        lb, gb = _batch_xent(logits[:, :n_base], targets[:, 0])
        lc, gc = _batch_xent(logits[:, n_base:], targets[:, 1])
        losses = lb + lambda_cc * lc
        grad = np.concatenate([gb, lambda_cc * gc], axis=1)
    return float(losses.mean()), grad / n


# ---------------------------------------------------------------------------
# optimizer

@dataclass
class AdamState:
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def optimizer_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray], state: AdamState,
                   config: TrainConfig, no_decay: frozenset[str] = frozenset()) -> AdamState:
    """One Adam update with decoupled weight decay, in place on ``params``."""
    bad = [name for name, g in grads.items() if not np.all(np.isfinite(g))]
    if bad:
        details = ", ".join(f"{n}: {int(np.sum(~np.isfinite(grads[n])))} non-finite" for n in bad)
        raise NonFiniteGradientError(f"step {state.step + 1}: {details}")
    state.step += 1
    t = state.step
    b1, b2, lr = config.beta1, config.beta2, config.learning_rate
    c1 = 1.0 - b1 ** t
    c2 = 1.0 - b2 ** t
    for name, p in params.items():
        g = grads[name]
        if p.shape != g.shape:
            raise ValueError(f"{name}: parameter shape {p.shape} != gradient shape {g.shape}")
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        if config.weight_decay and name not in no_decay:
            p *= 1.0 - lr * config.weight_decay
        p -= lr * (m / c1) / (np.sqrt(v / c2) + config.eps)
    return state


# ---------------------------------------------------------------------------
# training

def targets_for(codes: Sequence[int], catalog: DrgCatalog, mode: Mode) -> np.ndarray:
    if mode is Mode.SINGLE:
        position = {c: i for i, c in enumerate(catalog.codes)}
        return np.array([position[c] for c in codes], dtype=np.int64)
    pairs = [catalog.two_label_target(c) for c in codes]
    return np.array([(b, int(l)) for b, l in pairs], dtype=np.int64).reshape(-1, 2)


def init_artifact(vocab: Vocabulary, catalog: DrgCatalog, mode: Mode, config: TrainConfig,
                  base: ModelArtifact | None = None) -> ModelArtifact:
    if mode is Mode.SINGLE:
        classes = list(catalog.codes)
        n_out = len(classes)
    else:
        classes = [b.base_id for b in catalog.bases]
        n_out = len(classes) + N_CC
    if base is not None:
        if base.mode is not mode:
            raise ModeMismatchError(f"base artifact is {base.mode.value}, requested {mode.value}")
        head = LinearHead(base.head.weight.copy(), base.head.bias.copy(), mode)
    else:
        head = LinearHead(np.zeros((n_out, vocab.size)), np.zeros(n_out), mode)
    adapter = None
    if config.adapter:
        rng = np.random.default_rng([config.seed, 1])
        adapter = LoraAdapter.init(n_out, vocab.size, config.lora_rank, config.lora_alpha, rng)
    return ModelArtifact(vocab, head, adapter, mode, catalog.fingerprint(), replace(config), classes)


def train(cohort: CohortSplit, catalog: DrgCatalog, config: TrainConfig, mode: Mode = Mode.SINGLE,
          base: ModelArtifact | None = None) -> ModelArtifact:
    """Mini-batch Adam over the training split.

    With the adapter enabled the head is frozen and only the adapter matrices
    move; ``base`` supplies the frozen head (and its vocabulary) to adapt.
    """
    if not cohort.train:
        raise ValueError("training split is empty")
    texts = [r.course_text for r in cohort.train]
    vocab = base.vocabulary if base is not None else build_vocab(texts, config.min_df)
    art = init_artifact(vocab, catalog, mode, config, base)
    X = featurize(vocab, texts)
    y = targets_for([r.drg_code for r in cohort.train], catalog, mode)

    head, adapter = art.head, art.adapter
    if adapter is None:
        params = {"W": head.weight, "b": head.bias}
    else:
        params = {"A": adapter.A, "B": adapter.B}
    state = AdamState()
    rng = np.random.default_rng([config.seed, 0])
    n = len(texts)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = X.rows(idx)
            if adapter is None:
                logits = forward(xb, head)
                loss, g = batch_loss(logits, y[idx], mode, config.lambda_cc)
                dW = np.zeros_like(head.weight)
                kernels.sparse_grad_accumulate(xb.indptr, xb.indices, xb.data, np.ascontiguousarray(g), dW)
                grads = {"W": dW, "b": g.sum(axis=0)}
            else:
                xd = _dropout(xb, config.lora_dropout, rng)
                base_logits = forward(xb, head)
                ax = kernels.sparse_matmul(xd.indptr, xd.indices, xd.data, adapter.A)
                logits = base_logits + adapter.scale * (ax @ adapter.B.T)
                loss, g = batch_loss(logits, y[idx], mode, config.lambda_cc)
                d_ax = np.ascontiguousarray(adapter.scale * (g @ adapter.B))
                dA = np.zeros_like(adapter.A)
                kernels.sparse_grad_accumulate(xd.indptr, xd.indices, xd.data, d_ax, dA)
                grads = {"A": dA, "B": adapter.scale * (g.T @ ax)}
            optimizer_step(params, grads, state, config, no_decay=frozenset({"b"}))
            total += loss * len(idx)
        art.history.append(total / n)
        log.info("epoch %d/%d mean loss %.6f", epoch + 1, config.epochs, total / n)
    return art


def _dropout(x: FeatureMatrix, p: float, rng: np.random.Generator) -> FeatureMatrix:
    if p <= 0:
        return x
    keep = rng.random(len(x.data)) >= p
    return x.with_data(np.where(keep, x.data / (1.0 - p), 0.0))


# ---------------------------------------------------------------------------
# inference

def artifact_logits(artifact: ModelArtifact, texts: Sequence[str]) -> np.ndarray:
    return forward(featurize(artifact.vocabulary, texts), artifact.head, artifact.adapter)


def rank_desc(scores: np.ndarray) -> np.ndarray:
    """Indices by descending score; equal scores keep ascending index order."""
    return np.argsort(-np.asarray(scores), axis=-1, kind="stable")


def _require(artifact: ModelArtifact, mode: Mode) -> None:
    if artifact.mode is not mode:
        raise ModeMismatchError(f"artifact was trained in {artifact.mode.value} mode, not {mode.value}")


def predict_single(artifact: ModelArtifact, text: str) -> list[tuple[int, float]]:
    _require(artifact, Mode.SINGLE)
    logits = artifact_logits(artifact, [text])[0]
    probs = softmax(logits)
    return [(artifact.classes[i], float(probs[i])) for i in rank_desc(logits)]


@dataclass
class TwoLabelPrediction:
    base_ranking: list[tuple[int, float]]
    cc_ranking: list[tuple[CcMccLabel, float]]  # unrestricted
    cc: CcMccLabel  # restricted to the predicted base's valid set
    composed_code: int
    composed_prob: float


def decode_two_label(logits: np.ndarray, catalog: DrgCatalog) -> TwoLabelPrediction:
    n_base = len(logits) - N_CC
    base_logits, cc_logits = logits[:n_base], logits[n_base:]
    base_probs, cc_probs = softmax(base_logits), softmax(cc_logits)
    base_order = rank_desc(base_logits)
    top_base = int(base_order[0])
    valid = label_valid_set(catalog.base(top_base))
    masked = np.where([CcMccLabel(i) in valid for i in range(N_CC)], cc_logits, -np.inf)
    cc = CcMccLabel(int(rank_desc(masked)[0]))
    restricted = softmax(masked)
    return TwoLabelPrediction(
        base_ranking=[(int(i), float(base_probs[i])) for i in base_order],
        cc_ranking=[(CcMccLabel(int(i)), float(cc_probs[i])) for i in rank_desc(cc_logits)],
        cc=cc,
        composed_code=compose(top_base, cc, catalog).code,
        composed_prob=float(base_probs[top_base] * restricted[int(cc)]),
    )


def predict_two_label(artifact: ModelArtifact, text: str, catalog: DrgCatalog) -> TwoLabelPrediction:
    _require(artifact, Mode.TWO_LABEL)
    return decode_two_label(artifact_logits(artifact, [text])[0], catalog)


# ---------------------------------------------------------------------------
# serialization

def _enc(a: np.ndarray) -> dict:
    a = np.ascontiguousarray(a, dtype="<f8")
    return {"shape": list(a.shape), "data": base64.b64encode(a.tobytes()).decode("ascii")}


def _dec(d: dict) -> np.ndarray:
    raw = base64.b64decode(d["data"])
    return np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(d["shape"])


def artifact_to_dict(art: ModelArtifact) -> dict:
    return {
        "format_version": ARTIFACT_VERSION,
        "mode": art.mode.value,
        "catalog_fingerprint": art.catalog_fingerprint,
        "config": art.config.to_dict(),
        "classes": list(art.classes),
        "vocabulary": {"tokens": art.vocabulary.tokens, "idf": _enc(art.vocabulary.idf)},
        "head": {"weight": _enc(art.head.weight), "bias": _enc(art.head.bias)},
        "adapter": None if art.adapter is None else {
            "A": _enc(art.adapter.A), "B": _enc(art.adapter.B),
            "rank": art.adapter.rank, "alpha": art.adapter.alpha,
        },
        "history": list(art.history),
    }


def artifact_from_dict(d: dict) -> ModelArtifact:
    if d.get("format_version") != ARTIFACT_VERSION:
        raise ValueError(f"unsupported artifact format version {d.get('format_version')!r}")
    mode = Mode(d["mode"])
    ad = d["adapter"]
    adapter = None if ad is None else LoraAdapter(_dec(ad["A"]), _dec(ad["B"]), int(ad["rank"]), float(ad["alpha"]))
    return ModelArtifact(
        vocabulary=Vocabulary(list(d["vocabulary"]["tokens"]), _dec(d["vocabulary"]["idf"])),
        head=LinearHead(_dec(d["head"]["weight"]), _dec(d["head"]["bias"]), mode),
        adapter=adapter,
        mode=mode,
        catalog_fingerprint=d["catalog_fingerprint"],
        config=TrainConfig(**d["config"]),
        classes=[int(c) for c in d["classes"]],
        history=[float(h) for h in d.get("history", [])],
    )


def save_artifact(art: ModelArtifact, path: str | Path) -> None:
    Path(path).write_text(json.dumps(artifact_to_dict(art), sort_keys=True), encoding="utf-8")


def load_artifact(path: str | Path) -> ModelArtifact:
    return artifact_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
