"""The trainable comparator: a shared 512->128 linear projection, an
absolute-difference vector, and a 3-layer MLP ending in a sigmoid.

Everything is plain numpy in double precision with hand-written
gradients, so training is bit-reproducible under a seed and the analytic
gradients can be checked against central finite differences. The shared
projection receives gradient contributions from every branch that used
it (both pair sides, and all three triplet legs).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence, Union
from urllib.parse import urlsplit

import numpy as np

from ._text import token_set
from .corpus import CorpusSplit
from .embedding import EMBED_DIM, EmbeddingCache, EmbeddingProvider
from .features import source_features, target_features, weight_of

CHECKPOINT_FORMAT = "semlink-model-v1"
PROJ_DIM = 128
HIDDEN_DIM = 128
BCE_EPS = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

PARAM_NAMES = (
    "proj_w", "proj_b", "h1_w", "h1_b", "h2_w", "h2_b", "out_w", "out_b",
)


class DimensionMismatch(Exception):
    pass


class VersionMismatch(Exception):
    pass


class ShapeMismatch(Exception):
    pass


class IoFailure(Exception):
    pass


class EmptyTrainSet(Exception):
    pass


class ProviderFailure(Exception):
    pass


@dataclass
class SiameseModel:
    """Parameters of the comparator. The projection is one matrix used
    for both inputs; weight sharing is structural."""

    proj_w: np.ndarray  # (dim_in, dim_proj)
    proj_b: np.ndarray  # (dim_proj,)
    h1_w: np.ndarray    # (dim_proj, dim_hidden)
    h1_b: np.ndarray
    h2_w: np.ndarray    # (dim_hidden, dim_hidden)
    h2_b: np.ndarray
    out_w: np.ndarray   # (dim_hidden,)
    out_b: float
    dropout_rate: float = 0.2
    fingerprint: dict[str, Any] = field(default_factory=dict)

    @property
    def dim_in(self) -> int:
        return self.proj_w.shape[0]

    @property
    def dim_proj(self) -> int:
        return self.proj_w.shape[1]

    @property
    def dim_hidden(self) -> int:
        return self.h1_w.shape[1]

    def params(self) -> dict[str, np.ndarray]:
        """Live (mutable) parameter arrays; out_b is wrapped lazily by
        the optimizer via _as_param_dict."""
        return {
            "proj_w": self.proj_w, "proj_b": self.proj_b,
            "h1_w": self.h1_w, "h1_b": self.h1_b,
            "h2_w": self.h2_w, "h2_b": self.h2_b,
            "out_w": self.out_w, "out_b": np.asarray(self.out_b),
        }


@dataclass(frozen=True)
class TrainingTriplet:
    """Embedded (anchor, positive page, negative page) texts."""

    anchor: np.ndarray
    positive: np.ndarray
    negative: np.ndarray


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 200
    learning_rate: float = 1e-3
    lr_decay_factor: float = 0.8
    lr_decay_every: int = 50
    lambda_triplet: float = 0.0
    lambda_bce: float = 1.0
    triplet_margin: float = 1.0
    batch_size: int = 64
    seed: int = 13
    dropout_rate: float = 0.2

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.lambda_triplet < 0 or self.lambda_bce < 0:
            raise ValueError("loss weights must be non-negative")
        if self.lambda_triplet == 0 and self.lambda_bce == 0:
            raise ValueError("at least one loss weight must be non-zero")
        if self.triplet_margin <= 0:
            raise ValueError("triplet_margin must be positive")
        if not 0 <= self.dropout_rate < 1:
            raise ValueError("dropout_rate must be in [0, 1)")

    def effective_lr(self, epoch: int) -> float:
        """Learning rate in force during 1-based ``epoch``."""
        steps = (epoch - 1) // self.lr_decay_every
        return self.learning_rate * self.lr_decay_factor**steps


def init_model(
    rng: np.random.Generator,
    dim_in: int = EMBED_DIM,
    dim_proj: int = PROJ_DIM,
    dim_hidden: int = HIDDEN_DIM,
    dropout_rate: float = 0.2,
) -> SiameseModel:
    def layer(fan_in: int, fan_out: int) -> np.ndarray:
        return rng.normal(0.0, 1.0 / math.sqrt(fan_in), size=(fan_in, fan_out))

    def bias(size: int) -> np.ndarray:
        # Small random biases: exact-zero pre-activations would park
        # dead units directly on the ReLU kink, where the subgradient
        # convention and finite differences legitimately disagree.
        return rng.normal(0.0, 0.05, size=size)

    return SiameseModel(
        proj_w=layer(dim_in, dim_proj),
        proj_b=bias(dim_proj),
        h1_w=layer(dim_proj, dim_hidden),
        h1_b=bias(dim_hidden),
        h2_w=layer(dim_hidden, dim_hidden),
        h2_b=bias(dim_hidden),
        out_w=layer(dim_hidden, 1)[:, 0],
        out_b=float(rng.normal(0.0, 0.05)),
        dropout_rate=dropout_rate,
    )


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def project(model: SiameseModel, x: np.ndarray) -> np.ndarray:
    """Shared linear projection into the comparison space."""
    return np.asarray(x, dtype=np.float64) @ model.proj_w + model.proj_b


def _draw_masks(
    rng: np.random.Generator, shape: tuple[int, ...], rate: float
) -> np.ndarray:
    if rate == 0.0:
        return np.ones(shape)
    return (rng.random(shape) >= rate) / (1.0 - rate)


def _mlp_forward(model, d: np.ndarray, m1, m2) -> tuple[np.ndarray, dict]:
    z1 = d @ model.h1_w + model.h1_b
    z1d = z1 * m1
    a1 = np.maximum(z1d, 0.0)
    z2 = a1 @ model.h2_w + model.h2_b
    z2d = z2 * m2
    a2 = np.maximum(z2d, 0.0)
    z3 = a2 @ model.out_w + model.out_b
    yhat = _sigmoid(z3)
    cache = {"d": d, "z1d": z1d, "a1": a1, "z2d": z2d, "a2": a2,
             "m1": m1, "m2": m2, "yhat": yhat}
    return yhat, cache


def forward(
    model: SiameseModel,
    e_h: np.ndarray,
    e_p: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, dict]:
    """Score one (source text, target text) embedding pair. Returns the
    sigmoid score and the cached activations. Dropout only fires in
    train_mode, drawn from ``rng``."""
    e_h = np.asarray(e_h, dtype=np.float64)
    e_p = np.asarray(e_p, dtype=np.float64)
    if e_h.shape != (model.dim_in,) or e_p.shape != (model.dim_in,):
        raise DimensionMismatch(
            f"expected ({model.dim_in},) inputs, got {e_h.shape} and {e_p.shape}"
        )
    if train_mode and rng is None:
        raise ValueError("train_mode forward needs an rng for dropout")
    v_h = project(model, e_h)
    v_p = project(model, e_p)
    diff = v_h - v_p
    d = np.abs(diff)
    if train_mode:
        m1 = _draw_masks(rng, (model.dim_hidden,), model.dropout_rate)
        m2 = _draw_masks(rng, (model.dim_hidden,), model.dropout_rate)
    else:
        m1 = np.ones(model.dim_hidden)
        m2 = np.ones(model.dim_hidden)
    yhat, cache = _mlp_forward(model, d, m1, m2)
    cache.update({"e_h": e_h, "e_p": e_p, "v_h": v_h, "v_p": v_p, "sign": np.sign(diff)})
    return float(yhat), cache


def score_matrix(
    model: SiameseModel, sources: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    """Eval-mode scores for every (source, target) combination; shape
    (len(sources), len(targets)). One vectorized pass."""
    s = np.atleast_2d(np.asarray(sources, dtype=np.float64))
    t = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    vs = project(model, s)
    vt = project(model, t)
    d = np.abs(vs[:, None, :] - vt[None, :, :]).reshape(-1, model.dim_proj)
    ones = np.ones(model.dim_hidden)
    yhat, _ = _mlp_forward(model, d, ones, ones)
    return yhat.reshape(len(s), len(t))


def score_rows(
    model: SiameseModel, sources: np.ndarray, targets: np.ndarray
) -> np.ndarray:
    """Eval-mode scores for row-aligned (source, target) pairs."""
    vs = project(model, np.asarray(sources, dtype=np.float64))
    vt = project(model, np.asarray(targets, dtype=np.float64))
    ones = np.ones(model.dim_hidden)
    yhat, _ = _mlp_forward(model, np.abs(vs - vt), ones, ones)
    return yhat


def bce_loss(y: float, yhat: float) -> float:
    """Binary cross-entropy with the prediction clamped away from the
    undefined endpoints."""
    clamped = min(max(float(yhat), BCE_EPS), 1.0 - BCE_EPS)
    return -(y * math.log(clamped) + (1.0 - y) * math.log(1.0 - clamped))


def triplet_loss(
    model: SiameseModel, triplet: TrainingTriplet, margin: float = 1.0
) -> float:
    """Hinge on squared projected distances: positive must sit closer to
    the anchor than the negative by at least ``margin``."""
    if margin <= 0:
        raise ValueError("margin must be positive")
    v_a = project(model, triplet.anchor)
    v_p = project(model, triplet.positive)
    v_n = project(model, triplet.negative)
    gap = float(np.sum((v_a - v_p) ** 2) - np.sum((v_a - v_n) ** 2)) + margin
    return max(0.0, gap)


def total_loss(
    model: SiameseModel, triplet: TrainingTriplet, config: TrainConfig
) -> float:
    """Hybrid objective for one triplet: weighted triplet hinge plus the
    two BCE terms (target 1 for the positive pair, 0 for the negative)."""
    value = 0.0
    if config.lambda_triplet:
        value += config.lambda_triplet * triplet_loss(
            model, triplet, config.triplet_margin
        )
    if config.lambda_bce:
        yhat_p, _ = forward(model, triplet.anchor, triplet.positive)
        yhat_n, _ = forward(model, triplet.anchor, triplet.negative)
        value += config.lambda_bce * (bce_loss(1.0, yhat_p) + bce_loss(0.0, yhat_n))
    return value


def zero_grads(model: SiameseModel) -> dict[str, np.ndarray]:
    return {name: np.zeros_like(arr) for name, arr in model.params().items()}


def _bce_dz3(yhat: np.ndarray, y: float) -> np.ndarray:
    """d(bce)/d(pre-sigmoid); zero where the clamp flattened the loss."""
    inside = (yhat > BCE_EPS) & (yhat < 1.0 - BCE_EPS)
    return np.where(inside, yhat - y, 0.0)


def _mlp_backward(model, cache: dict, dz3: np.ndarray, grads: dict) -> np.ndarray:
    a2, a1, d = cache["a2"], cache["a1"], cache["d"]
    grads["out_w"] += a2.T @ dz3
    grads["out_b"] += np.asarray(dz3.sum())
    da2 = np.outer(dz3, model.out_w)
    dz2 = da2 * (cache["z2d"] > 0) * cache["m2"]
    grads["h2_w"] += a1.T @ dz2
    grads["h2_b"] += dz2.sum(axis=0)
    da1 = dz2 @ model.h2_w.T
    dz1 = da1 * (cache["z1d"] > 0) * cache["m1"]
    grads["h1_w"] += d.T @ dz1
    grads["h1_b"] += dz1.sum(axis=0)
    return dz1 @ model.h1_w.T


def batch_loss_and_grads(
    model: SiameseModel,
    anchors: np.ndarray,
    positives: np.ndarray,
    negatives: np.ndarray,
    config: TrainConfig,
    masks: Optional[dict[str, np.ndarray]] = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean hybrid loss over a triplet batch and its analytic gradients.

    ``masks`` carries pre-drawn inverted-dropout masks under keys
    m1_pos/m2_pos/m1_neg/m2_neg (each (B, hidden)); omit for eval-mode
    gradients. The shared projection accumulates contributions from both
    pair branches and all triplet legs, and |.| backpropagates
    sign(v_h - v_p) with subgradient 0 at exact zeros.
    """
    ea = np.asarray(anchors, dtype=np.float64)
    ep = np.asarray(positives, dtype=np.float64)
    en = np.asarray(negatives, dtype=np.float64)
    batch = ea.shape[0]
    grads = zero_grads(model)
    loss = 0.0

    va, vp, vn = project(model, ea), project(model, ep), project(model, en)
    dva = np.zeros_like(va)
    dvp = np.zeros_like(vp)
    dvn = np.zeros_like(vn)

    if config.lambda_triplet:
        diff_p = va - vp
        diff_n = va - vn
        gap = (diff_p**2).sum(axis=1) - (diff_n**2).sum(axis=1) + config.triplet_margin
        active = gap > 0
        loss += config.lambda_triplet * float(np.maximum(gap, 0.0).mean())
        scale = config.lambda_triplet / batch
        sel = active[:, None]
        dva += scale * 2.0 * np.where(sel, diff_p - diff_n, 0.0)
        dvp += scale * -2.0 * np.where(sel, diff_p, 0.0)
        dvn += scale * 2.0 * np.where(sel, diff_n, 0.0)

    if config.lambda_bce:
        ones = np.ones((batch, model.dim_hidden))
        for branch, v_other, dv_other, y in (
            ("pos", vp, dvp, 1.0),
            ("neg", vn, dvn, 0.0),
        ):
            m1 = masks[f"m1_{branch}"] if masks else ones
            m2 = masks[f"m2_{branch}"] if masks else ones
            diff = va - v_other
            sign = np.sign(diff)
            yhat, cache = _mlp_forward(model, np.abs(diff), m1, m2)
            clamped = np.clip(yhat, BCE_EPS, 1.0 - BCE_EPS)
            loss += config.lambda_bce * float(
                -(y * np.log(clamped) + (1.0 - y) * np.log(1.0 - clamped)).mean()
            )
            dz3 = config.lambda_bce / batch * _bce_dz3(yhat, y)
            dd = _mlp_backward(model, cache, dz3, grads)
            dva += dd * sign
            dv_other -= dd * sign

    grads["proj_w"] += ea.T @ dva + ep.T @ dvp + en.T @ dvn
    grads["proj_b"] += dva.sum(axis=0) + dvp.sum(axis=0) + dvn.sum(axis=0)
    return loss, grads


def backward(
    model: SiameseModel,
    batch: Sequence[TrainingTriplet],
    config: TrainConfig,
    masks: Optional[dict[str, np.ndarray]] = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Gradients of the mean total loss over a list of triplets."""
    ea = np.stack([t.anchor for t in batch])
    ep = np.stack([t.positive for t in batch])
    en = np.stack([t.negative for t in batch])
    return batch_loss_and_grads(model, ea, ep, en, config, masks=masks)


@dataclass
class AdamState:
    m: dict[str, np.ndarray]
    v: dict[str, np.ndarray]
    step: int = 0

    @classmethod
    def for_model(cls, model: SiameseModel) -> "AdamState":
        return cls(
            m={k: np.zeros_like(p) for k, p in model.params().items()},
            v={k: np.zeros_like(p) for k, p in model.params().items()},
        )


def adam_step(
    model: SiameseModel,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
) -> None:
    """One bias-corrected Adam update, in place."""
    state.step += 1
    t = state.step
    for name in PARAM_NAMES:
        g = grads[name]
        state.m[name] = ADAM_BETA1 * state.m[name] + (1 - ADAM_BETA1) * g
        state.v[name] = ADAM_BETA2 * state.v[name] + (1 - ADAM_BETA2) * g * g
        m_hat = state.m[name] / (1 - ADAM_BETA1**t)
        v_hat = state.v[name] / (1 - ADAM_BETA2**t)
        update = lr * m_hat / (np.sqrt(v_hat) + ADAM_EPS)
        if name == "out_b":
            model.out_b = float(model.out_b - update)
        else:
            getattr(model, name)[...] -= update


# --- training ----------------------------------------------------------------


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    mean_loss: float
    val_f1: Optional[float]
    lr: float


def _domain(url: str) -> str:
    return urlsplit(url).netloc.lower()


def _draw_negative(
    rng: np.random.Generator,
    index: int,
    domains: list[str],
    anchor_tokens: frozenset[str],
    title_tokens: list[frozenset[str]],
    by_other_domain: dict[str, list[int]],
    all_indices: list[int],
) -> int:
    pool = by_other_domain.get(domains[index])
    if not pool:
        pool = [j for j in all_indices if j != index]
    if not pool:
        return index
    choice = index
    for _attempt in range(10):
        choice = pool[int(rng.integers(0, len(pool)))]
        if not (anchor_tokens & title_tokens[choice]):
            return choice
    return choice


def _binary_f1(y_true: np.ndarray, y_pred: np.ndarray) -> Optional[float]:
    tp = int(np.sum(y_true & y_pred))
    fp = int(np.sum(~y_true & y_pred))
    fn = int(np.sum(y_true & ~y_pred))
    if tp == 0 and (fp > 0 or fn > 0):
        return 0.0
    if tp + fp == 0 or tp + fn == 0:
        return None
    precision = tp / (tp + fp)
    recall = tp / (tp + fn)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


@dataclass(frozen=True)
class _PairFeatures:
    """Embedding-row indices of one pair's feature texts plus the source
    weights used for validation aggregation."""

    src_rows: tuple[int, ...]
    src_weights: np.ndarray
    tgt_rows: tuple[int, ...]


def _index_features(pairs, row_of) -> list[_PairFeatures]:
    indexed = []
    for pair in pairs:
        src = source_features(pair.link)
        tgt = target_features(pair.page)
        indexed.append(
            _PairFeatures(
                src_rows=tuple(row_of[f.text] for f in src),
                src_weights=np.array([weight_of(f) for f in src]),
                tgt_rows=tuple(row_of[f.text] for f in tgt),
            )
        )
    return indexed


def _oracle_score(model, embeddings, feats: _PairFeatures, tgt_rows=None) -> float:
    """Max weighted feature-combination score, mirroring the verdict
    layer's aggregation."""
    src = embeddings[list(feats.src_rows)]
    tgt = embeddings[list(tgt_rows if tgt_rows is not None else feats.tgt_rows)]
    raw = score_matrix(model, src, tgt)
    return float((raw * feats.src_weights[:, None]).max())


def train(
    split: CorpusSplit,
    provider: EmbeddingProvider,
    config: TrainConfig,
    tau: float = 0.7,
    cache: Optional[EmbeddingCache] = None,
) -> tuple[SiameseModel, list[EpochStats]]:
    """Train the comparator on positive pairs, synthesizing one negative
    per positive each epoch by drawing a page from a different source
    domain (re-drawn when its title shares a token with the anchor).

    Each training example pairs one source feature text with one target
    feature text (uniformly sampled per epoch), the same text granularity
    the verdict layer scores. Fully deterministic under config.seed on a
    deterministic provider.
    """
    pairs = [
        p for p in split.train
        if source_features(p.link) and target_features(p.page)
    ]
    if not pairs:
        raise EmptyTrainSet("training split holds no pairs with scoreable text")
    val_pairs = [
        p for p in split.validation
        if source_features(p.link) and target_features(p.page)
    ]
    rng = np.random.default_rng(config.seed)
    cache = cache or EmbeddingCache(
        capacity=max(4096, 16 * (len(pairs) + len(val_pairs)))
    )

    texts: list[str] = []
    row_of: dict[str, int] = {}
    for pair in pairs + val_pairs:
        for feature in source_features(pair.link) + target_features(pair.page):
            if feature.text not in row_of:
                row_of[feature.text] = len(texts)
                texts.append(feature.text)
    try:
        embeddings = np.stack(cache.embed(provider, texts))
    except Exception as exc:
        raise ProviderFailure(f"embedding provider failed: {exc}") from exc

    feats = _index_features(pairs, row_of)
    val_feats = _index_features(val_pairs, row_of)

    domains = [_domain(p.link.source_url) for p in pairs]
    anchor_tokens = [token_set(p.link.anchor_text) for p in pairs]
    title_tokens = [token_set(p.page.title) for p in pairs]
    all_indices = list(range(len(pairs)))
    by_other_domain = {
        dom: [j for j in all_indices if domains[j] != dom]
        for dom in sorted(set(domains))
    }

    val_neg_idx: list[int] = []
    if val_pairs:
        val_domains = [_domain(p.link.source_url) for p in val_pairs]
        val_titles = [token_set(p.page.title) for p in val_pairs]
        val_indices = list(range(len(val_pairs)))
        val_by_other = {
            dom: [j for j in val_indices if val_domains[j] != dom]
            for dom in sorted(set(val_domains))
        }
        val_neg_idx = [
            _draw_negative(
                rng, i, val_domains, token_set(val_pairs[i].link.anchor_text),
                val_titles, val_by_other, val_indices,
            )
            for i in val_indices
        ]

    model = init_model(
        rng, dim_in=embeddings.shape[1], dropout_rate=config.dropout_rate
    )
    state = AdamState.for_model(model)
    history: list[EpochStats] = []

    for epoch in range(1, config.epochs + 1):
        lr = config.effective_lr(epoch)
        order = rng.permutation(len(pairs))
        # One example per source feature: generic anchors need dense
        # conflicting-label coverage to settle below the threshold.
        examples = [(int(i), s) for i in order for s in feats[int(i)].src_rows]
        epoch_loss = 0.0
        batches = 0
        for start in range(0, len(examples), config.batch_size):
            chunk = examples[start : start + config.batch_size]
            anchor_rows = np.empty(len(chunk), dtype=int)
            pos_rows = np.empty(len(chunk), dtype=int)
            neg_rows = np.empty(len(chunk), dtype=int)
            for k, (i, s) in enumerate(chunk):
                f = feats[i]
                t = f.tgt_rows[int(rng.integers(0, len(f.tgt_rows)))]
                j = _draw_negative(
                    rng, i, domains, anchor_tokens[i],
                    title_tokens, by_other_domain, all_indices,
                )
                nf = feats[j]
                n = nf.tgt_rows[int(rng.integers(0, len(nf.tgt_rows)))]
                anchor_rows[k], pos_rows[k], neg_rows[k] = s, t, n
            masks = None
            if config.dropout_rate > 0:
                shape = (len(chunk), model.dim_hidden)
                masks = {
                    "m1_pos": _draw_masks(rng, shape, config.dropout_rate),
                    "m2_pos": _draw_masks(rng, shape, config.dropout_rate),
                    "m1_neg": _draw_masks(rng, shape, config.dropout_rate),
                    "m2_neg": _draw_masks(rng, shape, config.dropout_rate),
                }
            loss, grads = batch_loss_and_grads(
                model,
                embeddings[anchor_rows],
                embeddings[pos_rows],
                embeddings[neg_rows],
                config,
                masks=masks,
            )
            adam_step(model, grads, state, lr)
            epoch_loss += loss
            batches += 1

        val_f1: Optional[float] = None
        if val_pairs:
            pos_scores = np.array(
                [_oracle_score(model, embeddings, f) for f in val_feats]
            )
            neg_scores = np.array(
                [
                    _oracle_score(
                        model, embeddings, val_feats[i],
                        tgt_rows=val_feats[val_neg_idx[i]].tgt_rows,
                    )
                    for i in range(len(val_pairs))
                ]
            )
            y_true = np.concatenate(
                [np.ones(len(val_pairs), bool), np.zeros(len(val_pairs), bool)]
            )
            y_pred = np.concatenate([pos_scores >= tau, neg_scores >= tau])
            val_f1 = _binary_f1(y_true, y_pred)
        history.append(
            EpochStats(epoch=epoch, mean_loss=epoch_loss / max(batches, 1),
                       val_f1=val_f1, lr=lr)
        )

    model.fingerprint = {
        "epochs": config.epochs,
        "learning_rate": config.learning_rate,
        "lr_decay_factor": config.lr_decay_factor,
        "lr_decay_every": config.lr_decay_every,
        "lambda_triplet": config.lambda_triplet,
        "lambda_bce": config.lambda_bce,
        "triplet_margin": config.triplet_margin,
        "batch_size": config.batch_size,
        "seed": config.seed,
        "dropout_rate": config.dropout_rate,
        "provider": provider.descriptor,
        "train_pairs": len(pairs),
        "validation_pairs": len(val_pairs),
    }
    return model, history


# --- checkpoint I/O ----------------------------------------------------------


def save_model(model: SiameseModel, path: Union[str, Path]) -> None:
    document = {
        "format": CHECKPOINT_FORMAT,
        "dim_in": model.dim_in,
        "dim_proj": model.dim_proj,
        "dropout": model.dropout_rate,
        "layers": {
            "projection": {"w": model.proj_w.tolist(), "b": model.proj_b.tolist()},
            "hidden1": {"w": model.h1_w.tolist(), "b": model.h1_b.tolist()},
            "hidden2": {"w": model.h2_w.tolist(), "b": model.h2_b.tolist()},
            "output": {"w": [[v] for v in model.out_w.tolist()], "b": model.out_b},
        },
        "train_fingerprint": model.fingerprint,
    }
    try:
        Path(path).write_text(json.dumps(document), encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write checkpoint to {path}: {exc}") from exc


def _expect_shape(name: str, arr: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if arr.shape != shape:
        raise ShapeMismatch(f"{name} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise ShapeMismatch(f"{name} contains non-finite values")
    return arr


def load_model(path: Union[str, Path]) -> SiameseModel:
    """Load a checkpoint; a malformed or truncated file never yields a
    partially initialized model."""
    try:
        raw = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read checkpoint from {path}: {exc}") from exc
    try:
        document = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise IoFailure(f"checkpoint is not valid JSON: {exc}") from exc
    if not isinstance(document, dict) or document.get("format") != CHECKPOINT_FORMAT:
        raise VersionMismatch(
            f"unsupported checkpoint format {document.get('format')!r}"
            if isinstance(document, dict)
            else "checkpoint must be a JSON object"
        )
    try:
        dim_in = int(document["dim_in"])
        dim_proj = int(document["dim_proj"])
        layers = document["layers"]
        proj_w = np.asarray(layers["projection"]["w"], dtype=np.float64)
        proj_b = np.asarray(layers["projection"]["b"], dtype=np.float64)
        h1_w = np.asarray(layers["hidden1"]["w"], dtype=np.float64)
        h1_b = np.asarray(layers["hidden1"]["b"], dtype=np.float64)
        h2_w = np.asarray(layers["hidden2"]["w"], dtype=np.float64)
        h2_b = np.asarray(layers["hidden2"]["b"], dtype=np.float64)
        out_w = np.asarray(layers["output"]["w"], dtype=np.float64)
        out_b = float(layers["output"]["b"])
        dropout = float(document.get("dropout", 0.0))
        fingerprint = document.get("train_fingerprint", {})
    except (KeyError, TypeError, ValueError) as exc:
        raise IoFailure(f"checkpoint is structurally invalid: {exc}") from exc
    hidden = h1_b.shape[0] if h1_b.ndim == 1 else 0
    _expect_shape("projection.w", proj_w, (dim_in, dim_proj))
    _expect_shape("projection.b", proj_b, (dim_proj,))
    _expect_shape("hidden1.w", h1_w, (dim_proj, hidden))
    _expect_shape("hidden1.b", h1_b, (hidden,))
    _expect_shape("hidden2.w", h2_w, (hidden, hidden))
    _expect_shape("hidden2.b", h2_b, (hidden,))
    _expect_shape("output.w", out_w, (hidden, 1))
    if not 0 <= dropout < 1:
        raise ShapeMismatch(f"dropout must be in [0, 1), got {dropout}")
    return SiameseModel(
        proj_w=proj_w, proj_b=proj_b,
        h1_w=h1_w, h1_b=h1_b, h2_w=h2_w, h2_b=h2_b,
        out_w=out_w[:, 0], out_b=out_b,
        dropout_rate=dropout,
        fingerprint=fingerprint if isinstance(fingerprint, dict) else {},
    )


def models_equal(a: SiameseModel, b: SiameseModel) -> bool:
    return all(
        np.array_equal(a.params()[name], b.params()[name]) for name in PARAM_NAMES
    )
