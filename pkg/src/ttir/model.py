"""Team-aware Transformer recommender.

Input rows are sums of champion, team, and role embeddings (no positional
encoding, so the network is permutation-equivariant over slots). A post-norm
Transformer encoder contextualizes the ten slots, a bias-free linear head
scores every item per slot through a sigmoid, and recommendations are the six
most probable items. Attention softmax matrices are captured on every forward
pass for inspection.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import tensor as T
from .data import N_SLOTS, TEAM_SIZE, Match, Role, Team

RECOMMENDATION_SIZE = 6


@dataclass(frozen=True)
class TTIRConfig:
    n_champions: int
    n_items: int
    d_model: int = 512
    n_heads: int = 2
    n_layers: int = 1
    dropout: float = 0.5
    ffn_dim: int | None = None  # defaults to 4 * d_model
    ablate_role: bool = False
    allies_only: bool = False

    def __post_init__(self):
        if min(self.n_champions, self.n_items, self.d_model,
               self.n_heads, self.n_layers) < 1:
            raise ValueError("all dimensions must be at least 1")
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} not divisible by n_heads={self.n_heads}")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must lie in [0, 1)")
        if self.ffn_dim is not None and self.ffn_dim < 1:
            raise ValueError("ffn_dim must be at least 1")

    @property
    def d_head(self) -> int:
        return self.d_model // self.n_heads

    @property
    def hidden_dim(self) -> int:
        return self.ffn_dim if self.ffn_dim is not None else 4 * self.d_model

    @property
    def seq_len(self) -> int:
        return TEAM_SIZE if self.allies_only else N_SLOTS


def parameter_shapes(config: TTIRConfig) -> dict[str, tuple[int, ...]]:
    """Name-to-shape table for every learnable parameter."""
    d, dk, f = config.d_model, config.d_head, config.hidden_dim
    shapes: dict[str, tuple[int, ...]] = {
        "embed.champion": (config.n_champions, d),
        "embed.role": (5, d),
        "embed.team": (2, d),
        "head.w_rec": (config.n_items, d),
    }
    for i in range(config.n_layers):
        for h in range(config.n_heads):
            p = f"layer{i}.attn.head{h}"
            shapes[f"{p}.wq"] = (d, dk)
            shapes[f"{p}.wk"] = (d, dk)
            shapes[f"{p}.wv"] = (d, dk)
            shapes[f"{p}.wo"] = (dk, d)
        shapes[f"layer{i}.norm1.gain"] = (d,)
        shapes[f"layer{i}.norm1.bias"] = (d,)
        shapes[f"layer{i}.ffn.w1"] = (d, f)
        shapes[f"layer{i}.ffn.b1"] = (f,)
        shapes[f"layer{i}.ffn.w2"] = (f, d)
        shapes[f"layer{i}.ffn.b2"] = (d,)
        shapes[f"layer{i}.norm2.gain"] = (d,)
        shapes[f"layer{i}.norm2.bias"] = (d,)
    return shapes


class TTIRModel:
    """Parameter container; all forward logic lives in module-level functions."""

    def __init__(self, config: TTIRConfig, params: dict[str, T.Tensor]):
        expected = parameter_shapes(config)
        if set(params) != set(expected):
            missing = set(expected) - set(params)
            extra = set(params) - set(expected)
            raise ValueError(f"parameter set mismatch: missing={missing}, extra={extra}")
        for name, p in params.items():
            if p.data.shape != expected[name]:
                raise ValueError(f"{name}: shape {p.data.shape}, expected {expected[name]}")
            if not np.isfinite(p.data).all():
                raise ValueError(f"{name}: non-finite values")
        self.config = config
        self.params = params

    @classmethod
    def build(cls, config: TTIRConfig, seed: int = 0,
              dtype: np.dtype = T.DEFAULT_DTYPE) -> "TTIRModel":
        """Uniform(-1/sqrt(d_model), 1/sqrt(d_model)) weights, identity norms,
        zero FFN biases."""
        rng = np.random.default_rng(seed)
        bound = 1.0 / np.sqrt(config.d_model)
        params = {}
        for name, shape in parameter_shapes(config).items():
            if name.endswith((".gain",)):
                data = np.ones(shape)
            elif name.endswith((".bias", ".b1", ".b2")):
                data = np.zeros(shape)
            else:
                data = rng.uniform(-bound, bound, size=shape)
            params[name] = T.Tensor(data.astype(dtype), requires_grad=True)
        return cls(config, params)

    def param(self, name: str) -> T.Tensor:
        return self.params[name]

    @property
    def dtype(self) -> np.dtype:
        return self.params["embed.champion"].data.dtype


@dataclass
class AttentionRecord:
    """Captured softmax matrices: weights[layer][head], each (..., S, S) with
    rows summing to 1."""
    weights: list[list[np.ndarray]] = field(default_factory=list)

    def mean_matrix(self) -> np.ndarray:
        """Average over layers and heads, the aggregate view served to clients."""
        stacked = np.stack([w for layer in self.weights for w in layer])
        return stacked.mean(axis=0)


def _as_index(value, enum_cls) -> int:
    return int(value.value) if isinstance(value, enum_cls) else int(value)


def embed_ids(model: TTIRModel, champ_ids: np.ndarray, role_ids: np.ndarray,
              team_ids: np.ndarray) -> T.Tensor:
    """Sum of champion, team, and (unless ablated) role embeddings.

    Index arrays share a shape, typically (S,) or (batch, S); output appends
    the d_model axis.
    """
    out = T.add(T.embedding_lookup(model.param("embed.champion"), champ_ids),
                T.embedding_lookup(model.param("embed.team"), team_ids))
    if not model.config.ablate_role:
        out = T.add(out, T.embedding_lookup(model.param("embed.role"), role_ids))
    return out


def embed_input(match_slots: Sequence[tuple], model: TTIRModel) -> T.Tensor:
    """Embed a list of (champion, role, team) triples, one row per slot."""
    if len(match_slots) != model.config.seq_len:
        raise ValueError(f"expected {model.config.seq_len} slots, got {len(match_slots)}")
    champ = np.array([int(c) for c, _, _ in match_slots])
    role = np.array([_as_index(r, Role) for _, r, _ in match_slots])
    team = np.array([_as_index(t, Team) for _, _, t in match_slots])
    return embed_ids(model, champ, role, team)


def encode(e_input: T.Tensor, model: TTIRModel, training: bool = False,
           rng: np.random.Generator | None = None) -> tuple[T.Tensor, AttentionRecord]:
    """Post-norm encoder stack.

    Per layer: multi-head self-attention (scaled dot-product, 1/sqrt(d_head)),
    dropout, residual, layer-norm, then a two-layer ReLU FFN, dropout,
    residual, layer-norm. Head outputs are projected per head and summed,
    which is the same map as concatenation followed by a single output
    projection. Attention matrices are captured per layer and head.
    """
    cfg = model.config
    if e_input.data.ndim < 2 or e_input.data.shape[-1] != cfg.d_model:
        raise ValueError(f"expected trailing dimension {cfg.d_model}, "
                         f"got shape {e_input.data.shape}")
    inv_sqrt_dk = 1.0 / np.sqrt(cfg.d_head)
    x = e_input
    record = AttentionRecord()
    for i in range(cfg.n_layers):
        layer_weights = []
        attn_out = None
        for h in range(cfg.n_heads):
            p = f"layer{i}.attn.head{h}"
            q = T.matmul(x, model.param(f"{p}.wq"))
            k = T.matmul(x, model.param(f"{p}.wk"))
            v = T.matmul(x, model.param(f"{p}.wv"))
            scores = T.scale(T.matmul(q, T.transpose(k)), inv_sqrt_dk)
            attn = T.softmax_lastaxis(scores)
            layer_weights.append(attn.data.copy())
            head = T.matmul(T.matmul(attn, v), model.param(f"{p}.wo"))
            attn_out = head if attn_out is None else T.add(attn_out, head)
        record.weights.append(layer_weights)
        attn_out = T.dropout(attn_out, cfg.dropout, training=training, rng=rng)
        x = T.layer_norm(T.add(x, attn_out),
                         model.param(f"layer{i}.norm1.gain"),
                         model.param(f"layer{i}.norm1.bias"))
        hidden = T.relu(T.add(T.matmul(x, model.param(f"layer{i}.ffn.w1")),
                              model.param(f"layer{i}.ffn.b1")))
        ffn_out = T.add(T.matmul(hidden, model.param(f"layer{i}.ffn.w2")),
                        model.param(f"layer{i}.ffn.b2"))
        ffn_out = T.dropout(ffn_out, cfg.dropout, training=training, rng=rng)
        x = T.layer_norm(T.add(x, ffn_out),
                         model.param(f"layer{i}.norm2.gain"),
                         model.param(f"layer{i}.norm2.bias"))
    return x, record


def predict_logits(context: T.Tensor, model: TTIRModel) -> T.Tensor:
    """Bias-free item scores: row i is W_rec applied to context row i."""
    return T.matmul(context, T.transpose(model.param("head.w_rec")))


def predict_probs(context: T.Tensor, model: TTIRModel) -> T.Tensor:
    return T.sigmoid(predict_logits(context, model))


def recommend_top(p_items_row: np.ndarray, k: int = RECOMMENDATION_SIZE) -> list[int]:
    """Indices of the k largest probabilities, descending, ties by ascending
    item index."""
    row = np.asarray(p_items_row)
    if row.ndim != 1:
        raise ValueError("expected a single probability row")
    if k > row.shape[0]:
        raise ValueError(f"k={k} exceeds the {row.shape[0]}-item vocabulary")
    order = np.argsort(-row, kind="stable")
    return [int(i) for i in order[:k]]


def match_ids(match: Match, config: TTIRConfig,
              team: Team | None = None) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Index arrays for a match in canonical slot order.

    Under allies_only only the given team's five slots are included, so the
    enemy side never reaches the encoder.
    """
    participants = match.participants
    if config.allies_only:
        if team is None:
            raise ValueError("allies_only needs the team whose slots to keep")
        participants = tuple(p for p in participants if p.team is team)
    champ = np.array([p.champion for p in participants])
    role = np.array([p.role.value for p in participants])
    team_arr = np.array([p.team.value for p in participants])
    return champ, role, team_arr


def forward_ids(model: TTIRModel, champ_ids: np.ndarray, role_ids: np.ndarray,
                team_ids: np.ndarray, training: bool = False,
                rng: np.random.Generator | None = None
                ) -> tuple[T.Tensor, AttentionRecord]:
    """Embed, encode, and score; the batched core shared by training and
    serving. Returns logits, not probabilities."""
    e = embed_ids(model, champ_ids, role_ids, team_ids)
    context, record = encode(e, model, training=training, rng=rng)
    return predict_logits(context, model), record


@dataclass
class ForwardResult:
    recommendations: list[list[int]]  # five top-6 lists, requesting team order
    probs: np.ndarray                 # (S, n_items)
    attention: AttentionRecord
    slot_indices: list[int]           # rows of probs the recommendations used


def forward_full(match: Match, model: TTIRModel, requesting_team: Team,
                 training: bool = False,
                 rng: np.random.Generator | None = None) -> ForwardResult:
    """Recommend six items for each of the requesting team's five slots."""
    cfg = model.config
    champ, role, team_arr = match_ids(match, cfg, team=requesting_team)
    logits, record = forward_ids(model, champ, role, team_arr,
                                 training=training, rng=rng)
    probs = T.sigmoid(logits).data
    if cfg.allies_only:
        rows = list(range(TEAM_SIZE))
    else:
        offset = requesting_team.value * TEAM_SIZE
        rows = list(range(offset, offset + TEAM_SIZE))
    recs = [recommend_top(probs[r]) for r in rows]
    return ForwardResult(recommendations=recs, probs=probs,
                         attention=record, slot_indices=rows)
