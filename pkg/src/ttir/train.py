"""Mini-batch training with winning-team loss masking, Adam, early stopping
on held-out Recall@6, and binary checkpoints.

Batches are matches, not slots: attention couples the slots of one match, so a
batch of B matches is a single forward pass over B stacked slot sequences.
"""
from __future__ import annotations

import hashlib
import json
import struct
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import tensor as T
from .data import Match, Vocab, multi_hot_labels
from .metrics import evaluate_model, model_recommender
from .model import TEAM_SIZE, TTIRConfig, TTIRModel, forward_ids, match_ids

CHECKPOINT_MAGIC = b"TTIR"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class TrainConfig:
    max_epochs: int
    batch_size: int = 256
    lr: float = 3e-4
    patience: int = 3
    seed: int = 0
    eval_fraction: float = 0.05

    def __post_init__(self):
        if self.max_epochs < 1 or self.batch_size < 1 or self.patience < 1:
            raise ValueError("max_epochs, batch_size, and patience must be positive")
        if self.lr < 0:
            raise ValueError("lr must be nonnegative")
        if not 0.0 < self.eval_fraction < 0.5:
            raise ValueError("eval_fraction must lie in (0, 0.5)")


@dataclass
class TrainReport:
    train_losses: list[float] = field(default_factory=list)
    val_recalls: list[float] = field(default_factory=list)
    epoch_seconds: list[float] = field(default_factory=list)
    best_epoch: int = -1
    best_val_recall: float = float("nan")
    checkpoint_path: str | None = None
    diverged: bool = False


class DivergenceError(RuntimeError):
    """Training hit a non-finite loss; carries the partial report."""

    def __init__(self, message: str, report: TrainReport):
        super().__init__(message)
        report.diverged = True
        self.report = report


def batch_arrays(matches: Sequence[Match], config: TTIRConfig
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Stack index arrays, labels, and the winning-team mask for a batch.

    Shapes: ids (B, S); labels (B, S, n_items); mask (B, S). Under allies_only
    only the winning team's five slots are kept, since those are both the
    encoder input and the supervised rows.
    """
    champs, roles, teams, labels, masks = [], [], [], [], []
    for m in matches:
        c, r, t = match_ids(m, config, team=m.winner)
        lab, mask = multi_hot_labels(m, config.n_items)
        if config.allies_only:
            lo = m.winner.value * TEAM_SIZE
            lab = lab[lo:lo + TEAM_SIZE]
            mask = mask[lo:lo + TEAM_SIZE]
        champs.append(c)
        roles.append(r)
        teams.append(t)
        labels.append(lab)
        masks.append(mask)
    return (np.stack(champs), np.stack(roles), np.stack(teams),
            np.stack(labels), np.stack(masks))


def masked_loss(matches: Sequence[Match], model: TTIRModel, training: bool = False,
                rng: np.random.Generator | None = None) -> T.Tensor:
    """Sigmoid cross-entropy over winning-team cells only.

    Losing slots still shape the winners' context through attention, but their
    labels carry zero gradient.
    """
    champ, role, team, labels, mask = batch_arrays(matches, model.config)
    logits, _ = forward_ids(model, champ, role, team, training=training, rng=rng)
    dtype = logits.data.dtype
    mask3 = np.broadcast_to(mask[..., None], labels.shape)
    return T.bce_with_logits(logits,
                             T.Tensor(labels.astype(dtype)),
                             T.Tensor(np.ascontiguousarray(mask3, dtype=dtype)))


def fit(matches: list[Match], train_config: TrainConfig, model_config: TTIRConfig,
        checkpoint_dir: str | Path | None = None,
        champion_vocab: Vocab | None = None,
        item_vocab: Vocab | None = None) -> tuple[TTIRModel, TrainReport]:
    """Train from scratch; return the parameters with the best held-out
    Recall@6 and the per-epoch report.

    Deterministic for a fixed seed on one thread. A non-finite loss raises
    DivergenceError carrying the partial report.
    """
    if not matches:
        raise ValueError("empty training set")
    cfg = train_config
    model = TTIRModel.build(model_config, seed=cfg.seed)
    param_names = sorted(model.params)
    params = [model.params[n] for n in param_names]
    opt = T.AdamState(lr=cfg.lr)
    rng = np.random.default_rng(cfg.seed)

    n_val = min(max(1, int(round(cfg.eval_fraction * len(matches)))),
                len(matches) - 1) if len(matches) >= 2 else 0
    order = rng.permutation(len(matches))
    val = [matches[i] for i in order[:n_val]]
    train = [matches[i] for i in order[n_val:]]

    report = TrainReport()
    best_params: dict[str, np.ndarray] | None = None
    stale_epochs = 0

    for epoch in range(cfg.max_epochs):
        started = time.perf_counter()
        batch_losses = []
        idx = rng.permutation(len(train))
        for lo in range(0, len(train), cfg.batch_size):
            batch = [train[i] for i in idx[lo:lo + cfg.batch_size]]
            try:
                with T.Tape() as tape:
                    loss = masked_loss(batch, model, training=True, rng=rng)
                tape.backward(loss)
            except FloatingPointError as exc:
                raise DivergenceError(f"epoch {epoch}: {exc}", report) from exc
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergenceError(f"epoch {epoch}: loss={value}", report)
            batch_losses.append(value)
            grads = [p.grad if p.grad is not None else np.zeros_like(p.data)
                     for p in params]
            T.adam_step(params, grads, opt)
            for p in params:
                p.grad = None

        report.train_losses.append(float(np.mean(batch_losses)))
        if val:
            recall = evaluate_model(model_recommender(model), val,
                                    ks=(6,)).mean("recall", 6)
        else:
            # nothing held out; fall back to preferring the lowest train loss
            recall = -report.train_losses[-1]
        report.val_recalls.append(recall)
        report.epoch_seconds.append(time.perf_counter() - started)

        if best_params is None or recall > report.best_val_recall:
            report.best_val_recall = recall
            report.best_epoch = epoch
            best_params = {n: model.params[n].data.copy() for n in param_names}
            stale_epochs = 0
        else:
            stale_epochs += 1
            if stale_epochs >= cfg.patience:
                break

    assert best_params is not None
    for n in param_names:
        model.params[n].data[:] = best_params[n]

    if checkpoint_dir is not None:
        path = Path(checkpoint_dir) / "ttir-best.ckpt"
        path.parent.mkdir(parents=True, exist_ok=True)
        save_checkpoint(model, path, champion_vocab=champion_vocab,
                        item_vocab=item_vocab, seed=cfg.seed)
        report.checkpoint_path = str(path)
    return model, report


# ---------------------------------------------------------------------------
# checkpoints
#
# layout: 4-byte magic, uint32 LE format version, uint64 LE manifest length,
# manifest JSON, then each parameter's raw little-endian bytes back to back in
# manifest order. The manifest records name, shape, dtype, offset, and byte
# count per parameter plus the model config, seed, and vocabulary hashes.


class CheckpointError(ValueError):
    pass


def vocab_sha256(vocab: Vocab) -> str:
    return hashlib.sha256("".join(n + "\n" for n in vocab.names).encode()).hexdigest()


_DTYPE_TAGS = {"float32": "<f4", "float64": "<f8"}


def save_checkpoint(model: TTIRModel, path: str | Path,
                    champion_vocab: Vocab | None = None,
                    item_vocab: Vocab | None = None, seed: int = 0) -> None:
    entries = []
    blobs = []
    offset = 0
    for name in sorted(model.params):
        arr = model.params[name].data
        dtype_name = arr.dtype.name
        if dtype_name not in _DTYPE_TAGS:
            raise CheckpointError(f"{name}: unsupported dtype {dtype_name}")
        raw = np.ascontiguousarray(arr).astype(_DTYPE_TAGS[dtype_name]).tobytes()
        entries.append({"name": name, "shape": list(arr.shape),
                        "dtype": dtype_name, "offset": offset, "nbytes": len(raw)})
        blobs.append(raw)
        offset += len(raw)
    manifest = {
        "format_version": CHECKPOINT_VERSION,
        "config": asdict(model.config),
        "seed": seed,
        "champion_vocab_sha256": vocab_sha256(champion_vocab) if champion_vocab else None,
        "item_vocab_sha256": vocab_sha256(item_vocab) if item_vocab else None,
        "params": entries,
    }
    manifest_bytes = json.dumps(manifest, sort_keys=True).encode()
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<Q", len(manifest_bytes)))
        fh.write(manifest_bytes)
        for raw in blobs:
            fh.write(raw)


def load_checkpoint(path: str | Path, champion_vocab: Vocab | None = None,
                    item_vocab: Vocab | None = None) -> TTIRModel:
    """Rebuild a model from disk, verifying framing, byte counts, and (when
    vocabularies are supplied) their hashes."""
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    if len(data) < 16:
        raise CheckpointError(f"{path}: truncated header")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    (manifest_len,) = struct.unpack_from("<Q", data, 8)
    manifest_end = 16 + manifest_len
    if len(data) < manifest_end:
        raise CheckpointError(f"{path}: truncated manifest")
    try:
        manifest = json.loads(data[16:manifest_end])
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"{path}: corrupt manifest: {exc}") from exc

    for label, vocab in (("champion", champion_vocab), ("item", item_vocab)):
        stored = manifest.get(f"{label}_vocab_sha256")
        if vocab is not None and stored is not None and stored != vocab_sha256(vocab):
            raise CheckpointError(f"{path}: {label} vocabulary hash mismatch")

    config = TTIRConfig(**manifest["config"])
    payload = data[manifest_end:]
    expected = sum(e["nbytes"] for e in manifest["params"])
    if len(payload) != expected:
        raise CheckpointError(f"{path}: payload is {len(payload)} bytes, "
                              f"manifest declares {expected} (corrupt or truncated)")
    params = {}
    for e in manifest["params"]:
        tag = _DTYPE_TAGS.get(e["dtype"])
        if tag is None:
            raise CheckpointError(f"{path}: unsupported dtype {e['dtype']}")
        raw = payload[e["offset"]:e["offset"] + e["nbytes"]]
        arr = np.frombuffer(raw, dtype=tag).reshape(e["shape"]).astype(e["dtype"])
        params[e["name"]] = T.Tensor(arr, requires_grad=True)
    try:
        return TTIRModel(config, params)
    except ValueError as exc:
        raise CheckpointError(f"{path}: {exc}") from exc
