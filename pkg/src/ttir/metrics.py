"""Ranking metrics over recommended item lists, paired significance tests,
reference baselines, and the ablation grid.

Evaluation covers winning-team slots only: the relevant set for a slot is the
item set that participant finished the match with. Slots whose relevant set is
empty are excluded from metric means and counted, never silently dropped.

MAP@k normalizes average precision by min(k, |relevant|), so a perfect ranking
scores 1.0 at every k. Other normalizations exist and change headline numbers;
this one is assumed throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
import scipy.stats

from . import tensor as T
from .data import Match, Role, Team
from .model import TTIRModel, forward_ids, match_ids, recommend_top

METRIC_NAMES = ("precision", "recall", "f1", "map")
DEFAULT_KS = (1, 6, 10)

# a recommender maps (match, team, k) to five ordered item lists, one per
# slot of the requested team in canonical role order
Recommender = Callable[[Match, Team, int], list[list[int]]]


def precision_at_k(rec: Sequence[int], relevant: set, k: int) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(rec):
        raise ValueError(f"k={k} exceeds the {len(rec)}-entry recommendation list")
    return len(set(rec[:k]) & relevant) / k


def recall_at_k(rec: Sequence[int], relevant: set, k: int) -> float:
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(rec):
        raise ValueError(f"k={k} exceeds the {len(rec)}-entry recommendation list")
    if not relevant:
        return 0.0
    return len(set(rec[:k]) & relevant) / len(relevant)


def f1_at_k(rec: Sequence[int], relevant: set, k: int) -> float:
    p = precision_at_k(rec, relevant, k)
    r = recall_at_k(rec, relevant, k)
    return 0.0 if p + r == 0 else 2 * p * r / (p + r)


def map_at_k(rec: Sequence[int], relevant: set, k: int) -> float:
    """Average precision at k, normalized by min(k, |relevant|)."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if k > len(rec):
        raise ValueError(f"k={k} exceeds the {len(rec)}-entry recommendation list")
    if not relevant:
        return 0.0
    hits = 0
    ap = 0.0
    for i, item in enumerate(rec[:k], start=1):
        if item in relevant:
            hits += 1
            ap += hits / i
    return ap / min(k, len(relevant))


_METRIC_FNS = {"precision": precision_at_k, "recall": recall_at_k,
               "f1": f1_at_k, "map": map_at_k}


@dataclass
class MetricsReport:
    """Per-slot metric vectors plus their means.

    Raw vectors are kept so paired t-tests can run on any metric afterwards.
    Merging concatenates vectors, which makes the merged means independent of
    how the slot stream was partitioned.
    """
    ks: tuple[int, ...] = DEFAULT_KS
    per_slot: dict[str, dict[int, list[float]]] = field(default_factory=dict)
    n_excluded: int = 0

    def __post_init__(self):
        if not self.per_slot:
            self.per_slot = {m: {k: [] for k in self.ks} for m in METRIC_NAMES}

    @property
    def n_slots(self) -> int:
        first = self.per_slot[METRIC_NAMES[0]][self.ks[0]]
        return len(first)

    def add_slot(self, rec: Sequence[int], relevant: set) -> None:
        for m in METRIC_NAMES:
            for k in self.ks:
                self.per_slot[m][k].append(_METRIC_FNS[m](rec, relevant, k))

    def mean(self, metric: str, k: int) -> float:
        values = self.per_slot[metric][k]
        if not values:
            raise ValueError("no slots evaluated")
        return float(np.mean(values))

    def slot_values(self, metric: str, k: int) -> list[float]:
        return self.per_slot[metric][k]

    def merge(self, other: "MetricsReport") -> "MetricsReport":
        if self.ks != other.ks:
            raise ValueError("reports evaluated at different k lists")
        merged = MetricsReport(ks=self.ks, n_excluded=self.n_excluded + other.n_excluded)
        for m in METRIC_NAMES:
            for k in self.ks:
                merged.per_slot[m][k] = self.per_slot[m][k] + other.per_slot[m][k]
        return merged

    def to_dict(self) -> dict:
        return {
            "ks": list(self.ks),
            "n_slots": self.n_slots,
            "n_excluded": self.n_excluded,
            "metrics": {m: {str(k): self.mean(m, k) for k in self.ks}
                        for m in METRIC_NAMES},
        }


def evaluate_model(recommend: Recommender, matches: Sequence[Match],
                   ks: tuple[int, ...] = DEFAULT_KS) -> MetricsReport:
    """Score a recommender on every winning-team slot of the given matches."""
    max_k = max(ks)
    report = MetricsReport(ks=tuple(ks))
    for match in matches:
        ranked = recommend(match, match.winner, max_k)
        winners = [p for p in match.participants if p.team is match.winner]
        if len(ranked) != len(winners):
            raise ValueError("recommender returned the wrong number of slots")
        for rec, participant in zip(ranked, winners):
            if not participant.items:
                report.n_excluded += 1
                continue
            report.add_slot(rec, set(participant.items))
    return report


def model_recommender(model: TTIRModel) -> Recommender:
    """Adapt a network to the recommender interface (dropout off)."""

    def recommend(match: Match, team: Team, k: int) -> list[list[int]]:
        champ, role, team_arr = match_ids(match, model.config, team=team)
        logits, _ = forward_ids(model, champ, role, team_arr, training=False)
        probs = T.sigmoid(logits).data
        if model.config.allies_only:
            rows = range(5)
        else:
            rows = range(team.value * 5, team.value * 5 + 5)
        return [recommend_top(probs[r], k) for r in rows]

    return recommend


# ---------------------------------------------------------------------------
# paired significance test


@dataclass(frozen=True)
class TTestResult:
    t: float
    df: int
    p: float
    degenerate: bool = False  # zero-variance differences with nonzero mean


def paired_t_test(per_slot_a: Sequence[float], per_slot_b: Sequence[float]) -> TTestResult:
    """Two-sided paired t-test on per-slot differences.

    All-zero differences give t=0, p=1. Zero-variance differences with a
    nonzero mean have an infinite statistic and are flagged degenerate rather
    than raising.
    """
    a = np.asarray(per_slot_a, dtype=np.float64)
    b = np.asarray(per_slot_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("need two equal-length 1-D samples")
    n = a.shape[0]
    if n < 2:
        raise ValueError("need at least 2 paired samples")
    d = a - b
    mean = float(d.mean())
    sd = float(d.std(ddof=1))
    df = n - 1
    if sd == 0.0:
        if mean == 0.0:
            return TTestResult(t=0.0, df=df, p=1.0)
        return TTestResult(t=math.copysign(math.inf, mean), df=df, p=0.0,
                           degenerate=True)
    t_stat = mean / (sd / math.sqrt(n))
    p = 2.0 * float(scipy.stats.t.sf(abs(t_stat), df))
    return TTestResult(t=t_stat, df=df, p=p)


# ---------------------------------------------------------------------------
# baselines


def baseline_random(n_items: int, seed: int) -> Recommender:
    """Uniform-random ranking per slot; the calibration floor."""
    rng = np.random.default_rng(seed)

    def recommend(match: Match, team: Team, k: int) -> list[list[int]]:
        return [[int(i) for i in rng.permutation(n_items)[:k]] for _ in range(5)]

    return recommend


def baseline_popularity(train: Sequence[Match], n_items: int) -> Recommender:
    """Per-champion item frequency over winning slots, global counts as the
    fallback for champions never seen winning."""
    per_champ: dict[int, np.ndarray] = {}
    global_counts = np.zeros(n_items, dtype=np.int64)
    for match in train:
        for p in match.participants:
            if p.team is not match.winner:
                continue
            counts = per_champ.setdefault(p.champion, np.zeros(n_items, dtype=np.int64))
            for it in p.items:
                counts[it] += 1
                global_counts[it] += 1

    def ranking(counts: np.ndarray) -> list[int]:
        return [int(i) for i in np.argsort(-counts, kind="stable")]

    global_ranking = ranking(global_counts)
    per_champ_ranking = {c: ranking(v) for c, v in per_champ.items()}

    def recommend(match: Match, team: Team, k: int) -> list[list[int]]:
        out = []
        for p in match.participants:
            if p.team is not team:
                continue
            out.append(per_champ_ranking.get(p.champion, global_ranking)[:k])
        return out

    return recommend


def _slot_features(champion: int, role: Role, n_champ: int) -> np.ndarray:
    x = np.zeros(n_champ + 5, dtype=np.float32)
    x[champion] = 1.0
    x[n_champ + role.value] = 1.0
    return x


def _winning_slot_dataset(train: Sequence[Match], n_champ: int,
                          n_items: int) -> tuple[np.ndarray, np.ndarray]:
    xs, ys = [], []
    for match in train:
        for p in match.participants:
            if p.team is not match.winner:
                continue
            xs.append(_slot_features(p.champion, p.role, n_champ))
            y = np.zeros(n_items, dtype=np.float32)
            for it in p.items:
                y[it] = 1.0
            ys.append(y)
    return np.stack(xs), np.stack(ys)


def _fit_feedforward(x: np.ndarray, y: np.ndarray, hidden: int | None,
                     seed: int, epochs: int, lr: float) -> list[T.Tensor]:
    """Full-batch Adam on sigmoid cross-entropy; hidden=None is a linear map."""
    rng = np.random.default_rng(seed)
    d_in, d_out = x.shape[1], y.shape[1]
    dims = [(d_in, d_out)] if hidden is None else [(d_in, hidden), (hidden, d_out)]
    params = []
    for a, b in dims:
        bound = 1.0 / np.sqrt(a)
        params.append(T.Tensor(rng.uniform(-bound, bound, (a, b)).astype(np.float32),
                               requires_grad=True))
        params.append(T.Tensor(np.zeros(b, dtype=np.float32), requires_grad=True))
    xt = T.Tensor(x)
    yt = T.Tensor(y)
    mask = T.Tensor(np.ones_like(y))
    state = T.AdamState(lr=lr)
    for _ in range(epochs):
        with T.Tape() as tape:
            h = xt
            for i, (w, b) in enumerate(zip(params[::2], params[1::2])):
                h = T.add(T.matmul(h, w), b)
                if hidden is not None and i == 0:
                    h = T.relu(h)
            loss = T.bce_with_logits(h, yt, mask)
        tape.backward(loss)
        T.adam_step(params, [p.grad for p in params], state)
    return params


def _feedforward_recommender(params: list[T.Tensor], n_champ: int,
                             hidden: bool) -> Recommender:
    def scores(champion: int, role: Role) -> np.ndarray:
        h = _slot_features(champion, role, n_champ)[None, :]
        pieces = [(params[i].data, params[i + 1].data) for i in range(0, len(params), 2)]
        for i, (w, b) in enumerate(pieces):
            h = h @ w + b
            if hidden and i == 0:
                h = np.maximum(h, 0.0)
        return h[0]

    def recommend(match: Match, team: Team, k: int) -> list[list[int]]:
        return [recommend_top(scores(p.champion, p.role), k)
                for p in match.participants if p.team is team]

    return recommend


def baseline_logit(train: Sequence[Match], n_champ: int, n_items: int,
                   seed: int = 0, epochs: int = 300, lr: float = 0.05) -> Recommender:
    """Per-slot one-hot(champion, role) through a linear map and sigmoid.

    Blind to everything else in the match, so two slots sharing (champion,
    role) always receive identical recommendations.
    """
    x, y = _winning_slot_dataset(train, n_champ, n_items)
    params = _fit_feedforward(x, y, hidden=None, seed=seed, epochs=epochs, lr=lr)
    return _feedforward_recommender(params, n_champ, hidden=False)


def baseline_mlp(train: Sequence[Match], n_champ: int, n_items: int,
                 hidden: int = 256, seed: int = 0, epochs: int = 300,
                 lr: float = 0.01) -> Recommender:
    """One-hot(champion, role) through a single ReLU hidden layer."""
    x, y = _winning_slot_dataset(train, n_champ, n_items)
    params = _fit_feedforward(x, y, hidden=hidden, seed=seed, epochs=epochs, lr=lr)
    return _feedforward_recommender(params, n_champ, hidden=True)


# ---------------------------------------------------------------------------
# ablation grid


ABLATION_VARIANTS: dict[str, dict] = {
    "default": {},
    "heads_1": {"n_heads": 1},
    "heads_4": {"n_heads": 4},
    "layers_2": {"n_layers": 2},
    "layers_3": {"n_layers": 3},
    "allies_only": {"allies_only": True},
    "ablate_role": {"ablate_role": True},
    "ablate_both": {"allies_only": True, "ablate_role": True},
}


def ablation_suite(train_matches: Sequence[Match], test_matches: Sequence[Match],
                   base_config, train_config,
                   variants: dict[str, dict] | None = None,
                   ks: tuple[int, ...] = DEFAULT_KS) -> dict[str, MetricsReport]:
    """Train one model per architecture variant on the same split and seed,
    then evaluate each on the same test matches."""
    from .train import fit  # deferred: train depends on this module

    if variants is None:
        variants = ABLATION_VARIANTS
    reports = {}
    for name, overrides in variants.items():
        config = replace(base_config, **overrides)
        model, _ = fit(list(train_matches), train_config, config)
        reports[name] = evaluate_model(model_recommender(model), test_matches, ks=ks)
    return reports
