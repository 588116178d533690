"""Match ingestion, vocabularies, label construction, splits, and synthetic corpora.

A match is ten participants, five per team, one per role per team. Labels are
multi-hot item vectors; only winning-team rows are supervised. Everything here
is a pure function over immutable inputs and safe to call concurrently.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

MAX_ITEMS = 6
TEAM_SIZE = 5
N_SLOTS = 10


class Role(Enum):
    TOP = 0
    MID = 1
    JUNGLE = 2
    SUPPORT = 3
    BOT = 4


class Team(Enum):
    BLUE = 0
    RED = 1


def slot_of(team: Team, role: Role) -> int:
    """Canonical slot: Blue Top..Bot occupy 0..4, Red Top..Bot occupy 5..9."""
    return team.value * TEAM_SIZE + role.value


@dataclass(frozen=True)
class Participant:
    champion: int
    role: Role
    team: Team
    items: frozenset[int]


@dataclass(frozen=True)
class Match:
    match_id: str
    participants: tuple[Participant, ...]  # length 10, canonical slot order
    winner: Team


class MatchValidationError(ValueError):
    pass


def validate_match(match: Match, n_champions: int, n_items: int) -> None:
    """Raise MatchValidationError unless every structural invariant holds."""
    if len(match.participants) != N_SLOTS:
        raise MatchValidationError(f"expected {N_SLOTS} participants, got {len(match.participants)}")
    for i, p in enumerate(match.participants):
        if slot_of(p.team, p.role) != i:
            raise MatchValidationError(
                f"participant {i} has team={p.team.name} role={p.role.name}, "
                f"which belongs in slot {slot_of(p.team, p.role)}")
        if not 0 <= p.champion < n_champions:
            raise MatchValidationError(f"champion index {p.champion} out of range")
        if len(p.items) > MAX_ITEMS:
            raise MatchValidationError(f"participant {i} carries {len(p.items)} items")
        for it in p.items:
            if not 0 <= it < n_items:
                raise MatchValidationError(f"item index {it} out of range")


class Vocab:
    """Bijection between string names and contiguous indices."""

    def __init__(self, names: list[str] | tuple[str, ...]):
        names = tuple(names)
        if len(set(names)) != len(names):
            raise ValueError("vocabulary names must be unique")
        if any(not n for n in names):
            raise ValueError("vocabulary names must be non-empty")
        self.names = names
        self._index = {n: i for i, n in enumerate(names)}

    def __len__(self) -> int:
        return len(self.names)

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocab) and self.names == other.names

    def index(self, name: str) -> int:
        return self._index[name]

    def name(self, idx: int) -> str:
        return self.names[idx]

    def save(self, path: str | Path) -> None:
        Path(path).write_text("".join(n + "\n" for n in self.names), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        return cls([ln for ln in lines if ln])


CSV_COLUMNS = ("match_id", "slot", "champion_name", "role", "team", "winner_team",
               "item1", "item2", "item3", "item4", "item5", "item6")


@dataclass
class LoadResult:
    """Loaded matches plus counts of everything the loader discarded."""
    matches: list[Match]
    rejected_matches: int = 0
    malformed_rows: int = 0
    dropped_items: int = 0
    messages: list[str] = field(default_factory=list)


def load_matches(path: str | Path, champion_vocab: Vocab, item_vocab: Vocab) -> LoadResult:
    """Read the flattened per-participant CSV into validated matches.

    One row per participant, ten rows per match_id. Item cells hold item names;
    names missing from item_vocab are dropped (counted), which is how basic,
    advanced, and consumable items are filtered out when the vocabulary lists
    only finished items. An unknown champion name is an error, not a drop: the
    champion vocabulary is supposed to cover the corpus. Any structural defect
    rejects the whole match, never a partial one.
    """
    path = Path(path)
    result = LoadResult(matches=[])
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ValueError(f"cannot read {path}: {exc}") from exc

    reader = csv.reader(text.splitlines())
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError(f"{path}: zero valid matches (empty file)")
    if tuple(header) != CSV_COLUMNS:
        raise ValueError(f"{path}: bad header {header!r}")

    # group rows by match_id, preserving first-seen order of matches
    by_match: dict[str, list[list[str]]] = {}
    for row in reader:
        if len(row) != len(CSV_COLUMNS):
            result.malformed_rows += 1
            continue
        by_match.setdefault(row[0], []).append(row)

    for match_id, rows in by_match.items():
        match = _assemble_match(match_id, rows, champion_vocab, item_vocab, result)
        if match is None:
            result.rejected_matches += 1
            continue
        result.matches.append(match)

    if not result.matches:
        raise ValueError(f"{path}: zero valid matches")
    return result


def _assemble_match(match_id: str, rows: list[list[str]], champion_vocab: Vocab,
                    item_vocab: Vocab, result: LoadResult) -> Match | None:
    if len(rows) != N_SLOTS:
        result.messages.append(f"{match_id}: {len(rows)} rows, expected {N_SLOTS}")
        return None
    slots: dict[int, Participant] = {}
    winners = set()
    for row in rows:
        (_, slot_s, champ, role_s, team_s, winner_s, *item_cells) = row
        try:
            role = Role[role_s]
            team = Team[team_s]
            winner = Team[winner_s]
            declared_slot = int(slot_s)
        except (KeyError, ValueError):
            result.messages.append(f"{match_id}: bad enum or slot in row {row!r}")
            return None
        if champ not in champion_vocab:
            raise ValueError(f"{match_id}: unknown champion name {champ!r}")
        slot = slot_of(team, role)
        if declared_slot != slot:
            result.messages.append(
                f"{match_id}: slot column {declared_slot} disagrees with team/role slot {slot}")
            return None
        if slot in slots:
            result.messages.append(f"{match_id}: duplicate {team.name} {role.name}")
            return None
        winners.add(winner)
        items = set()
        for cell in item_cells:
            if not cell:
                continue
            if cell in item_vocab:
                items.add(item_vocab.index(cell))
            else:
                result.dropped_items += 1
        slots[slot] = Participant(champion=champion_vocab.index(champ), role=role,
                                  team=team, items=frozenset(items))
    if len(winners) != 1:
        result.messages.append(f"{match_id}: rows disagree on the winner")
        return None
    return Match(match_id=match_id,
                 participants=tuple(slots[i] for i in range(N_SLOTS)),
                 winner=winners.pop())


def save_matches_csv(matches: list[Match], path: str | Path,
                     champion_vocab: Vocab, item_vocab: Vocab) -> None:
    """Write matches in the flattened schema that load_matches reads."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for m in matches:
            for slot, p in enumerate(m.participants):
                item_names = sorted(item_vocab.name(i) for i in p.items)
                item_names += [""] * (MAX_ITEMS - len(item_names))
                writer.writerow([m.match_id, slot, champion_vocab.name(p.champion),
                                 p.role.name, p.team.name, m.winner.name, *item_names])


# ---------------------------------------------------------------------------
# train/test split


@dataclass
class SplitDataset:
    train: list[Match]
    test: list[Match]
    seed: int
    # champions with a single match cannot appear on both sides; they stay in
    # train and are reported here
    unsplittable_champions: list[int] = field(default_factory=list)


def _champions_of(match: Match) -> set[int]:
    return {p.champion for p in match.participants}


def split_train_test(matches: list[Match], ratio: float, seed: int) -> SplitDataset:
    """Random split by match, then repaired so every champion with at least two
    matches appears on both sides.

    Repair greedily moves matches between sides, never copying them, and only
    picks moves that do not strip another champion's last match from the donor
    side. Deterministic for a fixed seed.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError("ratio must lie strictly between 0 and 1")
    if len({m.match_id for m in matches}) != len(matches):
        raise ValueError("duplicate match_id in corpus")

    rng = np.random.default_rng(seed)
    order = rng.permutation(len(matches))
    n_train = int(round(ratio * len(matches)))
    n_train = min(max(n_train, 1), len(matches) - 1)
    train_ids = {matches[i].match_id for i in order[:n_train]}

    sides: dict[str, set[str]] = {"train": set(train_ids),
                                  "test": {m.match_id for m in matches} - train_ids}
    by_id = {m.match_id: m for m in matches}
    total_count: dict[int, int] = {}
    count: dict[str, dict[int, int]] = {"train": {}, "test": {}}
    for m in matches:
        side = "train" if m.match_id in sides["train"] else "test"
        for c in _champions_of(m):
            total_count[c] = total_count.get(c, 0) + 1
            count[side][c] = count[side].get(c, 0) + 1

    unsplittable = sorted(c for c, n in total_count.items() if n < 2)

    def move(match_id: str, src: str, dst: str) -> None:
        sides[src].discard(match_id)
        sides[dst].add(match_id)
        for c in _champions_of(by_id[match_id]):
            count[src][c] = count[src].get(c, 0) - 1
            count[dst][c] = count[dst].get(c, 0) + 1

    # champions with a single match belong in train
    for c in unsplittable:
        for m in matches:
            if c in _champions_of(m) and m.match_id in sides["test"]:
                move(m.match_id, "test", "train")

    def missing_champions() -> list[tuple[int, str]]:
        out = []
        for c, n in sorted(total_count.items()):
            if n < 2:
                continue
            for side in ("train", "test"):
                if count[side].get(c, 0) == 0:
                    out.append((c, side))
        return out

    max_iters = 10 * (len(total_count) + 1)
    for _ in range(max_iters):
        todo = missing_champions()
        if not todo:
            break
        c, dst = todo[0]
        src = "test" if dst == "train" else "train"
        candidates = sorted(mid for mid in sides[src] if c in _champions_of(by_id[mid]))
        if not candidates:  # should be impossible once total_count[c] >= 2
            raise RuntimeError(f"champion {c} absent from both sides")

        def damage(mid: str) -> int:
            # moves that would strand another champion on the donor side are bad
            return sum(1 for d in _champions_of(by_id[mid])
                       if d != c and count[src].get(d, 0) <= 1 and total_count[d] >= 2)

        best = min(candidates, key=lambda mid: (damage(mid), mid))
        move(best, src, dst)
    else:
        raise RuntimeError("split repair did not converge")

    train = [m for m in matches if m.match_id in sides["train"]]
    test = [m for m in matches if m.match_id in sides["test"]]
    return SplitDataset(train=train, test=test, seed=seed,
                        unsplittable_champions=unsplittable)


# ---------------------------------------------------------------------------
# labels


def multi_hot_labels(match: Match, n_items: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-slot multi-hot item labels and the winning-team supervision mask.

    Returns (labels, mask): labels is (10, n_items) float32 with 1 at each item
    the participant finished with, mask is (10,) float32 with 1 on the five
    winning-team slots.
    """
    labels = np.zeros((N_SLOTS, n_items), dtype=np.float32)
    mask = np.zeros(N_SLOTS, dtype=np.float32)
    for i, p in enumerate(match.participants):
        for it in p.items:
            labels[i, it] = 1.0
        if p.team is match.winner:
            mask[i] = 1.0
    return labels, mask


# ---------------------------------------------------------------------------
# synthetic corpora with planted rules


@dataclass(frozen=True)
class RuleSpec:
    """Shape of the planted item rule.

    Winning participants always carry exactly six items: a champion pair, a
    role pair, and a context pair drawn from three disjoint item blocks. With
    use_role off the second pair depends on the champion alone; with
    use_context off the third pair ignores the enemy team. n_nemeses enemy
    champions per champion trigger the countered context pair when present.
    """
    use_role: bool = True
    use_context: bool = True
    n_nemeses: int = 2


@dataclass(frozen=True)
class PlantedRule:
    spec: RuleSpec
    champion_pairs: np.ndarray   # (n_champ, 2)
    role_pairs: np.ndarray       # (n_champ, 5, 2), rows of a champion are disjoint pairs
    context_pairs: np.ndarray    # (n_champ, 2, 2), [0]=no nemesis present, [1]=present
    nemeses: np.ndarray          # (n_champ, n_nemeses)

    def nemesis_present(self, champion: int, enemy_champions: set[int]) -> bool:
        return bool(enemy_champions & set(self.nemeses[champion].tolist()))

    def items_for(self, champion: int, role: Role, enemy_champions: set[int]) -> frozenset[int]:
        pair1 = self.champion_pairs[champion]
        role_idx = role.value if self.spec.use_role else 0
        pair2 = self.role_pairs[champion, role_idx]
        present = self.spec.use_context and self.nemesis_present(champion, enemy_champions)
        pair3 = self.context_pairs[champion, int(present)]
        return frozenset(int(x) for x in (*pair1, *pair2, *pair3))


def _build_rule(n_champ: int, n_items: int, spec: RuleSpec,
                rng: np.random.Generator) -> PlantedRule:
    role_block = 10 if spec.use_role else 2
    context_block = 4 if spec.use_context else 2
    champ_block = n_items - role_block - context_block
    if champ_block < 2:
        raise ValueError(f"n_items={n_items} too small for {spec}")

    a0, b0, c0 = 0, champ_block, champ_block + role_block
    champion_pairs = np.empty((n_champ, 2), dtype=np.int64)
    role_pairs = np.empty((n_champ, 5, 2), dtype=np.int64)
    context_pairs = np.empty((n_champ, 2, 2), dtype=np.int64)
    for c in range(n_champ):
        champion_pairs[c] = a0 + rng.choice(champ_block, size=2, replace=False)
        if spec.use_role:
            # a permutation of the 10-item block yields five disjoint pairs
            role_pairs[c] = (b0 + rng.permutation(role_block)).reshape(5, 2)
        else:
            role_pairs[c, :] = b0 + rng.choice(role_block, size=2, replace=False)
        if spec.use_context:
            perm = c0 + rng.permutation(context_block)[:4]
            context_pairs[c] = perm.reshape(2, 2)
        else:
            context_pairs[c, :] = c0 + rng.choice(context_block, size=2, replace=False)

    nemeses = np.empty((n_champ, spec.n_nemeses), dtype=np.int64)
    others = np.arange(n_champ)
    for c in range(n_champ):
        pool = others[others != c]
        nemeses[c] = rng.choice(pool, size=spec.n_nemeses, replace=False)
    return PlantedRule(spec=spec, champion_pairs=champion_pairs, role_pairs=role_pairs,
                       context_pairs=context_pairs, nemeses=nemeses)


def synthetic_generate(n_matches: int, n_champ: int, n_items: int,
                       rule_spec: RuleSpec, seed: int) -> tuple[list[Match], PlantedRule]:
    """Random valid matches whose winning-team item sets follow a planted rule.

    Each match draws ten distinct champions, permutes five per team over the
    roles, and flips a fair coin for the winner. Winning participants carry
    exactly the six items the rule dictates; losing participants carry random
    noise items. Deterministic for a fixed seed.
    """
    if n_champ < 10:
        raise ValueError("need at least 10 champions to field two teams")
    if n_items < 12:
        raise ValueError("need at least 12 items for the planted blocks")
    rng = np.random.default_rng(seed)
    rule = _build_rule(n_champ, n_items, rule_spec, rng)

    matches = []
    for k in range(n_matches):
        champs = rng.choice(n_champ, size=10, replace=False)
        winner = Team(int(rng.integers(2)))
        team_champs = {Team.BLUE: champs[:5], Team.RED: champs[5:]}
        role_perm = {t: rng.permutation(5) for t in (Team.BLUE, Team.RED)}
        participants: list[Participant | None] = [None] * N_SLOTS
        for team in (Team.BLUE, Team.RED):
            enemy = Team.RED if team is Team.BLUE else Team.BLUE
            enemy_set = {int(c) for c in team_champs[enemy]}
            for j in range(TEAM_SIZE):
                role = Role(int(role_perm[team][j]))
                champion = int(team_champs[team][j])
                if team is winner:
                    items = rule.items_for(champion, role, enemy_set)
                else:
                    n_noise = int(rng.integers(3, MAX_ITEMS + 1))
                    items = frozenset(int(x) for x in
                                      rng.choice(n_items, size=n_noise, replace=False))
                participants[slot_of(team, role)] = Participant(
                    champion=champion, role=role, team=team, items=items)
        matches.append(Match(match_id=f"syn-{seed}-{k}",
                             participants=tuple(participants), winner=winner))
    return matches, rule


def default_vocabs(n_champ: int, n_items: int) -> tuple[Vocab, Vocab]:
    """Placeholder name vocabularies for synthetic corpora."""
    return (Vocab([f"champ_{i:03d}" for i in range(n_champ)]),
            Vocab([f"item_{i:03d}" for i in range(n_items)]))
