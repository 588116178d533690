"""HTTP inference service: match in, ranked items and attention maps out.

The checkpoint is loaded once (possibly on a background thread) and shared
immutably across requests; until it is ready every data endpoint answers 503.
Domain problems in a request (unknown names, duplicate roles, wrong counts)
come back as 400 with a machine-readable code and the offending field paths.
All JSON floats are serialized to 6 significant digits, which keeps identical
requests byte-identical in response.
"""
from __future__ import annotations

import threading
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from pydantic import BaseModel, ConfigDict

from .data import Match, Participant, Role, Team, Vocab, slot_of
from .model import TEAM_SIZE, TTIRModel, forward_full

ROLE_NAMES = [r.name for r in Role]
TEAM_NAMES = [t.name for t in Team]


class ApiError(Exception):
    def __init__(self, status: int, code: str, message: str,
                 fields: list[str] | None = None):
        super().__init__(message)
        self.status = status
        self.code = code
        self.message = message
        self.fields = fields or []

    def payload(self) -> dict:
        return {"error": {"code": self.code, "message": self.message,
                          "fields": self.fields}}


@dataclass
class LoadedModel:
    model: TTIRModel
    champion_vocab: Vocab
    item_vocab: Vocab
    checkpoint_id: str


class ModelStore:
    """Holds the served model; swap-once, read-many."""

    def __init__(self):
        self._loaded: LoadedModel | None = None
        self._error: str | None = None
        self._lock = threading.Lock()

    def set_loaded(self, model: TTIRModel, champion_vocab: Vocab,
                   item_vocab: Vocab, checkpoint_id: str) -> None:
        with self._lock:
            self._loaded = LoadedModel(model, champion_vocab, item_vocab, checkpoint_id)
            self._error = None

    def set_error(self, message: str) -> None:
        with self._lock:
            self._error = message

    def load_from_files(self, checkpoint: str | Path, champion_vocab: str | Path,
                        item_vocab: str | Path) -> None:
        from .train import load_checkpoint
        try:
            champ = Vocab.load(champion_vocab)
            items = Vocab.load(item_vocab)
            model = load_checkpoint(checkpoint, champ, items)
            self.set_loaded(model, champ, items, checkpoint_id=Path(checkpoint).name)
        except Exception as exc:
            self.set_error(f"{type(exc).__name__}: {exc}")
            raise

    def start_background_load(self, checkpoint: str | Path,
                              champion_vocab: str | Path,
                              item_vocab: str | Path) -> threading.Thread:
        def worker():
            try:
                self.load_from_files(checkpoint, champion_vocab, item_vocab)
            except Exception:
                pass  # recorded via set_error; surfaced on the next request
        thread = threading.Thread(target=worker, daemon=True)
        thread.start()
        return thread

    def get(self) -> LoadedModel:
        with self._lock:
            if self._loaded is None:
                detail = self._error or "model is still loading"
                raise ApiError(503, "model_not_loaded", detail)
            return self._loaded


class ParticipantIn(BaseModel):
    model_config = ConfigDict(extra="forbid")
    champion_name: str
    role: str
    team: str


class RecommendRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    participants: list[ParticipantIn]
    requesting_team: str


class AttentionRequest(RecommendRequest):
    model_config = ConfigDict(extra="forbid")
    layer: int | None = None
    head: int | None = None


def round_floats(obj, digits: int = 6):
    """Clamp every float in a JSON-ready structure to 6 significant digits."""
    if isinstance(obj, (float, np.floating)):
        return float(f"{float(obj):.{digits}g}")
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, dict):
        return {k: round_floats(v, digits) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v, digits) for v in obj]
    return obj


def _parse_request(req: RecommendRequest, loaded: LoadedModel) -> tuple[Match, Team]:
    if req.requesting_team not in TEAM_NAMES:
        raise ApiError(400, "invalid_team",
                       f"requesting_team must be one of {TEAM_NAMES}",
                       ["requesting_team"])
    if len(req.participants) != 10:
        raise ApiError(400, "wrong_count",
                       f"expected 10 participants, got {len(req.participants)}",
                       ["participants"])

    bad_roles = [i for i, p in enumerate(req.participants) if p.role not in ROLE_NAMES]
    if bad_roles:
        raise ApiError(400, "invalid_role", f"role must be one of {ROLE_NAMES}",
                       [f"participants.{i}.role" for i in bad_roles])
    bad_teams = [i for i, p in enumerate(req.participants) if p.team not in TEAM_NAMES]
    if bad_teams:
        raise ApiError(400, "invalid_team", f"team must be one of {TEAM_NAMES}",
                       [f"participants.{i}.team" for i in bad_teams])
    unknown = [i for i, p in enumerate(req.participants)
               if p.champion_name not in loaded.champion_vocab]
    if unknown:
        names = sorted({req.participants[i].champion_name for i in unknown})
        raise ApiError(400, "unknown_name", f"unknown champion name(s): {names}",
                       [f"participants.{i}.champion_name" for i in unknown])

    by_slot: dict[int, list[int]] = {}
    for i, p in enumerate(req.participants):
        slot = slot_of(Team[p.team], Role[p.role])
        by_slot.setdefault(slot, []).append(i)
    duplicated = {s: idxs for s, idxs in by_slot.items() if len(idxs) > 1}
    if duplicated:
        fields = [f"participants.{i}" for idxs in duplicated.values() for i in idxs]
        labels = [f"{Team(s // TEAM_SIZE).name} {Role(s % TEAM_SIZE).name}"
                  for s in duplicated]
        raise ApiError(400, "duplicate_role",
                       f"duplicate (team, role) slots: {sorted(labels)}",
                       sorted(fields))

    requesting = Team[req.requesting_team]
    participants = []
    for slot in range(10):
        p = req.participants[by_slot[slot][0]]
        participants.append(Participant(
            champion=loaded.champion_vocab.index(p.champion_name),
            role=Role[p.role], team=Team[p.team], items=frozenset()))
    # the winner field is irrelevant at inference time; labels are never read
    match = Match(match_id="request", participants=tuple(participants),
                  winner=requesting)
    return match, requesting


def create_app(store: ModelStore) -> FastAPI:
    app = FastAPI(title="ttir", docs_url=None, redoc_url=None)
    # the browser UI is served as static files from a different origin
    app.add_middleware(CORSMiddleware, allow_origins=["*"],
                       allow_methods=["GET", "POST"], allow_headers=["*"])

    @app.exception_handler(ApiError)
    async def api_error_handler(_: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content=exc.payload())

    @app.exception_handler(RequestValidationError)
    async def validation_handler(_: Request, exc: RequestValidationError):
        fields = [".".join(str(part) for part in err["loc"] if part != "body")
                  for err in exc.errors()]
        payload = {"error": {"code": "invalid_request",
                             "message": "request body failed validation",
                             "fields": fields}}
        return JSONResponse(status_code=400, content=payload)

    @app.get("/health")
    async def health():
        loaded = True
        try:
            store.get()
        except ApiError:
            loaded = False
        return {"status": "ok", "model_loaded": loaded}

    @app.get("/meta")
    async def meta():
        loaded = store.get()
        return {
            "champions": list(loaded.champion_vocab.names),
            "items": list(loaded.item_vocab.names),
            "roles": ROLE_NAMES,
            "config": asdict(loaded.model.config),
            "checkpoint_id": loaded.checkpoint_id,
        }

    @app.post("/recommend")
    async def recommend(req: RecommendRequest):
        loaded = store.get()
        match, requesting = _parse_request(req, loaded)
        result = forward_full(match, loaded.model, requesting)
        cfg = loaded.model.config

        visible = [p for p in match.participants if p.team is requesting] \
            if cfg.allies_only else list(match.participants)
        requested = [p for p in match.participants if p.team is requesting]

        slots_payload = []
        for rec, row, participant in zip(result.recommendations,
                                         result.slot_indices, requested):
            slots_payload.append({
                "champion_name": loaded.champion_vocab.name(participant.champion),
                "role": participant.role.name,
                "team": participant.team.name,
                "items": [{"name": loaded.item_vocab.name(i),
                           "probability": float(result.probs[row, i])}
                          for i in rec],
            })

        mean_attention = result.attention.mean_matrix()
        attention_rows = mean_attention[result.slot_indices]
        payload = {
            "model_meta": {"checkpoint_id": loaded.checkpoint_id,
                           "config": asdict(cfg)},
            "requesting_team": requesting.name,
            "recommendations": slots_payload,
            "attention": {
                "rows": [list(map(float, row)) for row in attention_rows],
                "row_labels": [loaded.champion_vocab.name(p.champion)
                               for p in requested],
                "column_labels": [loaded.champion_vocab.name(p.champion)
                                  for p in visible],
            },
        }
        return round_floats(payload)

    @app.post("/attention")
    async def attention(req: AttentionRequest):
        loaded = store.get()
        cfg = loaded.model.config
        if req.layer is not None and not 0 <= req.layer < cfg.n_layers:
            raise ApiError(400, "layer_out_of_range",
                           f"layer must lie in [0, {cfg.n_layers})", ["layer"])
        if req.head is not None and not 0 <= req.head < cfg.n_heads:
            raise ApiError(400, "head_out_of_range",
                           f"head must lie in [0, {cfg.n_heads})", ["head"])
        match, requesting = _parse_request(req, loaded)
        result = forward_full(match, loaded.model, requesting)

        layers = range(cfg.n_layers) if req.layer is None else [req.layer]
        heads = range(cfg.n_heads) if req.head is None else [req.head]
        matrices = [{"layer": li, "head": hi,
                     "weights": [list(map(float, row))
                                 for row in result.attention.weights[li][hi]]}
                    for li in layers for hi in heads]
        visible = [p for p in match.participants if p.team is requesting] \
            if cfg.allies_only else list(match.participants)
        payload = {
            "n_layers": cfg.n_layers,
            "n_heads": cfg.n_heads,
            "matrices": matrices,
            "labels": [loaded.champion_vocab.name(p.champion) for p in visible],
        }
        return round_floats(payload)

    return app


def run_server(checkpoint: str, champion_vocab: str, item_vocab: str,
               host: str = "127.0.0.1", port: int = 8100) -> None:
    """Start uvicorn; the checkpoint loads on a background thread so /health
    responds immediately."""
    import uvicorn

    store = ModelStore()
    store.start_background_load(checkpoint, champion_vocab, item_vocab)
    uvicorn.run(create_app(store), host=host, port=port, log_level="info")
