"""REST API over the session store.

Endpoints:
    POST /sessions                      -> {session_id}
    POST /sessions/{id}/turns           -> TurnRecord
    GET  /sessions/{id}/scene?revision= -> SceneSpec
    GET  /sessions/{id}/memory          -> SessionMemory
    GET  /healthz

Error bodies are always {stage, message, retriable}.
"""

from __future__ import annotations

from typing import Optional

from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .sessions import GatewayConfig, GatewayError, Pipeline, SessionStore

API_VERSION = "1"


class CreateSessionRequest(BaseModel):
    session_id: Optional[str] = None


class CreateSessionResponse(BaseModel):
    session_id: str


class SubmitTurnRequest(BaseModel):
    user_text: str = Field(min_length=1)


class QAModel(BaseModel):
    question: str
    answer: str
    knowledge_ids: list[str]


class TurnModel(BaseModel):
    turn: int
    status: str
    user_text: str
    retrieved_knowledge: list[tuple[str, float]]
    qa: Optional[QAModel] = None
    enhanced_text: str = ""
    scene_revision: int = -1
    stage: str = ""
    backend_identities: dict[str, str] = {}


class SceneObjectModel(BaseModel):
    asset_id: str
    label: str
    position: list[float]
    rotation: list[float]
    scale: list[float]


class SceneModel(BaseModel):
    objects: list[SceneObjectModel]
    environment: dict[str, str]
    revision: int


class MemoryModel(BaseModel):
    session_id: str
    turns: list[TurnModel]


class HealthModel(BaseModel):
    status: str
    api_version: str


class ErrorModel(BaseModel):
    stage: str
    message: str
    retriable: bool


def create_app(config: GatewayConfig) -> FastAPI:
    pipeline = Pipeline(config)
    store = SessionStore(pipeline)
    app = FastAPI(title="ark-gateway", version=API_VERSION)
    app.state.store = store

    @app.exception_handler(GatewayError)
    async def gateway_error_handler(request, exc: GatewayError):
        return JSONResponse(
            status_code=exc.status,
            content=ErrorModel(stage=exc.stage, message=exc.message, retriable=exc.retriable).model_dump(),
        )

    @app.get("/healthz", response_model=HealthModel)
    def healthz():
        return HealthModel(status="ok", api_version=API_VERSION)

    @app.post("/sessions", response_model=CreateSessionResponse)
    def create_session(request: CreateSessionRequest):
        return CreateSessionResponse(session_id=store.create_session(request.session_id))

    @app.post("/sessions/{session_id}/turns", response_model=TurnModel)
    def submit_turn(session_id: str, request: SubmitTurnRequest):
        record = store.submit_turn(session_id, request.user_text)
        return TurnModel(**record.to_json())

    @app.get("/sessions/{session_id}/scene", response_model=SceneModel)
    def get_scene(session_id: str, revision: Optional[int] = None):
        scene = store.get_scene(session_id, revision)
        return SceneModel(**scene.to_json())

    @app.get("/sessions/{session_id}/memory", response_model=MemoryModel)
    def get_memory(session_id: str):
        turns = store.get_memory(session_id)
        return MemoryModel(session_id=session_id, turns=[TurnModel(**t.to_json()) for t in turns])

    return app
