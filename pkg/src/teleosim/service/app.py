"""FastAPI application wrapping the simulation core.

REST endpoints run deterministic scripted sessions; the WebSocket endpoint
exposes the live operator wire interface (hello + 30 Hz state frames out,
leader/pedal/e-stop-reset commands in). One controller client at a time;
viewers are unlimited.
"""

from __future__ import annotations

import os
from contextlib import asynccontextmanager

from fastapi import FastAPI, HTTPException, Query, WebSocket, WebSocketDisconnect
from fastapi.staticfiles import StaticFiles

from ..link import ChannelConfig, channel_profile
from ..scenarios import bundled_scenarios, get_scenario
from ..session import ConfigMismatch, SessionLog, replay, report, report_csv, format_report, run_scenario
from .live import LiveSession, ServiceSettings
from .models import (
    HealthResponse,
    ReplayRequest,
    ReplayResponse,
    ReportRequest,
    ReportResponse,
    ReportRow,
    RunMetrics,
    RunRequest,
    RunResponse,
    ScenarioSummary,
)


def create_app(settings: ServiceSettings | None = None) -> FastAPI:
    settings = settings or ServiceSettings()

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        live = LiveSession(settings) if settings.live_enabled else None
        app.state.live = live
        if live is not None:
            live.start()
        yield
        if live is not None:
            await live.stop()

    app = FastAPI(title="teleosim", lifespan=lifespan)

    @app.get("/api/health", response_model=HealthResponse)
    def health() -> HealthResponse:
        if not settings.live_enabled:
            return HealthResponse(status="ok")
        return HealthResponse(
            status="ok", live_scenario=settings.scenario, live_variant=settings.variant
        )

    @app.get("/api/scenarios", response_model=list[ScenarioSummary])
    def scenarios() -> list[ScenarioSummary]:
        out = []
        for name, sc in sorted(bundled_scenarios().items()):
            out.append(
                ScenarioSummary(
                    name=name,
                    tags=list(sc.tags),
                    timeout=sc.timeout,
                    arms=sorted(sc.scripts),
                    props=len(sc.world.props),
                )
            )
        return out

    @app.get("/api/scenarios/{name}")
    def scenario_detail(name: str) -> dict:
        try:
            return get_scenario(name).to_json()
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown scenario {name!r}")

    @app.post("/api/runs", response_model=RunResponse)
    def run(req: RunRequest) -> RunResponse:
        try:
            scenario = get_scenario(req.scenario)
        except KeyError as exc:
            raise HTTPException(status_code=404, detail=str(exc))
        try:
            channel = channel_profile(req.channel, seed=req.seed)
            if req.channel_config:
                channel = ChannelConfig.from_json({**channel.to_json(), **req.channel_config})
            result = run_scenario(
                scenario,
                req.variant,
                req.seed,
                channel=channel,
                gains=settings.gains,
                haptics=settings.haptics,
            )
        except (KeyError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return RunResponse(
            metrics=RunMetrics(**result.metrics()),
            log=result.log.to_jsonl() if req.include_log else None,
        )

    @app.post("/api/replay", response_model=ReplayResponse)
    def replay_log(req: ReplayRequest) -> ReplayResponse:
        try:
            log = SessionLog.from_jsonl(req.log)
            rr = replay(log)
        except ConfigMismatch as exc:
            raise HTTPException(status_code=409, detail=str(exc))
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=f"bad log: {exc}")
        return ReplayResponse(
            match=rr.match,
            first_divergence=rr.first_divergence,
            metrics=RunMetrics(**rr.result.metrics()),
        )

    @app.post("/api/report", response_model=ReportResponse)
    def report_logs(req: ReportRequest) -> ReportResponse:
        try:
            logs = [SessionLog.from_jsonl(text) for text in req.logs]
            rows = report(logs)
        except (ValueError, KeyError) as exc:
            raise HTTPException(status_code=422, detail=f"bad logs: {exc}")
        return ReportResponse(
            rows=[ReportRow(**r) for r in rows],
            csv=report_csv(rows),
            table=format_report(rows),
        )

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket, role: str = Query(default="viewer")):
        await ws.accept()
        live: LiveSession = app.state.live
        if live is None:
            await ws.send_json({"type": "error", "reason": "no live session"})
            await ws.close(code=1008)
            return
        if role not in ("controller", "viewer"):
            await ws.send_json({"type": "error", "reason": f"unknown role {role!r}"})
            await ws.close(code=1008)
            return
        if not live.attach(ws, role):
            await ws.send_json({"type": "error", "reason": "busy"})
            await ws.close(code=1008)
            return
        try:
            await ws.send_json(live.hello_message())
            if live.last_state is not None:
                await ws.send_json(live.last_state)
            while True:
                msg = await ws.receive_json()
                if role == "controller":
                    live.commands.put_nowait(msg)
        except WebSocketDisconnect:
            pass
        finally:
            live.detach(ws)

    if settings.frontend_dir and os.path.isdir(settings.frontend_dir):
        app.mount("/", StaticFiles(directory=settings.frontend_dir, html=True), name="ui")

    return app
