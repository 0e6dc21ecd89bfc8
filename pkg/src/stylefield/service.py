"""HTTP + WebSocket rendering service."""
from __future__ import annotations

import base64
import hashlib
import io as io_mod
import threading
import time
from dataclasses import replace
from typing import Optional

import torch
from fastapi import FastAPI, Query, Request, Response, WebSocket, \
    WebSocketDisconnect
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, model_validator

from .camera import CameraPose
from .config import PipelineConfig
from .generator import Generator, MixingSpec
from .styles import sample_latent


class PoseModel(BaseModel):
    theta: float = 0.0
    phi: float = 0.0
    radius: float = 1.0
    fov: float = 12.0


class MixingModel(BaseModel):
    seed_b: int
    crossover_layer: int


class RenderRequest(BaseModel):
    checkpoint: Optional[str] = None
    pose: PoseModel = PoseModel()
    seed: Optional[int] = None
    w: Optional[list[float]] = None
    resolution: int = 0            # 0 = base resolution
    mixing: Optional[MixingModel] = None
    truncation: Optional[float] = None

    @model_validator(mode="after")
    def _one_style_source(self):
        if (self.seed is None) == (self.w is None):
            raise ValueError("exactly one of 'seed' or 'w' must be given")
        return self


class ModelHandle:
    """Read-only generator shared by request handlers; checkpoint reload
    swaps the whole handle atomically."""

    def __init__(self, generator: Generator, cfg: PipelineConfig, name: str):
        generator.eval()
        self.generator = generator
        self.cfg = cfg
        self.name = name
        self.lock = threading.Lock()

    def style_from_seed(self, seed: int) -> torch.Tensor:
        g = torch.Generator().manual_seed(seed)
        dtype = next(self.generator.parameters()).dtype
        z = sample_latent(self.cfg.styles.z_dim, 1, generator=g, dtype=dtype)
        return self.generator.mapping(z)[0]

    def resolve_style(self, req: RenderRequest):
        gen = self.generator
        if req.w is not None:
            dtype = next(gen.parameters()).dtype
            w = torch.tensor(req.w, dtype=dtype)
            if w.shape[0] != self.cfg.styles.w_dim:
                raise ValueError(
                    f"w must have dimension {self.cfg.styles.w_dim}")
        else:
            w = self.style_from_seed(req.seed)
        if req.truncation is not None:
            w = gen.mapping.truncate(w, req.truncation)
        if req.mixing is not None:
            wb = self.style_from_seed(req.mixing.seed_b)
            if req.truncation is not None:
                wb = gen.mapping.truncate(wb, req.truncation)
            cross = max(0, min(req.mixing.crossover_layer,
                               gen.num_style_layers))
            return MixingSpec(style_a=gen.broadcast(w),
                              style_b=gen.broadcast(wb),
                              crossover_layer=cross)
        return w

    def render(self, req: RenderRequest):
        res = req.resolution or self.cfg.generator.base_resolution
        if res not in self.cfg.generator.resolutions():
            raise ValueError(
                f"resolution {res} not in supported chain "
                f"{self.cfg.generator.resolutions()}")
        style = self.resolve_style(req)
        pose = CameraPose(**req.pose.model_dump())
        with self.lock, torch.no_grad():
            out = self.generator.synthesize(style, pose,
                                            active_resolution=res)
        return out


def image_to_bytes(image: torch.Tensor, fmt: str = "png",
                   quality: int = 85) -> bytes:
    """Raw (H, W, 3) output -> encoded image bytes (tanh display squash)."""
    from PIL import Image
    import numpy as np
    arr = ((torch.tanh(image) + 1.0) * 127.5).clamp(0, 255)
    arr = arr.detach().cpu().numpy().astype(np.uint8)
    buf = io_mod.BytesIO()
    img = Image.fromarray(arr)
    if fmt == "jpeg":
        img.save(buf, format="JPEG", quality=quality)
    else:
        img.save(buf, format="PNG")
    return buf.getvalue()


def create_app(handle: ModelHandle, *, render_budget_ms: int = 10_000) -> FastAPI:
    app = FastAPI(title="stylefield renderer")
    app.state.handle = handle

    @app.exception_handler(RequestValidationError)
    async def _validation_400(request: Request, exc: RequestValidationError):
        fields = [{"field": ".".join(str(p) for p in e["loc"]),
                   "message": e["msg"]} for e in exc.errors()]
        return JSONResponse(status_code=400, content={"errors": fields})

    @app.get("/health")
    def health():
        h: ModelHandle = app.state.handle
        return {"status": "ready", "model": h.name,
                "resolutions": h.cfg.generator.resolutions(),
                # layer metadata so clients can label a mixing slider
                "style_layers": h.generator.num_style_layers,
                "aggregation_layer": h.generator.aggregation_layer_index}

    @app.post("/render")
    def render(req: RenderRequest):
        h: ModelHandle = app.state.handle
        if req.checkpoint is not None and req.checkpoint != h.name:
            return JSONResponse(status_code=404,
                                content={"error": f"unknown checkpoint "
                                                  f"{req.checkpoint!r}"})
        t0 = time.perf_counter()
        try:
            out = h.render(req)
        except ValueError as e:
            return JSONResponse(status_code=400,
                                content={"errors": [{"field": "request",
                                                     "message": str(e)}]})
        millis = (time.perf_counter() - t0) * 1000.0
        if millis > render_budget_ms:
            return JSONResponse(
                status_code=503,
                content={"error": "render exceeded request budget",
                         "millis": millis,
                         "hint": "retry at a lower resolution"},
                headers={"Retry-After": "1"})
        return Response(content=image_to_bytes(out.image),
                        media_type="image/png",
                        headers={"X-Render-Millis": f"{millis:.1f}"})

    @app.get("/styles/sample")
    def style_sample(seed: int = Query(...)):
        h: ModelHandle = app.state.handle
        w = h.style_from_seed(seed)
        blob = w.detach().to(torch.float32).numpy().tobytes()
        return {"seed": seed,
                "digest": hashlib.sha256(blob).hexdigest(),
                "head": [float(v) for v in w[:8]],
                # full vector so clients can interpolate between seeds
                "w": [float(v) for v in w]}

    @app.websocket("/stream")
    async def stream(ws: WebSocket, lossless: bool = False):
        h: ModelHandle = app.state.handle
        await ws.accept()
        frame = 0
        try:
            while True:
                msg = await ws.receive_json()
                frame += 1
                req = RenderRequest(
                    pose=PoseModel(**msg.get("pose", {})),
                    seed=msg.get("seed"),
                    w=msg.get("w"),
                    resolution=msg.get("resolution", 0),
                    mixing=MixingModel(**msg["mixing"])
                    if msg.get("mixing") else None,
                    truncation=msg.get("truncation"))
                t0 = time.perf_counter()
                out = h.render(req)
                millis = (time.perf_counter() - t0) * 1000.0
                fmt = "png" if lossless else "jpeg"
                payload = image_to_bytes(out.image, fmt=fmt)
                await ws.send_json({
                    "seq": msg.get("seq", frame),
                    "millis": millis,
                    "format": fmt,
                    "image_b64": base64.b64encode(payload).decode(),
                })
        except WebSocketDisconnect:
            pass

    return app


def load_handle(checkpoint_path: str) -> ModelHandle:
    from .trainer import load_generator
    gen, cfg = load_generator(checkpoint_path)
    gen.sampling = replace(gen.sampling, stratified=False)
    return ModelHandle(gen, cfg, name=checkpoint_path.rsplit("/", 1)[-1])


def serve(checkpoint_path: str, port: int, *, host: str = "127.0.0.1",
          render_budget_ms: int = 10_000) -> None:
    import uvicorn
    app = create_app(load_handle(checkpoint_path),
                     render_budget_ms=render_budget_ms)
    uvicorn.run(app, host=host, port=port)
