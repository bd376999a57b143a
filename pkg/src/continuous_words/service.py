"""HTTP inference service over one loaded checkpoint.

One process serves one checkpoint.  Generation requests funnel through a
bounded FIFO queue with a single worker, so the model handle never sees
concurrent denoise calls; overflow is rejected with 429.  Images travel as
base64 PNG inside a JSON envelope next to their metadata.
"""

from __future__ import annotations

import base64
import io
import queue
import threading
import time
from concurrent.futures import Future
from typing import Literal

import numpy as np
from fastapi import FastAPI
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from PIL import Image
from pydantic import BaseModel, Field

from .checkpoint import ModelBundle, load_checkpoint
from .errors import (
    ConfigurationError,
    ContinuousWordsError,
    DataError,
    DomainViolationError,
    PromptLengthError,
    TemplateParseError,
)
from .sampling import DEFAULT_GUIDANCE_SCALE, DEFAULT_STEPS

DEFAULT_QUEUE_DEPTH = 8


class GenerateRequest(BaseModel):
    template: str
    attributes: dict[str, float] = Field(default_factory=dict)
    seed: int = 0
    steps: int = Field(default=DEFAULT_STEPS, ge=1)
    guidance_scale: float = Field(default=DEFAULT_GUIDANCE_SCALE, ge=0.0)
    negative_mode: Literal["null_text", "identity"] = "null_text"


class SweepRequest(GenerateRequest):
    sweep_attribute: str
    start: float = Field(alias="from")
    stop: float = Field(alias="to")
    frames: int = Field(ge=2)

    model_config = {"populate_by_name": True}


class GenerationQueue:
    """Bounded FIFO queue executing jobs on one worker thread."""

    def __init__(self, depth: int = DEFAULT_QUEUE_DEPTH):
        if depth < 1:
            raise ConfigurationError("queue depth must be >= 1")
        self.jobs: queue.Queue = queue.Queue(maxsize=depth)
        self.worker = threading.Thread(target=self._run, daemon=True)
        self.worker.start()

    def _run(self) -> None:
        while True:
            fn, future = self.jobs.get()
            if fn is None:
                break
            if not future.set_running_or_notify_cancel():
                continue
            try:
                future.set_result(fn())
            except BaseException as e:
                future.set_exception(e)

    def submit(self, fn):
        future: Future = Future()
        self.jobs.put_nowait((fn, future))  # queue.Full propagates to the caller
        return future

    def shutdown(self) -> None:
        self.jobs.put((None, None))


def encode_png(image: np.ndarray | "object") -> str:
    """Lossless 8-bit RGB PNG, base64-encoded."""
    arr = np.asarray(image, dtype=np.float64)
    arr = np.clip(arr, 0.0, 1.0)
    if arr.ndim == 3:
        arr = np.moveaxis(arr, 0, -1)
    buf = io.BytesIO()
    Image.fromarray((arr * 255.0 + 0.5).astype(np.uint8), mode="RGB").save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def _error_response(status: int, detail: dict) -> JSONResponse:
    return JSONResponse(status_code=status, content={"detail": detail})


def create_app(
    checkpoint_path: str | None = None,
    model: ModelBundle | None = None,
    queue_depth: int = DEFAULT_QUEUE_DEPTH,
) -> FastAPI:
    """Build the service app around one checkpoint (path or loaded bundle)."""
    if model is None and checkpoint_path is not None:
        model = load_checkpoint(checkpoint_path)

    app = FastAPI(title="continuous-words service")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["*"], allow_headers=["*"]
    )
    jobs = GenerationQueue(queue_depth)
    app.state.model = model
    app.state.queue = jobs

    def run_job(fn):
        try:
            future = jobs.submit(fn)
        except queue.Full:
            return _error_response(429, {"message": "generation queue is full, retry later"})
        return future.result()

    @app.exception_handler(ContinuousWordsError)
    def handle_domain_errors(request, exc: ContinuousWordsError):
        if isinstance(exc, DomainViolationError):
            return _error_response(
                422,
                {
                    "message": str(exc),
                    "attribute": exc.attribute,
                    "min": exc.domain_min,
                    "max": exc.domain_max,
                },
            )
        if isinstance(exc, TemplateParseError):
            return _error_response(400, {"message": str(exc), "position": exc.position})
        if isinstance(exc, (DataError, ConfigurationError, PromptLengthError)):
            return _error_response(422, {"message": str(exc)})
        return _error_response(500, {"message": str(exc)})

    @app.get("/attributes")
    def attributes():
        if app.state.model is None:
            return _error_response(503, {"message": "no checkpoint loaded"})
        return {"attributes": app.state.model.registry.to_list()}

    @app.post("/generate")
    def generate(req: GenerateRequest):
        if app.state.model is None:
            return _error_response(503, {"message": "no checkpoint loaded"})
        bundle: ModelBundle = app.state.model

        def job():
            t0 = time.perf_counter()
            image, resolved = bundle.generate(
                req.template,
                req.attributes,
                seed=req.seed,
                steps=req.steps,
                guidance_scale=req.guidance_scale,
                negative_mode=req.negative_mode,
            )
            return {
                "image": encode_png(image.numpy()),
                "metadata": {
                    "seed": req.seed,
                    "steps": req.steps,
                    "guidance_scale": req.guidance_scale,
                    "negative_mode": req.negative_mode,
                    "template": req.template,
                    "attributes": resolved,
                    "elapsed_seconds": round(time.perf_counter() - t0, 4),
                },
            }

        return run_job(job)

    @app.post("/sweep")
    def sweep(req: SweepRequest):
        if app.state.model is None:
            return _error_response(503, {"message": "no checkpoint loaded"})
        bundle: ModelBundle = app.state.model

        def job():
            t0 = time.perf_counter()
            frames = bundle.sweep(
                req.template,
                req.attributes,
                sweep_attribute=req.sweep_attribute,
                start=req.start,
                stop=req.stop,
                frames=req.frames,
                seed=req.seed,
                steps=req.steps,
                guidance_scale=req.guidance_scale,
                negative_mode=req.negative_mode,
            )
            return {
                "frames": [
                    {"value": value, "image": encode_png(image.numpy())} for value, image in frames
                ],
                "metadata": {
                    "seed": req.seed,
                    "steps": req.steps,
                    "guidance_scale": req.guidance_scale,
                    "negative_mode": req.negative_mode,
                    "template": req.template,
                    "sweep_attribute": req.sweep_attribute,
                    "from": req.start,
                    "to": req.stop,
                    "frames": req.frames,
                    "elapsed_seconds": round(time.perf_counter() - t0, 4),
                },
            }

        return run_job(job)

    return app


def serve(
    checkpoint_path: str,
    host: str = "127.0.0.1",
    port: int = 8000,
    queue_depth: int = DEFAULT_QUEUE_DEPTH,
) -> None:
    """Run the service under uvicorn (blocking)."""
    import uvicorn

    app = create_app(checkpoint_path=checkpoint_path, queue_depth=queue_depth)
    uvicorn.run(app, host=host, port=port, log_level="info")
