"""FastAPI application implementing the /v1 scoring wire protocol.

GET /v1/meta   -> {"num_classes": N, "input_shape": [C, H, W]}
POST /v1/scores with {"shape": [C,H,W], "data": [f32...]} -> {"scores": [...]}
Malformed requests get HTTP 400 with {"error": string}.
"""

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .model import ServedModel


class ScoresRequest(BaseModel):
    shape: list[int]
    data: list[float]


def create_app(model: ServedModel) -> FastAPI:
    app = FastAPI(title="stba-modelserver")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=400, content={"error": str(exc)})

    @app.get("/v1/meta")
    def meta():
        return {
            "num_classes": model.num_classes,
            "input_shape": list(model.input_shape),
        }

    @app.post("/v1/scores")
    def scores(body: ScoresRequest):
        shape = tuple(body.shape)
        if shape != tuple(model.input_shape):
            return JSONResponse(
                status_code=400,
                content={"error": f"shape {list(shape)} != {list(model.input_shape)}"},
            )
        expected = int(np.prod(shape))
        if len(body.data) != expected:
            return JSONResponse(
                status_code=400,
                content={
                    "error": f"data length {len(body.data)} != {expected} for shape {list(shape)}"
                },
            )
        # requests carry 32-bit data; scoring runs in native double precision
        img = np.asarray(body.data, dtype=np.float32).astype(np.float64).reshape(shape)
        out = np.asarray(model.scorer(img), dtype=np.float64)
        if out.shape != (model.num_classes,):
            return JSONResponse(
                status_code=500, content={"error": "scorer returned wrong length"}
            )
        return {"scores": [float(v) for v in out]}

    return app
