"""
FastAPI service for the lattice precoder toolkit.

Exposes feedback budgets, Doppler coefficients, lattice all-pass design
from unitary nodes and frequency-response evaluation of saved designs.

Usage:
    python main.py
    # Then open http://localhost:8000/docs in your browser
"""

import asyncio
import os

import numpy as np
from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from allpass import dumps_params, loads_params, snip_design_report
from channel import DopplerParams, doppler_alpha, doppler_frequency
from config import DEFAULT_CARRIER_HZ, DEFAULT_SYMBOL_S, DESIGN_TOL, configure_logging
from errors import InvalidInput, PrecoderError
from feedback import bit_budget
from lattice import frequency_response_grid

configure_logging()

app = FastAPI(title="Lattice Precoder Feedback", version="1.0.0")


# --- Request/Response Models ---


class NodeModel(BaseModel):
    omega: float
    re: list[list[float]]
    im: list[list[float]]


class DesignRequest(BaseModel):
    nodes: list[NodeModel] = Field(min_length=1)
    order: int = Field(ge=1)
    tol: float = Field(DESIGN_TOL, gt=0)
    match: str = "exact"


class DesignResponse(BaseModel):
    status: str
    params: str
    residual: float
    iterations: int
    restarts: int


class EvaluateRequest(BaseModel):
    params: str
    omegas: list[float] = Field(min_length=1)


class EvaluateResponse(BaseModel):
    status: str
    re: list[list[list[float]]]
    im: list[list[list[float]]]


@app.exception_handler(PrecoderError)
async def precoder_error_handler(request: Request, exc: PrecoderError):
    return JSONResponse(
        status_code=422,
        content={"status": "error", "error": f"{type(exc).__name__}: {exc}"},
    )


# --- API Endpoints ---


@app.get("/budget/{scheme}")
async def budget(scheme: str, m: int, n: int):
    """Feedback bits per frame for a scheme at MIMO size m with n pilots, taps or matrices."""
    return {"scheme": scheme, "m": m, "n": n, "bits": bit_budget(scheme, m, n)}


@app.get("/doppler")
async def doppler(
    speed_kmh: float,
    carrier_hz: float = DEFAULT_CARRIER_HZ,
    symbol_s: float = DEFAULT_SYMBOL_S,
):
    params = DopplerParams(speed_kmh, carrier_hz, symbol_s)
    return {"doppler_hz": doppler_frequency(params), "alpha": doppler_alpha(params)}


def _run_design(request: DesignRequest) -> DesignResponse:
    nodes = [(n.omega, np.array(n.re) + 1j * np.array(n.im)) for n in request.nodes]
    report = snip_design_report(nodes, request.order, tol=request.tol, match=request.match)
    return DesignResponse(
        status="success",
        params=dumps_params(report.params),
        residual=report.residual,
        iterations=report.iterations,
        restarts=report.restarts,
    )


@app.post("/design", response_model=DesignResponse)
async def design(request: DesignRequest):
    """
    Fit a stable lattice all-pass filter through the given unitary nodes.
    Returns the filter in the lattice-params text format.
    """
    # The fit is CPU-bound; keep it off the event loop
    return await asyncio.to_thread(_run_design, request)


@app.post("/evaluate", response_model=EvaluateResponse)
async def evaluate(request: EvaluateRequest):
    """Frequency response of a serialized lattice filter at each requested omega."""
    params = loads_params(request.params)
    if any(not np.isfinite(w) for w in request.omegas):
        raise InvalidInput("Frequencies must be finite.")
    G = frequency_response_grid(params, request.omegas)
    return EvaluateResponse(status="success", re=G.real.tolist(), im=G.imag.tolist())


@app.get("/health")
async def health():
    """Health check endpoint."""
    return {"status": "healthy", "version": "1.0.0"}


if __name__ == "__main__":
    import uvicorn

    port = int(os.environ.get("PORT", 8000))
    uvicorn.run("main:app", host="0.0.0.0", port=port, reload=False)
