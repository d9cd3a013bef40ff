"""
FastAPI backend for the constrained quality-diversity experiments
Runs experiments and serves their summaries, histories and comparisons
"""

import logging
import os
import sys
from typing import List

from fastapi import Depends, FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

# Add parent directory to path to import core
sys.path.append(os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from core.config import get_config_summary, setup_logging, system_config
from core.errors import ConfigError, EvolutionError, SeedMismatch
from core.harness import ExperimentConfig
from backend.models import (
    CompareRequest,
    CompareResponse,
    ExperimentListItem,
    ExperimentSummary,
    HistoryResponse,
)
from backend.store import ResultStore

logger = logging.getLogger(__name__)

# Initialize FastAPI app
app = FastAPI(
    title="SIFA Experiments API",
    description="REST API for running and comparing FI-2Pop / CMAP-Elites experiments",
    version="1.0.0"
)

# CORS middleware - allow dashboards to read results
app.add_middleware(
    CORSMiddleware,
    allow_origins=["*"],
    allow_credentials=True,
    allow_methods=["*"],
    allow_headers=["*"],
)

# Result store (lazy loading)
result_store: ResultStore = None


def get_store() -> ResultStore:
    """Get or initialize the result store"""
    global result_store
    if result_store is None:
        result_store = ResultStore(system_config.results_dir)
        logger.info("Result store at %s", result_store.root)
    return result_store


def _client_error(e: EvolutionError) -> HTTPException:
    status = 422 if isinstance(e, (ConfigError, SeedMismatch)) else 400
    return HTTPException(status_code=status, detail=str(e))


@app.get("/")
async def root():
    """Root endpoint - API info"""
    return {
        "name": "SIFA Experiments API",
        "version": "1.0.0",
        "status": "running",
        "endpoints": {
            "health": "/api/health",
            "config": "/api/config",
            "experiments": "/api/experiments",
            "experiment": "/api/experiments/{slug}",
            "history": "/api/experiments/{slug}/history/{seed}",
            "compare": "/api/compare",
        }
    }


@app.get("/api/health")
async def health_check(store: ResultStore = Depends(get_store)):
    """Health check endpoint"""
    try:
        return {
            "status": "healthy",
            "results_dir": str(store.root),
            "summaries": len(store.list_summaries()),
        }
    except Exception as e:
        return JSONResponse(
            status_code=500,
            content={"status": "unhealthy", "error": str(e)}
        )


@app.get("/api/config")
async def get_config():
    """Active default configuration"""
    return get_config_summary()


@app.post("/api/experiments", response_model=ExperimentSummary)
def create_experiment(cfg: ExperimentConfig, store: ResultStore = Depends(get_store)):
    """
    Run an experiment synchronously

    Args:
        cfg: Full experiment configuration

    Returns:
        The summary written for the method
    """
    try:
        return store.run(cfg)
    except EvolutionError as e:
        raise _client_error(e)
    except Exception as e:
        logger.exception("Experiment failed")
        raise HTTPException(status_code=500, detail=f"Error running experiment: {str(e)}")


@app.get("/api/experiments", response_model=List[ExperimentListItem])
def list_experiments(store: ResultStore = Depends(get_store)):
    """All summaries in the results directory"""
    try:
        return store.list_summaries()
    except EvolutionError as e:
        raise _client_error(e)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error listing experiments: {str(e)}")


@app.get("/api/experiments/{slug}", response_model=ExperimentSummary)
def get_experiment(slug: str, store: ResultStore = Depends(get_store)):
    """
    One summary

    Args:
        slug: Method slug, e.g. mean-fi2pop
    """
    try:
        summary = store.get_summary(slug)
        if summary is None:
            raise HTTPException(status_code=404, detail=f"No summary for {slug}")
        return summary
    except HTTPException:
        raise
    except EvolutionError as e:
        raise _client_error(e)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error reading summary: {str(e)}")


@app.get("/api/experiments/{slug}/history/{seed}", response_model=HistoryResponse)
def get_history(slug: str, seed: int, store: ResultStore = Depends(get_store)):
    """Per-generation rows of one seed"""
    try:
        rows = store.get_history(slug, seed)
        if rows is None:
            raise HTTPException(status_code=404, detail=f"No history for {slug} seed {seed}")
        return HistoryResponse(slug=slug, seed=seed, rows=rows)
    except HTTPException:
        raise
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error reading history: {str(e)}")


@app.post("/api/compare", response_model=CompareResponse)
def compare_experiments(request: CompareRequest, store: ResultStore = Depends(get_store)):
    """
    Mean ± std table and pairwise sign tests

    Returns:
        404 when a slug has no summary, 422 on mismatched seed sets
    """
    try:
        report = store.compare(request.slugs)
        if report is None:
            raise HTTPException(status_code=404, detail="Some summaries are missing")
        return report.to_dict()
    except HTTPException:
        raise
    except EvolutionError as e:
        raise _client_error(e)
    except Exception as e:
        raise HTTPException(status_code=500, detail=f"Error comparing experiments: {str(e)}")


if __name__ == "__main__":
    import uvicorn

    setup_logging()
    logger.info("Starting SIFA Experiments API at http://localhost:8000 (docs at /docs)")

    uvicorn.run(
        app,
        host="0.0.0.0",
        port=8000,
        log_level="info"
    )
