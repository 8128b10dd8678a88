"""HTTP service wrapping the experiment runner.

Experiments and pretune runs are long, so they execute as background
jobs: POST returns a job id, GET polls status.  Cheap operations
(synthetic data generation, OpenML fetch, report emission, health) are
synchronous.  The CLI drives this app through an in-process ASGI
transport by default, so no server needs to be running.
"""

from __future__ import annotations

import threading
import traceback
import uuid
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import __version__
from .data import fetch_openml, make_synthetic
from .experiment import (
    NJ_PRETUNE_BUDGET,
    ExperimentConfig,
    build_search_space,
    load_dataset,
    report,
    run_experiment,
    run_nj_pretune,
)
from .data import split_cv
from .filters import compute_filter_matrix
from .learners import LearnerSpec

app = FastAPI(title="sparsefront", version=__version__)

_jobs: dict[str, dict] = {}
_jobs_lock = threading.Lock()


class JobStatus(BaseModel):
    job_id: str
    kind: str
    status: str  # running | done | failed
    result: dict | None = None
    error: str | None = None


class SynthRequest(BaseModel):
    n: int = 300
    p: int = 50
    k_informative: int = 5
    noise_sd: float = 0.1
    seed: int = 0
    out_path: str


class SynthResponse(BaseModel):
    path: str
    n: int
    p: int
    informative: list[int]


class FetchRequest(BaseModel):
    did: int
    cache_dir: str = "cache"


class FetchResponse(BaseModel):
    did: int
    path: str
    n: int
    p: int


class ReportRequest(BaseModel):
    result_dir: str


class PretuneRequest(BaseModel):
    config: ExperimentConfig
    budget: int = NJ_PRETUNE_BUDGET


class JobRef(BaseModel):
    job_id: str


def _launch(kind: str, target) -> str:
    job_id = uuid.uuid4().hex[:12]
    with _jobs_lock:
        _jobs[job_id] = {"kind": kind, "status": "running", "result": None, "error": None}

    def runner():
        try:
            result = target()
            with _jobs_lock:
                _jobs[job_id].update(status="done", result=result)
        except Exception:
            with _jobs_lock:
                _jobs[job_id].update(status="failed", error=traceback.format_exc())

    threading.Thread(target=runner, daemon=True).start()
    return job_id


@app.get("/health")
def health():
    return {"status": "ok", "version": __version__}


@app.post("/experiments", response_model=JobRef)
def start_experiment(config: ExperimentConfig):
    def target():
        out_dir = run_experiment(config)
        failures = (out_dir / "failures.csv").exists()
        return {"result_dir": str(out_dir), "had_failures": failures}

    return JobRef(job_id=_launch("experiment", target))


@app.post("/pretune", response_model=JobRef)
def start_pretune(request: PretuneRequest):
    config = request.config

    def target():
        dataset = load_dataset(config.dataset, config.costs)
        space = build_search_space(config)
        learner = LearnerSpec(config.learner.kind, tuple(config.learner.command),
                              config.learner.defaults)
        outer = split_cv(dataset, config.outer_folds, config.stratified, config.seed)
        optim_idx, _ = next(outer.iter_train_test())
        d_optim = dataset.subset(optim_idx)
        filter_matrix = compute_filter_matrix(d_optim)
        inner_cv = split_cv(d_optim, config.inner_folds, config.stratified,
                            seed=config.seed * 10_000)
        rng = np.random.default_rng((config.seed, 0, 0))
        params = run_nj_pretune(d_optim, inner_cv, learner, filter_matrix, space,
                                rng, budget=request.budget, batch=config.batch)
        return {"hyperparams": params}

    return JobRef(job_id=_launch("pretune", target))


@app.get("/jobs/{job_id}", response_model=JobStatus)
def job_status(job_id: str):
    with _jobs_lock:
        job = _jobs.get(job_id)
        if job is None:
            raise HTTPException(status_code=404, detail=f"unknown job {job_id!r}")
        return JobStatus(job_id=job_id, **job)


@app.post("/datasets/synthetic", response_model=SynthResponse)
def make_synthetic_dataset(request: SynthRequest):
    dataset, informative = make_synthetic(request.n, request.p, request.k_informative,
                                          request.noise_sd, request.seed)
    path = Path(request.out_path)
    path.parent.mkdir(parents=True, exist_ok=True)
    dataset.to_csv(path)
    return SynthResponse(path=str(path), n=dataset.n, p=dataset.p,
                         informative=[int(i) for i in informative])


@app.post("/datasets/fetch", response_model=FetchResponse)
def fetch_dataset(request: FetchRequest):
    try:
        dataset = fetch_openml(request.did, request.cache_dir)
    except Exception as exc:
        raise HTTPException(status_code=502, detail=f"fetch failed: {exc}")
    return FetchResponse(did=request.did,
                         path=str(Path(request.cache_dir) / f"{request.did}.arff"),
                         n=dataset.n, p=dataset.p)


@app.post("/reports")
def make_report(request: ReportRequest):
    try:
        out = report(request.result_dir)
    except FileNotFoundError as exc:
        raise HTTPException(status_code=404, detail=str(exc))
    except ValueError as exc:
        raise HTTPException(status_code=422, detail=str(exc))
    return {"result_dir": str(out)}
