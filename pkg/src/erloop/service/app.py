"""The HTTP service: thin FastAPI routes over plain handler functions.

The handlers take and return the pydantic models from schemas.py, so the CLI
can call them in-process without a server, and the routes stay one line
each.
"""

from __future__ import annotations

import logging
from dataclasses import replace
from statistics import fmean

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..entropy import result_entropy
from ..errors import AuthError, ErloopError, TransportError, UnparseableAnswer
from ..oracle import AnswerSource, SimulatedOracleSpec, estimate_capability, llm_asker, simulated_asker
from ..pipeline import (
    PerturbationSpec,
    RunConfig,
    compute_metrics,
    load_dataset,
    parse_records_text,
    parse_truth_text,
    render_curve,
    render_records_csv,
    render_truth_csv,
    run_loop,
    sample_labeled_pairs,
    sweep_initial,
    synth_generate,
)
from ..simgen import DEFAULT_THRESHOLDS, InitMode, MissingPolicy, SimConfig, SimFunction, sweep_result_set
from . import schemas

logger = logging.getLogger(__name__)

# Errors caused by the request itself map to 400; failures of the upstream
# oracle endpoint map to 502.
_UPSTREAM_ERRORS = (AuthError, TransportError, UnparseableAnswer)


def handle_sweep(request: schemas.SweepRequest) -> schemas.SweepResponse:
    dataset = parse_records_text(request.records_csv, source="<records_csv>")
    cfg = SimConfig(
        functions=SimFunction(request.sim_function),
        thresholds=tuple(request.thresholds) if request.thresholds is not None else DEFAULT_THRESHOLDS,
        missing_value_policy=MissingPolicy(request.missing_policy),
    )
    result_set = sweep_result_set(dataset, cfg, InitMode(request.init), request.seed)
    return schemas.SweepResponse(
        result_set=schemas.ResultSetModel.from_core(result_set),
        entropy_bits=result_entropy(result_set),
        n_partitions=len(result_set),
        n_records=len(dataset),
    )


def handle_run(request: schemas.RunRequest) -> schemas.RunResponse:
    cfg = RunConfig.from_mapping(request.config)
    dataset = None
    truth = None
    if request.records_csv is not None:
        dataset = parse_records_text(request.records_csv, source="<records_csv>")
    if request.truth_csv is not None:
        truth = parse_truth_text(request.truth_csv, source="<truth_csv>", dataset=dataset)
    run = run_loop(cfg, dataset=dataset, truth=truth)
    return schemas.RunResponse(
        summary=schemas.RunSummary.from_core(run),
        iterations=[schemas.IterationModel.from_core(log) for log in run.logs],
        curve_csv=render_curve(run.logs),
        manifest=run.manifest,
        result_set=schemas.ResultSetModel.from_core(run.result_set),
    )


def handle_eval(request: schemas.EvalRequest) -> schemas.EvalResponse:
    dataset = None
    if request.records_csv is not None:
        dataset = parse_records_text(request.records_csv, source="<records_csv>")
    truth = parse_truth_text(request.truth_csv, source="<truth_csv>", dataset=dataset)
    result_set = request.result_set.to_core()
    precision, recall = compute_metrics(result_set, truth)
    predicted = result_set.top().pairs
    return schemas.EvalResponse(
        precision=precision,
        recall=recall,
        truth_pairs=len(truth),
        predicted_pairs=len(predicted),
        empty_prediction=not predicted,
    )


def handle_probe(request: schemas.ProbeRequest) -> schemas.ProbeResponse:
    cfg = RunConfig.from_mapping(request.config)
    dataset = parse_records_text(request.records_csv, source="<records_csv>")
    truth = parse_truth_text(request.truth_csv, source="<truth_csv>", dataset=dataset)
    labeled = sample_labeled_pairs(dataset, truth, request.n, cfg.seed)
    if cfg.oracle is AnswerSource.SIMULATED:
        spec = SimulatedOracleSpec(truth=truth, theta=cfg.theta, seed=cfg.seed_oracle)
        oracle = simulated_asker(spec, dataset, cfg.cost_model())
    else:
        oracle = llm_asker(cfg.llm_spec(), dataset, cfg.cost_model())
    return schemas.ProbeResponse(
        theta_estimate=estimate_capability(labeled, oracle),
        sample_size=len(labeled),
    )


def handle_synth(request: schemas.SynthRequest) -> schemas.SynthResponse:
    pert = PerturbationSpec(
        typo_rate=request.typo_rate,
        abbrev_rate=request.abbrev_rate,
        drop_rate=request.drop_rate,
        max_extra_copies=request.max_extra_copies,
    )
    dataset, truth = synth_generate(request.entities, request.dup_rate, pert, request.seed)
    return schemas.SynthResponse(
        records_csv=render_records_csv(dataset),
        truth_csv=render_truth_csv(truth),
        n_records=len(dataset),
        n_truth_pairs=len(truth),
    )


def handle_bench(request: schemas.BenchRequest) -> schemas.BenchResponse:
    base = RunConfig.from_mapping(request.config)
    fixed_dataset = None
    fixed_truth = None
    if request.records_csv is not None:
        fixed_dataset = parse_records_text(request.records_csv, source="<records_csv>")
    if request.truth_csv is not None:
        fixed_truth = parse_truth_text(request.truth_csv, source="<truth_csv>", dataset=fixed_dataset)

    runs: list[schemas.BenchRunModel] = []
    finals: dict[str, list[float]] = {}
    for seed in request.seeds:
        seeded = replace(base, seed=seed)
        if fixed_dataset is not None:
            dataset, truth = fixed_dataset, fixed_truth
        elif seeded.records is not None:
            dataset, truth = load_dataset(seeded.records, seeded.truth)
        elif seeded.synth_entities is not None:
            dataset, truth = synth_generate(
                seeded.synth_entities, seeded.synth_dup_rate, seeded.perturbation(), seeded.seed_generation
            )
        else:
            raise ErloopError("bench needs a dataset source (records, synth, or CSV text)")
        initial = sweep_initial(seeded, dataset)
        for strategy in request.strategies:
            run = run_loop(
                replace(seeded, strategy=strategy),
                dataset=dataset,
                truth=truth,
                initial=initial,
            )
            points = [(0, run.initial_entropy_bits)] + [
                (log.cumulative_tokens, log.entropy_bits) for log in run.logs
            ]
            runs.append(
                schemas.BenchRunModel(
                    seed=seed,
                    strategy=strategy,
                    iterations=len(run.logs),
                    questions_asked=sum(len(log.questions) for log in run.logs),
                    tokens_spent=run.tokens_spent,
                    initial_entropy_bits=run.initial_entropy_bits,
                    final_entropy_bits=run.final.entropy_bits,
                    final_precision=schemas.optional_metric(run.final.precision),
                    final_recall=schemas.optional_metric(run.final.recall),
                    curve_points=points,
                )
            )
            finals.setdefault(strategy, []).append(run.final.entropy_bits)

    return schemas.BenchResponse(
        runs=runs,
        mean_final_entropy={strategy: fmean(values) for strategy, values in finals.items()},
    )


def create_app() -> FastAPI:
    app = FastAPI(title="erloop", version=__version__)

    @app.exception_handler(ErloopError)
    async def erloop_error_handler(request: Request, exc: ErloopError) -> JSONResponse:
        status = 502 if isinstance(exc, _UPSTREAM_ERRORS) else 400
        body = schemas.ErrorBody(error=type(exc).__name__, detail=str(exc))
        return JSONResponse(status_code=status, content=body.model_dump())

    # core-level validation (threshold ranges, perturbation rates, entity
    # counts) raises ValueError; those are bad requests, not server faults
    @app.exception_handler(ValueError)
    async def value_error_handler(request: Request, exc: ValueError) -> JSONResponse:
        body = schemas.ErrorBody(error="ValueError", detail=str(exc))
        return JSONResponse(status_code=400, content=body.model_dump())

    @app.get("/healthz")
    def healthz() -> dict:
        return {"status": "ok", "version": __version__}

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep(request: schemas.SweepRequest) -> schemas.SweepResponse:
        return handle_sweep(request)

    @app.post("/run", response_model=schemas.RunResponse)
    def run(request: schemas.RunRequest) -> schemas.RunResponse:
        return handle_run(request)

    @app.post("/eval", response_model=schemas.EvalResponse)
    def eval_(request: schemas.EvalRequest) -> schemas.EvalResponse:
        return handle_eval(request)

    @app.post("/probe", response_model=schemas.ProbeResponse)
    def probe(request: schemas.ProbeRequest) -> schemas.ProbeResponse:
        return handle_probe(request)

    @app.post("/synth", response_model=schemas.SynthResponse)
    def synth(request: schemas.SynthRequest) -> schemas.SynthResponse:
        return handle_synth(request)

    @app.post("/bench", response_model=schemas.BenchResponse)
    def bench(request: schemas.BenchRequest) -> schemas.BenchResponse:
        return handle_bench(request)

    return app


app = create_app()
