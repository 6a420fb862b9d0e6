"""HTTP compute service around the fitting pipeline.

Stateless by design: requests carry data arrays or checkpoint documents in
their bodies and responses carry the results, so the service never touches
the filesystem. The command-line tool is a thin client of these endpoints
and does all file I/O on its own side.
"""

from __future__ import annotations

import numpy as np
from fastapi import FastAPI
from fastapi.responses import JSONResponse
from pydantic import BaseModel, Field

from .bench import (convergence_csv, convergence_study, snapshot_csv,
                    snapshot_study, timings_csv)
from .checkpoint import model_from_doc, model_to_doc
from .data import SnapshotDatabase, make_dataset
from .errors import (DimensionError, InputError, NumericalError, ParseError,
                     SchemaError, TrainingAbort)
from .refine import classify
from .training import TrainConfig, fit, model_phi, predict_model


class TrainOptions(BaseModel):
    num_partitions: int = 4
    degree: int = 1
    refine_levels: int = 0
    stage1_iters: int = 10000
    stage3_iters: int = 500
    learning_rate: float = 0.01
    width: int = 64
    seed: int = 0
    weight_mode: str = "phi-squared"
    init_sigma_scale: float = 1.0

    def to_config(self) -> TrainConfig:
        return TrainConfig(**self.model_dump())


class DataIn(BaseModel):
    x: list[list[float]]
    y: list[float]


class FitRequest(BaseModel):
    data: DataIn
    config: TrainOptions = Field(default_factory=TrainOptions)


class PredictRequest(BaseModel):
    checkpoint: dict
    x: list[list[float]]


class ConvergeRequest(BaseModel):
    problem: str
    degree: int = 1
    configs: list[list[int]]
    train_n: int = 1000
    holdout_n: int = 2000
    reps: int = 3
    seed: int = 0
    options: TrainOptions = Field(default_factory=TrainOptions)


class SnapshotsRequest(BaseModel):
    x: list[list[float]]
    snapshots: list[list[float]]
    names: list[str] | None = None
    config: TrainOptions = Field(default_factory=TrainOptions)


def _error_handler(status: int, type_name: str):
    async def handle(request, exc):
        payload = {"detail": str(exc), "type": type_name}
        if isinstance(exc, TrainingAbort):
            payload["stage"] = exc.stage
            payload["iteration"] = exc.iteration
            payload["block"] = exc.block
        return JSONResponse(status_code=status, content=payload)

    return handle


def create_app() -> FastAPI:
    app = FastAPI(title="partition-mixture regression service")

    app.add_exception_handler(InputError, _error_handler(422, "input"))
    app.add_exception_handler(DimensionError, _error_handler(422, "dimension"))
    app.add_exception_handler(ParseError, _error_handler(422, "parse"))
    app.add_exception_handler(SchemaError, _error_handler(422, "schema"))
    app.add_exception_handler(TrainingAbort, _error_handler(500, "training-abort"))
    app.add_exception_handler(NumericalError, _error_handler(500, "numerical"))

    @app.get("/health")
    def health():
        return {"status": "ok"}

    @app.post("/fit")
    def fit_endpoint(req: FitRequest):
        data = make_dataset(req.data.x, req.data.y)
        model = fit(data, req.config.to_config())
        report = model.report
        return {
            "checkpoint": model_to_doc(model),
            "summary": {
                "stage1_final_loss": report.stage1_trace[-1][1],
                "stage3_final_loss": report.stage3_trace[-1][1],
                "num_refined": model.forest.num_refined,
                "partition_counts": [int(c) for c in report.partition_counts],
                "empty_partitions": [int(i) for i in report.empty_partitions],
                "notes": list(report.notes),
            },
        }

    @app.post("/predict")
    def predict_endpoint(req: PredictRequest):
        model = model_from_doc(req.checkpoint)
        x = np.asarray(req.x, dtype=float)
        if x.ndim != 2:
            raise DimensionError("points must form a 2D array")
        pred = predict_model(model, x)
        labels = classify(model_phi(model, x))
        return {
            "mean": pred.mean.tolist(),
            "std": pred.std.tolist(),
            "variance": pred.variance.tolist(),
            "label": [int(i) for i in labels],
        }

    @app.post("/converge")
    def converge_endpoint(req: ConvergeRequest):
        for pair in req.configs:
            if len(pair) != 2:
                raise InputError("each config must be a [partitions, refine_levels] pair")
        record = convergence_study(
            req.problem, req.degree, [tuple(p) for p in req.configs],
            req.options.to_config(), train_n=req.train_n,
            holdout_n=req.holdout_n, reps=req.reps, seed=req.seed,
        )
        return {
            "rows": [
                {
                    "num_partitions": r.num_partitions,
                    "refine_levels": r.refine_levels,
                    "num_refined": r.num_refined,
                    "degree": r.degree,
                    "input_dim": r.input_dim,
                    "rmse": r.rmse,
                    "rmse_train": r.rmse_train,
                    "wall_time": r.wall_time,
                }
                for r in record.rows
            ],
            "slope": _json_float(record.slope),
            "slope_stderr": _json_float(record.slope_stderr),
            "failures": list(record.failures),
            "csv": convergence_csv(record),
            "timings_csv": timings_csv(record),
        }

    @app.post("/snapshots")
    def snapshots_endpoint(req: SnapshotsRequest):
        x = np.asarray(req.x, dtype=float)
        snaps = [np.asarray(s, dtype=float) for s in req.snapshots]
        if x.ndim != 2 or x.shape[0] < 1:
            raise DimensionError("node coordinates must form a nonempty 2D array")
        for k, s in enumerate(snaps):
            if s.shape != (x.shape[0],):
                raise DimensionError(
                    f"snapshot {k + 1} has {s.shape[0] if s.ndim == 1 else '?'} values, "
                    f"expected {x.shape[0]}"
                )
        names = req.names or [f"y_{k + 1}" for k in range(len(snaps))]
        if len(names) != len(snaps):
            raise InputError(f"{len(names)} names for {len(snaps)} snapshots")
        db = SnapshotDatabase(x=x, snapshots=np.array(snaps), names=tuple(names))
        report = snapshot_study(db, req.config.to_config())
        return {
            "rows": [
                {
                    "name": r.name,
                    "rms_rel": r.rms_rel,
                    "worst_rel": r.worst_rel,
                    "rms_rel_shared": r.rms_rel_shared,
                    "worst_rel_shared": r.worst_rel_shared,
                }
                for r in report.rows
            ],
            "num_nodes": report.num_nodes,
            "num_snapshots": report.num_snapshots,
            "num_refined": report.num_refined,
            "coeffs_per_partition": report.coeffs_per_partition,
            "dof_reduction": report.dof_reduction,
            "dof_reduction_per_snapshot": report.dof_reduction_per_snapshot,
            "notes": list(report.notes),
            "csv": snapshot_csv(report),
        }

    return app


def _json_float(value: float):
    """JSON has no NaN; studies with too few rows report a null slope."""
    return None if not np.isfinite(value) else value


app = create_app()
