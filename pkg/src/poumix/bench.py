"""Benchmark studies and plot-ready data emission.

The convergence study fits a sequence of partition budgets and reports the
log-log slope of held-out RMSE against the refined partition count. The
snapshot study fits one shared partitioning to a whole snapshot database and
measures per-snapshot reconstruction error after refitting the polynomial
coefficients snapshot by snapshot. All CSV output is deterministic for a
fixed seed so studies can be diffed byte for byte.
"""

from __future__ import annotations

import os
import time
from dataclasses import dataclass, replace

import numpy as np

from .data import (Dataset, SnapshotDatabase, concat_snapshots, format_floats,
                   atomic_write_text, gen_sin1d, gen_sin2d, gen_tanh_noisy,
                   lift_to_4d)
from .errors import InputError, NumericalError
from .linalg import solve_least_squares
from .mixture import q_values
from .polynomials import basis_size, fit_weighted_ls
from .refine import classify
from .training import FittedModel, TrainConfig, fit, model_phi, predict_model

PROBLEMS = {
    "sin1d": gen_sin1d,
    "tanh-noisy": gen_tanh_noisy,
    "sin2d": gen_sin2d,
    "sin2d-lifted": lambda n, seed=0: lift_to_4d(gen_sin2d(n, seed)),
}

PROBE_POINTS = 512


def make_problem(name: str, n: int, seed: int) -> Dataset:
    if name not in PROBLEMS:
        raise InputError(f"unknown problem {name!r}; choices: {sorted(PROBLEMS)}")
    return PROBLEMS[name](n, seed=seed)


def rms_error(model: FittedModel, data: Dataset) -> float:
    """Root-mean-square error of the mean prediction."""
    mean = predict_model(model, data.x).mean
    return float(np.sqrt(np.mean((mean - data.y) ** 2)))


def fit_loglog_slope(counts, errors):
    """Least-squares slope of log(error) against log(count), with the
    standard error of the slope estimate."""
    counts = np.asarray(counts, dtype=float)
    errors = np.asarray(errors, dtype=float)
    if counts.shape[0] != errors.shape[0] or counts.shape[0] < 2:
        raise InputError("need at least 2 matching (count, error) pairs")
    if np.any(counts <= 0) or np.any(errors <= 0):
        raise InputError("counts and errors must be positive to take logs")
    lx = np.log(counts)
    ly = np.log(errors)
    design = np.column_stack([np.ones_like(lx), lx])
    coef = solve_least_squares(design, ly)
    n = lx.shape[0]
    if n == 2:
        return float(coef[1]), float("nan")
    ssr = float(np.sum((ly - design @ coef) ** 2))
    sxx = float(np.sum((lx - lx.mean()) ** 2))
    if sxx == 0:
        raise InputError("counts must not all be equal")
    stderr = np.sqrt(ssr / (n - 2) / sxx)
    return float(coef[1]), float(stderr)


@dataclass(frozen=True)
class ConvergenceRow:
    num_partitions: int
    refine_levels: int
    num_refined: int
    degree: int
    input_dim: int
    rmse: float         # held-out, median over repetitions
    rmse_train: float
    wall_time: float    # seconds per fit, median; kept out of the study CSV


@dataclass(frozen=True)
class ConvergenceRecord:
    rows: tuple
    slope: float
    slope_stderr: float
    failures: tuple = ()


def derive_seed(*path) -> int:
    """Stable per-(study, configuration, repetition) seed."""
    return int(np.random.SeedSequence(list(path)).generate_state(1)[0])


def convergence_study(problem: str, degree: int, configs, cfg: TrainConfig,
                      train_n: int = 1000, holdout_n: int = 2000,
                      reps: int = 3, seed: int = 0) -> ConvergenceRecord:
    """Fit every (partitions, refine levels) configuration and regress
    held-out RMSE against the refined partition count on log-log axes.

    Each configuration runs ``reps`` times on independently seeded data and
    networks; the median RMSE damps training noise. Configurations whose
    every repetition aborts are reported as failures and left out of the
    slope fit.
    """
    configs = [(int(m), int(r)) for m, r in configs]
    if len({m * 2 ** r for m, r in configs}) < 3:
        raise InputError("need at least 3 distinct refined partition counts")
    if reps < 1:
        raise InputError("reps must be >= 1")
    holdout = make_problem(problem, holdout_n, derive_seed(seed, 981379))

    rows = []
    failures = []
    for ci, (m, refine_levels) in enumerate(configs):
        per_rep = []
        for rep in range(reps):
            run_cfg = replace(cfg, num_partitions=m, refine_levels=refine_levels,
                              degree=degree, seed=derive_seed(seed, ci, rep, 0))
            data = make_problem(problem, train_n, derive_seed(seed, ci, rep, 1))
            start = time.perf_counter()
            try:
                model = fit(data, run_cfg)
            except NumericalError as err:
                failures.append(
                    f"partitions={m} refine_levels={refine_levels} rep={rep}: {err}"
                )
                continue
            per_rep.append((rms_error(model, holdout), rms_error(model, data),
                            time.perf_counter() - start))
        if not per_rep:
            failures.append(
                f"partitions={m} refine_levels={refine_levels}: all repetitions failed"
            )
            continue
        med = np.median(np.array(per_rep), axis=0)
        rows.append(ConvergenceRow(
            num_partitions=m, refine_levels=refine_levels,
            num_refined=m * 2 ** refine_levels, degree=degree,
            input_dim=holdout.input_dim, rmse=float(med[0]),
            rmse_train=float(med[1]), wall_time=float(med[2]),
        ))

    if len(rows) >= 2:
        slope, stderr = fit_loglog_slope([r.num_refined for r in rows],
                                         [max(r.rmse, 1e-300) for r in rows])
    else:
        slope, stderr = float("nan"), float("nan")
    return ConvergenceRecord(rows=tuple(rows), slope=slope, slope_stderr=stderr,
                             failures=tuple(failures))


def convergence_csv(record: ConvergenceRecord) -> str:
    """Study results as CSV text: one row per configuration, slope summary
    in trailing comment lines. Timings are left out so reruns are
    byte-identical; see timings_csv."""
    lines = ["num_partitions,refine_levels,num_refined,degree,input_dim,rmse,rmse_train"]
    for r in record.rows:
        lines.append(",".join(
            [str(r.num_partitions), str(r.refine_levels), str(r.num_refined),
             str(r.degree), str(r.input_dim)]
            + format_floats([r.rmse, r.rmse_train])
        ))
    for failure in record.failures:
        lines.append(f"# failed: {failure}")
    lines.append("# slope of log(rmse) vs log(num_refined): "
                 + format_floats([record.slope])[0]
                 + " (stderr " + format_floats([record.slope_stderr])[0] + ")")
    return "\n".join(lines) + "\n"


def timings_csv(record: ConvergenceRecord) -> str:
    """Wall-clock sidecar; not reproducible across runs by nature."""
    lines = ["num_partitions,refine_levels,wall_time_seconds"]
    for r in record.rows:
        lines.append(",".join(
            [str(r.num_partitions), str(r.refine_levels)] + format_floats([r.wall_time])
        ))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SnapshotRow:
    name: str
    rms_rel: float          # after per-snapshot coefficient refit
    worst_rel: float        # largest pointwise relative error, refit
    rms_rel_shared: float   # shared coefficients straight from the joint fit
    worst_rel_shared: float


@dataclass(frozen=True)
class SnapshotReport:
    rows: tuple
    num_nodes: int
    num_snapshots: int
    num_refined: int
    coeffs_per_partition: int
    dof_reduction: float                # nodes*K / (partitions * coeffs)
    dof_reduction_per_snapshot: float   # nodes / (partitions * coeffs)
    notes: tuple = ()


def snapshot_study(db: SnapshotDatabase, cfg: TrainConfig) -> SnapshotReport:
    """Fit one model to the concatenated snapshots, then refit polynomial
    coefficients per snapshot over the shared partitions.

    The shared partitioning is the compressed representation; per-snapshot
    errors are relative to each snapshot's RMS magnitude. Reported both for
    shared coefficients and for per-snapshot refits, with the matching
    degrees-of-freedom reduction factors.
    """
    if db.num_snapshots < 2:
        raise InputError("need at least 2 snapshots")
    if db.num_nodes < 1:
        raise InputError("snapshot database has no nodes")
    model = fit(concat_snapshots(db), cfg)
    phi = model_phi(model, db.x)
    shared_pred = predict_model(model, db.x).mean

    rows = []
    for k in range(db.num_snapshots):
        y = db.snapshots[k]
        scale = float(np.sqrt(np.mean(y ** 2)))
        if scale <= 0:
            scale = 1.0
        poly_k = fit_weighted_ls(phi, db.x, y, cfg.degree,
                                 affine=model.net.affine, weight_mode=cfg.weight_mode)
        refit_pred = q_values(poly_k, phi, db.x)
        rows.append(SnapshotRow(
            name=db.names[k],
            rms_rel=float(np.sqrt(np.mean((refit_pred - y) ** 2)) / scale),
            worst_rel=float(np.max(np.abs(refit_pred - y)) / scale),
            rms_rel_shared=float(np.sqrt(np.mean((shared_pred - y) ** 2)) / scale),
            worst_rel_shared=float(np.max(np.abs(shared_pred - y)) / scale),
        ))

    coeffs = basis_size(db.x.shape[1], cfg.degree)
    num_refined = model.forest.num_refined
    total = db.num_nodes * db.num_snapshots
    return SnapshotReport(
        rows=tuple(rows),
        num_nodes=db.num_nodes,
        num_snapshots=db.num_snapshots,
        num_refined=num_refined,
        coeffs_per_partition=coeffs,
        dof_reduction=total / (num_refined * coeffs),
        dof_reduction_per_snapshot=db.num_nodes / (num_refined * coeffs),
        notes=tuple(model.report.notes),
    )


def snapshot_csv(report: SnapshotReport) -> str:
    lines = ["snapshot,rms_rel,worst_rel,rms_rel_shared,worst_rel_shared"]
    for r in report.rows:
        lines.append(r.name + "," + ",".join(format_floats(
            [r.rms_rel, r.worst_rel, r.rms_rel_shared, r.worst_rel_shared]
        )))
    lines.append(f"# nodes={report.num_nodes} snapshots={report.num_snapshots} "
                 f"refined_partitions={report.num_refined} "
                 f"coeffs_per_partition={report.coeffs_per_partition}")
    lines.append("# dof reduction (shared coefficients): "
                 + format_floats([report.dof_reduction])[0])
    lines.append("# dof reduction (per-snapshot coefficients): "
                 + format_floats([report.dof_reduction_per_snapshot])[0])
    for note in report.notes:
        lines.append(f"# note: {note}")
    return "\n".join(lines) + "\n"


def emit_plot_data(model: FittedModel, data: Dataset, out_dir) -> list:
    """Write plot-ready CSVs: probe-grid predictions, partition functions,
    training-point classification, and the loss traces. Returns the paths."""
    os.makedirs(out_dir, exist_ok=True)
    if data.input_dim == 1:
        lo, hi = float(data.x.min()), float(data.x.max())
        probe = np.linspace(lo, hi, PROBE_POINTS)[:, None]
    else:
        probe = data.x
    coord_names = [f"x{d + 1}" for d in range(data.input_dim)]

    pred = predict_model(model, probe)
    phi = model_phi(model, probe)
    paths = []

    path = os.path.join(out_dir, "prediction.csv")
    lines = [",".join(coord_names + ["mean", "std"])]
    for i in range(probe.shape[0]):
        lines.append(",".join(format_floats(probe[i]) +
                              format_floats([pred.mean[i], pred.std[i]])))
    atomic_write_text(path, "\n".join(lines) + "\n")
    paths.append(path)

    path = os.path.join(out_dir, "partitions.csv")
    lines = [",".join(coord_names + [f"phi_{i + 1}" for i in range(phi.shape[1])])]
    for i in range(probe.shape[0]):
        lines.append(",".join(format_floats(probe[i]) + format_floats(phi[i])))
    atomic_write_text(path, "\n".join(lines) + "\n")
    paths.append(path)

    path = os.path.join(out_dir, "classification.csv")
    labels = classify(model_phi(model, data.x))
    lines = [",".join(coord_names + ["y", "label"])]
    for i in range(data.num_samples):
        lines.append(",".join(format_floats(data.x[i]) + format_floats([data.y[i]])
                              + [str(int(labels[i]))]))
    atomic_write_text(path, "\n".join(lines) + "\n")
    paths.append(path)

    path = os.path.join(out_dir, "loss_trace.csv")
    lines = ["stage,iteration,loss"]
    for stage, trace in ((1, model.report.stage1_trace), (3, model.report.stage3_trace)):
        for iteration, loss in trace:
            lines.append(f"{stage},{iteration}," + format_floats([loss])[0])
    atomic_write_text(path, "\n".join(lines) + "\n")
    paths.append(path)
    return paths
