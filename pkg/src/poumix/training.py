"""Adam optimizer and the three-stage fitting pipeline.

Stage 1 trains the partition network jointly with the noise means and
spreads on the raw labels (no deterministic component). The partitions are
then frozen, refined by PCA bisection, and per-partition polynomials are
fitted by weighted least squares. Stage 3 re-estimates only the noise
spreads around the polynomial predictions, with the means pinned at zero
(constant polynomial terms make them redundant).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InputError, NonFiniteGradientError, TrainingAbort
from .mixture import (NoiseModel, Prediction, init_noise, nll_gradients,
                      nll_loss, predict, q_values, sigma_floor)
from .network import PartitionNet, backward, box_init, fit_input_affine, forward
from .polynomials import WEIGHT_MODES, PolynomialSet, fit_weighted_ls
from .refine import RefinementForest, build_forest, classify, refine_phi


@dataclass
class AdamState:
    """First/second moment accumulators keyed like the parameter dict."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)


def init_adam(params: dict, learning_rate: float) -> AdamState:
    state = AdamState(learning_rate=learning_rate)
    state.m = {k: np.zeros_like(p) for k, p in params.items()}
    state.v = {k: np.zeros_like(p) for k, p in params.items()}
    return state


def adam_step(state: AdamState, params: dict, grads: dict) -> dict:
    """One bias-corrected Adam update. Returns new parameter arrays; the
    state's accumulators and step count advance in place."""
    for name in params:
        if not np.all(np.isfinite(grads[name])):
            raise NonFiniteGradientError(name)
    state.step += 1
    t = state.step
    scale1 = 1.0 - state.beta1 ** t
    scale2 = 1.0 - state.beta2 ** t
    out = {}
    for name, p in params.items():
        g = grads[name]
        state.m[name] = state.beta1 * state.m[name] + (1.0 - state.beta1) * g
        state.v[name] = state.beta2 * state.v[name] + (1.0 - state.beta2) * g * g
        m_hat = state.m[name] / scale1
        v_hat = state.v[name] / scale2
        out[name] = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)
    return out


@dataclass(frozen=True)
class TrainConfig:
    num_partitions: int
    degree: int = 1
    refine_levels: int = 0
    stage1_iters: int = 10000
    stage3_iters: int = 500
    learning_rate: float = 0.01
    width: int = 64
    seed: int = 0
    weight_mode: str = "phi-squared"
    init_sigma_scale: float = 1.0
    trace_every: int = 10

    def validate(self) -> None:
        if self.num_partitions < 1 or self.width < 1:
            raise InputError("num_partitions and width must be >= 1")
        if min(self.degree, self.refine_levels, self.stage1_iters, self.stage3_iters) < 0:
            raise InputError("degree, refine_levels and iteration counts must be >= 0")
        if self.learning_rate <= 0:
            raise InputError("learning_rate must be > 0")
        if self.init_sigma_scale <= 0:
            raise InputError("init_sigma_scale must be > 0")
        if self.trace_every < 1:
            raise InputError("trace_every must be >= 1")
        if self.weight_mode not in WEIGHT_MODES:
            raise InputError(
                f"weight_mode must be one of {WEIGHT_MODES}, got {self.weight_mode!r}"
            )


@dataclass
class FitReport:
    """Training diagnostics: loss traces, the stage-1 noise means that the
    polynomial constants supersede, per-partition point counts, and any
    degeneracies hit along the way."""

    stage1_trace: list = field(default_factory=list)
    stage3_trace: list = field(default_factory=list)
    stage1_mu: np.ndarray | None = None
    partition_counts: np.ndarray | None = None
    empty_partitions: list = field(default_factory=list)
    notes: list = field(default_factory=list)


@dataclass
class FittedModel:
    net: PartitionNet
    forest: RefinementForest
    poly: PolynomialSet
    noise_stage1: NoiseModel
    noise_final: NoiseModel
    report: FitReport


def smoothed_trace(trace, window: int = 10) -> list:
    """Block averages of a loss trace; the tail block may be shorter.

    With the default every-10-iterations recording, window=10 spans 100
    optimizer steps per block.
    """
    vals = [float(entry[1]) if isinstance(entry, (tuple, list)) else float(entry)
            for entry in trace]
    if not vals:
        return []
    return [float(np.mean(vals[i:i + window]))
            for i in range(0, len(vals), window)]


def train_stage1(data: Dataset, cfg: TrainConfig):
    """Joint full-batch training of the partition network and the noise
    model against the raw labels. Returns (net, noise, loss trace)."""
    cfg.validate()
    x, y = data.x, data.y
    if x.shape[0] < cfg.num_partitions:
        raise InputError(
            f"{x.shape[0]} samples cannot support {cfg.num_partitions} partitions"
        )
    affine = fit_input_affine(x)
    net = box_init(x.shape[1], cfg.width, cfg.num_partitions, cfg.seed, affine)
    noise = init_noise(y, cfg.num_partitions, cfg.init_sigma_scale)
    floor = np.log(sigma_floor(y))

    params = dict(net.parameters())
    params["noise.mu"] = noise.mu
    params["noise.log_sigma"] = noise.log_sigma
    net_keys = [k for k in params if not k.startswith("noise.")]
    state = init_adam(params, cfg.learning_rate)
    q = np.zeros(x.shape[0])

    trace = []
    last_good = params
    for i in range(cfg.stage1_iters):
        evaluation = forward(net, x)
        noise = NoiseModel(mu=params["noise.mu"], log_sigma=params["noise.log_sigma"])
        loss = nll_loss(evaluation.phi, y, q, noise)
        if not np.isfinite(loss):
            raise TrainingAbort(1, iteration=i, block="loss", last_good=last_good)
        if i % cfg.trace_every == 0:
            trace.append((i, loss))
        d_phi, d_mu, d_log_sigma, _ = nll_gradients(evaluation.phi, y, q, noise)
        grads = backward(net, evaluation, d_phi)
        grads["noise.mu"] = d_mu
        grads["noise.log_sigma"] = d_log_sigma
        try:
            new_params = adam_step(state, params, grads)
        except NonFiniteGradientError as err:
            raise TrainingAbort(1, iteration=i, block=err.block, last_good=params) from err
        new_params["noise.log_sigma"] = np.maximum(new_params["noise.log_sigma"], floor)
        last_good = params
        params = new_params
        net.set_parameters({k: params[k] for k in net_keys})

    noise = NoiseModel(mu=params["noise.mu"], log_sigma=params["noise.log_sigma"])
    trace.append((cfg.stage1_iters, nll_loss(forward(net, x).phi, y, q, noise)))
    return net, noise, trace


def train_stage3(data: Dataset, net: PartitionNet, forest: RefinementForest,
                 poly: PolynomialSet, cfg: TrainConfig):
    """Re-estimate the per-partition noise spreads around the polynomial
    predictions. Only log sigma moves; means stay exactly zero. Returns
    (noise, loss trace)."""
    cfg.validate()
    x, y = data.x, data.y
    phi = refine_phi(forward(net, x).phi, forest, x)
    q = q_values(poly, phi, x)
    m_tot = phi.shape[1]
    floor = np.log(sigma_floor(y))

    # Start each spread at its partition's weighted RMS residual (the
    # single-Gaussian MLE), floored; partitions with no weight get the
    # global RMS residual.
    resid2 = (y - q) ** 2
    weight = phi.sum(axis=0)
    global_rms = np.sqrt(max(float(resid2.mean()), np.exp(2 * floor)))
    with np.errstate(invalid="ignore", divide="ignore"):
        per_part = np.sqrt(phi.T @ resid2 / weight)
    sigma0 = np.where(weight > 1e-12, per_part, global_rms)
    log_sigma = np.log(np.maximum(sigma0, np.exp(floor)))

    mu = np.zeros(m_tot)
    params = {"noise.log_sigma": log_sigma}
    state = init_adam(params, cfg.learning_rate)
    trace = []
    last_good = params
    for i in range(cfg.stage3_iters):
        noise = NoiseModel(mu=mu, log_sigma=params["noise.log_sigma"])
        loss = nll_loss(phi, y, q, noise)
        if not np.isfinite(loss):
            raise TrainingAbort(3, iteration=i, block="loss", last_good=last_good)
        if i % cfg.trace_every == 0:
            trace.append((i, loss))
        _, _, d_log_sigma, _ = nll_gradients(phi, y, q, noise)
        try:
            new_params = adam_step(state, params, {"noise.log_sigma": d_log_sigma})
        except NonFiniteGradientError as err:
            raise TrainingAbort(3, iteration=i, block=err.block, last_good=params) from err
        new_params["noise.log_sigma"] = np.maximum(new_params["noise.log_sigma"], floor)
        last_good = params
        params = new_params

    noise = NoiseModel(mu=mu, log_sigma=params["noise.log_sigma"])
    trace.append((cfg.stage3_iters, nll_loss(phi, y, q, noise)))
    return noise, trace


def fit(data: Dataset, cfg: TrainConfig) -> FittedModel:
    """Full pipeline: stage-1 training, PCA bisection to the requested
    depth, weighted polynomial fit, stage-3 spread re-estimation.
    Deterministic for a fixed config."""
    cfg.validate()
    net, noise_stage1, stage1_trace = train_stage1(data, cfg)
    forest = build_forest(net, data.x, cfg.refine_levels)
    phi = refine_phi(forward(net, data.x).phi, forest, data.x)
    poly = fit_weighted_ls(phi, data.x, data.y, cfg.degree,
                           affine=net.affine, weight_mode=cfg.weight_mode)
    noise_final, stage3_trace = train_stage3(data, net, forest, poly, cfg)

    report = FitReport(stage1_trace=stage1_trace, stage3_trace=stage3_trace,
                       stage1_mu=noise_stage1.mu.copy())
    report.partition_counts = np.bincount(classify(phi), minlength=phi.shape[1])
    report.empty_partitions = list(np.flatnonzero(poly.empty))
    if report.empty_partitions:
        report.notes.append(
            f"partitions {report.empty_partitions} carried no weight; fitted as zero"
        )
    small = np.flatnonzero(report.partition_counts < 2)
    if small.size:
        report.notes.append(
            f"partitions {list(small)} held fewer than 2 points during refinement"
        )
    return FittedModel(net=net, forest=forest, poly=poly,
                       noise_stage1=noise_stage1, noise_final=noise_final,
                       report=report)


def model_phi(model: FittedModel, x) -> np.ndarray:
    """Refined partition functions of a fitted model at new points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return refine_phi(forward(model.net, x).phi, model.forest, x)


def predict_model(model: FittedModel, x) -> Prediction:
    """Mean, variance and std of a fitted model at new points."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    phi = model_phi(model, x)
    q = q_values(model.poly, phi, x)
    return predict(phi, q, model.noise_final)


