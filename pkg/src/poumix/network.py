"""Residual MLP with a softmax head producing a partition of unity.

Architecture (depth five): affine projection d -> W, three residual blocks
h <- h + tanh(W h + b), affine head W -> M, softmax. Inputs are affinely
mapped to the unit box before the first layer; first-layer hyperplanes are
initialized so each one cuts the unit box. Gradients are hand-derived
reverse-mode for this fixed architecture.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError

NUM_RESIDUAL_BLOCKS = 3


@dataclass(frozen=True)
class AffineMap:
    """Per-coordinate map x -> x * scale + shift."""

    scale: np.ndarray
    shift: np.ndarray

    def apply(self, x: np.ndarray) -> np.ndarray:
        return x * self.scale + self.shift


def fit_input_affine(x) -> AffineMap:
    """Affine map taking the data bounding box onto the unit box.

    Zero-range coordinates map to the constant 0.5 so no coordinate can
    produce a division by zero.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 2 or x.shape[0] == 0:
        raise InputError("cannot fit an input map to an empty dataset")
    lo = x.min(axis=0)
    hi = x.max(axis=0)
    span = hi - lo
    degenerate = span <= 0
    safe_span = np.where(degenerate, 1.0, span)
    scale = np.where(degenerate, 0.0, 1.0 / safe_span)
    shift = np.where(degenerate, 0.5, -lo / safe_span)
    return AffineMap(scale=scale, shift=shift)


def identity_affine(dim: int) -> AffineMap:
    return AffineMap(scale=np.ones(dim), shift=np.zeros(dim))


@dataclass
class PartitionNet:
    """Parameters of the partition-of-unity network.

    ``first_w``/``first_b`` project d -> W, ``block_w``/``block_b`` hold the
    three residual blocks, ``head_w``/``head_b`` map W -> M before softmax.
    """

    input_dim: int
    width: int
    num_partitions: int
    affine: AffineMap
    first_w: np.ndarray   # (W, d)
    first_b: np.ndarray   # (W,)
    block_w: list         # 3 x (W, W)
    block_b: list         # 3 x (W,)
    head_w: np.ndarray    # (M, W)
    head_b: np.ndarray    # (M,)

    def parameters(self) -> dict:
        """Named parameter blocks, in a stable order."""
        params = {"first.w": self.first_w, "first.b": self.first_b}
        for k in range(NUM_RESIDUAL_BLOCKS):
            params[f"block{k}.w"] = self.block_w[k]
            params[f"block{k}.b"] = self.block_b[k]
        params["head.w"] = self.head_w
        params["head.b"] = self.head_b
        return params

    def set_parameters(self, params: dict) -> None:
        self.first_w = params["first.w"]
        self.first_b = params["first.b"]
        self.block_w = [params[f"block{k}.w"] for k in range(NUM_RESIDUAL_BLOCKS)]
        self.block_b = [params[f"block{k}.b"] for k in range(NUM_RESIDUAL_BLOCKS)]
        self.head_w = params["head.w"]
        self.head_b = params["head.b"]


@dataclass
class PartitionEval:
    """Forward evaluation with the activations needed for backprop.

    ``phi`` is (N, M), nonnegative, rows summing to 1. ``hidden`` holds the
    four W-wide activations (input projection and the output of each
    residual block); ``tanh_pre`` the tanh of each block preactivation.
    """

    phi: np.ndarray
    inputs_unit: np.ndarray
    hidden: list
    tanh_pre: list


def box_init(input_dim: int, width: int, num_partitions: int, seed: int,
             affine: AffineMap | None = None) -> PartitionNet:
    """Construct a network whose first-layer hyperplanes all cut the unit box.

    Each first-layer unit draws a direction k uniformly on the sphere and an
    anchor point p uniformly in the unit box, then scales so the unit's
    activation spans [-1, 1] over the box. Remaining layers use uniform
    Glorot-style ranges; head biases start at 0 so initial partitions are
    near-uniform. Deterministic for a fixed seed.
    """
    if input_dim < 1 or width < 1 or num_partitions < 1:
        raise InputError("input_dim, width and num_partitions must all be >= 1")
    rng = np.random.default_rng(seed)

    directions = rng.standard_normal((width, input_dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0] = 1.0
    directions /= norms
    anchors = rng.uniform(size=(width, input_dim))
    # Extreme values of k . (c - p) over box corners c decompose per
    # coordinate, so the 2^d corner sweep reduces to two sums.
    upper = np.sum(np.maximum(-directions * anchors, directions * (1.0 - anchors)), axis=1)
    lower = np.sum(np.minimum(-directions * anchors, directions * (1.0 - anchors)), axis=1)
    span = np.maximum(np.abs(upper), np.abs(lower))
    span[span == 0] = 1.0
    first_w = directions / span[:, None]
    first_b = -np.sum(directions * anchors, axis=1) / span

    block_w = []
    block_b = []
    bound = np.sqrt(6.0 / (width + width))
    for _ in range(NUM_RESIDUAL_BLOCKS):
        block_w.append(rng.uniform(-bound, bound, size=(width, width)))
        block_b.append(np.zeros(width))
    head_bound = np.sqrt(6.0 / (width + num_partitions))
    head_w = rng.uniform(-head_bound, head_bound, size=(num_partitions, width))
    head_b = np.zeros(num_partitions)

    if affine is None:
        affine = identity_affine(input_dim)
    return PartitionNet(
        input_dim=input_dim,
        width=width,
        num_partitions=num_partitions,
        affine=affine,
        first_w=first_w,
        first_b=first_b,
        block_w=block_w,
        block_b=block_b,
        head_w=head_w,
        head_b=head_b,
    )


def forward(net: PartitionNet, x) -> PartitionEval:
    """Evaluate the partition functions at points ``x`` (N, d)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != net.input_dim:
        raise DimensionError(
            f"points have dimension {x.shape[1]}, network expects {net.input_dim}"
        )
    if not np.all(np.isfinite(x)):
        raise InputError("input coordinates must be finite")

    xn = net.affine.apply(x)
    hidden = [xn @ net.first_w.T + net.first_b]
    tanh_pre = []
    for k in range(NUM_RESIDUAL_BLOCKS):
        t = np.tanh(hidden[k] @ net.block_w[k].T + net.block_b[k])
        tanh_pre.append(t)
        hidden.append(hidden[k] + t)
    logits = hidden[-1] @ net.head_w.T + net.head_b
    logits -= logits.max(axis=1, keepdims=True)
    phi = np.exp(logits)
    phi /= phi.sum(axis=1, keepdims=True)
    return PartitionEval(phi=phi, inputs_unit=xn, hidden=hidden, tanh_pre=tanh_pre)


def backward(net: PartitionNet, evaluation: PartitionEval, d_phi) -> dict:
    """Reverse-mode gradients of sum(d_phi * phi) w.r.t. every parameter.

    ``evaluation`` must come from ``forward`` on the same network; the result
    maps the same block names as ``PartitionNet.parameters``.
    """
    d_phi = np.asarray(d_phi, dtype=float)
    phi = evaluation.phi
    if d_phi.shape != phi.shape:
        raise DimensionError(
            f"d_phi has shape {d_phi.shape}, evaluation produced {phi.shape}"
        )
    if phi.shape[1] != net.num_partitions or evaluation.hidden[0].shape[1] != net.width:
        raise DimensionError("evaluation cache does not match this network")

    # Softmax Jacobian applied row-wise.
    d_logits = phi * (d_phi - np.sum(phi * d_phi, axis=1, keepdims=True))
    grads = {
        "head.w": d_logits.T @ evaluation.hidden[-1],
        "head.b": d_logits.sum(axis=0),
    }
    d_hidden = d_logits @ net.head_w
    for k in reversed(range(NUM_RESIDUAL_BLOCKS)):
        t = evaluation.tanh_pre[k]
        d_pre = d_hidden * (1.0 - t * t)
        grads[f"block{k}.w"] = d_pre.T @ evaluation.hidden[k]
        grads[f"block{k}.b"] = d_pre.sum(axis=0)
        d_hidden = d_hidden + d_pre @ net.block_w[k]
    grads["first.w"] = d_hidden.T @ evaluation.inputs_unit
    grads["first.b"] = d_hidden.sum(axis=0)
    return grads
