"""Versioned text checkpoints for fitted models.

The on-disk form is a single JSON document with an explicit format name and
schema version. Loading is strict: unknown fields, missing fields, wrong
shapes or a wrong version are rejected outright, so a load either yields a
complete model or nothing. Floats survive a round trip bit-exactly.
"""

from __future__ import annotations

import json
import os

import numpy as np

from .errors import ParseError, SchemaError
from .data import atomic_write_text
from .mixture import NoiseModel
from .network import NUM_RESIDUAL_BLOCKS, AffineMap, PartitionNet
from .polynomials import PolynomialSet, basis_size
from .refine import RefinementForest, SplitNode
from .training import FitReport, FittedModel

FORMAT_NAME = "pou-mixture-checkpoint"
SCHEMA_VERSION = 1


def save_model(path, model: FittedModel) -> None:
    atomic_write_text(path, dumps_model(model))


def load_model(path) -> FittedModel:
    if not os.path.exists(path):
        raise ParseError("no such file", path=str(path))
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    try:
        return loads_model(text)
    except ParseError as err:
        raise ParseError(str(err), path=str(path)) from err


def dumps_model(model: FittedModel) -> str:
    return json.dumps(model_to_doc(model), indent=1, allow_nan=False) + "\n"


def loads_model(text: str) -> FittedModel:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f"invalid checkpoint JSON: {err.msg}", line=err.lineno) from err
    return model_from_doc(doc)


def model_to_doc(model: FittedModel) -> dict:
    """Checkpoint document as plain JSON-ready data."""
    net = model.net
    report = model.report
    return {
        "format": FORMAT_NAME,
        "version": SCHEMA_VERSION,
        "net": {
            "input_dim": net.input_dim,
            "width": net.width,
            "num_partitions": net.num_partitions,
            "affine": _affine_doc(net.affine),
            "params": {k: v.tolist() for k, v in net.parameters().items()},
        },
        "forest": {
            "num_partitions": model.forest.num_partitions,
            "depth": model.forest.depth,
            "trees": [
                [
                    {
                        "center": node.center.tolist(),
                        "normal": None if node.normal is None else node.normal.tolist(),
                    }
                    for node in tree
                ]
                for tree in model.forest.trees
            ],
        },
        "poly": {
            "degree": model.poly.degree,
            "input_dim": model.poly.input_dim,
            "affine": _affine_doc(model.poly.affine),
            "coeffs": model.poly.coeffs.tolist(),
            "empty": [bool(b) for b in model.poly.empty],
        },
        "noise_stage1": _noise_doc(model.noise_stage1),
        "noise_final": _noise_doc(model.noise_final),
        "report": {
            "stage1_trace": [[int(i), float(v)] for i, v in report.stage1_trace],
            "stage3_trace": [[int(i), float(v)] for i, v in report.stage3_trace],
            "stage1_mu": None if report.stage1_mu is None else report.stage1_mu.tolist(),
            "partition_counts": (
                None if report.partition_counts is None
                else [int(c) for c in report.partition_counts]
            ),
            "empty_partitions": [int(i) for i in report.empty_partitions],
            "notes": list(report.notes),
        },
    }


def model_from_doc(doc) -> FittedModel:
    _expect_fields(doc, ["format", "version", "net", "forest", "poly",
                         "noise_stage1", "noise_final", "report"], "checkpoint")
    if doc["format"] != FORMAT_NAME:
        raise SchemaError(f"not a model checkpoint (format {doc['format']!r})")
    if doc["version"] != SCHEMA_VERSION:
        raise SchemaError(
            f"checkpoint schema version {doc['version']!r}, expected {SCHEMA_VERSION}"
        )

    net = _net_from_doc(doc["net"])
    forest = _forest_from_doc(doc["forest"], net.num_partitions, net.input_dim)
    poly = _poly_from_doc(doc["poly"], net.input_dim, forest.num_refined)
    noise_stage1 = _noise_from_doc(doc["noise_stage1"], net.num_partitions, "noise_stage1")
    noise_final = _noise_from_doc(doc["noise_final"], forest.num_refined, "noise_final")
    report = _report_from_doc(doc["report"])
    return FittedModel(net=net, forest=forest, poly=poly,
                       noise_stage1=noise_stage1, noise_final=noise_final,
                       report=report)


def _affine_doc(affine: AffineMap) -> dict:
    return {"scale": affine.scale.tolist(), "shift": affine.shift.tolist()}


def _noise_doc(noise: NoiseModel) -> dict:
    return {"mu": noise.mu.tolist(), "log_sigma": noise.log_sigma.tolist()}


def _expect_fields(obj, fields, context) -> None:
    if not isinstance(obj, dict):
        raise SchemaError(f"{context} must be an object")
    for name in obj:
        if name not in fields:
            raise SchemaError(f"unknown field {name!r} in {context}")
    for name in fields:
        if name not in obj:
            raise SchemaError(f"missing field {name!r} in {context}")


def _array(value, shape, context) -> np.ndarray:
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError):
        raise SchemaError(f"{context} is not a numeric array") from None
    if arr.shape != shape:
        raise SchemaError(f"{context} has shape {arr.shape}, expected {shape}")
    if not np.all(np.isfinite(arr)):
        raise SchemaError(f"{context} contains non-finite values")
    return arr


def _count(value, context) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 0:
        raise SchemaError(f"{context} must be a nonnegative integer")
    return value


def _affine_from_doc(obj, dim, context) -> AffineMap:
    _expect_fields(obj, ["scale", "shift"], context)
    return AffineMap(scale=_array(obj["scale"], (dim,), f"{context}.scale"),
                     shift=_array(obj["shift"], (dim,), f"{context}.shift"))


def _net_from_doc(obj) -> PartitionNet:
    _expect_fields(obj, ["input_dim", "width", "num_partitions", "affine", "params"], "net")
    dim = _count(obj["input_dim"], "net.input_dim")
    width = _count(obj["width"], "net.width")
    m = _count(obj["num_partitions"], "net.num_partitions")
    affine = _affine_from_doc(obj["affine"], dim, "net.affine")

    shapes = {"first.w": (width, dim), "first.b": (width,)}
    for k in range(NUM_RESIDUAL_BLOCKS):
        shapes[f"block{k}.w"] = (width, width)
        shapes[f"block{k}.b"] = (width,)
    shapes["head.w"] = (m, width)
    shapes["head.b"] = (m,)
    _expect_fields(obj["params"], list(shapes), "net.params")
    params = {k: _array(obj["params"][k], shape, f"net.params.{k}")
              for k, shape in shapes.items()}
    return PartitionNet(
        input_dim=dim, width=width, num_partitions=m, affine=affine,
        first_w=params["first.w"], first_b=params["first.b"],
        block_w=[params[f"block{k}.w"] for k in range(NUM_RESIDUAL_BLOCKS)],
        block_b=[params[f"block{k}.b"] for k in range(NUM_RESIDUAL_BLOCKS)],
        head_w=params["head.w"], head_b=params["head.b"],
    )


def _forest_from_doc(obj, num_partitions, dim) -> RefinementForest:
    _expect_fields(obj, ["num_partitions", "depth", "trees"], "forest")
    if _count(obj["num_partitions"], "forest.num_partitions") != num_partitions:
        raise SchemaError("forest.num_partitions does not match the network")
    depth = _count(obj["depth"], "forest.depth")
    trees = obj["trees"]
    if not isinstance(trees, list) or len(trees) != num_partitions:
        raise SchemaError(f"forest.trees must list {num_partitions} trees")
    nodes_per_tree = (1 << depth) - 1
    parsed = []
    for i, tree in enumerate(trees):
        if not isinstance(tree, list) or len(tree) != nodes_per_tree:
            raise SchemaError(f"forest.trees[{i}] must hold {nodes_per_tree} nodes")
        nodes = []
        for j, node in enumerate(tree):
            context = f"forest.trees[{i}][{j}]"
            _expect_fields(node, ["center", "normal"], context)
            center = _array(node["center"], (dim,), f"{context}.center")
            normal = (None if node["normal"] is None
                      else _array(node["normal"], (dim,), f"{context}.normal"))
            nodes.append(SplitNode(center=center, normal=normal))
        parsed.append(tuple(nodes))
    return RefinementForest(num_partitions=num_partitions, depth=depth,
                            trees=tuple(parsed))


def _poly_from_doc(obj, dim, num_refined) -> PolynomialSet:
    _expect_fields(obj, ["degree", "input_dim", "affine", "coeffs", "empty"], "poly")
    degree = _count(obj["degree"], "poly.degree")
    if _count(obj["input_dim"], "poly.input_dim") != dim:
        raise SchemaError("poly.input_dim does not match the network")
    coeffs = _array(obj["coeffs"], (num_refined, basis_size(dim, degree)), "poly.coeffs")
    empty = obj["empty"]
    if (not isinstance(empty, list) or len(empty) != num_refined
            or any(not isinstance(b, bool) for b in empty)):
        raise SchemaError(f"poly.empty must list {num_refined} booleans")
    return PolynomialSet(degree=degree, input_dim=dim, coeffs=coeffs,
                         affine=_affine_from_doc(obj["affine"], dim, "poly.affine"),
                         empty=np.array(empty, dtype=bool))


def _noise_from_doc(obj, count, context) -> NoiseModel:
    _expect_fields(obj, ["mu", "log_sigma"], context)
    return NoiseModel(mu=_array(obj["mu"], (count,), f"{context}.mu"),
                      log_sigma=_array(obj["log_sigma"], (count,), f"{context}.log_sigma"))


def _trace_from_doc(value, context) -> list:
    if not isinstance(value, list):
        raise SchemaError(f"{context} must be a list of [iteration, loss] pairs")
    out = []
    for entry in value:
        if not isinstance(entry, list) or len(entry) != 2:
            raise SchemaError(f"{context} must be a list of [iteration, loss] pairs")
        out.append((int(entry[0]), float(entry[1])))
    return out


def _report_from_doc(obj) -> FitReport:
    _expect_fields(obj, ["stage1_trace", "stage3_trace", "stage1_mu",
                         "partition_counts", "empty_partitions", "notes"], "report")
    stage1_mu = obj["stage1_mu"]
    if stage1_mu is not None:
        if not isinstance(stage1_mu, list):
            raise SchemaError("report.stage1_mu must be a list or null")
        stage1_mu = _array(stage1_mu, (len(stage1_mu),), "report.stage1_mu")
    counts = obj["partition_counts"]
    if counts is not None:
        if not isinstance(counts, list):
            raise SchemaError("report.partition_counts must be a list or null")
        counts = np.array([_count(c, "report.partition_counts") for c in counts],
                          dtype=int)
    if not isinstance(obj["empty_partitions"], list) or not isinstance(obj["notes"], list):
        raise SchemaError("report.empty_partitions and report.notes must be lists")
    return FitReport(
        stage1_trace=_trace_from_doc(obj["stage1_trace"], "report.stage1_trace"),
        stage3_trace=_trace_from_doc(obj["stage3_trace"], "report.stage3_trace"),
        stage1_mu=stage1_mu,
        partition_counts=counts,
        empty_partitions=[_count(i, "report.empty_partitions") for i in obj["empty_partitions"]],
        notes=[str(n) for n in obj["notes"]],
    )
