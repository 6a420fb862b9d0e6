"""Partition refinement by recursive PCA bisection.

Each original partition owns a binary tree of splitting hyperplanes. A split
passes through the center of mass of the points classified to the partition,
normal to their top principal direction. Refined partition functions are the
original ones multiplied by half-space indicators along the root path, so
sibling functions sum to the parent exactly and the partition of unity is
preserved bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError
from .linalg import sym_eig
from .network import PartitionNet, forward

SIGN_EPS = 1e-12


@dataclass(frozen=True)
class SplitNode:
    """One splitting hyperplane: points with (x - center) . normal <= 0 go to
    the minus child. ``normal`` is None for a partition too small to split;
    everything then stays in the plus child and the minus child is empty."""

    center: np.ndarray
    normal: np.ndarray | None


@dataclass(frozen=True)
class RefinementForest:
    """Per-partition split trees, all of uniform depth.

    ``trees[i]`` lists partition i's internal nodes in breadth-first heap
    order (2^depth - 1 per tree). Leaf j of a tree is reached by reading j's
    bits most-significant first: 0 descends to the minus side, 1 to the plus
    side. Depth 0 means no refinement.
    """

    num_partitions: int
    depth: int
    trees: tuple

    @property
    def num_refined(self) -> int:
        return self.num_partitions * (1 << self.depth)


def classify(phi) -> np.ndarray:
    """Partition index with the largest weight per row; ties take the lowest
    index."""
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    return np.argmax(phi, axis=1)


def pca_split(points) -> SplitNode:
    """Split plane through the center of mass, normal to the top principal
    direction of the point set. The normal's sign is fixed so its first
    component above 1e-12 magnitude is positive."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] < 2:
        raise InputError(f"cannot split {points.shape[0]} points; need at least 2")
    center = points.mean(axis=0)
    centered = points - center
    cov = centered.T @ centered
    normal = np.array(sym_eig(cov).eigenvectors[:, 0])
    for component in normal:
        if abs(component) > SIGN_EPS:
            if component < 0:
                normal = -normal
            break
    return SplitNode(center=center, normal=normal)


def _leaf_masks(forest: RefinementForest, x: np.ndarray) -> list:
    """Boolean indicator per leaf, per tree, evaluated at the given points."""
    n = x.shape[0]
    all_masks = []
    for tree in forest.trees:
        masks = [np.ones(n, dtype=bool)]
        node_index = 0
        for _ in range(forest.depth):
            next_masks = []
            for mask in masks:
                node = tree[node_index]
                node_index += 1
                if node.normal is None:
                    minus = np.zeros(n, dtype=bool)
                else:
                    minus = (x - node.center) @ node.normal <= 0.0
                next_masks.append(mask & minus)
                next_masks.append(mask & ~minus)
            masks = next_masks
        all_masks.append(masks)
    return all_masks


def refine_phi(phi, forest: RefinementForest, x) -> np.ndarray:
    """Multiply each partition function by its trees' leaf indicators.

    Column i*2^depth + j holds partition i's leaf j. Row sums are preserved
    exactly: each point lands in exactly one leaf per tree, so one sibling
    carries the parent value and the other is exactly zero.
    """
    phi = np.atleast_2d(np.asarray(phi, dtype=float))
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if phi.shape[1] != forest.num_partitions:
        raise DimensionError(
            f"phi has {phi.shape[1]} columns, forest was built for {forest.num_partitions}"
        )
    if phi.shape[0] != x.shape[0]:
        raise DimensionError(f"phi has {phi.shape[0]} rows but {x.shape[0]} points given")
    if forest.depth == 0:
        return phi.copy()
    leaves_per_tree = 1 << forest.depth
    out = np.zeros((phi.shape[0], forest.num_refined))
    for i, masks in enumerate(_leaf_masks(forest, x)):
        for j, mask in enumerate(masks):
            col = i * leaves_per_tree + j
            out[:, col] = np.where(mask, phi[:, i], 0.0)
    return out


def refined_phi(net: PartitionNet, forest: RefinementForest, x) -> np.ndarray:
    """Refined partition functions straight from the network."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return refine_phi(forward(net, x).phi, forest, x)


def build_forest(net: PartitionNet, x, refine_levels: int) -> RefinementForest:
    """Grow every partition's split tree to the requested depth.

    Level by level: classify the points by the current refined partition
    functions, then split each refined partition's point set. Partitions
    holding fewer than 2 points get a no-split node whose plus child carries
    the partition forward.
    """
    if refine_levels < 0:
        raise InputError("refine_levels must be >= 0")
    x = np.atleast_2d(np.asarray(x, dtype=float))
    phi = forward(net, x).phi
    m = phi.shape[1]

    trees = [[] for _ in range(m)]
    masks = [[np.ones(x.shape[0], dtype=bool)] for _ in range(m)]
    for _ in range(refine_levels):
        width = len(masks[0])
        current = np.zeros((x.shape[0], m * width))
        for i in range(m):
            for j in range(width):
                current[:, i * width + j] = np.where(masks[i][j], phi[:, i], 0.0)
        labels = classify(current)
        for i in range(m):
            next_masks = []
            for j in range(width):
                subset = x[labels == i * width + j]
                if subset.shape[0] < 2:
                    node = SplitNode(center=subset.mean(axis=0) if subset.size else np.zeros(x.shape[1]),
                                     normal=None)
                    minus = np.zeros(x.shape[0], dtype=bool)
                else:
                    node = pca_split(subset)
                    minus = (x - node.center) @ node.normal <= 0.0
                trees[i].append(node)
                next_masks.append(masks[i][j] & minus)
                next_masks.append(masks[i][j] & ~minus)
            masks[i] = next_masks
    return RefinementForest(num_partitions=m, depth=refine_levels,
                            trees=tuple(tuple(t) for t in trees))
