"""Total-degree polynomial spaces and partition-weighted least-squares fits.

One polynomial per partition, all sharing the monomial basis of total degree
<= m in d variables. The weighted objective decouples per partition, so each
partition is fitted by an independent least-squares solve.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations_with_replacement
from math import comb

import numpy as np

from .errors import DimensionError, InputError
from .linalg import solve_least_squares
from .network import AffineMap, fit_input_affine

# Partitions whose total weight falls below this are fitted as the zero
# polynomial instead of solving a vacuous system.
EMPTY_PARTITION_WEIGHT = 1e-12

WEIGHT_MODES = ("phi-squared", "phi")


def multi_indices(input_dim: int, degree: int) -> tuple:
    """Exponent tuples of total degree <= degree, constant term first.

    Within each total degree the tuples run from the pure power of the first
    variable down: for d=2, m=2 the order is (0,0), (1,0), (0,1), (2,0),
    (1,1), (0,2), i.e. 1, x1, x2, x1^2, x1*x2, x2^2.
    """
    if input_dim < 1 or degree < 0:
        raise InputError("need input_dim >= 1 and degree >= 0")
    out = []
    for total in range(degree + 1):
        for combo in combinations_with_replacement(range(input_dim), total):
            exps = [0] * input_dim
            for var in combo:
                exps[var] += 1
            out.append(tuple(exps))
    return tuple(out)


def basis_size(input_dim: int, degree: int) -> int:
    return comb(input_dim + degree, input_dim)


def monomial_basis(x, degree: int) -> np.ndarray:
    """Evaluate every monomial of total degree <= degree at the given points.

    Column j of the result corresponds to multi_indices(d, degree)[j];
    column 0 is the constant 1.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    indices = multi_indices(x.shape[1], degree)
    v = np.ones((x.shape[0], len(indices)))
    for j, exps in enumerate(indices):
        for k, p in enumerate(exps):
            if p:
                v[:, j] *= x[:, k] ** p
    return v


@dataclass(frozen=True)
class PolynomialSet:
    """Fitted per-partition polynomials in affine-normalized coordinates.

    ``coeffs`` is (num_partitions, basis_size); ``affine`` maps raw input
    coordinates into the frame the monomials are evaluated in. ``empty``
    flags partitions that carried no weight and were fitted as zero.
    """

    degree: int
    input_dim: int
    coeffs: np.ndarray
    affine: AffineMap
    empty: np.ndarray

    @property
    def num_partitions(self) -> int:
        return self.coeffs.shape[0]


def evaluate_all(poly: PolynomialSet, x) -> np.ndarray:
    """Per-partition polynomial values, shape (N, num_partitions)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[1] != poly.input_dim:
        raise DimensionError(
            f"points have dimension {x.shape[1]}, polynomials expect {poly.input_dim}"
        )
    v = monomial_basis(poly.affine.apply(x), poly.degree)
    return v @ poly.coeffs.T


def fit_weighted_ls(phi, x, y, degree: int, affine: AffineMap | None = None,
                    weight_mode: str = "phi-squared") -> PolynomialSet:
    """Fit one polynomial per partition by partition-weighted least squares.

    The default objective puts the weight inside the square,
    sum_j (phi_i(x_j) * (p_i(x_j) - y_j))^2, which scales each row of the
    partition's system by phi_i. ``weight_mode="phi"`` instead minimizes
    sum_j phi_i(x_j) * (p_i - y_j)^2 (rows scaled by sqrt(phi_i)). Both
    decouple across partitions. Partitions with no weight get the zero
    polynomial and are flagged.
    """
    phi = np.asarray(phi, dtype=float)
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if phi.ndim != 2 or phi.shape[0] != x.shape[0] or y.shape[0] != x.shape[0]:
        raise DimensionError(
            f"inconsistent shapes: phi {phi.shape}, x {x.shape}, y {y.shape}"
        )
    if weight_mode not in WEIGHT_MODES:
        raise InputError(f"weight_mode must be one of {WEIGHT_MODES}")

    if affine is None:
        affine = fit_input_affine(x)
    v = monomial_basis(affine.apply(x), degree)
    num_parts = phi.shape[1]
    coeffs = np.zeros((num_parts, v.shape[1]))
    empty = np.zeros(num_parts, dtype=bool)
    for i in range(num_parts):
        w = phi[:, i]
        if w.sum() < EMPTY_PARTITION_WEIGHT:
            empty[i] = True
            continue
        row_scale = w if weight_mode == "phi-squared" else np.sqrt(w)
        coeffs[i] = solve_least_squares(v * row_scale[:, None], y * row_scale)
    return PolynomialSet(degree=degree, input_dim=x.shape[1], coeffs=coeffs,
                         affine=affine, empty=empty)


def zero_polynomials(input_dim: int, degree: int, num_partitions: int,
                     affine: AffineMap | None = None) -> PolynomialSet:
    """All-zero polynomial set, the deterministic component of early training."""
    if affine is None:
        affine = AffineMap(scale=np.ones(input_dim), shift=np.zeros(input_dim))
    return PolynomialSet(
        degree=degree,
        input_dim=input_dim,
        coeffs=np.zeros((num_partitions, basis_size(input_dim, degree))),
        affine=affine,
        empty=np.zeros(num_partitions, dtype=bool),
    )
