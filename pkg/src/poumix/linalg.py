"""Dense linear algebra and numerically stable primitives.

Thin, contract-checked wrappers around LAPACK (via numpy) plus a shift-safe
log-sum-exp. Everything here is a pure function; all arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NumericalError

# Covariance matrices never exceed the input dimension, so keep the
# symmetric solver honest about its intended problem size.
MAX_SYM_EIG_DIM = 64


@dataclass(frozen=True)
class SymEigResult:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` are sorted descending; column ``eigenvectors[:, k]``
    pairs with ``eigenvalues[k]`` and the columns are orthonormal.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def sym_eig(a, sym_tol: float = 1e-10) -> SymEigResult:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Raises DimensionError for non-square or oversized input, InputError for
    asymmetric input, and NumericalError if the solver fails to converge.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n > MAX_SYM_EIG_DIM:
        raise DimensionError(f"matrix dimension {n} exceeds cap {MAX_SYM_EIG_DIM}")
    scale = np.abs(a).max()
    if scale > 0 and np.abs(a - a.T).max() > sym_tol * scale:
        raise InputError("matrix is not symmetric within tolerance")
    # Symmetrize so roundoff asymmetry cannot leak into the solver.
    a = 0.5 * (a + a.T)
    try:
        w, v = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"symmetric eigendecomposition failed: {exc}") from exc
    order = np.argsort(w)[::-1]
    return SymEigResult(np.ascontiguousarray(w[order]), np.ascontiguousarray(v[:, order]))


def solve_least_squares(a, b) -> np.ndarray:
    """Minimum-norm minimizer of ||A x - b||_2.

    Rank-deficient systems are resolved by the SVD-based pseudoinverse path,
    so degenerate (even all-zero) design matrices yield the zero solution
    rather than an error.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2-d design matrix, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise DimensionError(f"design matrix must be at least 1x1, got {a.shape}")
    if b.ndim != 1 or b.shape[0] != a.shape[0]:
        raise DimensionError(
            f"right-hand side of length {b.shape} does not match {a.shape[0]} rows"
        )
    solution, _, _, _ = np.linalg.lstsq(a, b, rcond=None)
    return solution


def logsumexp(values, axis=None):
    """log(sum(exp(values))), stable under large shifts.

    Entries may be -inf (they contribute nothing); an all--inf input
    returns -inf. With ``axis`` given, reduces along that axis.
    """
    a = np.asarray(values, dtype=float)
    if a.size == 0:
        raise InputError("logsumexp requires at least one entry")
    scalar = axis is None
    if scalar:
        a = a.reshape(-1)
        axis = 0
    amax = np.amax(a, axis=axis, keepdims=True)
    # An all--inf slice would otherwise produce nan via inf - inf.
    shift = np.where(np.isfinite(amax), amax, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(a - shift), axis=axis)) + np.squeeze(shift, axis=axis)
    return float(out) if scalar else out
