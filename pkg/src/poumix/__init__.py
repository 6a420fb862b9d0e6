"""Probabilistic partition-of-unity regression.

A small network carves the input domain into a partition of unity; each
partition carries a polynomial plus a Gaussian noise component, giving
piecewise predictions with pointwise uncertainty. Fitting runs in stages:
joint likelihood training of partitions and noise, PCA bisection refinement,
weighted polynomial fits, then noise re-estimation.
"""

from .bench import (ConvergenceRecord, ConvergenceRow, SnapshotReport,
                    SnapshotRow, convergence_csv, convergence_study,
                    emit_plot_data, fit_loglog_slope, make_problem, rms_error,
                    snapshot_csv, snapshot_study)
from .checkpoint import dumps_model, load_model, loads_model, save_model
from .data import (Dataset, SnapshotDatabase, concat_snapshots,
                   gen_plateau_snapshots, gen_sin1d, gen_sin2d,
                   gen_tanh_noisy, lift_to_4d, load_points_csv,
                   load_scattered_csv, load_snapshot_db, make_dataset,
                   save_scattered_csv, save_snapshot_csv)
from .errors import (DimensionError, InputError, NonFiniteGradientError,
                     NumericalError, ParseError, SchemaError, TrainingAbort)
from .linalg import SymEigResult, logsumexp, solve_least_squares, sym_eig
from .mixture import (NoiseModel, Prediction, init_noise, log_density,
                      nll_gradients, nll_loss, predict, q_values,
                      sample_generative)
from .network import (AffineMap, PartitionEval, PartitionNet, backward,
                      box_init, fit_input_affine, forward)
from .polynomials import (PolynomialSet, basis_size, evaluate_all,
                          fit_weighted_ls, monomial_basis, multi_indices)
from .refine import (RefinementForest, SplitNode, build_forest, classify,
                     pca_split, refine_phi, refined_phi)
from .training import (AdamState, FitReport, FittedModel, TrainConfig,
                       adam_step, fit, init_adam, model_phi, predict_model,
                       train_stage1, train_stage3)

__version__ = "0.1.0"

__all__ = [
    "AdamState", "AffineMap", "ConvergenceRecord", "ConvergenceRow",
    "Dataset", "DimensionError", "FitReport", "FittedModel", "InputError",
    "NoiseModel", "NonFiniteGradientError", "NumericalError",
    "ParseError", "PartitionEval", "PartitionNet", "PolynomialSet",
    "Prediction", "RefinementForest", "SchemaError", "SnapshotDatabase",
    "SnapshotReport", "SnapshotRow", "SplitNode", "SymEigResult",
    "TrainConfig", "TrainingAbort", "adam_step", "backward", "basis_size",
    "box_init", "build_forest", "classify", "concat_snapshots",
    "convergence_csv", "convergence_study", "dumps_model", "emit_plot_data",
    "evaluate_all", "fit", "fit_input_affine", "fit_loglog_slope",
    "fit_weighted_ls",
    "forward", "gen_plateau_snapshots", "gen_sin1d", "gen_sin2d",
    "gen_tanh_noisy", "init_adam", "init_noise", "lift_to_4d",
    "load_model", "load_points_csv", "load_scattered_csv",
    "load_snapshot_db", "loads_model", "log_density", "logsumexp",
    "make_dataset", "make_problem", "model_phi", "monomial_basis",
    "multi_indices", "nll_gradients", "nll_loss", "pca_split", "predict",
    "predict_model", "q_values", "refine_phi", "refined_phi", "rms_error",
    "sample_generative", "save_model", "save_scattered_csv",
    "save_snapshot_csv", "snapshot_csv", "snapshot_study",
    "solve_least_squares", "sym_eig", "train_stage1", "train_stage3",
]
