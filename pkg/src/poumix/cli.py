"""Command-line interface.

A thin client: files are read and written here, while fitting, prediction
and the studies run through the compute service (dispatched in-process by
default, or against a remote instance via --server).

Exit codes: 0 success, 1 usage problem, 2 file problem, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import sys

import httpx

from .bench import PROBLEMS, emit_plot_data, make_problem
from .checkpoint import load_model, model_from_doc, model_to_doc, save_model
from .client import ServiceClient
from .data import (atomic_write_text, format_floats, gen_plateau_snapshots,
                   load_points_csv, load_scattered_csv, load_snapshot_db,
                   save_scattered_csv, save_snapshot_csv)
from .errors import (DimensionError, InputError, NumericalError, ParseError,
                     SchemaError)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERICAL = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports usage problems instead of exiting."""

    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}\n{self.format_usage().rstrip()}")


def _add_train_flags(parser, partitions=4, degree=1, refine_levels=0):
    parser.add_argument("--partitions", type=int, default=partitions,
                        help=f"number of partitions (default {partitions})")
    parser.add_argument("--degree", type=int, default=degree,
                        help=f"polynomial degree per partition (default {degree})")
    parser.add_argument("--refine-levels", type=int, default=refine_levels,
                        help=f"PCA bisection levels (default {refine_levels})")
    parser.add_argument("--stage1-iters", type=int, default=10000,
                        help="joint training iterations (default 10000)")
    parser.add_argument("--stage3-iters", type=int, default=500,
                        help="spread re-estimation iterations (default 500)")
    parser.add_argument("--learning-rate", type=float, default=0.01,
                        help="Adam learning rate (default 0.01)")
    parser.add_argument("--width", type=int, default=64,
                        help="hidden width of the partition network (default 64)")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed (default 0)")
    parser.add_argument("--weight-mode", choices=("phi-squared", "phi"),
                        default="phi-squared",
                        help="least-squares weighting of the polynomial fit")
    parser.add_argument("--init-sigma-scale", type=float, default=1.0,
                        help="scale on the initial noise spread; below 1 the "
                             "components specialize earlier (default 1.0)")


def _options(args) -> dict:
    return {
        "num_partitions": args.partitions,
        "degree": args.degree,
        "refine_levels": args.refine_levels,
        "stage1_iters": args.stage1_iters,
        "stage3_iters": args.stage3_iters,
        "learning_rate": args.learning_rate,
        "width": args.width,
        "seed": args.seed,
        "weight_mode": args.weight_mode,
        "init_sigma_scale": args.init_sigma_scale,
    }


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="poumix",
                     description="Probabilistic partition-of-unity regression.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command",
                                parser_class=_Parser)

    p = sub.add_parser("fit",
                       help="fit a model to a scattered-data CSV")
    p.add_argument("--data", required=True, help="input CSV with header x1,...,xd,y")
    p.add_argument("--out", required=True, help="checkpoint file to write")
    p.add_argument("--plot-dir", help="also write plot-ready CSVs here")
    _add_train_flags(p)
    p.add_argument("--server", help="remote service URL (default: in-process)")
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("predict",
                       help="evaluate a checkpoint at new points")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--points", required=True, help="CSV with header x1,...,xd")
    p.add_argument("--out", required=True, help="output CSV (mean, std, label)")
    p.add_argument("--server", help="remote service URL (default: in-process)")
    p.set_defaults(func=_cmd_predict)

    p = sub.add_parser("converge",
                       help="error-vs-partition-count study on a synthetic problem")
    p.add_argument("--problem", required=True, choices=sorted(PROBLEMS))
    p.add_argument("--degree", type=int, default=1)
    p.add_argument("--config", nargs=2, type=int, action="append", required=True,
                   metavar=("PARTITIONS", "REFINE_LEVELS"),
                   help="one study configuration; repeat for each point")
    p.add_argument("--train-n", type=int, default=1000)
    p.add_argument("--holdout-n", type=int, default=2000)
    p.add_argument("--reps", type=int, default=3,
                   help="fits per configuration, median taken (default 3)")
    p.add_argument("--stage1-iters", type=int, default=10000)
    p.add_argument("--stage3-iters", type=int, default=500)
    p.add_argument("--learning-rate", type=float, default=0.01)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--weight-mode", choices=("phi-squared", "phi"),
                   default="phi-squared")
    p.add_argument("--init-sigma-scale", type=float, default=1.0)
    p.add_argument("--out", required=True, help="study CSV to write")
    p.add_argument("--timings", help="also write wall-clock times here")
    p.add_argument("--server", help="remote service URL (default: in-process)")
    p.set_defaults(func=_cmd_converge)

    p = sub.add_parser("snapshots",
                       help="shared-partition compression study on a snapshot database")
    p.add_argument("--db", required=True,
                   help="wide CSV (x1..xd,y_1..y_K) or directory with coords.csv")
    p.add_argument("--out", required=True, help="report CSV to write")
    _add_train_flags(p, partitions=10, degree=0, refine_levels=0)
    p.add_argument("--server", help="remote service URL (default: in-process)")
    p.set_defaults(func=_cmd_snapshots)

    p = sub.add_parser("gen",
                       help="write a synthetic dataset to CSV")
    p.add_argument("--problem", required=True,
                   choices=sorted(PROBLEMS) + ["plateau-snapshots"])
    p.add_argument("--n", type=int, default=1000,
                   help="samples (nodes for plateau-snapshots)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--snapshots", type=int, default=20,
                   help="plateau-snapshots only: fields to generate")
    p.add_argument("--plateaus", type=int, default=10,
                   help="plateau-snapshots only: constant bands per field")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_gen)

    p = sub.add_parser("serve",
                       help="run the compute service over HTTP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)

    return parser


def _cmd_fit(args) -> int:
    data = load_scattered_csv(args.data)
    result = ServiceClient(args.server).fit(data.x.tolist(), data.y.tolist(),
                                            _options(args))
    model = model_from_doc(result["checkpoint"])
    save_model(args.out, model)
    summary = result["summary"]
    print(f"fitted {model.forest.num_refined} refined partitions "
          f"(degree {model.poly.degree}) on {data.num_samples} samples")
    print(f"stage-1 final loss {summary['stage1_final_loss']:.6g}, "
          f"stage-3 final loss {summary['stage3_final_loss']:.6g}")
    for note in summary["notes"]:
        print(f"note: {note}")
    print(f"wrote {args.out}")
    if args.plot_dir:
        for path in emit_plot_data(model, data, args.plot_dir):
            print(f"wrote {path}")
    return EXIT_OK


def _cmd_predict(args) -> int:
    model = load_model(args.model)
    points = load_points_csv(args.points)
    result = ServiceClient(args.server).predict(model_to_doc(model), points.tolist())
    header = [f"x{d + 1}" for d in range(points.shape[1])] + ["mean", "std", "label"]
    lines = [",".join(header)]
    for i in range(points.shape[0]):
        lines.append(",".join(
            format_floats(points[i])
            + format_floats([result["mean"][i], result["std"][i]])
            + [str(result["label"][i])]
        ))
    atomic_write_text(args.out, "\n".join(lines) + "\n")
    print(f"wrote {args.out} ({points.shape[0]} points)")
    return EXIT_OK


def _cmd_converge(args) -> int:
    options = _options_study(args)
    result = ServiceClient(args.server).converge(
        args.problem, args.degree, args.config, train_n=args.train_n,
        holdout_n=args.holdout_n, reps=args.reps, seed=args.seed, options=options,
    )
    atomic_write_text(args.out, result["csv"])
    print(f"wrote {args.out} ({len(result['rows'])} configurations)")
    if args.timings:
        atomic_write_text(args.timings, result["timings_csv"])
        print(f"wrote {args.timings}")
    for failure in result["failures"]:
        print(f"warning: {failure}", file=sys.stderr)
    slope = result["slope"]
    if slope is None:
        print("slope: not available (too few successful configurations)")
    else:
        stderr = result["slope_stderr"]
        print(f"slope of log(rmse) vs log(partitions): {slope:.4f}"
              + ("" if stderr is None else f" (stderr {stderr:.4f})"))
    return EXIT_OK


def _options_study(args) -> dict:
    return {
        "stage1_iters": args.stage1_iters,
        "stage3_iters": args.stage3_iters,
        "learning_rate": args.learning_rate,
        "width": args.width,
        "weight_mode": args.weight_mode,
        "init_sigma_scale": args.init_sigma_scale,
    }


def _cmd_snapshots(args) -> int:
    db = load_snapshot_db(args.db)
    result = ServiceClient(args.server).snapshots(
        db.x.tolist(), db.snapshots.tolist(), list(db.names), _options(args),
    )
    atomic_write_text(args.out, result["csv"])
    worst = max(row["worst_rel"] for row in result["rows"])
    print(f"wrote {args.out} ({result['num_snapshots']} snapshots, "
          f"{result['num_nodes']} nodes)")
    print(f"worst per-snapshot relative error after refit: {worst:.4%}")
    print(f"dof reduction: {result['dof_reduction_per_snapshot']:.1f}x "
          f"(per-snapshot coefficients), {result['dof_reduction']:.1f}x (shared)")
    return EXIT_OK


def _cmd_gen(args) -> int:
    if args.problem == "plateau-snapshots":
        db = gen_plateau_snapshots(num_nodes=args.n, num_snapshots=args.snapshots,
                                   num_plateaus=args.plateaus, seed=args.seed)
        save_snapshot_csv(args.out, db)
        print(f"wrote {args.out} ({db.num_snapshots} snapshots over {db.num_nodes} nodes)")
    else:
        data = make_problem(args.problem, args.n, args.seed)
        save_scattered_csv(args.out, data)
        print(f"wrote {args.out} ({data.num_samples} samples, {data.input_dim}D)")
    return EXIT_OK


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import app
    uvicorn.run(app, host=args.host, port=args.port)
    return EXIT_OK


def cli_main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as err:  # --help
        return int(err.code or 0)
    try:
        return args.func(args)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    except (InputError, DimensionError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, SchemaError) as err:
        print(f"file error: {err}", file=sys.stderr)
        return EXIT_IO
    except OSError as err:
        print(f"i/o error: {err}", file=sys.stderr)
        return EXIT_IO
    except httpx.HTTPError as err:
        print(f"service unreachable: {err}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as err:
        print(f"numerical abort: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def main() -> None:
    sys.exit(cli_main(sys.argv[1:]))
