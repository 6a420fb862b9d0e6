"""End-to-end command-line tests, exercising files, flags and exit codes."""

import numpy as np
import pytest

from poumix.checkpoint import load_model
from poumix.cli import cli_main
from poumix.data import load_snapshot_db

FAST = ["--stage1-iters", "200", "--stage3-iters", "30", "--width", "8"]


def run(*argv):
    return cli_main(list(argv))


@pytest.fixture()
def sine_csv(tmp_path):
    path = tmp_path / "sine.csv"
    assert run("gen", "--problem", "sin1d", "--n", "80", "--seed", "1",
               "--out", str(path)) == 0
    return path


class TestGen:
    def test_scattered(self, sine_csv):
        lines = sine_csv.read_text().splitlines()
        assert lines[0] == "x1,y"
        assert len(lines) == 81

    def test_plateau_db(self, tmp_path):
        path = tmp_path / "db.csv"
        assert run("gen", "--problem", "plateau-snapshots", "--n", "100",
                   "--snapshots", "3", "--plateaus", "3", "--seed", "0",
                   "--out", str(path)) == 0
        db = load_snapshot_db(path)
        assert db.num_nodes == 100
        assert db.num_snapshots == 3

    def test_all_problems(self, tmp_path):
        for name in ("sin1d", "tanh-noisy", "sin2d", "sin2d-lifted"):
            assert run("gen", "--problem", name, "--n", "10",
                       "--out", str(tmp_path / f"{name}.csv")) == 0


class TestFitPredict:
    @pytest.fixture()
    def model_path(self, tmp_path, sine_csv):
        path = tmp_path / "model.json"
        code = run("fit", "--data", str(sine_csv), "--out", str(path),
                   "--partitions", "2", "--degree", "1", *FAST)
        assert code == 0
        return path

    def test_checkpoint_loads(self, model_path):
        model = load_model(model_path)
        assert model.net.num_partitions == 2

    def test_predict_csv(self, tmp_path, model_path):
        points = tmp_path / "points.csv"
        points.write_text("x1\n0.1\n0.5\n0.9\n")
        out = tmp_path / "pred.csv"
        assert run("predict", "--model", str(model_path),
                   "--points", str(points), "--out", str(out)) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x1,mean,std,label"
        assert len(lines) == 4
        first = lines[1].split(",")
        assert len(first) == 4
        float(first[1]), float(first[2])
        assert first[3] in {"0", "1"}

    def test_plot_dir(self, tmp_path, sine_csv):
        plot_dir = tmp_path / "plots"
        code = run("fit", "--data", str(sine_csv),
                   "--out", str(tmp_path / "m.json"),
                   "--partitions", "2", *FAST,
                   "--plot-dir", str(plot_dir))
        assert code == 0
        names = sorted(p.name for p in plot_dir.iterdir())
        assert names == ["classification.csv", "loss_trace.csv",
                         "partitions.csv", "prediction.csv"]

    def test_fit_deterministic(self, tmp_path, sine_csv):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for out in (a, b):
            assert run("fit", "--data", str(sine_csv), "--out", str(out),
                       "--partitions", "2", "--seed", "5", *FAST) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_init_sigma_scale_changes_fit(self, tmp_path, sine_csv):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert run("fit", "--data", str(sine_csv), "--out", str(a),
                   "--partitions", "2", *FAST) == 0
        assert run("fit", "--data", str(sine_csv), "--out", str(b),
                   "--partitions", "2", "--init-sigma-scale", "0.5",
                   *FAST) == 0
        assert a.read_bytes() != b.read_bytes()


class TestExitCodes:
    def test_help_is_zero(self, capsys):
        assert run("--help") == 0
        assert "usage" in capsys.readouterr().out.lower()

    def test_subcommand_help_is_zero(self, capsys):
        assert run("fit", "--help") == 0

    def test_unknown_flag_is_one(self, tmp_path, capsys):
        code = run("fit", "--data", "x.csv", "--out", "y.json", "--bogus")
        assert code == 1
        assert "error" in capsys.readouterr().err

    def test_missing_required_flag_is_one(self):
        assert run("fit", "--data", "x.csv") == 1

    def test_unknown_command_is_one(self):
        assert run("frobnicate") == 1

    def test_missing_file_is_two(self, tmp_path, capsys):
        code = run("fit", "--data", str(tmp_path / "absent.csv"),
                   "--out", str(tmp_path / "m.json"), *FAST)
        assert code == 2
        assert "file error" in capsys.readouterr().err

    def test_malformed_csv_is_two(self, tmp_path):
        bad = tmp_path / "bad.csv"
        bad.write_text("a,b\n1,2\n")
        assert run("fit", "--data", str(bad),
                   "--out", str(tmp_path / "m.json"), *FAST) == 2

    def test_corrupt_checkpoint_is_two(self, tmp_path):
        model = tmp_path / "model.json"
        model.write_text("{\"format\": \"nope\"}")
        points = tmp_path / "p.csv"
        points.write_text("x1\n0.5\n")
        assert run("predict", "--model", str(model), "--points", str(points),
                   "--out", str(tmp_path / "o.csv")) == 2

    def test_dimension_mismatch_is_one(self, tmp_path, sine_csv):
        model = tmp_path / "model.json"
        assert run("fit", "--data", str(sine_csv), "--out", str(model),
                   "--partitions", "2", *FAST) == 0
        points = tmp_path / "p2d.csv"
        points.write_text("x1,x2\n0.1,0.2\n")
        assert run("predict", "--model", str(model), "--points", str(points),
                   "--out", str(tmp_path / "o.csv")) == 1

    def test_divergent_training_is_three(self, tmp_path, sine_csv, capsys):
        with np.errstate(all="ignore"):
            code = run("fit", "--data", str(sine_csv),
                       "--out", str(tmp_path / "m.json"),
                       "--partitions", "2", *FAST,
                       "--learning-rate", "1e160")
        assert code == 3
        assert "numerical abort" in capsys.readouterr().err


class TestConvergeCommand:
    def converge(self, out, timings=None):
        argv = ["converge", "--problem", "sin1d", "--degree", "1",
                "--config", "2", "0", "--config", "2", "1",
                "--config", "2", "2",
                "--train-n", "100", "--holdout-n", "150", "--reps", "1",
                "--stage1-iters", "150", "--stage3-iters", "20",
                "--width", "8", "--seed", "0", "--out", str(out)]
        if timings:
            argv += ["--timings", str(timings)]
        return run(*argv)

    def test_writes_study_csv(self, tmp_path, capsys):
        out = tmp_path / "study.csv"
        assert self.converge(out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ("num_partitions,refine_levels,num_refined,"
                            "degree,input_dim,rmse,rmse_train")
        assert len([l for l in lines if not l.startswith("#")]) == 4
        assert "slope" in capsys.readouterr().out

    def test_rerun_is_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert self.converge(a) == 0
        assert self.converge(b) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_timings_sidecar(self, tmp_path):
        out, timings = tmp_path / "s.csv", tmp_path / "t.csv"
        assert self.converge(out, timings) == 0
        lines = timings.read_text().splitlines()
        assert lines[0] == "num_partitions,refine_levels,wall_time_seconds"
        assert len(lines) == 4

    def test_unknown_problem_is_one(self, tmp_path):
        code = run("converge", "--problem", "mystery", "--config", "2", "0",
                   "--out", str(tmp_path / "s.csv"))
        assert code == 1


class TestSnapshotsCommand:
    @pytest.fixture()
    def db_csv(self, tmp_path):
        path = tmp_path / "db.csv"
        assert run("gen", "--problem", "plateau-snapshots", "--n", "150",
                   "--snapshots", "3", "--plateaus", "3", "--seed", "0",
                   "--out", str(path)) == 0
        return path

    def snapshots(self, db, out):
        return run("snapshots", "--db", str(db), "--out", str(out),
                   "--partitions", "3", "--degree", "0",
                   "--stage1-iters", "400", "--stage3-iters", "30",
                   "--width", "16", "--seed", "0")

    def test_writes_report(self, tmp_path, db_csv, capsys):
        out = tmp_path / "report.csv"
        assert self.snapshots(db_csv, out) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "snapshot,rms_rel,worst_rel,rms_rel_shared,worst_rel_shared"
        assert len([l for l in lines if not l.startswith("#")]) == 4
        printed = capsys.readouterr().out
        assert "dof reduction" in printed

    def test_rerun_is_byte_identical(self, tmp_path, db_csv):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert self.snapshots(db_csv, a) == 0
        assert self.snapshots(db_csv, b) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_directory_database(self, tmp_path, db_csv):
        # same study from the directory layout: coords.csv plus one file
        # per snapshot, ordered by filename (stems become snapshot names)
        db = load_snapshot_db(db_csv)
        d = tmp_path / "snapdir"
        d.mkdir()
        header = ",".join(f"x{i + 1}" for i in range(db.x.shape[1]))
        rows = "\n".join(",".join(f"{v:.17g}" for v in row) for row in db.x)
        (d / "coords.csv").write_text(f"{header}\n{rows}\n")
        for k in range(db.num_snapshots):
            vals = "\n".join(f"{v:.17g}" for v in db.snapshots[k])
            (d / f"y_{k + 1}.csv").write_text(f"y\n{vals}\n")
        flat, nested = tmp_path / "flat.csv", tmp_path / "nested.csv"
        assert self.snapshots(db_csv, flat) == 0
        assert self.snapshots(d, nested) == 0
        assert flat.read_bytes() == nested.read_bytes()
