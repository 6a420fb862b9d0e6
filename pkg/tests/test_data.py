import os

import numpy as np
import pytest

from poumix import (Dataset, DimensionError, InputError, ParseError,
                    SnapshotDatabase, concat_snapshots, gen_plateau_snapshots,
                    gen_sin1d, gen_sin2d, gen_tanh_noisy, lift_to_4d,
                    load_points_csv, load_scattered_csv, load_snapshot_db,
                    make_dataset, save_scattered_csv, save_snapshot_csv)
from poumix.data import atomic_write_text, format_floats


class TestGenerators:
    def test_sin1d_values(self):
        ds = gen_sin1d(5)
        assert np.allclose(ds.x[:, 0], [0.0, 0.25, 0.5, 0.75, 1.0])
        assert np.isclose(ds.y[1], 1.0)
        assert abs(ds.y[0]) < 1e-12 and abs(ds.y[-1]) < 1e-12
        assert ds.y.min() >= -1.0 and ds.y.max() <= 1.0
        assert ds.noise_std is None

    def test_sin1d_too_small(self):
        with pytest.raises(InputError):
            gen_sin1d(1)

    def test_tanh_noisy_noiseless_midpoint(self):
        ds = gen_tanh_noisy(1001, seed=0)
        mid = 500
        assert np.isclose(ds.x[mid, 0], 0.5)
        # noise vanishes at the midpoint, so the label is exactly the mean
        assert np.isclose(ds.noise_std[mid], 0.0, atol=1e-12)
        assert np.isclose(ds.y[mid], 1.0, atol=1e-9)

    def test_tanh_noisy_std_profile(self):
        ds = gen_tanh_noisy(1000, seed=1)
        assert np.isclose(ds.noise_std[0], 0.0, atol=1e-12)
        assert np.allclose(ds.noise_std,
                           np.abs(0.3 * np.sin(2 * np.pi * ds.x[:, 0])))

    def test_tanh_noisy_sample_std_near_quarter(self):
        # Regenerate many times and check the empirical std at x = 0.25.
        n = 401
        idx = 100  # x = 0.25 on the even grid
        draws = np.array([gen_tanh_noisy(n, seed=s).y[idx] for s in range(3000)])
        assert np.isclose(draws.std(), 0.3, atol=0.02)
        assert np.isclose(gen_tanh_noisy(n, seed=0).x[idx, 0], 0.25)

    def test_tanh_noisy_deterministic(self):
        a = gen_tanh_noisy(100, seed=7)
        b = gen_tanh_noisy(100, seed=7)
        assert np.array_equal(a.y, b.y)
        assert not np.array_equal(a.y, gen_tanh_noisy(100, seed=8).y)

    def test_sin2d_values(self):
        ds = gen_sin2d(500, seed=0)
        assert ds.x.shape == (500, 2)
        assert np.all((ds.x >= 0) & (ds.x <= 1))
        expected = np.sin(2 * np.pi * ds.x[:, 0]) * np.sin(2 * np.pi * ds.x[:, 1])
        assert np.allclose(ds.y, expected)

    def test_sin2d_known_points(self):
        f = lambda a, b: np.sin(2 * np.pi * a) * np.sin(2 * np.pi * b)
        assert np.isclose(f(0.25, 0.25), 1.0)
        assert abs(f(0.0, 0.7)) < 1e-12

    def test_lift_to_4d(self):
        ds = gen_sin2d(50, seed=1)
        lifted = lift_to_4d(ds)
        assert lifted.x.shape == (50, 4)
        assert np.array_equal(lifted.x[:, 0], ds.x[:, 0])
        assert np.array_equal(lifted.x[:, 1], ds.x[:, 1])
        assert np.array_equal(lifted.x[:, 2], ds.x[:, 1] ** 2)
        assert np.all(lifted.x[:, 3] == 0.0)
        assert np.array_equal(lifted.y, ds.y)

    def test_lift_rejects_non_2d(self):
        with pytest.raises(DimensionError):
            lift_to_4d(gen_sin1d(10))

    def test_plateau_snapshots_structure(self):
        db = gen_plateau_snapshots(num_nodes=500, num_snapshots=4,
                                   num_plateaus=5, seed=0)
        assert db.x.shape == (500, 2)
        assert db.snapshots.shape == (4, 500)
        assert db.names == ("y_1", "y_2", "y_3", "y_4")
        # each (snapshot, band) cell is a tight cluster near its level:
        # within-band spread is dither-scale, band means near level p
        band = np.minimum((db.x[:, 0] * 5).astype(int), 4)
        for k in range(4):
            for p in range(5):
                cell = db.snapshots[k][band == p]
                assert cell.std() < 0.08
                assert abs(cell.mean() - p) < 1.0

    def test_plateau_deterministic(self):
        a = gen_plateau_snapshots(num_nodes=100, num_snapshots=3, seed=5)
        b = gen_plateau_snapshots(num_nodes=100, num_snapshots=3, seed=5)
        assert np.array_equal(a.snapshots, b.snapshots)
        assert np.array_equal(a.x, b.x)


class TestDataset:
    def test_make_dataset_checks_lengths(self):
        with pytest.raises(Exception):
            make_dataset(np.zeros((3, 1)), np.zeros(4))

    def test_make_dataset_rejects_non_finite(self):
        with pytest.raises(InputError):
            make_dataset(np.zeros((2, 1)), np.array([1.0, np.nan]))

    def test_concat_snapshot_major(self):
        x = np.array([[0.0, 0.0], [1.0, 1.0]])
        snaps = np.array([[10.0, 11.0], [20.0, 21.0], [30.0, 31.0]])
        db = SnapshotDatabase(x=x, snapshots=snaps, names=("a", "b", "c"))
        flat = concat_snapshots(db)
        assert flat.num_samples == 6
        assert flat.y.tolist() == [10.0, 11.0, 20.0, 21.0, 30.0, 31.0]
        assert np.array_equal(flat.x[0:2], x)
        assert np.array_equal(flat.x[2:4], x)


class TestScatteredCsv:
    def test_round_trip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        ds = make_dataset(rng.uniform(size=(40, 3)), rng.standard_normal(40))
        path = tmp_path / "data.csv"
        save_scattered_csv(path, ds)
        back = load_scattered_csv(path)
        assert np.array_equal(back.x, ds.x)
        assert np.array_equal(back.y, ds.y)
        # a second save produces identical bytes
        twin = tmp_path / "again.csv"
        save_scattered_csv(twin, back)
        assert path.read_bytes() == twin.read_bytes()

    def test_header_format(self, tmp_path):
        ds = make_dataset(np.zeros((2, 2)), np.zeros(2))
        path = tmp_path / "h.csv"
        save_scattered_csv(path, ds)
        assert path.read_text().splitlines()[0] == "x1,x2,y"

    def test_comments_and_blank_lines_skipped(self, tmp_path):
        path = tmp_path / "c.csv"
        path.write_text("# a comment\n\nx1,y\n0.0,1.0\n# mid comment\n1.0,2.0\n")
        ds = load_scattered_csv(path)
        assert ds.num_samples == 2
        assert ds.y.tolist() == [1.0, 2.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(ParseError):
            load_scattered_csv(tmp_path / "nope.csv")

    def test_empty_file(self, tmp_path):
        path = tmp_path / "e.csv"
        path.write_text("")
        with pytest.raises(ParseError, match="empty"):
            load_scattered_csv(path)

    def test_header_only(self, tmp_path):
        path = tmp_path / "ho.csv"
        path.write_text("x1,y\n")
        with pytest.raises(ParseError, match="no data rows"):
            load_scattered_csv(path)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bh.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(ParseError):
            load_scattered_csv(path)

    def test_ragged_row_cites_line(self, tmp_path):
        path = tmp_path / "r.csv"
        path.write_text("x1,y\n0.0,1.0\n0.5\n")
        with pytest.raises(ParseError, match="line 3"):
            load_scattered_csv(path)

    def test_non_numeric_cites_line_and_column(self, tmp_path):
        path = tmp_path / "nn.csv"
        path.write_text("x1,y\n0.0,1.0\n0.5,oops\n")
        with pytest.raises(ParseError, match="line 3.*column 2"):
            load_scattered_csv(path)

    def test_non_finite_rejected(self, tmp_path):
        path = tmp_path / "nf.csv"
        path.write_text("x1,y\n0.0,1.0\n0.5,nan\n")
        with pytest.raises(ParseError, match="line 3"):
            load_scattered_csv(path)

    def test_17_digit_round_trip(self, tmp_path):
        # values with no short decimal representation survive exactly
        vals = np.array([1 / 3, np.pi, 1e-300, 123456.789012345678])
        ds = make_dataset(vals[:, None], vals)
        path = tmp_path / "p.csv"
        save_scattered_csv(path, ds)
        back = load_scattered_csv(path)
        assert np.array_equal(back.y, vals)

    def test_load_points(self, tmp_path):
        path = tmp_path / "pts.csv"
        path.write_text("x1,x2\n0.0,1.0\n0.5,0.25\n")
        pts = load_points_csv(path)
        assert pts.tolist() == [[0.0, 1.0], [0.5, 0.25]]

    def test_load_points_rejects_label_header(self, tmp_path):
        path = tmp_path / "pts.csv"
        path.write_text("x1,y\n0.0,1.0\n")
        with pytest.raises(ParseError):
            load_points_csv(path)


class TestSnapshotCsv:
    def make_db(self):
        rng = np.random.default_rng(1)
        return SnapshotDatabase(x=rng.uniform(size=(30, 2)),
                                snapshots=rng.standard_normal((3, 30)),
                                names=("y_1", "y_2", "y_3"))

    def test_wide_round_trip(self, tmp_path):
        db = self.make_db()
        path = tmp_path / "db.csv"
        save_snapshot_csv(path, db)
        back = load_snapshot_db(path)
        assert np.array_equal(back.x, db.x)
        assert np.array_equal(back.snapshots, db.snapshots)
        assert back.names == db.names
        assert path.read_text().splitlines()[0] == "x1,x2,y_1,y_2,y_3"

    def test_wide_header_must_number_labels_in_order(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("x1,y_2,y_1\n0.0,1.0,2.0\n")
        with pytest.raises(ParseError):
            load_snapshot_db(path)

    def test_directory_layout(self, tmp_path):
        d = tmp_path / "db"
        d.mkdir()
        (d / "coords.csv").write_text("x1\n0.0\n0.5\n1.0\n")
        (d / "run_a.csv").write_text("y\n1.0\n2.0\n3.0\n")
        (d / "run_b.csv").write_text("y\n4.0\n5.0\n6.0\n")
        db = load_snapshot_db(d)
        assert db.names == ("run_a", "run_b")
        assert db.snapshots.tolist() == [[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]]
        assert db.x[:, 0].tolist() == [0.0, 0.5, 1.0]

    def test_directory_missing_coords(self, tmp_path):
        d = tmp_path / "db"
        d.mkdir()
        (d / "run_a.csv").write_text("y\n1.0\n")
        with pytest.raises(ParseError, match="coords"):
            load_snapshot_db(d)

    def test_directory_length_mismatch_names_snapshot(self, tmp_path):
        d = tmp_path / "db"
        d.mkdir()
        (d / "coords.csv").write_text("x1\n0.0\n0.5\n")
        (d / "short.csv").write_text("y\n1.0\n")
        with pytest.raises(ParseError, match="short"):
            load_snapshot_db(d)

    def test_directory_no_snapshots(self, tmp_path):
        d = tmp_path / "db"
        d.mkdir()
        (d / "coords.csv").write_text("x1\n0.0\n0.5\n")
        with pytest.raises(ParseError, match="no snapshot"):
            load_snapshot_db(d)

    def test_generated_db_round_trip(self, tmp_path):
        db = gen_plateau_snapshots(num_nodes=50, num_snapshots=3, seed=2)
        path = tmp_path / "gen.csv"
        save_snapshot_csv(path, db)
        back = load_snapshot_db(path)
        assert np.array_equal(back.snapshots, db.snapshots)
        assert np.array_equal(back.x, db.x)


class TestAtomicWrite:
    def test_writes_text(self, tmp_path):
        path = tmp_path / "out.txt"
        atomic_write_text(path, "hello\n")
        assert path.read_text() == "hello\n"

    def test_overwrites_existing(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old")
        atomic_write_text(path, "new")
        assert path.read_text() == "new"

    def test_no_temp_droppings(self, tmp_path):
        path = tmp_path / "out.txt"
        atomic_write_text(path, "x")
        assert sorted(os.listdir(tmp_path)) == ["out.txt"]

    def test_format_floats_shortest_17(self):
        assert format_floats([0.5]) == ["0.5"]
        assert float(format_floats([1 / 3])[0]) == 1 / 3
