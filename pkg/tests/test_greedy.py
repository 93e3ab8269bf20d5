import numpy as np
import pytest

from shapelab.greedy import p_greedy, power_function_sq
from shapelab.kernels import basic_matern, cosh_green, eval_kernel, radial_matern
from shapelab.points import PointSet, fill_distance, grid_2d, midpoint_grid_1d


class TestPowerFunction:
    def test_empty_set_gives_diagonal(self):
        spec = cosh_green(1.0)
        assert power_function_sq(spec, None, 0.3) == pytest.approx(eval_kernel(spec, 0.3, 0.3))
        assert power_function_sq(spec, PointSet(np.empty((0, 1))), 0.3) == pytest.approx(eval_kernel(spec, 0.3, 0.3))

    def test_vanishes_on_nodes(self):
        X = midpoint_grid_1d(10)
        p = power_function_sq(basic_matern(1.0), X, X)
        assert np.max(p) <= 1e-12

    def test_bounds(self):
        spec = radial_matern(1.0, 2)
        X = grid_2d(4)
        x = grid_2d(17)
        p = power_function_sq(spec, X, x)
        assert np.all(p >= 0) and np.all(p <= 1.0 + 1e-15)

    def test_single_node_closed_form(self):
        spec = basic_matern(1.0)
        x, z = 0.2, 0.7
        kxz = eval_kernel(spec, x, z)
        expected = 0.5 - kxz**2 / 0.5
        assert power_function_sq(spec, PointSet([z]), x) == pytest.approx(expected, rel=1e-12)

    def test_decreases_with_more_nodes(self):
        spec = cosh_green(1.0)
        x = np.linspace(0, 1, 101).reshape(-1, 1)
        coarse = power_function_sq(spec, midpoint_grid_1d(4), x)
        fine = power_function_sq(spec, PointSet(np.concatenate([midpoint_grid_1d(4).points[:, 0], [0.5]])), x)
        assert np.all(fine <= coarse + 1e-14)

    def test_full_output(self):
        val, pinv = power_function_sq(cosh_green(1.0), midpoint_grid_1d(3), 0.4, full_output=True)
        assert isinstance(val, float) and pinv is False


class TestPGreedy:
    def test_first_point_lowest_index(self):
        run = p_greedy(radial_matern(1.0, 2), grid_2d(10), 1)
        assert run.indices.tolist() == [0]

    def test_trace_nonincreasing(self):
        run = p_greedy(radial_matern(1.0, 2), grid_2d(30), 50)
        t = run.power_max_trace
        assert len(t) == 50 and np.all(t > 0)
        assert np.all(np.diff(t) <= 0)
        assert len(set(run.indices.tolist())) == 50

    def test_quasi_uniform(self):
        cand = grid_2d(30)
        run = p_greedy(radial_matern(1.0, 2), cand, 100)
        # best 10x10 subgrid of the 30x30 grid is the 10x10 cell-centred grid
        assert fill_distance(run.selected) <= 3 * fill_distance(grid_2d(10))

    def test_deterministic(self):
        a = p_greedy(radial_matern(1.0, 2), grid_2d(15), 40)
        b = p_greedy(radial_matern(1.0, 2), grid_2d(15), 40)
        np.testing.assert_array_equal(a.indices, b.indices)
        np.testing.assert_array_equal(a.power_max_trace, b.power_max_trace)

    def test_incremental_matches_scratch(self):
        spec = radial_matern(1.0, 2)
        cand = grid_2d(25)
        run = p_greedy(spec, cand, 250, record_every=50)
        assert sorted(run.snapshots) == [50, 100, 150, 200, 250]
        for k, p2 in run.snapshots.items():
            scratch = power_function_sq(spec, run.selected.subset(np.arange(k)), cand)
            assert np.max(np.abs(p2 - scratch)) <= 1e-6 * 1.0

    def test_trace_matches_snapshots(self):
        run = p_greedy(basic_matern(1.0), midpoint_grid_1d(200), 30, record_every=10)
        for k, p2 in run.snapshots.items():
            assert run.power_max_trace[k - 1] == p2.max()

    def test_too_many(self):
        with pytest.raises(ValueError):
            p_greedy(cosh_green(1.0), midpoint_grid_1d(5), 6)

    def test_early_stop_on_duplicates(self):
        run = p_greedy(cosh_green(1.0), PointSet([0.2, 0.2]), 2)
        assert run.stopped_early
        assert run.indices.tolist() == [0]

    def test_csv(self, tmp_path):
        run = p_greedy(radial_matern(1.0, 2), grid_2d(5), 3)
        run.to_csv(tmp_path / "g.csv")
        lines = (tmp_path / "g.csv").read_text().splitlines()
        assert lines[0] == "order,index,x1,x2,power_max_sq"
        assert len(lines) == 4
