import numpy as np
import pytest
from hypothesis import given, strategies as st

from riscap.alloc import db_to_linear, joint_power_dir_ris_alloc_1, joint_power_ris_alloc_1
from riscap.direct import waterfill
from riscap.oracle import (KKT_TOL, capacity_surface, check_agreement, enumerate_simplex_lattice,
                           grid_search_p3, kkt_residual, local_extrema_1d, p3_objective,
                           p4_objective, project_simplex, projected_gradient_multistart,
                           waterfill_active_set)


def _objective(kind, rng):
    sr = np.sort(db_to_linear(rng.uniform(0, 40, rng.integers(1, 5))))[::-1]
    if kind == "P3":
        return p3_objective(sr)
    return p4_objective(db_to_linear(rng.uniform(0, 40, rng.integers(0, 4))), sr)


def _interior_point(obj, rng):
    x = np.zeros(obj.dim)
    for b in obj.blocks:
        x[b] = rng.dirichlet(np.ones(b.size) * 5)
    return x


class TestProjection:
    @given(st.lists(st.floats(-10, 10), min_size=1, max_size=8), st.integers(0, 2 ** 31))
    def test_against_random_feasible_points(self, y, seed):
        y = np.array(y)
        x = project_simplex(y)
        assert np.all(x >= 0) and x.sum() == pytest.approx(1.0, abs=1e-12)
        rng = np.random.default_rng(seed)
        z = rng.dirichlet(np.ones(y.size), size=200)
        assert np.linalg.norm(y - x) <= np.linalg.norm(y - z, axis=1).min() + 1e-12
        # Optimality: x = (y - tau)^+ for a single threshold tau.
        tau = (y - x)[x > 0]
        assert np.ptp(tau) < 1e-12
        assert np.all(y[x == 0] <= tau[0] + 1e-12)

    def test_rowwise(self):
        y = np.array([[0.2, 0.8], [5.0, -5.0]])
        assert np.allclose(project_simplex(y), [[0.2, 0.8], [1.0, 0.0]])

    def test_fixed_point_on_simplex(self, rng):
        x = rng.dirichlet(np.ones(5))
        assert np.allclose(project_simplex(x), x)


@given(st.lists(st.floats(0.01, 100.0), min_size=1, max_size=7), st.floats(1e-3, 100.0))
def test_active_set_waterfill_matches_bisection(n, p):
    assert np.allclose(waterfill_active_set(n, p), waterfill(n, p).levels, atol=1e-9 * max(1, p))


class TestDerivatives:
    @pytest.mark.parametrize("kind", ["P3", "P4"])
    def test_gradient_central_differences(self, kind):
        rng = np.random.default_rng(5 if kind == "P3" else 6)
        h = 1e-6
        for _ in range(50):
            obj = _objective(kind, rng)
            x = _interior_point(obj, rng)
            g = obj.grad(x)
            fd = np.array([(obj.value(x + h * e) - obj.value(x - h * e)) / (2 * h)
                           for e in np.eye(obj.dim)])
            assert np.allclose(g, fd, rtol=1e-4, atol=1e-7)

    @pytest.mark.parametrize("kind", ["P3", "P4"])
    def test_hessian_central_differences(self, kind):
        rng = np.random.default_rng(7)
        h = 1e-6
        for _ in range(20):
            obj = _objective(kind, rng)
            x = _interior_point(obj, rng)
            hess = obj.hess(x)
            fd = np.array([(obj.grad(x + h * e) - obj.grad(x - h * e)) / (2 * h)
                           for e in np.eye(obj.dim)])
            assert np.allclose(hess, fd, rtol=1e-4, atol=1e-5)

    def test_split_layout(self):
        obj = p4_objective([1.0, 2.0], [5.0])
        r, qr, qd = obj.split(np.arange(4.0))
        assert list(r) == [0.0] and list(qr) == [1.0] and list(qd) == [2.0, 3.0]


class TestGridSearch:
    def test_single_pair(self):
        rep = grid_search_p3([30.0], 0.01)
        assert list(rep.best_r) == [1.0]
        assert rep.best_capacity == pytest.approx(np.log2(31))

    def test_two_pairs_fine(self):
        rep = grid_search_p3(db_to_linear([22, 21]), 1e-3)
        assert rep.best_capacity == pytest.approx(8.4444, abs=1e-3)
        assert rep.best_r == pytest.approx([0.504, 0.496], abs=1e-3)
        assert rep.method == "simplex-grid"

    def test_equal_high_snr_centroid(self):
        step = 0.01
        rep = grid_search_p3(np.full(3, db_to_linear(40)), step)
        assert np.all(np.abs(rep.best_r - 1 / 3) <= step)

    @pytest.mark.parametrize("snr,step", [([1.0] * 5, 0.1), ([1.0], 1e-4), ([1.0], 0.2), ([], 0.1)])
    def test_rejects(self, snr, step):
        with pytest.raises(ValueError):
            grid_search_p3(snr, step)

    @given(st.lists(st.floats(0, 40), min_size=1, max_size=4), st.sampled_from([0.1, 0.05, 0.04]))
    def test_dynamic_program_equals_enumeration(self, db, step):
        s = db_to_linear(db)
        n = int(round(1 / step))
        pts = enumerate_simplex_lattice(s.size, n)
        brute = np.log2(1 + pts ** 3 * s).sum(axis=1).max()
        rep = grid_search_p3(s, step)
        assert rep.best_capacity == pytest.approx(brute, abs=1e-12)
        assert rep.best_r.sum() == pytest.approx(1.0)
        assert np.log2(1 + rep.best_r ** 3 * s).sum() == pytest.approx(brute, abs=1e-12)

    def test_lattice_counts(self):
        # C(n + d - 1, d - 1) points including every boundary face.
        assert len(enumerate_simplex_lattice(3, 10)) == 66
        assert len(enumerate_simplex_lattice(4, 5)) == 56
        pts = enumerate_simplex_lattice(3, 4)
        assert np.allclose(pts.sum(axis=1), 1)
        assert any(np.count_nonzero(p) == 1 for p in pts)

    def test_grid_below_gradient_oracle(self):
        rng = np.random.default_rng(11)
        for i in range(20):
            s = np.sort(db_to_linear(rng.uniform(0, 40, rng.integers(1, 5))))[::-1]
            grid = grid_search_p3(s, 0.01).best_capacity
            pga = projected_gradient_multistart("P3", [], s, seed=i).best_capacity
            assert grid <= pga + 1e-9


class TestMultistart:
    def test_table1(self):
        s = db_to_linear([22, 21, 20, 19])
        rep = projected_gradient_multistart("P3", [], s, n_starts=50, seed=0)
        assert rep.best_capacity == pytest.approx(joint_power_ris_alloc_1(s).capacity, abs=1e-4)
        assert rep.kkt_residual < KKT_TOL

    def test_table2(self):
        sd, sr = db_to_linear([20, 19, 18, 17]), db_to_linear([24, 22, 21, 20])
        rep = projected_gradient_multistart("P4", sd, sr, n_starts=50, seed=0)
        assert rep.best_capacity == pytest.approx(21.3817, abs=1e-3)
        assert rep.best_capacity == pytest.approx(
            joint_power_dir_ris_alloc_1(sd, sr).capacity, abs=1e-4)

    def test_single_beam(self):
        rep = projected_gradient_multistart("P3", [], [100.0], n_starts=5, seed=3)
        assert rep.best_r == pytest.approx([1.0])

    def test_deterministic_given_seed(self):
        s = db_to_linear([30, 25, 25])
        a = projected_gradient_multistart("P3", [], s, n_starts=10, seed=42)
        b = projected_gradient_multistart("P3", [], s, n_starts=10, seed=42)
        assert a.to_dict() == b.to_dict()
        assert a.seed == 42 and a.n_starts == 10

    @given(st.integers(0, 2 ** 31), st.sampled_from(["P3", "P4"]))
    def test_terminal_point_feasible_and_stationary(self, seed, kind):
        rng = np.random.default_rng(seed)
        obj = _objective(kind, rng)
        sd = obj.snr_direct if kind == "P4" else []
        rep = projected_gradient_multistart(kind, sd, obj.snr_reflected, n_starts=8, seed=seed)
        assert np.all(rep.best_r >= 0) and rep.best_r.sum() == pytest.approx(1, abs=1e-9)
        assert np.all(rep.best_q >= 0) and rep.best_q.sum() == pytest.approx(1, abs=1e-9)
        assert rep.kkt_residual < KKT_TOL
        if kind == "P3":
            x = rep.best_r
        else:
            x = np.concatenate([rep.best_r, rep.best_q])
        assert kkt_residual(obj, x)[0] < KKT_TOL

    @pytest.mark.parametrize("args", [("P3", [1.0], [1.0]), ("P5", [], [1.0]), ("P4", [], [])])
    def test_rejects(self, args):
        with pytest.raises(ValueError):
            projected_gradient_multistart(*args)

    def test_rejects_zero_starts(self):
        with pytest.raises(ValueError):
            projected_gradient_multistart("P3", [], [1.0], n_starts=0)

    def test_report_agreement(self):
        rep = projected_gradient_multistart("P3", [], [10.0], n_starts=2)
        assert check_agreement(rep, rep.best_capacity + 5e-5).agreement
        bad = check_agreement(rep, rep.best_capacity - 1e-3)
        assert not bad.agreement and bad.to_dict()["reference_capacity"] == pytest.approx(
            rep.best_capacity - 1e-3)


class TestSurface:
    def test_low_snr_endpoint_maxima(self):
        grid = capacity_surface(np.full(2, db_to_linear(5)), 200)
        maxima, minima = local_extrema_1d(grid.capacity)
        assert maxima == [0, 200]
        assert minima == [100]

    def test_high_snr_interior_maximum_with_flanking_minima(self):
        grid = capacity_surface(np.full(2, db_to_linear(30)), 200)
        maxima, minima = local_extrema_1d(grid.capacity)
        assert 100 in maxima
        assert grid.points[100, 0] == pytest.approx(0.5)
        assert any(i < 100 for i in minima) and any(i > 100 for i in minima)
        assert all(0 < i < 200 for i in minima)

    @given(st.floats(0, 40), st.integers(2, 100))
    def test_symmetric_for_equal_snr(self, db, res):
        grid = capacity_surface(np.full(2, db_to_linear(db)), res)
        assert np.allclose(grid.capacity, grid.capacity[::-1], atol=1e-12)

    def test_three_pairs(self):
        grid = capacity_surface([10.0, 20.0, 30.0], 10)
        assert len(grid.points) == 66
        assert len(grid.rows()[0]) == 3
        assert np.allclose(grid.points.sum(axis=1), 1)

    def test_rejects(self):
        with pytest.raises(ValueError):
            capacity_surface([1.0], 10)
        with pytest.raises(ValueError):
            capacity_surface([1.0, 1.0], 0)


def test_local_extrema():
    assert local_extrema_1d([0, 1, 0, 1, 0]) == ([1, 3], [0, 2, 4])
    assert local_extrema_1d([1, 1, 1]) == ([], [])
