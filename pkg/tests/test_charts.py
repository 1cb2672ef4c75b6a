"""Charts, metric fields, Christoffel symbols, geodesics, pushforwards."""
import numpy as np
import pytest

from geq.charts import (
    Chart,
    ChartMap,
    MetricField,
    PhasePoint,
    christoffel_at,
    compose_maps,
    fd_partials,
    integrate_geodesic,
    integrate_geodesics,
    metric_at,
    pushforward_metric,
)
from geq.errors import (
    DegenerateJacobian,
    NotPositiveDefinite,
    OutOfChart,
)


def constant_field(chart: Chart, matrix: np.ndarray) -> MetricField:
    matrix = np.asarray(matrix, dtype=float)

    def eval_fn(x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(matrix, x.shape[:-1] + matrix.shape).copy()

    return MetricField(chart=chart, eval=eval_fn, provenance="constant")


def flat_field(dim: int = 2, half: float = 2.0) -> MetricField:
    chart = Chart(dim, tuple((-half, half) for _ in range(dim)))
    return constant_field(chart, np.eye(dim))


def sphere_field(phi_hi: float = 7.0) -> MetricField:
    """Round 2-sphere in colatitude/longitude coordinates."""
    chart = Chart(2, ((0.2, np.pi - 0.2), (-1.0, phi_hi)))

    def eval_fn(x):
        x = np.asarray(x, dtype=float)
        g = np.zeros(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = 1.0
        g[..., 1, 1] = np.sin(x[..., 0]) ** 2
        return g

    return MetricField(chart=chart, eval=eval_fn, provenance="sphere")


class TestChart:
    def test_contains_is_batched(self):
        chart = Chart(2, ((0.0, 1.0), (0.0, 2.0)))
        pts = np.array([[0.5, 1.0], [1.5, 1.0], [0.5, -0.1]])
        assert chart.contains(pts).tolist() == [True, False, False]

    def test_margin_shrinks_the_box(self):
        chart = Chart(1, ((0.0, 1.0),))
        assert chart.contains(np.array([0.005]))
        assert not chart.contains(np.array([0.005]), margin=0.01)

    def test_degenerate_interval_rejected(self):
        with pytest.raises(ValueError):
            Chart(1, ((1.0, 1.0),))

    def test_grid_shape(self):
        chart = Chart(2, ((0.0, 1.0), (0.0, 1.0)))
        assert chart.grid(4).shape == (16, 2)

    def test_sample_respects_shrink(self):
        chart = Chart(2, ((0.0, 1.0), (0.0, 1.0)))
        pts = chart.sample(np.random.default_rng(0), 500, shrink=0.6)
        assert np.all(pts >= 0.2 - 1e-12) and np.all(pts <= 0.8 + 1e-12)


class TestMetricAt:
    def test_flat_identity(self):
        field = flat_field()
        got = metric_at(field, np.array([0.3, -0.1]))
        assert np.array_equal(got, np.eye(2))

    def test_output_exactly_symmetric(self):
        chart = Chart(2, ((-1.0, 1.0), (-1.0, 1.0)))
        asym = constant_field(chart, np.array([[2.0, 0.3], [0.1, 1.0]]))
        got = metric_at(asym, np.zeros(2))
        assert np.array_equal(got, got.T)
        assert got[0, 1] == pytest.approx(0.2)

    def test_out_of_chart(self):
        with pytest.raises(OutOfChart):
            metric_at(flat_field(), np.array([5.0, 0.0]))

    def test_not_positive_definite(self):
        chart = Chart(2, ((-1.0, 1.0), (-1.0, 1.0)))
        bad = constant_field(chart, np.diag([1.0, -1.0]))
        with pytest.raises(NotPositiveDefinite):
            metric_at(bad, np.zeros(2))


class TestPartialsAndChristoffel:
    def test_fd_matches_analytic(self):
        chart = Chart(2, ((-1.0, 1.0), (-1.0, 1.0)))

        def eval_fn(x):
            x = np.asarray(x, dtype=float)
            g = np.zeros(x.shape[:-1] + (2, 2))
            g[..., 0, 0] = 1.0 + x[..., 0] ** 2
            g[..., 1, 1] = 2.0 + np.sin(x[..., 1])
            return g

        def partials_fn(x):
            x = np.asarray(x, dtype=float)
            d = np.zeros(x.shape[:-1] + (2, 2, 2))
            d[..., 0, 0, 0] = 2.0 * x[..., 0]
            d[..., 1, 1, 1] = np.cos(x[..., 1])
            return d

        field = MetricField(chart=chart, eval=eval_fn, partials=partials_fn)
        pts = chart.sample(np.random.default_rng(1), 20, shrink=0.8)
        fd = fd_partials(field, pts)
        exact = partials_fn(pts)
        assert np.max(np.abs(fd - exact)) < 1e-6 * max(1.0, np.max(np.abs(exact)))

    def test_flat_christoffel_zero(self):
        got = christoffel_at(flat_field(), np.array([0.1, 0.2]))
        assert np.array_equal(got, np.zeros((2, 2, 2)))

    def test_sphere_christoffel_value(self):
        field = sphere_field()
        theta = np.pi / 3
        gamma = christoffel_at(field, np.array([theta, 0.5]))
        assert gamma[0, 1, 1] == pytest.approx(-np.sin(theta) * np.cos(theta), abs=1e-8)
        assert gamma[0, 1, 1] == pytest.approx(-0.4330127, abs=1e-6)
        assert gamma[1, 0, 1] == pytest.approx(np.cos(theta) / np.sin(theta), abs=1e-8)

    def test_christoffel_symmetric_in_lower_indices(self):
        field = sphere_field()
        pts = field.chart.sample(np.random.default_rng(2), 10, shrink=0.8)
        for p in pts:
            gamma = christoffel_at(field, p)
            assert np.allclose(gamma, np.swapaxes(gamma, 1, 2), atol=1e-12)

    def test_boundary_point_rejected(self):
        field = sphere_field()
        with pytest.raises(OutOfChart):
            christoffel_at(field, np.array([0.2, 0.0]))


class TestIntegrateGeodesic:
    def test_flat_straight_line(self):
        field = flat_field()
        traj = integrate_geodesic(field, PhasePoint([0.0, 0.0], [1.0, 0.0]), T=1.0, tol=1e-10)
        assert not traj.left_chart
        assert traj.end.x == pytest.approx([1.0, 0.0], abs=1e-9)
        assert traj.end.v == pytest.approx([1.0, 0.0], abs=1e-9)

    def test_flat_straight_line_fixed_steps(self):
        field = flat_field()
        traj = integrate_geodesic(field, PhasePoint([0.0, 0.0], [1.0, 0.0]), T=1.0,
                                  tol=1e-10, fixed_steps=16)
        assert len(traj.times) == 17
        assert traj.end.x == pytest.approx([1.0, 0.0], abs=1e-12)

    def test_great_circle_closes(self):
        field = sphere_field()
        start = PhasePoint([np.pi / 2, 0.0], [0.0, 1.0])
        traj = integrate_geodesic(field, start, T=2 * np.pi, tol=1e-10)
        assert not traj.left_chart
        assert traj.end.x[0] == pytest.approx(np.pi / 2, abs=1e-6)
        assert traj.end.x[1] == pytest.approx(2 * np.pi, abs=1e-6)
        assert traj.end.v == pytest.approx([0.0, 1.0], abs=1e-6)

    def test_energy_drift_below_hundred_tol(self):
        field = sphere_field()
        tol = 1e-10
        start = PhasePoint([1.0, 0.0], [0.3, 0.7])
        traj = integrate_geodesic(field, start, T=1.0, tol=tol)
        g0 = metric_at(field, traj.points[0])
        g1 = metric_at(field, traj.points[-1])
        e0 = traj.velocities[0] @ g0 @ traj.velocities[0]
        e1 = traj.velocities[-1] @ g1 @ traj.velocities[-1]
        assert abs(e1 - e0) / abs(e0) < 100 * tol

    def test_times_strictly_increasing(self):
        field = sphere_field()
        traj = integrate_geodesic(field, PhasePoint([1.0, 0.0], [0.3, 0.7]), T=1.0, tol=1e-8)
        assert np.all(np.diff(traj.times) > 0)
        assert np.all(field.chart.contains(traj.points))

    def test_boundary_truncation_flag(self):
        chart = Chart(2, ((0.0, 1.0), (0.0, 1.0)))
        field = constant_field(chart, np.eye(2))
        traj = integrate_geodesic(field, PhasePoint([0.5, 0.5], [1.0, 0.0]), T=2.0, tol=1e-8)
        assert traj.left_chart
        assert np.all(field.chart.contains(traj.points))
        assert traj.times[-1] < 2.0

    def test_batched_matches_single(self):
        field = sphere_field()
        starts_x = np.array([[1.0, 0.0], [1.4, 0.3]])
        starts_v = np.array([[0.3, 0.7], [-0.2, 0.5]])
        batch = integrate_geodesics(field, starts_x, starts_v, T=1.0, tol=1e-9)
        for b in range(2):
            single = integrate_geodesic(field, PhasePoint(starts_x[b], starts_v[b]),
                                        T=1.0, tol=1e-9)
            assert single.end.x == pytest.approx(batch[b].end.x, abs=1e-12)

    def test_tol_validation(self):
        field = flat_field()
        with pytest.raises(ValueError):
            integrate_geodesic(field, PhasePoint([0.0, 0.0], [1.0, 0.0]), T=1.0, tol=1e-2)
        with pytest.raises(ValueError):
            integrate_geodesic(field, PhasePoint([0.0, 0.0], [1.0, 0.0]), T=1.0, tol=1e-14)

    def test_zero_velocity_rejected(self):
        field = flat_field()
        with pytest.raises(ValueError):
            integrate_geodesic(field, PhasePoint([0.0, 0.0], [0.0, 0.0]), T=1.0, tol=1e-9)

    def test_start_outside_chart_rejected(self):
        field = flat_field()
        with pytest.raises(OutOfChart):
            integrate_geodesic(field, PhasePoint([5.0, 0.0], [1.0, 0.0]), T=1.0, tol=1e-9)


def polar_map() -> ChartMap:
    source = Chart(2, ((-1.0, 0.0), (0.2, 1.0)))

    def forward(y):
        y = np.asarray(y, dtype=float)
        r, phi = y[..., 0], y[..., 1]
        return np.stack([np.exp(r) * np.cos(phi), np.exp(r) * np.sin(phi)], axis=-1)

    def jacobian(y):
        y = np.asarray(y, dtype=float)
        r, phi = y[..., 0], y[..., 1]
        er = np.exp(r)
        j = np.empty(y.shape[:-1] + (2, 2))
        j[..., 0, 0] = er * np.cos(phi)
        j[..., 0, 1] = -er * np.sin(phi)
        j[..., 1, 0] = er * np.sin(phi)
        j[..., 1, 1] = er * np.cos(phi)
        return j

    return ChartMap(source=source, forward=forward, jacobian=jacobian)


class TestPushforward:
    def test_identity_map_keeps_field(self):
        field = flat_field()
        ident = ChartMap(source=field.chart, forward=lambda y: np.asarray(y, dtype=float))
        pushed = pushforward_metric(ident, field)
        pts = field.chart.sample(np.random.default_rng(3), 10)
        assert np.allclose(pushed.eval(pts), field.eval(pts), atol=1e-9)

    def test_flat_metric_under_polar_map(self):
        flat = Chart(2, ((-1.5, 1.5), (-1.5, 1.5)))
        field = constant_field(flat, np.eye(2))
        pushed = pushforward_metric(polar_map(), field)
        pts = pushed.chart.sample(np.random.default_rng(4), 50)
        expected = np.zeros((50, 2, 2))
        expected[:, 0, 0] = np.exp(2 * pts[:, 0])
        expected[:, 1, 1] = np.exp(2 * pts[:, 0])
        assert np.allclose(pushed.eval(pts), expected, atol=1e-12)

    def test_finite_difference_jacobian_path(self):
        flat = Chart(2, ((-1.5, 1.5), (-1.5, 1.5)))
        field = constant_field(flat, np.eye(2))
        analytic = polar_map()
        fd_map = ChartMap(source=analytic.source, forward=analytic.forward)
        pushed = pushforward_metric(fd_map, field)
        pts = fd_map.source.sample(np.random.default_rng(5), 20)
        expected = np.exp(2 * pts[:, 0])[:, None, None] * np.eye(2)
        assert np.allclose(pushed.eval(pts), expected, atol=1e-7)

    def test_functoriality(self):
        flat = Chart(2, ((-3.0, 3.0), (-3.0, 3.0)))
        field = constant_field(flat, np.array([[2.0, 0.5], [0.5, 1.0]]))
        inner = polar_map()
        a = np.array([[1.0, 0.3], [-0.2, 1.1]])
        mid = Chart(2, ((-1.5, 1.5), (-1.5, 1.5)))
        outer = ChartMap(
            source=mid,
            forward=lambda y: np.asarray(y, dtype=float) @ a.T,
            jacobian=lambda y: np.broadcast_to(a, np.asarray(y).shape[:-1] + (2, 2)).copy(),
        )
        twice = pushforward_metric(inner, pushforward_metric(outer, field))
        once = pushforward_metric(compose_maps(outer, inner), field)
        pts = inner.source.sample(np.random.default_rng(6), 30)
        assert np.allclose(twice.eval(pts), once.eval(pts), rtol=1e-9, atol=1e-9)

    def test_degenerate_jacobian_rejected(self):
        source = Chart(2, ((-1.0, 1.0), (0.0, 1.0)))

        def fold(y):
            y = np.asarray(y, dtype=float)
            return np.stack([y[..., 0] ** 2 / 2.0, y[..., 1]], axis=-1)

        field = constant_field(Chart(2, ((-2.0, 2.0), (-2.0, 2.0))), np.eye(2))
        with pytest.raises(DegenerateJacobian):
            pushforward_metric(ChartMap(source=source, forward=fold), field)

    def test_inverted_swaps_directions(self):
        source = Chart(2, ((0.0, 1.0), (0.0, 1.0)))
        target = Chart(2, ((0.0, 2.0), (0.0, 2.0)))
        cm = ChartMap(
            source=source,
            forward=lambda y: 2.0 * np.asarray(y, dtype=float),
            inverse=lambda x: 0.5 * np.asarray(x, dtype=float),
            inverse_source=target,
        )
        inv = cm.inverted()
        assert inv.source is target
        assert np.allclose(inv.forward(np.array([1.0, 2.0])), [0.5, 1.0])
        assert np.allclose(inv.inverse(np.array([0.5, 1.0])), [1.0, 2.0])
