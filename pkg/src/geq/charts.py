"""Coordinate charts, metric fields, Christoffel symbols, geodesic
integration, and pushforward of metrics under chart maps.

All heavy entry points are batched: a metric field maps an array of points
with shape ``(..., dim)`` to matrices of shape ``(..., dim, dim)``, and the
geodesic integrator advances a whole batch of trajectories in lockstep with
per-trajectory adaptive steps.
"""
from __future__ import annotations

import dataclasses
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import (
    DegenerateJacobian,
    NotPositiveDefinite,
    OutOfChart,
    SingularMetric,
    StepFailure,
)

Array = np.ndarray

# Relative finite-difference step (scaled by the per-axis box width).
FD_STEP = 1e-5


@dataclasses.dataclass(frozen=True)
class Chart:
    """A coordinate box: ``dim`` closed intervals."""

    dim: int
    box: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError("chart dimension must be >= 1")
        if len(self.box) != self.dim:
            raise ValueError("box must list one interval per dimension")
        for lo, hi in self.box:
            if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
                raise ValueError(f"degenerate interval ({lo}, {hi})")

    @property
    def lows(self) -> Array:
        return np.array([lo for lo, _ in self.box])

    @property
    def highs(self) -> Array:
        return np.array([hi for _, hi in self.box])

    @property
    def widths(self) -> Array:
        return self.highs - self.lows

    @property
    def center(self) -> Array:
        return 0.5 * (self.lows + self.highs)

    def contains(self, x: Array, margin: float = 0.0) -> Array:
        """Batched membership test; ``margin`` shrinks the box (in units of
        the per-axis width) for strict-interior queries."""
        x = np.asarray(x, dtype=float)
        pad = margin * self.widths
        return np.all((x >= self.lows + pad) & (x <= self.highs - pad), axis=-1)

    def grid(self, per_axis: int) -> Array:
        """Regular grid of shape ``(per_axis**dim, dim)``."""
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in self.box]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def sample(self, rng: np.random.Generator, count: int, shrink: float = 1.0) -> Array:
        """Uniform points in the centrally rescaled box (``shrink=0.6`` keeps
        the middle 60% per axis)."""
        half = 0.5 * shrink * self.widths
        return rng.uniform(self.center - half, self.center + half, size=(count, self.dim))

    def shrunk(self, factor: float) -> "Chart":
        half = 0.5 * factor * self.widths
        c = self.center
        return Chart(self.dim, tuple((c[i] - half[i], c[i] + half[i]) for i in range(self.dim)))


def positivity_grid_size(dim: int, per_axis_cap: int = 64, total_cap: int = 100_000) -> int:
    """Points per axis for dense positivity sampling: ``per_axis_cap`` per
    axis, capped so the full grid stays below ``total_cap`` points."""
    return max(2, min(per_axis_cap, int(total_cap ** (1.0 / dim))))


@dataclasses.dataclass(frozen=True)
class MetricField:
    """A chart-local Riemannian metric.

    ``eval`` maps points ``(..., dim)`` to symmetric matrices
    ``(..., dim, dim)``; ``partials``, when present, maps points to
    ``(..., dim, dim, dim)`` arrays whose ``[k, i, j]`` entry is
    ``d g_ij / d x_k``.
    """

    chart: Chart
    eval: Callable[[Array], Array]
    partials: Optional[Callable[[Array], Array]] = None
    provenance: str = ""


def metric_at(field: MetricField, x: Array) -> Array:
    """Metric matrix at a single point, symmetrized; raises
    :class:`OutOfChart` outside the box and :class:`NotPositiveDefinite`
    when the minimum eigenvalue is not positive."""
    x = np.asarray(x, dtype=float)
    if x.shape != (field.chart.dim,):
        raise ValueError(f"expected a point of dimension {field.chart.dim}")
    if not field.chart.contains(x):
        raise OutOfChart(f"point {x.tolist()} outside chart box")
    m = field.eval(x[None, :])[0]
    m = 0.5 * (m + m.T)
    if np.linalg.eigvalsh(m)[0] <= 0.0:
        raise NotPositiveDefinite(f"metric not positive definite at {x.tolist()}")
    return m


def fd_partials(field: MetricField, x: Array, step: float = FD_STEP) -> Array:
    """Central finite differences of the metric, batched.

    Returns ``(..., dim, dim, dim)`` with axis ``-3`` indexing the
    differentiation direction.  Each derivative is cross-checked against a
    half-step estimate; where the two disagree by more than ``1e-4``
    relative, the Richardson-extrapolated combination is used instead.
    """
    x = np.asarray(x, dtype=float)
    n = field.chart.dim
    h = step * field.chart.widths
    out = np.empty(x.shape[:-1] + (n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h[k]
        d_full = (field.eval(x + e) - field.eval(x - e)) / (2.0 * h[k])
        d_half = (field.eval(x + 0.5 * e) - field.eval(x - 0.5 * e)) / h[k]
        mismatch = np.abs(d_full - d_half) > 1e-4 * np.maximum(1.0, np.abs(d_half))
        d = np.where(mismatch, (4.0 * d_half - d_full) / 3.0, d_half)
        out[..., k, :, :] = d
    return out


def metric_partials(field: MetricField, x: Array) -> Array:
    """Analytic partials when available, central differences otherwise."""
    if field.partials is not None:
        return field.partials(np.asarray(x, dtype=float))
    return fd_partials(field, x)


def christoffel(field: MetricField, x: Array) -> Array:
    """Batched Christoffel symbols ``Gamma^k_ij`` of shape
    ``(..., dim, dim, dim)`` with the upper index first."""
    x = np.asarray(x, dtype=float)
    n = field.chart.dim
    g = field.eval(x)
    dg = metric_partials(field, x)
    # T_{l i j} = d_i g_{jl} + d_j g_{il} - d_l g_{ij}
    t = (np.moveaxis(dg, (-3, -2, -1), (-2, -1, -3))
         + np.moveaxis(dg, (-3, -2, -1), (-1, -2, -3))
         - dg)
    flat = t.reshape(t.shape[:-2] + (n * n,))
    try:
        gamma = 0.5 * np.linalg.solve(g, flat)
    except np.linalg.LinAlgError as exc:
        raise SingularMetric("metric inversion failed while forming Christoffel symbols") from exc
    return gamma.reshape(t.shape)


def christoffel_at(field: MetricField, x: Array) -> Array:
    """Christoffel symbols at a single strictly interior point."""
    x = np.asarray(x, dtype=float)
    if not field.chart.contains(x, margin=2.0 * FD_STEP):
        raise OutOfChart(
            f"point {x.tolist()} is not strictly interior (finite-difference stencil must fit)")
    return christoffel(field, x[None, :])[0]


@dataclasses.dataclass(frozen=True)
class PhasePoint:
    """A tangent-bundle point: base coordinates plus velocity components."""

    x: Array
    v: Array

    def __post_init__(self) -> None:
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))


@dataclasses.dataclass(frozen=True)
class StepperStats:
    accepted: int
    rejected: int
    tol: float


@dataclasses.dataclass(frozen=True)
class Trajectory:
    """A geodesic trajectory: sample arrays plus integrator bookkeeping.

    ``left_chart`` is set when integration stopped at the box boundary; the
    stored samples all lie inside the box.
    """

    times: Array
    points: Array
    velocities: Array
    left_chart: bool
    stepper_stats: StepperStats

    @property
    def samples(self) -> list[tuple[float, PhasePoint]]:
        return [(float(t), PhasePoint(x, v))
                for t, x, v in zip(self.times, self.points, self.velocities)]

    @property
    def end(self) -> PhasePoint:
        return PhasePoint(self.points[-1], self.velocities[-1])


# Dormand-Prince 5(4) tableau.
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([]),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_DP_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_DP_E = _DP_B5 - _DP_B4

_MAX_STEPS = 1_000_000


def _geodesic_rhs(field: MetricField, y: Array) -> Array:
    """Right-hand side of the first-order geodesic system on states
    ``y = (x, v)`` of shape ``(B, 2 dim)``."""
    n = field.chart.dim
    x, v = y[:, :n], y[:, n:]
    gamma = christoffel(field, x)
    acc = -np.einsum("bkij,bi,bj->bk", gamma, v, v)
    return np.concatenate([v, acc], axis=1)


def integrate_geodesics(
    field: MetricField,
    starts_x: Array,
    starts_v: Array,
    T: float,
    tol: float,
    fixed_steps: Optional[int] = None,
) -> list[Trajectory]:
    """Integrate a batch of geodesics of ``field`` up to time ``T``.

    Adaptive embedded Runge-Kutta 5(4) with per-trajectory step control and
    first-same-as-last stage reuse; ``fixed_steps`` switches to a uniform
    step count for bitwise reproducibility studies.  Trajectories that reach
    the chart boundary are truncated and flagged.
    """
    if not (1e-13 <= tol <= 1e-3):
        raise ValueError("tol must lie in [1e-13, 1e-3]")
    if T <= 0:
        raise ValueError("T must be positive")
    starts_x = np.atleast_2d(np.asarray(starts_x, dtype=float))
    starts_v = np.atleast_2d(np.asarray(starts_v, dtype=float))
    n = field.chart.dim
    B = starts_x.shape[0]
    if starts_x.shape != (B, n) or starts_v.shape != (B, n):
        raise ValueError("start arrays must have shape (batch, dim)")
    if not bool(np.all(field.chart.contains(starts_x))):
        raise OutOfChart("a trajectory start lies outside the chart box")
    if not np.all(np.isfinite(starts_v)) or np.any(np.all(starts_v == 0.0, axis=1)):
        raise ValueError("trajectory start velocities must be finite and nonzero")

    if fixed_steps is not None:
        return _integrate_fixed(field, starts_x, starts_v, T, tol, fixed_steps)

    y = np.concatenate([starts_x, starts_v], axis=1)
    t = np.zeros(B)
    dt = np.full(B, min(0.05, T / 4.0))
    active = np.ones(B, dtype=bool)
    left = np.zeros(B, dtype=bool)
    accepted = np.zeros(B, dtype=int)
    rejected = np.zeros(B, dtype=int)
    times: list[list[float]] = [[0.0] for _ in range(B)]
    xs: list[list[Array]] = [[starts_x[b].copy()] for b in range(B)]
    vs: list[list[Array]] = [[starts_v[b].copy()] for b in range(B)]

    k1 = _geodesic_rhs(field, y)
    total_steps = 0
    while active.any():
        total_steps += 1
        if total_steps > _MAX_STEPS:
            raise StepFailure("step cap exceeded")
        idx = np.nonzero(active)[0]
        ya, dta, k1a = y[idx], np.minimum(dt[idx], T - t[idx]), k1[idx]
        k = np.empty((7, len(idx), ya.shape[1]))
        k[0] = k1a
        for s in range(1, 7):
            incr = np.tensordot(_DP_A[s], k[:s], axes=(0, 0))
            k[s] = _geodesic_rhs(field, ya + dta[:, None] * incr)
        y5 = ya + dta[:, None] * np.tensordot(_DP_B5, k, axes=(0, 0))
        err_vec = dta[:, None] * np.tensordot(_DP_E, k, axes=(0, 0))
        scale = tol + tol * np.maximum(np.abs(ya), np.abs(y5))
        err = np.sqrt(np.mean((err_vec / scale) ** 2, axis=1))
        err = np.where(np.isfinite(err), err, np.inf)

        ok = err <= 1.0
        factor = np.where(err > 0, 0.9 * err ** -0.2, 5.0)
        factor = np.clip(np.where(np.isfinite(factor), factor, 0.2), 0.2, 5.0)

        for local, b in enumerate(idx):
            if ok[local]:
                accepted[b] += 1
                t[b] += dta[local]
                y[b] = y5[local]
                k1[b] = k[6, local]
                if field.chart.contains(y[b, :n]):
                    times[b].append(t[b])
                    xs[b].append(y[b, :n].copy())
                    vs[b].append(y[b, n:].copy())
                    if t[b] >= T - 1e-14:
                        active[b] = False
                else:
                    left[b] = True
                    active[b] = False
            else:
                rejected[b] += 1
            dt[b] = dta[local] * factor[local]
            if active[b] and dt[b] < 1e-14 * max(T, 1.0):
                raise StepFailure(f"step size underflow in trajectory {b}")

    return [
        Trajectory(
            times=np.array(times[b]),
            points=np.array(xs[b]),
            velocities=np.array(vs[b]),
            left_chart=bool(left[b]),
            stepper_stats=StepperStats(int(accepted[b]), int(rejected[b]), tol),
        )
        for b in range(B)
    ]


def _integrate_fixed(
    field: MetricField,
    starts_x: Array,
    starts_v: Array,
    T: float,
    tol: float,
    steps: int,
) -> list[Trajectory]:
    if steps < 1:
        raise ValueError("fixed_steps must be >= 1")
    n = field.chart.dim
    B = starts_x.shape[0]
    y = np.concatenate([starts_x, starts_v], axis=1)
    dt = T / steps
    active = np.ones(B, dtype=bool)
    left = np.zeros(B, dtype=bool)
    times = [[0.0] for _ in range(B)]
    xs = [[starts_x[b].copy()] for b in range(B)]
    vs = [[starts_v[b].copy()] for b in range(B)]
    for step in range(1, steps + 1):
        idx = np.nonzero(active)[0]
        if idx.size == 0:
            break
        ya = y[idx]
        k = np.empty((7, len(idx), 2 * n))
        k[0] = _geodesic_rhs(field, ya)
        for s in range(1, 7):
            incr = np.tensordot(_DP_A[s], k[:s], axes=(0, 0))
            k[s] = _geodesic_rhs(field, ya + dt * incr)
        y5 = ya + dt * np.tensordot(_DP_B5, k, axes=(0, 0))
        for local, b in enumerate(idx):
            y[b] = y5[local]
            if field.chart.contains(y[b, :n]):
                times[b].append(step * dt)
                xs[b].append(y[b, :n].copy())
                vs[b].append(y[b, n:].copy())
            else:
                left[b] = True
                active[b] = False
    return [
        Trajectory(
            times=np.array(times[b]),
            points=np.array(xs[b]),
            velocities=np.array(vs[b]),
            left_chart=bool(left[b]),
            stepper_stats=StepperStats(len(times[b]) - 1, 0, tol),
        )
        for b in range(B)
    ]


def integrate_geodesic(
    field: MetricField,
    start: PhasePoint,
    T: float,
    tol: float,
    fixed_steps: Optional[int] = None,
) -> Trajectory:
    """Single-trajectory convenience wrapper around
    :func:`integrate_geodesics`."""
    return integrate_geodesics(field, start.x[None, :], start.v[None, :], T, tol,
                               fixed_steps=fixed_steps)[0]


@dataclasses.dataclass(frozen=True)
class ChartMap:
    """A differentiable map between charts.

    ``forward`` maps points of ``source`` into the target chart;
    ``jacobian`` returns ``(..., target_dim, source_dim)`` arrays (computed
    by finite differences when absent).  ``inverse`` and
    ``inverse_jacobian`` describe the reverse direction when available;
    ``inverse_source`` is the chart on which the inverse is defined.
    """

    source: Chart
    forward: Callable[[Array], Array]
    jacobian: Optional[Callable[[Array], Array]] = None
    inverse: Optional[Callable[[Array], Array]] = None
    inverse_jacobian: Optional[Callable[[Array], Array]] = None
    inverse_source: Optional[Chart] = None

    def jacobian_at(self, y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        if self.jacobian is not None:
            return self.jacobian(y)
        h = FD_STEP * self.source.widths
        cols = []
        for k in range(self.source.dim):
            e = np.zeros(self.source.dim)
            e[k] = h[k]
            cols.append((self.forward(y + e) - self.forward(y - e)) / (2.0 * h[k]))
        return np.stack(cols, axis=-1)

    def inverted(self) -> "ChartMap":
        if self.inverse is None or self.inverse_source is None:
            raise ValueError("this chart map does not carry an inverse")
        return ChartMap(
            source=self.inverse_source,
            forward=self.inverse,
            jacobian=self.inverse_jacobian,
            inverse=self.forward,
            inverse_jacobian=self.jacobian,
            inverse_source=self.source,
        )


def compose_maps(outer: ChartMap, inner: ChartMap) -> ChartMap:
    """The composite map ``outer o inner`` with chain-rule Jacobian."""

    def forward(y: Array) -> Array:
        return outer.forward(inner.forward(y))

    def jacobian(y: Array) -> Array:
        ji = inner.jacobian_at(y)
        jo = outer.jacobian_at(inner.forward(y))
        return jo @ ji

    return ChartMap(source=inner.source, forward=forward, jacobian=jacobian)


def pushforward_metric(chart_map: ChartMap, field: MetricField,
                       validation_points: int = 5) -> MetricField:
    """The metric of ``field`` expressed in the coordinates of
    ``chart_map.source``: ``J^T g(map(y)) J``.

    The Jacobian is validated on a small grid; a sampled
    ``|det J| < 1e-12`` raises :class:`DegenerateJacobian`.
    """
    grid = chart_map.source.grid(validation_points)
    dets = np.linalg.det(chart_map.jacobian_at(grid))
    if np.any(np.abs(dets) < 1e-12):
        raise DegenerateJacobian("chart map Jacobian is numerically singular on the source box")

    def eval_fn(y: Array) -> Array:
        y = np.asarray(y, dtype=float)
        j = chart_map.jacobian_at(y)
        g = field.eval(chart_map.forward(y))
        out = np.swapaxes(j, -1, -2) @ g @ j
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    return MetricField(chart=chart_map.source, eval=eval_fn, partials=None,
                       provenance=f"pushforward({field.provenance})")
