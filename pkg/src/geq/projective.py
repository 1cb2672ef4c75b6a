"""Tensor machinery for metric pairs sharing unparameterized geodesics.

Given a pair (g, gbar) on one chart, this module builds the compatibility
tensor ``L = (det gbar / det g)^{1/(n+1)} gbar^{-1} g``, the adjugate
polynomial family ``S_t = adj(L - t I)``, the quadratic-in-velocity
integrals ``I_t = g(S_t v, v)`` together with their interlaced roots, the
planar integral ``F``, and a finite-difference Nijenhuis torsion of the
``L`` field.
"""
from __future__ import annotations

import dataclasses
from typing import Sequence

import numpy as np

from .charts import FD_STEP, MetricField, PhasePoint, metric_at
from .errors import (
    BracketFailure,
    DimensionMismatch,
    NotPositiveDefinite,
    OutOfChart,
    SingularMetric,
)

Array = np.ndarray

# Eigenvalues closer than this are treated as one cluster (square root of
# double-precision epsilon, the resolution of symmetric eigensolvers).
CLUSTER_RADIUS = 1e-8

# Absolute width at which bracket bisection stops.
ROOT_TOL = 1e-12


@dataclasses.dataclass(frozen=True)
class MetricPair:
    """Two metrics on the same chart, a candidate geodesically equivalent
    pair."""

    g: MetricField
    gbar: MetricField
    provenance: str = ""

    def __post_init__(self) -> None:
        if self.g.chart != self.gbar.chart:
            raise ValueError("both metrics of a pair must live on the identical chart")

    @property
    def chart(self):
        return self.g.chart

    @property
    def dim(self) -> int:
        return self.g.chart.dim


@dataclasses.dataclass(frozen=True)
class PolyTensor:
    """A matrix-valued polynomial in ``t``: ``coeffs[k]`` multiplies ``t^k``."""

    degree: int
    coeffs: tuple[Array, ...]

    def __post_init__(self) -> None:
        if len(self.coeffs) != self.degree + 1:
            raise ValueError("coefficient list must have degree + 1 entries")

    def at(self, t: float) -> Array:
        out = np.zeros_like(self.coeffs[0])
        for k, c in enumerate(self.coeffs):
            out = out + c * t**k
        return out


@dataclasses.dataclass(frozen=True)
class RootSet:
    """Sorted roots of the integral polynomial plus the eigenvalue
    brackets that certified them."""

    roots: tuple[float, ...]
    brackets: tuple[tuple[float, float], ...]


# ---------------------------------------------------------------------------
# The compatibility tensor and its eigenstructure


def _l_many(pair: MetricPair, xs: Array, validate: bool = False) -> Array:
    """Batched tensor ``L`` of shape ``(..., n, n)``."""
    xs = np.asarray(xs, dtype=float)
    n = pair.dim
    g = pair.g.eval(xs)
    gb = pair.gbar.eval(xs)
    detg = np.linalg.det(g)
    detgb = np.linalg.det(gb)
    if validate and (np.any(detg <= 0.0) or np.any(detgb <= 0.0)):
        raise SingularMetric("a metric determinant is not positive")
    ratio = (detgb / detg) ** (1.0 / (n + 1))
    return ratio[..., None, None] * np.linalg.solve(gb, g)


def l_tensor(pair: MetricPair, x: Array) -> Array:
    """The tensor ``L`` at a single point, as a matrix in chart
    coordinates."""
    x = np.asarray(x, dtype=float)
    if not pair.chart.contains(x):
        raise OutOfChart(f"point {x.tolist()} outside chart box")
    return _l_many(pair, x[None, :], validate=True)[0]


def _l_eigen_many(pair: MetricPair, xs: Array) -> tuple[Array, Array]:
    """Batched eigenstructure of ``L``.

    Returns ascending eigenvalues ``(..., n)`` and eigenvector columns
    ``(..., n, n)`` orthonormal with respect to ``g`` — obtained from the
    symmetric matrix ``g L`` by congruence with the Cholesky factor of
    ``g``, which keeps the spectrum exactly real.
    """
    xs = np.asarray(xs, dtype=float)
    g = pair.g.eval(xs)
    a = g @ _l_many(pair, xs)
    a = 0.5 * (a + np.swapaxes(a, -1, -2))
    try:
        k = np.linalg.cholesky(g)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("base metric is not positive definite") from exc
    kt = np.swapaxes(k, -1, -2)
    b = np.linalg.solve(k, np.swapaxes(np.linalg.solve(k, a), -1, -2))
    b = 0.5 * (b + np.swapaxes(b, -1, -2))
    vals, y = np.linalg.eigh(b)
    vecs = np.linalg.solve(kt, y)
    return vals, vecs


def l_eigen(pair: MetricPair, x: Array) -> tuple[Array, Array]:
    """Eigenvalues (ascending) and eigenvector columns of ``L`` at one
    point; the eigenvectors are orthonormal in the ``g`` inner product."""
    x = np.asarray(x, dtype=float)
    if not pair.chart.contains(x):
        raise OutOfChart(f"point {x.tolist()} outside chart box")
    vals, vecs = _l_eigen_many(pair, x[None, :])
    return vals[0], vecs[0]


def _char_and_adjugate(L: Array) -> tuple[Array, Array]:
    """Characteristic and adjugate coefficients of ``L - t I``, batched.

    Returns ``(char, adj)`` where ``char[..., k]`` is the coefficient of
    ``t^k`` in ``det(L - t I)`` and ``adj[..., k, :, :]`` that of
    ``adj(L - t I)``, computed by the trace-driven adjugate recursion so
    the result stays well defined at repeated eigenvalues.
    """
    L = np.asarray(L, dtype=float)
    n = L.shape[-1]
    eye = np.broadcast_to(np.eye(n), L.shape)
    c = np.zeros(L.shape[:-2] + (n + 1,))
    c[..., n] = 1.0
    ms = []
    m = np.zeros_like(L)
    for k in range(1, n + 1):
        m = L @ m + c[..., n - k + 1, None, None] * eye
        ms.append(m)
        c[..., n - k] = -np.einsum("...ii->...", L @ m) / k
    sign = (-1.0) ** (n - 1)
    adj = np.stack([sign * ms[n - 1 - k] for k in range(n)], axis=-3)
    char = (-1.0) ** n * c
    return char, adj


def s_t(pair: MetricPair, x: Array) -> PolyTensor:
    """The adjugate polynomial ``S_t = adj(L - t I)`` at one point, as a
    degree ``n - 1`` matrix polynomial in ``t``."""
    L = l_tensor(pair, x)
    _, adj = _char_and_adjugate(L)
    n = pair.dim
    return PolyTensor(degree=n - 1, coeffs=tuple(adj[k] for k in range(n)))


# ---------------------------------------------------------------------------
# Integrals and their roots


def _integral_coeffs(pair: MetricPair, xs: Array, vs: Array) -> Array:
    """Coefficients ``(..., n)`` of ``t -> g(S_t v, v)``, batched."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    g = pair.g.eval(xs)
    _, adj = _char_and_adjugate(_l_many(pair, xs))
    return np.einsum("...i,...ij,...kjl,...l->...k", vs, g, adj, vs)


def i_t(pair: MetricPair, p: PhasePoint, t: float) -> float:
    """The integral ``I_t = g(S_t v, v)`` at a phase point."""
    if not pair.chart.contains(p.x):
        raise OutOfChart(f"point {p.x.tolist()} outside chart box")
    coeffs = _integral_coeffs(pair, p.x[None, :], p.v[None, :])[0]
    return float(np.polynomial.polynomial.polyval(t, coeffs))


def f_integral_2d(pair: MetricPair, p: PhasePoint) -> float:
    """The planar integral ``F = (det g / det gbar)^{2/3} gbar(v, v)``."""
    if pair.dim != 2:
        raise DimensionMismatch("the planar integral is defined only in dimension 2")
    g = metric_at(pair.g, p.x)
    gb = metric_at(pair.gbar, p.x)
    ratio = np.linalg.det(g) / np.linalg.det(gb)
    return float(ratio ** (2.0 / 3.0) * (p.v @ gb @ p.v))


def _reduced_poly_at(mu: Array, w: Array, t: Array) -> Array:
    """Evaluate ``R(t) = sum_j w_j prod_{a != j} (mu_a - t)`` rowwise.

    ``mu, w`` have shape ``(N, K)``; ``t`` has shape ``(N, B)``; the result
    has shape ``(N, B)``.
    """
    diff = mu[:, None, :] - t[:, :, None]
    k = mu.shape[1]
    out = np.zeros(t.shape)
    for j in range(k):
        mask = np.ones(k, dtype=bool)
        mask[j] = False
        out += w[:, None, j] * np.prod(diff[:, :, mask], axis=-1)
    return out


def _interlaced_roots(mu: Array, w: Array) -> Array:
    """Roots of the reduced polynomial inside consecutive brackets.

    ``mu`` holds strictly increasing rows ``(N, K)`` and ``w`` nonnegative
    weights; returns ``(N, K - 1)`` roots, one per bracket
    ``[mu_j, mu_{j+1}]``, by sign-oriented bisection.  Boundary roots
    (vanishing endpoint weight) converge to the endpoint.
    """
    n_rows, k = mu.shape
    if k <= 1:
        return np.empty((n_rows, 0))
    lo = mu[:, :-1].copy()
    hi = mu[:, 1:].copy()
    orient = (-1.0) ** np.arange(k - 1)
    for _ in range(90):
        if np.all(hi - lo < ROOT_TOL):
            break
        mid = 0.5 * (lo + hi)
        phi = orient * _reduced_poly_at(mu, w, mid)
        go_up = phi >= 0.0
        lo = np.where(go_up, mid, lo)
        hi = np.where(go_up, hi, mid)
    return 0.5 * (lo + hi)


def _cluster(mu: Array) -> list[tuple[int, int]]:
    """Consecutive index ranges of an ascending vector whose internal gaps
    stay within :data:`CLUSTER_RADIUS`."""
    spans = []
    start = 0
    for i in range(1, mu.shape[0] + 1):
        if i == mu.shape[0] or mu[i] - mu[i - 1] > CLUSTER_RADIUS:
            spans.append((start, i))
            start = i
    return spans


def _roots_one_point(mu: Array, w: Array) -> Array:
    """Sorted roots for one phase point, with repeated-eigenvalue pinning."""
    spans = _cluster(mu)
    pinned = []
    reps = []
    weights = []
    for lo, hi in spans:
        rep = float(np.mean(mu[lo:hi]))
        reps.append(rep)
        weights.append(float(np.sum(w[lo:hi])))
        pinned.extend([rep] * (hi - lo - 1))
    searched = _interlaced_roots(np.array([reps]), np.array([weights]))[0]
    return np.sort(np.concatenate([np.asarray(pinned), searched]))


def _roots_many(mu: Array, w: Array) -> Array:
    """Batched root computation: vectorized bisection when all eigenvalues
    are separated, per-point pinning otherwise."""
    if np.any(~np.isfinite(mu)) or np.any(~np.isfinite(w)):
        raise BracketFailure("eigenvalue or weight data is not finite")
    if np.any(w < -1e-12):
        raise BracketFailure("a squared frame coordinate came out negative")
    gaps = np.diff(mu, axis=-1)
    clustered = np.any(gaps <= CLUSTER_RADIUS, axis=-1)
    out = np.empty(mu.shape[:-1] + (mu.shape[-1] - 1,))
    plain = ~clustered
    if np.any(plain):
        out[plain] = _interlaced_roots(mu[plain], np.maximum(w[plain], 0.0))
    for idx in np.nonzero(clustered)[0]:
        out[idx] = _roots_one_point(mu[idx], np.maximum(w[idx], 0.0))
    return out


def frame_weights(pair: MetricPair, xs: Array, vs: Array) -> tuple[Array, Array]:
    """Eigenvalues ``(..., n)`` of ``L`` and squared coordinates of ``v``
    in the orthonormal eigenframe, batched."""
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    mu, vecs = _l_eigen_many(pair, xs)
    g = pair.g.eval(xs)
    xi = np.einsum("...ji,...jk,...k->...i", vecs, g, vs)
    return mu, xi**2


def integral_roots_many(pair: MetricPair, xs: Array, vs: Array) -> Array:
    """Roots of ``t -> I_t`` for a batch of phase points, ``(..., n - 1)``."""
    mu, w = frame_weights(pair, xs, vs)
    flat_mu = mu.reshape(-1, mu.shape[-1])
    flat_w = w.reshape(-1, w.shape[-1])
    roots = _roots_many(flat_mu, flat_w)
    return roots.reshape(mu.shape[:-1] + (mu.shape[-1] - 1,))


def integral_roots(pair: MetricPair, p: PhasePoint) -> RootSet:
    """The ``n - 1`` real roots of ``t -> I_t`` at a phase point, found by
    bisection inside the consecutive eigenvalue brackets (pinned without
    search when neighboring eigenvalues coincide)."""
    if not pair.chart.contains(p.x):
        raise OutOfChart(f"point {p.x.tolist()} outside chart box")
    mu, w = frame_weights(pair, p.x[None, :], p.v[None, :])
    roots = _roots_many(mu, w)[0]
    mu = mu[0]
    brackets = tuple((float(mu[i]), float(mu[i + 1])) for i in range(mu.shape[0] - 1))
    for i, r in enumerate(roots):
        if not (brackets[i][0] - 10 * CLUSTER_RADIUS <= r <= brackets[i][1] + 10 * CLUSTER_RADIUS):
            raise BracketFailure(
                f"root {r} escaped its bracket {brackets[i]}; the pair is likely "
                "not geodesically compatible")
    return RootSet(roots=tuple(float(r) for r in roots), brackets=brackets)


# ---------------------------------------------------------------------------
# Nijenhuis torsion


def _l_partials(pair: MetricPair, x: Array) -> Array:
    """Central differences of the ``L`` field: ``(..., k, i, j)`` holds
    the derivative of ``L^i_j`` along coordinate ``k``."""
    x = np.asarray(x, dtype=float)
    n = pair.dim
    h = FD_STEP * pair.chart.widths
    out = np.empty(x.shape[:-1] + (n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h[k]
        out[..., k, :, :] = (_l_many(pair, x + e) - _l_many(pair, x - e)) / (2.0 * h[k])
    return out


def nijenhuis_at(pair: MetricPair, x: Array) -> Array:
    """The Nijenhuis torsion ``N^k_{ij}`` of the ``L`` field at one point,
    computed from finite differences of ``L``; antisymmetric in ``(i, j)``."""
    x = np.asarray(x, dtype=float)
    if not pair.chart.contains(x, margin=2.0 * FD_STEP):
        raise OutOfChart(f"point {x.tolist()} is not strictly interior")
    L = l_tensor(pair, x)
    dL = _l_partials(pair, x[None, :])[0]
    term1 = np.einsum("mi,mkj->kij", L, dL)
    term2 = np.einsum("mj,mki->kij", L, dL)
    term3 = np.einsum("km,jmi->kij", L, dL)
    term4 = np.einsum("km,imj->kij", L, dL)
    return term1 - term2 + term3 - term4


# ---------------------------------------------------------------------------
# Sampling diagnostics


def eigen_range(pair: MetricPair, xs: Array) -> tuple[float, float]:
    """Smallest and largest eigenvalue of ``L`` over a point sample."""
    mu, _ = _l_eigen_many(pair, np.asarray(xs, dtype=float))
    return float(np.min(mu)), float(np.max(mu))


def max_eigen_multiplicity(pair: MetricPair, xs: Array) -> int:
    """Largest eigenvalue-cluster size of ``L`` over a point sample
    (cluster radius :data:`CLUSTER_RADIUS`)."""
    mu, _ = _l_eigen_many(pair, np.asarray(xs, dtype=float))
    flat = mu.reshape(-1, mu.shape[-1])
    worst = 1
    for row in flat:
        worst = max(worst, max(hi - lo for lo, hi in _cluster(row)))
    return worst


def poisson_bracket_fd(pair: MetricPair, x: Array, p: Array,
                       t1: float, t2: float, step: float = 1e-5) -> float:
    """Canonical Poisson bracket of ``I_{t1}`` and ``I_{t2}`` at a
    position/momentum point, by central finite differences."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    n = pair.dim

    def integral(t, xx, pp):
        g = pair.g.eval(xx[None, :])[0]
        v = np.linalg.solve(g, pp)
        return i_t(pair, PhasePoint(xx, v), t)

    def grad(t, xx, pp):
        dx = np.zeros(n)
        dp = np.zeros(n)
        for k in range(n):
            e = np.zeros(n)
            e[k] = step
            dx[k] = (integral(t, xx + e, pp) - integral(t, xx - e, pp)) / (2 * step)
            dp[k] = (integral(t, xx, pp + e) - integral(t, xx, pp - e)) / (2 * step)
        return dx, dp

    dx1, dp1 = grad(t1, x, p)
    dx2, dp2 = grad(t2, x, p)
    return float(dx1 @ dp2 - dp1 @ dx2)
