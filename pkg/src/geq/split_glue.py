"""Splitting a compatible metric pair into block factors and gluing factor
pairs into product pairs.

The splitting rebuilds, from the characteristic polynomials of the two
eigenvalue blocks of the compatibility tensor, a pair of block-diagonal
metrics whose blocks each depend only on their own coordinates; the gluing
is the exact inverse construction, and ``oplus`` is its associative fold.
"""
from __future__ import annotations

import dataclasses

import numpy as np

from .charts import Chart, MetricField, positivity_grid_size
from .errors import EigenOrderViolated, GapViolated, NotPositive
from .projective import MetricPair, _char_and_adjugate, _l_eigen_many, _l_many, eigen_range

Array = np.ndarray


@dataclasses.dataclass(frozen=True)
class SplitResult:
    """Block factorization of a pair: block size, the two block-diagonal
    metrics, and the coordinate-index partition."""

    r: int
    h: MetricField
    hbar: MetricField
    index_split: tuple[tuple[int, ...], tuple[int, ...]]


@dataclasses.dataclass(frozen=True)
class EquivTriple:
    """A compatible pair together with the sampled range of its
    compatibility-tensor eigenvalues."""

    pair: MetricPair
    eigen_range: tuple[float, float]

    def __post_init__(self) -> None:
        if self.eigen_range[0] <= 0.0:
            raise NotPositive("eigenvalue range must be positive")


def make_triple(pair: MetricPair) -> EquivTriple:
    """Wrap a pair with its eigenvalue range, sampled on a deterministic
    grid."""
    grid = pair.chart.grid(positivity_grid_size(pair.dim, per_axis_cap=16,
                                                total_cap=20_000))
    return EquivTriple(pair=pair, eigen_range=eigen_range(pair, grid))


def _poly_from_linear_factors(roots: Array) -> Array:
    """Ascending-in-``t`` coefficients of ``prod_j (roots_j - t)``,
    batched over leading axes."""
    roots = np.asarray(roots, dtype=float)
    m = roots.shape[-1]
    c = np.zeros(roots.shape[:-1] + (m + 1,))
    c[..., 0] = 1.0
    for j in range(m):
        shifted = np.zeros_like(c)
        shifted[..., 1:] = c[..., :-1]
        c = roots[..., j : j + 1] * c - shifted
    return c


def _matrix_poly(coeffs: Array, L: Array) -> Array:
    """Evaluate a scalar polynomial on a matrix by Horner's scheme,
    batched: ``sum_k coeffs[..., k] L^k``."""
    n = L.shape[-1]
    eye = np.broadcast_to(np.eye(n), L.shape)
    m = coeffs.shape[-1] - 1
    out = coeffs[..., m, None, None] * eye
    for k in range(m - 1, -1, -1):
        out = out @ L + coeffs[..., k, None, None] * eye
    return out


def split_tensors(pair: MetricPair, xs: Array, r: int) -> tuple[Array, Array]:
    """The block-recombination tensors of the splitting at a batch of
    points: the first converts the base metric into the block form, the
    second its companion (carrying the inverse block determinants)."""
    xs = np.asarray(xs, dtype=float)
    L = _l_many(pair, xs)
    mu, _ = _l_eigen_many(pair, xs)
    c1 = _poly_from_linear_factors(mu[..., :r])
    c2 = _poly_from_linear_factors(mu[..., r:])
    chi1 = _matrix_poly(c1, L)
    chi2 = _matrix_poly(c2, L)
    sign = (-1.0) ** r
    conv = sign * chi1 + chi2
    det1 = c1[..., 0]
    det2 = c2[..., 0]
    conv_bar = (sign / det1)[..., None, None] * chi1 + (1.0 / det2)[..., None, None] * chi2
    return conv, conv_bar


def split_pair(pair: MetricPair, r: int) -> SplitResult:
    """Split a pair into block-diagonal factor metrics along the sampled
    eigenvalue gap after position ``r``.

    Raises :class:`GapViolated` when the sampled eigenvalue ranges on the
    two sides of the cut overlap.
    """
    n = pair.dim
    if not 1 <= r < n:
        raise ValueError("the block size must satisfy 1 <= r < dim")
    grid = pair.chart.grid(positivity_grid_size(n, per_axis_cap=16, total_cap=20_000))
    mu, _ = _l_eigen_many(pair, grid)
    sup_low = float(np.max(mu[..., r - 1]))
    inf_high = float(np.min(mu[..., r]))
    if sup_low >= inf_high:
        raise GapViolated(
            f"eigenvalue ranges overlap across the cut: sup {sup_low} >= inf {inf_high}")

    def h_eval(xs: Array) -> Array:
        conv, _ = split_tensors(pair, xs, r)
        g = pair.g.eval(np.asarray(xs, dtype=float))
        out = np.linalg.solve(np.swapaxes(conv, -1, -2), g)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def hbar_eval(xs: Array) -> Array:
        _, conv_bar = split_tensors(pair, xs, r)
        gb = pair.gbar.eval(np.asarray(xs, dtype=float))
        out = np.linalg.solve(np.swapaxes(conv_bar, -1, -2), gb)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    tag = f"split(r={r}, {pair.provenance})"
    return SplitResult(
        r=r,
        h=MetricField(chart=pair.chart, eval=h_eval, provenance=tag),
        hbar=MetricField(chart=pair.chart, eval=hbar_eval, provenance=tag + "/companion"),
        index_split=(tuple(range(r)), tuple(range(r, n))),
    )


def _leaf_field(field: MetricField, indices: tuple[int, ...], frozen: Array,
                tag: str) -> MetricField:
    """Restrict a block-diagonal field to a coordinate leaf: the remaining
    coordinates are frozen and only the block of the given indices
    survives."""
    idx = np.asarray(indices)
    sub_chart = Chart(len(indices), tuple(field.chart.box[i] for i in indices))
    frozen = np.asarray(frozen, dtype=float)

    def eval_fn(xs: Array) -> Array:
        xs = np.asarray(xs, dtype=float)
        full = np.broadcast_to(frozen, xs.shape[:-1] + frozen.shape).copy()
        full[..., idx] = xs
        mats = field.eval(full)
        return mats[..., idx[:, None], idx[None, :]]

    return MetricField(chart=sub_chart, eval=eval_fn, provenance=tag)


def split_factors(split: SplitResult) -> tuple[EquivTriple, EquivTriple]:
    """The two factor triples of a splitting, each living on its own
    coordinate leaf through the chart center."""
    center = split.h.chart.center
    triples = []
    for indices in split.index_split:
        tag = split.h.provenance + f"/leaf{indices}"
        factor = MetricPair(
            g=_leaf_field(split.h, indices, center, tag),
            gbar=_leaf_field(split.hbar, indices, center, tag + "/companion"),
            provenance=tag,
        )
        triples.append(make_triple(factor))
    return triples[0], triples[1]


def glue_pair(factor1: EquivTriple, factor2: EquivTriple) -> EquivTriple:
    """Glue two factor triples into a compatible pair on the product chart.

    Requires the eigenvalue range of the first factor to lie strictly
    below that of the second (:class:`EigenOrderViolated` otherwise); the
    eigenvalues of the result are the union of the factors'.
    """
    lo1, hi1 = factor1.eigen_range
    lo2, hi2 = factor2.eigen_range
    if hi1 >= lo2:
        raise EigenOrderViolated(
            f"factor ranges must be strictly ordered: [{lo1}, {hi1}] vs [{lo2}, {hi2}]")
    p1, p2 = factor1.pair, factor2.pair
    r = p1.dim
    n = r + p2.dim
    chart = Chart(n, p1.chart.box + p2.chart.box)
    sign = (-1.0) ** r

    def blocks(xs: Array):
        xs = np.asarray(xs, dtype=float)
        x1 = xs[..., :r]
        x2 = xs[..., r:]
        l1 = _l_many(p1, x1)
        l2 = _l_many(p2, x2)
        c1, _ = _char_and_adjugate(l1)
        c2, _ = _char_and_adjugate(l2)
        conv1 = _matrix_poly(c2, l1)
        cross = _matrix_poly(c1, l2)
        conv2 = sign * cross
        bar1 = (1.0 / c2[..., 0])[..., None, None] * conv1
        bar2 = (sign / c1[..., 0])[..., None, None] * cross
        return x1, x2, conv1, conv2, bar1, bar2

    def assemble(xs: Array, use_companion: bool) -> Array:
        x1, x2, conv1, conv2, bar1, bar2 = blocks(xs)
        if use_companion:
            b1 = p1.gbar.eval(x1)
            b2 = p2.gbar.eval(x2)
            m1 = np.swapaxes(bar1, -1, -2) @ b1
            m2 = np.swapaxes(bar2, -1, -2) @ b2
        else:
            b1 = p1.g.eval(x1)
            b2 = p2.g.eval(x2)
            m1 = np.swapaxes(conv1, -1, -2) @ b1
            m2 = np.swapaxes(conv2, -1, -2) @ b2
        out = np.zeros(np.asarray(xs, dtype=float).shape[:-1] + (n, n))
        out[..., :r, :r] = 0.5 * (m1 + np.swapaxes(m1, -1, -2))
        out[..., r:, r:] = 0.5 * (m2 + np.swapaxes(m2, -1, -2))
        return out

    tag = f"glue({p1.provenance}, {p2.provenance})"
    pair = MetricPair(
        g=MetricField(chart=chart, eval=lambda xs: assemble(xs, False), provenance=tag),
        gbar=MetricField(chart=chart, eval=lambda xs: assemble(xs, True),
                         provenance=tag + "/companion"),
        provenance=tag,
    )
    return EquivTriple(pair=pair, eigen_range=(lo1, hi2))


def oplus(triples: list[EquivTriple]) -> EquivTriple:
    """Left fold of :func:`glue_pair` over an ordered factor list."""
    if not triples:
        raise ValueError("at least one factor is required")
    out = triples[0]
    for i, nxt in enumerate(triples[1:], start=1):
        try:
            out = glue_pair(out, nxt)
        except EigenOrderViolated as exc:
            raise EigenOrderViolated(
                f"factors {i - 1} and {i} violate the range ordering: {exc}") from exc
    return out
