"""Acceptance gate for the library's headline guarantees.

Each test pins one shipped guarantee at its published tolerance, so
``pytest tests/test_acceptance.py -v`` prints one pass/fail line per
guarantee.  Wall-clock budgets are asserted where a guarantee carries one.
"""

import time

import numpy as np
import pytest
import yaml
from click.testing import CliRunner

from geq import (
    Chart,
    FormKind,
    LeviCivitaData,
    LinearMap,
    PhasePoint,
    ScalarFunction1D,
    beltrami_pair,
    canonical_chart_map,
    check_conservation,
    check_equivalence,
    check_interlacing,
    circle_planarity,
    control_conformal_pair,
    glue_pair,
    integrate_geodesic,
    l_eigen,
    l_tensor,
    levi_civita_pair,
    make_triple,
    model_eigenvalues,
    model_form_pair,
    nijenhuis_at,
    nijenhuis_control_pair,
    oplus,
    pushforward_metric,
    random_levi_civita_data,
    sphere_chart,
    split_factors,
    split_pair,
    standard_form_spec,
    standard_pair,
)
from geq.cli import main
from geq.projective import CLUSTER_RADIUS
from geq.verify import EQUIVALENT_FAMILIES

DIAG_TOL = 1e-10
DRIFT_TOL = 1e-6
DEFECT_TOL = 1e-6
CONTROL_FLOOR = 1e-3
INTERLACE_EPS = 1e-9
PIN_TOL = 1e-9
ROUNDTRIP_TOL = 1e-12
EIGEN_FORMULA_TOL = 1e-8
PUSHFORWARD_TOL = 1e-8
ROTATION_TOL = 1e-12
PLANE_TOL = 1e-8
EIGENVECTOR_TOL = 1e-10
PLANARITY_TOL = 1e-9
IDENTITY_TOL = 1e-13
TORSION_TOL = 1e-6
TORSION_FLOOR = 0.1


@pytest.fixture(scope="module")
def lc_suite():
    """Twenty seeded separable pairs, five per dimension in 2..5."""
    rng = np.random.default_rng(2026)
    out = []
    for i in range(20):
        data = random_levi_civita_data(2 + (i % 4), rng)
        out.append((data, levi_civita_pair(data)))
    return out


def test_01_separable_model_tensor_is_diagonal(lc_suite):
    begin = time.perf_counter()
    rng = np.random.default_rng(101)
    worst = 0.0
    for data, pair in lc_suite:
        for x in pair.chart.sample(rng, 1000):
            expected = np.diag([lam(x[i]) for i, lam in enumerate(data.lambdas)])
            worst = max(worst, float(np.max(np.abs(l_tensor(pair, x) - expected))))
    elapsed = time.perf_counter() - begin
    print(f"diagonality worst={worst:.3e} elapsed={elapsed:.1f}s")
    assert worst < DIAG_TOL
    assert elapsed < 10.0


def test_02_polynomial_integrals_conserved_along_geodesics(lc_suite):
    begin = time.perf_counter()
    worst = 0.0
    for i, (_, pair) in enumerate(lc_suite):
        report = check_conservation(pair, n_traj=100, duration=1.0,
                                    tol=1e-10, seed=40 + i)
        assert len(report.t_values) == 5
        drifts = [row.rel_drift for row in report.rows
                  if row.integral_id.startswith(("integral_t=", "root_"))]
        assert len(drifts) == 100 * (5 + pair.dim - 1)  # n-1 roots per sample
        worst = max(worst, max(drifts))
    elapsed = time.perf_counter() - begin
    print(f"conservation worst drift={worst:.3e} elapsed={elapsed:.1f}s")
    assert worst < DRIFT_TOL
    assert elapsed < 120.0


def test_03_families_share_unparametrized_geodesics():
    begin = time.perf_counter()
    worst = {}
    for name in EQUIVALENT_FAMILIES:
        report = check_equivalence(standard_pair(name), n_traj=100,
                                   duration=1.0, tol=1e-10, seed=7)
        worst[name] = report.max_tangential_defect
    control = check_equivalence(control_conformal_pair(), n_traj=20,
                                duration=1.0, tol=1e-10, seed=7)
    elapsed = time.perf_counter() - begin
    print(f"defects={ {k: f'{v:.2e}' for k, v in worst.items()} } "
          f"control={control.max_tangential_defect:.2e} elapsed={elapsed:.1f}s")
    for name, defect in worst.items():
        assert defect < DEFECT_TOL, name
    assert control.max_tangential_defect > CONTROL_FLOOR
    assert elapsed < 180.0


def test_04_integral_roots_interlace_eigenvalues():
    for name in EQUIVALENT_FAMILIES:
        report = check_interlacing(standard_pair(name), n_points=1000,
                                   n_vectors=10, seed=11, epsilon=INTERLACE_EPS)
        assert report.samples == 10_000, name
        assert report.violations == 0, name

    # Roots stay pinned where neighboring eigenvalues coincide: probe each
    # family's coincidence locus explicitly.
    loci = {}
    origin = np.zeros((50, 2))
    loci["two_d_polar_plus"] = origin
    loci["two_d_polar_minus"] = origin
    axis3 = np.zeros((50, 3))
    axis3[:, 0] = np.linspace(-0.4, 0.4, 50)
    loci["three_d_axial"] = axis3
    loci["three_d_full"] = axis3
    for name, points in loci.items():
        pair = standard_pair(name)
        vals, _ = l_eigen(pair, points[0])
        assert np.min(np.diff(vals)) < CLUSTER_RADIUS  # the locus is genuine
        report = check_interlacing(pair, n_vectors=10, seed=11,
                                   epsilon=INTERLACE_EPS, points=points)
        assert report.violations == 0, name
        assert report.max_pin_deviation < PIN_TOL, name


def test_05_split_glue_roundtrip_and_associativity(lc_suite):
    rng = np.random.default_rng(17)

    # Entrywise identity at every dimension and cut, on pairs whose metric
    # entries are of unit order (the identity's floating-point error scales
    # with the entry magnitude, so wide profiles are checked relatively below).
    worst = 0.0
    for n in (2, 3, 4, 5):
        prng = np.random.default_rng(60 + n)
        chart = Chart(n, tuple((-0.5, 0.5) for _ in range(n)))
        lams = tuple(
            ScalarFunction1D((0.6 + 0.4 * i, *prng.uniform(-0.05, 0.05, 3)),
                             (-0.5, 0.5)) for i in range(n))
        pair = levi_civita_pair(LeviCivitaData(lambdas=lams, chart=chart))
        xs = pair.chart.sample(rng, 1000)
        for r in range(1, n):
            factor1, factor2 = split_factors(split_pair(pair, r))
            glued = glue_pair(factor1, factor2)
            for original, rebuilt in ((pair.g, glued.pair.g),
                                      (pair.gbar, glued.pair.gbar)):
                worst = max(worst, float(np.max(np.abs(
                    rebuilt.eval(xs) - original.eval(xs)))))
    print(f"roundtrip worst={worst:.3e}")
    assert worst < ROUNDTRIP_TOL

    # The wide seeded pairs reproduce at the same relative precision.
    worst_rel = 0.0
    for _, pair in lc_suite[:4]:  # one pair per dimension
        xs = pair.chart.sample(rng, 1000)
        for r in range(1, pair.dim):
            factor1, factor2 = split_factors(split_pair(pair, r))
            glued = glue_pair(factor1, factor2)
            for original, rebuilt in ((pair.g, glued.pair.g),
                                      (pair.gbar, glued.pair.gbar)):
                reference = original.eval(xs)
                scale = max(1.0, float(np.max(np.abs(reference))))
                worst_rel = max(worst_rel, float(np.max(np.abs(
                    rebuilt.eval(xs) - reference))) / scale)
    print(f"roundtrip worst relative={worst_rel:.3e}")
    assert worst_rel < ROUNDTRIP_TOL

    def level_triple(value):
        chart = Chart(1, ((-0.5, 0.5),))
        profile = ScalarFunction1D((value,), (-0.5, 0.5))
        return make_triple(levi_civita_pair(
            LeviCivitaData(lambdas=(profile,), chart=chart)))

    a, b, c = level_triple(1.0), level_triple(2.0), level_triple(3.0)
    left = oplus([a, b, c])
    right = glue_pair(a, glue_pair(b, c))
    xs = left.pair.chart.grid(4)
    assert left.pair.g.eval(xs) == pytest.approx(right.pair.g.eval(xs),
                                                 abs=ROUNDTRIP_TOL)
    assert left.pair.gbar.eval(xs) == pytest.approx(right.pair.gbar.eval(xs),
                                                    abs=ROUNDTRIP_TOL)
    assert left.eigen_range == right.eigen_range == (1.0, 3.0)


def test_06_closed_form_eigenvalues_and_pushforwards():
    rng = np.random.default_rng(19)
    for name in ("two_d_elliptic", "two_d_polar_plus", "two_d_polar_minus",
                 "three_d_axial", "three_d_full"):
        kind, params = standard_form_spec(name)
        pair = model_form_pair(kind, params)
        xs = pair.chart.sample(rng, 1500)
        if kind is FormKind.THREE_D_FULL:
            xs = xs[np.linalg.norm(xs[:, 1:], axis=1) >= 0.05]
        assert len(xs) >= 1000, name
        worst = 0.0
        for x in xs[:1000]:
            vals, _ = l_eigen(pair, x)
            formula = model_eigenvalues(kind, params, x)
            worst = max(worst, float(np.max(np.abs(vals - formula))))
        assert worst < EIGEN_FORMULA_TOL, name

    # Squares-of-coordinates map: the elliptic base metric becomes conformal.
    kind, params = standard_form_spec("two_d_elliptic")
    lam = params.lam
    pair = model_form_pair(kind, params)
    cm = canonical_chart_map(kind)
    pts = cm.source.sample(np.random.default_rng(30), 200)
    factor = 4.0 * (lam(pts[:, 1] ** 2) - lam(-pts[:, 0] ** 2))
    expected = factor[:, None, None] * np.eye(2)
    got = pushforward_metric(cm, pair.g).eval(pts)
    scale = max(1.0, float(np.max(np.abs(factor))))
    assert np.max(np.abs(got - expected)) < PUSHFORWARD_TOL * scale

    # Log-polar map: both polar families become explicit diagonal pairs.
    kind, params = standard_form_spec("two_d_polar_plus")
    f, lam1 = params.f, params.lam_const
    pair = model_form_pair(kind, params)
    cm = canonical_chart_map(kind)
    pts = cm.source.sample(np.random.default_rng(31), 200)
    r2 = np.exp(2.0 * pts[:, 0])
    got_g = pushforward_metric(cm, pair.g).eval(pts)
    expected_g = (r2 * f(r2))[:, None, None] * np.eye(2)
    assert np.max(np.abs(got_g - expected_g)) < PUSHFORWARD_TOL
    nu1, nu2 = lam1, lam1 * (1.0 + r2 * f(r2))
    got_gbar = pushforward_metric(cm, pair.gbar).eval(pts)
    expected_gbar = np.zeros_like(got_gbar)
    expected_gbar[:, 0, 0] = (nu2 - nu1) / (nu1**2 * nu2**2)
    expected_gbar[:, 1, 1] = (nu2 - nu1) / (nu1**3 * nu2)
    assert np.max(np.abs(got_gbar - expected_gbar)) < PUSHFORWARD_TOL

    kind, params = standard_form_spec("two_d_polar_minus")
    f, lam2 = params.f, params.lam_const
    pair = model_form_pair(kind, params)
    cm = canonical_chart_map(kind)
    pts = cm.source.sample(np.random.default_rng(32), 200)
    r2 = np.exp(2.0 * pts[:, 0])
    nu1, nu2 = lam2 * (1.0 - r2 * f(r2)), np.full(len(pts), lam2)
    got = pushforward_metric(cm, pair.gbar).eval(pts)
    expected = np.zeros_like(got)
    expected[:, 0, 0] = (nu2 - nu1) / (nu1**2 * nu2**2)
    expected[:, 1, 1] = (nu2 - nu1) / (nu1 * nu2**3)
    assert np.max(np.abs(got - expected)) < PUSHFORWARD_TOL

    # Cylindrical-elliptic map: the full spatial base metric diagonalizes.
    kind, params = standard_form_spec("three_d_full")
    lam, c = params.lam, params.c
    pair = model_form_pair(kind, params)
    cm = canonical_chart_map(kind, c=c).inverted()
    pts = cm.source.sample(np.random.default_rng(33), 200)
    got = pushforward_metric(cm, pair.g).eval(pts)
    x0, x2 = pts[:, 0], pts[:, 2]
    mu1, mu3, lam0 = lam(-x0), lam(x2), lam(0.0)
    expected = np.zeros_like(got)
    expected[:, 0, 0] = (mu3 - mu1) / x0
    expected[:, 1, 1] = (lam0 - mu1) * (mu3 - lam0)
    expected[:, 2, 2] = (mu3 - mu1) / x2
    scale = max(1.0, float(np.max(np.abs(expected))))
    assert np.max(np.abs(got - expected)) < PUSHFORWARD_TOL * scale


def test_07_axial_family_symmetries():
    kind, params = standard_form_spec("three_d_axial")
    pair = model_form_pair(kind, params)

    # Rotations about the symmetry axis leave both metric matrices invariant.
    rng = np.random.default_rng(23)
    pts = pair.chart.sample(rng, 20, shrink=0.7)
    for phi in (0.3, 1.2, 2.5):
        cos, sin = np.cos(phi), np.sin(phi)
        rot = np.array([[1.0, 0.0, 0.0], [0.0, cos, -sin], [0.0, sin, cos]])
        for field in (pair.g, pair.gbar):
            before = field.eval(pts)
            after = field.eval(pts @ rot.T)
            assert np.max(np.abs(after - rot @ before @ rot.T)) < ROTATION_TOL

    # The reflection plane is totally geodesic for both metrics.
    for field in (pair.g, pair.gbar):
        for k in range(5):
            r = np.random.default_rng(100 + k)
            start = np.array([r.uniform(-0.15, 0.15), 0.0, r.uniform(-0.15, 0.15)])
            vel = np.array([r.uniform(-0.4, 0.4), 0.0, r.uniform(-0.4, 0.4)])
            traj = integrate_geodesic(field, PhasePoint(start, vel),
                                      T=1.0, tol=1e-10)
            assert not traj.left_chart
            assert np.max(np.abs(traj.points[:, 1])) < PLANE_TOL

    # The plane's normal direction is an eigenvector on the plane.
    normal = np.array([0.0, 1.0, 0.0])
    for k in range(10):
        r = np.random.default_rng(200 + k)
        x = np.array([r.uniform(-0.4, 0.4), 0.0, r.uniform(-0.4, 0.4)])
        image = l_tensor(pair, x) @ normal
        mu = float(normal @ image)
        assert np.max(np.abs(image - mu * normal)) < EIGENVECTOR_TOL


def test_08_sphere_pullback_constructions():
    before, after = circle_planarity(sphere_chart(2),
                                     LinearMap.diagonal((1.0, 2.0, 3.0)),
                                     n_circles=50, seed=13)
    print(f"planarity before={before:.3e} after={after:.3e}")
    assert before < PLANARITY_TOL
    assert after < PLANARITY_TOL

    rng = np.random.default_rng(14)
    for dim in (2, 3):
        triple = beltrami_pair(dim)
        xs = triple.pair.chart.sample(rng, 200)
        gap = float(np.max(np.abs(triple.pair.gbar.eval(xs)
                                  - triple.pair.g.eval(xs))))
        assert gap < IDENTITY_TOL, dim

    triple = beltrami_pair(2, LinearMap.diagonal((1.0, 2.0, 3.0)))
    min_gap = np.inf
    for x in triple.pair.chart.sample(rng, 1000):
        vals, _ = l_eigen(triple.pair, x)
        min_gap = min(min_gap, float(np.min(np.diff(vals))))
    print(f"min eigen gap={min_gap:.3e}")
    assert min_gap > 0.0


def test_09_structure_tensor_torsion_free():
    rng = np.random.default_rng(29)
    worst = 0.0
    for name in EQUIVALENT_FAMILIES:
        pair = standard_pair(name)
        family_worst = max(float(np.max(np.abs(nijenhuis_at(pair, x))))
                           for x in pair.chart.sample(rng, 100, shrink=0.9))
        assert family_worst < TORSION_TOL, name
        worst = max(worst, family_worst)
    control = nijenhuis_control_pair()
    control_worst = max(float(np.max(np.abs(nijenhuis_at(control, x))))
                        for x in control.chart.sample(rng, 100, shrink=0.9))
    print(f"torsion worst={worst:.3e} control={control_worst:.3e}")
    assert control_worst > TORSION_FLOOR


def test_10_cli_determinism_and_exit_codes(tmp_path):
    runner = CliRunner()

    cfg = {
        "schema_version": 1,
        "seed": 3,
        "family": "lc_nd",
        "checks": {
            "equivalence": {"trajectories": 10},
            "conservation": {"trajectories": 5},
            "interlacing": {"points": 200},
        },
    }
    path = tmp_path / "suite.yaml"
    path.write_text(yaml.safe_dump(cfg))
    for out in ("a", "b"):
        result = runner.invoke(main, ["suite", "--config", str(path),
                                      "--out", str(tmp_path / out),
                                      "--format", "csv"])
        assert result.exit_code == 0, result.output
    report_a = (tmp_path / "a" / "suite_report.json").read_bytes()
    report_b = (tmp_path / "b" / "suite_report.json").read_bytes()
    assert report_a == report_b
    drifts_a = (tmp_path / "a" / "suite_drifts.csv").read_bytes()
    drifts_b = (tmp_path / "b" / "suite_drifts.csv").read_bytes()
    assert drifts_a == drifts_b
    assert (tmp_path / "a" / "suite_timings.json").exists()

    failing = dict(cfg, family="control_conformal",
                   checks={"equivalence": {"trajectories": 6}})
    fail_path = tmp_path / "failing.yaml"
    fail_path.write_text(yaml.safe_dump(failing))
    result = runner.invoke(main, ["suite", "--config", str(fail_path),
                                  "--out", str(tmp_path / "fail")])
    assert result.exit_code == 2

    broken = dict(cfg, familly=cfg.pop("family"))
    broken_path = tmp_path / "broken.yaml"
    broken_path.write_text(yaml.safe_dump(broken))
    result = runner.invoke(main, ["suite", "--config", str(broken_path),
                                  "--out", str(tmp_path / "broken")])
    assert result.exit_code == 1
    assert not (tmp_path / "broken" / "suite_report.json").exists()
