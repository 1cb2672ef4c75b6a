"""Command-line interface: config ingestion, check orchestration, report
persistence, and CI exit semantics.

Exit codes: 0 when every requested check passes, 2 when any check fails
its threshold, 1 on configuration or build errors.  Reports are JSON
(deterministic bytes for identical configs); wall-clock timings go to a
separate sidecar file so the main report stays byte-stable.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import time
from typing import Any

import click
import numpy as np
import yaml

from . import __version__
from .charts import Chart
from .constructions import (LinearMap, beltrami_pair, circle_planarity,
                            sphere_chart, spheres_product)
from .errors import GeqError, ParseError, SchemaError
from .normal_forms import (FormKind, LeviCivitaData, ScalarFunction1D,
                           levi_civita_pair, model_eigenvalues)
from .projective import MetricPair, _l_eigen_many, max_eigen_multiplicity
from .split_glue import glue_pair, make_triple, oplus, split_factors, split_pair
from .verify import (STANDARD_FAMILIES, check_conservation, check_equivalence,
                     check_interlacing, standard_form_spec, standard_pair)

SCHEMA_VERSION = 1

CHECK_DEFAULTS: dict[str, dict[str, Any]] = {
    "equivalence": {"trajectories": 100, "duration": 1.0, "threshold": 1e-6},
    "conservation": {"trajectories": 20, "duration": 1.0, "threshold": 1e-6},
    "interlacing": {"points": 100, "vectors": 10, "epsilon": 1e-9},
    "roundtrip": {"block": 1, "points": 1000, "threshold": 1e-12},
    "normal_form": {"points": 500, "threshold": 1e-8, "exclude_radius": 0.05},
}
CHECK_ORDER = ("equivalence", "conservation", "interlacing", "roundtrip",
               "normal_form")
_TOP_FIELDS = {"schema_version", "seed", "family", "tol", "out", "checks"}
_FAMILY_KINDS = {"lc", "beltrami", "product"}
DEFAULT_TOL = 1e-10


@dataclasses.dataclass(frozen=True)
class SuiteConfig:
    """Validated suite configuration."""

    schema_version: int
    seed: int
    family: Any  # registry name or canonical recipe mapping
    tol: float
    out: str | None
    checks: dict[str, dict[str, Any]]

    def canonical(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "family": self.family,
            "tol": self.tol,
            "checks": self.checks,
        }


def _fail(path: str, message: str) -> None:
    raise SchemaError(f"{path}: {message}")


def _expect_mapping(value, path: str) -> dict:
    if not isinstance(value, dict):
        _fail(path, "expected a mapping")
    return value


def _expect_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        _fail(path, "expected an integer")
    return value


def _expect_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(path, "expected a number")
    return float(value)


def _expect_positive(value, path: str) -> float:
    number = _expect_number(value, path)
    if number <= 0.0:
        _fail(path, "must be positive")
    return number


def _expect_number_list(value, path: str, length: int | None = None) -> list[float]:
    if not isinstance(value, list) or not value:
        _fail(path, "expected a non-empty list of numbers")
    if length is not None and len(value) != length:
        _fail(path, f"expected exactly {length} entries")
    return [_expect_number(v, f"{path}[{i}]") for i, v in enumerate(value)]


def _validate_sphere_factor(raw, path: str) -> dict:
    factor = _expect_mapping(raw, path)
    allowed = {"dim", "diag", "pole"}
    for key in factor:
        if key not in allowed:
            _fail(f"{path}.{key}", "unknown field")
    if "dim" not in factor:
        _fail(f"{path}.dim", "missing required field")
    dim = _expect_int(factor["dim"], f"{path}.dim")
    if dim < 1:
        _fail(f"{path}.dim", "must be at least 1")
    out: dict[str, Any] = {"dim": dim}
    if "diag" in factor:
        out["diag"] = _expect_number_list(factor["diag"], f"{path}.diag", dim + 1)
    if "pole" in factor:
        out["pole"] = _expect_number_list(factor["pole"], f"{path}.pole", dim + 1)
    return out


def _validate_family(raw, path: str = "family"):
    if isinstance(raw, str):
        if raw not in STANDARD_FAMILIES:
            _fail(path, f"unknown family {raw!r}; known: {', '.join(STANDARD_FAMILIES)}")
        return raw
    spec = _expect_mapping(raw, path)
    if len(spec) != 1 or next(iter(spec)) not in _FAMILY_KINDS:
        _fail(path, f"expected a name or one recipe key of {sorted(_FAMILY_KINDS)}")
    kind, body = next(iter(spec.items()))
    body = _expect_mapping(body, f"{path}.{kind}")
    if kind == "lc":
        allowed = {"profiles", "interval"}
        for key in body:
            if key not in allowed:
                _fail(f"{path}.lc.{key}", "unknown field")
        if "profiles" not in body:
            _fail(f"{path}.lc.profiles", "missing required field")
        profiles = body["profiles"]
        if not isinstance(profiles, list) or not profiles:
            _fail(f"{path}.lc.profiles", "expected a non-empty list of coefficient lists")
        rows = [_expect_number_list(row, f"{path}.lc.profiles[{i}]")
                for i, row in enumerate(profiles)]
        for i, row in enumerate(rows):
            if len(row) > 4:
                _fail(f"{path}.lc.profiles[{i}]", "profiles have degree at most 3")
        interval = _expect_number_list(body.get("interval", [-0.5, 0.5]),
                                       f"{path}.lc.interval", 2)
        if interval[0] >= interval[1]:
            _fail(f"{path}.lc.interval", "lower bound must be below upper bound")
        return {"lc": {"profiles": rows, "interval": interval}}
    if kind == "beltrami":
        return {"beltrami": _validate_sphere_factor(body, f"{path}.beltrami")}
    factors = body.get("factors")
    for key in body:
        if key != "factors":
            _fail(f"{path}.product.{key}", "unknown field")
    if not isinstance(factors, list) or not factors:
        _fail(f"{path}.product.factors", "expected a non-empty list")
    return {"product": {"factors": [
        _validate_sphere_factor(f, f"{path}.product.factors[{i}]")
        for i, f in enumerate(factors)]}}


def _validate_checks(raw, path: str = "checks") -> dict[str, dict[str, Any]]:
    if raw is None:
        requested = {name: {} for name in ("equivalence", "conservation",
                                           "interlacing")}
    else:
        requested = _expect_mapping(raw, path)
    checks: dict[str, dict[str, Any]] = {}
    for name, body in requested.items():
        if name not in CHECK_DEFAULTS:
            _fail(f"{path}.{name}", f"unknown check; known: {', '.join(CHECK_ORDER)}")
        merged = dict(CHECK_DEFAULTS[name])
        body = _expect_mapping(body if body is not None else {}, f"{path}.{name}")
        for key, value in body.items():
            if key not in merged:
                _fail(f"{path}.{name}.{key}", "unknown field")
            if key in ("trajectories", "points", "vectors", "block"):
                merged[key] = _expect_int(value, f"{path}.{name}.{key}")
                if merged[key] < 1:
                    _fail(f"{path}.{name}.{key}", "must be at least 1")
            elif key == "exclude_radius":
                merged[key] = _expect_number(value, f"{path}.{name}.{key}")
            else:
                merged[key] = _expect_positive(value, f"{path}.{name}.{key}")
        checks[name] = merged
    return {name: checks[name] for name in CHECK_ORDER if name in checks}


def validate_config(data) -> SuiteConfig:
    """Validate a parsed config mapping into a :class:`SuiteConfig`."""
    top = _expect_mapping(data, "top-level")
    for key in top:
        if key not in _TOP_FIELDS:
            _fail(key, "unknown field")
    if "schema_version" not in top:
        _fail("schema_version", "missing required field")
    version = _expect_int(top["schema_version"], "schema_version")
    if version != SCHEMA_VERSION:
        _fail("schema_version", f"unsupported version {version}; expected {SCHEMA_VERSION}")
    if "seed" not in top:
        _fail("seed", "missing required field")
    seed = _expect_int(top["seed"], "seed")
    if "family" not in top:
        _fail("family", "missing required field")
    family = _validate_family(top["family"])
    tol = _expect_positive(top.get("tol", DEFAULT_TOL), "tol")
    out = top.get("out")
    if out is not None and not isinstance(out, str):
        _fail("out", "expected a path string")
    checks = _validate_checks(top.get("checks"))
    if "normal_form" in checks and _form_spec_for(family) is None:
        _fail("checks.normal_form",
              "the configured family has no closed-form eigenvalue model")
    return SuiteConfig(schema_version=version, seed=seed, family=family,
                       tol=tol, out=out, checks=checks)


def load_config(path: str) -> SuiteConfig:
    """Read and validate a YAML config file."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            text = handle.read()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        place = f" at line {mark.line + 1}, column {mark.column + 1}" if mark else ""
        raise ParseError(f"invalid config syntax{place}: {exc}") from exc
    return validate_config(data)


def _lc_data_from_recipe(body: dict) -> LeviCivitaData:
    interval = tuple(body["interval"])
    lams = tuple(ScalarFunction1D(tuple(row), interval) for row in body["profiles"])
    return LeviCivitaData(lambdas=lams,
                          chart=Chart(len(lams), (interval,) * len(lams)))


def _sphere_factor_parts(body: dict):
    dim = body["dim"]
    a_map = LinearMap.diagonal(body["diag"]) if "diag" in body else None
    sphere = None
    if "pole" in body:
        sphere = sphere_chart(dim, pole=np.asarray(body["pole"], dtype=float))
    return dim, a_map, sphere


def build_family(family) -> tuple[MetricPair, str]:
    """Build the configured family; returns the pair and a short label."""
    if isinstance(family, str):
        return standard_pair(family), family
    kind, body = next(iter(family.items()))
    if kind == "lc":
        return levi_civita_pair(_lc_data_from_recipe(body)), f"lc({len(body['profiles'])}d)"
    if kind == "beltrami":
        dim, a_map, sphere = _sphere_factor_parts(body)
        return beltrami_pair(dim, a_map, sphere).pair, f"beltrami({dim}d)"
    factors = [_sphere_factor_parts(f) for f in body["factors"]]
    dims = "x".join(str(f[0]) for f in factors)
    return spheres_product(factors).pair, f"product({dims})"


def _form_spec_for(family):
    """(FormKind, params) behind a family spec, or None."""
    if isinstance(family, str):
        return standard_form_spec(family)
    if isinstance(family, dict) and "lc" in family:
        return FormKind.LC_ND, _lc_data_from_recipe(family["lc"])
    return None


# --- Check execution -------------------------------------------------------


def _run_one_check(name: str, pair: MetricPair, family, params: dict,
                   seed: int, tol: float) -> tuple[bool, dict[str, Any], list]:
    """Run a single named check; returns (passed, metrics, csv_rows)."""
    csv_rows: list = []
    if name == "equivalence":
        rep = check_equivalence(pair, n_traj=params["trajectories"],
                                duration=params["duration"], tol=tol, seed=seed)
        passed = rep.max_tangential_defect < params["threshold"]
        return passed, {
            "trajectories": rep.trajectories,
            "truncated": rep.truncated,
            "max_tangential_defect": rep.max_tangential_defect,
            "defect_histogram": list(rep.defect_histogram),
            "threshold": params["threshold"],
            "integrator_tol": tol,
        }, csv_rows
    if name == "conservation":
        rep = check_conservation(pair, n_traj=params["trajectories"],
                                 duration=params["duration"], tol=tol, seed=seed)
        passed = rep.max_drift < params["threshold"]
        csv_rows = [(row.index, row.integral_id, row.start_value,
                     row.end_value, row.rel_drift) for row in rep.rows]
        return passed, {
            "max_drift": rep.max_drift,
            "t_values": list(rep.t_values),
            "rows": len(rep.rows),
            "threshold": params["threshold"],
            "integrator_tol": tol,
        }, csv_rows
    if name == "interlacing":
        rep = check_interlacing(pair, n_points=params["points"],
                                n_vectors=params["vectors"], seed=seed,
                                epsilon=params["epsilon"])
        passed = rep.violations == 0
        return passed, {
            "samples": rep.samples,
            "violations": rep.violations,
            "max_excess": rep.max_excess,
            "max_pin_deviation": rep.max_pin_deviation,
            "epsilon": rep.epsilon,
        }, csv_rows
    if name == "roundtrip":
        result = split_pair(pair, params["block"])
        factor1, factor2 = split_factors(result)
        glued = glue_pair(factor1, factor2)
        rng = np.random.default_rng(seed)
        xs = pair.chart.sample(rng, params["points"])
        err = max(
            float(np.max(np.abs(glued.pair.g.eval(xs) - pair.g.eval(xs)))),
            float(np.max(np.abs(glued.pair.gbar.eval(xs) - pair.gbar.eval(xs)))),
        )
        passed = err < params["threshold"]
        return passed, {
            "block": params["block"],
            "points": params["points"],
            "max_error": err,
            "threshold": params["threshold"],
        }, csv_rows
    if name == "normal_form":
        spec = _form_spec_for(family)
        if spec is None:
            raise SchemaError(
                "checks.normal_form: the family has no closed-form eigenvalue model")
        kind, form_params = spec
        rng = np.random.default_rng(seed)
        xs = pair.chart.sample(rng, params["points"])
        if kind is FormKind.THREE_D_FULL and params["exclude_radius"] > 0.0:
            keep = np.linalg.norm(xs[:, 1:], axis=1) >= params["exclude_radius"]
            xs = xs[keep]
        predicted = model_eigenvalues(kind, form_params, xs)
        actual, _ = _l_eigen_many(pair, xs)
        mismatch = float(np.max(np.abs(predicted - actual)))
        passed = mismatch < params["threshold"]
        return passed, {
            "points": int(xs.shape[0]),
            "max_eigen_mismatch": mismatch,
            "threshold": params["threshold"],
        }, csv_rows
    raise ValueError(f"unknown check {name!r}")


def run_suite(config: SuiteConfig) -> tuple[dict, list, dict, int]:
    """Run all configured checks.

    Returns (report, csv_rows, timings, exit_code); the report is written
    by the caller even when a check fails or a build error interrupts the
    run (partial report, exit code 1).
    """
    canonical = config.canonical()
    config_hash = hashlib.sha256(
        json.dumps(canonical, sort_keys=True).encode("utf-8")).hexdigest()
    checks: list[dict] = []
    csv_rows: list = []
    timings: dict[str, float] = {}
    report = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash,
        "checks": checks,
        "provenance": {
            "package": "artifact",
            "version": __version__,
            "command": "suite",
            "family": _family_label(config.family),
            "seed": config.seed,
        },
    }
    exit_code = 0
    try:
        begin = time.perf_counter()
        pair, _ = build_family(config.family)
        timings["build"] = time.perf_counter() - begin
        for name, params in config.checks.items():
            begin = time.perf_counter()
            passed, metrics, rows = _run_one_check(name, pair, config.family,
                                                   params, config.seed, config.tol)
            timings[name] = time.perf_counter() - begin
            checks.append({"name": name, "pass": passed, "metrics": metrics})
            csv_rows.extend(rows)
            if not passed:
                exit_code = 2
    except (GeqError, ValueError) as exc:
        report["error"] = f"{type(exc).__name__}: {exc}"
        exit_code = 1
    return report, csv_rows, timings, exit_code


def _family_label(family) -> str:
    if isinstance(family, str):
        return family
    kind, body = next(iter(family.items()))
    if kind == "product":
        return f"product({'x'.join(str(f['dim']) for f in body['factors'])})"
    return f"{kind}"


# --- Report output ---------------------------------------------------------


CSV_HEADER = "index,t_value_or_integral_id,start_value,end_value,rel_drift"


def _render_json(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def _write_outputs(out_dir: str | None, stem: str, report: dict,
                   timings: dict[str, float], fmt: str, csv_rows: list) -> None:
    text = _render_json(report)
    if out_dir is None:
        click.echo(text, nl=False)
        return
    import pathlib

    base = pathlib.Path(out_dir)
    base.mkdir(parents=True, exist_ok=True)
    (base / f"{stem}_report.json").write_text(text, encoding="utf-8")
    (base / f"{stem}_timings.json").write_text(
        json.dumps(timings, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    if fmt == "csv" and csv_rows:
        lines = [CSV_HEADER]
        lines.extend(f"{idx},{name},{start!r},{end!r},{drift!r}"
                     for idx, name, start, end, drift in csv_rows)
        (base / f"{stem}_drifts.csv").write_text("\n".join(lines) + "\n",
                                                 encoding="utf-8")


def _single_check_report(command: str, family_label: str, seed: int,
                         arg_fingerprint: dict, checks: list[dict]) -> dict:
    config_hash = hashlib.sha256(
        json.dumps(arg_fingerprint, sort_keys=True).encode("utf-8")).hexdigest()
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config_hash,
        "checks": checks,
        "provenance": {
            "package": "artifact",
            "version": __version__,
            "command": command,
            "family": family_label,
            "seed": seed,
        },
    }


def _echo_error(exc: Exception) -> None:
    click.echo(f"error: {type(exc).__name__}: {exc}", err=True)


# --- Commands ----------------------------------------------------------------


_FAMILY_OPT = click.option("--family", default="lc_nd", show_default=True,
                           help="Registry family name (see `geq build --list`).")
_SEED_OPT = click.option("--seed", type=int, default=0, show_default=True)
_TOL_OPT = click.option("--tol", type=float, default=DEFAULT_TOL,
                        show_default=True, help="Integrator tolerance.")
_OUT_OPT = click.option("--out", type=click.Path(file_okay=False), default=None,
                        help="Report directory (default: print JSON to stdout).")
_FORMAT_OPT = click.option("--format", "fmt", type=click.Choice(["json", "csv"]),
                           default="json", show_default=True,
                           help="csv additionally writes per-trajectory drift rows.")


@click.group()
@click.version_option(version=__version__, prog_name="geq")
def main() -> None:
    """Build metric pairs with shared unparameterized geodesics and verify
    their properties numerically."""


def _resolve_family(ctx, family: str, config: str | None):
    """Family and defaults from --config when given, else the flag."""
    if config is None:
        return _validate_family(family), None
    cfg = load_config(config)
    return cfg.family, cfg


def _single_check_command(ctx, command, check_name, family, config, seed, tol,
                          out, fmt, overrides):
    try:
        family_spec, cfg = _resolve_family(ctx, family, config)
        if cfg is not None:
            seed = seed if ctx.get_parameter_source("seed").name != "DEFAULT" else cfg.seed
            tol = tol if ctx.get_parameter_source("tol").name != "DEFAULT" else cfg.tol
            out = out or cfg.out
            params = dict(cfg.checks.get(check_name, CHECK_DEFAULTS[check_name]))
        else:
            params = dict(CHECK_DEFAULTS[check_name])
        params.update({k: v for k, v in overrides.items() if v is not None})
        pair, label = build_family(family_spec)
        begin = time.perf_counter()
        passed, metrics, csv_rows = _run_one_check(check_name, pair,
                                                   family_spec, params, seed, tol)
        timings = {check_name: time.perf_counter() - begin}
    except (GeqError, ValueError, OSError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    fingerprint = {"command": command, "family": _family_label(family_spec),
                   "seed": seed, "tol": tol, "params": params}
    report = _single_check_report(command, _family_label(family_spec), seed,
                                  fingerprint,
                                  [{"name": check_name, "pass": passed,
                                    "metrics": metrics}])
    _write_outputs(out, command.replace("-", "_"), report, timings, fmt, csv_rows)
    ctx.exit(0 if passed else 2)


@main.command("build")
@_FAMILY_OPT
@click.option("--config", type=click.Path(), default=None,
              help="Take the family from a config file instead.")
@click.option("--grid", type=int, default=3, show_default=True,
              help="Grid points per axis.")
@click.option("--list", "list_families", is_flag=True,
              help="List registry family names and exit.")
@_SEED_OPT
@_OUT_OPT
@_FORMAT_OPT
@click.pass_context
def build_cmd(ctx, family, config, grid, list_families, seed, out, fmt) -> None:
    """Emit both metric matrices of a family on a chart grid."""
    if list_families:
        for name in STANDARD_FAMILIES:
            click.echo(name)
        ctx.exit(0)
    try:
        family_spec, _ = _resolve_family(ctx, family, config)
        pair, label = build_family(family_spec)
        xs = pair.chart.grid(grid)
        data = {
            "dim": pair.dim,
            "box": [list(interval) for interval in pair.chart.box],
            "points": xs.tolist(),
            "g": pair.g.eval(xs).tolist(),
            "gbar": pair.gbar.eval(xs).tolist(),
        }
    except (GeqError, ValueError, OSError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    fingerprint = {"command": "build", "family": label, "grid": grid}
    report = _single_check_report("build", label, seed, fingerprint, [])
    report["data"] = data
    _write_outputs(out, "build", report, {}, fmt, [])
    ctx.exit(0)


def _check_command(name: str, command: str, extra_options: list):
    """Factory for the three check-* commands."""

    def callback(ctx, family, config, seed, tol, out, fmt, **overrides):
        _single_check_command(ctx, command, name, family, config, seed, tol,
                              out, fmt, overrides)

    callback.__name__ = command.replace("-", "_")
    wrapped = click.pass_context(callback)
    for option in reversed(extra_options):
        wrapped = option(wrapped)
    wrapped = _FORMAT_OPT(_OUT_OPT(_TOL_OPT(_SEED_OPT(
        click.option("--config", type=click.Path(), default=None,
                     help="Defaults from a config file (flags override).")(
            _FAMILY_OPT(wrapped))))))
    return main.command(command)(wrapped)


check_equivalence_cmd = _check_command("equivalence", "check-equivalence", [
    click.option("--trajectories", type=int, default=None,
                 help=f"[default: {CHECK_DEFAULTS['equivalence']['trajectories']}]"),
    click.option("--duration", type=float, default=None,
                 help=f"[default: {CHECK_DEFAULTS['equivalence']['duration']}]"),
    click.option("--threshold", type=float, default=None,
                 help=f"[default: {CHECK_DEFAULTS['equivalence']['threshold']}]"),
])
check_equivalence_cmd.help = ("Unparametrized-geodesic test: the companion "
                              "residual must stay parallel to the velocity.")

check_conservation_cmd = _check_command("conservation", "check-conservation", [
    click.option("--trajectories", type=int, default=None,
                 help=f"[default: {CHECK_DEFAULTS['conservation']['trajectories']}]"),
    click.option("--duration", type=float, default=None,
                 help=f"[default: {CHECK_DEFAULTS['conservation']['duration']}]"),
    click.option("--threshold", type=float, default=None,
                 help=f"[default: {CHECK_DEFAULTS['conservation']['threshold']}]"),
])
check_conservation_cmd.help = ("Drift of the polynomial integral family, its "
                               "roots, and (2D) the quadratic integral.")

check_interlacing_cmd = _check_command("interlacing", "check-interlacing", [
    click.option("--points", type=int, default=None,
                 help=f"[default: {CHECK_DEFAULTS['interlacing']['points']}]"),
    click.option("--vectors", type=int, default=None,
                 help=f"[default: {CHECK_DEFAULTS['interlacing']['vectors']}]"),
    click.option("--epsilon", type=float, default=None,
                 help=f"[default: {CHECK_DEFAULTS['interlacing']['epsilon']}]"),
])
check_interlacing_cmd.help = ("Eigenvalue bracketing of the integral roots "
                              "over random phase samples.")


@main.command("split")
@_FAMILY_OPT
@click.option("--config", type=click.Path(), default=None)
@click.option("--block", type=int, default=1, show_default=True,
              help="Size of the leading eigenvalue block.")
@_SEED_OPT
@_OUT_OPT
@_FORMAT_OPT
@click.pass_context
def split_cmd(ctx, family, config, block, seed, out, fmt) -> None:
    """Split a pair along an eigenvalue gap into block-diagonal factors."""
    try:
        family_spec, _ = _resolve_family(ctx, family, config)
        pair, label = build_family(family_spec)
        result = split_pair(pair, block)
        rng = np.random.default_rng(seed)
        xs = pair.chart.sample(rng, 200)
        h = result.h.eval(xs)
        hbar = result.hbar.eval(xs)
        r = result.r
        off = max(float(np.max(np.abs(h[:, :r, r:]))),
                  float(np.max(np.abs(hbar[:, :r, r:]))))
        factor1, factor2 = split_factors(result)
        metrics = {
            "block": r,
            "index_split": [list(result.index_split[0]), list(result.index_split[1])],
            "max_off_block": off,
            "factor_ranges": [list(factor1.eigen_range), list(factor2.eigen_range)],
        }
    except (GeqError, ValueError, OSError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    fingerprint = {"command": "split", "family": label, "block": block, "seed": seed}
    report = _single_check_report("split", label, seed, fingerprint,
                                  [{"name": "split", "pass": True, "metrics": metrics}])
    _write_outputs(out, "split", report, {}, fmt, [])
    ctx.exit(0)


@main.command("glue")
@click.option("--levels", default="2,3", show_default=True,
              help="Comma-separated constant eigenvalues, one 1D factor each.")
@click.option("--grid", type=int, default=3, show_default=True)
@_SEED_OPT
@_OUT_OPT
@_FORMAT_OPT
@click.pass_context
def glue_cmd(ctx, levels, grid, seed, out, fmt) -> None:
    """Glue constant one-dimensional factors into a product pair."""
    try:
        values = [float(v) for v in levels.split(",") if v.strip()]
        if len(values) < 2:
            raise ValueError("need at least two comma-separated levels")
        triples = []
        for value in values:
            lam = ScalarFunction1D((value,), (-0.5, 0.5))
            data = LeviCivitaData(lambdas=(lam,), chart=Chart(1, ((-0.5, 0.5),)))
            triples.append(make_triple(levi_civita_pair(data)))
        glued = oplus(triples)
        xs = glued.pair.chart.grid(grid)
        metrics = {
            "dim": glued.pair.dim,
            "eigen_range": list(glued.eigen_range),
            "g_center": glued.pair.g.eval(glued.pair.chart.center).tolist(),
            "gbar_center": glued.pair.gbar.eval(glued.pair.chart.center).tolist(),
            "points": int(xs.shape[0]),
        }
    except (GeqError, ValueError, OSError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    fingerprint = {"command": "glue", "levels": values, "grid": grid}
    report = _single_check_report("glue", f"glue({levels})", seed, fingerprint,
                                  [{"name": "glue", "pass": True, "metrics": metrics}])
    _write_outputs(out, "glue", report, {}, fmt, [])
    ctx.exit(0)


@main.command("roundtrip")
@_FAMILY_OPT
@click.option("--config", type=click.Path(), default=None)
@click.option("--block", type=int, default=None,
              help=f"[default: {CHECK_DEFAULTS['roundtrip']['block']}]")
@click.option("--points", type=int, default=None,
              help=f"[default: {CHECK_DEFAULTS['roundtrip']['points']}]")
@click.option("--threshold", type=float, default=None,
              help=f"[default: {CHECK_DEFAULTS['roundtrip']['threshold']}]")
@_SEED_OPT
@_TOL_OPT
@_OUT_OPT
@_FORMAT_OPT
@click.pass_context
def roundtrip_cmd(ctx, family, config, block, points, threshold, seed, tol,
                  out, fmt) -> None:
    """Split a pair and glue the factors back; report the worst error."""
    _single_check_command(ctx, "roundtrip", "roundtrip", family, config, seed,
                          tol, out, fmt,
                          {"block": block, "points": points, "threshold": threshold})


@main.command("beltrami")
@click.option("--dim", type=int, default=2, show_default=True)
@click.option("--diag", default=None,
              help="Comma-separated diagonal of the ambient map "
                   "(default: identity).")
@click.option("--circles", type=int, default=10, show_default=True,
              help="Geodesics for the planarity probe.")
@click.option("--planarity-threshold", type=float, default=1e-9,
              show_default=True)
@_SEED_OPT
@_TOL_OPT
@_OUT_OPT
@_FORMAT_OPT
@click.pass_context
def beltrami_cmd(ctx, dim, diag, circles, planarity_threshold, seed, tol, out,
                 fmt) -> None:
    """Build a sphere pair and probe great-circle planarity before and
    after the ambient map."""
    try:
        if diag is not None:
            values = [float(v) for v in diag.split(",") if v.strip()]
            a_map = LinearMap.diagonal(values)
            if a_map.ambient_dim != dim + 1:
                raise ValueError(f"--diag needs {dim + 1} entries for dim {dim}")
        else:
            a_map = LinearMap.identity(dim + 1)
        sphere = sphere_chart(dim)
        triple = beltrami_pair(dim, a_map, sphere)
        before, after = circle_planarity(sphere, a_map, circles, seed, tol=tol)
        passed = before < planarity_threshold and after < planarity_threshold
        metrics = {
            "dim": dim,
            "eigen_range": list(triple.eigen_range),
            "circles": circles,
            "planarity_before": before,
            "planarity_after": after,
            "threshold": planarity_threshold,
            "integrator_tol": tol,
        }
    except (GeqError, ValueError, OSError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    label = f"beltrami({dim}d)"
    fingerprint = {"command": "beltrami", "dim": dim, "diag": diag,
                   "circles": circles, "seed": seed, "tol": tol}
    report = _single_check_report("beltrami", label, seed, fingerprint,
                                  [{"name": "planarity", "pass": passed,
                                    "metrics": metrics}])
    _write_outputs(out, "beltrami", report, {}, fmt, [])
    ctx.exit(0 if passed else 2)


@main.command("product")
@click.option("--factors", default="1:;2:1,2,3", show_default=True,
              help="Semicolon-separated factors, each 'dim:diag' with an "
                   "optional comma-separated diagonal.")
@_SEED_OPT
@_OUT_OPT
@_FORMAT_OPT
@click.pass_context
def product_cmd(ctx, factors, seed, out, fmt) -> None:
    """Assemble a product of spheres and report its eigenvalue layout."""
    try:
        parsed = []
        for chunk in factors.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            dim_text, _, diag_text = chunk.partition(":")
            dim = int(dim_text)
            diag_values = [float(v) for v in diag_text.split(",") if v.strip()]
            a_map = LinearMap.diagonal(diag_values) if diag_values else None
            parsed.append((dim, a_map))
        if not parsed:
            raise ValueError("no factors given")
        triple = spheres_product(parsed)
        rng = np.random.default_rng(seed)
        xs = triple.pair.chart.sample(rng, 100)
        metrics = {
            "dim": triple.pair.dim,
            "eigen_range": list(triple.eigen_range),
            "max_multiplicity": max_eigen_multiplicity(triple.pair, xs),
            "factors": [dim for dim, _ in parsed],
        }
    except (GeqError, ValueError, OSError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    label = f"product({'x'.join(str(d) for d, _ in parsed)})"
    fingerprint = {"command": "product", "factors": factors, "seed": seed}
    report = _single_check_report("product", label, seed, fingerprint,
                                  [{"name": "product", "pass": True,
                                    "metrics": metrics}])
    _write_outputs(out, "product", report, {}, fmt, [])
    ctx.exit(0)


@main.command("suite")
@click.option("--config", type=click.Path(), required=True)
@click.option("--seed", type=int, default=None, help="Override the config seed.")
@click.option("--tol", type=float, default=None, help="Override the config tol.")
@click.option("--out", type=click.Path(file_okay=False), default=None,
              help="Override the config output directory.")
@_FORMAT_OPT
@click.pass_context
def suite_cmd(ctx, config, seed, tol, out, fmt) -> None:
    """Run every check requested by a config file."""
    try:
        cfg = load_config(config)
        if seed is not None:
            cfg = dataclasses.replace(cfg, seed=seed)
        if tol is not None:
            cfg = dataclasses.replace(cfg, tol=tol)
        if out is not None:
            cfg = dataclasses.replace(cfg, out=out)
    except (ParseError, SchemaError, GeqError) as exc:
        _echo_error(exc)
        ctx.exit(1)
    report, csv_rows, timings, exit_code = run_suite(cfg)
    if "error" in report:
        click.echo(f"error: {report['error']}", err=True)
    _write_outputs(cfg.out, "suite", report, timings, fmt, csv_rows)
    ctx.exit(exit_code)


if __name__ == "__main__":
    main()
