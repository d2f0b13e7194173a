"""Command-line experiment runner.

``entropy-lattice run config.json`` executes the requested validation suites
over an N schedule and writes ``<suite>.csv`` files plus ``summary.json``.
Exit status: 0 when every suite passes, 2 when any suite fails, 1 on a
configuration or runtime error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import mpmath
import numpy as np

from . import __version__
from . import asymptotics as asy
from . import entropy_model as em
from . import laplace as lp
from . import limits as lm
from .errors import CapExceeded, ConfigError, EntropyLatticeError, SizeOverflow
from .lattice import BoundarySpec, Box, admissible_subsequence, build_lattice

SCHEMA_VERSION = 1
SUITES = ("lln", "clt", "laplace_interior", "laplace_boundary", "sum_vs_integral",
          "tail_bound", "asymptotics")
_TOP_FIELDS = {"schema_version", "model", "domain", "maximum_type", "boundary", "N_schedule",
               "delta", "xi_grid", "suites", "seed", "output_dir", "point_cap"}
_REQUIRED = {"schema_version", "model", "domain", "N_schedule", "suites"}


@dataclass
class ExperimentConfig:
    model_name: str
    model_params: dict
    bounds: list
    spacings: list
    predicate: str
    maximum_type: str
    boundary: dict | None
    N_schedule: list
    delta: float
    xi_grid: np.ndarray | None
    suites: list
    seed: int
    output_dir: str
    point_cap: int | None
    source: str = ""
    model: object = field(default=None, repr=False)

    @property
    def m(self) -> int:
        return len(self.bounds)


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

def _fail(field_name: str, msg: str):
    raise ConfigError(f"field '{field_name}': {msg}")


def _check_keys(obj, allowed, where):
    if not isinstance(obj, dict):
        _fail(where, "must be an object")
    extra = sorted(set(obj) - set(allowed))
    if extra:
        _fail(where, f"unknown field(s) {extra}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Validate a JSON config strictly; every problem names the offending field."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    _check_keys(raw, _TOP_FIELDS, "<root>")
    missing = sorted(_REQUIRED - set(raw))
    if missing:
        _fail("<root>", f"missing required field(s) {missing}")
    if raw["schema_version"] != SCHEMA_VERSION:
        _fail("schema_version", f"expected {SCHEMA_VERSION}, got {raw['schema_version']!r}")

    model = raw["model"]
    _check_keys(model, {"name", "params"}, "model")
    name = model.get("name")
    if name not in em.MODEL_REGISTRY:
        _fail("model.name", f"unknown model {name!r}; known: {sorted(em.MODEL_REGISTRY)}")
    params = model.get("params", {})
    if not isinstance(params, dict):
        _fail("model.params", "must be an object")

    dom = raw["domain"]
    _check_keys(dom, {"bounds", "spacings", "predicate"}, "domain")
    bounds = dom.get("bounds")
    if not isinstance(bounds, list) or not bounds or not all(
            isinstance(b, list) and len(b) == 2 for b in bounds):
        _fail("domain.bounds", "must be a non-empty list of [lower, upper] pairs")
    m = len(bounds)
    spacings = dom.get("spacings", [1] * m)
    if not isinstance(spacings, list) or len(spacings) != m:
        _fail("domain.spacings", f"must be a list of {m} positive numbers")
    predicate = dom.get("predicate", "none")
    if predicate not in ("none", "model_support"):
        _fail("domain.predicate", "must be 'none' or 'model_support'")

    mt = raw.get("maximum_type", "auto")
    if mt not in ("auto", "interior", "boundary"):
        _fail("maximum_type", "must be auto, interior or boundary")
    bnd = raw.get("boundary")
    if bnd is not None:
        _check_keys(bnd, {"axis", "side"}, "boundary")
        if not isinstance(bnd.get("axis"), int) or not 0 <= bnd["axis"] < m:
            _fail("boundary.axis", f"must be an integer in [0, {m})")
        if bnd.get("side") not in ("lower", "upper"):
            _fail("boundary.side", "must be 'lower' or 'upper'")

    sched = raw["N_schedule"]
    if (not isinstance(sched, list) or not sched
            or not all(isinstance(N, int) and not isinstance(N, bool) and N >= 1 for N in sched)):
        _fail("N_schedule", "must be a non-empty list of positive integers")
    if any(b <= a for a, b in zip(sched, sched[1:])):
        _fail("N_schedule", "must be strictly increasing")

    delta = raw.get("delta", 0.05)
    if not isinstance(delta, (int, float)) or not 0 < delta < min(1 / (2 * m), 1 / 6):
        _fail("delta", f"must lie in (0, {min(1 / (2 * m), 1 / 6):.6g}), got {delta!r}")

    xi = raw.get("xi_grid")
    grid = None
    if isinstance(xi, dict):
        _check_keys(xi, {"points", "low", "high"}, "xi_grid")
        grid = lm.default_xi_grid(m, int(xi.get("points", 9)), float(xi.get("low", -1.0)),
                                  float(xi.get("high", 1.0)))
    elif isinstance(xi, list):
        try:
            grid = np.asarray(xi, dtype=float).reshape(-1, m)
        except ValueError:
            _fail("xi_grid", f"explicit grid must be a list of {m}-vectors")
    elif xi is not None:
        _fail("xi_grid", "must be an object {points, low, high} or a list of vectors")

    suites = raw["suites"]
    if not isinstance(suites, list) or not suites:
        _fail("suites", "must be a non-empty list")
    bad = [s for s in suites if s not in SUITES]
    if bad:
        _fail("suites", f"unknown suite(s) {bad}; known: {list(SUITES)}")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        _fail("seed", "must be an integer")
    cap = raw.get("point_cap")
    if cap is not None and (not isinstance(cap, int) or cap < 1):
        _fail("point_cap", "must be a positive integer")
    out = raw.get("output_dir", "results")
    if not isinstance(out, str):
        _fail("output_dir", "must be a string")

    cfg = ExperimentConfig(name, params, bounds, spacings, predicate, mt, bnd, list(sched),
                           float(delta), grid, list(dict.fromkeys(suites)), seed, out, cap, source)
    try:
        cfg.model = em.make_model(name, **params)
    except (TypeError, ValueError) as exc:
        _fail("model.params", str(exc))
    if cfg.model.m != m:
        _fail("domain.bounds", f"model has dimension {cfg.model.m}, domain has {m}")
    return cfg


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(text, str(p))


# ---------------------------------------------------------------------------
# suites
# ---------------------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return f"{float(v):.17g}"
    return str(v)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(v) for v in r])
    return buf.getvalue()


@dataclass
class SuiteResult:
    name: str
    passed: bool
    summary: dict
    csv_text: str


def _domain(cfg: ExperimentConfig, N: int):
    pred = cfg.model.defined if cfg.predicate == "model_support" else None
    cap = cfg.point_cap if cfg.point_cap is not None else None
    try:
        return build_lattice(cfg.m, N, cfg.spacings, cfg.bounds, predicate=pred, point_cap=cap)
    except SizeOverflow as exc:
        raise CapExceeded(str(exc)) from exc


def _boundary(cfg: ExperimentConfig):
    if cfg.boundary is None:
        return None
    box = Box.from_bounds(cfg.bounds)
    ax = cfg.boundary["axis"]
    side = -1 if cfg.boundary["side"] == "lower" else 1
    return BoundarySpec.for_box_face(box, ax, side, cfg.spacings[ax])


def _report_result(name, rep: lm.ConvergenceReport) -> SuiteResult:
    rows = [(N, h, e, math.log(e) if e > 0 else -math.inf)
            for N, h, e in zip(rep.schedule, rep.h_values, rep.errors)]
    return SuiteResult(name, rep.passed, rep.summary(),
                       _csv_text(["N", "h", "error", "log_error"], rows))


def suite_lln(cfg):
    dom = _domain(cfg, cfg.N_schedule[0])
    rep = lm.lln_error_curve(dom, cfg.model, cfg.N_schedule, cfg.xi_grid, cfg.delta)
    return _report_result("lln", rep)


def suite_clt(cfg):
    dom = _domain(cfg, cfg.N_schedule[-1])
    rep = lm.clt_error_curve(dom, cfg.model, cfg.N_schedule, cfg.xi_grid, None, cfg.delta,
                             _boundary(cfg))
    return _report_result("clt", rep)


def _laplace_suite(cfg, name, kind):
    bnd = _boundary(cfg) if kind == "boundary" else None
    schedule = cfg.N_schedule
    if kind == "boundary":
        if bnd is None:
            info = lp.classify_maximum(_domain(cfg, schedule[-1]), cfg.model, schedule[-1])
            bnd = info.boundary
            if bnd is None:
                raise ConfigError("laplace_boundary: the maximum is not on a boundary face")
        schedule = admissible_subsequence(bnd, schedule)
    rows = []
    for N in schedule:
        dom = _domain(cfg, N)
        info = lp.classify_maximum(dom, cfg.model, N, bnd)
        fn = lp.approx_interior if kind == "interior" else lp.approx_boundary
        r = fn(dom, cfg.model, N, info, None, cfg.delta)
        rows.append((N, cfg.m, cfg.delta, r.log_value, r.log_exact, r.rel_error))
    rep = lm.make_report(schedule, [cfg.model.h(N) for N in schedule], [r[-1] for r in rows],
                         -(0.5 - 3 * cfg.delta))
    return SuiteResult(name, rep.passed, rep.summary(),
                       _csv_text(["N", "m", "delta", "log_value", "log_exact", "rel_error"], rows))


def suite_laplace_interior(cfg):
    return _laplace_suite(cfg, "laplace_interior", "interior")


def suite_laplace_boundary(cfg):
    return _laplace_suite(cfg, "laplace_boundary", "boundary")


def suite_sum_vs_integral(cfg):
    rows, ks = [], []
    for N in cfg.N_schedule:
        dom = _domain(cfg, N)
        info = lp.classify_maximum(dom, cfg.model, N)
        res = lp.sum_vs_integral_gaussian(info.hess, N, cfg.model.h(N), info.x_star_N,
                                          dom.spacings, cfg.delta)
        ks.append(res.K_ratio)
        rows.append((N, res.m, res.radius, res.n_points, res.log_sum, res.log_integral,
                     res.abs_diff, res.envelope, res.K_ratio))
    positive = [k for k in ks if k > 0]
    spread = max(positive) / min(positive) if positive else 1.0
    summary = {"K_max": max(ks), "K_min": min(ks), "K_spread": spread,
               "envelope_holds": max(ks) <= 1.0, "pass": max(ks) <= 1.0 and spread <= 3.0}
    header = ["N", "m", "radius", "n_points", "log_sum", "log_integral", "abs_diff",
              "envelope", "K"]
    return SuiteResult("sum_vs_integral", summary["pass"], summary, _csv_text(header, rows))


def log_exact_isotropic_tail(m: int, N: float, R: float) -> float:
    """``log int_{|x|>R} exp(-N |x|^2) dx`` through the regularized upper gamma."""
    q = mpmath.gammainc(mpmath.mpf(m) / 2, mpmath.mpf(N) * R * R, mpmath.inf, regularized=True)
    return float(0.5 * m * mpmath.log(mpmath.pi / N) + mpmath.log(q))


TAIL_GRID = tuple(itertools.product((1, 2, 3), (1, 10, 100), (0.5, 1.0, 3.0)))


def suite_tail_bound(cfg):
    rows, ok = [], True
    for m, N, R in TAIL_GRID:
        lb = lp.log_gaussian_tail_bound(-np.eye(m), N, R, m)
        le = log_exact_isotropic_tail(m, N, R)
        good = lb > le
        ok &= good
        rows.append((m, N, R, lb, le, lb - le, good))
    header = ["m", "N", "R", "log_bound", "log_exact", "log_margin", "dominates"]
    return SuiteResult("tail_bound", bool(ok), {"combinations": len(rows), "pass": bool(ok)},
                       _csv_text(header, rows))


def suite_asymptotics(cfg, trials: int = 10_000):
    rng = np.random.default_rng(cfg.seed)
    rows = []

    A = rng.normal(size=(3, 3))
    A /= asy.spectral_norm(A)
    neu = asy.neumann_inverse_residual(A, np.logspace(-1, -4, 13))
    rows.append(("neumann_slope", neu.slope, neu.claimed, neu.passed))
    det = asy.det_approx_check(rng.normal(size=(3, 3)), np.logspace(1, 3, 13))
    rows.append(("det_approx_slope", det.slope, det.claimed, det.passed))

    t_grid = np.linspace(0.0, 100.0, 10_000)
    worst = math.inf
    pb_ok = True
    for a in (0.1, 1.0, 10.0):
        for mm in range(1, 7):
            ok, margin = asy.power_bound_check(a, mm, t_grid)
            pb_ok &= ok
            worst = min(worst, margin)
    rows.append(("power_bound_worst_margin", worst, 0.0, pb_ok))

    worst6 = 0.0
    for _ in range(trials):
        mm = int(rng.integers(1, 7))
        d = asy.product_decomposition(rng.normal(size=mm).tolist(), rng.normal(size=mm).tolist())
        scale = max(1.0, max(abs(v) for _, v in d.terms))
        worst6 = max(worst6, d.residual / scale)
    rows.append(("product_identity_max_rel", worst6, 1e-12, worst6 <= 1e-12))

    ok7 = True
    for _ in range(trials):
        A1, B1, A2, B2 = rng.normal(size=4) + np.array([0, 0, 3, 3])
        try:
            asy.ratio_decomposition(A1, B1, A1 - B1, A2, B2, A2 - B2)
        except AssertionError:
            ok7 = False
    rows.append(("ratio_identity", 0.0 if ok7 else 1.0, 1e-12, ok7))

    passed = all(r[-1] for r in rows)
    summary = {r[0]: {"value": r[1], "target": r[2], "pass": bool(r[3])} for r in rows}
    summary["pass"] = passed
    return SuiteResult("asymptotics", passed, summary,
                       _csv_text(["check", "value", "target", "pass"], rows))


SUITE_RUNNERS = {
    "lln": suite_lln, "clt": suite_clt,
    "laplace_interior": suite_laplace_interior, "laplace_boundary": suite_laplace_boundary,
    "sum_vs_integral": suite_sum_vs_integral, "tail_bound": suite_tail_bound,
    "asymptotics": suite_asymptotics,
}


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def run_config(cfg: ExperimentConfig, output_dir=None, parallel: bool = False) -> int:
    out = Path(output_dir or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if parallel and len(cfg.suites) > 1:
        with ThreadPoolExecutor(max_workers=len(cfg.suites)) as ex:
            futures = [ex.submit(SUITE_RUNNERS[s], cfg) for s in cfg.suites]
            results = [f.result() for f in futures]
    else:
        results = [SUITE_RUNNERS[s](cfg) for s in cfg.suites]
    for r in results:
        (out / f"{r.name}.csv").write_text(r.csv_text)
    summary = {
        "schema_version": SCHEMA_VERSION,
        "model": {"name": cfg.model_name, "params": cfg.model_params},
        "seed": cfg.seed,
        "suites": {r.name: _clean({**r.summary, "pass": r.passed}) for r in results},
        "pass": all(r.passed for r in results),
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0 if summary["pass"] else 2


def list_models(stream=None) -> list[str]:
    stream = sys.stdout if stream is None else stream
    names = sorted(em.MODEL_REGISTRY)
    for name in names:
        print(f"{name}: {em.MODEL_REGISTRY[name].doc}", file=stream)
    return names


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="entropy-lattice",
                                description="Validate lattice Laplace/LLN/CLT estimates.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run the suites of a JSON config")
    r.add_argument("config")
    r.add_argument("--parallel", action="store_true", help="run suites concurrently")
    r.add_argument("--output-dir", default=None)
    sub.add_parser("list-models", help="list registered model families")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list-models":
        list_models()
        return 0
    try:
        cfg = load_config(args.config)
        if cfg.point_cap is None and os.environ.get("LL_POINT_CAP"):
            cfg.point_cap = int(os.environ["LL_POINT_CAP"])
        try:
            return run_config(cfg, args.output_dir, args.parallel)
        except SizeOverflow as exc:
            raise CapExceeded(str(exc)) from exc
    except EntropyLatticeError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
