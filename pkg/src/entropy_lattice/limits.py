"""Limit laws for ``X_N`` and ``Y_N`` and empirical convergence-rate checks.

Big-O claims are checked the only way they can be at finite ``N``: the
error sequence over a schedule is regressed on ``h(N)`` in log-log
coordinates and the fitted slope is compared with the claimed exponent.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import entropy_model as em
from .errors import DivergentSeries, InsufficientData, PreconditionViolated, UnsupportedPair
from .exact_engine import DiscreteDistribution, mgf_exact, mgf_fluctuation
from .lattice import admissible_subsequence
from .laplace import MaximumInfo, check_delta, classify_maximum

# relative size below which an error is indistinguishable from round-off
NUMERICAL_FLOOR = 1e-13
DEFAULT_SLACK = 0.15


@dataclass
class LimitLaw:
    kind: str                                   # point_mass | gaussian | boundary_mixture
    x_star: np.ndarray | None = None
    cov: np.ndarray | None = None
    geom_ratio: float | None = None
    cov_hat: np.ndarray | None = None
    step: float = 1.0                           # support spacing of the geometric part

    def __post_init__(self):
        for name in ("cov", "cov_hat"):
            C = getattr(self, name)
            if C is None:
                continue
            C = np.atleast_2d(np.asarray(C, dtype=float))
            setattr(self, name, C)
            if C.size and not np.allclose(C, C.T, atol=1e-12 * max(1.0, np.abs(C).max())):
                raise ValueError(f"{name} is not symmetric")
            if C.size:
                np.linalg.cholesky(C)
        if self.kind == "boundary_mixture" and not 0.0 < self.geom_ratio < 1.0:
            raise ValueError("geometric ratio must lie in (0, 1)")

    @classmethod
    def point_mass(cls, x_star) -> "LimitLaw":
        return cls("point_mass", x_star=np.atleast_1d(np.asarray(x_star, dtype=float)))

    @classmethod
    def gaussian(cls, cov) -> "LimitLaw":
        return cls("gaussian", cov=cov)

    @classmethod
    def boundary_mixture(cls, geom_ratio: float, cov_hat=None, step: float = 1.0) -> "LimitLaw":
        cov_hat = np.zeros((0, 0)) if cov_hat is None else cov_hat
        return cls("boundary_mixture", geom_ratio=float(geom_ratio), cov_hat=cov_hat, step=step)

    @property
    def dim(self) -> int:
        if self.kind == "point_mass":
            return self.x_star.size
        if self.kind == "gaussian":
            return self.cov.shape[0]
        return 1 + self.cov_hat.shape[0]


def limit_law_for(model, max_info: MaximumInfo, spacings=None) -> LimitLaw:
    """Gaussian law with ``cov = (-D^2 s(x*))^-1`` or the boundary mixture."""
    x_star = np.asarray(max_info.x_star, dtype=float)
    H = em.hess_s(model, x_star)
    if max_info.kind == "interior":
        return LimitLaw.gaussian(np.linalg.inv(-H))
    T = max_info.T
    s1 = float((T.T @ em.grad_s(model, x_star))[0])
    if not s1 < 0:
        raise DivergentSeries(f"s'(x*) = {s1} along the inward normal must be negative")
    ax = max_info.boundary.axis
    step = 1.0 if spacings is None or ax is None else float(spacings[ax])
    H_hat = (T.T @ H @ T)[1:, 1:]
    cov_hat = np.linalg.inv(-H_hat) if H_hat.size else np.zeros((0, 0))
    return LimitLaw.boundary_mixture(math.exp(s1 * step), cov_hat, step)


def lln_limit_mgf(x_star, xi) -> float:
    return math.exp(float(np.dot(np.atleast_1d(xi), np.atleast_1d(x_star))))


def log_clt_limit_mgf(law: LimitLaw, xi) -> float:
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if law.kind == "point_mass":
        return float(xi @ law.x_star)
    if law.kind == "gaussian":
        return 0.5 * float(xi @ law.cov @ xi)
    r, b = law.geom_ratio, law.step
    if r * math.exp(xi[0] * b) >= 1.0:
        raise DivergentSeries(f"xi_1={xi[0]} is outside the geometric series' convergence region")
    geo = math.log1p(-r) - math.log1p(-r * math.exp(xi[0] * b))
    xh = xi[1:]
    return geo + (0.5 * float(xh @ law.cov_hat @ xh) if xh.size else 0.0)


def clt_limit_mgf(law: LimitLaw, xi) -> float:
    """Gaussian ``exp(xi^T cov xi / 2)``; boundary ``(1-r)/(1-r e^xi1) * exp(xi^ cov^ xi^/2)``."""
    return math.exp(log_clt_limit_mgf(law, xi))


# ---------------------------------------------------------------------------
# rate fitting
# ---------------------------------------------------------------------------

def fit_rate(h_values, errors) -> tuple[float, float]:
    """Least-squares slope of ``log error`` on ``log h`` and its r^2.

    Non-positive errors are dropped. Exact on pure power laws; a perfect fit
    (including constant errors) has r^2 = 1.
    """
    h = np.asarray(h_values, dtype=float)
    e = np.asarray(errors, dtype=float)
    keep = e > 0
    if keep.sum() < 3:
        raise InsufficientData(f"need >= 3 positive errors, got {int(keep.sum())}")
    lx, ly = np.log(h[keep]), np.log(e[keep])
    lx_c = lx - lx.mean()
    slope = float(lx_c @ (ly - ly.mean()) / (lx_c @ lx_c))
    resid = ly - ly.mean() - slope * lx_c
    ss_tot = float(((ly - ly.mean()) ** 2).sum())
    ss_res = float((resid**2).sum())
    # residuals at round-off level: a perfect fit, whatever ss_tot is
    if ss_res <= 1e-24 * ly.size * max(1.0, float(ly @ ly) / ly.size):
        return slope, 1.0
    return slope, 1.0 - ss_res / ss_tot


@dataclass
class ConvergenceReport:
    schedule: list
    h_values: list
    errors: list
    fitted_slope: float
    r_squared: float
    claimed_slope: float
    slack: float = DEFAULT_SLACK
    passed: bool = False
    note: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def pass_(self) -> bool:
        return self.passed

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["N", "h", "error", "log_error"])
            for N, h, e in zip(self.schedule, self.h_values, self.errors):
                le = math.log(e) if e > 0 else -math.inf
                w.writerow([N, f"{h:.17g}", f"{e:.17g}", f"{le:.17g}"])

    def summary(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and not math.isfinite(v) else v

        return {"slope": clean(self.fitted_slope), "r2": clean(self.r_squared),
                "claimed": self.claimed_slope, "slack": self.slack, "pass": self.passed,
                "note": self.note}

    def to_json(self) -> str:
        return json.dumps(self.summary(), indent=2, sort_keys=True)


def make_report(schedule, h_values, errors, claimed: float, slack: float = DEFAULT_SLACK,
                floor: float = NUMERICAL_FLOOR, extra=None) -> ConvergenceReport:
    """Fit and judge; errors at or under ``floor`` count as exact zeros."""
    errs = [float(e) for e in errors]
    resolvable = [e if e > floor else 0.0 for e in errs]
    n_pos = sum(e > 0 for e in resolvable)
    rep = ConvergenceReport(list(schedule), [float(h) for h in h_values], errs, math.nan,
                            math.nan, float(claimed), slack, extra=extra or {})
    if n_pos == 0:
        rep.passed = True
        rep.note = "all errors at the numerical floor; fit degenerate"
        return rep
    if n_pos < 3:
        rep.note = f"only {n_pos} errors above the numerical floor {floor:g}; cannot fit a rate"
        return rep
    rep.fitted_slope, rep.r_squared = fit_rate(h_values, resolvable)
    dropped = len(errs) - n_pos
    if dropped:
        rep.note = f"{dropped} error(s) at the numerical floor dropped from the fit"
    rep.passed = rep.fitted_slope <= claimed + slack and rep.r_squared >= 0.9
    return rep


def default_xi_grid(m: int, points: int = 9, lo: float = -1.0, hi: float = 1.0) -> np.ndarray:
    axis = np.linspace(lo, hi, points)
    return np.array(list(itertools.product(axis, repeat=m)))


def _eps_slope(model, schedule) -> float:
    h = [model.h(N) for N in schedule]
    e = [model.eps(N) for N in schedule]
    return fit_rate(h, e)[0]


# ---------------------------------------------------------------------------
# error curves
# ---------------------------------------------------------------------------

def lln_error_curve(domain, model, N_schedule, xi_grid=None, delta: float = 0.05,
                    x_star=None, slack: float = DEFAULT_SLACK) -> ConvergenceReport:
    """``max_xi |M_{X_N}(xi) - e^{xi . x*}|`` over the schedule.

    The claimed slope is ``-(1/2 - 3 delta)`` unless ``eps(N)`` is the larger
    term at the end of the schedule, in which case it is the slope of ``eps``.
    """
    schedule = [int(N) for N in N_schedule]
    if len(schedule) < 4 or any(b <= a for a, b in zip(schedule, schedule[1:])):
        raise ValueError("schedule must be strictly increasing with at least 4 values")
    delta = check_delta(delta, domain.m)
    xs = em.limit_maximizer(model) if x_star is None else np.asarray(x_star, dtype=float)
    grid = default_xi_grid(domain.m) if xi_grid is None else np.atleast_2d(xi_grid).reshape(-1, domain.m)
    errors = []
    for N in schedule:
        dom = domain.with_N(N)
        worst = 0.0
        for xi in grid:
            M = math.exp(mgf_exact(dom, model, N, xi).log_magnitude)
            worst = max(worst, abs(M - lln_limit_mgf(xs, xi)))
        errors.append(worst)
    Nmax = schedule[-1]
    rate = 0.5 - 3 * delta
    if model.eps(Nmax) > model.h(Nmax) ** -rate:
        claimed, regime = _eps_slope(model, schedule), "eps"
    else:
        claimed, regime = -rate, "h"
    return make_report(schedule, [model.h(N) for N in schedule], errors, claimed, slack,
                       extra={"regime": regime, "delta": delta})


def clt_error_curve(domain, model, N_schedule, xi_grid=None, law: LimitLaw | None = None,
                    delta: float = 0.05, boundary=None,
                    slack: float = DEFAULT_SLACK) -> ConvergenceReport:
    """``max_xi |M_{Y_N}(xi) / M_limit(xi) - 1|`` over the schedule.

    For a boundary maximum the schedule is first restricted to the ``N``
    divisible by the face's denominator ``q``.
    """
    schedule = [int(N) for N in N_schedule]
    delta = check_delta(delta, domain.m)
    prod = [model.eps(N) * math.sqrt(model.h(N)) for N in schedule]
    if prod[-1] > 0.1 or any(b > a + 1e-15 for a, b in zip(prod, prod[1:])):
        raise PreconditionViolated("eps(N) sqrt(h(N)) must decrease to <= 0.1 over the schedule")
    infos = {}
    info0 = classify_maximum(domain.with_N(schedule[-1]), model, schedule[-1], boundary)
    if info0.kind == "boundary":
        schedule = admissible_subsequence(info0.boundary, schedule)
        boundary = info0.boundary
    if law is None:
        law = limit_law_for(model, info0, domain.spacings)
    grid = default_xi_grid(domain.m) if xi_grid is None else np.atleast_2d(xi_grid).reshape(-1, domain.m)
    if law.kind == "boundary_mixture":
        grid = np.array([xi for xi in grid if law.geom_ratio * math.exp(xi[0] * law.step) < 1.0])
    errors = []
    for N in schedule:
        dom = domain.with_N(N)
        info = infos[N] = classify_maximum(dom, model, N, boundary)
        worst = 0.0
        for xi in grid:
            lm = mgf_fluctuation(dom, model, N, xi, info).log_magnitude
            worst = max(worst, abs(math.expm1(lm - log_clt_limit_mgf(law, xi))))
        errors.append(worst)
    Nmax = schedule[-1]
    if model.eps(Nmax) < model.h(Nmax) ** -(1 - 3 * delta):
        claimed, regime = -(0.5 - 3 * delta), "h"
    else:
        h = [model.h(N) for N in schedule]
        claimed = fit_rate(h, [model.eps(N) * math.sqrt(model.h(N)) for N in schedule])[0]
        regime = "eps"
    return make_report(schedule, [model.h(N) for N in schedule], errors, claimed, slack,
                       extra={"regime": regime, "delta": delta, "law": law.kind})


# ---------------------------------------------------------------------------
# distances to the limit law
# ---------------------------------------------------------------------------

def _support_step(values: np.ndarray) -> float:
    u = np.unique(np.round(values, 12))
    if len(u) < 2:
        return 1.0
    return float(np.min(np.diff(u)))


def _kolmogorov_1d(y, p, cdf, cdf_left=None) -> float:
    """Sup-CDF distance; ``cdf_left`` is the law's left limit (continuous laws: ``cdf``)."""
    order = np.argsort(y, kind="stable")
    y, p = y[order], p[order]
    F_hi = np.cumsum(p)
    F_lo = F_hi - p
    G_lo = cdf(y) if cdf_left is None else cdf_left(y)
    return float(max(np.max(np.abs(F_hi - cdf(y))), np.max(np.abs(F_lo - G_lo))))


def _tv_cells_1d(y, p, cdf) -> float:
    """Lattice cells of width ``step`` centred on the support vs a continuous law."""
    step = _support_step(y)
    cell = cdf(y + step / 2) - cdf(y - step / 2)
    return 0.5 * float(np.sum(np.abs(p - cell)) + max(0.0, 1.0 - cell.sum()))


def _geometric_tv(y, p, r, step) -> float:
    i = np.rint(y / step).astype(np.int64)
    if np.any(i < 0) or np.any(np.abs(i * step - y) > 1e-9 * max(1.0, step)):
        raise UnsupportedPair("support is not on the geometric lattice {0, b, 2b, ...}")
    q = (1 - r) * r ** i.astype(float)
    return 0.5 * float(np.sum(np.abs(p - q)) + max(0.0, 1.0 - q.sum()))


def _marginal_1d(dist: DiscreteDistribution, axis: int):
    mg = dist.marginal([axis])
    return mg.points[:, 0], mg.probs


def distribution_distance(dist: DiscreteDistribution, law: LimitLaw,
                          method: str = "kolmogorov") -> float:
    """Distance between an exact lattice distribution and a limit law.

    ``method`` is ``"kolmogorov"`` (sup-CDF) or ``"tv"`` (total variation with
    the continuous law binned on the lattice cells). For ``m > 1`` the
    Gaussian comparison is made per coordinate marginal and the worst is
    returned; the boundary mixture compares the normal coordinate with the
    geometric law and the face coordinates with the Gaussian.
    """
    if method not in ("kolmogorov", "tv"):
        raise UnsupportedPair(f"unknown method {method!r}")
    if dist.dim != law.dim:
        raise UnsupportedPair(f"distribution has dim {dist.dim}, law has dim {law.dim}")
    if law.kind == "point_mass":
        p = dist.probs
        at = np.all(np.abs(dist.points - law.x_star) <= 1e-12, axis=1)
        if method == "tv":
            return float(1.0 - p[at].sum())
        worst = 0.0
        for a in range(dist.dim):
            y, q = _marginal_1d(dist, a)
            c = law.x_star[a]
            worst = max(worst, _kolmogorov_1d(y, q, lambda t: (t >= c - 1e-12).astype(float),
                                              lambda t: (t > c + 1e-12).astype(float)))
        return worst
    if law.kind == "gaussian":
        return max(_gauss_marginal_distance(dist, a, math.sqrt(law.cov[a, a]), method)
                   for a in range(dist.dim))
    return max(boundary_marginal_distances(dist, law, method).values())


def _gauss_marginal_distance(dist, axis, sd, method) -> float:
    y, p = _marginal_1d(dist, axis)
    cdf = stats.norm(0.0, sd).cdf
    return _kolmogorov_1d(y, p, cdf) if method == "kolmogorov" else _tv_cells_1d(y, p, cdf)


def boundary_marginal_distances(dist: DiscreteDistribution, law: LimitLaw,
                                method: str = "tv") -> dict:
    """Geometric TV of the normal coordinate plus Gaussian distances of the others."""
    if law.kind != "boundary_mixture":
        raise UnsupportedPair("needs a boundary_mixture law")
    y, p = _marginal_1d(dist, 0)
    out = {"normal": _geometric_tv(y, p, law.geom_ratio, law.step)}
    for a in range(1, dist.dim):
        sd = math.sqrt(law.cov_hat[a - 1, a - 1])
        out[f"face_{a}"] = _gauss_marginal_distance(dist, a, sd, method)
    return out


def report_dict(rep: ConvergenceReport) -> dict:
    d = asdict(rep)
    d["summary"] = rep.summary()
    return d
