"""Laplace-type approximations of lattice sums ``sum g(x) e^{S(x,N)}``.

Two leading-order formulas are provided: one for a maximum in the interior
of the region (Gaussian factor in all ``m`` directions) and one for a
maximum on a flat face (a geometric series across the face times a
Gaussian factor along it). Supporting pieces: the sum-versus-integral
comparison on a ball, Gaussian integrals and tail bounds, and the shift of
the maximizer under a linear tilt of ``S``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from . import entropy_model as em
from .errors import (AmbiguousMaximum, DivisibilityViolation, FlatMaximum, InvalidRadius,
                     NewtonDivergence, NonNegativeDirectionalDerivative, NotNegativeDefinite,
                     PreconditionViolated, SingularHessian, UnsupportedBoundary)
from .exact_engine import log_sum, partition_sum
from .lattice import BoundarySpec, LatticeDomain, build_rotation

LOG_2PI = math.log(2 * math.pi)


@dataclass
class MaximumInfo:
    kind: str                      # "interior" | "boundary"
    N: int
    h_N: float
    x_star_N: np.ndarray           # critical point of S(., N) (on the face for boundary)
    x_lattice: np.ndarray          # lattice argmax
    x_star: np.ndarray             # limit maximizer of s
    S_max: float
    hess: np.ndarray
    boundary: BoundarySpec | None = None
    T: np.ndarray | None = None
    dS1: float | None = None
    hess_hat: np.ndarray | None = None

    @property
    def h(self) -> float:
        return self.h_N


@dataclass
class ApproxReport:
    N: int
    m: int
    delta: float
    log_value: float
    claimed_rate: float
    log_exact: float | None = None
    rel_error: float | None = None

    def as_row(self) -> dict:
        return {"N": self.N, "m": self.m, "delta": self.delta, "log_value": self.log_value,
                "log_exact": self.log_exact, "rel_error": self.rel_error}


def check_delta(delta: float, m: int) -> float:
    upper = min(1.0 / (2 * m), 1.0 / 6.0)
    if not 0.0 < delta < upper:
        raise ValueError(f"delta={delta} must lie in (0, {upper:.6g}) for m={m}")
    return float(delta)


def is_negative_definite(H) -> bool:
    H = np.atleast_2d(H)
    if H.size == 0:
        return True
    return bool(np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) < 0)


# ---------------------------------------------------------------------------
# locating the maximum
# ---------------------------------------------------------------------------

def _newton_max(grad, hess, x0, inside, tol=1e-12, max_iter=100):
    """Damped Newton ascent; steps are halved until they stay ``inside``."""
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(max_iter):
        g = grad(x)
        H = hess(x)
        try:
            dx = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError as exc:
            raise SingularHessian(str(exc)) from None
        t = 1.0
        while not inside(x + t * dx):
            t *= 0.5
            if t < 1e-12:
                raise NewtonDivergence("Newton step cannot stay in the domain")
        x = x + t * dx
        if np.linalg.norm(t * dx) <= tol * (1.0 + np.linalg.norm(x)):
            return x
    raise NewtonDivergence(f"no convergence after {max_iter} iterations")


def lattice_argmax(domain: LatticeDomain, model, N: int):
    """First (lexicographically smallest) lattice maximizer of ``S(., N)``."""
    best, best_idx = -math.inf, None
    all_idx, all_S = [], []
    for idx in domain.iter_index_chunks():
        S = np.asarray(model.S(domain.index_to_points(idx), N), dtype=float)
        k = int(np.argmax(S))
        if S[k] > best:
            best, best_idx = float(S[k]), idx[k]
        all_idx.append(idx)
        all_S.append(S)
    idx = np.concatenate(all_idx)
    S = np.concatenate(all_S)
    ties = idx[np.abs(S - best) <= 1e-12]
    for t in ties:
        if np.max(np.abs(t - best_idx)) > 1:
            raise AmbiguousMaximum(f"S ties at non-neighbouring lattice points {best_idx} and {t}")
    return best_idx, best


def classify_maximum(domain: LatticeDomain, model, N: int | None = None,
                     boundary: BoundarySpec | None = None) -> MaximumInfo:
    """Locate the maximum of ``S(., N)`` and decide interior vs boundary.

    The lattice argmax decides the type. An interior maximum is then refined
    to the critical point of ``S(., N)`` by Newton's method; a boundary one
    is refined along the face only.
    """
    N = domain.N if N is None else N
    if N != domain.N:
        domain = domain.with_N(N)
    idx, _ = lattice_argmax(domain, model, N)
    x_lat = domain.index_to_points(idx[None, :])[0]
    hN = model.h(N)
    flags = domain.on_box_boundary(idx)
    at_edge = bool(np.any(flags != 0))
    if not at_edge and domain.predicate is not None:
        steps = domain.steps
        nbrs = [x_lat + sgn * steps[i] * np.eye(domain.m)[i] for i in range(domain.m) for sgn in (-1, 1)]
        at_edge = not bool(np.all(domain.contains(np.array(nbrs))))

    if boundary is None and not at_edge:
        def inside(z):
            return bool(domain.contains(z[None, :])[0] and model.is_defined(z))

        x_N = _newton_max(lambda z: em.grad_S(model, z, N), lambda z: em.hess_S(model, z, N),
                          x_lat, inside)
        H = em.hess_S(model, x_N, N)
        if not is_negative_definite(H):
            raise FlatMaximum(f"Hessian at the maximum is not negative definite: {H}")
        g = em.grad_S(model, x_N, N)
        if np.linalg.norm(g) > 1e-6 * hN:
            raise FlatMaximum(f"gradient {g} does not vanish at the refined maximum")
        return MaximumInfo("interior", N, hN, x_N, x_lat, em.limit_maximizer(model, x_N),
                           float(model.S(x_N, N)), H)

    if boundary is None:
        active = np.flatnonzero(flags)
        if len(active) != 1:
            raise UnsupportedBoundary(f"maximum at {x_lat} touches {len(active)} faces")
        ax = int(active[0])
        boundary = BoundarySpec.for_box_face(domain.box, ax, int(flags[ax]), domain.spacings[ax])
    return _boundary_info(domain, model, N, boundary, x_lat)


def _boundary_info(domain, model, N, boundary, x_lat) -> MaximumInfo:
    T = build_rotation(boundary)
    m = domain.m
    v1 = float(boundary.offset)
    hN = model.h(N)

    def to_x(vhat):
        return T @ np.concatenate([[v1], vhat])

    v_lat = T.T @ x_lat
    if m > 1:
        def inside(vh):
            z = to_x(vh)
            return bool(domain.contains(z[None, :])[0] and model.is_defined(z))

        vhat = _newton_max(lambda vh: (T.T @ em.grad_S(model, to_x(vh), N))[1:],
                           lambda vh: (T.T @ em.hess_S(model, to_x(vh), N) @ T)[1:, 1:],
                           v_lat[1:], inside)
    else:
        vhat = np.empty(0)
    x_N = to_x(vhat)
    g_v = T.T @ em.grad_S(model, x_N, N)
    H = em.hess_S(model, x_N, N)
    H_v = T.T @ H @ T
    hess_hat = H_v[1:, 1:]
    if m > 1 and not is_negative_definite(hess_hat):
        raise FlatMaximum("Hessian restricted to the face is not negative definite")
    if model.x_star is not None:
        x_star = np.asarray(model.x_star, dtype=float)
    elif m > 1:
        def s_inside(vh):
            return bool(model.is_defined(to_x(vh)))

        vs = _newton_max(lambda vh: (T.T @ em.grad_s(model, to_x(vh)))[1:],
                         lambda vh: (T.T @ em.hess_s(model, to_x(vh)) @ T)[1:, 1:],
                         vhat, s_inside)
        x_star = to_x(vs)
    else:
        x_star = x_N.copy()
    return MaximumInfo("boundary", N, hN, x_N, x_lat, x_star, float(model.S(x_N, N)), H,
                       boundary=boundary, T=T, dS1=float(g_v[0]), hess_hat=hess_hat)


# ---------------------------------------------------------------------------
# sum approximations
# ---------------------------------------------------------------------------

def _log_g_at(x, g, log_g):
    if log_g is not None:
        return float(np.asarray(log_g(x[None, :])).ravel()[0])
    if g is not None:
        v = float(np.asarray(g(x[None, :])).ravel()[0])
        if v <= 0:
            raise ValueError("g must be positive at the maximizer")
        return math.log(v)
    return 0.0


def _finish(report: ApproxReport, domain, model, N, g, log_g, exact) -> ApproxReport:
    if exact:
        lv = partition_sum(domain, model, N, g, log_g=log_g)
        report.log_exact = lv.log_magnitude
        report.rel_error = abs(math.expm1(report.log_value - lv.log_magnitude))
    return report


def approx_interior(domain: LatticeDomain, model, N: int | None, max_info: MaximumInfo,
                    g=None, delta: float = 0.05, *, log_g=None, exact: bool = True) -> ApproxReport:
    """Leading-order value of ``sum g e^S`` for an interior maximum.

    ``log N^m/d + S(x*) + log g(x*) + (m/2) log 2 pi - 1/2 log|det D^2 S(x*)|``
    with ``d = prod b_i`` (cell volume ``d / N^m``). With ``exact=True`` the
    brute-force sum is attached for the relative error.
    """
    N = domain.N if N is None else N
    if N != domain.N:
        domain = domain.with_N(N)
    m = domain.m
    delta = check_delta(delta, m)
    if max_info.kind != "interior":
        raise ValueError("approx_interior needs an interior maximum")
    sign, logdet = np.linalg.slogdet(max_info.hess)
    if sign == 0 or not np.isfinite(logdet):
        raise SingularHessian("D^2 S is singular at the maximizer")
    log_d = sum(math.log(b) for b in domain.spacings)
    x = np.asarray(max_info.x_star_N, dtype=float)
    lv = (m * math.log(N) - log_d + float(model.S(x, N)) + _log_g_at(x, g, log_g)
          + 0.5 * m * LOG_2PI - 0.5 * logdet)
    return _finish(ApproxReport(N, m, delta, lv, 0.5 - 3 * delta), domain, model, N, g, log_g, exact)


def approx_boundary(domain: LatticeDomain, model, N: int | None, max_info: MaximumInfo,
                    g=None, delta: float = 0.05, *, log_g=None, exact: bool = True) -> ApproxReport:
    """Leading-order value of ``sum g e^S`` for a maximum on an axis-aligned face.

    ``log N^(m-1)/d^ + S(x*) + log g(x*) - log(1 - e^{b1 dS1/N})
    + ((m-1)/2) log 2 pi - 1/2 log|det D^2 S restricted to the face|``.
    """
    N = domain.N if N is None else N
    if N != domain.N:
        domain = domain.with_N(N)
    m = domain.m
    delta = check_delta(delta, m)
    if max_info.kind != "boundary":
        raise ValueError("approx_boundary needs a boundary maximum")
    bnd = max_info.boundary
    if N % bnd.q:
        raise DivisibilityViolation(f"N={N} is not divisible by q={bnd.q}")
    if model.h(N) != N:
        raise PreconditionViolated("the boundary approximation assumes h(N) = N")
    if not max_info.dS1 < 0:
        raise NonNegativeDirectionalDerivative(f"dS1={max_info.dS1} must be negative")
    ax = bnd.axis
    if ax is None:
        raise UnsupportedBoundary("only faces normal to a coordinate axis are supported")
    b1 = float(domain.spacings[ax])
    log_dhat = sum(math.log(b) for i, b in enumerate(domain.spacings) if i != ax)
    if m > 1:
        sign, logdet = np.linalg.slogdet(max_info.hess_hat)
        if sign == 0:
            raise SingularHessian("restricted Hessian is singular")
    else:
        logdet = 0.0
    x = np.asarray(max_info.x_star_N, dtype=float)
    geom = -math.log(-math.expm1(b1 * max_info.dS1 / N))
    lv = ((m - 1) * math.log(N) - log_dhat + float(model.S(x, N)) + _log_g_at(x, g, log_g)
          + geom + 0.5 * (m - 1) * LOG_2PI - 0.5 * logdet)
    return _finish(ApproxReport(N, m, delta, lv, 0.5 - 3 * delta), domain, model, N, g, log_g, exact)


# ---------------------------------------------------------------------------
# Gaussian sums and integrals
# ---------------------------------------------------------------------------

def gaussian_integral_closed_form(A, N_scale: float = 1.0) -> float:
    """``log of the integral of exp(N x^T A x)`` over R^m, A negative definite.

    Equals ``(m/2) log pi - 1/2 log|det A| - (m/2) log N``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not is_negative_definite(A):
        raise NotNegativeDefinite("A must be symmetric negative definite")
    m = A.shape[0]
    _, logdet = np.linalg.slogdet(-A)
    return 0.5 * m * math.log(math.pi) - 0.5 * logdet - 0.5 * m * math.log(N_scale)


def log_gaussian_tail_bound(A, N_scale: float, R: float, m: int | None = None) -> float:
    """Log of :func:`gaussian_tail_bound`; finite where the bound underflows."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not R > 0:
        raise InvalidRadius(f"R={R} must be positive")
    if not is_negative_definite(A):
        raise NotNegativeDefinite("A must be symmetric negative definite")
    m = A.shape[0] if m is None else m
    N = float(N_scale)
    _, logdet = np.linalg.slogdet(-A)
    t1 = (1.0 + math.sqrt(1.0 + 4.0 * R * R)) / 2.0
    bracket = math.log(t1 ** (m - 1) / N + math.gamma(m) / N ** (m - 1))
    return (-0.5 * logdet + 0.5 * m * math.log(math.pi) - special.gammaln(m / 2.0)
            - N * R * R + bracket)


def gaussian_tail_bound(A, N_scale: float, R: float, m: int | None = None) -> float:
    """Upper bound on the integral of ``exp(N x^T A x)`` outside the ball ``|x| <= R``.

    ``|det A|^(-1/2) pi^(m/2)/Gamma(m/2) e^{-N R^2} [t1^(m-1)/N + Gamma(m)/N^(m-1)]``
    with ``t1 = (1 + sqrt(1 + 4R^2))/2``. The substitution behind it maps the
    ball onto a ball only when every eigenvalue of ``-A`` is at least 1.
    """
    return math.exp(log_gaussian_tail_bound(A, N_scale, R, m))


def gaussian_ball_integral(P, R: float) -> float:
    """Integral of ``exp(-y^T P y)`` over ``|y| <= R`` for positive definite ``P``, m <= 3."""
    P = np.atleast_2d(np.asarray(P, dtype=float))
    m = P.shape[0]
    if m == 1:
        a = math.sqrt(P[0, 0])
        return math.sqrt(math.pi) / a * math.erf(a * R)
    if m == 2:
        def f(th):
            u = np.array([math.cos(th), math.sin(th)])
            q = u @ P @ u
            return -math.expm1(-q * R * R) / (2.0 * q)

        return integrate.quad(f, 0.0, 2 * math.pi, epsabs=0, epsrel=1e-13, limit=200)[0]
    if m == 3:
        def radial(q):
            # integral_0^R r^2 e^{-q r^2} dr
            a = math.sqrt(q)
            return (math.sqrt(math.pi) * math.erf(a * R) / (4 * a**3)
                    - R * math.exp(-q * R * R) / (2 * q))

        def f(ph, th):
            u = np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
            return radial(u @ P @ u) * math.sin(th)

        return integrate.dblquad(f, 0.0, math.pi, 0.0, 2 * math.pi, epsabs=0, epsrel=1e-11)[0]
    raise NotImplementedError("ball integrals are implemented for m <= 3")


@dataclass
class SumIntegralResult:
    N: int
    m: int
    delta: float
    radius: float
    n_points: int
    log_sum: float
    log_integral: float
    abs_diff: float
    envelope: float           # bound with K = 1
    K_ratio: float            # abs_diff / envelope
    log_full_integral: float  # rescaled integral over all of R^m
    log_tail_bound: float     # rescaled tail bound outside the ball

    @property
    def bound(self) -> float:
        return self.envelope


def sum_vs_integral_gaussian(hess, N: int, h_N: float | None = None, center=None,
                             spacings=None, delta: float = 0.05) -> SumIntegralResult:
    """Lattice sum against the rescaled integral of ``exp((x-c)^T H (x-c))`` on a ball.

    The ball is ``|x - c| <= h(N)^-(1/2 - delta)`` and the lattice is
    ``index * b / N``. The integral is evaluated on the ball itself (closed
    form for m = 1, angular quadrature for m = 2, 3). ``envelope`` is the
    claimed bound ``(N^m/d) (h/N) h^-(1/2-delta)(m+1)`` with unit constant.
    """
    H = np.atleast_2d(np.asarray(hess, dtype=float))
    m = H.shape[0]
    if not is_negative_definite(H):
        raise SingularHessian("hess must be negative definite")
    h_N = float(N) if h_N is None else float(h_N)
    c = np.zeros(m) if center is None else np.asarray(center, dtype=float).reshape(m)
    b = np.ones(m) if spacings is None else np.asarray([float(v) for v in spacings])
    R = h_N ** -(0.5 - delta)
    step = b / N
    lo = np.ceil((c - R) / step - 1e-9).astype(int)
    hi = np.floor((c + R) / step + 1e-9).astype(int)
    axes = [np.arange(l, u + 1) for l, u in zip(lo, hi)]
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, m) * step
    d = grid - c
    inside = np.einsum("ij,ij->i", d, d) <= R * R * (1 + 1e-12)
    d = d[inside]
    terms = np.einsum("ni,ij,nj->n", d, H, d)
    log_s = log_sum(terms).log_magnitude
    log_scale = m * math.log(N) - float(np.sum(np.log(b)))
    log_i = log_scale + math.log(gaussian_ball_integral(-H, R))
    diff = abs(math.exp(log_s) - math.exp(log_i))
    env = math.exp(log_scale + math.log(h_N / N) - (0.5 - delta) * (m + 1) * math.log(h_N))
    log_full = log_scale + gaussian_integral_closed_form(H, 1.0)
    lam_min = float(np.min(np.linalg.eigvalsh(-H)))
    # rescale so the tail bound's unit-eigenvalue condition holds: x = y / sqrt(lam_min)
    log_tail = (log_scale - 0.5 * m * math.log(lam_min)
                + log_gaussian_tail_bound(H / lam_min, 1.0, R * math.sqrt(lam_min)))
    return SumIntegralResult(N, m, delta, R, int(inside.sum()), log_s, log_i, diff, env,
                             diff / env, log_full, log_tail)


# ---------------------------------------------------------------------------
# tilted maximizer
# ---------------------------------------------------------------------------

@dataclass
class TildeShiftReport:
    N: int
    xi: np.ndarray
    dx_pred: np.ndarray
    dx_meas: np.ndarray
    dS_pred: float
    dS_meas: float
    det_ratio_pred: float
    det_ratio_meas: float
    x_star_N: np.ndarray
    x_tilde_N: np.ndarray
    sqrt_h: float

    @property
    def scaled_shift_error(self) -> float:
        """``|sqrt(h) dx_meas - sqrt(h) dx_pred|``."""
        return float(np.linalg.norm(self.dx_meas - self.dx_pred)) * self.sqrt_h


def continuum_maximizer(model, N: int, start=None) -> np.ndarray:
    x0 = em.limit_maximizer(model) if start is None else np.asarray(start, dtype=float)
    return _newton_max(lambda z: em.grad_S(model, z, N), lambda z: em.hess_S(model, z, N),
                       x0, lambda z: bool(model.is_defined(z)))


def tilde_shift_estimates(model, xi, N: int, x_star=None) -> TildeShiftReport:
    """Compare the maximizer of ``S + sqrt(h) xi^T (x - x*)`` against its prediction.

    Predictions: shift ``(-D^2 s(x*))^{-1} xi / sqrt(h)``, value gain
    ``1/2 xi^T (-D^2 s(x*))^{-1} xi`` and determinant ratio 1. Both maxima are
    found by Newton's method on the continuum, no lattice involved.
    """
    xi = np.asarray(xi, dtype=float).reshape(model.m)
    x_star = em.limit_maximizer(model) if x_star is None else np.asarray(x_star, dtype=float)
    hN = model.h(N)
    rh = math.sqrt(hN)
    x_N = continuum_maximizer(model, N, x_star)
    if not np.any(xi):
        x_t = x_N.copy()
    else:
        x_t = _newton_max(lambda z: em.grad_S(model, z, N) + rh * xi,
                          lambda z: em.hess_S(model, z, N), x_N,
                          lambda z: bool(model.is_defined(z)))
    cov = np.linalg.inv(-em.hess_s(model, x_star))
    S_N = float(model.S(x_N, N))
    S_t = float(model.S(x_t, N)) + rh * float(xi @ (x_t - x_star))
    _, ld0 = np.linalg.slogdet(-em.hess_S(model, x_N, N))
    _, ld1 = np.linalg.slogdet(-em.hess_S(model, x_t, N))
    rep = TildeShiftReport(N, xi, cov @ xi / rh, x_t - x_N, 0.5 * float(xi @ cov @ xi), S_t - S_N,
                           1.0, math.exp(0.5 * (ld0 - ld1)), x_N, x_t, rh)
    return rep


def tilde_shift_curve(model, xi, schedule) -> list[TildeShiftReport]:
    """:func:`tilde_shift_estimates` over a schedule, checking ``eps sqrt(h) <= 0.1`` at the end."""
    Nmax = max(schedule)
    if model.eps(Nmax) * math.sqrt(model.h(Nmax)) > 0.1:
        raise PreconditionViolated("eps(N) sqrt(h(N)) must be <= 0.1 at the largest N")
    return [tilde_shift_estimates(model, xi, N) for N in schedule]
