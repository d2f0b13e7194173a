"""Entropy functions ``S(x, N)`` with the split ``DS = h(N) [Ds + sigma eps(N)]``.

An :class:`EntropyModel` bundles the full entropy ``S`` with its smooth limit
``s``, the perturbation direction ``sigma``, the scale ``h`` and the decay
``eps``. Derivatives of ``S`` are analytic when the model supplies them and
central finite differences otherwise.

All ``S``/``s`` callables are vectorized over leading axes: they take an
array of shape ``(..., m)`` and return shape ``(...)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

import numpy as np
from scipy.special import digamma, gammaln, polygamma

from .errors import DomainError, SingularHessian, StencilOutOfDomain

Array = np.ndarray
_EPS = np.finfo(float).eps


def _zero_eps(N):
    return 0.0


def _linear_h(N):
    return float(N)


@dataclass(frozen=True)
class EntropyModel:
    name: str
    m: int
    S: Callable[[Array, int], Array]
    s: Callable[[Array], Array] | None = None
    sigma: Callable[[Array], Array] | None = None
    h: Callable[[int], float] = _linear_h
    eps: Callable[[int], float] = _zero_eps
    grad_s: Callable[[Array], Array] | None = None
    hess_s: Callable[[Array], Array] | None = None
    third_s: Callable[[Array], Array] | None = None
    grad_S: Callable[[Array, int], Array] | None = None
    hess_S: Callable[[Array, int], Array] | None = None
    third_S: Callable[[Array, int], Array] | None = None
    defined: Callable[[Array], Array] | None = None
    x_star: tuple[float, ...] | None = None
    params: dict = field(default_factory=dict, compare=False)

    @property
    def has_analytic_gradient(self) -> bool:
        return self.grad_S is not None

    def is_defined(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.defined is None:
            return np.ones(x.shape[:-1], dtype=bool)
        return np.asarray(self.defined(x), dtype=bool)

    def sigma_or_zero(self, x) -> Array:
        if self.sigma is None:
            return np.zeros(self.m)
        return np.asarray(self.sigma(np.asarray(x, dtype=float)), dtype=float)


@dataclass(frozen=True)
class RegularityConstants:
    s2: float
    s2_prime: float
    s3: float


@dataclass
class RepresentationReport:
    max_residual: float
    tol: float
    passed: bool
    residuals: list = field(default_factory=list)


# ---------------------------------------------------------------------------
# evaluation and derivatives
# ---------------------------------------------------------------------------

def eval_S(model: EntropyModel, x, N: int) -> float:
    x = np.asarray(x, dtype=float)
    if not np.all(model.is_defined(x)):
        raise DomainError(f"{model.name}: S undefined at {x}")
    return float(model.S(x, N))


def fd_step(x) -> Array:
    """Per-coordinate finite-difference step, cube-root-of-epsilon scaled."""
    x = np.asarray(x, dtype=float)
    return np.maximum(1e-5, _EPS ** (1 / 3) * (1.0 + np.abs(x)))


def _check_stencil(model, x, step):
    probes = [x]
    for i in range(x.size):
        for sgn in (-1, 1):
            p = x.copy()
            p[i] += sgn * step[i]
            probes.append(p)
    if not np.all(model.is_defined(np.array(probes))):
        raise StencilOutOfDomain(f"{model.name}: stencil at {x} leaves the definition region")


def _fd_gradient(f, x, step):
    m = x.size
    g = np.empty(m)
    for i in range(m):
        e = np.zeros(m)
        e[i] = step[i]
        g[i] = (f(x + e) - f(x - e)) / (2 * step[i])
    return g


def _fd_hessian(f, x, step):
    m = x.size
    H = np.empty((m, m))
    fx = f(x)
    for i in range(m):
        ei = np.zeros(m)
        ei[i] = step[i]
        H[i, i] = (f(x + ei) - 2 * fx + f(x - ei)) / step[i] ** 2
        for j in range(i + 1, m):
            ej = np.zeros(m)
            ej[j] = step[j]
            H[i, j] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4 * step[i] * step[j]
            )
            H[j, i] = H[i, j]
    return H


def _fd_jacobian(F, x, step):
    """Central differences of a tensor-valued map; derivative index goes last."""
    cols = []
    for i in range(x.size):
        e = np.zeros(x.size)
        e[i] = step[i]
        cols.append((np.asarray(F(x + e)) - np.asarray(F(x - e))) / (2 * step[i]))
    return np.stack(cols, axis=-1)


def grad_S(model: EntropyModel, x, N: int) -> Array:
    x = np.asarray(x, dtype=float)
    if model.grad_S is not None:
        if not np.all(model.is_defined(x)):
            raise DomainError(f"{model.name}: undefined at {x}")
        return np.asarray(model.grad_S(x, N), dtype=float)
    step = fd_step(x)
    _check_stencil(model, x, step)
    return _fd_gradient(lambda z: float(model.S(z, N)), x, step)


def hess_S(model: EntropyModel, x, N: int) -> Array:
    x = np.asarray(x, dtype=float)
    if model.hess_S is not None:
        if not np.all(model.is_defined(x)):
            raise DomainError(f"{model.name}: undefined at {x}")
        H = np.asarray(model.hess_S(x, N), dtype=float)
    else:
        step = fd_step(x)
        _check_stencil(model, x, step)
        if model.grad_S is not None:
            H = _fd_jacobian(lambda z: model.grad_S(z, N), x, step)
        else:
            H = _fd_hessian(lambda z: float(model.S(z, N)), x, step)
    return 0.5 * (H + H.T)


def third_S(model: EntropyModel, x, N: int) -> Array:
    x = np.asarray(x, dtype=float)
    if model.third_S is not None:
        return np.asarray(model.third_S(x, N), dtype=float)
    # a cubic stencil on function values needs a wider step than grad/hess
    step = np.maximum(1e-3, _EPS ** (1 / 5) * (1.0 + np.abs(x)))
    _check_stencil(model, x, 2 * step)
    return _fd_jacobian(lambda z: hess_S(model, z, N), x, step)


def grad_s(model: EntropyModel, x) -> Array:
    x = np.asarray(x, dtype=float)
    if model.grad_s is not None:
        return np.asarray(model.grad_s(x), dtype=float)
    step = fd_step(x)
    _check_stencil(model, x, step)
    return _fd_gradient(lambda z: float(model.s(z)), x, step)


def hess_s(model: EntropyModel, x) -> Array:
    x = np.asarray(x, dtype=float)
    if model.hess_s is not None:
        return np.asarray(model.hess_s(x), dtype=float)
    step = fd_step(x)
    _check_stencil(model, x, step)
    if model.grad_s is not None:
        H = _fd_jacobian(model.grad_s, x, step)
    else:
        H = _fd_hessian(lambda z: float(model.s(z)), x, step)
    return 0.5 * (H + H.T)


def third_s(model: EntropyModel, x) -> Array:
    x = np.asarray(x, dtype=float)
    if model.third_s is not None:
        return np.asarray(model.third_s(x), dtype=float)
    step = np.maximum(1e-3, _EPS ** (1 / 5) * (1.0 + np.abs(x)))
    return _fd_jacobian(lambda z: hess_s(model, z), x, step)


def limit_maximizer(model: EntropyModel, start=None, tol: float = 1e-13,
                    max_iter: int = 100) -> Array:
    """Critical point of the smooth part ``s`` (the model's own if it has one)."""
    if model.x_star is not None:
        return np.asarray(model.x_star, dtype=float)
    x = np.full(model.m, 0.5) if start is None else np.asarray(start, dtype=float)
    for _ in range(max_iter):
        dx = np.linalg.solve(hess_s(model, x), -grad_s(model, x))
        x = x + dx
        if np.linalg.norm(dx) < tol:
            break
    return x


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def check_representation(model: EntropyModel, sample_points, N_schedule,
                         tol: float | None = None) -> RepresentationReport:
    """Largest ``|grad S / h - grad s - sigma eps|`` over the given samples."""
    if tol is None:
        tol = 1e-6 if model.has_analytic_gradient else 1e-4
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    rows = []
    worst = 0.0
    for N in N_schedule:
        hN, eN = model.h(N), model.eps(N)
        for x in pts:
            r = grad_S(model, x, N) / hN - grad_s(model, x) - model.sigma_or_zero(x) * eN
            res = float(np.linalg.norm(r))
            rows.append((int(N), tuple(x), res))
            worst = max(worst, res)
    return RepresentationReport(worst, tol, worst <= tol, rows)


def tensor3_norm_surrogate(T: Array, n_dirs: int = 200, seed: int = 0) -> float:
    """``max |T[u,u,u]|`` over random unit vectors, times ``sqrt(m)``."""
    m = T.shape[0]
    if m == 1:
        return abs(float(T.ravel()[0]))
    rng = np.random.default_rng(seed)
    U = rng.standard_normal((n_dirs, m))
    U /= np.linalg.norm(U, axis=1, keepdims=True)
    vals = np.einsum("ijk,ni,nj,nk->n", T, U, U, U)
    return float(np.max(np.abs(vals))) * math.sqrt(m)


def estimate_regularity_constants(model: EntropyModel, domain, N_schedule,
                                  sample_budget: int = 50, seed: int = 0) -> RegularityConstants:
    """Empirical sup/inf of the scaled second and third derivative norms.

    Samples are the first ``sample_budget`` points of a fixed seeded
    permutation of the lattice at each ``N``, so a larger budget only adds
    points and the constants can only widen.
    """
    if sample_budget < 10:
        raise ValueError("sample_budget must be >= 10")
    s2, s2p, s3 = 0.0, math.inf, 0.0
    for N in N_schedule:
        dom = domain.with_N(N)
        pts = dom.points()
        order = np.random.default_rng(seed).permutation(len(pts))
        hN = model.h(N)
        for x in pts[order[:sample_budget]]:
            try:
                H = hess_S(model, x, N)
                T = third_S(model, x, N)
            except StencilOutOfDomain:
                continue
            if abs(np.linalg.det(H)) < 1e-300:
                raise SingularHessian(f"{model.name}: singular Hessian at {x}, N={N}")
            sv = np.linalg.svd(H, compute_uv=False)
            s2 = max(s2, sv[0] / hN)
            s2p = min(s2p, sv[-1] / hN)
            s3 = max(s3, tensor3_norm_surrogate(T) / hN)
    return RegularityConstants(s2, s2p, s3)


# ---------------------------------------------------------------------------
# built-in families
# ---------------------------------------------------------------------------

H_FUNCTIONS: dict[str, Callable[[int], float]] = {
    "N": _linear_h,
    "sqrtN": lambda N: math.sqrt(N),
    "N/logN": lambda N: N / math.log(N),
}


def make_eps(kind: str | float) -> Callable[[int], float]:
    """``0``, ``'1/N'``, ``'1/sqrtN'``, ``'1/logN'`` or a power ``a`` for ``N**-a``."""
    if kind in (0, "0", None, "none"):
        return _zero_eps
    if kind == "1/N":
        return lambda N: 1.0 / N
    if kind == "1/sqrtN":
        return lambda N: 1.0 / math.sqrt(N)
    if kind == "1/logN":
        return lambda N: 1.0 / math.log(N)
    a = float(kind)
    return lambda N: float(N) ** (-a)


def _h_from(h) -> Callable[[int], float]:
    if callable(h):
        return h
    if h in H_FUNCTIONS:
        return H_FUNCTIONS[h]
    if isinstance(h, str) and h.startswith("N^"):
        a = float(h[2:])
        return lambda N: float(N) ** a
    raise ValueError(f"unknown scale h={h!r}")


def quadratic(m: int = 1, center=None, A=None, h="N") -> EntropyModel:
    """``S = h(N) * -(x-c)^T A (x-c)`` with ``A`` positive definite."""
    c = np.full(m, 0.5) if center is None else np.asarray(center, dtype=float).reshape(m)
    A = np.eye(m) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    hf = _h_from(h)

    def s(x):
        d = np.asarray(x, dtype=float) - c
        return -np.einsum("...i,ij,...j->...", d, A, d)

    return EntropyModel(
        name="quadratic", m=m,
        S=lambda x, N: hf(N) * s(x),
        s=s, h=hf,
        grad_s=lambda x: -2.0 * A @ (np.asarray(x) - c),
        hess_s=lambda x: -2.0 * A,
        third_s=lambda x: np.zeros((m, m, m)),
        grad_S=lambda x, N: -2.0 * hf(N) * (A @ (np.asarray(x) - c)),
        hess_S=lambda x, N: -2.0 * hf(N) * A,
        third_S=lambda x, N: np.zeros((m, m, m)),
        x_star=tuple(c),
        params={"m": m, "center": c.tolist(), "A": A.tolist(), "h": h if isinstance(h, str) else "custom"},
    )


def perturbed_quadratic(m: int = 1, center=None, A=None, sigma=None, eps="1/N",
                        h="N") -> EntropyModel:
    """``S = h(N) [ -(x-c)^T A (x-c) + eps(N) sigma^T x ]`` with constant ``sigma``."""
    base = quadratic(m, center, A, h)
    sig = np.ones(m) if sigma is None else np.asarray(sigma, dtype=float).reshape(m)
    ef = make_eps(eps)
    hf = base.h

    def S(x, N):
        return hf(N) * (base.s(x) + ef(N) * (np.asarray(x, dtype=float) @ sig))

    return replace(
        base, name="perturbed_quadratic", S=S,
        sigma=lambda x: sig.copy(), eps=ef,
        grad_S=lambda x, N: hf(N) * (base.grad_s(x) + ef(N) * sig),
        params={**base.params, "sigma": sig.tolist(), "eps": eps},
    )


def stirling(m: int = 1, probs=None) -> EntropyModel:
    """Log multinomial count with an optional category tilt.

    Coordinates are the first ``m`` category fractions; the remaining one is
    ``x_0 = 1 - sum(x)``. ``S = log[N! / prod (N x_i)!] + N sum_i x_i log(p_i/p_0)``
    so that ``sum_x e^S = p_0^(-N)`` exactly. Uniform ``probs`` gives zero
    tilt; the limit maximizer is ``x* = p``.
    """
    if probs is None:
        p = np.full(m, 1.0 / (m + 1))
    else:
        p = np.asarray(probs, dtype=float).reshape(m)
    p0 = 1.0 - p.sum()
    if np.any(p <= 0) or p0 <= 0:
        raise ValueError("probs must be positive with sum < 1")
    tilt = np.log(p / p0)

    def rest(x):
        return 1.0 - np.sum(x, axis=-1)

    def defined(x):
        x = np.asarray(x, dtype=float)
        return np.all(x >= -1e-12, axis=-1) & (rest(x) >= -1e-12)

    def S(x, N):
        x = np.asarray(x, dtype=float)
        return (gammaln(N + 1.0) - np.sum(gammaln(N * x + 1.0), axis=-1)
                - gammaln(N * rest(x) + 1.0) + N * (x @ tilt))

    def s(x):
        x = np.asarray(x, dtype=float)
        r = rest(x)
        return -np.sum(_xlogx(x), axis=-1) - _xlogx(r) + x @ tilt

    def grad_s_(x):
        x = np.asarray(x, dtype=float)
        return -np.log(x) + np.log(rest(x)) + tilt

    def hess_s_(x):
        x = np.asarray(x, dtype=float)
        return -np.diag(1.0 / x) - 1.0 / rest(x)

    def third_s_(x):
        x = np.asarray(x, dtype=float)
        T = np.full((m, m, m), -1.0 / rest(x) ** 2)
        for i in range(m):
            T[i, i, i] += 1.0 / x[i] ** 2
        return T

    def grad_S_(x, N):
        x = np.asarray(x, dtype=float)
        return N * (-digamma(N * x + 1.0) + digamma(N * rest(x) + 1.0) + tilt)

    def hess_S_(x, N):
        x = np.asarray(x, dtype=float)
        return -N**2 * (np.diag(polygamma(1, N * x + 1.0)) + polygamma(1, N * rest(x) + 1.0))

    def third_S_(x, N):
        x = np.asarray(x, dtype=float)
        T = np.full((m, m, m), N**3 * polygamma(2, N * rest(x) + 1.0))
        for i in range(m):
            T[i, i, i] -= N**3 * polygamma(2, N * x[i] + 1.0)
        return T

    def sigma(x):
        # first Stirling correction of the digamma differences, paired with eps=1/N
        x = np.asarray(x, dtype=float)
        return 0.5 / rest(x) - 0.5 / x

    return EntropyModel(
        name="stirling", m=m, S=S, s=s, sigma=sigma,
        h=_linear_h, eps=lambda N: 1.0 / N,
        grad_s=grad_s_, hess_s=hess_s_, third_s=third_s_,
        grad_S=grad_S_, hess_S=hess_S_, third_S=third_S_,
        defined=defined, x_star=tuple(p),
        params={"m": m, "probs": p.tolist()},
    )


def _xlogx(v):
    v = np.asarray(v, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(v > 0, v * np.log(np.where(v > 0, v, 1.0)), 0.0)


def linear_boundary(m: int = 1, slope: float = 1.0, center=None, A_hat=None) -> EntropyModel:
    """``S = N [ -a x_1 - (x^ - c^)^T A^ (x^ - c^) ]``: boundary maximum on ``x_1 = 0``."""
    a = float(slope)
    k = m - 1
    c = np.full(k, 0.5) if center is None else np.asarray(center, dtype=float).reshape(k)
    Ah = np.eye(k) if A_hat is None else np.atleast_2d(np.asarray(A_hat, dtype=float)).reshape(k, k)

    def s(x):
        x = np.asarray(x, dtype=float)
        d = x[..., 1:] - c
        return -a * x[..., 0] - np.einsum("...i,ij,...j->...", d, Ah, d)

    def grad_s_(x):
        x = np.asarray(x, dtype=float)
        return np.concatenate([[-a], -2.0 * Ah @ (x[1:] - c)])

    def hess_s_(x):
        H = np.zeros((m, m))
        H[1:, 1:] = -2.0 * Ah
        return H

    return EntropyModel(
        name="linear_boundary", m=m,
        S=lambda x, N: N * s(x), s=s,
        grad_s=grad_s_, hess_s=hess_s_, third_s=lambda x: np.zeros((m, m, m)),
        grad_S=lambda x, N: N * grad_s_(x),
        hess_S=lambda x, N: N * hess_s_(x),
        third_S=lambda x, N: np.zeros((m, m, m)),
        x_star=tuple([0.0] + c.tolist()),
        params={"m": m, "slope": a, "center": c.tolist(), "A_hat": Ah.tolist()},
    )


@dataclass(frozen=True)
class ModelFamily:
    name: str
    factory: Callable[..., EntropyModel]
    doc: str


MODEL_REGISTRY: dict[str, ModelFamily] = {}


def register_model(name: str, factory: Callable[..., EntropyModel], doc: str = "") -> None:
    MODEL_REGISTRY[name] = ModelFamily(name, factory, doc or (factory.__doc__ or "").strip())


def make_model(name: str, **params) -> EntropyModel:
    try:
        fam = MODEL_REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown model {name!r}; known: {sorted(MODEL_REGISTRY)}") from None
    return fam.factory(**params)


register_model("quadratic", quadratic,
               "S = h(N) * -(x-c)^T A (x-c). params: m, center, A, h in {N, sqrtN, N/logN, N^a}")
register_model("perturbed_quadratic", perturbed_quadratic,
               "quadratic plus h(N) eps(N) sigma^T x. params: m, center, A, sigma, "
               "eps in {1/N, 1/sqrtN, 1/logN, <power a>}, h")
register_model("stirling", stirling,
               "log multinomial count via log-gamma, smooth part = Shannon entropy. "
               "params: m, probs (limit maximizer)")
register_model("linear_boundary", linear_boundary,
               "S = N(-a x1 - (x^-c^)^T A^ (x^-c^)), boundary maximum on x1 = 0. "
               "params: m, slope, center, A_hat")


def sample_interior_points(model: EntropyModel, lows: Sequence[float], highs: Sequence[float],
                           count: int, seed: int = 0) -> Array:
    """Uniform points in a box, keeping those where the model is defined."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(lows, highs, size=(count * 4, len(lows)))
    pts = pts[model.is_defined(pts)]
    return pts[:count]
