"""Brute-force log-domain sums over the lattice.

Every approximation in the package is judged against these. Terms are
reduced in fixed 4096-point chunks (max-shifted, left to right) and the
chunk results merged pairwise, so a given lattice always produces the same
bits for a given backend.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import kernels
from .errors import EmptyDomain, NonFiniteTerm, TypeMismatch
from .lattice import DEFAULT_CHUNK, LatticeDomain, build_rotation

CHUNK = DEFAULT_CHUNK


@dataclass(frozen=True)
class LogValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int = 1

    def __post_init__(self):
        if self.sign == 0:
            object.__setattr__(self, "log_magnitude", -math.inf)

    @classmethod
    def from_float(cls, v: float) -> "LogValue":
        if v == 0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(v)), 1 if v > 0 else -1)

    def __float__(self) -> float:
        return self.sign * math.exp(self.log_magnitude) if self.sign else 0.0

    value = __float__

    def __add__(self, other: "LogValue") -> "LogValue":
        s, lg = kernels.tree_merge(np.array([self.sign, other.sign], dtype=np.int8),
                                   np.array([self.log_magnitude, other.log_magnitude]))
        return LogValue(lg, s)

    def __neg__(self) -> "LogValue":
        return LogValue(self.log_magnitude, -self.sign)

    def __sub__(self, other: "LogValue") -> "LogValue":
        return self + (-other)

    def __mul__(self, other: "LogValue") -> "LogValue":
        return LogValue(self.log_magnitude + other.log_magnitude, self.sign * other.sign)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero LogValue")
        return LogValue(self.log_magnitude - other.log_magnitude, self.sign * other.sign)


def log_sum(terms, signs=None, chunk: int = CHUNK) -> LogValue:
    """``log |sum sign_i exp(terms_i)|`` with the deterministic chunked reduction."""
    terms = np.ascontiguousarray(terms, dtype=np.float64).ravel()
    if signs is None:
        signs = np.ones(terms.shape[0], dtype=np.int8)
    else:
        signs = np.ascontiguousarray(signs, dtype=np.int8).ravel()
    cs, cl = kernels.chunk_logsumexp(terms, signs, chunk)
    s, lg = kernels.tree_merge(np.ascontiguousarray(cs), np.ascontiguousarray(cl))
    return LogValue(lg, s)


@dataclass
class DiscreteDistribution:
    points: np.ndarray
    log_weights: np.ndarray
    log_Z: float

    @property
    def probs(self) -> np.ndarray:
        return np.exp(self.log_weights - self.log_Z)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def mode(self) -> np.ndarray:
        # argmax returns the first maximum: lexicographically smallest index
        return self.points[int(np.argmax(self.log_weights))]

    def mean(self) -> np.ndarray:
        return self.probs @ self.points

    def covariance(self) -> np.ndarray:
        p = self.probs
        d = self.points - p @ self.points
        return (d * p[:, None]).T @ d

    def marginal(self, axes) -> "DiscreteDistribution":
        """Sum masses over the dropped coordinates (support sorted lexicographically)."""
        axes = list(np.atleast_1d(axes))
        sub = np.round(self.points[:, axes], 12)
        uniq, inv = np.unique(sub, axis=0, return_inverse=True)
        inv = inv.ravel()
        lw = np.full(len(uniq), -np.inf)
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        for k in range(len(uniq)):
            sel = order[bounds[k]:bounds[k + 1]]
            lw[k] = log_sum(self.log_weights[sel]).log_magnitude
        return DiscreteDistribution(uniq, lw, self.log_Z)

    def to_csv(self, path) -> None:
        """Columns ``index, x1..xm, log_weight, prob``; floats with 17 digits."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["index"] + [f"x{i + 1}" for i in range(self.dim)] + ["log_weight", "prob"])
            for i, (pt, lw, pr) in enumerate(zip(self.points, self.log_weights, self.probs)):
                w.writerow([i] + [f"{v:.17g}" for v in pt] + [f"{lw:.17g}", f"{pr:.17g}"])


# ---------------------------------------------------------------------------

def _log_terms(domain: LatticeDomain, model, N: int, g=None, log_g=None):
    """Yield ``(points, S + log|g|, sign g)`` per chunk, checking finiteness."""
    for pts in domain.iter_chunks(CHUNK):
        S = np.asarray(model.S(pts, N), dtype=float)
        if not np.all(np.isfinite(S)):
            raise NonFiniteTerm(f"S(x, {N}) is not finite on this lattice")
        sign = np.ones(len(pts), dtype=np.int8)
        if log_g is not None:
            lg = np.asarray(log_g(pts), dtype=float)
            if not np.all(np.isfinite(lg)):
                raise NonFiniteTerm("log g(x) is not finite")
            S = S + lg
        elif g is not None:
            gv = np.asarray(g(pts), dtype=float)
            if not np.all(np.isfinite(gv)):
                raise NonFiniteTerm("g(x) is not finite")
            sign = np.sign(gv).astype(np.int8)
            with np.errstate(divide="ignore"):
                S = S + np.where(sign != 0, np.log(np.abs(gv)), 0.0)
        yield pts, S, sign


def partition_sum(domain: LatticeDomain, model, N: int | None = None,
                  g: Callable | None = None, *, log_g: Callable | None = None) -> LogValue:
    """``log sum_x g(x) e^{S(x,N)}`` over the lattice.

    ``g`` may change sign (the result carries a sign). Pass ``log_g`` instead
    when ``g`` is a positive weight whose values could overflow, e.g. an MGF
    tilt ``exp(xi . x)``.
    """
    N = domain.N if N is None else N
    if N != domain.N:
        domain = domain.with_N(N)
    terms, signs = [], []
    for _, t, sg in _log_terms(domain, model, N, g, log_g):
        terms.append(t)
        signs.append(sg)
    if not terms:
        raise EmptyDomain("lattice has no points")
    return log_sum(np.concatenate(terms), np.concatenate(signs))


def pmf(domain: LatticeDomain, model, N: int | None = None) -> DiscreteDistribution:
    N = domain.N if N is None else N
    if N != domain.N:
        domain = domain.with_N(N)
    pts, lw = [], []
    for p, t, _ in _log_terms(domain, model, N):
        pts.append(p)
        lw.append(t)
    if not pts:
        raise EmptyDomain("lattice has no points")
    lw = np.concatenate(lw)
    return DiscreteDistribution(np.concatenate(pts), lw, log_sum(lw).log_magnitude)


def mgf_exact(domain: LatticeDomain, model, N: int | None, xi) -> LogValue:
    """``log M_{X_N}(xi)``; exactly zero at ``xi = 0``."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if not np.any(xi):
        return LogValue(0.0, 1)
    num = partition_sum(domain, model, N, log_g=lambda x: x @ xi)
    den = partition_sum(domain, model, N)
    return num / den


def fluctuation_points(points: np.ndarray, N: int, max_info) -> np.ndarray:
    """Map lattice points to the fluctuation variable ``Y_N``."""
    x_star = np.asarray(max_info.x_star, dtype=float)
    if max_info.kind == "interior":
        return math.sqrt(max_info.h) * (points - x_star)
    if max_info.boundary is None:
        raise TypeMismatch("boundary fluctuation needs a BoundarySpec")
    T = build_rotation(max_info.boundary)
    v = points @ T          # rows of T^T x
    v_star = T.T @ x_star
    y = np.empty_like(v)
    y[:, 0] = N * (v[:, 0] - float(max_info.boundary.offset))
    y[:, 1:] = math.sqrt(N) * (v[:, 1:] - v_star[1:])
    return y


def fluctuation_distribution(domain: LatticeDomain, model, N: int | None,
                             max_info) -> DiscreteDistribution:
    """Pushforward of the pmf under ``x -> Y_N(x)``; masses are unchanged."""
    dist = pmf(domain, model, N)
    N = domain.N if N is None else N
    return DiscreteDistribution(fluctuation_points(dist.points, N, max_info),
                                dist.log_weights, dist.log_Z)


def mgf_fluctuation(domain: LatticeDomain, model, N: int | None, xi, max_info) -> LogValue:
    """``log M_{Y_N}(xi)`` computed from the exact lattice sums."""
    xi = np.asarray(xi, dtype=float).reshape(-1)
    if not np.any(xi):
        return LogValue(0.0, 1)
    N = domain.N if N is None else N
    num = partition_sum(domain, model, N, log_g=lambda x: fluctuation_points(x, N, max_info) @ xi)
    return num / partition_sum(domain, model, N)


def sample(dist: DiscreteDistribution, count: int, seed: int = 0) -> np.ndarray:
    """I.i.d. draws via an alias table; reproducible for a given seed."""
    if count < 1:
        raise ValueError("count must be >= 1")
    q, J = kernels.alias_build(np.ascontiguousarray(dist.probs))
    rng = np.random.default_rng(seed)
    u = rng.random((2, count))
    idx = kernels.alias_draw(q, J, np.ascontiguousarray(u[0]), np.ascontiguousarray(u[1]))
    return dist.points[idx]
