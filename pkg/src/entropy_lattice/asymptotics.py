"""Algebraic identities and matrix asymptotics used by the error analysis.

Each helper returns enough data to check the corresponding claim
numerically: exact expansions for products and ratios, residual curves with
fitted log-log slopes for the Neumann series and the Jacobi determinant
formula, and the worst margin of the scalar power bound.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, LengthMismatch, NotInvertible, ZeroDenominator
from .limits import fit_rate


def spectral_norm(A) -> float:
    """``||A||_2`` from the eigenvalues of ``A^T A`` (exact enough at m <= 8)."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.size == 0:
        return 0.0
    return math.sqrt(max(float(np.max(np.linalg.eigvalsh(A.T @ A))), 0.0))


@dataclass
class ProductDecomposition:
    C: list
    terms: list                 # (subset of indices carrying C, product value)
    lhs: float
    rhs: float

    @property
    def residual(self) -> float:
        return abs(self.lhs - self.rhs)


def product_decomposition(A, B) -> ProductDecomposition:
    """Expand ``prod A - prod B`` with ``C = A - B``.

    The sum runs over every non-empty subset ``J`` of indices, the term being
    ``prod_{i in J} C_i * prod_{i not in J} B_i``. Works with any numeric
    type; Fractions give an exact identity.
    """
    A, B = list(A), list(B)
    if len(A) != len(B) or not A:
        raise LengthMismatch(f"len(A)={len(A)}, len(B)={len(B)}")
    m = len(A)
    C = [a - b for a, b in zip(A, B)]
    terms = []
    for j in range(1, m + 1):
        for J in itertools.combinations(range(m), j):
            v = 1
            for i in range(m):
                v = v * (C[i] if i in J else B[i])
            terms.append((J, v))
    lhs = math.prod(A) - math.prod(B)
    if all(isinstance(v, float) for _, v in terms):
        rhs = math.fsum(v for _, v in terms)
    else:
        rhs = sum(v for _, v in terms)
    return ProductDecomposition(C, terms, lhs, rhs)


def ratio_decomposition(A1, B1, s1, A2, B2, s2, rtol: float = 1e-12):
    """``A1/A2 - B1/B2`` written as ``-B1 s2/(B2 (B2+s2)) + s1/(B2+s2)``.

    Raises AssertionError if the two sides disagree beyond ``rtol`` relative
    to the magnitude of the individual terms.
    """
    if B2 == 0 or B2 + s2 == 0 or A2 == 0:
        raise ZeroDenominator("B2, B2 + sigma2 and A2 must be non-zero")
    t1 = -B1 * s2 / (B2 * (B2 + s2))
    t2 = s1 / (B2 + s2)
    rhs = t1 + t2
    lhs = A1 / A2 - B1 / B2
    scale = max(abs(t1), abs(t2), abs(A1 / A2), abs(B1 / B2))
    if abs(lhs - rhs) > rtol * scale:
        raise AssertionError(f"ratio identity off by {abs(lhs - rhs)!r}")
    return rhs


@dataclass
class ResidualCurve:
    x: list
    residuals: list
    slope: float
    r_squared: float
    claimed: float
    tol: float
    passed: bool
    note: str = ""
    extra: dict = field(default_factory=dict)


def _curve(x, res, claimed, tol) -> ResidualCurve:
    if all(r == 0 for r in res):
        return ResidualCurve(list(x), res, math.nan, math.nan, claimed, tol, True,
                             "all residuals exactly zero")
    try:
        slope, r2 = fit_rate(x, res)
    except InsufficientData as exc:
        return ResidualCurve(list(x), res, math.nan, math.nan, claimed, tol, False, str(exc))
    return ResidualCurve(list(x), res, slope, r2, claimed, tol, abs(slope - claimed) <= tol)


def neumann_inverse_residual(A, eps_list, tol: float = 0.05) -> ResidualCurve:
    """``||(I + eps A)^-1 - I||_2`` against ``eps``; the claim is slope 1."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    nA = spectral_norm(A)
    I = np.eye(A.shape[0])
    res = []
    for e in eps_list:
        if e * nA >= 1:
            raise NotInvertible(f"eps * ||A|| = {e * nA} >= 1")
        try:
            inv = np.linalg.inv(I + e * A)
        except np.linalg.LinAlgError as exc:
            raise NotInvertible(str(exc)) from exc
        res.append(spectral_norm(inv - I))
    return _curve(list(eps_list), res, 1.0, tol)


def det_approx_check(A, N_list, tol: float = 0.1) -> ResidualCurve:
    """``|det(I + A/N) - 1 - tr(A)/N|`` against ``N``; the claim is slope -2."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    N_list = list(N_list)
    if any(b <= a for a, b in zip(N_list, N_list[1:])):
        raise ValueError("N_list must be increasing")
    I = np.eye(A.shape[0])
    tr = float(np.trace(A))
    res = [abs(float(np.linalg.det(I + A / N)) - 1.0 - tr / N) for N in N_list]
    return _curve(N_list, res, -2.0, tol)


def power_bound_check(a: float, m: int, t_grid) -> tuple[bool, float]:
    """Check ``(t+a)^{m/2} <= t1^m + t^m`` with ``t1 = (1 + sqrt(1+4a))/2``.

    Returns the verdict and the worst (smallest) margin over the grid.
    """
    if not a > 0:
        raise ValueError("a must be positive")
    t = np.asarray(t_grid, dtype=float)
    if np.any(t < 0):
        raise ValueError("t_grid must be non-negative")
    t1 = (1.0 + math.sqrt(1.0 + 4.0 * a)) / 2.0
    margin = t1**m + t**m - (t + a) ** (m / 2)
    worst = float(np.min(margin))
    return worst >= 0.0, worst
