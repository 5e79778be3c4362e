"""The one-dimensional dual of ball-constrained quadratic minimization.

For ``G(sigma) = Q + sigma*I`` the dual function is

    Pd(sigma) = -p^T G(sigma)^{-1} p - r^2 sigma

and its derivative ``psi(sigma) = ||G(sigma)^{-1} p||^2 - r^2`` is strictly
decreasing and convex right of the pole ``-lambda_1``. The primal minimizer is
recovered as ``x = G(sigma)^{-1} p`` at the root of ``psi``.

All functions accept an optional ``deflate`` direction that is forwarded to
:func:`~sphereqp.linalg.shifted_solve`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, ValidationError
from .linalg import SpectralEstimate, SymMatrix, as_symmatrix, shifted_solve

DEFAULT_CG_TOL = 1e-12


@dataclass(frozen=True)
class ProblemInstance:
    """``min x^T Q x - 2 f^T x`` subject to ``||x|| <= r``."""

    Q: SymMatrix
    f: np.ndarray
    r: float

    def __post_init__(self):
        Q = as_symmatrix(self.Q)
        f = np.array(self.f, dtype=float)
        if f.shape != (Q.n,):
            raise DimensionError(f"f has shape {f.shape}, expected ({Q.n},)")
        if not np.all(np.isfinite(f)):
            raise ValidationError("f must be finite")
        r = float(self.r)
        if not (np.isfinite(r) and r > 0):
            raise ValidationError(f"radius must be a positive real number, got {self.r!r}")
        f.flags.writeable = False
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "f", f)
        object.__setattr__(self, "r", r)

    @property
    def n(self):
        return self.Q.n

    def shifted(self, s):
        """Same instance with ``Q`` replaced by ``Q + s*I``.

        Multipliers of the shifted instance are offsets ``sigma - s``.
        """
        return ProblemInstance(self.Q.shifted(s), self.f, self.r)


@dataclass(frozen=True)
class KktReport:
    stationarity: float
    feasibility: float
    dual_feas_sigma: float
    curvature_cert: float
    complementarity: float

    def max_residual(self):
        """Largest of the non-negative residuals (the curvature certificate is excluded)."""
        return max(self.stationarity, self.feasibility, self.dual_feas_sigma, self.complementarity)


def _p(prob, p):
    if p is None:
        return prob.f
    p = np.asarray(p, dtype=float)
    if p.shape != (prob.n,):
        raise DimensionError(f"p has shape {p.shape}, expected ({prob.n},)")
    return p


def _solve(prob, p, sigma, deflate, tol):
    return shifted_solve(prob.Q, sigma, p, tol=tol, deflate=deflate)


def eval_dual(prob, p=None, sigma=0.0, *, deflate=None, tol=DEFAULT_CG_TOL):
    """Dual function ``-p^T G(sigma)^{-1} p - r^2 sigma``."""
    p = _p(prob, p)
    x = _solve(prob, p, sigma, deflate, tol)
    return float(-(p @ x) - prob.r**2 * sigma)


def eval_psi(prob, p=None, sigma=0.0, *, deflate=None, tol=DEFAULT_CG_TOL, return_x=False):
    """``psi(sigma) = ||G(sigma)^{-1} p||^2 - r^2``.

    With ``return_x=True`` the solve vector is returned as well, so the caller
    can keep it as the primal candidate.
    """
    p = _p(prob, p)
    x = _solve(prob, p, sigma, deflate, tol)
    psi = float(x @ x - prob.r**2)
    if return_x:
        return psi, x
    return psi


def eval_psi_derivs(prob, p=None, sigma=0.0, *, deflate=None, tol=DEFAULT_CG_TOL):
    """``(psi', psi'') = (-2 p^T G^{-3} p, 6 p^T G^{-4} p)`` from two chained solves."""
    p = _p(prob, p)
    x1 = _solve(prob, p, sigma, deflate, tol)
    x2 = _solve(prob, x1, sigma, deflate, tol)
    return float(-2.0 * (x1 @ x2)), float(6.0 * (x2 @ x2))


def recover_primal(prob, p=None, sigma=0.0, *, deflate=None, tol=DEFAULT_CG_TOL):
    return _solve(prob, _p(prob, p), sigma, deflate, tol)


def primal_value(prob, x, p=None):
    """``x^T Q x - 2 p^T x``, with ``p`` defaulting to the instance's ``f``."""
    p = _p(prob, p)
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({prob.n},)")
    return float(x @ prob.Q.matvec(x) - 2.0 * (p @ x))


def dual_value_at(prob, p, sigma, x):
    """Dual value from an already computed ``x = G(sigma)^{-1} p``."""
    p = _p(prob, p)
    return float(-(p @ x) - prob.r**2 * sigma)


def duality_gap(prob, p, sigma, x, *, deflate=None, tol=DEFAULT_CG_TOL):
    """``|P(x) - Pd(sigma)|`` where both sides use the same linear term ``p``."""
    p = _p(prob, p)
    return abs(primal_value(prob, x, p) - eval_dual(prob, p, sigma, deflate=deflate, tol=tol))


def kkt_report(prob, sigma, x, spectral: SpectralEstimate | None = None, p=None):
    """Residuals of the four optimality conditions at ``(x, sigma)``.

    ``curvature_cert`` is ``lambda1_est + sigma``; a value above a small
    negative tolerance certifies ``Q + sigma*I`` is (nearly) PSD. Without a
    spectral estimate it is NaN.
    """
    p = _p(prob, p)
    x = np.asarray(x, dtype=float)
    if x.shape != (prob.n,):
        raise DimensionError(f"x has shape {x.shape}, expected ({prob.n},)")
    sigma = float(sigma)
    nx = float(np.linalg.norm(x))
    stat = float(np.linalg.norm(prob.Q.matvec(x) + sigma * x - p))
    cert = float(spectral.lambda1_est + sigma) if spectral is not None else float("nan")
    return KktReport(
        stationarity=stat,
        feasibility=max(0.0, nx - prob.r),
        dual_feas_sigma=max(0.0, -sigma),
        curvature_cert=cert,
        complementarity=abs(sigma * (nx - prob.r)),
    )
