"""Exact small-scale reference solutions through a full eigendecomposition.

Everything here is computed in the eigenbasis of ``Q``, which makes the
hard case explicit: when the linear term has no component in the smallest
eigenspace and the remaining part of the secular function stays below
``r^2``, the multiplier sits exactly at ``-lambda_1`` and the solution set is
a sphere section ``x0 + tau*span(U_1)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, OracleLimitError, ValidationError
from .linalg import as_symmatrix
from .solver import perturbation_bound

ORACLE_LIMIT = 2000
MULTIPLICITY_RTOL = 1e-10


@dataclass(frozen=True)
class OracleDecomposition:
    """``Q = U diag(lambdas) U^T`` with ``lambdas`` sorted and ``f_hat = U^T f``.

    ``f_hat`` is filled by :func:`project`; ``eig_full`` leaves it as None.
    """

    lambdas: np.ndarray
    U: np.ndarray
    k: int
    f_hat: np.ndarray | None = None

    @property
    def n(self):
        return self.lambdas.size

    def project(self, f):
        return self.U.T @ np.asarray(f, dtype=float)


@dataclass(frozen=True)
class HardFamily:
    """Hard-case solution set ``{x0 + tau*B c : ||c|| = 1}``."""

    x0: np.ndarray
    tau: float
    basis: np.ndarray


@dataclass(frozen=True)
class OracleSolution:
    x: np.ndarray
    sigma: float
    value: float
    family: HardFamily | None = None


def _jacobi_eigh(A, tol=1e-15, max_sweeps=100):
    """Cyclic Jacobi rotations; returns unsorted ``(w, V)``."""
    A = np.array(A, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    scale = max(np.abs(A).max(), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(np.sum(np.tril(A, -1) ** 2))
        if off <= tol * scale:
            return np.diag(A).copy(), V
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = math.copysign(1.0, theta) / (abs(theta) + math.hypot(theta, 1.0))
                c = 1.0 / math.hypot(t, 1.0)
                s = t * c
                # Rotate rows and columns p, q.
                ap, aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                ap, aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * ap - s * aq
                A[q, :] = s * ap + c * aq
                vp, vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * vp - s * vq
                V[:, q] = s * vp + c * vq
    return np.diag(A).copy(), V


def eig_full(Q, method="lapack", limit=ORACLE_LIMIT) -> OracleDecomposition:
    """Full symmetric eigendecomposition, refused above ``limit``.

    ``method="lapack"`` uses :func:`numpy.linalg.eigh`; ``method="jacobi"``
    runs cyclic Jacobi rotations (slow, intended for small cross-checks).
    """
    Q = as_symmatrix(Q)
    if Q.n > limit:
        raise OracleLimitError(f"n = {Q.n} exceeds the oracle limit {limit}")
    A = Q.to_dense()
    if method == "lapack":
        w, V = np.linalg.eigh(A)
    elif method == "jacobi":
        w, V = _jacobi_eigh(A)
    else:
        raise ValidationError(f"unknown method {method!r}")
    order = np.argsort(w, kind="stable")
    w, V = w[order], V[:, order]
    k = int(np.sum(w - w[0] <= MULTIPLICITY_RTOL * (1.0 + abs(w[0]))))
    return OracleDecomposition(lambdas=w, U=V, k=k)


def _check(dec, f, r):
    f = np.asarray(f, dtype=float)
    if f.shape != (dec.n,):
        raise DimensionError(f"f has shape {f.shape}, expected ({dec.n},)")
    if not r > 0:
        raise ValidationError("radius must be positive")
    return f


def existence_condition(dec: OracleDecomposition, f, r):
    """Whether the dual has a critical point right of the pole.

    Returns ``(holds, fhat_head, tail_sum)`` where ``fhat_head`` is the
    squared weight of ``f`` in the smallest eigenspace and ``tail_sum`` the
    secular function of the remaining components evaluated at the pole.
    """
    f = _check(dec, f, r)
    fh = dec.project(f)
    k = dec.k
    head = float(np.sum(fh[:k] ** 2))
    gaps = dec.lambdas[k:] - dec.lambdas[0]
    tail = float(np.sum(fh[k:] ** 2 / gaps**2))
    holds = head > 1e-20 * max(float(f @ f), 1e-300) or tail > r * r
    return bool(holds), head, tail


def dual_diag(dec: OracleDecomposition, f, r, sigma):
    """``-sum f_hat_i^2/(lambda_i + sigma) - r^2 sigma``, defined for ``sigma > -lambda_1``."""
    f = _check(dec, f, r)
    if not sigma > -dec.lambdas[0]:
        raise ValidationError("sigma must lie right of the pole")
    fh = dec.project(f)
    return float(-np.sum(fh**2 / (dec.lambdas + sigma)) - r * r * sigma)


def psi_diag(dec, f, r, sigma):
    fh = dec.project(np.asarray(f, dtype=float))
    return float(np.sum(fh**2 / (dec.lambdas + sigma) ** 2) - r * r)


def secular_solve(dec: OracleDecomposition, f, r):
    """Root of ``psi`` right of ``max(0, -lambda_1)``, or None in the hard case.

    Works in the offset ``t = sigma + lambda_1`` so the bisection resolves
    roots close to the pole. Returns None when no root exists, which includes
    the interior case where ``psi(0) <= 0`` for positive definite ``Q``.
    """
    f = _check(dec, f, r)
    holds, _, _ = existence_condition(dec, f, r)
    lam1 = dec.lambdas[0]
    fh2 = dec.project(f) ** 2
    gaps = dec.lambdas - lam1

    def psi_t(t):
        return float(np.sum(fh2 / (gaps + t) ** 2) - r * r)

    if lam1 > 0:
        t_lo = lam1
        if psi_t(t_lo) <= 0:
            return None
    else:
        if not holds:
            return None
        t_lo = 0.0
    t_hi = max(t_lo, 0.0) + float(np.sqrt(np.sum(fh2))) / r + 1.0
    while psi_t(t_hi) > 0:
        t_hi *= 2.0
    if t_lo == 0.0:
        # Find a left end with psi > 0 by halving toward the pole.
        t_lo = t_hi
        while psi_t(t_lo) <= 0:
            t_hi = t_lo
            t_lo *= 0.5
            if t_lo < 1e-300:
                return None
    while t_hi - t_lo > 1e-14 * max(t_hi, 1e-300):
        mid = 0.5 * (t_lo + t_hi)
        if mid <= t_lo or mid >= t_hi:
            break
        if psi_t(mid) > 0:
            t_lo = mid
        else:
            t_hi = mid
    return float(0.5 * (t_lo + t_hi) - lam1)


def _value(Q, f, x):
    return float(x @ Q @ x - 2.0 * (f @ x))


def global_solutions(dec: OracleDecomposition, f, r, Q=None):
    """Exact global minimizers of ``x^T Q x - 2 f^T x`` over ``||x|| <= r``.

    Objective values use ``Q`` when given, else the reconstruction
    ``U diag(lambdas) U^T``. The hard case yields two representatives
    ``x0 +- tau*U_1`` sharing one :class:`HardFamily` record.
    """
    f = _check(dec, f, r)
    if Q is None:
        Q = (dec.U * dec.lambdas) @ dec.U.T
    else:
        Q = as_symmatrix(Q).to_dense()
    lam, U = dec.lambdas, dec.U
    fh = dec.project(f)
    if lam[0] > 0:
        x = U @ (fh / lam)
        if x @ x < r * r:
            return [OracleSolution(x, 0.0, _value(Q, f, x))]
    sigma = secular_solve(dec, f, r)
    if sigma is not None:
        x = U @ (fh / (lam + sigma))
        return [OracleSolution(x, sigma, _value(Q, f, x))]
    k = dec.k
    sigma = float(-lam[0])
    y = np.zeros_like(fh)
    y[k:] = fh[k:] / (lam[k:] - lam[0])
    x0 = U @ y
    tau = math.sqrt(max(r * r - float(x0 @ x0), 0.0))
    basis = U[:, :k].copy()
    fam = HardFamily(x0=x0, tau=tau, basis=basis)
    out = []
    for sgn in (1.0, -1.0):
        x = x0 + sgn * tau * basis[:, 0]
        out.append(OracleSolution(x, sigma, _value(Q, f, x), fam))
    return out


def nearest_solution_distance(sols, x):
    """Distance from ``x`` to the nearest point of the oracle solution set."""
    x = np.asarray(x, dtype=float)
    fam = sols[0].family
    if fam is None:
        return min(float(np.linalg.norm(x - s.x)) for s in sols)
    # Closest point of x0 + tau*B c, ||c|| = 1: align c with B^T (x - x0).
    c = fam.basis.T @ (x - fam.x0)
    nc = np.linalg.norm(c)
    c = c / nc if nc > 0 else np.eye(fam.basis.shape[1])[0]
    return float(np.linalg.norm(x - fam.x0 - fam.tau * (fam.basis @ c)))


def accuracy_bound(dec: OracleDecomposition, f, r, eps):
    """Admissible squared perturbation for accuracy ``eps`` from exact spectral data."""
    if dec.k >= dec.n:
        raise ValidationError("need a second distinct eigenvalue")
    _, _, tail = existence_condition(dec, f, r)
    return perturbation_bound(dec.lambdas[0], dec.lambdas[dec.k], min(tail, r * r), r, eps)
