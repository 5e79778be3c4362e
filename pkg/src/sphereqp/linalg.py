"""Matrix-free kernels: symmetric storage, shifted CG solves, the psi probe, Lanczos.

Every routine touches ``Q`` only through matrix-vector products. The shifted
solves optionally deflate one direction ``w`` (in practice the Lanczos
estimate of the smallest eigenvector). The component of the solution along
``w`` is then resolved exactly by a Galerkin step and CG only sees the
well-conditioned complement. This is what keeps ``psi`` accurate when the
multiplier sits a hair to the right of the pole.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal

from .errors import (
    ConvergenceError,
    DimensionError,
    LanczosBreakdownError,
    NegativeCurvatureError,
    PoleProximityError,
    ValidationError,
)

DENSE_LIMIT = 1024


class SymMatrix:
    """An exactly symmetric matrix built from one triangle.

    Only the lower triangle of the input is read, so symmetry holds by
    construction. ``shift`` adds a multiple of the identity without touching
    the stored entries, which lets callers move the origin of the multiplier
    axis with no loss of resolution.
    """

    __slots__ = ("n", "storage", "shift", "_op")

    def __init__(self, op, storage, shift=0.0):
        self._op = op
        self.storage = storage
        self.n = op.shape[0]
        self.shift = float(shift)

    @classmethod
    def from_dense(cls, a, storage="auto"):
        a = np.asarray(a, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionError(f"expected a square matrix, got shape {a.shape}")
        n = a.shape[0]
        if n < 1:
            raise ValidationError("matrix dimension must be at least 1")
        low = np.tril(a)
        if not np.all(np.isfinite(low)):
            raise ValidationError("matrix entries must be finite")
        full = low + np.tril(low, -1).T
        return cls._wrap(full, _resolve_storage(storage, n))

    @classmethod
    def from_lower(cls, n, rows, cols, vals, storage="auto"):
        """Build from lower-triangle triplets (row >= col, 0-based).

        Repeated coordinates are summed, as in COO assembly.
        """
        rows = np.asarray(rows, dtype=np.int64)
        cols = np.asarray(cols, dtype=np.int64)
        vals = np.asarray(vals, dtype=float)
        if n < 1:
            raise ValidationError("matrix dimension must be at least 1")
        if not (rows.shape == cols.shape == vals.shape):
            raise DimensionError("triplet arrays must have equal length")
        if rows.size and (rows.min() < 0 or cols.min() < 0 or rows.max() >= n or cols.max() >= n):
            raise DimensionError("triplet index out of range")
        if np.any(rows < cols):
            raise ValidationError("only lower-triangle entries (row >= col) are accepted")
        if not np.all(np.isfinite(vals)):
            raise ValidationError("matrix entries must be finite")
        low = sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()
        full = (low + sp.tril(low, -1).T).tocsr()
        full.sort_indices()
        kind = _resolve_storage(storage, n)
        if kind == "dense":
            return cls._wrap(full.toarray(), kind)
        return cls._wrap(full, kind)

    @classmethod
    def identity(cls, n, storage="auto"):
        return cls.from_dense(np.eye(n), storage=storage)

    @classmethod
    def diag(cls, d, storage="auto"):
        return cls.from_dense(np.diag(np.asarray(d, dtype=float)), storage=storage)

    @classmethod
    def _wrap(cls, full, kind):
        if kind == "dense":
            op = np.ascontiguousarray(full, dtype=float)
            op.flags.writeable = False
        else:
            op = sp.csr_matrix(full, dtype=float)
            op.sort_indices()
            for arr in (op.data, op.indices, op.indptr):
                arr.flags.writeable = False
        return cls(op, kind)

    def shifted(self, s):
        """Return ``Q + s*I`` sharing this matrix's storage."""
        return SymMatrix(self._op, self.storage, self.shift + float(s))

    def matvec(self, v):
        v = np.asarray(v, dtype=float)
        if v.shape != (self.n,):
            raise DimensionError(f"vector of shape {v.shape} does not match n={self.n}")
        out = self._op @ v
        if self.shift != 0.0:
            out = out + self.shift * v
        return out

    __matmul__ = matvec

    def diagonal(self):
        d = self._op.diagonal() if self.storage == "sparse" else np.diag(self._op).copy()
        return d + self.shift

    def to_dense(self):
        a = self._op.toarray() if self.storage == "sparse" else np.array(self._op)
        if self.shift != 0.0:
            a[np.diag_indices(self.n)] += self.shift
        return a

    def lower_triplets(self):
        """Nonzero lower-triangle entries as ``(rows, cols, vals)``, row-major."""
        if self.storage == "dense":
            full = sp.csr_matrix(self.to_dense())
        else:
            full = self._op + self.shift * sp.identity(self.n, format="csr")
        low = sp.tril(full).tocoo()
        order = np.lexsort((low.col, low.row))
        return low.row[order], low.col[order], low.data[order]

    def norm_bound(self):
        """Infinity norm, an upper bound on the spectral radius."""
        absrow = abs(self._op).sum(axis=1)
        return float(np.max(np.asarray(absrow).ravel())) + abs(self.shift)

    def __repr__(self):
        return f"SymMatrix(n={self.n}, storage={self.storage!r}, shift={self.shift!r})"


def _resolve_storage(storage, n):
    if storage == "auto":
        return "dense" if n < DENSE_LIMIT else "sparse"
    if storage not in ("dense", "sparse"):
        raise ValidationError(f"unknown storage {storage!r}")
    return storage


def as_symmatrix(Q):
    if isinstance(Q, SymMatrix):
        return Q
    if sp.issparse(Q):
        low = sp.tril(Q).tocoo()
        return SymMatrix.from_lower(Q.shape[0], low.row, low.col, low.data)
    return SymMatrix.from_dense(Q)


def matvec(Q, v):
    """Return ``Q @ v``."""
    return as_symmatrix(Q).matvec(v)


@dataclass(frozen=True)
class SpectralEstimate:
    """Approximate smallest eigenpair with its recomputed residual."""

    lambda1_est: float
    u1_est: np.ndarray
    residual: float
    iterations: int


@dataclass(frozen=True)
class ProbeResult:
    """Outcome of :func:`psi_probe`.

    ``positive`` means an ascent iterate already exceeded the threshold, so
    ``psi(sigma) > threshold`` is certified and ``value`` is None. Otherwise
    ``value`` is the converged ``psi(sigma)``. ``lower_bound`` is the last
    ascent value minus ``r**2`` in both cases.
    """

    positive: bool
    value: float | None
    lower_bound: float
    iterations: int


def _shift_operator(Q, sigma):
    def apply(v):
        return Q.matvec(v) + sigma * v

    return apply


def _prepare_deflation(deflate, n):
    if deflate is None:
        return None
    w = np.asarray(deflate, dtype=float)
    if w.shape != (n,):
        raise DimensionError("deflation vector has the wrong length")
    nw = np.linalg.norm(w)
    if not nw > 0:
        return None
    return w / nw


def shifted_solve(Q, sigma, p, tol=1e-12, max_iter=None, *, deflate=None, jacobi=False):
    """Solve ``(Q + sigma*I) x = p`` by conjugate gradients.

    Parameters
    ----------
    Q : SymMatrix
    sigma : float
    p : array_like
    tol : float
        Relative residual target, checked on the recomputed residual. If
        CG stagnates before reaching it, the solve is still accepted when
        ``||r|| <= tol * (||G|| ||x|| + ||p||)``.
    max_iter : int, optional
        Total CG iterations over all refinement passes. Defaults to ``3n + 100``.
    deflate : array_like, optional
        Direction handled exactly by a Galerkin correction before CG starts.
    jacobi : bool
        Use the diagonal of ``Q + sigma*I`` as a preconditioner.

    Raises
    ------
    NegativeCurvatureError
        A search direction with non-positive curvature was met.
    ConvergenceError
        The iteration cap was reached before the residual target.
    """
    Q = as_symmatrix(Q)
    p = np.asarray(p, dtype=float)
    n = Q.n
    if p.shape != (n,):
        raise DimensionError(f"right-hand side of shape {p.shape} does not match n={n}")
    sigma = float(sigma)
    if max_iter is None:
        max_iter = 3 * n + 100
    pnorm = np.linalg.norm(p)
    x = np.zeros(n)
    if pnorm == 0.0:
        return x
    target = tol * pnorm
    apply = _shift_operator(Q, sigma)
    w = _prepare_deflation(deflate, n)
    Aw = mu = None
    if w is not None:
        Aw = apply(w)
        mu = float(w @ Aw)
        if not mu > 0:
            raise NegativeCurvatureError(sigma, w.copy(), mu)
    minv = None
    if jacobi:
        dg = Q.diagonal() + sigma
        bad = np.flatnonzero(dg <= 0)
        if bad.size:
            e = np.zeros(n)
            e[bad[0]] = 1.0
            raise NegativeCurvatureError(sigma, e, float(dg[bad[0]]))
        minv = 1.0 / dg

    used = 0
    r = p.copy()
    for _ in range(4):
        if w is not None:
            c = (w @ r) / mu
            x += c * w
            r -= c * Aw
        used += _cg_pass(apply, x, r, target, max_iter - used, w, Aw, mu, minv, sigma)
        r = p - apply(x)
        if np.linalg.norm(r) <= target:
            return x
        if used >= max_iter:
            break
    # Stagnation at the rounding floor: accept a normwise backward-stable solve.
    scale = (Q.norm_bound() + abs(sigma)) * np.linalg.norm(x) + pnorm
    if np.linalg.norm(r) <= tol * scale:
        return x
    raise ConvergenceError(
        f"CG did not reach relative residual {tol:g} at sigma={sigma!r}"
        f" (got {np.linalg.norm(r) / pnorm:.3e})",
        best=x,
        sigma=sigma,
    )


def _cg_pass(apply, x, r, target, budget, w, Aw, mu, minv, sigma):
    # Updates x and r in place; returns iterations used.
    z = r if minv is None else minv * r
    d = z.copy()
    if w is not None:
        d -= w * ((Aw @ z) / mu)
    rz = r @ z
    k = 0
    while k < budget and np.linalg.norm(r) > target:
        q = apply(d)
        dq = d @ q
        if not dq > 0:
            raise NegativeCurvatureError(sigma, d.copy(), float(dq))
        a = rz / dq
        x += a * d
        r -= a * q
        k += 1
        z = r if minv is None else minv * r
        rz_new = r @ z
        d = z + (rz_new / rz) * d
        if w is not None:
            d -= w * ((Aw @ z) / mu)
        rz = rz_new
    return k


def psi_probe(Q, sigma, p, r, threshold=0.0, max_iter=None, *, tol=1e-12, deflate=None):
    """Bound or evaluate ``psi(sigma) = p^T G^{-2} p - r^2`` by monotone ascent.

    Maximizes ``-z^T G^2 z + 2 p^T z - r^2`` with (deflated) CG on ``G^2``.
    The objective only increases along CG iterates, so as soon as it exceeds
    ``threshold`` the probe stops and reports ``positive``.
    """
    Q = as_symmatrix(Q)
    p = np.asarray(p, dtype=float)
    n = Q.n
    if p.shape != (n,):
        raise DimensionError(f"vector of shape {p.shape} does not match n={n}")
    if threshold < 0:
        raise ValidationError("probe threshold must be non-negative")
    sigma = float(sigma)
    r2 = float(r) ** 2
    if max_iter is None:
        max_iter = 3 * n + 100
    pnorm = np.linalg.norm(p)
    if pnorm == 0.0:
        return ProbeResult(False, -r2, -r2, 0)

    G = _shift_operator(Q, sigma)

    def A(v):
        return G(G(v))

    z = np.zeros(n)
    res = p.copy()
    F = 0.0
    w = _prepare_deflation(deflate, n)
    Aw = mu = None
    if w is not None:
        Gw = G(w)
        mu = float(Gw @ Gw)
        wp = float(w @ p)
        if mu == 0.0:
            if wp != 0.0:
                return ProbeResult(True, None, np.inf, 0)
            w = None
        else:
            Aw = G(Gw)
            c = wp / mu
            z += c * w
            res -= c * Aw
            F = c * wp
            if not np.isfinite(F):
                raise PoleProximityError(sigma)
            if F - r2 > threshold:
                return ProbeResult(True, None, F - r2, 0)

    target = tol * pnorm
    d = res.copy()
    if w is not None:
        d -= w * ((Aw @ res) / mu)
    rr = res @ res
    k = 0
    while k < max_iter:
        if np.sqrt(rr) <= target:
            break
        q = A(d)
        dq = d @ q
        if not dq > 0:
            if rr > 0:
                # G^2 is PSD: zero curvature with nonzero slope means an unbounded ascent.
                return ProbeResult(True, None, np.inf, k)
            break
        a = rr / dq
        inc = a * rr
        z += a * d
        res -= a * q
        F += inc
        k += 1
        if not (np.isfinite(F) and np.isfinite(a)):
            raise PoleProximityError(sigma)
        if F - r2 > threshold:
            return ProbeResult(True, None, F - r2, k)
        if inc <= 1e-17 * F:
            break
        rr_new = res @ res
        d = res + (rr_new / rr) * d
        if w is not None:
            d -= w * ((Aw @ res) / mu)
        rr = rr_new
    else:
        raise ConvergenceError(
            f"psi probe did not converge at sigma={sigma!r}", best=z, sigma=sigma
        )
    true_res = p - A(z)
    value = float(p @ z + z @ true_res) - r2
    if not np.isfinite(value):
        raise PoleProximityError(sigma)
    return ProbeResult(False, value, value, k)


def _smallest_ritz(alphas, betas):
    d = np.asarray(alphas)
    if d.size == 1:
        return float(d[0]), np.ones(1)
    vals, vecs = eigh_tridiagonal(d, np.asarray(betas), select="i", select_range=(0, 0))
    return float(vals[0]), vecs[:, 0]


def lanczos_smallest(Q, tol=1e-10, max_iter=None, seed=0, max_restarts=3):
    """Smallest eigenpair of ``Q`` by Lanczos with full reorthogonalization.

    The start vector comes from ``numpy.random.default_rng(seed)``. The
    returned eigenvalue is the Rayleigh quotient of the returned unit vector
    and the residual is recomputed from ``Q``.
    """
    Q = as_symmatrix(Q)
    n = Q.n
    m = min(n, 300) if max_iter is None else min(int(max_iter), n)
    m = max(m, 1)
    rng = np.random.default_rng(seed)
    scale = max(1.0, Q.norm_bound())
    V = np.empty((m, n))
    alphas, betas = [], []
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    v_prev = np.zeros(n)
    b_prev = 0.0
    restarts = 0
    theta, s = 0.0, np.ones(1)
    j = 0
    while j < m:
        V[j] = v
        wv = Q.matvec(v)
        a = float(v @ wv)
        wv -= a * v + b_prev * v_prev
        basis = V[: j + 1]
        for _ in range(2):
            wv -= basis.T @ (basis @ wv)
        b = float(np.linalg.norm(wv))
        alphas.append(a)
        j += 1
        theta, s = _smallest_ritz(alphas, betas)
        if j == m:
            break
        if b * abs(s[-1]) <= tol * (1.0 + abs(theta)) and b > 1e-13 * scale:
            break
        if b <= 1e-13 * scale:
            u = V[:j].T @ s
            u /= np.linalg.norm(u)
            rq = float(u @ Q.matvec(u))
            if np.linalg.norm(Q.matvec(u) - rq * u) <= max(tol * (1.0 + abs(rq)), 1e-12 * scale):
                break
            restarts += 1
            if restarts > max_restarts:
                raise LanczosBreakdownError(
                    f"Lanczos broke down {restarts} times without converging"
                )
            v_new = rng.standard_normal(n)
            for _ in range(2):
                v_new -= V[:j].T @ (V[:j] @ v_new)
            nv = np.linalg.norm(v_new)
            if nv <= 1e-13:
                break
            betas.append(0.0)
            v_prev, v, b_prev = v, v_new / nv, 0.0
            continue
        betas.append(b)
        v_prev, v, b_prev = v, wv / b, b
    u = V[:j].T @ s
    u /= np.linalg.norm(u)
    Qu = Q.matvec(u)
    lam = float(u @ Qu)
    resid = float(np.linalg.norm(Qu - lam * u))
    u.flags.writeable = False
    return SpectralEstimate(lam, u, resid, j)
