"""End-to-end dual bisection solver.

Pipeline: Lanczos estimate of the smallest eigenpair, classification of the
instance (possibly interior, easy boundary, or hard), a perturbation
``p = f + alpha*u1`` in the hard case, an uncertainty interval for the root of
``psi``, and plain bisection on that interval.

Whenever ``lambda1_est <= 0`` the solver works on the shifted instance
``Q - lambda1_est*I``. Bracketing and bisection then run on the offset
``t = sigma + lambda1_est``, which keeps full floating-point resolution
next to the pole, where hard-case roots live.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .dual import (
    ProblemInstance,
    KktReport,
    dual_value_at,
    eval_psi,
    kkt_report,
    primal_value,
)
from .errors import (
    CapViolationError,
    ConvergenceError,
    NegativeCurvatureError,
    PoleProximityError,
    SolverError,
    SphereQPError,
    ValidationError,
)
from .linalg import SpectralEstimate, lanczos_smallest, psi_probe


class Case(str, Enum):
    INTERIOR = "Interior"
    BOUNDARY_EASY = "BoundaryEasy"
    BOUNDARY_HARD_PERTURBED = "BoundaryHardPerturbed"


class Hint(str, Enum):
    POSSIBLY_INTERIOR = "possibly-interior"
    EASY_BOUNDARY = "easy-boundary"
    HARD = "hard"


@dataclass(frozen=True)
class SolverConfig:
    """Tolerances and knobs for :func:`solve`.

    ``scan_step_init=None`` starts the bracket scan with a step equal to the
    pole offset, so the scan sweeps away from the pole on a log scale.
    ``alpha_relative=True`` multiplies ``alpha`` by ``||f||``.
    """

    psi_tol: float = 1e-8
    alpha: float = 1e-4
    scan_step_init: float | None = None
    probe_threshold: float = 0.0
    pole_offset_rel: float = 1e-8
    cg_tol: float = 1e-12
    max_bisect: int = 200
    max_scan: int = 64
    seed: int = 0
    lanczos_tol: float = 1e-10
    lanczos_max_iter: int | None = None
    alpha_relative: bool = False

    def __post_init__(self):
        if not self.psi_tol > 0:
            raise ValidationError("psi_tol must be positive")
        if not self.alpha >= 0:
            raise ValidationError("alpha must be non-negative")
        if self.max_bisect < 1 or self.max_scan < 1:
            raise ValidationError("iteration caps must be at least 1")
        if self.probe_threshold < 0:
            raise ValidationError("probe_threshold must be non-negative")
        if self.scan_step_init is not None and not self.scan_step_init > 0:
            raise ValidationError("scan_step_init must be positive")
        if not self.pole_offset_rel > 0 or not self.cg_tol > 0:
            raise ValidationError("pole_offset_rel and cg_tol must be positive")


@dataclass(frozen=True)
class Perturbation:
    alpha: float
    direction: np.ndarray


@dataclass(frozen=True)
class Solution:
    x: np.ndarray
    sigma: float
    primal_value: float
    dual_value: float
    gap: float
    kkt: KktReport
    case: Case
    perturbation: Perturbation | None
    iterations_bisect: int
    iterations_scan: int
    psi_final: float
    dist_boundary: float
    converged: bool
    lambda1_est: float
    perturbed_primal_value: float = field(default=float("nan"))


def shift_spectral(spectral: SpectralEstimate, s: float) -> SpectralEstimate:
    """Spectral estimate of ``Q + s*I`` given one of ``Q``."""
    return replace(spectral, lambda1_est=spectral.lambda1_est + s)


def pole_offset(spectral, cfg):
    return cfg.pole_offset_rel * (1.0 + abs(spectral.lambda1_est))


def _alpha(prob, cfg):
    if cfg.alpha_relative:
        return cfg.alpha * float(np.linalg.norm(prob.f))
    return cfg.alpha


def classify_and_perturb(prob: ProblemInstance, spectral: SpectralEstimate, cfg: SolverConfig):
    """Decide the linear term the dual is solved with.

    Returns ``(p, hint)``. A positive eigenvalue estimate leaves ``f`` alone
    and flags a possible interior solution. Otherwise ``psi`` for ``f`` is
    probed just right of the pole: a positive value means the root exists
    (easy boundary case); a non-positive one means the existence condition
    fails and ``f`` is perturbed along the estimated eigenvector.
    """
    lam = spectral.lambda1_est
    u = np.asarray(spectral.u1_est)
    f = prob.f
    alpha = _alpha(prob, cfg)
    if lam > 0:
        return f.copy(), Hint.POSSIBLY_INTERIOR
    if np.linalg.norm(f) <= 1e-14 * prob.n:
        return cfg.alpha * u, Hint.HARD
    s = -lam
    work = prob.shifted(s)
    delta = pole_offset(shift_spectral(spectral, s), cfg)
    try:
        res = psi_probe(work.Q, delta, f, prob.r, cfg.probe_threshold, tol=cfg.cg_tol, deflate=u)
    except PoleProximityError:
        p = f + alpha * u
        try:
            psi_probe(work.Q, delta, p, prob.r, cfg.probe_threshold, tol=cfg.cg_tol, deflate=u)
        except PoleProximityError as exc:
            raise SolverError("classify", f"instance unsolvable: {exc}") from exc
        return p, Hint.HARD
    if res.positive or res.value > 0:
        return f.copy(), Hint.EASY_BOUNDARY
    return f + alpha * u, Hint.HARD


def _probe_value(prob, p, sigma, cfg, deflate):
    """psi(sigma) or +inf when the ascent certifies positivity."""
    try:
        res = psi_probe(prob.Q, sigma, p, prob.r, cfg.probe_threshold, tol=cfg.cg_tol, deflate=deflate)
    except ConvergenceError:
        return eval_psi(prob, p, sigma, deflate=deflate, tol=cfg.cg_tol)
    if res.positive:
        return math.inf
    return res.value


def bracket(prob: ProblemInstance, p, spectral: SpectralEstimate, cfg: SolverConfig, *, deflate=None):
    """Uncertainty interval ``(sigma_l, sigma_u, scans)`` for the root of psi.

    The scan starts at ``max(0, -lambda1_est + delta)`` and moves right with
    doubling steps until psi is non-positive, never passing the safe cap
    ``||p||/r + max(0, -lambda1_est) + delta``. If psi is already
    non-positive at the start and a pole is nearby, the start is pulled
    toward the pole instead. ``sigma_l == sigma_u`` means no positive psi
    was found (interior or unperturbed hard case).
    """
    p = np.asarray(p, dtype=float)
    if deflate is None:
        deflate = spectral.u1_est
    lam = spectral.lambda1_est
    delta = pole_offset(spectral, cfg)
    start = max(0.0, -lam + delta)
    cap = float(np.linalg.norm(p)) / prob.r + max(0.0, -lam) + delta
    step = cfg.scan_step_init if cfg.scan_step_init is not None else delta

    scans = 1
    val = _probe_value(prob, p, start, cfg, deflate)
    if val <= 0:
        if lam > 0 or start == 0.0:
            return start, start, scans
        # Root sits between the pole and the start point.
        upper = start
        floor = 1e-15 * (1.0 + prob.Q.norm_bound())
        d = delta
        while scans < cfg.max_scan:
            d /= 16.0
            if d < floor:
                break
            sigma = -lam + d
            scans += 1
            if _probe_value(prob, p, sigma, cfg, deflate) > 0:
                return sigma, upper, scans
            upper = sigma
        return upper, upper, scans

    lower = start
    sigma = start
    while True:
        if scans >= cfg.max_scan:
            sigma = cap
        else:
            sigma = min(sigma + step, cap)
            step *= 2.0
        scans += 1
        val = _probe_value(prob, p, sigma, cfg, deflate)
        if val <= 0:
            return lower, sigma, scans
        if sigma >= cap:
            if val <= cfg.psi_tol:
                return lower, sigma, scans
            raise CapViolationError(sigma, val)
        lower = sigma


def bisect(prob: ProblemInstance, p, sigma_l, sigma_u, cfg: SolverConfig, *, deflate=None):
    """Bisection on psi over ``[sigma_l, sigma_u]``.

    Stops at ``|psi| < psi_tol`` or once the interval can no longer be split
    (width below ``1e-15`` of the endpoints). Returns ``(sigma, x, iters)``
    for the iterate with the smallest ``|psi|``.
    """
    p = np.asarray(p, dtype=float)
    lo, hi = float(sigma_l), float(sigma_u)
    if not lo <= hi:
        raise ValidationError(f"invalid bracket [{lo!r}, {hi!r}]")
    best = None
    for it in range(1, cfg.max_bisect + 1):
        mid = 0.5 * (lo + hi)
        psi, x = eval_psi(prob, p, mid, deflate=deflate, tol=cfg.cg_tol, return_x=True)
        if best is None or abs(psi) < abs(best[2]):
            best = (mid, x, psi)
        if abs(psi) < cfg.psi_tol:
            return mid, x, it
        if mid <= lo or mid >= hi:
            return best[0], best[1], it
        if psi > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * max(abs(lo), abs(hi)):
            return best[0], best[1], it
    raise ConvergenceError(
        f"bisection did not reach |psi| < {cfg.psi_tol:g} in {cfg.max_bisect} steps",
        best=best,
        sigma=best[0],
    )


def perturbation_bound(lambda1, lambda2, tail_sum, r, eps):
    """Largest squared perturbation size the accuracy estimate admits for tolerance ``eps``.

    Evaluates ``(lambda2-lambda1)^2 (r^2 - tail_sum) / (1/sqrt(2(1-cos(eps/r))) - 1)^2``
    and returns ``inf`` when the denominator term is at most one.
    """
    if not lambda2 > lambda1:
        raise ValidationError("need lambda2 > lambda1")
    if not r > 0:
        raise ValidationError("radius must be positive")
    if not 0.0 <= tail_sum <= r * r:
        raise ValidationError("need 0 <= tail_sum <= r^2")
    if not 0.0 < eps < math.pi * r:
        raise ValidationError("need 0 < eps < pi*r")
    # 2(1 - cos t) == 4 sin^2(t/2), without the cancellation for small t.
    c = 2.0 * math.sin(eps / (2.0 * r))
    den = 1.0 / c - 1.0
    if den <= 0:
        return math.inf
    return (lambda2 - lambda1) ** 2 * (r * r - tail_sum) / den**2


def accuracy_for_alpha(lambda1, lambda2, tail_sum, r, alpha):
    """The ``eps`` at which :func:`perturbation_bound` equals ``alpha**2``."""
    if alpha == 0:
        return 0.0
    tau = math.sqrt(max(r * r - tail_sum, 0.0))
    k = 1.0 + (lambda2 - lambda1) * tau / abs(alpha)
    return 2.0 * r * math.asin(min(1.0, 1.0 / (2.0 * k)))


def perturbation_distance_bound(lambda1, lambda2, tail_sum, r, alpha):
    """Upper bound on the distance from the perturbed minimizer to the nearest hard-case minimizer.

    With ``tau = sqrt(r^2 - tail_sum)`` the perturbed solution moves the
    components orthogonal to the smallest eigenspace by at most
    ``sqrt(tail_sum) / ((lambda2-lambda1) tau/alpha + 1)``; staying on the
    sphere magnifies this by at most ``r/tau``.
    """
    tau = math.sqrt(max(r * r - tail_sum, 0.0))
    if tau == 0.0:
        return math.inf
    if alpha == 0:
        return 0.0
    return (r / tau) * math.sqrt(tail_sum) / ((lambda2 - lambda1) * tau / abs(alpha) + 1.0)


def _spectral(prob, cfg):
    est = lanczos_smallest(prob.Q, tol=cfg.lanczos_tol, max_iter=cfg.lanczos_max_iter, seed=cfg.seed)
    if est.residual > 1e-6 * (1.0 + abs(est.lambda1_est)) and est.iterations < prob.n:
        retry = lanczos_smallest(prob.Q, tol=cfg.lanczos_tol, max_iter=2 * est.iterations, seed=cfg.seed)
        if retry.residual < est.residual:
            est = retry
    return est


def _assemble(prob, p, sigma, x, spectral, case, perturbation, iters, scans, cfg):
    nx = float(np.linalg.norm(x))
    psi_final = float(x @ x - prob.r**2)
    pv_p = primal_value(prob, x, p)
    dv = dual_value_at(prob, p, sigma, x)
    if case is Case.INTERIOR:
        converged = nx <= prob.r * (1.0 + 1e-12)
    else:
        converged = abs(psi_final) <= cfg.psi_tol
    x = np.array(x)
    x.flags.writeable = False
    return Solution(
        x=x,
        sigma=float(sigma),
        primal_value=primal_value(prob, x),
        dual_value=dv,
        gap=abs(pv_p - dv),
        kkt=kkt_report(prob, sigma, x, spectral),
        case=case,
        perturbation=perturbation,
        iterations_bisect=iters,
        iterations_scan=scans,
        psi_final=psi_final,
        dist_boundary=abs(nx - prob.r),
        converged=converged,
        lambda1_est=spectral.lambda1_est,
        perturbed_primal_value=pv_p,
    )


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SolverError:
        raise
    except SphereQPError as exc:
        raise SolverError(name, exc) from exc


def solve_with_p(prob: ProblemInstance, p, cfg: SolverConfig | None = None, spectral=None):
    """Root of psi for a fixed linear term ``p``: bracket then bisect.

    Returns ``(sigma, x, iterations_bisect, iterations_scan)``.
    """
    cfg = cfg or SolverConfig()
    if spectral is None:
        spectral = _stage("lanczos", _spectral, prob, cfg)
    s = max(0.0, -spectral.lambda1_est)
    work = prob.shifted(s)
    wspec = shift_spectral(spectral, s)
    lo, hi, scans = _stage("bracket", bracket, work, p, wspec, cfg)
    if lo == hi:
        raise SolverError("bracket", "psi is not positive anywhere right of the pole")
    t, x, iters = _stage("bisect", bisect, work, p, lo, hi, cfg, deflate=spectral.u1_est)
    return s + t, x, iters, scans


def solve(prob: ProblemInstance, cfg: SolverConfig | None = None) -> Solution:
    """Globally minimize ``x^T Q x - 2 f^T x`` over ``||x|| <= r``."""
    cfg = cfg or SolverConfig()
    spectral = _stage("lanczos", _spectral, prob, cfg)
    u = spectral.u1_est
    lam = spectral.lambda1_est
    p, hint = _stage("classify", classify_and_perturb, prob, spectral, cfg)

    def perturbation():
        return Perturbation(float(_alpha(prob, cfg)), np.array(u)) if hint is Hint.HARD else None

    if hint is Hint.POSSIBLY_INTERIOR or (hint is not Hint.HARD and -spectral.residual < lam <= 0):
        try:
            psi0, x0 = eval_psi(prob, p, 0.0, deflate=u, tol=cfg.cg_tol, return_x=True)
        except NegativeCurvatureError:
            psi0 = None
        except SphereQPError as exc:
            raise SolverError("interior", exc) from exc
        if psi0 is not None and psi0 <= 0:
            return _assemble(prob, p, 0.0, x0, spectral, Case.INTERIOR, None, 0, 0, cfg)

    s = max(0.0, -lam)
    work = prob.shifted(s)
    wspec = shift_spectral(spectral, s)
    lo, hi, scans = _stage("bracket", bracket, work, p, wspec, cfg)
    if lo == hi and hint is not Hint.HARD and lam <= 0:
        # Numerically indistinguishable from the hard case: perturb and rescan.
        hint = Hint.HARD
        p = prob.f + _alpha(prob, cfg) * np.asarray(u)
        lo, hi, more = _stage("bracket", bracket, work, p, wspec, cfg)
        scans += more
    if lo == hi:
        raise SolverError("bracket", f"no sign change of psi found (sigma={s + lo!r})")
    t, x, iters = _stage("bisect", bisect, work, p, lo, hi, cfg, deflate=u)
    case = Case.BOUNDARY_HARD_PERTURBED if hint is Hint.HARD else Case.BOUNDARY_EASY
    return _assemble(prob, p, s + t, x, spectral, case, perturbation(), iters, scans, cfg)
