"""Random instance generators and file I/O.

An instance bundle is two files: ``<stem>.mtx`` holds ``Q`` in Matrix Market
symmetric format and ``<stem>.rhs`` holds ``r`` on the first line followed by
the entries of ``f``. Floats are written with ``repr`` so a round trip is
exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path

import numpy as np

from .dual import ProblemInstance
from .errors import ParseError, ValidationError
from .linalg import SymMatrix


class GenCase(str, Enum):
    GENERAL = "general"
    HARD = "hard"


@dataclass(frozen=True)
class GenSpec:
    dim: int
    case: GenCase = GenCase.GENERAL
    seed: int = 0
    coeff_range: tuple[int, int] = (-100, 100)
    spectrum: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "case", GenCase(self.case))
        lo, hi = self.coeff_range
        if lo > hi:
            raise ValidationError(f"empty coefficient range {self.coeff_range}")
        if self.dim < 1:
            raise ValidationError("dim must be at least 1")
        if self.case is GenCase.HARD and self.dim < 2:
            raise ValidationError("hard instances need dim >= 2")
        if self.spectrum is not None and len(self.spectrum) != self.dim:
            raise ValidationError("spectrum length must equal dim")


@dataclass(frozen=True)
class HardCertificate:
    v1: np.ndarray
    lambda1: float
    tail_sum: float
    r: float
    lambdas: np.ndarray


def gen_general(spec: GenSpec) -> ProblemInstance:
    """Integer-coefficient instance: ``Q = (A + A^T)/2``, integer ``f`` and ``r``."""
    if spec.case is not GenCase.GENERAL:
        raise ValidationError("gen_general needs case=general")
    rng = np.random.default_rng(spec.seed)
    lo, hi = spec.coeff_range
    n = spec.dim
    A = rng.integers(lo, hi, size=(n, n), endpoint=True).astype(float)
    f = rng.integers(lo, hi, size=n, endpoint=True).astype(float)
    r = float(rng.integers(max(lo, 1), max(hi, 1), endpoint=True))
    return ProblemInstance(SymMatrix.from_dense(0.5 * (A + A.T)), f, r)


def _orthogonal(rng, n):
    Z = rng.standard_normal((n, n))
    V, R = np.linalg.qr(Z)
    return V * np.sign(np.diag(R))


def gen_hard(spec: GenSpec, max_retries=10):
    """Instance violating the existence condition, with its certificate.

    ``Q = V diag(lambdas) V^T`` with a simple negative smallest eigenvalue,
    ``f`` orthogonal to the first eigenvector, and ``r = 1.25*sqrt(tail_sum)``.
    """
    if spec.case is not GenCase.HARD:
        raise ValidationError("gen_hard needs case=hard")
    rng = np.random.default_rng(spec.seed)
    n = spec.dim
    lo, hi = spec.coeff_range
    V = _orthogonal(rng, n)
    if spec.spectrum is not None:
        lam = np.sort(np.asarray(spec.spectrum, dtype=float))
        if not lam[1] > lam[0]:
            raise ValidationError("smallest eigenvalue must be simple")
    else:
        lam1 = rng.uniform(-100.0, -1.0)
        rest = np.sort(rng.uniform(lam1 + 1.0, 100.0, size=n - 1))
        lam = np.concatenate(([lam1], rest))
    v1 = V[:, 0]
    for _ in range(max_retries):
        g = rng.integers(lo, hi, size=n, endpoint=True).astype(float)
        f = g - (v1 @ g) * v1
        f = f - (v1 @ f) * v1
        if np.linalg.norm(f) > 0:
            break
    else:
        raise ValidationError("could not draw a nonzero linear term")
    Q = (V * lam) @ V.T
    Q = 0.5 * (Q + Q.T)
    fh = V.T @ f
    tail = float(np.sum(fh[1:] ** 2 / (lam[1:] - lam[0]) ** 2))
    r = 1.25 * math.sqrt(tail)
    prob = ProblemInstance(SymMatrix.from_dense(Q), f, r)
    cert = HardCertificate(v1=v1.copy(), lambda1=float(lam[0]), tail_sum=tail, r=r, lambdas=lam.copy())
    return prob, cert


def generate(spec: GenSpec):
    """Instance for either case; the hard certificate is dropped."""
    if spec.case is GenCase.HARD:
        return gen_hard(spec)[0]
    return gen_general(spec)


# ---------------------------------------------------------------- file I/O


def bundle_paths(path):
    """``(matrix_path, rhs_path)`` for a bundle stem or either of its files."""
    p = Path(path)
    if p.suffix in (".mtx", ".rhs"):
        p = p.with_suffix("")
    return p.with_name(p.name + ".mtx"), p.with_name(p.name + ".rhs")


def _num(tok, path, line, col, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise ParseError(f"invalid number {tok!r}", path, line, col) from None


def _tokens(text):
    """Yield ``(token, column)`` pairs with 1-based columns."""
    col = 0
    for tok in text.split():
        col = text.index(tok, col)
        yield tok, col + 1
        col += len(tok)


def read_matrix_market(path):
    """Read a real symmetric Matrix Market file (coordinate or array).

    Returns ``(Q, meta)`` where ``meta`` collects ``% key: value`` comment lines.
    """
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", path, 1, 1)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise ParseError("missing %%MatrixMarket matrix header", path, 1, 1)
    fmt, field, sym = (h.lower() for h in head[2:])
    if fmt not in ("coordinate", "array"):
        raise ParseError(f"unsupported format {fmt!r}", path, 1, 1)
    if field not in ("real", "integer", "double"):
        raise ParseError(f"unsupported field {field!r}", path, 1, 1)
    if sym != "symmetric":
        raise ParseError(f"matrix must be symmetric, header says {sym!r}", path, 1, 1)
    meta = {}
    body = []
    for i, raw in enumerate(lines[1:], start=2):
        s = raw.strip()
        if not s:
            continue
        if s.startswith("%"):
            key, sep, val = s.lstrip("%").partition(":")
            if sep:
                meta[key.strip()] = val.strip()
            continue
        body.append((i, raw))
    if not body:
        raise ParseError("missing size line", path, len(lines), 1)
    ln, raw = body[0]
    size = [_num(t, path, ln, c, int) for t, c in _tokens(raw)]
    if fmt == "coordinate":
        if len(size) != 3:
            raise ParseError("size line needs 'rows cols nnz'", path, ln, 1)
        m, n, nnz = size
    else:
        if len(size) != 2:
            raise ParseError("size line needs 'rows cols'", path, ln, 1)
        m, n = size
        nnz = n * (n + 1) // 2
    if m != n or n < 1:
        raise ParseError(f"symmetric matrix must be square, got {m}x{n}", path, ln, 1)
    entries = body[1:]
    if len(entries) != nnz:
        where = entries[nnz][0] if len(entries) > nnz else len(lines)
        raise ParseError(f"expected {nnz} entries, found {len(entries)}", path, where, 1)
    if fmt == "array":
        # Column-major lower triangle.
        vals = np.empty(nnz)
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        idx = 0
        for j in range(n):
            for i in range(j, n):
                ln, raw = entries[idx]
                toks = list(_tokens(raw))
                if len(toks) != 1:
                    raise ParseError("array entries hold one value per line", path, ln, 1)
                vals[idx] = _num(toks[0][0], path, ln, toks[0][1])
                rows[idx], cols[idx] = i, j
                idx += 1
    else:
        rows = np.empty(nnz, dtype=np.int64)
        cols = np.empty(nnz, dtype=np.int64)
        vals = np.empty(nnz)
        for idx, (ln, raw) in enumerate(entries):
            toks = list(_tokens(raw))
            if len(toks) != 3:
                raise ParseError("coordinate entries need 'row col value'", path, ln, 1)
            i = _num(toks[0][0], path, ln, toks[0][1], int)
            j = _num(toks[1][0], path, ln, toks[1][1], int)
            if not (1 <= i <= n):
                raise ParseError(f"row index {i} out of range", path, ln, toks[0][1])
            if not (1 <= j <= n):
                raise ParseError(f"column index {j} out of range", path, ln, toks[1][1])
            if j > i:
                raise ParseError("symmetric storage needs entries on or below the diagonal", path, ln, toks[0][1])
            rows[idx], cols[idx] = i - 1, j - 1
            vals[idx] = _num(toks[2][0], path, ln, toks[2][1])
    if not np.all(np.isfinite(vals)):
        raise ParseError("matrix entries must be finite", path, entries[0][0], 1)
    return SymMatrix.from_lower(n, rows, cols, vals), meta


def write_matrix_market(Q: SymMatrix, path, meta=None):
    rows, cols, vals = Q.lower_triplets()
    out = ["%%MatrixMarket matrix coordinate real symmetric"]
    for k, v in (meta or {}).items():
        out.append(f"% {k}: {v}")
    out.append(f"{Q.n} {Q.n} {len(vals)}")
    out.extend(f"{i + 1} {j + 1} {float(v)!r}" for i, j, v in zip(rows, cols, vals))
    Path(path).write_text("\n".join(out) + "\n", encoding="utf-8")


def read_rhs(path, n=None):
    path = str(path)
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    toks = []
    for ln, raw in enumerate(lines, start=1):
        if raw.strip().startswith("#"):
            continue
        toks.extend((t, ln, c) for t, c in _tokens(raw))
    if not toks:
        raise ParseError("missing radius", path, 1, 1)
    t, ln, c = toks[0]
    r = _num(t, path, ln, c)
    if not (math.isfinite(r) and r > 0):
        raise ValidationError(f"{path}:{ln}:{c}: radius must be positive, got {t}")
    f = np.array([_num(t, path, ln, c) for t, ln, c in toks[1:]])
    if n is not None and f.size != n:
        last = toks[-1]
        raise ParseError(f"expected {n} entries of f, found {f.size}", path, last[1], last[2])
    return r, f


def read_instance(path):
    """Load a bundle; ``path`` may name the stem, the ``.mtx`` or the ``.rhs`` file."""
    mpath, rpath = bundle_paths(path)
    Q, meta = read_matrix_market(mpath)
    r, f = read_rhs(rpath, Q.n)
    return ProblemInstance(Q, f, r)


def read_instance_meta(path):
    return read_matrix_market(bundle_paths(path)[0])[1]


def write_instance(prob: ProblemInstance, path, meta=None):
    """Write ``<stem>.mtx`` and ``<stem>.rhs``; returns both paths."""
    mpath, rpath = bundle_paths(path)
    mpath.parent.mkdir(parents=True, exist_ok=True)
    write_matrix_market(prob.Q, mpath, meta)
    body = [repr(float(prob.r))] + [repr(float(v)) for v in prob.f]
    rpath.write_text("\n".join(body) + "\n", encoding="utf-8")
    return mpath, rpath


def solution_dict(sol):
    """Plain-JSON view of a :class:`~sphereqp.solver.Solution`."""
    pert = None
    if sol.perturbation is not None:
        pert = {"alpha": sol.perturbation.alpha, "direction": [float(v) for v in sol.perturbation.direction]}
    k = sol.kkt
    return {
        "case": sol.case.value,
        "sigma": sol.sigma,
        "x": [float(v) for v in sol.x],
        "primal_value": sol.primal_value,
        "dual_value": sol.dual_value,
        "gap": sol.gap,
        "perturbed_primal_value": sol.perturbed_primal_value,
        "psi_final": sol.psi_final,
        "dist_boundary": sol.dist_boundary,
        "iterations_bisect": sol.iterations_bisect,
        "iterations_scan": sol.iterations_scan,
        "converged": sol.converged,
        "lambda1_est": sol.lambda1_est,
        "kkt": {
            "stationarity": k.stationarity,
            "feasibility": k.feasibility,
            "dual_feas_sigma": k.dual_feas_sigma,
            "curvature_cert": k.curvature_cert,
            "complementarity": k.complementarity,
        },
        "perturbation": pert,
    }


def format_solution(sol, fmt="json"):
    d = solution_dict(sol)
    if fmt == "json":
        return json.dumps(d, indent=2) + "\n"
    if fmt != "text":
        raise ValidationError(f"unknown format {fmt!r}")
    out = []
    for key, val in d.items():
        if key == "kkt":
            out.extend(f"kkt.{k} = {v!r}" for k, v in val.items())
        elif key == "x":
            out.append("x = " + " ".join(repr(v) for v in val))
        elif key == "perturbation":
            if val is None:
                out.append("perturbation = none")
            else:
                out.append(f"perturbation.alpha = {val['alpha']!r}")
                out.append("perturbation.direction = " + " ".join(repr(v) for v in val["direction"]))
        else:
            out.append(f"{key} = {val!r}" if not isinstance(val, str) else f"{key} = {val}")
    return "\n".join(out) + "\n"


def write_solution(sol, path, fmt="json"):
    Path(path).write_text(format_solution(sol, fmt), encoding="utf-8")


def read_solution(path):
    """Load a JSON solution document as a dict."""
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, str(path), exc.lineno, exc.colno) from None
