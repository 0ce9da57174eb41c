"""Positive bases and the polyhedral augmenting functions built from them."""
import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np
from scipy.stats import qmc

from .mip import MilpProblem, solve_lp


def neg_part(v):
    """Componentwise negative part ``-min(0, v)``."""
    return -np.minimum(0.0, np.asarray(v, dtype=float)) + 0.0


# --- positive spanning ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SpanCheck:
    spans: bool
    witness: Optional[np.ndarray]

    def __bool__(self):
        return self.spans


def _as_vectors(vectors):
    N = np.atleast_2d(np.asarray(vectors, dtype=float))
    if N.ndim != 2 or N.shape[0] == 0:
        raise ValueError("expected a non-empty list of equal-length vectors")
    if np.any(~np.any(N != 0.0, axis=1)):
        raise ValueError("zero vector in set")
    return N


def is_positive_basis(vectors, tol=1e-9):
    """Decide whether ``vectors`` positively span R^m.

    They do iff no ``u != 0`` has ``n_i . u <= 0`` for every ``i``.  The LP
    ``max sum(-N u)  s.t.  N u <= 0, -1 <= u <= 1`` finds such a ``u`` with
    ``N u != 0``; a rank test covers directions orthogonal to every vector.
    On failure the witness ``u`` is returned.
    """
    try:
        N = _as_vectors(vectors)
    except ValueError:
        if len({len(v) for v in vectors}) > 1:
            raise ValueError("dimension mismatch between vectors") from None
        raise
    l, m = N.shape
    rows = [(list(enumerate(N[i])), "le", 0.0) for i in range(l)]
    lp = MilpProblem.from_rows(N.sum(axis=0), rows, -np.ones(m), np.ones(m))
    sol = solve_lp(lp)
    if sol.status != "optimal":  # pragma: no cover - bounded and feasible at u = 0
        raise RuntimeError(f"spanning LP ended with status {sol.status}")
    if -sol.objective > tol:
        return SpanCheck(False, sol.x)
    _, sv, vt = np.linalg.svd(N)
    rank = int(np.sum(sv > tol * max(1.0, sv.max(initial=0.0))))
    if rank < m:
        return SpanCheck(False, vt[-1])
    return SpanCheck(True, None)


@dataclass(frozen=True, eq=False)
class PositiveBasis:
    """Vectors ``n_1..n_l`` (rows of ``vectors``) positively spanning R^m."""

    vectors: np.ndarray
    check: SpanCheck = field(default=None, repr=False)

    @property
    def m(self):
        return self.vectors.shape[1]

    @property
    def l(self):  # noqa: E743
        return self.vectors.shape[0]

    @classmethod
    def verified(cls, vectors):
        N = _as_vectors(vectors)
        chk = is_positive_basis(N)
        if not chk.spans:
            raise ValueError(f"vectors do not positively span R^{N.shape[1]}; witness direction {chk.witness}")
        l, m = N.shape
        if not m + 1 <= l <= 2 * m:
            warnings.warn(f"positive basis of size {l} outside [m+1, 2m] = [{m + 1}, {2 * m}]")
        return cls(N, chk)


def coordinate_basis(m):
    """``{+e_i} U {-e_i}``."""
    eye = np.eye(m)
    return np.vstack([eye, -eye])


def simplex_basis(m):
    """``{+e_i} U {-sum e_i}``."""
    return np.vstack([np.eye(m), -np.ones((1, m))])


def weighted_basis(rho_lo, rho_hi):
    """Basis whose psi_one equals the asymmetric weighted penalty.

    Vectors ``rho_hi[s, i] e_k`` followed by ``-rho_lo[s, i] e_k`` with
    ``k = s * n_x + i``.
    """
    lo = np.asarray(rho_lo, dtype=float).ravel()
    hi = np.asarray(rho_hi, dtype=float).ravel()
    return np.vstack([np.diag(hi), -np.diag(lo)])


BUILTIN_BASES = {
    "coordinate": coordinate_basis,
    "simplex": simplex_basis,
}


# --- augmenting functions ------------------------------------------------------


@dataclass(frozen=True, eq=False)
class AugmentingFunction:
    """A positively homogeneous penalty on discrepancy vectors.

    ``kind`` is one of ``psi_inf`` (max_i n_i.u), ``psi_one``
    (sum_i max(n_i.u, 0)), ``hinge`` (max(n.u, 0) for one vector),
    ``psi_rho`` (weighted negative parts) or ``composed`` (sum or max of
    ``children``).
    """

    kind: str
    basis: Optional[np.ndarray] = None
    rho_lo: Optional[np.ndarray] = None
    rho_hi: Optional[np.ndarray] = None
    children: Tuple["AugmentingFunction", ...] = ()
    mode: Optional[str] = None

    @property
    def m(self):
        if self.kind in ("psi_inf", "psi_one", "hinge"):
            return self.basis.shape[1]
        if self.kind == "psi_rho":
            return self.rho_lo.size
        return self.children[0].m

    def __call__(self, u):
        return evaluate(self, u)


def psi_inf(basis):
    return AugmentingFunction("psi_inf", basis=np.atleast_2d(np.asarray(basis, dtype=float)))


def psi_one(basis):
    return AugmentingFunction("psi_one", basis=np.atleast_2d(np.asarray(basis, dtype=float)))


def hinge(vector):
    return AugmentingFunction("hinge", basis=np.atleast_2d(np.asarray(vector, dtype=float)))


def psi_rho(rho_lo, rho_hi):
    lo = np.atleast_2d(np.asarray(rho_lo, dtype=float))
    hi = np.atleast_2d(np.asarray(rho_hi, dtype=float))
    if lo.shape != hi.shape:
        raise ValueError("rho_lo and rho_hi must have the same shape")
    return AugmentingFunction("psi_rho", rho_lo=lo, rho_hi=hi)


def compose(children, mode):
    """Sum or max of augmenting functions over the same space."""
    children = tuple(children)
    if not children:
        raise ValueError("compose needs at least one child")
    if mode not in ("sum", "max"):
        raise ValueError("mode must be 'sum' or 'max'")
    ms = {ch.m for ch in children}
    if len(ms) != 1:
        raise ValueError(f"children act on different dimensions {sorted(ms)}")
    return AugmentingFunction("composed", children=children, mode=mode)


def evaluate(f, u):
    u = np.asarray(u, dtype=float).ravel()
    if u.size != f.m:
        raise ValueError(f"dimension mismatch: u has {u.size} entries, function expects {f.m}")
    kind = f.kind
    if kind == "psi_inf":
        return float(np.max(f.basis @ u))
    if kind == "psi_one":
        return math.fsum(np.maximum(f.basis @ u, 0.0))
    if kind == "hinge":
        return max(float(f.basis[0] @ u), 0.0)
    if kind == "psi_rho":
        lo = f.rho_lo.ravel()
        hi = f.rho_hi.ravel()
        # hi terms first, then lo terms: same multiset as psi_one(weighted_basis)
        return math.fsum(np.concatenate([hi * np.maximum(u, 0.0), lo * np.maximum(-u, 0.0)]))
    if kind == "composed":
        vals = [evaluate(ch, u) for ch in f.children]
        return math.fsum(vals) if f.mode == "sum" else max(vals)
    raise ValueError(f"unknown augmenting function kind {kind!r}")


# --- growth constants ---------------------------------------------------------------


@dataclass(frozen=True)
class GrowthCertificate:
    eps: float
    delta: float
    gamma: float
    n_samples: int
    min_ratio_inside: float
    min_value_outside: float


def _face_minimum(N, k, sign, eps):
    """Exact ``min max_i n_i.u`` over the face ``u_k = sign * eps`` of the eps-cube."""
    l, m = N.shape
    # columns: u (m), t
    c = np.zeros(m + 1)
    c[m] = 1.0
    rows = [(list(enumerate(N[i])) + [(m, -1.0)], "le", 0.0) for i in range(l)]
    lb = np.full(m + 1, -eps)
    ub = np.full(m + 1, eps)
    lb[k] = ub[k] = sign * eps
    lb[m], ub[m] = -np.inf, np.inf
    sol = solve_lp(MilpProblem.from_rows(c, rows, lb, ub))
    return sol.objective, sol.x[:m]


def _sphere_samples(m, eps, n_samples, seed):
    faces = 2 * m
    # Sobol balance needs a power-of-two count
    per_face = 1 << max(0, math.ceil(math.log2(max(1, n_samples // faces))))
    out = []
    if m > 1:
        sob = qmc.Sobol(d=m - 1, scramble=True, seed=seed)
        pts = sob.random(per_face) * 2 * eps - eps
    for k in range(m):
        for sign in (1.0, -1.0):
            if m == 1:
                out.append(np.array([sign * eps]))
                continue
            face = np.empty((per_face, m))
            face[:, :k] = pts[:, :k]
            face[:, k] = sign * eps
            face[:, k + 1 :] = pts[:, k:]
            out.extend(face)
    return np.array(out)


def estimate_growth_constants(f, basis, eps=1.0, n_samples=512, seed=0, tol=1e-9):
    """Estimate the constants ``delta`` and ``gamma = delta / eps`` for ``f``.

    ``delta`` is the minimum of ``psi_inf`` over the eps-sphere of the
    infinity norm: sampled with a scrambled Sobol sequence on each face and
    refined by an exact per-face LP.  Then every sample is checked:
    ``f(u) >= gamma ||u||_inf`` at scaled-down points inside the sphere and
    ``f(u) >= delta`` at scaled-up points outside.  Raises ``ValueError``
    when the vectors do not span or a sample violates either inequality.
    """
    N = basis.vectors if isinstance(basis, PositiveBasis) else _as_vectors(basis)
    chk = is_positive_basis(N)
    if not chk.spans:
        w = chk.witness
        raise ValueError(f"not a positive basis: psi_inf({w}) = {float(np.max(N @ w)):.6g} <= 0")
    m = N.shape[1]
    samples = _sphere_samples(m, eps, n_samples, seed)
    delta = float(np.min(np.max(samples @ N.T, axis=1)))
    refined = []
    for k in range(m):
        for sign in (1.0, -1.0):
            val, u = _face_minimum(N, k, sign, eps)
            refined.append(u)
            delta = min(delta, val)
    if not delta > 0:
        raise ValueError(f"non-positive delta {delta}")
    gamma = delta / eps
    pts = np.vstack([samples, np.array(refined)])
    min_ratio = np.inf
    for scale in (0.25, 0.5, 0.99):
        for u in pts * scale:
            val = evaluate(f, u)
            norm = np.max(np.abs(u))
            if val < gamma * norm - tol:
                raise ValueError(f"growth bound violated inside V at u={u}: {val} < {gamma * norm}")
            min_ratio = min(min_ratio, val / norm)
    min_out = np.inf
    for scale in (1.0, 1.5, 4.0):
        for u in pts * scale:
            val = evaluate(f, u)
            if val < delta - tol:
                raise ValueError(f"lower bound violated outside V at u={u}: {val} < {delta}")
            min_out = min(min_out, val)
    return GrowthCertificate(eps, delta, gamma, len(pts), float(min_ratio), float(min_out))
