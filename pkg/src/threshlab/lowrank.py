"""Lifting vector thresholding operators to rank constraints via the SVD.

A vector operator satisfying the sign condition (commuting with coordinate
sign flips) lifts to matrices as X -> U diag(Psi(d)) V' from the SVD
X = U diag(d) V'.  The lifted operator inherits the vector operator's
relative concavity exactly, and the solver guarantees carry over with
Frobenius geometry in place of the Euclidean one.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .concavity import (
    ConcavityQuery,
    ConcavityReport,
    closed_form_gamma,
    empirical_concavity,
)
from .operators import InvalidParameterError, ThresholdingOperator
from .solver import IterateTrace, QuadraticObjective, StepRule

RANK_EPS = 1e-10  # singular values below RANK_EPS * s_max count as zero


@dataclass(frozen=True)
class LiftedOperator:
    """Rank-s thresholding operator obtained by lifting a vector operator."""

    base: ThresholdingOperator

    def __call__(self, Z: np.ndarray) -> np.ndarray:
        Z = np.asarray(Z, dtype=float)
        U, sv, Vt = np.linalg.svd(Z, full_matrices=False)
        return (U * self.base(sv)) @ Vt

    @property
    def s(self) -> int:
        return self.base.s


def lift_apply(base: ThresholdingOperator, Z) -> np.ndarray:
    """Apply the lifted operator of ``base`` to a matrix."""
    return LiftedOperator(base)(Z)


def numerical_rank(X: np.ndarray) -> int:
    sv = np.linalg.svd(np.asarray(X, dtype=float), compute_uv=False)
    if sv.size == 0 or sv[0] == 0.0:
        return 0
    return int(np.sum(sv > RANK_EPS * sv[0]))


@dataclass(frozen=True)
class MatrixConcavityQuery:
    """Matrix shape and rank pair for a matrix concavity search."""

    n: int
    m: int
    s: int
    s_prime: int

    def __post_init__(self):
        p = min(self.n, self.m)
        if not (1 <= self.s_prime <= self.s and self.s + self.s_prime <= p):
            raise InvalidParameterError(
                f"need 1 <= s' <= s and s + s' <= min(n, m) = {p}"
            )

    @property
    def rho(self) -> float:
        return self.s_prime / self.s


def matrix_concavity_ratio(Y, Z, lifted: LiftedOperator) -> float:
    """Frobenius alignment ratio <Y - X, Z - X> / ||Y - X||_F^2, X = lifted(Z)."""
    from .concavity import DegenerateWitnessError

    Y = np.asarray(Y, dtype=float)
    Z = np.asarray(Z, dtype=float)
    X = lifted(Z)
    diff = Y - X
    den = float(np.sum(diff * diff))
    if den == 0.0:
        raise DegenerateWitnessError("Y equals lifted(Z); ratio undefined")
    return float(np.sum(diff * (Z - X))) / den


def embed_diag(vec: np.ndarray, n: int, m: int) -> np.ndarray:
    out = np.zeros((n, m))
    p = min(n, m, vec.shape[0])
    out[np.arange(p), np.arange(p)] = vec[:p]
    return out


def _ratio_batch_matrix(Y: np.ndarray, Z: np.ndarray, lifted: LiftedOperator) -> np.ndarray:
    U, sv, Vt = np.linalg.svd(Z, full_matrices=False)
    X = np.einsum("bij,bj,bjk->bik", U, lifted.base(sv), Vt)
    diff = Y - X
    den = np.einsum("bij,bij->b", diff, diff)
    num = np.einsum("bij,bij->b", diff, Z - X)
    with np.errstate(divide="ignore", invalid="ignore"):
        r = num / den
    return np.where(den > 0.0, r, -np.inf)


def empirical_matrix_concavity(
    lifted: LiftedOperator,
    query: MatrixConcavityQuery,
    budget: int = 200,
    seed: int = 0,
) -> ConcavityReport:
    """Empirical maximization of the matrix concavity ratio.

    Seeds the search with diagonal embeddings of the vector witnesses (which
    attain the vector supremum; by the lifting equality the matrix supremum
    is the same), the stacked-identity witness family, and random rank-s'
    factor pairs refined by batched coordinate ascent.
    """
    n, m, s, sp = query.n, query.m, query.s, query.s_prime
    if lifted.base.s != s:
        raise InvalidParameterError("operator rank must match the query")
    rng = np.random.default_rng(seed)
    p = min(n, m)

    candidates = []

    def add(Y, Z):
        X = lifted(Z)
        diff = Y - X
        den = float(np.sum(diff * diff))
        if den > 0.0:
            r = float(np.sum(diff * (Z - X))) / den
            candidates.append((r, Y, Z))

    # diagonal embeddings of the vector search (vector witnesses transfer
    # exactly: svd of a padded identity-like diagonal is the identity)
    vec_query = ConcavityQuery(s, sp, d=p)
    vec_report = empirical_concavity(lifted.base, vec_query, budget=budget, seed=seed)
    add(embed_diag(vec_report.witness_y, n, m), embed_diag(vec_report.witness_z, n, m))

    # stacked-identity family: Z = [I; 0], Y = t * (V_perp V_perp' padded)
    Z_id = embed_diag(np.ones(p), n, m)
    X_id = lifted(Z_id)
    base_dirs = np.zeros((n, m))
    sel = np.arange(s, s + sp)
    base_dirs[sel, sel] = 1.0
    for t in np.logspace(-8, 4, 200):
        add(t * base_dirs, Z_id)

    if budget > 0:
        nb = min(budget, 200)
        A = rng.standard_normal((nb, n, sp))
        B = rng.standard_normal((nb, m, sp))
        Z = rng.standard_normal((nb, n, m))
        Y = np.einsum("bik,bjk->bij", A, B)
        best = _ratio_batch_matrix(Y, Z, lifted)
        step = 0.5
        for k in range(200):
            step_k = step * 0.9 ** (k // 8)
            for sign in (1.0, -1.0):
                which = k % 3
                if which == 0:
                    A_t = A + sign * step_k * rng.standard_normal(A.shape) / np.sqrt(n)
                    Y_t = np.einsum("bik,bjk->bij", A_t, B)
                    Z_t = Z
                elif which == 1:
                    B_t = B + sign * step_k * rng.standard_normal(B.shape) / np.sqrt(m)
                    Y_t = np.einsum("bik,bjk->bij", A, B_t)
                    Z_t = Z
                else:
                    Z_t = Z + sign * step_k * rng.standard_normal(Z.shape) / np.sqrt(n * m)
                    Y_t = np.einsum("bik,bjk->bij", A, B)
                trial = _ratio_batch_matrix(Y_t, Z_t, lifted)
                improve = trial > best
                if which == 0:
                    A[improve] = A_t[improve]
                elif which == 1:
                    B[improve] = B_t[improve]
                else:
                    Z[improve] = Z_t[improve]
                best = np.where(improve, trial, best)
        kb = int(np.argmax(best))
        if np.isfinite(best[kb]):
            add(np.einsum("ik,jk->ij", A[kb], B[kb]), Z[kb])

    ratios = np.asarray([c[0] for c in candidates])
    k = int(np.argmax(ratios))
    best_ratio, wy, wz = candidates[k]
    return ConcavityReport(
        closed_form=closed_form_gamma(lifted.base, query.rho),
        empirical_max=float(best_ratio),
        witness_y=wy,
        witness_z=wz,
        ratio_at_witness=matrix_concavity_ratio(wy, wz, lifted),
    )


@dataclass
class MatrixObjective:
    """Certified quadratic over matrices, backed by a vectorized objective."""

    vec_objective: QuadraticObjective
    shape: tuple

    @property
    def alpha(self) -> float:
        return self.vec_objective.alpha

    @property
    def beta(self) -> float:
        return self.vec_objective.beta

    def value(self, X) -> float:
        return self.vec_objective.value(np.asarray(X, dtype=float).ravel())

    def grad(self, X) -> np.ndarray:
        return self.vec_objective.grad(
            np.asarray(X, dtype=float).ravel()
        ).reshape(self.shape)

    @classmethod
    def random_certified(
        cls, n: int, m: int, alpha: float, beta: float, rng: np.random.Generator
    ) -> "MatrixObjective":
        vec = QuadraticObjective.random_instance(n * m, alpha, beta, rng)
        return cls(vec, (n, m))


def iterate_threshold_matrix(
    obj: MatrixObjective,
    lifted: LiftedOperator,
    X0,
    rule: Optional[StepRule] = None,
    T: int = 100,
) -> IterateTrace:
    """Matrix analogue of iterate_threshold with Frobenius geometry."""
    rule = rule or StepRule.fixed()
    X = np.asarray(X0, dtype=float).copy()
    if numerical_rank(X) > lifted.s:
        raise InvalidParameterError("X0 must have rank <= s")
    if T < 1:
        raise InvalidParameterError("T must be >= 1")
    floor = 1.0 / obj.beta
    xs = np.empty((T,) + X.shape)
    etas = np.empty(T)
    fs = np.empty(T)
    f0 = obj.value(X)
    for t in range(T):
        G = obj.grad(X)
        fX = obj.value(X)
        if rule.kind == "fixed":
            X, eta = lifted(X - floor * G), floor
        else:
            eta = rule.eta_init if rule.eta_init is not None else 16.0 / obj.beta
            accepted = False
            while eta > floor:
                cand = lifted(X - eta * G)
                step = cand - X
                bound = fX + float(np.sum(G * step)) + float(np.sum(step * step)) / (
                    2.0 * eta
                )
                if obj.value(cand) <= bound:
                    X, accepted = cand, True
                    break
                eta = max(eta * rule.shrink, floor)
            if not accepted:
                X, eta = lifted(X - floor * G), floor
        xs[t] = X
        etas[t] = eta
        fs[t] = obj.value(X)
    return IterateTrace(np.asarray(X0, dtype=float).copy(), f0, xs, etas, fs, obj)


def build_matrix_trap(
    op: ThresholdingOperator,
    query: ConcavityQuery,
    alpha: float,
    beta: float,
    budget: int = 400,
    seed: int = 0,
):
    """Diagonal embedding of the vector stationary trap (square p x p case)."""
    from .adversarial import build_trap, complete_orthobasis

    trap = build_trap(op, query, alpha, beta, budget=budget, seed=seed)
    p = trap.x0.shape[0]
    X0 = embed_diag(trap.x0, p, p)
    Y = embed_diag(trap.y, p, p)
    Z = embed_diag(trap.z, p, p)
    u1 = (Y - X0).ravel()
    U = complete_orthobasis(u1 / np.linalg.norm(u1))
    eigs = np.full(p * p, beta)
    eigs[0] = alpha
    H = (U * eigs) @ U.T
    H = 0.5 * (H + H.T)
    vec = QuadraticObjective(
        H, m=X0.ravel(), g=(-beta * (Z - X0)).ravel(), alpha=alpha, beta=beta
    )
    return MatrixObjective(vec, (p, p)), X0, Y, Z, trap.gamma_hat
