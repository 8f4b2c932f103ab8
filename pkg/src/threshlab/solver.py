"""Iterative thresholding and proximal gradient over certified quadratics.

The objective family is restricted to quadratics with machine-checkable
spectrum bounds: f(x) = (x-m)' H (x-m) / 2 + g' (x-m) with certified
alpha <= eig(H) <= beta.  Full-spectrum bounds imply restricted strong
convexity and smoothness at every sparsity level, which is what the
convergence guarantee consumes.

Step sizes: fixed eta = 1/beta, or backtracking from a large initial step,
halving until the curvature condition

    f(x~) <= f(x) + <x~ - x, grad f(x)> + ||x~ - x||^2 / (2 eta)

holds, with floor 1/beta where the condition is guaranteed.  The accepted
step therefore never falls below 1/beta.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .operators import InvalidParameterError, ThresholdingOperator, prox_l1


class ContractViolationError(ValueError):
    """A guarantee was requested outside its hypothesis (gamma >= 1/(2 kappa))."""


class SpectrumCertificationError(ValueError):
    """Declared spectral bounds fail against the actual eigenvalues."""


_CERT_TOL = 1e-9


@dataclass
class QuadraticObjective:
    """f(x) = (x-m)' H (x-m)/2 + g'(x-m), with certified spectrum [alpha, beta].

    Construction verifies the declared bounds by eigendecomposition (to a
    1e-9 scale tolerance) unless ``validate=False``; the caller then owns an
    equivalent certification, e.g. singular values of a design matrix.
    """

    H: np.ndarray
    m: np.ndarray
    g: np.ndarray
    alpha: float
    beta: float
    validate: bool = True

    def __post_init__(self):
        self.H = np.asarray(self.H, dtype=float)
        self.m = np.asarray(self.m, dtype=float)
        self.g = np.asarray(self.g, dtype=float)
        d = self.H.shape[0]
        if self.H.shape != (d, d) or self.m.shape != (d,) or self.g.shape != (d,):
            raise InvalidParameterError("H must be d x d with matching m, g")
        if not self.alpha <= self.beta:
            raise InvalidParameterError("need alpha <= beta")
        if self.validate:
            scale = max(1.0, abs(self.beta))
            if not np.allclose(self.H, self.H.T, atol=_CERT_TOL * scale):
                raise SpectrumCertificationError("H is not symmetric")
            eigs = np.linalg.eigvalsh(self.H)
            if eigs[0] < self.alpha - _CERT_TOL * scale:
                raise SpectrumCertificationError(
                    f"smallest eigenvalue {eigs[0]} below alpha={self.alpha}"
                )
            if eigs[-1] > self.beta + _CERT_TOL * scale:
                raise SpectrumCertificationError(
                    f"largest eigenvalue {eigs[-1]} above beta={self.beta}"
                )

    @property
    def dim(self) -> int:
        return self.H.shape[0]

    @property
    def kappa(self) -> float:
        return self.beta / self.alpha

    def value(self, x) -> float:
        dx = np.asarray(x, dtype=float) - self.m
        return float(0.5 * dx @ (self.H @ dx) + self.g @ dx)

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != self.m.shape:
            raise InvalidParameterError("dimension mismatch in gradient")
        return self.H @ (x - self.m) + self.g

    def minimizer(self) -> np.ndarray:
        """Unconstrained minimizer m - H^{-1} g (requires alpha > 0)."""
        return self.m - np.linalg.solve(self.H, self.g)

    @classmethod
    def random_instance(
        cls,
        d: int,
        alpha: float,
        beta: float,
        rng: np.random.Generator,
        center_scale: float = 1.0,
        linear_scale: float = 0.0,
    ) -> "QuadraticObjective":
        """Random certified quadratic with spectrum endpoints exactly alpha, beta."""
        U, _ = np.linalg.qr(rng.standard_normal((d, d)))
        eigs = rng.uniform(alpha, beta, size=d)
        eigs[0], eigs[-1] = alpha, beta
        H = (U * eigs) @ U.T
        H = 0.5 * (H + H.T)
        m = center_scale * rng.standard_normal(d)
        g = linear_scale * rng.standard_normal(d)
        return cls(H, m, g, alpha, beta)


@dataclass(frozen=True)
class StepRule:
    """Fixed step eta = 1/beta, or backtracking with floor 1/beta.

    Adaptive defaults: eta_init = 16/beta (a power-of-two ladder reaching the
    floor in four halvings), shrink factor 0.5.
    """

    kind: str = "fixed"
    eta_init: Optional[float] = None
    shrink: float = 0.5

    def __post_init__(self):
        if self.kind not in ("fixed", "adaptive"):
            raise InvalidParameterError(f"unknown step rule {self.kind!r}")
        if not 0.0 < self.shrink < 1.0:
            raise InvalidParameterError("shrink factor must be in (0, 1)")

    @classmethod
    def fixed(cls) -> "StepRule":
        return cls("fixed")

    @classmethod
    def adaptive(cls, eta_init: Optional[float] = None, shrink: float = 0.5) -> "StepRule":
        return cls("adaptive", eta_init, shrink)


@dataclass
class IterateTrace:
    """Per-iteration record of a solver run (t = 1..T, plus the start point).

    ``running_min`` is min_{u<=t} f(x_u) over recorded iterates, nonincreasing
    by construction; ``best_x`` is the iterate attaining the final minimum.
    """

    x0: np.ndarray
    f0: float
    xs: np.ndarray
    etas: np.ndarray
    fs: np.ndarray
    objective: object = field(repr=False)

    @property
    def running_min(self) -> np.ndarray:
        return np.minimum.accumulate(self.fs)

    @property
    def best_index(self) -> int:
        return int(np.argmin(self.fs))

    @property
    def best_x(self) -> np.ndarray:
        return self.xs[self.best_index]


def _backtrack(obj, x_prev, fx, gx, apply_step, rule):
    """Shared backtracking: returns (x_next, eta) honoring the 1/beta floor."""
    floor = 1.0 / obj.beta
    if rule.kind == "fixed":
        return apply_step(floor), floor
    eta = rule.eta_init if rule.eta_init is not None else 16.0 / obj.beta
    while eta > floor:
        cand = apply_step(eta)
        step = cand - x_prev
        bound = fx + float(gx @ step) + float(step @ step) / (2.0 * eta)
        if obj.value(cand) <= bound:
            return cand, eta
        eta = max(eta * rule.shrink, floor)
    # at the floor the curvature condition holds by restricted smoothness
    return apply_step(floor), floor


def line_search_step(obj: QuadraticObjective, x_prev, op: ThresholdingOperator, rule: StepRule):
    """One thresholded gradient step; adaptive rule backtracks to the floor."""
    x_prev = np.asarray(x_prev, dtype=float)
    gx = obj.grad(x_prev)
    if rule.kind == "fixed":
        eta = 1.0 / obj.beta
        return op(x_prev - eta * gx), eta
    fx = obj.value(x_prev)
    return _backtrack(obj, x_prev, fx, gx, lambda eta: op(x_prev - eta * gx), rule)


def iterate_threshold(
    obj: QuadraticObjective,
    op: ThresholdingOperator,
    x0,
    rule: Optional[StepRule] = None,
    T: int = 100,
) -> IterateTrace:
    """Run x_t = Psi_s(x_{t-1} - eta_t grad f(x_{t-1})) for T steps."""
    rule = rule or StepRule.fixed()
    x = np.asarray(x0, dtype=float).copy()
    if np.count_nonzero(x) > op.s:
        raise InvalidParameterError("x0 must be s-sparse")
    if T < 1:
        raise InvalidParameterError("T must be >= 1")
    xs = np.empty((T, obj.dim))
    etas = np.empty(T)
    fs = np.empty(T)
    f0 = obj.value(x)
    for t in range(T):
        x, eta = line_search_step(obj, x, op, rule)
        xs[t] = x
        etas[t] = eta
        fs[t] = obj.value(x)
    return IterateTrace(np.asarray(x0, dtype=float).copy(), f0, xs, etas, fs, obj)


def iterate_prox(
    obj: QuadraticObjective,
    lam: float,
    x0,
    rule: Optional[StepRule] = None,
    T: int = 100,
    kkt_tol: Optional[float] = None,
) -> IterateTrace:
    """Proximal gradient on f + lam * l1: x_t = prox(x - eta grad f, lam eta).

    With ``kkt_tol`` set, stops early once the l1 subgradient optimality
    residual falls below it.
    """
    if lam < 0:
        raise InvalidParameterError("lam must be nonnegative")
    rule = rule or StepRule.fixed()
    x = np.asarray(x0, dtype=float).copy()
    if T < 1:
        raise InvalidParameterError("T must be >= 1")
    xs, etas, fs = [], [], []
    f0 = obj.value(x)
    for _ in range(T):
        gx = obj.grad(x)
        fx = obj.value(x)
        x, eta = _backtrack(
            obj, x, fx, gx, lambda e: prox_l1(x - e * gx, lam * e), rule
        )
        xs.append(x)
        etas.append(eta)
        fs.append(obj.value(x))
        if kkt_tol is not None and kkt_residual_l1(obj, x, lam) <= kkt_tol:
            break
    return IterateTrace(
        np.asarray(x0, dtype=float).copy(),
        f0,
        np.asarray(xs),
        np.asarray(etas),
        np.asarray(fs),
        obj,
    )


def kkt_residual_l1(obj: QuadraticObjective, x, lam: float) -> float:
    """Max subgradient-optimality violation of f + lam * l1 at x."""
    x = np.asarray(x, dtype=float)
    gx = obj.grad(x)
    zero = x == 0.0
    res_zero = np.maximum(np.abs(gx[zero]) - lam, 0.0)
    res_active = np.abs(gx[~zero] + lam * np.sign(x[~zero]))
    parts = [p for p in (res_zero, res_active) if p.size]
    return float(max(np.max(p) for p in parts)) if parts else 0.0


def convergence_bound_rhs(
    t: np.ndarray, f_y: float, gamma: float, kappa: float, beta: float, dist0_sq: float
) -> np.ndarray:
    """Right side of the convergence bound at horizons t (needs gamma < 1/2)."""
    if gamma >= 0.5:
        raise ContractViolationError("bound derivation needs gamma < 1/2")
    factor = (1.0 - 1.0 / kappa) / (1.0 - 2.0 * gamma)
    return f_y + factor ** np.asarray(t, dtype=float) * (beta / 2.0) * dist0_sq


def check_theorem1_bound(
    trace: IterateTrace, y, gamma: float, kappa: float, beta: float
) -> np.ndarray:
    """Per-horizon truth of min_{t<=T} f(x_t) <= f(y) + rate^T (beta/2)||x0-y||^2.

    Applicable only under the guarantee hypothesis gamma < 1/(2 kappa);
    raises ContractViolationError otherwise.
    """
    if gamma >= 1.0 / (2.0 * kappa):
        raise ContractViolationError(
            f"gamma={gamma} >= 1/(2 kappa)={1.0 / (2.0 * kappa)}; bound inapplicable"
        )
    y = np.asarray(y, dtype=float)
    f_y = trace.objective.value(y)
    dist0_sq = float(np.sum((trace.x0 - y) ** 2))
    horizons = np.arange(1, len(trace.fs) + 1)
    rhs = convergence_bound_rhs(horizons, f_y, gamma, kappa, beta, dist0_sq)
    return trace.running_min <= rhs


def restricted_minimum_bruteforce(obj: QuadraticObjective, k: int):
    """Exact minimum of f over k-sparse vectors by support enumeration.

    Capped at dim <= 14 and k <= 4 to bound runtime; each support solves the
    restricted normal equations.  Returns (value, minimizer).
    """
    d = obj.dim
    if d > 14 or k > 4:
        raise InvalidParameterError("brute-force oracle capped at d <= 14, k <= 4")
    if not 1 <= k <= d:
        raise InvalidParameterError("k out of range")
    rhs_full = obj.H @ obj.m - obj.g
    best_val, best_x = np.inf, None
    for sub in itertools.combinations(range(d), k):
        idx = np.asarray(sub)
        H_sub = obj.H[np.ix_(idx, idx)]
        try:
            xi = np.linalg.solve(H_sub, rhs_full[idx])
        except np.linalg.LinAlgError:
            xi = np.linalg.lstsq(H_sub, rhs_full[idx], rcond=None)[0]
        x = np.zeros(d)
        x[idx] = xi
        val = obj.value(x)
        if val < best_val:
            best_val, best_x = val, x
    return best_val, best_x
