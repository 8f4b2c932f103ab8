"""Sparsity-enforcing thresholding operators on real vectors.

Every operator here shares one support rule: keep the ``s`` largest-magnitude
entries (ties broken in favor of the lowest index, exact float comparison) and
let ``tau`` be the largest magnitude left outside the support, i.e. the
(s+1)-st largest magnitude overall.  Inputs that are already s-sparse have
``tau == 0`` and pass through unchanged.

The operator family is parameterized by a shrinkage function ``sigma`` mapping
the normalized magnitude ``t = |z_i|/tau >= 1`` of a kept entry to the relative
shrinkage applied to it: the kept entry becomes
``sign(z_i) * (|z_i| - tau * sigma(|z_i|/tau))``.  ``sigma == 0`` is hard
thresholding, ``sigma == 1`` shrinks every kept entry by exactly ``tau``
(fixed-sparsity soft thresholding), and the reciprocal and l_q kinds
interpolate between the two.

All functions accept arrays of shape ``(..., d)`` and act along the last axis,
so batched evaluation is free.  Everything is pure: no shared mutable state,
safe to call from any number of threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional

import numpy as np


class InvalidSparsityError(ValueError):
    """Sparsity level outside ``1 <= s <= dimension``."""


class InvalidParameterError(ValueError):
    """Operator parameter outside its legal range."""


class ShrinkOutOfRangeError(ValueError):
    """A shrinkage function returned a value outside [0, 1]."""


class RootNotBracketedError(RuntimeError):
    """The l_q root equation lost its bracket; indicates a bug for t >= 1."""


def _check_sparsity(d: int, s: int) -> None:
    if not isinstance(s, (int, np.integer)) or s < 1 or s > d:
        raise InvalidSparsityError(f"sparsity s={s} not in [1, {d}]")


def support_order(z: np.ndarray) -> np.ndarray:
    """Indices sorted by decreasing magnitude, ties by increasing index."""
    # stable sort on -|z| implements the lowest-index-wins tie rule exactly
    return np.argsort(-np.abs(z), axis=-1, kind="stable")


def select_support(z, s: int):
    """Support of the ``s`` largest magnitudes of a vector, plus the level tau.

    Returns ``(indices, tau)`` where ``indices`` lists the selected coordinates
    in decreasing-magnitude order (lowest index first among ties) and ``tau``
    is the largest magnitude outside the selection (0.0 when ``s == len(z)``,
    which happens exactly when the input is already s-sparse).
    """
    z = np.asarray(z, dtype=float)
    if z.ndim != 1 or z.shape[0] < 1:
        raise InvalidSparsityError("select_support expects a 1-D vector")
    d = z.shape[0]
    _check_sparsity(d, s)
    order = support_order(z)
    tau = float(np.abs(z[order[s]])) if s < d else 0.0
    return order[:s].copy(), tau


def _apply_entrywise(z, s: int, entry_map) -> np.ndarray:
    """Shared driver: select support, map kept entries, zero the rest.

    ``entry_map(vals, tau)`` receives the kept entries (shape ``(..., s)``) and
    the per-row threshold level (shape ``(..., 1)``, guaranteed > 0 where
    used); rows with tau == 0 keep their entries untouched.
    """
    z = np.asarray(z, dtype=float)
    d = z.shape[-1]
    _check_sparsity(d, s)
    if s == d:
        return z.copy()
    order = support_order(z)
    keep = order[..., :s]
    tau = np.take_along_axis(np.abs(z), order[..., s : s + 1], axis=-1)
    vals = np.take_along_axis(z, keep, axis=-1)
    safe_tau = np.where(tau > 0.0, tau, 1.0)
    new_vals = np.where(tau > 0.0, entry_map(vals, safe_tau), vals)
    out = np.zeros_like(z)
    np.put_along_axis(out, keep, new_vals, axis=-1)
    return out


def hard_threshold(z, s: int) -> np.ndarray:
    """Keep the ``s`` largest-magnitude entries exactly, zero the rest."""
    return _apply_entrywise(z, s, lambda vals, tau: vals)


def soft_threshold_fixed_s(z, s: int) -> np.ndarray:
    """Soft-shrink all entries by the smallest level achieving s-sparsity.

    That level equals tau, the (s+1)-st largest magnitude; entries with
    ``|z_i| <= tau`` become exactly zero.  Tied boundary entries all shrink to
    zero, so the output can have fewer than ``s`` nonzeros.
    """
    return _apply_entrywise(
        z, s, lambda vals, tau: np.sign(vals) * (np.abs(vals) - tau)
    )


def reciprocal_threshold(z, s: int, c: float) -> np.ndarray:
    """Reciprocal thresholding with parameter ``c`` in [0, 1].

    A kept entry maps to ``sign(z_i) * (|z_i| + sqrt(z_i^2 - tau^2(1-c^2)))/2``,
    the larger root t of ``z_i = t + tau^2 (1-c^2) / (4 t)``.  ``c = 1`` is
    hard thresholding; ``c = 0`` is the universal reciprocal operator.
    """
    if not 0.0 <= c <= 1.0:
        raise InvalidParameterError(f"reciprocal parameter c={c} not in [0, 1]")
    a = 1.0 - c * c

    def entry_map(vals, tau):
        mag = np.abs(vals)
        # the max() guards rows the driver discards (tau == 0 placeholders);
        # on kept entries |vals| >= tau makes the radicand nonnegative
        rad = np.maximum(vals * vals - tau * tau * a, 0.0)
        return np.sign(vals) * (0.5 * mag + 0.5 * np.sqrt(rad))

    return _apply_entrywise(z, s, entry_map)


def _lq_shrink_coefficient(q: float) -> float:
    return q * (2.0 - 2.0 * q) ** (1.0 - q) / (2.0 - q) ** (2.0 - q)


def lq_larger_root(t, q: float) -> np.ndarray:
    """Larger root x of ``t = x + K x^(q-1)`` with K the l_q coefficient.

    Safeguarded bisection on ``[t (1 - sigma_max), t]`` with
    ``sigma_max = q/(2-q)``; the left end is at or below the root and the
    right end above it for every t >= 1, so the bracket cannot fail unless
    the inputs are invalid.  Absolute tolerance 1e-12 on the root.
    """
    if not 0.0 < q < 1.0:
        raise InvalidParameterError(f"lq parameter q={q} not in (0, 1)")
    t = np.asarray(t, dtype=float)
    K = _lq_shrink_coefficient(q)
    sigma_max = q / (2.0 - q)
    lo = t * (1.0 - sigma_max)
    hi = t.copy()

    def g(x):
        return x + K * x ** (q - 1.0) - t

    if np.any(g(lo) > 1e-8) or np.any(g(hi) < -1e-8):
        raise RootNotBracketedError("l_q root bracket failed for some t")
    # fixed iteration count: reaches width < 1e-12 for any t up to ~6e17 and
    # keeps batched and single-vector evaluations bitwise identical
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        below = g(mid) <= 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    return 0.5 * (lo + hi)


def lq_threshold(z, s: int, q: float) -> np.ndarray:
    """l_q thresholding via its shrinkage-function characterization.

    Each kept entry with normalized magnitude ``t = |z_i|/tau`` maps to
    ``tau * x`` where x is the larger root of the l_q root equation, with the
    sign restored.  ``sigma(1) = q/(2-q)``.
    """
    if not 0.0 < q < 1.0:
        raise InvalidParameterError(f"lq parameter q={q} not in (0, 1)")

    def entry_map(vals, tau):
        with np.errstate(over="ignore"):
            t = np.maximum(np.abs(vals) / tau, 1.0)
        # beyond the cap the shrinkage tau * sigma(t) is below one ulp of vals
        extreme = t > 1e15
        t_safe = np.where(extreme, 1.0, t)
        shrunk = np.sign(vals) * (tau * lq_larger_root(t_safe, q))
        return np.where(extreme, vals, shrunk)

    return _apply_entrywise(z, s, entry_map)


def prox_l1(z, t: float) -> np.ndarray:
    """Soft shrinkage at a fixed level ``t >= 0`` (prox of t * l1-norm)."""
    if t < 0:
        raise InvalidParameterError(f"prox level t={t} must be nonnegative")
    z = np.asarray(z, dtype=float)
    return np.sign(z) * np.maximum(np.abs(z) - t, 0.0)


# ---------------------------------------------------------------------------
# shrinkage functions and the operator wrapper


@dataclass(frozen=True)
class ShrinkageFunction:
    """Relative shrinkage rule sigma: [1, inf) -> [0, 1], nonincreasing.

    ``kind`` is one of hard | soft | reciprocal | lq | custom; ``param`` holds
    c (reciprocal) or q (lq).  ``sigma`` evaluates on arrays of normalized
    magnitudes t >= 1.
    """

    kind: str
    param: Optional[float]
    sigma: Callable[[np.ndarray], np.ndarray]

    @classmethod
    def hard(cls) -> "ShrinkageFunction":
        return cls("hard", None, lambda t: np.zeros_like(np.asarray(t, dtype=float)))

    @classmethod
    def soft(cls) -> "ShrinkageFunction":
        return cls("soft", None, lambda t: np.ones_like(np.asarray(t, dtype=float)))

    @classmethod
    def reciprocal(cls, c: float) -> "ShrinkageFunction":
        if not 0.0 <= c <= 1.0:
            raise InvalidParameterError(f"reciprocal parameter c={c} not in [0, 1]")
        a = 1.0 - c * c

        def sigma(t):
            t = np.asarray(t, dtype=float)
            # cancellation-free form of (t - sqrt(t^2 - a)) / 2
            return a / (2.0 * (t + np.sqrt(t * t - a)))

        return cls("reciprocal", c, sigma)

    @classmethod
    def lq(cls, q: float) -> "ShrinkageFunction":
        if not 0.0 < q < 1.0:
            raise InvalidParameterError(f"lq parameter q={q} not in (0, 1)")
        return cls("lq", q, lambda t: np.asarray(t, dtype=float) - lq_larger_root(t, q))

    @classmethod
    def from_table(cls, t_grid, sigma_values) -> "ShrinkageFunction":
        """Monotone piecewise-linear sigma; clamps beyond the table ends."""
        t_grid = np.asarray(t_grid, dtype=float)
        sig = np.asarray(sigma_values, dtype=float)
        if t_grid.ndim != 1 or t_grid.shape != sig.shape or t_grid.size < 2:
            raise InvalidParameterError("table needs matching 1-D grids, len >= 2")
        if t_grid[0] < 1.0 or np.any(np.diff(t_grid) <= 0):
            raise InvalidParameterError("table grid must be increasing and start >= 1")
        if np.any(sig < 0.0) or np.any(sig > 1.0):
            raise InvalidParameterError("table sigma values must lie in [0, 1]")
        if np.any(np.diff(sig) > 0.0):
            raise InvalidParameterError("table sigma values must be nonincreasing")
        return cls("custom", None, lambda t: np.interp(t, t_grid, sig))

    @classmethod
    def from_callable(cls, fn: Callable[[np.ndarray], np.ndarray]) -> "ShrinkageFunction":
        return cls("custom", None, fn)

    def sigma1(self) -> float:
        """sigma(1), the maximum relative shrinkage."""
        return float(self.sigma(np.asarray([1.0]))[0])


@dataclass(frozen=True)
class ThresholdingOperator:
    """An s-sparse thresholding operator: support rule plus shrinkage rule.

    Output always has at most ``s`` nonzeros, commutes with coordinatewise
    sign flips, and leaves already-s-sparse inputs untouched.
    """

    s: int
    shrink: ShrinkageFunction
    tie_break: str = "lowest-index"

    def __post_init__(self):
        if self.s < 1:
            raise InvalidSparsityError(f"sparsity s={self.s} must be >= 1")
        if self.tie_break != "lowest-index":
            raise InvalidParameterError(f"unknown tie_break {self.tie_break!r}")

    def __call__(self, z) -> np.ndarray:
        kind = self.shrink.kind
        if kind == "hard":
            return hard_threshold(z, self.s)
        if kind == "soft":
            return soft_threshold_fixed_s(z, self.s)
        if kind == "reciprocal":
            return reciprocal_threshold(z, self.s, self.shrink.param)
        if kind == "lq":
            return lq_threshold(z, self.s, self.shrink.param)
        return custom_shrink_threshold(z, self)

    def with_sparsity(self, s: int) -> "ThresholdingOperator":
        return replace(self, s=s)

    @property
    def name(self) -> str:
        kind = self.shrink.kind
        if kind == "reciprocal":
            return f"rt:{self.shrink.param:g}"
        if kind == "lq":
            return f"lq:{self.shrink.param:g}"
        return kind


def custom_shrink_threshold(z, op: ThresholdingOperator) -> np.ndarray:
    """Generic driver applying ``op.shrink.sigma`` on the selected support.

    Raises ShrinkOutOfRangeError if sigma strays outside [0, 1] on any
    evaluated point.  With sigma == 0 this reproduces hard thresholding
    exactly; with sigma == 1 it shrinks every kept entry by exactly tau.
    """
    sigma = op.shrink.sigma

    def entry_map(vals, tau):
        with np.errstate(over="ignore"):
            t = np.minimum(np.maximum(np.abs(vals) / tau, 1.0), 1e15)
        sig = np.asarray(sigma(t), dtype=float)
        if np.any(sig < -1e-12) or np.any(sig > 1.0 + 1e-12):
            raise ShrinkOutOfRangeError("sigma returned a value outside [0, 1]")
        return np.sign(vals) * (np.abs(vals) - tau * sig)

    return _apply_entrywise(z, op.s, entry_map)


def hard_operator(s: int) -> ThresholdingOperator:
    return ThresholdingOperator(s, ShrinkageFunction.hard())


def soft_operator(s: int) -> ThresholdingOperator:
    return ThresholdingOperator(s, ShrinkageFunction.soft())


def reciprocal_operator(s: int, c: float = 0.0) -> ThresholdingOperator:
    return ThresholdingOperator(s, ShrinkageFunction.reciprocal(c))


def lq_operator(s: int, q: float) -> ThresholdingOperator:
    return ThresholdingOperator(s, ShrinkageFunction.lq(q))


def custom_operator(s: int, shrink: ShrinkageFunction) -> ThresholdingOperator:
    return ThresholdingOperator(s, shrink)


def parse_operator(spec: str, s: int) -> ThresholdingOperator:
    """Build an operator from a CLI-style spec: hard | soft | rt[:c] | lq[:q]."""
    name, _, arg = spec.partition(":")
    name = name.strip().lower()
    if name == "hard":
        return hard_operator(s)
    if name == "soft":
        return soft_operator(s)
    if name == "rt":
        return reciprocal_operator(s, float(arg) if arg else 0.0)
    if name == "lq":
        return lq_operator(s, float(arg) if arg else 2.0 / 3.0)
    raise InvalidParameterError(f"unknown operator spec {spec!r}")
