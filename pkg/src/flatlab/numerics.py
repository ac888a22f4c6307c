"""Shared numeric kernels: Gaussian quadrature, tail function, fixed points.

Conventions used throughout the package:

* Gaussian measure  Dx = e^{-x²/2}/√(2π) dx  (zero mean, unit variance).
  ``gauss_hermite`` returns nodes/weights already rescaled to this measure,
  i.e. ∫ f(x) Dx ≈ Σ_k w_k f(x_k), with Σ_k w_k = 1.
* Tail function  H(x) = ∫_x^∞ Dt = ½ erfc(x/√2).  For x > 8 the scaled
  complement erfcx is used, H(x) = ½ erfcx(x/√2) e^{-x²/2}, which stays
  accurate far into the tail instead of underflowing inside erfc.
* Saddle-point systems are iterated as damped fixed points,
  x_{t+1} = (1-γ) x_t + γ map(x_t), with sup-norm convergence test.

All functions are pure; nothing keeps module-level mutable state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np
from numpy.polynomial.hermite import hermgauss
from scipy.optimize import minimize_scalar as _scipy_minimize_scalar
from scipy.special import erfc, erfcx

__all__ = [
    "DEFAULT_QUAD_K",
    "QuadratureRule",
    "FixedPointConfig",
    "DivergenceError",
    "gauss_hermite",
    "gauss_tail",
    "log_gauss_tail",
    "fixed_point",
    "minimize_scalar",
]

#: Default number of Gauss-Hermite nodes for every quadrature in the package.
DEFAULT_QUAD_K = 61

_SQRT2 = np.sqrt(2.0)
#: Switch point between the erfc and the scaled-erfcx evaluation of H(x).
_TAIL_SWITCH = 8.0


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes and weights for ∫ f(x) Dx ≈ Σ w_k f(x_k) (unit Gaussian)."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self) -> None:
        if self.nodes.shape != self.weights.shape or self.nodes.ndim != 1:
            raise ValueError("nodes and weights must be 1-D arrays of equal length")

    def expect(self, values: np.ndarray) -> float:
        """Σ w_k values_k for values sampled on ``nodes`` (last axis)."""
        return float(np.asarray(values) @ self.weights)


@dataclass(frozen=True)
class FixedPointConfig:
    """Knobs for the damped fixed-point iteration.

    damping in (0, 1]; tol > 0 on the sup-norm of successive iterates;
    max_iters caps the loop (non-convergence is reported, not raised).
    """

    damping: float = 0.5
    tol: float = 1e-10
    max_iters: int = 100_000

    def __post_init__(self) -> None:
        if not (0.0 < self.damping <= 1.0):
            raise ValueError(f"damping must lie in (0, 1], got {self.damping}")
        if not (self.tol > 0.0):
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")


class DivergenceError(RuntimeError):
    """Raised when a fixed-point iterate turns NaN/Inf.

    Carries the last fully finite iterate in ``last_finite`` so callers can
    inspect where the iteration blew up.
    """

    def __init__(self, message: str, last_finite: np.ndarray, iters: int):
        super().__init__(message)
        self.last_finite = last_finite
        self.iters = iters


def gauss_hermite(n_nodes: int = DEFAULT_QUAD_K) -> QuadratureRule:
    """Gauss-Hermite rule rescaled to the unit Gaussian measure Dx.

    hermgauss integrates ∫ e^{-t²} f(t) dt; substituting x = √2 t maps it to
    ∫ f(x) Dx with weights divided by √π.
    """
    if n_nodes < 2:
        raise ValueError(f"need at least 2 nodes, got {n_nodes}")
    t, w = hermgauss(n_nodes)
    return QuadratureRule(nodes=t * _SQRT2, weights=w / np.sqrt(np.pi))


def gauss_tail(x):
    """H(x) = ∫_x^∞ Dt = ½ erfc(x/√2), stable deep into the right tail.

    Accepts scalars or arrays; returns the same shape (python float for
    scalar input).  For x > 8 uses H(x) = ½ erfcx(x/√2) e^{-x²/2}: erfcx is
    the exponentially scaled complement, so the only rounding left is in the
    explicit e^{-x²/2}, which keeps full relative accuracy until that factor
    itself leaves the subnormal range (x ≈ 38.6).
    """
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    hi = arr > _TAIL_SWITCH
    lo = ~hi
    if np.any(lo):
        out[lo] = 0.5 * erfc(arr[lo] / _SQRT2)
    if np.any(hi):
        out[hi] = 0.5 * erfcx(arr[hi] / _SQRT2) * np.exp(-0.5 * arr[hi] ** 2)
    if out.ndim == 0:
        return float(out)
    return out


def log_gauss_tail(x):
    """ln H(x), stable on both tails (H(x) = ∫_x^∞ Dt).

    Left tail: H(x) → 1, so ln H is computed through log1p of the *opposite*
    tail, ln(1 - H(-x)).  Right tail (x > 8): ln H = ln(½ erfcx(x/√2)) - x²/2,
    which stays finite far past the point where H itself underflows.
    """
    arr = np.asarray(x, dtype=float)
    out = np.empty_like(arr)
    hi = arr > _TAIL_SWITCH
    lo = arr < -_TAIL_SWITCH
    mid = ~(hi | lo)
    if np.any(mid):
        out[mid] = np.log(0.5 * erfc(arr[mid] / _SQRT2))
    if np.any(lo):
        out[lo] = np.log1p(-gauss_tail(-arr[lo]))
    if np.any(hi):
        out[hi] = np.log(0.5 * erfcx(arr[hi] / _SQRT2)) - 0.5 * arr[hi] ** 2
    if out.ndim == 0:
        return float(out)
    return out


def fixed_point(
    map_fn: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    config: FixedPointConfig = FixedPointConfig(),
) -> Tuple[np.ndarray, int, bool]:
    """Damped fixed-point iteration x ← (1-γ)x + γ·map(x).

    Returns (x, iterations_used, converged).  Convergence means the sup norm
    of the damped update fell to ``config.tol`` or below.  A NaN/Inf iterate
    raises :class:`DivergenceError` carrying the last finite iterate.
    """
    x = np.array(x0, dtype=float, copy=True)
    if not np.all(np.isfinite(x)):
        raise ValueError("x0 must be finite")
    gamma = config.damping
    for it in range(1, config.max_iters + 1):
        x_new = (1.0 - gamma) * x + gamma * np.asarray(map_fn(x), dtype=float)
        if not np.all(np.isfinite(x_new)):
            raise DivergenceError(
                f"fixed-point iterate became non-finite at iteration {it}",
                last_finite=x,
                iters=it,
            )
        delta = float(np.max(np.abs(x_new - x)))
        x = x_new
        if delta <= config.tol:
            return x, it, True
    return x, config.max_iters, False


def minimize_scalar(
    fn: Callable[[float], float],
    bracket: Tuple[float, float],
    tol: float = 1e-10,
) -> Tuple[float, float]:
    """Minimize a unimodal scalar function on [lo, hi].

    Thin wrapper over a bounded bracketing minimizer; returns
    (argmin, minimum value).
    """
    lo, hi = bracket
    if not (lo < hi):
        raise ValueError(f"bracket must satisfy lo < hi, got ({lo}, {hi})")
    res = _scipy_minimize_scalar(
        fn, bounds=(lo, hi), method="bounded", options={"xatol": tol}
    )
    return float(res.x), float(res.fun)
