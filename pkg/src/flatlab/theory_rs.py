"""Equilibrium order parameters of the L2-regularized margin-MSE learner.

Large-N self-consistency for minimizing Σ_μ ½(w·ξ^μ/√N + b − σ^μ)² + λ|w|²/2
on the Gaussian-mixture task.  In terms of the margin variable
m̃ = σ(w·ξ/√N + b), which at the saddle is distributed as
ω_σ(x) = √(Δq)·x + m + σb with x ~ N(0,1), the per-pattern loss is
ℓ(m̃) = ½(m̃−1)².

The effective single-pattern problem ("channel") is

    h*_σ(x) = argmin_h [ h²/2 + ℓ(ω_σ(x) + √(Δ·dq)·h) ],

whose MSE closed form is h* = −√(Δ·dq)·(ω−1)/(1+Δ·dq).  The conjugate
updates follow by Gaussian integration by parts:

    dm_hat   = α/√(Δ·dq) · E_σ ∫Dx h*
    dq_hat_q = α/dq      · E_σ ∫Dx h*²            (fluctuation conjugate)
    dq_hat   = −α/√(q·dq) · E_σ ∫Dx x·h*          (response conjugate)

and the regularized prior ("ridge") side closes the loop:

    m = dm_hat/(λ+dq_hat),  q = (dq_hat_q+dm_hat²)/(λ+dq_hat)²,
    dq = 1/(λ+dq_hat).

For MSE all three channel integrals are available in closed form; the
generic-loss path evaluates h* by bounded minimization on quadrature nodes.
A learned bias solves E_σ σ ∫Dx h*_σ = 0 by outer bisection on b ∈ [−5, 5]
(the residual is monotone and changes sign on that interval because
|(2ρ−1)(m−1)| ≤ 1 at any solution).

Post-update the margin is u* = ω + √(Δ·dq)·h* (each training pattern's
margin after the weights have reacted to it), so the training error is
α·P[u* ≤ 0]; for MSE u* = (ω−1)/(1+Δ·dq) + 1 gives

    ε_train = α E_σ H( (Δ·dq + m + σb) / √(Δq) ).

Preconditions: λ > 0, or λ = 0 with α > 1 (otherwise the minimizer is not
unique and dq runs away).
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .model import gen_error_closed_form, test_loss_mse
from .numerics import (
    DEFAULT_QUAD_K,
    FixedPointConfig,
    QuadratureRule,
    fixed_point,
    gauss_hermite,
    gauss_tail,
    minimize_scalar,
)

__all__ = [
    "RsSolution",
    "h_star_mse",
    "h_star_generic",
    "solve_rs",
    "rs_gen_error",
    "rs_train_error",
    "rs_train_error_per_pattern",
    "rs_train_loss",
    "rs_train_loss_quadrature",
    "rs_test_loss",
    "sweep_rs",
]

# Loss spec: the string "mse" (closed-form path) or a vectorized callable
# ℓ(margin) used through the quadrature path.
LossSpec = "str | Callable[[np.ndarray], np.ndarray]"

_SIGMAS = (1.0, -1.0)


@dataclass(frozen=True)
class RsSolution:
    """Converged order parameters of the regularized learner.

    Consistency relations holding at a solution (checked by tests):
    m = dm_hat/(lam+dq_hat);  q_norm = (dq_hat_q+dm_hat²)/(lam+dq_hat)²;
    dq = 1/(lam+dq_hat).
    """

    m: float
    q_norm: float
    dq: float
    dm_hat: float
    dq_hat_q: float
    dq_hat: float
    bias: float
    lam: float
    alpha: float
    delta: float
    rho: float
    converged: bool
    residual: float
    iters: int


def _sigma_weights(rho: float) -> tuple[tuple[float, float], ...]:
    return ((1.0, rho), (-1.0, 1.0 - rho))


def h_star_mse(x, sigma: float, *, m: float, q_norm: float, dq: float,
               bias: float, delta: float):
    """Channel minimizer for the MSE loss (closed form); vectorized in x."""
    omega = np.sqrt(delta * q_norm) * np.asarray(x) + m + sigma * bias
    return -np.sqrt(delta * dq) * (omega - 1.0) / (1.0 + delta * dq)


def h_star_generic(x: float, sigma: float, loss: Callable, *, m: float,
                   q_norm: float, dq: float, bias: float, delta: float) -> float:
    """Channel minimizer for an arbitrary margin loss, one node at a time."""
    omega = np.sqrt(delta * q_norm) * x + m + sigma * bias
    root_ddq = np.sqrt(delta * dq)

    def objective(h: float) -> float:
        return 0.5 * h * h + float(loss(np.asarray(omega + root_ddq * h)))

    # Bracket wide enough for any convex loss with subquadratic growth at
    # the scales reached here; the minimum of h²/2 + ℓ(...) cannot sit
    # beyond |h| ~ √(Δdq)·|ℓ'| at the bracket ends for the losses in scope.
    half_width = 10.0 * (1.0 + root_ddq) * (1.0 + abs(omega))
    h_opt, _ = minimize_scalar(objective, (-half_width, half_width), tol=1e-12)
    return h_opt


def _channel_integrals_mse(m, q_norm, dq, bias, alpha, delta, rho):
    """Closed-form (dm_hat, dq_hat_q, dq_hat) for the MSE loss."""
    big_e = 1.0 + delta * dq
    # E_σ (m − 1 + σb)²
    mean_sq = (m - 1.0) ** 2 + bias**2 + 2.0 * bias * (2.0 * rho - 1.0) * (m - 1.0)
    dm_hat = -alpha * (m - 1.0 + bias * (2.0 * rho - 1.0)) / big_e
    dq_hat_q = alpha * delta * (delta * q_norm + mean_sq) / big_e**2
    dq_hat = alpha * delta / big_e
    return dm_hat, dq_hat_q, dq_hat


def _channel_integrals_generic(m, q_norm, dq, bias, alpha, delta, rho,
                               loss: Callable, quad: QuadratureRule):
    """Quadrature (dm_hat, dq_hat_q, dq_hat) for a callable margin loss."""
    root_ddq = np.sqrt(delta * dq)
    e_h = e_h2 = e_xh = 0.0
    for sigma, weight in _sigma_weights(rho):
        h_vals = np.array([
            h_star_generic(x, sigma, loss, m=m, q_norm=q_norm, dq=dq,
                           bias=bias, delta=delta)
            for x in quad.nodes
        ])
        e_h += weight * quad.expect(h_vals)
        e_h2 += weight * quad.expect(h_vals**2)
        e_xh += weight * quad.expect(quad.nodes * h_vals)
    dm_hat = alpha / root_ddq * e_h
    dq_hat_q = alpha / dq * e_h2
    dq_hat = -alpha / np.sqrt(q_norm * dq) * e_xh
    return dm_hat, dq_hat_q, dq_hat


def _solve_at_fixed_bias(alpha, delta, rho, lam, bias, loss, config, quad,
                         x0) -> RsSolution:
    def rs_map(state: np.ndarray) -> np.ndarray:
        m, q_norm, dq = state
        if loss == "mse":
            dm_hat, dq_hat_q, dq_hat = _channel_integrals_mse(
                m, q_norm, dq, bias, alpha, delta, rho)
        else:
            dm_hat, dq_hat_q, dq_hat = _channel_integrals_generic(
                m, q_norm, dq, bias, alpha, delta, rho, loss, quad)
        denom = lam + dq_hat
        return np.array([
            dm_hat / denom,
            (dq_hat_q + dm_hat**2) / denom**2,
            1.0 / denom,
        ])

    state, iters, converged = fixed_point(rs_map, x0, config)
    m, q_norm, dq = (float(v) for v in state)
    residual = float(np.max(np.abs(rs_map(state) - state)))
    if loss == "mse":
        dm_hat, dq_hat_q, dq_hat = _channel_integrals_mse(
            m, q_norm, dq, bias, alpha, delta, rho)
    else:
        dm_hat, dq_hat_q, dq_hat = _channel_integrals_generic(
            m, q_norm, dq, bias, alpha, delta, rho, loss, quad)
    return RsSolution(
        m=m, q_norm=q_norm, dq=dq,
        dm_hat=float(dm_hat), dq_hat_q=float(dq_hat_q), dq_hat=float(dq_hat),
        bias=bias, lam=lam, alpha=alpha, delta=delta, rho=rho,
        converged=converged, residual=residual, iters=iters,
    )


def _bias_residual(sol: RsSolution, loss, quad) -> float:
    """E_σ σ ∫Dx h*_σ — zero exactly when the bias is at its optimum."""
    if loss == "mse":
        # ∫Dx h*_σ = −√(Δdq)(m + σb − 1)/(1+Δdq)
        pref = -np.sqrt(sol.delta * sol.dq) / (1.0 + sol.delta * sol.dq)
        return pref * ((2.0 * sol.rho - 1.0) * (sol.m - 1.0) + sol.bias)
    total = 0.0
    for sigma, weight in _sigma_weights(sol.rho):
        h_vals = np.array([
            h_star_generic(x, sigma, loss, m=sol.m, q_norm=sol.q_norm,
                           dq=sol.dq, bias=sol.bias, delta=sol.delta)
            for x in quad.nodes
        ])
        total += weight * sigma * quad.expect(h_vals)
    return total


_BIAS_BRACKET = (-5.0, 5.0)


def solve_rs(
    alpha: float,
    delta: float,
    rho: float,
    lam: float,
    *,
    bias: float = 0.0,
    bias_policy: str = "fixed",
    loss="mse",
    config: FixedPointConfig = FixedPointConfig(),
    quad_k: int = DEFAULT_QUAD_K,
    x0: Sequence[float] = (0.1, 1.0, 1.0),
) -> RsSolution:
    """Solve the equilibrium self-consistency at one (α, Δ, ρ, λ) point.

    bias_policy "fixed" keeps ``bias`` as given; "learned" finds the
    stationary bias by bisection (outer loop) with the order-parameter
    solve nested inside.  ``loss`` is "mse" or a vectorized callable ℓ(m̃).
    """
    if not (alpha > 0):
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not (0 < rho < 1):
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if lam < 0:
        raise ValueError(f"lam must be >= 0, got {lam}")
    if lam == 0 and alpha <= 1:
        raise ValueError(
            "lam = 0 needs alpha > 1: below that the unregularized minimizer "
            "is not unique and the response dq diverges"
        )
    if bias_policy not in ("fixed", "learned"):
        raise ValueError(f"bias_policy must be 'fixed' or 'learned', got {bias_policy!r}")
    quad = gauss_hermite(quad_k) if loss != "mse" else gauss_hermite(2)

    if bias_policy == "fixed":
        return _solve_at_fixed_bias(alpha, delta, rho, lam, bias, loss,
                                    config, quad, np.asarray(x0, dtype=float))

    # Learned bias: bisection on the stationarity residual, warm-starting
    # each inner solve from the previous one.
    lo, hi = _BIAS_BRACKET
    warm = np.asarray(x0, dtype=float)

    def solve_at(b: float) -> RsSolution:
        nonlocal warm
        sol = _solve_at_fixed_bias(alpha, delta, rho, lam, b, loss, config, quad, warm)
        warm = np.array([sol.m, sol.q_norm, sol.dq])
        return sol

    sol_lo = solve_at(lo)
    r_lo = _bias_residual(sol_lo, loss, quad)
    sol_hi = solve_at(hi)
    r_hi = _bias_residual(sol_hi, loss, quad)
    if r_lo == 0.0:
        return sol_lo
    if r_hi == 0.0:
        return sol_hi
    if np.sign(r_lo) == np.sign(r_hi):
        raise RuntimeError(
            f"bias residual does not change sign on [{lo}, {hi}] "
            f"(r({lo})={r_lo:.3e}, r({hi})={r_hi:.3e})"
        )
    sol_mid = sol_hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        sol_mid = solve_at(mid)
        r_mid = _bias_residual(sol_mid, loss, quad)
        if abs(r_mid) < 1e-13 or (hi - lo) < 1e-13:
            break
        if np.sign(r_mid) == np.sign(r_lo):
            lo, r_lo = mid, r_mid
        else:
            hi = mid
    return sol_mid


# ---------------------------------------------------------------------------
# Observables
# ---------------------------------------------------------------------------


def rs_gen_error(sol: RsSolution) -> float:
    """Generalization error of the equilibrium classifier."""
    return gen_error_closed_form(sol.m, sol.q_norm, sol.bias, sol.delta, sol.rho)


def _u_star(sol: RsSolution, x: np.ndarray, sigma: float, loss) -> np.ndarray:
    """Post-update margin u* = ω + √(Δdq)·h* on nodes x."""
    omega = np.sqrt(sol.delta * sol.q_norm) * x + sol.m + sigma * sol.bias
    if loss == "mse":
        return (omega - 1.0) / (1.0 + sol.delta * sol.dq) + 1.0
    root_ddq = np.sqrt(sol.delta * sol.dq)
    h = np.array([
        h_star_generic(xi, sigma, loss, m=sol.m, q_norm=sol.q_norm,
                       dq=sol.dq, bias=sol.bias, delta=sol.delta)
        for xi in np.atleast_1d(x)
    ])
    return omega + root_ddq * h


def rs_train_error(sol: RsSolution, loss="mse") -> float:
    """Training error per unit N (α × misclassified fraction)."""
    if loss == "mse":
        total = 0.0
        scale = np.sqrt(sol.delta * sol.q_norm)
        for sigma, weight in _sigma_weights(sol.rho):
            arg = (sol.delta * sol.dq + sol.m + sigma * sol.bias) / scale
            total += weight * gauss_tail(arg)
        return sol.alpha * total
    # Generic loss: u*(x) is nondecreasing in x (prox of a convex loss along
    # an increasing field), so P[u* ≤ 0] = 1 − H(x₀) at the sign change x₀.
    from scipy.optimize import brentq

    total = 0.0
    for sigma, weight in _sigma_weights(sol.rho):
        lo, hi = -12.0, 12.0
        u_lo = float(_u_star(sol, np.array([lo]), sigma, loss)[0])
        u_hi = float(_u_star(sol, np.array([hi]), sigma, loss)[0])
        if u_lo > 0.0:
            continue  # no errors in this label class
        if u_hi < 0.0:
            total += weight  # the whole class is misclassified
            continue
        x0 = brentq(
            lambda xv: float(_u_star(sol, np.array([xv]), sigma, loss)[0]), lo, hi)
        total += weight * (1.0 - gauss_tail(x0))
    return sol.alpha * total


def rs_train_error_per_pattern(sol: RsSolution, loss="mse") -> float:
    """Misclassified fraction of the training set (train error / α)."""
    return rs_train_error(sol, loss) / sol.alpha


def rs_train_loss(sol: RsSolution) -> float:
    """Training MSE per unit N, closed form: α(Δq + E_σ(m−1+σb)²)/(2(1+Δdq)²)."""
    mean_sq = ((sol.m - 1.0) ** 2 + sol.bias**2
               + 2.0 * sol.bias * (2.0 * sol.rho - 1.0) * (sol.m - 1.0))
    big_e = 1.0 + sol.delta * sol.dq
    return sol.alpha * (sol.delta * sol.q_norm + mean_sq) / (2.0 * big_e**2)


def rs_train_loss_quadrature(sol: RsSolution, loss="mse",
                             quad_k: int = DEFAULT_QUAD_K) -> float:
    """Training loss per unit N via quadrature of ℓ(u*); cross-checks the
    closed form for MSE and is the only route for generic losses."""
    quad = gauss_hermite(quad_k)
    if loss == "mse":
        loss_fn = lambda u: 0.5 * (u - 1.0) ** 2
    else:
        loss_fn = loss
    total = 0.0
    for sigma, weight in _sigma_weights(sol.rho):
        u = _u_star(sol, quad.nodes, sigma, loss)
        total += weight * quad.expect(loss_fn(u))
    return sol.alpha * total


def rs_test_loss(sol: RsSolution) -> float:
    """Expected per-pattern test MSE of the equilibrium classifier."""
    return test_loss_mse(sol.m, sol.q_norm, sol.bias, sol.delta, sol.rho)


def sweep_rs(
    alpha: float,
    delta: float,
    rho: float,
    lams: Sequence[float],
    *,
    biases: Sequence[float] = (0.0,),
    bias_policy: str = "fixed",
    config: FixedPointConfig = FixedPointConfig(),
) -> list[dict]:
    """Solve over a (λ, b) grid (or a λ grid with learned bias).

    Returns one row dict per grid point with the standard observable columns.
    Consecutive solves warm-start from the previous solution.
    """
    rows = []
    bias_values = (0.0,) if bias_policy == "learned" else tuple(biases)
    for b in bias_values:
        warm = (0.1, 1.0, 1.0)
        for lam in lams:
            sol = solve_rs(alpha, delta, rho, lam, bias=b,
                           bias_policy=bias_policy, config=config, x0=warm)
            warm = (sol.m, sol.q_norm, sol.dq)
            rows.append({
                "alpha": alpha, "delta": delta, "rho": rho, "lambda": lam,
                "bias_policy": bias_policy, "b": sol.bias,
                "M": sol.m, "Q": sol.q_norm, "dq": sol.dq,
                "gen_err": rs_gen_error(sol),
                "train_err": rs_train_error(sol),
                "train_loss": rs_train_loss(sol),
                "test_loss": rs_test_loss(sol),
                "converged": sol.converged, "iters": sol.iters,
            })
    return rows
