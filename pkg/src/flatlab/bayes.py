"""Bayes-optimal baseline for the Gaussian-mixture classification task.

With a unit-Gaussian prior on the centroid and P = αN observed patterns, the
posterior over v is Gaussian with mean

    v̄ = (Δ + α)^{-1} · Σ_μ σ^μ ξ^μ / √N                      (coordinate-wise)

and the Bayes classifier is sign(v̄·ξ/√N + b*).  In the large-N limit the
posterior mean concentrates on overlaps

    m* = q* = α / (Δ + α),

and the bias minimizing the error at those overlaps is b* = (Δ/2)·ln(ρ/(1−ρ))
(the (ΔQ/2M)·ln odds rule with Q = M).  The resulting error

    ε_B = ρ H((m*+b*)/√(Δq*)) + (1−ρ) H((m*−b*)/√(Δq*))

is the floor no training procedure can beat on average.  As α → 0 the
argument degenerates and ε_B → min(ρ, 1−ρ) (always answer the majority
label); that limit is handled explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Dataset, LinearClassifier, gen_error_closed_form

__all__ = ["BayesBaseline", "bayes_baseline", "bayes_gen_error", "bayes_weights"]


@dataclass(frozen=True)
class BayesBaseline:
    """Asymptotic overlaps, bias, and error of the Bayes classifier."""

    m_opt: float
    q_opt: float
    b_opt: float
    gen_err: float


def bayes_baseline(alpha: float, delta: float, rho: float) -> BayesBaseline:
    """Large-N Bayes-optimal overlaps and generalization error."""
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not (0.0 < rho < 1.0):
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if alpha == 0.0:
        # No data: guess the majority label; overlaps vanish.
        return BayesBaseline(
            m_opt=0.0, q_opt=0.0, b_opt=0.0, gen_err=min(rho, 1.0 - rho)
        )
    m = alpha / (delta + alpha)
    b = 0.5 * delta * np.log(rho / (1.0 - rho))
    return BayesBaseline(
        m_opt=m,
        q_opt=m,
        b_opt=float(b),
        gen_err=gen_error_closed_form(m, m, float(b), delta, rho),
    )


def bayes_gen_error(alpha: float, delta: float, rho: float) -> float:
    """Bayes-optimal generalization error (scalar convenience wrapper)."""
    return bayes_baseline(alpha, delta, rho).gen_err


def bayes_weights(data: Dataset, rho: float | None = None) -> LinearClassifier:
    """Plug-in Bayes classifier from a finite sample.

    Uses the posterior-mean direction v̄ = Σ σ^μ ξ^μ / (√N (Δ+α)) and the
    odds-ratio bias at the *empirical* overlaps of v̄ (b = ΔQ/(2M)·ln odds).
    ``rho`` defaults to the dataset's generative value; pass an empirical
    estimate to mimic a fully data-driven pipeline.
    """
    if rho is None:
        rho = data.rho
    n = data.n_dim
    alpha = data.alpha
    v_bar = (data.labels @ data.patterns) / (np.sqrt(n) * (data.delta + alpha))
    # Empirical overlaps of the plug-in direction; M uses the norm proxy
    # Q since the true centroid is unknown at inference time (M → Q in the
    # large-N limit for the posterior mean).
    q_emp = float(v_bar @ v_bar) / n
    if q_emp <= 0.0:
        raise ValueError("degenerate posterior-mean direction (zero norm)")
    b = 0.5 * data.delta * np.log(rho / (1.0 - rho))  # Q/M → 1 at posterior mean
    return LinearClassifier(weights=v_bar, bias=float(b))
