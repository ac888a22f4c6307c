"""Equilibrium of y norm-constrained replicas at fixed mutual overlap.

Setup: y weight vectors w^1..w^y share the squared-norm density Q = n² and a
pairwise overlap q₁ = Q·cosθ (hard constraints), each minimizing the margin
MSE on the *same* dataset, with a common bias b.  The barycenter
w̄ = (1/y)Σ_a w^a then has

    m_bar = m,      q_bar = (Q − q₁)/y + q₁,      b_bar = b·√(q_bar/Q),

the last one because the simulation rescales the averaged bias with the
shrunken norm so the decision rule is preserved (the classifier is invariant
under joint (w, b) scaling).

Order parameters: the centroid alignment m (equal across replicas) and the
response dq0 describing intra-replica fluctuations around the constrained
minimum.  For the MSE loss the self-consistency closes in just (m, dq0);
with E ≡ 1 + yΔ·dq0:

    dm_hat  = α(1 − m − b(2ρ−1)) / E
    dq0_hat = αΔ[Δ·q_bar + E_σ(m−1+σb)²] / E²
    dq1_hat = √((dq0_hat + dm_hat²) / (y² q_bar))
    m       = dm_hat / (y·dq1_hat)
    dq0     = 1 / (y²·dq1_hat)

Each constrained pattern's post-update margin is Gaussian with mean
(yΔ·dq0 + m + σb)/(1 + yΔ·dq0)·(…) concentrating, giving the per-replica
training error

    ε_train = α E_σ H( (yΔ·dq0 + m + σb) / √(Δ·q_bar) ).

Degenerations used as cross-checks: y=1 reproduces the soft-constrained
equilibrium of :mod:`flatlab.theory_rs` exactly (with dq1_hat ↔ λ+dq_hat);
q₁ → Q likewise at norm Q; and the y → ∞ limit (``solve_large_y``) is
structurally the y=1 system at norm q₁.

The overlap constraint is only satisfiable for cosθ > −1/(y−1) when y ≥ 2
(Gram-matrix positivity); θ_max = arccos(−1/(y−1)) is the widest angle.
A learned common bias sits at b = (2ρ−1)(1−m), same stationarity as the
single-replica system because all replicas share b.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import gen_error_closed_form
from .numerics import FixedPointConfig, fixed_point, gauss_tail

__all__ = [
    "ReplicaConstraints",
    "ReplicaSolution",
    "theta_max",
    "barycenter_observables",
    "replica_train_error",
    "solve_replicated_mse",
    "solve_large_y",
]


@dataclass(frozen=True)
class ReplicaConstraints:
    """Hard constraints shared by the replicas.

    y ≥ 1 replicas at squared-norm density q_norm = n² > 0, pairwise overlap
    cosθ ∈ (−1/(y−1), 1] (whole range (−1, 1] when y < 2), common bias.
    """

    y: float
    q_norm: float
    cos_theta: float
    bias: float = 0.0

    def __post_init__(self) -> None:
        problems = []
        if not (self.y >= 1):
            problems.append(f"y must be >= 1, got {self.y}")
        if not (self.q_norm > 0):
            problems.append(f"q_norm must be > 0, got {self.q_norm}")
        cos_floor = -1.0 / (self.y - 1.0) if self.y >= 2 else -1.0
        if not (cos_floor < self.cos_theta <= 1.0):
            problems.append(
                f"cos_theta must lie in ({cos_floor:g}, 1] for y={self.y}, "
                f"got {self.cos_theta}"
            )
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def q1(self) -> float:
        """Pairwise overlap q₁ = Q·cosθ."""
        return self.q_norm * self.cos_theta


@dataclass(frozen=True)
class ReplicaSolution:
    """Converged replica order parameters plus barycenter observables."""

    m: float
    dq0: float
    dm_hat: float
    dq0_hat: float
    dq1_hat: float
    m_bar: float
    q_bar: float
    b_bar: float
    bias: float
    train_err: float
    gen_err_center: float
    y: float
    q_norm: float
    cos_theta: float
    alpha: float
    delta: float
    rho: float
    converged: bool
    residual: float
    iters: int


def theta_max(y: float) -> float:
    """Widest feasible replica angle arccos(−1/(y−1)); needs y ≥ 2."""
    if y < 2:
        raise ValueError(f"theta_max needs y >= 2, got {y}")
    return float(np.arccos(-1.0 / (y - 1.0)))


def barycenter_observables(m: float, q_norm: float, q1: float, y: float,
                           bias: float) -> tuple[float, float, float]:
    """(m_bar, q_bar, b_bar) of the replica barycenter."""
    q_bar = (q_norm - q1) / y + q1
    b_bar = bias * np.sqrt(q_bar / q_norm)
    return m, float(q_bar), float(b_bar)


def replica_train_error(m: float, dq0: float, q_bar: float, y: float,
                        bias: float, alpha: float, delta: float,
                        rho: float) -> float:
    """Per-replica training error α·E_σ H((yΔdq0 + m + σb)/√(Δ·q_bar))."""
    scale = np.sqrt(delta * q_bar)
    shift = y * delta * dq0
    return alpha * (
        rho * gauss_tail((shift + m + bias) / scale)
        + (1.0 - rho) * gauss_tail((shift + m - bias) / scale)
    )


def _mean_sq(m: float, bias: float, rho: float) -> float:
    """E_σ (m − 1 + σb)²."""
    return (m - 1.0) ** 2 + bias**2 + 2.0 * bias * (2.0 * rho - 1.0) * (m - 1.0)


def solve_replicated_mse(
    alpha: float,
    delta: float,
    rho: float,
    constraints: ReplicaConstraints,
    *,
    bias_policy: str = "fixed",
    config: FixedPointConfig = FixedPointConfig(),
) -> ReplicaSolution:
    """Solve the y-replica MSE self-consistency under hard constraints.

    bias_policy "fixed" keeps constraints.bias; "learned" also drives the
    shared bias to its stationary value b = (2ρ−1)(1−m) (updated jointly
    with the order parameters — exact for the MSE loss).
    """
    if not (alpha > 0):
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not (0 < rho < 1):
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    if bias_policy not in ("fixed", "learned"):
        raise ValueError(f"bias_policy must be 'fixed' or 'learned', got {bias_policy!r}")
    y = constraints.y
    q_norm = constraints.q_norm
    q1 = constraints.q1
    q_bar = (q_norm - q1) / y + q1

    def bias_of(m: float) -> float:
        if bias_policy == "learned":
            return (2.0 * rho - 1.0) * (1.0 - m)
        return constraints.bias

    def conjugates(m: float, dq0: float, b: float):
        big_e = 1.0 + y * delta * dq0
        dm_hat = alpha * (1.0 - m - b * (2.0 * rho - 1.0)) / big_e
        dq0_hat = alpha * delta * (delta * q_bar + _mean_sq(m, b, rho)) / big_e**2
        dq1_hat = np.sqrt((dq0_hat + dm_hat**2) / (y**2 * q_bar))
        return dm_hat, dq0_hat, dq1_hat

    def rep_map(state: np.ndarray) -> np.ndarray:
        m, dq0 = state
        # Overflow here means the constrained response is running away (no
        # stable solution at these constraints); let the NaN/Inf reach the
        # fixed-point driver, which reports it as divergence.
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            dm_hat, _, dq1_hat = conjugates(m, dq0, bias_of(m))
            return np.array([dm_hat / (y * dq1_hat), 1.0 / (y**2 * dq1_hat)])

    state, iters, converged = fixed_point(rep_map, np.array([0.1, 1.0]), config)
    m, dq0 = (float(v) for v in state)
    residual = float(np.max(np.abs(rep_map(state) - state)))
    b = bias_of(m)
    dm_hat, dq0_hat, dq1_hat = conjugates(m, dq0, b)
    m_bar, q_bar_out, b_bar = barycenter_observables(m, q_norm, q1, y, b)
    return ReplicaSolution(
        m=m, dq0=dq0,
        dm_hat=float(dm_hat), dq0_hat=float(dq0_hat), dq1_hat=float(dq1_hat),
        m_bar=m_bar, q_bar=q_bar_out, b_bar=b_bar, bias=b,
        train_err=replica_train_error(m, dq0, q_bar_out, y, b, alpha, delta, rho),
        gen_err_center=gen_error_closed_form(m_bar, q_bar_out, b_bar, delta, rho),
        y=y, q_norm=q_norm, cos_theta=constraints.cos_theta,
        alpha=alpha, delta=delta, rho=rho,
        converged=converged, residual=residual, iters=iters,
    )


def solve_large_y(
    alpha: float,
    delta: float,
    rho: float,
    q_norm: float,
    cos_theta: float,
    *,
    bias: float = 0.0,
    bias_policy: str = "fixed",
    config: FixedPointConfig = FixedPointConfig(),
) -> ReplicaSolution:
    """y → ∞ limit at fixed overlap: rescaled response d0 = y·dq0 stays finite.

    With E∞ = 1 + Δ·d0 and q_bar → q₁ the system is structurally the y=1
    system at norm q₁; the barycenter concentrates on the constrained
    "center of mass" at squared-norm density q₁.
    """
    if not (0.0 < cos_theta <= 1.0):
        # q₁ must stay positive in the limit (it becomes the center's norm).
        raise ValueError(f"large-y limit needs cos_theta in (0, 1], got {cos_theta}")
    if not (q_norm > 0):
        raise ValueError(f"q_norm must be > 0, got {q_norm}")
    q1 = q_norm * cos_theta

    def bias_of(m: float) -> float:
        if bias_policy == "learned":
            return (2.0 * rho - 1.0) * (1.0 - m)
        return bias

    def conjugates(m: float, d0: float, b: float):
        big_e = 1.0 + delta * d0
        dm_hat = alpha * (1.0 - m - b * (2.0 * rho - 1.0)) / big_e
        dq0_hat = alpha * delta * (delta * q1 + _mean_sq(m, b, rho)) / big_e**2
        k1 = np.sqrt((dq0_hat + dm_hat**2) / q1)
        return dm_hat, dq0_hat, k1

    def limit_map(state: np.ndarray) -> np.ndarray:
        m, d0 = state
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            dm_hat, _, k1 = conjugates(m, d0, bias_of(m))
            return np.array([dm_hat / k1, 1.0 / k1])

    state, iters, converged = fixed_point(limit_map, np.array([0.1, 1.0]), config)
    m, d0 = (float(v) for v in state)
    residual = float(np.max(np.abs(limit_map(state) - state)))
    b = bias_of(m)
    dm_hat, dq0_hat, k1 = conjugates(m, d0, b)
    b_bar = b * np.sqrt(q1 / q_norm)
    scale = np.sqrt(delta * q1)
    train_err = alpha * (
        rho * gauss_tail((delta * d0 + m + b) / scale)
        + (1.0 - rho) * gauss_tail((delta * d0 + m - b) / scale)
    )
    return ReplicaSolution(
        m=m, dq0=d0,  # dq0 carries the rescaled response d0 = y·dq0
        dm_hat=float(dm_hat), dq0_hat=float(dq0_hat), dq1_hat=float(k1),
        m_bar=m, q_bar=q1, b_bar=float(b_bar), bias=b,
        train_err=float(train_err),
        gen_err_center=gen_error_closed_form(m, q1, float(b_bar), delta, rho),
        y=float("inf"), q_norm=q_norm, cos_theta=cos_theta,
        alpha=alpha, delta=delta, rho=rho,
        converged=converged, residual=residual, iters=iters,
    )
