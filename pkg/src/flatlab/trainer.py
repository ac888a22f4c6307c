"""Direct training: full-batch gradient descent and replica-coupled descent.

Two entry points:

* :func:`train_gd_mse` — minimize the regularized quadratic loss
  ½ Σ_μ (w·ξ^μ/√N + b − σ^μ)² + (λ_reg/2)|w|² by full-batch gradient steps,
  optionally with a hard norm constraint (re-projection after every step).

* :func:`train_rsgd` — train y weight replicas, each carrying the bare
  quadratic loss plus a coupling λ(t)·Σ_{b≠a}(d_ab − d₀)² that pins every
  ordered replica pair at squared distance d_ab = |wᵃ−wᵇ|²/(2·N·n²) near the
  offset d₀; weights are rescaled to the target norm n before each forward
  pass, so the coupling's denominator is a constant.  The coupling constant
  follows the capped schedule λ(t) = min[λ₀(1+λ₁)^t, λ_max].  The ensemble's
  predictor is the barycenter (:func:`center_model`).

All replicas advance synchronously: one (y×P) margin matrix per epoch, one
gradient matrix, one optimizer step.  Losses are logged per unit N so they
compare directly with the theory modules' densities; training errors are
misclassified patterns per unit N (i.e. fraction·α).

The trajectory is a list of dict rows with keys
``epoch, replica, train_loss, train_err, gen_err, norm, bias,
mean_pairwise_d, lambda_t`` — one row per replica per logged epoch, plus a
``replica = -1`` row for the barycenter whenever y > 1.  ``train_loss`` is
the bare quadratic part (no regularizer, no coupling), ``gen_err`` is the
closed-form generalization error at the replica's measured (m, q, b).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import (
    Dataset,
    LinearClassifier,
    gen_error_closed_form,
    make_rng,
    measure_overlaps,
)
from .numerics import DivergenceError

__all__ = [
    "TrainConfig",
    "ReplicaEnsemble",
    "coupling_schedule",
    "train_gd_mse",
    "train_rsgd",
    "center_model",
    "distance_to_angle",
    "angle_to_distance",
]

_OPTIMIZERS = ("plain_momentum", "adaptive_moment")


@dataclass(frozen=True)
class TrainConfig:
    """Knobs for both trainers.

    ``norm_target`` is the per-component weight scale n: the projection
    keeps |w|² = N·n² exactly.  ``None`` leaves the norm free (plain ridge
    training).  ``d0`` and the λ-schedule parameters only matter for
    replica coupling; ``couple_bias`` adds λ(t)·Σ_{b≠a}(b_a−b_b)² so the
    replica biases are pulled together along with the weights.
    ``log_every = 0`` picks a stride that yields ~200 logged epochs.
    """

    epochs: int = 20_000
    lr: float = 1e-4
    momentum: float = 0.5
    optimizer: str = "plain_momentum"
    lambda0: float = 1e-4
    lambda1: float = 5e-3
    lambda_max: float = 1e2
    d0: float = 0.0
    norm_target: float | None = None
    couple_bias: bool = False
    seed: int = 0
    log_every: int = 0

    def __post_init__(self) -> None:
        problems = []
        if self.epochs < 1:
            problems.append(f"epochs must be >= 1, got {self.epochs}")
        if not (self.lr > 0):
            problems.append(f"lr must be > 0, got {self.lr}")
        if not (0.0 <= self.momentum < 1.0):
            problems.append(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.optimizer not in _OPTIMIZERS:
            problems.append(
                f"optimizer must be one of {_OPTIMIZERS}, got {self.optimizer!r}"
            )
        for name in ("lambda0", "lambda1", "lambda_max"):
            if not (getattr(self, name) > 0):
                problems.append(f"{name} must be > 0, got {getattr(self, name)}")
        if self.d0 < 0:
            problems.append(f"d0 must be >= 0, got {self.d0}")
        if self.norm_target is not None and not (self.norm_target > 0):
            problems.append(f"norm_target must be > 0, got {self.norm_target}")
        if self.log_every < 0:
            problems.append(f"log_every must be >= 0, got {self.log_every}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def log_stride(self) -> int:
        if self.log_every > 0:
            return self.log_every
        return max(1, self.epochs // 200)


@dataclass(frozen=True)
class ReplicaEnsemble:
    """Trained replicas and their barycenter predictor."""

    replicas: tuple
    center: LinearClassifier

    @property
    def y(self) -> int:
        return len(self.replicas)


def coupling_schedule(cfg: TrainConfig, epoch: int) -> float:
    """λ(t) = min[λ₀·(1+λ₁)^t, λ_max]; nondecreasing, capped exactly.

    The growth test runs in log space first so that epochs far past the cap
    cannot overflow the direct power.
    """
    if epoch * np.log1p(cfg.lambda1) > np.log(cfg.lambda_max / cfg.lambda0):
        return cfg.lambda_max
    return min(cfg.lambda0 * (1.0 + cfg.lambda1) ** epoch, cfg.lambda_max)


def _xavier_rows(rng: np.random.Generator, y: int, n: int) -> np.ndarray:
    """Independent uniform(−√(6/N), √(6/N)) rows, one per replica."""
    half_width = np.sqrt(6.0 / n)
    return rng.uniform(-half_width, half_width, size=(y, n))


def _project_norm(w: np.ndarray, norm_target: float | None) -> np.ndarray:
    """Rescale each row to |w|² = N·n² (no-op when the norm is free)."""
    if norm_target is None:
        return w
    n = w.shape[-1]
    scale = norm_target * np.sqrt(n) / np.linalg.norm(w, axis=-1, keepdims=True)
    return w * scale


def _pairwise_d(w: np.ndarray, norm_target: float) -> np.ndarray:
    """d_ab = |wᵃ−wᵇ|² / (2·N·n²) for all ordered pairs, as a (y, y) matrix."""
    sq = np.sum(w * w, axis=1)
    cross = w @ w.T
    dist2 = sq[:, None] + sq[None, :] - 2.0 * cross
    return dist2 / (2.0 * w.shape[1] * norm_target**2)


class _Stepper:
    """Hand-rolled optimizer state over a pair of arrays (weights, biases)."""

    def __init__(self, cfg: TrainConfig, shape_w, shape_b):
        self.cfg = cfg
        self.t = 0
        if cfg.optimizer == "plain_momentum":
            self.vel_w = np.zeros(shape_w)
            self.vel_b = np.zeros(shape_b)
        else:  # adaptive_moment: first/second moment estimates
            self.m_w = np.zeros(shape_w)
            self.v_w = np.zeros(shape_w)
            self.m_b = np.zeros(shape_b)
            self.v_b = np.zeros(shape_b)
            self.beta1, self.beta2, self.eps = 0.9, 0.999, 1e-8

    def step(self, w, b, grad_w, grad_b, train_bias: bool):
        cfg = self.cfg
        self.t += 1
        if cfg.optimizer == "plain_momentum":
            self.vel_w = cfg.momentum * self.vel_w + grad_w
            w = w - cfg.lr * self.vel_w
            if train_bias:
                self.vel_b = cfg.momentum * self.vel_b + grad_b
                b = b - cfg.lr * self.vel_b
            return w, b
        b1, b2, eps = self.beta1, self.beta2, self.eps
        bc1 = 1.0 - b1**self.t
        bc2 = 1.0 - b2**self.t
        self.m_w = b1 * self.m_w + (1 - b1) * grad_w
        self.v_w = b2 * self.v_w + (1 - b2) * grad_w**2
        w = w - cfg.lr * (self.m_w / bc1) / (np.sqrt(self.v_w / bc2) + eps)
        if train_bias:
            self.m_b = b1 * self.m_b + (1 - b1) * grad_b
            self.v_b = b2 * self.v_b + (1 - b2) * grad_b**2
            b = b - cfg.lr * (self.m_b / bc1) / (np.sqrt(self.v_b / bc2) + eps)
        return w, b


def _log_rows(rows, epoch, w, b, data: Dataset, lambda_t, norm_target,
              include_center: bool):
    """Append one row per replica (and the barycenter) to the trajectory."""
    y, n = w.shape
    root_n = np.sqrt(n)
    u = w @ data.patterns.T / root_n + b[:, None]
    resid = u - data.labels[None, :]
    losses = 0.5 * np.sum(resid * resid, axis=1) / n
    errs = np.sum((u >= 0) != (data.labels[None, :] >= 0), axis=1) / n
    if y > 1 and norm_target is not None:
        dmat = _pairwise_d(w, norm_target)
        mean_d = float(np.sum(dmat) / (y * (y - 1)))
    else:
        mean_d = 0.0
    entries = [(a, w[a], float(b[a])) for a in range(y)]
    if include_center:
        entries.append((-1, *_center_arrays(w, b)))
    for tag, wa, ba in entries:
        if tag >= 0:
            loss, err = float(losses[tag]), float(errs[tag])
        else:
            um = data.patterns @ wa / root_n + ba
            loss = 0.5 * float(np.sum((um - data.labels) ** 2)) / n
            err = float(np.sum((um >= 0) != (data.labels >= 0))) / n
        m = float(wa @ data.centroid) / n
        q = float(wa @ wa) / n
        gen = gen_error_closed_form(m, q, ba, data.delta, data.rho) if q > 0 else 0.5
        rows.append({
            "epoch": epoch, "replica": tag, "train_loss": loss,
            "train_err": err, "gen_err": gen, "norm": float(np.sqrt(q)),
            "bias": ba, "mean_pairwise_d": mean_d, "lambda_t": float(lambda_t),
        })


def _center_arrays(w: np.ndarray, b: np.ndarray):
    """Barycenter weights and bias: w̄ = mean wᵃ, b̄ = ‖w̄‖·mean(b_a/‖wᵃ‖)."""
    w_bar = w.mean(axis=0)
    norms = np.linalg.norm(w, axis=1)
    if np.any(norms == 0.0):
        raise ValueError("zero-norm replica: barycenter bias undefined")
    scale = np.linalg.norm(w_bar)
    b_bar = scale * float(np.mean(b / norms))
    return w_bar, b_bar


def center_model(
    replicas: Sequence[LinearClassifier],
    norms: Sequence[float] | None = None,
) -> LinearClassifier:
    """Barycenter predictor of a replica ensemble.

    w̄ = (1/y)Σ_a wᵃ and b̄ = ‖w̄‖·(1/y)Σ_a b_a/‖wᵃ‖ — the bias is carried
    over in units of each replica's own norm so that the barycenter's margin
    scale matches its shrunken weight norm.  ``norms`` overrides the replica
    norms ‖wᵃ‖ when given (they are computed from the weights otherwise).
    """
    if not replicas:
        raise ValueError("need at least one replica")
    w = np.stack([r.weights for r in replicas])
    b = np.array([r.bias for r in replicas], dtype=float)
    if norms is not None:
        norms = np.asarray(norms, dtype=float)
        if norms.shape != (len(replicas),):
            raise ValueError(
                f"norms must have one entry per replica, got shape {norms.shape}"
            )
        if np.any(norms == 0.0):
            raise ValueError("zero-norm replica: barycenter bias undefined")
        w_bar = w.mean(axis=0)
        b_bar = float(np.linalg.norm(w_bar)) * float(np.mean(b / norms))
    else:
        w_bar, b_bar = _center_arrays(w, b)
    if np.linalg.norm(w_bar) < 1e-12 * float(np.max(np.linalg.norm(w, axis=1))):
        raise ValueError("replica barycenter has zero norm (antipodal replicas)")
    return LinearClassifier(weights=w_bar, bias=b_bar)


def distance_to_angle(d_ab: float, norms: Sequence[float] | None = None) -> float:
    """cosθ between two equal-norm replicas at normalized distance d_ab.

    With |wᵃ| = |wᵇ| = n√N and d = |wᵃ−wᵇ|²/(2Nn²), expanding the square
    gives d = 1 − cosθ, so cosθ = 1 − d.  Unequal norms make the mapping
    ill-defined; passing such norms raises.
    """
    if norms is not None:
        lo, hi = float(np.min(norms)), float(np.max(norms))
        if hi - lo > 1e-9 * max(hi, 1.0):
            raise ValueError(
                f"distance/angle conversion needs equal norms, got spread "
                f"[{lo}, {hi}]"
            )
    if not (0.0 <= d_ab <= 2.0):
        raise ValueError(f"d_ab must lie in [0, 2], got {d_ab}")
    return 1.0 - d_ab


def angle_to_distance(cos_theta: float) -> float:
    """Inverse of :func:`distance_to_angle`: d = 1 − cosθ."""
    if not (-1.0 <= cos_theta <= 1.0):
        raise ValueError(f"cos_theta must lie in [−1, 1], got {cos_theta}")
    return 1.0 - cos_theta


def _run_training(
    data: Dataset,
    y: int,
    cfg: TrainConfig,
    *,
    lambda_reg: float,
    couple: bool,
    train_bias: bool,
):
    """Shared (y, N) training loop behind both public trainers.

    The epoch body works on preallocated buffers: one forward gemm into
    ``u``, one backward gemm into ``grad_w`` (the 1/√N folded into scaled
    pattern matrices once), everything else in place.
    """
    n = data.n_dim
    labels = data.labels
    x_scaled = data.patterns / np.sqrt(n)               # (P, N)
    xt_scaled = np.ascontiguousarray(x_scaled.T)        # (N, P)
    rng = make_rng(cfg.seed, "trainer:init")
    w = _project_norm(_xavier_rows(rng, y, n), cfg.norm_target)
    b = np.zeros(y)
    stepper = _Stepper(cfg, w.shape, b.shape)
    rows: list[dict] = []
    include_center = y > 1
    stride = cfg.log_stride
    lam_t = coupling_schedule(cfg, 0) if couple else 0.0
    _log_rows(rows, 0, w, b, data, lam_t, cfg.norm_target, include_center)

    u = np.empty((y, labels.size))
    grad_w = np.empty_like(w)
    for epoch in range(1, cfg.epochs + 1):
        np.dot(w, xt_scaled, out=u)                     # margins − bias
        u += b[:, None]
        u -= labels[None, :]                            # now the residuals
        loss = 0.5 * float(np.vdot(u, u))
        if lambda_reg:
            loss += 0.5 * lambda_reg * float(np.vdot(w, w))
        if not np.isfinite(loss):
            raise DivergenceError(
                f"training loss became non-finite at epoch {epoch}",
                last_finite=w, iters=epoch,
            )
        np.dot(u, x_scaled, out=grad_w)                 # (y, N)
        grad_b = np.sum(u, axis=1)
        if lambda_reg:
            grad_w += lambda_reg * w
        lam_t = coupling_schedule(cfg, epoch) if couple else 0.0
        if couple and y > 1:
            dmat = _pairwise_d(w, cfg.norm_target)
            coeff = dmat - cfg.d0
            np.fill_diagonal(coeff, 0.0)
            # U = λ(t)Σ_{a≠b}(d_ab−d₀)² over ordered pairs; each unordered
            # pair appears twice, and so does its gradient.
            row_sum = np.sum(coeff, axis=1)
            grad_w += (4.0 * lam_t / (n * cfg.norm_target**2)) * (
                row_sum[:, None] * w - coeff @ w
            )
            if cfg.couple_bias:
                grad_b += 4.0 * lam_t * (y * b - np.sum(b))
        w, b = stepper.step(w, b, grad_w, grad_b, train_bias)
        if cfg.norm_target is not None:
            norms = np.linalg.norm(w, axis=1, keepdims=True)
            w *= cfg.norm_target * np.sqrt(n) / norms
        if epoch % stride == 0 or epoch == cfg.epochs:
            _log_rows(rows, epoch, w, b, data, lam_t, cfg.norm_target,
                      include_center)
    return w, b, rows


def train_gd_mse(
    data: Dataset,
    lambda_reg: float,
    bias_policy: str,
    cfg: TrainConfig,
):
    """Full-batch gradient minimization of the regularized quadratic loss.

    bias_policy: "learned" trains the bias alongside the weights; "fixed"
    freezes it at 0.  Returns (classifier, trajectory rows).  A non-finite
    loss raises :class:`~flatlab.numerics.DivergenceError` carrying the last
    finite weight matrix.
    """
    if lambda_reg < 0:
        raise ValueError(f"lambda_reg must be >= 0, got {lambda_reg}")
    if bias_policy not in ("learned", "fixed"):
        raise ValueError(
            f"bias_policy must be 'learned' or 'fixed', got {bias_policy!r}"
        )
    w, b, rows = _run_training(
        data, 1, cfg,
        lambda_reg=lambda_reg, couple=False,
        train_bias=(bias_policy == "learned"),
    )
    return LinearClassifier(weights=w[0], bias=float(b[0])), rows


def train_rsgd(
    data: Dataset,
    y: int,
    cfg: TrainConfig,
    *,
    bias_policy: str = "learned",
):
    """Replica-coupled descent toward flat regions at fixed norm.

    y = 1 delegates to :func:`train_gd_mse` with no regularizer — same RNG
    stream, same optimizer state arithmetic, hence bit-identical
    trajectories.  For y ≥ 2 ``cfg.norm_target`` must be set: the distance
    coupling is normalized by it and every step re-projects each replica
    onto the norm sphere.  Returns (:class:`ReplicaEnsemble`, trajectory).
    """
    if y < 1:
        raise ValueError(f"y must be >= 1, got {y}")
    if bias_policy not in ("learned", "fixed"):
        raise ValueError(
            f"bias_policy must be 'learned' or 'fixed', got {bias_policy!r}"
        )
    if y == 1:
        clf, rows = train_gd_mse(data, 0.0, bias_policy, cfg)
        return ReplicaEnsemble(replicas=(clf,), center=clf), rows
    if cfg.norm_target is None:
        raise ValueError("replica coupling needs cfg.norm_target set")
    w, b, rows = _run_training(
        data, y, cfg,
        lambda_reg=0.0, couple=True,
        train_bias=(bias_policy == "learned"),
    )
    replicas = tuple(
        LinearClassifier(weights=w[a], bias=float(b[a])) for a in range(y)
    )
    return ReplicaEnsemble(replicas=replicas, center=center_model(replicas)), rows
