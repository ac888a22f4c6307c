"""Local-entropy (constrained-overlap) analysis around the equilibrium learner.

Question answered here: how much probe weight-space volume at squared-norm
density P sits at overlap S = P(1−d) from the equilibrium reference w̃, as a
function of the distance d and of an inverse temperature β that biases the
probe toward low training error?  The probe measure is

    dμ(w) ∝ δ(|w|² − NP) δ(w·w̃ − NS) exp(−β · #errors(w)),

averaged over datasets and over the reference's equilibrium measure.  The
reference enters only through its order parameters (m, q_norm, dq, bias) —
an :class:`~flatlab.theory_rs.RsSolution` — because the reference is the
minimizer of the regularized MSE studied there.

Free entropy.  With the probe order parameters

    p   probe–reference-conditioned squared norm proxy (slice position),
    o   probe–centroid alignment,
    δt  probe response to the reference's training errors,

conjugates (p̂, P̂, ô, δŜ, δt̂), and the reference-derived constants
(M, Q, dq, b_r), define

    D = p̂ − 2P̂,
    B = (p̂ + ô²)/2 + δŜ²Q/2 + δŜ(δt̂·dq + M·ô),
    𝔊_S = p·p̂/2 − δt·δt̂ − P·P̂ − o·ô − S·δŜ + ½ln(2π/D) + B/D,
    Γ = p − S²/Q,          c = √(Δ(P − p)),
    A_σ(x, y) = σ·b̃ + o + √Δ·(S/√Q)·x + √Δ·(δt/√dq)·h*_σ(x) + √(ΔΓ)·y,
    𝔊_E = E_σ ∫Dx Dy  ln H_β(−A_σ/c),
    Φ(β) = 𝔊_S + α·𝔊_E,

where h*_σ is the reference channel minimizer (theory_rs.h_star_mse) and
H_β(u) = e^{−β} + (1−e^{−β})·H(u) is the soft tail: a pattern misclassified
by the probe pays e^{−β}.  Stationarity of Φ in all eight variables gives

    p = 2B/D²,   D = 1/(P−p),   o = (ô + δŜ·M)/D,
    δŜ = (S·D − δt̂·dq − M·ô)/Q,   δt = δŜ·dq/D,
    ô  = α E ∫ G,
    δt̂ = α√Δ/√dq · E ∫ G·h*_σ,
    p̂  = −α E ∫ G·( y√Δ/√Γ + A·Δ/c² ),

with G = (1−e^{−β})·φ(A/c) / (c·H_β(−A/c)).  The derivation is original to
this package; a finite-difference gradient check of Φ at the converged
solution is part of the test suite (residuals < 1e−6 required).

Integration.  Because the reference channel minimizer h*_σ is linear in x
for the quadratic loss, A_σ is exactly Gaussian:  A ~ N(μ_σ, s²) with
μ_σ = σb̃ + o + √Δ(δt/√dq)h₀σ and s² = κ₁² + ΔΓ,
κ₁ = √Δ(S/√Q + (δt/√dq)h₁).  Every 2-D (x, y) integral above collapses to a
1-D integral over A, via E[x·g(A)] = (κ₁/s²)·E[(A−μ)g(A)] and
E[y·g(A)] = (√(ΔΓ)/s²)·E[(A−μ)g(A)] — the latter cancels the 1/√Γ in p̂
exactly.  The 1-D integrals use composite Gauss-Legendre panels in
z = (A−μ)/s with automatic refinement around the classification boundary
A = 0, whose width c/s shrinks like √d as the probe closes on the
reference; fixed Gauss-Hermite grids cannot resolve that regime.

Observables.  The probe's training error (errors per unit N) is

    ε_w = α e^{−β} E_σ ∫DxDy  H(A/c) / H_β(−A/c),

which also equals −∂Φ/∂β (computed here by centered finite differences with
re-solved saddles, relative step 1e−4 — an envelope-theorem evaluation; the
analytic equality is asserted in tests).  The local entropy is
𝒮 = β·ε_w + Φ, and its normalized version subtracts the β = α = 0 slice
volume  vol(S) = ½[1 + ln 2π + ln(P − S²/Q)], so 𝒮_norm ≤ 0 with
𝒮_norm → 0 as d → 0.

β is capped at 700: beyond that e^{−β} underflows and ln H_β would hit
ln 0 wherever the probe is forced into an error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from numpy.polynomial.legendre import leggauss

from .numerics import (
    DEFAULT_QUAD_K,
    FixedPointConfig,
    fixed_point,
    gauss_tail,
    log_gauss_tail,
)
from .theory_rs import RsSolution, rs_train_error

__all__ = [
    "BETA_CAP",
    "FpParams",
    "FpSolution",
    "BetaCalibrationError",
    "soft_gauss_tail",
    "oracle_error",
    "slice_volume",
    "fp_action",
    "solve_fp",
    "fp_train_error",
    "calibrate_beta",
    "normalized_local_entropy_curve",
]

BETA_CAP = 700.0

# 8-point Gauss-Legendre panel rule on [-1, 1], shared by all panels.
_GL_X, _GL_W = leggauss(8)
# Half-width of the z-window; the Gaussian weight at the edge is ~2e-22.
_Z_MAX = 10.0
# Refinement budget: never more than this many fine panels per integral.
_MAX_FINE_PANELS = 1200


def soft_gauss_tail(x, beta: float):
    """H_β(x) = e^{−β} + (1 − e^{−β})·H(x): tail with an error floor."""
    ee = np.exp(-beta)
    return ee + (1.0 - ee) * gauss_tail(x)


def oracle_error(alpha: float, delta: float) -> float:
    """Training error per unit N of the centroid direction itself (w = v,
    b = 0): each pattern's margin is N(1, Δ), so the misclassified fraction
    is H(1/√Δ).  Useful as a reference-independent cutoff."""
    return alpha * gauss_tail(1.0 / np.sqrt(delta))


def slice_volume(overlap_s: float, norm_p: float, q_ref: float) -> float:
    """Log-volume density of the bare slice {|w|²=NP, w·w̃=NS}:
    ½[1 + ln 2π + ln(P − S²/Q)]."""
    gap = norm_p - overlap_s**2 / q_ref
    if gap <= 0.0:
        raise ValueError(f"slice is empty: P − S²/Q = {gap} <= 0")
    return 0.5 * (1.0 + np.log(2.0 * np.pi) + np.log(gap))


@dataclass(frozen=True)
class FpParams:
    """Probe constraints: reference solution, overlap S, norm P, β, bias b̃."""

    reference: RsSolution
    overlap_s: float
    norm_p: float
    beta: float
    constrained_bias: float = 0.0

    def __post_init__(self) -> None:
        problems = []
        q = self.reference.q_norm
        if not (self.norm_p > 0):
            problems.append(f"norm_p must be > 0, got {self.norm_p}")
        elif not abs(self.overlap_s) < np.sqrt(self.norm_p * q):
            problems.append(
                f"|overlap_s| must be < sqrt(norm_p*q_norm)="
                f"{np.sqrt(self.norm_p * q):.6g}, got {self.overlap_s}"
            )
        if not (0.0 <= self.beta <= BETA_CAP):
            problems.append(f"beta must lie in [0, {BETA_CAP:g}], got {self.beta}")
        if problems:
            raise ValueError("; ".join(problems))


@dataclass(frozen=True)
class FpSolution:
    """Converged probe order parameters and local-entropy observables."""

    p: float
    o: float
    delta_t: float
    gamma: float
    p_hat: float
    pp_hat: float
    o_hat: float
    ds_hat: float
    dt_hat: float
    free_entropy: float
    local_energy: float
    local_entropy: float
    local_entropy_norm: float
    train_err_w: float
    beta: float
    overlap_s: float
    norm_p: float
    converged: bool
    residual: float
    iters: int


class BetaCalibrationError(ValueError):
    """Target training error unattainable; carries the attainable interval."""

    def __init__(self, message: str, attainable: tuple):
        super().__init__(message)
        self.attainable = attainable


class _FpWork:
    """Reference constants and the graded 1-D quadrature shared by one solve.

    ``quad_k`` sets the number of coarse panels across the z ∈ [−10, 10]
    window; fine panels are inserted automatically around the classification
    boundary (z₀ = −μ/s, width w = c/s) and, for β > 1, along the ramp of
    length √(2β)·w that the soft tail G develops beyond it.
    """

    def __init__(self, alpha, delta, rho, params: FpParams, quad_k: int):
        self.alpha, self.delta, self.rho = alpha, delta, rho
        self.params = params
        ref = params.reference
        self.m_ref, self.q_ref = ref.m, ref.q_norm
        self.dq_ref, self.b_ref = ref.dq, ref.bias
        self.s, self.p_norm = params.overlap_s, params.norm_p
        self.beta, self.b_tilde = params.beta, params.constrained_bias
        self.sigma_weights = ((1.0, rho), (-1.0, 1.0 - rho))
        # Channel minimizer of the quadratic-loss reference, h*_σ(x) = h₀σ + h₁x.
        e_ref = 1.0 + delta * self.dq_ref
        root_ddq = np.sqrt(delta * self.dq_ref)
        self.h1 = -root_ddq * np.sqrt(delta * self.q_ref) / e_ref
        self.h0 = {
            sigma: -root_ddq * (self.m_ref + sigma * self.b_ref - 1.0) / e_ref
            for sigma, _ in self.sigma_weights
        }
        self._coarse_edges = np.linspace(-_Z_MAX, _Z_MAX, max(quad_k, 8) + 1)

    def _geometry(self, p, delta_t, o, sigma):
        """(μ_σ, κ₁, s, c, Γ) of the Gaussian field A at the current state."""
        gamma = max(p - self.s**2 / self.q_ref, 0.0)
        c = np.sqrt(self.delta * (self.p_norm - p))
        root_d = np.sqrt(self.delta)
        t_over = delta_t / np.sqrt(self.dq_ref)
        mu = sigma * self.b_tilde + o + root_d * t_over * self.h0[sigma]
        k1 = root_d * (self.s / np.sqrt(self.q_ref) + t_over * self.h1)
        svar = k1 * k1 + self.delta * gamma
        s_std = max(np.sqrt(svar), 1e-12 * (c + abs(mu) + 1.0))
        return mu, k1, s_std, c

    def _nodes(self, mu, s_std, c):
        """Panelized z-nodes and Gaussian-weighted quadrature weights."""
        edges = self._coarse_edges
        z0 = -mu / s_std
        w = c / s_std
        ramp = np.sqrt(2.0 * self.beta) if self.beta > 0.0 else 0.0
        step = w / (6.0 * max(1.0, np.sqrt(max(self.beta, 1.0)) / 2.45))
        lo = max(z0 - 8.0 * w, -_Z_MAX)
        hi = min(z0 + (ramp + 8.0) * w, _Z_MAX)
        coarse_width = edges[1] - edges[0]
        if step < coarse_width and hi > lo:
            n = int(np.ceil((hi - lo) / step))
            n = min(n, _MAX_FINE_PANELS)
            edges = np.unique(np.concatenate([edges, np.linspace(lo, hi, n + 1)]))
        mid = 0.5 * (edges[1:] + edges[:-1])
        half = 0.5 * (edges[1:] - edges[:-1])
        z = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
        wts = (half[:, None] * _GL_W[None, :]).ravel()
        wts = wts * np.exp(-0.5 * z * z) / np.sqrt(2.0 * np.pi)
        return z, wts

    def _sigma_quantities(self, p, delta_t, o, sigma):
        """1-D moments of A for one label sign.

        Returns (I₀, J₁, I_A, svar, κ₁, c, E[ln H_β], E[err-integrand]) with
        I₀ = E[G], J₁ = E[(A−μ)G], I_A = E[A·G]; all logs are taken before
        exponentiating so β up to the cap stays finite.
        """
        mu, k1, s_std, c = self._geometry(p, delta_t, o, sigma)
        z, wts = self._nodes(mu, s_std, c)
        a = mu + s_std * z
        u = a / c
        beta = self.beta
        ee = np.exp(-beta)
        with np.errstate(divide="ignore"):
            log_soft = np.log1p(-ee)  # ln(1−e^{−β}); −inf at β = 0 is fine
        ln_hb_minus = np.logaddexp(-beta, log_soft + log_gauss_tail(-u))
        ln_g = (
            log_soft
            - 0.5 * u * u
            - 0.5 * np.log(2.0 * np.pi)
            - np.log(c)
            - ln_hb_minus
        )
        g = np.exp(np.minimum(ln_g, 700.0))
        i0 = float(np.sum(wts * g))
        j1 = s_std * float(np.sum(wts * z * g))
        ia = j1 + mu * i0
        e_ln = float(np.sum(wts * ln_hb_minus))
        e_err = float(np.sum(wts * np.exp(-beta + log_gauss_tail(u) - ln_hb_minus)))
        return i0, j1, ia, s_std * s_std, k1, c, e_ln, e_err

    def conjugate_integrals(self, p, delta_t, o):
        """(ô, δt̂, p̂) at the current state, by the collapsed 1-D quadrature."""
        o_hat = dt_hat = p_hat = 0.0
        for sigma, wsig in self.sigma_weights:
            i0, j1, ia, svar, k1, c, _, _ = self._sigma_quantities(p, delta_t, o, sigma)
            o_hat += wsig * i0
            dt_hat += wsig * (self.h0[sigma] * i0 + self.h1 * k1 * j1 / svar)
            p_hat += wsig * (self.delta * j1 / svar + (self.delta / c**2) * ia)
        alpha = self.alpha
        dt_hat *= alpha * np.sqrt(self.delta / self.dq_ref)
        return alpha * o_hat, dt_hat, -alpha * p_hat

    def energetic_entropy(self, p, delta_t, o):
        """𝔊_E = E_σ E_A[ln H_β(−A/c)]."""
        total = 0.0
        for sigma, wsig in self.sigma_weights:
            total += wsig * self._sigma_quantities(p, delta_t, o, sigma)[6]
        return total

    def train_error(self, p, delta_t, o):
        """ε_w = α e^{−β} E_σ E_A[H(A/c)/H_β(−A/c)]."""
        total = 0.0
        for sigma, wsig in self.sigma_weights:
            total += wsig * self._sigma_quantities(p, delta_t, o, sigma)[7]
        return self.alpha * total


def fp_action(
    alpha: float,
    delta: float,
    rho: float,
    params: FpParams,
    variables: Sequence[float],
    quad_k: int = DEFAULT_QUAD_K,
) -> float:
    """Variational free entropy Φ(p, δt, o, p̂, P̂, ô, δŜ, δt̂).

    The solver's converged solution makes this stationary in all eight
    arguments; tests probe that with finite differences.
    """
    p, delta_t, o, p_hat, pp_hat, o_hat, ds_hat, dt_hat = (float(v) for v in variables)
    work = _FpWork(alpha, delta, rho, params, quad_k)
    q, m_ref, dq = work.q_ref, work.m_ref, work.dq_ref
    s, p_norm = work.s, work.p_norm
    d_cap = p_hat - 2.0 * pp_hat
    if d_cap <= 0.0:
        raise ValueError(f"p_hat − 2·pp_hat must be > 0, got {d_cap}")
    b_term = (
        0.5 * (p_hat + o_hat**2)
        + 0.5 * ds_hat**2 * q
        + ds_hat * (dt_hat * dq + m_ref * o_hat)
    )
    entropic = (
        0.5 * p * p_hat
        - delta_t * dt_hat
        - p_norm * pp_hat
        - o * o_hat
        - s * ds_hat
        + 0.5 * np.log(2.0 * np.pi / d_cap)
        + b_term / d_cap
    )
    return float(entropic + alpha * work.energetic_entropy(p, delta_t, o))


def _solve_state(work: _FpWork, config: FixedPointConfig, x0=None):
    """Iterate (p, δt, o) to the stationary point; returns state + extras."""
    s, q, p_norm = work.s, work.q_ref, work.p_norm
    m_ref, dq = work.m_ref, work.dq_ref
    p_floor = s**2 / q
    p_ceil = p_norm - 1e-14 * p_norm

    def clip_p(p):
        return min(max(p, p_floor), p_ceil)

    def fp_map(state):
        p, delta_t, o = state
        p = clip_p(p)
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            o_hat, dt_hat, p_hat = work.conjugate_integrals(p, delta_t, o)
            d_cap = 1.0 / (p_norm - p)
            ds_hat = (s * d_cap - dt_hat * dq - m_ref * o_hat) / q
            b_term = (0.5 * (p_hat + o_hat**2) + 0.5 * ds_hat**2 * q
                      + ds_hat * (dt_hat * dq + m_ref * o_hat))
            return np.array([
                clip_p(2.0 * b_term / d_cap**2),
                ds_hat * dq / d_cap,
                (o_hat + ds_hat * m_ref) / d_cap,
            ])

    if x0 is None:
        # Mid-slice start: α=0 solution pushed halfway into the slab.
        x0 = np.array([
            p_floor + 0.5 * (p_norm - p_floor),
            s * dq / q,
            s * m_ref / q,
        ])
    # Strong tilts at large distance drive the map into period-2 cycles at
    # the default damping; retry with progressively smaller steps, warm-
    # starting from wherever the previous attempt ended (even an oscillating
    # endpoint straddles the attractor).
    attempts = (
        (config.damping, min(config.max_iters, 4000)),
        (0.2 * config.damping, min(config.max_iters, 40000)),
        (0.04 * config.damping, config.max_iters),
    )
    state = np.asarray(x0, dtype=float)
    iters = 0
    converged = False
    for gamma, max_iters in attempts:
        attempt_cfg = FixedPointConfig(
            damping=gamma, tol=config.tol, max_iters=max_iters
        )
        state, used, converged = fixed_point(fp_map, state, attempt_cfg)
        iters += used
        if converged:
            break
    residual = float(np.max(np.abs(fp_map(state) - state)))
    return state, iters, converged, residual


def _conjugates_at(work: _FpWork, state):
    p, delta_t, o = state
    o_hat, dt_hat, p_hat = work.conjugate_integrals(p, delta_t, o)
    d_cap = 1.0 / (work.p_norm - p)
    ds_hat = (work.s * d_cap - dt_hat * work.dq_ref - work.m_ref * o_hat) / work.q_ref
    pp_hat = 0.5 * (p_hat - d_cap)
    return p_hat, pp_hat, o_hat, ds_hat, dt_hat


def solve_fp(
    alpha: float,
    delta: float,
    rho: float,
    params: FpParams,
    *,
    config: FixedPointConfig = FixedPointConfig(tol=1e-12),
    quad_k: int = DEFAULT_QUAD_K,
    x0=None,
    with_energy: bool = True,
) -> FpSolution:
    """Solve the probe stationarity at fixed (S, P, β, b̃).

    ``with_energy=False`` skips the two extra β-perturbed solves that back
    the finite-difference local energy (used by the β-calibration loop,
    which only needs the training error).
    """
    if alpha < 0:
        raise ValueError(f"alpha must be >= 0, got {alpha}")
    if not (delta > 0):
        raise ValueError(f"delta must be > 0, got {delta}")
    if not (0 < rho < 1):
        raise ValueError(f"rho must lie in (0, 1), got {rho}")
    work = _FpWork(alpha, delta, rho, params, quad_k)
    state, iters, converged, residual = _solve_state(work, config, x0)
    p, delta_t, o = (float(v) for v in state)
    conj = _conjugates_at(work, state)
    phi = fp_action(alpha, delta, rho, params,
                    (p, delta_t, o, *conj), quad_k=quad_k)
    train_err = work.train_error(p, delta_t, o)

    if with_energy:
        # Centered FD in β with re-solved saddles (envelope theorem: the
        # state dependence contributes at second order only).  The window is
        # shifted inward when β sits against a boundary of [0, BETA_CAP].
        db = max(params.beta * 1e-4, 1e-8)
        beta_up = min(params.beta + db, BETA_CAP)
        beta_dn = max(beta_up - 2.0 * db, 0.0)
        phis = []
        for beta_shift in (beta_up, beta_dn):
            pshift = FpParams(
                reference=params.reference, overlap_s=params.overlap_s,
                norm_p=params.norm_p, beta=beta_shift,
                constrained_bias=params.constrained_bias,
            )
            wshift = _FpWork(alpha, delta, rho, pshift, quad_k)
            st, _, _, _ = _solve_state(wshift, config, x0=state)
            cj = _conjugates_at(wshift, st)
            phis.append(fp_action(alpha, delta, rho, pshift,
                                  (*st, *cj), quad_k=quad_k))
        local_energy = -(phis[0] - phis[1]) / (beta_up - beta_dn)
    else:
        local_energy = train_err  # analytically equal; FD version on demand

    local_entropy = params.beta * local_energy + phi
    vol = slice_volume(params.overlap_s, params.norm_p, work.q_ref)
    return FpSolution(
        p=p, o=o, delta_t=delta_t, gamma=p - params.overlap_s**2 / work.q_ref,
        p_hat=float(conj[0]), pp_hat=float(conj[1]), o_hat=float(conj[2]),
        ds_hat=float(conj[3]), dt_hat=float(conj[4]),
        free_entropy=float(phi), local_energy=float(local_energy),
        local_entropy=float(local_entropy),
        local_entropy_norm=float(local_entropy - vol),
        train_err_w=float(train_err), beta=params.beta,
        overlap_s=params.overlap_s, norm_p=params.norm_p,
        converged=converged, residual=residual, iters=iters,
    )


def fp_train_error(
    alpha: float, delta: float, rho: float, params: FpParams,
    *, config: FixedPointConfig = FixedPointConfig(tol=1e-12),
    quad_k: int = DEFAULT_QUAD_K, x0=None,
) -> float:
    """Probe training error per unit N at the converged state (∈ [0, α])."""
    work = _FpWork(alpha, delta, rho, params, quad_k)
    state, _, _, _ = _solve_state(work, config, x0)
    return work.train_error(*state)


def calibrate_beta(
    alpha: float,
    delta: float,
    rho: float,
    reference: RsSolution,
    overlap_s: float,
    norm_p: float,
    target_train_err: float,
    *,
    constrained_bias: float = 0.0,
    tol: float = 1e-4,
    config: FixedPointConfig = FixedPointConfig(tol=1e-12),
    quad_k: int = DEFAULT_QUAD_K,
    beta_lo: float = 1e-3,
    beta_hi: float = 8.0,
) -> tuple[float, FpSolution]:
    """Find β with probe training error = target (± tol), by bisection.

    The training error is monotone decreasing in β.  Each probe is a fresh
    solve warm-started from the previous state.  Raises
    :class:`BetaCalibrationError` with the attainable (min, max) interval
    when the target lies outside what β ∈ [beta_lo, 700] can reach.
    """
    warm = {"state": None}

    def err_at(beta: float) -> float:
        params = FpParams(reference=reference, overlap_s=overlap_s,
                          norm_p=norm_p, beta=beta,
                          constrained_bias=constrained_bias)
        work = _FpWork(alpha, delta, rho, params, quad_k)
        state, _, _, _ = _solve_state(work, config, warm["state"])
        warm["state"] = state
        return work.train_error(*state)

    e_lo = err_at(beta_lo)  # largest attainable error (weakest tilt)
    if target_train_err > e_lo + tol:
        raise BetaCalibrationError(
            f"target {target_train_err:.6g} above attainable maximum "
            f"{e_lo:.6g} at beta={beta_lo:g}",
            attainable=(None, e_lo),
        )
    e_hi = err_at(beta_hi)
    while e_hi > target_train_err and beta_hi < BETA_CAP:
        beta_hi = min(2.0 * beta_hi, BETA_CAP)
        e_hi = err_at(beta_hi)
    if e_hi > target_train_err + tol:
        raise BetaCalibrationError(
            f"target {target_train_err:.6g} below attainable minimum "
            f"{e_hi:.6g} at beta={BETA_CAP:g}",
            attainable=(e_hi, e_lo),
        )
    lo, hi = beta_lo, beta_hi
    beta_mid, e_mid = beta_hi, e_hi
    for _ in range(200):
        beta_mid = 0.5 * (lo + hi)
        e_mid = err_at(beta_mid)
        if abs(e_mid - target_train_err) <= tol or (hi - lo) < 1e-12 * max(1.0, hi):
            break
        if e_mid > target_train_err:
            lo = beta_mid
        else:
            hi = beta_mid
    params = FpParams(reference=reference, overlap_s=overlap_s, norm_p=norm_p,
                      beta=beta_mid, constrained_bias=constrained_bias)
    sol = solve_fp(alpha, delta, rho, params, config=config, quad_k=quad_k,
                   x0=warm["state"])
    return beta_mid, sol


def default_distance_grid(n_points: int = 24, d_min: float = 1e-3,
                          d_max: float = 0.9) -> np.ndarray:
    """Log-spaced probe distances d = 1 − S/P."""
    return np.geomspace(d_min, d_max, n_points)


def normalized_local_entropy_curve(
    alpha: float,
    delta: float,
    rho: float,
    reference: RsSolution,
    *,
    cutoff_policy="reference",
    distances: np.ndarray | None = None,
    norm_p: float | None = None,
    constrained_bias: float | None = None,
    tol: float | None = None,
    config: FixedPointConfig = FixedPointConfig(tol=1e-12),
    quad_k: int = DEFAULT_QUAD_K,
) -> list[dict]:
    """Normalized local entropy vs distance at a calibrated error level.

    cutoff_policy: "reference" pins the probe's training error to the
    reference equilibrium's own training error; "oracle" to the centroid
    direction's error (:func:`oracle_error`); a float pins it explicitly
    (errors per unit N).  The probe norm defaults to the reference norm
    (P = Q) and the probe bias to the reference bias.

    The calibration tolerance defaults to 0.1% of the cutoff (floored at
    1e−11, capped at the absolute 1e−4 that :func:`calibrate_beta` uses on
    its own): cutoffs span many orders of magnitude across references, and
    a fixed absolute tolerance would leave near-zero cutoffs essentially
    unconstrained.

    At small distances the error constraint can go slack: the untilted
    probe (β → 0) already sits at or below the cutoff, because the slice
    hugs the reference.  Those rows report the most permissive tilt
    β = beta_lo, where the normalized entropy is ≈ 0 by construction —
    the correct d → 0 limit.

    Rows are solved from the largest distance inward, warm-starting the
    state; each row carries d, S, calibrated β, Φ, local energy, and
    normalized local entropy.
    """
    if distances is None:
        distances = default_distance_grid()
    p_norm = reference.q_norm if norm_p is None else norm_p
    b_tilde = reference.bias if constrained_bias is None else constrained_bias
    if cutoff_policy == "reference":
        eps_bar = rs_train_error(reference)
    elif cutoff_policy == "oracle":
        eps_bar = oracle_error(alpha, delta)
    elif isinstance(cutoff_policy, (int, float)):
        eps_bar, cutoff_policy = float(cutoff_policy), "explicit"
    else:
        raise ValueError(
            f"cutoff_policy must be 'reference', 'oracle', or a number, "
            f"got {cutoff_policy!r}"
        )
    if tol is None:
        tol = min(1e-4, max(1e-3 * eps_bar, 1e-11))
    beta_lo = 1e-3
    rows = []
    for d in sorted(np.asarray(distances, dtype=float), reverse=True):
        overlap_s = p_norm * (1.0 - d)
        try:
            beta, sol = calibrate_beta(
                alpha, delta, rho, reference, overlap_s, p_norm, eps_bar,
                constrained_bias=b_tilde, tol=tol, config=config,
                quad_k=quad_k, beta_lo=beta_lo,
            )
        except BetaCalibrationError as exc:
            if exc.attainable[0] is not None:
                raise  # target below even the β-cap floor: genuine failure
            beta = beta_lo
            params = FpParams(reference=reference, overlap_s=overlap_s,
                              norm_p=p_norm, beta=beta,
                              constrained_bias=b_tilde)
            sol = solve_fp(alpha, delta, rho, params, config=config,
                           quad_k=quad_k)
        rows.append({
            "alpha": alpha, "delta": delta, "rho": rho,
            "lambda_r": reference.lam, "b": b_tilde,
            "cutoff_policy": cutoff_policy, "eps_bar": eps_bar,
            "d": d, "S": overlap_s, "beta": beta,
            "free_entropy": sol.free_entropy,
            "local_energy": sol.local_energy,
            "local_entropy_norm": sol.local_entropy_norm,
            "converged": sol.converged,
        })
    rows.reverse()  # ascending in d for presentation
    return rows
