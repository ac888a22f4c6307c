"""Generative model, linear classifier, and exact finite-N observables.

Data model: a two-cloud Gaussian mixture in N dimensions.  A centroid v is
drawn once with i.i.d. unit-Gaussian coordinates; each of the P = round(αN)
patterns is

    ξ^μ = σ^μ · v/√N + √Δ · z^μ,       z^μ_i i.i.d. N(0,1),

where the label σ^μ is +1 with probability ρ and −1 otherwise.  The
classifier is ŝ(ξ) = sign(w·ξ/√N + b), invariant under the joint rescaling
(w, b) → (κw, κb), κ > 0; we fix sign(0) = +1.

Exact observables.  For a *fixed* classifier with overlaps m = w·v/N and
q = |w|²/N (and q > 0), the margin on a fresh pattern with label σ is
N(m + σb, Δq)-distributed, hence the generalization error is exactly

    ε_g = ρ H((m+b)/√(Δq)) + (1−ρ) H((m−b)/√(Δq)),

with H the Gaussian tail.  The same computation gives the expected
per-pattern test MSE on the margin-vs-target form ½(σ·out − 1)²,

    L_test = ½ [ Δq + (m−1)² + b² + 2b(2ρ−1)(m−1) ].

These are used to score simulations without Monte-Carlo noise.

Randomness is always drawn from counter-based Philox generators keyed by
(seed, stream), so independent components (datasets, initializations, probes)
can be reproduced independently of call order.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .numerics import gauss_tail

__all__ = [
    "MixtureParams",
    "Dataset",
    "LinearClassifier",
    "Overlaps",
    "make_rng",
    "sample_dataset",
    "margins",
    "predict",
    "count_errors",
    "mse_loss",
    "measure_overlaps",
    "gen_error_closed_form",
    "test_loss_mse",
    "save_dataset",
    "load_dataset",
    "export_margins_csv",
]

_MAGIC = b"FLGM0001"
_MASK64 = (1 << 64) - 1


def _stream_id(stream) -> int:
    """Map a stream label (int or str) to a stable uint64."""
    if isinstance(stream, (int, np.integer)):
        return int(stream) & _MASK64
    if isinstance(stream, str):
        # hashlib, not hash(): python's builtin string hash is salted per
        # process and would break cross-run reproducibility.
        digest = hashlib.blake2b(stream.encode("utf-8"), digest_size=8).digest()
        return int.from_bytes(digest, "big")
    raise TypeError(f"stream must be int or str, got {type(stream).__name__}")


def make_rng(seed: int, stream=0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, stream).

    Distinct (seed, stream) pairs give statistically independent streams;
    identical pairs give bit-identical draws regardless of what other
    generators exist in the process.
    """
    key = np.array([int(seed) & _MASK64, _stream_id(stream)], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


@dataclass(frozen=True)
class MixtureParams:
    """Mixture description: dimension N, load α = P/N, noise Δ, label bias ρ."""

    n_dim: int
    alpha: float
    delta: float
    rho: float

    def __post_init__(self) -> None:
        problems = []
        if self.n_dim < 1:
            problems.append(f"n_dim must be >= 1, got {self.n_dim}")
        if not (self.alpha > 0):
            problems.append(f"alpha must be > 0, got {self.alpha}")
        if not (self.delta > 0):
            problems.append(f"delta must be > 0, got {self.delta}")
        if not (0.0 < self.rho < 1.0):
            problems.append(f"rho must lie in (0, 1), got {self.rho}")
        if problems:
            raise ValueError("; ".join(problems))

    @property
    def n_patterns(self) -> int:
        return int(round(self.alpha * self.n_dim))


@dataclass(frozen=True)
class Dataset:
    """A sampled training set together with its generative metadata."""

    centroid: np.ndarray  # (N,)
    labels: np.ndarray    # (P,) values in {-1, +1}
    patterns: np.ndarray  # (P, N)
    delta: float
    rho: float
    seed: int

    def __post_init__(self) -> None:
        if self.centroid.ndim != 1 or self.patterns.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("centroid must be (N,), labels (P,), patterns (P, N)")
        if self.patterns.shape != (self.labels.size, self.centroid.size):
            raise ValueError(
                f"patterns shape {self.patterns.shape} inconsistent with "
                f"P={self.labels.size}, N={self.centroid.size}"
            )

    @property
    def n_dim(self) -> int:
        return self.centroid.size

    @property
    def n_patterns(self) -> int:
        return self.labels.size

    @property
    def alpha(self) -> float:
        return self.n_patterns / self.n_dim


@dataclass(frozen=True)
class LinearClassifier:
    """Weights and bias of ŝ(ξ) = sign(w·ξ/√N + b)."""

    weights: np.ndarray  # (N,)
    bias: float = 0.0


@dataclass(frozen=True)
class Overlaps:
    """Alignment m = w·v/N and squared norm density q = |w|²/N."""

    m: float
    q_norm: float


def sample_dataset(params: MixtureParams, seed: int) -> Dataset:
    """Draw (centroid, labels, patterns) for the given mixture.

    Draw order is fixed (centroid, then labels, then noise) so a given
    (params, seed) pair always produces bit-identical data.
    """
    if params.n_patterns < 1:
        raise ValueError(
            f"alpha*n_dim rounds to {params.n_patterns} patterns; need >= 1"
        )
    rng = make_rng(seed, "dataset")
    n, p = params.n_dim, params.n_patterns
    centroid = rng.standard_normal(n)
    labels = np.where(rng.random(p) < params.rho, 1.0, -1.0)
    noise = rng.standard_normal((p, n))
    patterns = labels[:, None] * centroid[None, :] / np.sqrt(n) + np.sqrt(params.delta) * noise
    return Dataset(
        centroid=centroid,
        labels=labels,
        patterns=patterns,
        delta=params.delta,
        rho=params.rho,
        seed=seed,
    )


def margins(clf: LinearClassifier, patterns: np.ndarray) -> np.ndarray:
    """Pre-activation w·ξ/√N + b for each row of ``patterns``."""
    n = clf.weights.size
    return patterns @ clf.weights / np.sqrt(n) + clf.bias


def predict(clf: LinearClassifier, patterns: np.ndarray) -> np.ndarray:
    """±1 decisions; ties (exactly zero margin) resolve to +1."""
    return np.where(margins(clf, patterns) >= 0.0, 1.0, -1.0)


def count_errors(clf: LinearClassifier, data: Dataset) -> int:
    """Number of training patterns the classifier mislabels."""
    return int(np.sum(predict(clf, data.patterns) != data.labels))


def mse_loss(clf: LinearClassifier, data: Dataset) -> float:
    """Total squared-margin loss Σ_μ ½ (w·ξ^μ/√N + b − σ^μ)²."""
    r = margins(clf, data.patterns) - data.labels
    return 0.5 * float(r @ r)


def measure_overlaps(clf: LinearClassifier, centroid: np.ndarray) -> Overlaps:
    """Empirical (m, q) of a weight vector against the true centroid."""
    n = clf.weights.size
    return Overlaps(
        m=float(clf.weights @ centroid) / n,
        q_norm=float(clf.weights @ clf.weights) / n,
    )


def gen_error_closed_form(
    m: float, q_norm: float, bias: float, delta: float, rho: float
) -> float:
    """Exact generalization error of a fixed (m, q, b) classifier."""
    if not (q_norm > 0.0):
        raise ValueError(f"q_norm must be > 0, got {q_norm}")
    if not (delta > 0.0):
        raise ValueError(f"delta must be > 0, got {delta}")
    scale = np.sqrt(delta * q_norm)
    return float(
        rho * gauss_tail((m + bias) / scale)
        + (1.0 - rho) * gauss_tail((m - bias) / scale)
    )


def test_loss_mse(m: float, q_norm: float, bias: float, delta: float, rho: float) -> float:
    """Expected per-pattern test MSE ½ E(σ·out − 1)² for fixed (m, q, b)."""
    return 0.5 * (
        delta * q_norm
        + (m - 1.0) ** 2
        + bias**2
        + 2.0 * bias * (2.0 * rho - 1.0) * (m - 1.0)
    )


def save_dataset(data: Dataset, path) -> None:
    """Write a dataset to ``path`` (magic, header, then raw little-endian f64).

    Layout: 8-byte magic; int64[3] = (N, P, seed); float64[2] = (Δ, ρ);
    centroid (N f64); labels (P f64); patterns (P·N f64, row-major).
    """
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(_MAGIC)
        np.array([data.n_dim, data.n_patterns, data.seed], dtype="<i8").tofile(fh)
        np.array([data.delta, data.rho], dtype="<f8").tofile(fh)
        data.centroid.astype("<f8").tofile(fh)
        data.labels.astype("<f8").tofile(fh)
        np.ascontiguousarray(data.patterns).astype("<f8").tofile(fh)


def load_dataset(path) -> Dataset:
    """Read a dataset written by :func:`save_dataset`."""
    path = Path(path)
    with path.open("rb") as fh:
        magic = fh.read(len(_MAGIC))
        if magic != _MAGIC:
            raise ValueError(f"{path}: not a flatlab dataset file (bad magic {magic!r})")
        n, p, seed = (int(v) for v in np.fromfile(fh, dtype="<i8", count=3))
        delta, rho = (float(v) for v in np.fromfile(fh, dtype="<f8", count=2))
        centroid = np.fromfile(fh, dtype="<f8", count=n)
        labels = np.fromfile(fh, dtype="<f8", count=p)
        patterns = np.fromfile(fh, dtype="<f8", count=p * n)
        if centroid.size != n or labels.size != p or patterns.size != p * n:
            raise ValueError(f"{path}: truncated dataset file")
    return Dataset(
        centroid=centroid,
        labels=labels,
        patterns=patterns.reshape(p, n),
        delta=delta,
        rho=rho,
        seed=seed,
    )


def export_margins_csv(clf: LinearClassifier, data: Dataset, path) -> None:
    """Write per-pattern (label, margin) rows for external inspection."""
    marg = margins(clf, data.patterns)
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write("label,margin\n")
        for lab, mg in zip(data.labels, marg):
            fh.write(f"{int(lab)},{mg!r}\n")
