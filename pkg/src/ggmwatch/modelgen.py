"""Synthetic precision matrices, change scenarios and Gaussian stream sampling.

All generators return a validated :class:`PrecisionMatrix` (exactly symmetric,
positive definite, inverse standardized to unit variance where stated) and are
deterministic in their ``seed`` argument via a counter-based Philox stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from numpy.random import Generator, Philox

from .errors import DimensionMismatch, NoConvergence, NotPositiveDefinite

__all__ = [
    "PrecisionMatrix",
    "AssumptionReport",
    "ChangeScenario",
    "GaussianStream",
    "cholesky_factor",
    "invert_spd",
    "sym_eig",
    "assess",
    "gen_chain_precision",
    "gen_random_sparse",
    "gen_hub_precision",
    "make_block_change",
    "make_antidiag_change",
    "make_uniform_change",
    "sample_stream",
]


@dataclass(frozen=True)
class PrecisionMatrix:
    """A symmetric positive-definite precision matrix.

    Construct through :meth:`from_entries`, which validates exact symmetry
    and positive definiteness (via Cholesky) and freezes the array.
    """

    entries: np.ndarray
    is_unit_diag: bool

    @classmethod
    def from_entries(cls, entries: np.ndarray) -> "PrecisionMatrix":
        e = np.array(entries, dtype=np.float64)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise DimensionMismatch(f"expected a square matrix, got shape {e.shape}")
        if not np.array_equal(e, e.T):
            raise ValueError("precision matrix entries must be exactly symmetric")
        cholesky_factor(e)
        e.flags.writeable = False
        return cls(entries=e, is_unit_diag=bool(np.all(e.diagonal() == 1.0)))

    @property
    def p(self) -> int:
        return self.entries.shape[0]

    def sigma(self) -> np.ndarray:
        """The implied covariance matrix (the inverse)."""
        return invert_spd(self.entries)


@dataclass(frozen=True)
class AssumptionReport:
    """Observed regularity figures of a precision matrix: maximum row support
    size, smallest eigenvalue, and largest standardized off-diagonal entry."""

    d_max_observed: int
    lambda_min: float
    r_max_observed: float


@dataclass(frozen=True)
class ChangeScenario:
    """A single change point: ``n_burnin + t0`` pre-change samples followed by
    post-change samples up to ``n_burnin + horizon`` in total."""

    omega_pre: PrecisionMatrix
    omega_post: PrecisionMatrix
    t0: int
    n_burnin: int
    horizon: int

    def __post_init__(self) -> None:
        if self.omega_pre.p != self.omega_post.p:
            raise DimensionMismatch(
                f"pre ({self.omega_pre.p}) and post ({self.omega_post.p}) dimensions differ"
            )
        if not (1 <= self.t0 <= self.horizon):
            raise ValueError(f"t0 must lie in [1, horizon], got t0={self.t0}")
        if self.n_burnin < 0:
            raise ValueError("n_burnin must be nonnegative")

    @property
    def p(self) -> int:
        return self.omega_pre.p

    @property
    def total_length(self) -> int:
        return self.n_burnin + self.horizon


def _as_array(m) -> np.ndarray:
    return m.entries if isinstance(m, PrecisionMatrix) else np.asarray(m, dtype=np.float64)


def cholesky_factor(m: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L' = m; raises NotPositiveDefinite otherwise."""
    a = _as_array(m)
    scale = np.abs(a).max() if a.size else 0.0
    if np.abs(a - a.T).max(initial=0.0) > 1e-10 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric within tolerance")
    try:
        return np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc


def invert_spd(m) -> np.ndarray:
    """Inverse of an SPD matrix via its Cholesky factor, symmetrized by averaging."""
    a = _as_array(m)
    low = cholesky_factor(a)
    inv = scipy.linalg.cho_solve((low, True), np.eye(a.shape[0]))
    return 0.5 * (inv + inv.T)


def sym_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (ascending) and orthonormal eigenvectors of a symmetric matrix."""
    a = _as_array(m)
    scale = np.abs(a).max() if a.size else 0.0
    if np.abs(a - a.T).max(initial=0.0) > 1e-10 * max(scale, 1.0):
        raise ValueError("matrix is not symmetric within tolerance")
    try:
        vals, vecs = np.linalg.eigh(a)
    except np.linalg.LinAlgError as exc:
        raise NoConvergence(str(exc)) from exc
    return vals, vecs


def assess(omega: PrecisionMatrix, zero_tol: float = 1e-12) -> AssumptionReport:
    """Measure row support, smallest eigenvalue and standardized off-diagonal size."""
    e = omega.entries
    d_max = int((np.abs(e) > zero_tol).sum(axis=1).max())
    lam_min = float(sym_eig(e)[0][0])
    d = e.diagonal()
    off = np.abs(e) / np.sqrt(np.outer(d, d))
    np.fill_diagonal(off, 0.0)
    return AssumptionReport(
        d_max_observed=d_max, lambda_min=lam_min, r_max_observed=float(off.max())
    )


def gen_chain_precision(p: int, rho0: float) -> PrecisionMatrix:
    """Tridiagonal precision matrix with unit diagonal and ``rho0`` off-diagonals.

    ``|rho0| = 0.5`` is admitted: the matrix stays positive definite for any
    finite ``p`` (smallest eigenvalue ``1 - 2 rho0 cos(pi/(p+1)) > 0``).
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if abs(rho0) > 0.5 + 1e-12:
        raise ValueError(f"|rho0| = {abs(rho0)} exceeds 0.5; chain would be indefinite")
    e = np.eye(p)
    idx = np.arange(p - 1)
    e[idx, idx + 1] = rho0
    e[idx + 1, idx] = rho0
    return PrecisionMatrix.from_entries(e)


def _triangle_pairs(idx: np.ndarray, p: int) -> tuple[np.ndarray, np.ndarray]:
    # invert the row-major enumeration of {(i, j): i < j}
    idx = np.asarray(idx, dtype=np.int64)
    b = 2 * p - 1
    i = np.floor((b - np.sqrt(b * b - 8.0 * idx)) / 2.0).astype(np.int64)
    i = np.where(idx < i * (2 * p - i - 1) // 2, i - 1, i)
    i = np.where(idx >= (i + 1) * (2 * p - i - 2) // 2, i + 1, i)
    j = idx - i * (2 * p - i - 1) // 2 + i + 1
    return i, j


def _random_weights(rng: Generator, n: int) -> np.ndarray:
    # magnitudes uniform on [0.1, 0.4], signs symmetric
    mag = rng.uniform(0.1, 0.4, size=n)
    sgn = rng.integers(0, 2, size=n) * 2 - 1
    return mag * sgn


def _standardize(weights: np.ndarray, diag_inflation: float) -> PrecisionMatrix:
    """Shared tail of the random generators.

    The base diagonal is set to ``|lambda_min(weights)|`` so that the matrix is
    positive semidefinite before the inflation is added; the result is then
    rescaled so the implied covariance has unit diagonal.
    """
    p = weights.shape[0]
    lam_min = float(np.linalg.eigvalsh(weights)[0]) if np.any(weights) else 0.0
    raw = weights + (abs(lam_min) + diag_inflation) * np.eye(p)
    try:
        sig_raw = invert_spd(raw)
    except NotPositiveDefinite:
        raise NotPositiveDefinite(
            f"matrix not positive definite at diag_inflation={diag_inflation}; increase it"
        ) from None
    d = np.sqrt(sig_raw.diagonal())
    return PrecisionMatrix.from_entries(raw * np.outer(d, d))


def gen_random_sparse(
    p: int, row_density: float, diag_inflation: float, seed: int
) -> PrecisionMatrix:
    """Random sparse precision matrix with ``row_density * p`` off-diagonal
    nonzeros per row on average.

    ``round(p * round(row_density * p) / 2)`` undirected edges are drawn
    uniformly without replacement; nonzero weights have magnitudes uniform on
    [0.1, 0.4] with random signs. The diagonal is set to the absolute smallest
    eigenvalue of the weight matrix plus ``diag_inflation``, and the result is
    standardized to a unit-variance covariance.
    """
    if p < 1:
        raise ValueError("p must be >= 1")
    if not 0.0 <= row_density <= 1.0:
        raise ValueError(f"row_density must lie in [0, 1], got {row_density}")
    if diag_inflation <= 0:
        raise ValueError("diag_inflation must be positive")
    rng = Generator(Philox(key=seed))
    k = int(round(row_density * p))
    m = int(round(p * k / 2))
    weights = np.zeros((p, p))
    if m > 0:
        idx = np.sort(rng.choice(p * (p - 1) // 2, size=m, replace=False))
        i, j = _triangle_pairs(idx, p)
        weights[i, j] = _random_weights(rng, m)
        weights = weights + weights.T
    return _standardize(weights, diag_inflation)


def gen_hub_precision(
    p: int, n_hubs: int, spokes_per_hub: int, diag_inflation: float, seed: int
) -> PrecisionMatrix:
    """Precision matrix with ``n_hubs`` hub nodes each linked to
    ``spokes_per_hub`` random partners; weights and standardization as in
    :func:`gen_random_sparse`."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if n_hubs < 0 or spokes_per_hub < 0:
        raise ValueError("n_hubs and spokes_per_hub must be nonnegative")
    if n_hubs > 0 and spokes_per_hub > p - 1:
        raise ValueError("spokes_per_hub cannot exceed p - 1")
    if n_hubs * spokes_per_hub > p * (p - 1) // 2:
        raise ValueError("requested more edges than the graph can hold")
    if diag_inflation <= 0:
        raise ValueError("diag_inflation must be positive")
    rng = Generator(Philox(key=seed))
    weights = np.zeros((p, p))
    for hub in range(n_hubs):
        others = np.concatenate([np.arange(hub), np.arange(hub + 1, p)])
        spokes = rng.choice(others, size=spokes_per_hub, replace=False)
        vals = _random_weights(rng, spokes_per_hub)
        for s, v in zip(spokes, vals):
            if weights[hub, s] == 0.0:
                weights[hub, s] = v
                weights[s, hub] = v
    return _standardize(weights, diag_inflation)


def make_block_change(omega_pre: PrecisionMatrix, s: int, beta: float) -> PrecisionMatrix:
    """Add ``beta / s`` to every entry of the leading s-by-s block.

    The perturbation has Frobenius norm exactly ``|beta|``, independent of ``s``.
    """
    p = omega_pre.p
    if not 1 <= s <= p:
        raise ValueError(f"s must lie in [1, {p}], got {s}")
    e = np.array(omega_pre.entries)
    e[:s, :s] += beta / s
    return PrecisionMatrix.from_entries(e)


def make_antidiag_change(omega_pre: PrecisionMatrix, s: int, beta: float) -> PrecisionMatrix:
    """Add ``s`` new symmetric edges of weight ``beta`` joining node ``i`` to
    node ``p - s + i`` (identity blocks at the anti-corners)."""
    p = omega_pre.p
    if s < 0 or 2 * s > p:
        raise ValueError(f"s must lie in [0, p/2], got {s}")
    if s == 0:
        return omega_pre
    e = np.array(omega_pre.entries)
    idx = np.arange(s)
    e[idx, p - s + idx] += beta
    e[p - s + idx, idx] += beta
    return PrecisionMatrix.from_entries(e)


def make_uniform_change(omega_pre: PrecisionMatrix, beta: float) -> PrecisionMatrix:
    """Scale the whole precision matrix by ``1 / (1 + beta)``."""
    if beta <= -1:
        raise ValueError("beta must be > -1")
    return PrecisionMatrix.from_entries(omega_pre.entries / (1.0 + beta))


class GaussianStream:
    """Deterministic sample stream for a :class:`ChangeScenario`.

    Sample ``i`` (1-based) is drawn from the pre-change model when
    ``i <= n_burnin + t0`` and from the post-change model afterwards, as
    ``x = L z`` with ``L`` the Cholesky factor of the covariance and ``z``
    standard normal from a Philox stream keyed by ``seed``. Identical
    ``(scenario, seed)`` reproduce bit-identical streams regardless of how
    the draw is chunked.
    """

    def __init__(self, scenario: ChangeScenario, seed: int):
        self.scenario = scenario
        self.seed = seed
        self.cursor = 0
        self._rng = Generator(Philox(key=seed))
        self._l_pre = cholesky_factor(invert_spd(scenario.omega_pre.entries))
        self._l_post = cholesky_factor(invert_spd(scenario.omega_post.entries))
        self._change_at = scenario.n_burnin + scenario.t0  # last pre-change index, 1-based

    def take(self, count: int) -> np.ndarray:
        if count < 0:
            raise ValueError("count must be nonnegative")
        if self.cursor + count > self.scenario.total_length:
            raise ValueError(
                f"stream exhausted: requested up to sample {self.cursor + count}, "
                f"scenario ends at {self.scenario.total_length}"
            )
        p = self.scenario.p
        z = self._rng.standard_normal((count, p))
        out = np.empty((count, p))
        n_pre = min(count, max(0, self._change_at - self.cursor))
        out[:n_pre] = z[:n_pre] @ self._l_pre.T
        out[n_pre:] = z[n_pre:] @ self._l_post.T
        self.cursor += count
        return out


def sample_stream(scenario: ChangeScenario, seed: int, count: int) -> np.ndarray:
    """First ``count`` samples of the scenario's stream for this seed."""
    if count > scenario.total_length:
        raise ValueError(
            f"count {count} exceeds scenario length {scenario.total_length}"
        )
    return GaussianStream(scenario, seed).take(count)
