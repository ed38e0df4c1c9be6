"""Comparator bandwidth selectors: the penalized rule and the Monte Carlo oracle.

The penalized selector minimizes  -||f_hat_m||^2 + pen(m)  over cutoffs m,
with pen(m) = K (Delta(m)/log(m+1))^2 Delta(m)/n and
Delta(m) = (1/2pi) int_{-m}^{m} |phi_eps(u)|^{-2} du the noise energy, which
is known for a known noise.  The oracle selector minimizes the Monte Carlo
mean of the exact L2 risk over fresh replicates and is available only in
simulation, where the truth is known.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .deconvolution import deconv_cf
from .decompounding import CpConfig, decompound_cf, sample_increments
from .distributions import Cauchy, DensityModel, Gamma, NoiseModel
from .errors import ConfigurationError
from .spectral import (
    FrequencyGrid,
    SpectralFunction,
    cumulative_power,
    cumulative_sq_error,
    default_grid,
    ecf,
)

__all__ = [
    "PenaltyConfig",
    "OracleConfig",
    "noise_energy",
    "max_feasible_cutoff",
    "penalty_values",
    "penalized_select",
    "oracle_select",
]


@dataclass(frozen=True)
class PenaltyConfig:
    """Penalty constant(s) and search grid for the penalized selector.

    Exactly one penalty constant is active per run: K, or, when
    ``log_variant`` is set, K_tilde * (log n)^2.5.
    """

    K: float = 2.0
    log_variant: bool = False
    K_tilde: float = 0.3
    m_search_grid: tuple[float, ...] | None = None
    grid: FrequencyGrid = field(default_factory=default_grid)

    def __post_init__(self):
        if self.K < 0 or self.K_tilde < 0:
            raise ConfigurationError("penalty constants must be nonnegative")

    def constant(self, n: int) -> float:
        if self.log_variant:
            return self.K_tilde * math.log(n) ** 2.5
        return self.K


@dataclass(frozen=True)
class OracleConfig:
    """Cutoff grid and replicate budget for the Monte Carlo oracle."""

    m_grid: tuple[float, ...] | None = None
    replicates: int = 200
    common_random_numbers: bool = True
    grid: FrequencyGrid = field(default_factory=default_grid)

    def __post_init__(self):
        if self.replicates < 1:
            raise ConfigurationError("oracle needs at least one replicate")
        if self.m_grid is not None and len(self.m_grid) == 0:
            raise ConfigurationError("oracle m_grid must be nonempty")


def _noise_energy_curve(noise: NoiseModel, ms: np.ndarray) -> np.ndarray:
    """Delta(m) = (1/2pi) int_{-m}^{m} |phi_eps|^{-2} du, vectorized over m."""
    ms = np.asarray(ms, dtype=float)
    if noise.is_direct:
        return ms / math.pi
    d = noise.density
    if isinstance(d, Gamma) and float(d.shape).is_integer():
        # |phi_eps|^{-2} = (1 + theta^2 u^2)^k, a polynomial
        k = int(d.shape)
        out = np.zeros_like(ms)
        for j in range(k + 1):
            out += (
                math.comb(k, j)
                * d.scale ** (2 * j)
                * ms ** (2 * j + 1)
                / (2 * j + 1)
            )
        return out / math.pi
    if isinstance(d, Cauchy):
        # |phi_eps|^{-2} = exp(2 scale |u|)
        s = d.scale
        return (np.exp(2.0 * s * ms) - 1.0) / (2.0 * math.pi * s)
    # fallback: fine composite trapezoid of |phi_eps|^{-2} on [0, max m]
    top = float(ms.max())
    if top == 0.0:
        return np.zeros_like(ms)
    n_steps = min(2_000_000, max(2000, int(top / 1e-3)))
    us = np.linspace(0.0, top, n_steps + 1)
    integrand = 1.0 / np.abs(noise.cf(us)) ** 2
    cum = cumulative_trapezoid(integrand, us, initial=0.0) / math.pi
    return np.interp(ms, us, cum)


def noise_energy(noise: NoiseModel, m: float) -> float:
    """Noise energy Delta(m); closed form where the noise admits one."""
    m = float(m)
    if m < 0:
        raise ValueError("m must be nonnegative")
    return float(_noise_energy_curve(noise, np.array([m]))[0])


def max_feasible_cutoff(noise: NoiseModel, n: int) -> float:
    """Largest integer cutoff M_n with Delta(M_n) <= 2n.

    If already Delta(1) > 2n, falls back to the continuous solution of
    Delta(m) = 2n by bisection.  Warns when Delta(M_n) < n, i.e. when no
    integer lands in the target window [n, 2n].
    """
    bound = 2.0 * float(n)
    if noise_energy(noise, 1.0) > bound:
        lo, hi = 0.0, 1.0
        for _ in range(80):
            mid = (lo + hi) / 2.0
            if noise_energy(noise, mid) <= bound:
                lo = mid
            else:
                hi = mid
        return lo
    # exponential then binary search over integers
    hi = 2
    while noise_energy(noise, float(hi)) <= bound:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if noise_energy(noise, float(mid)) <= bound:
            lo = mid
        else:
            hi = mid
    if noise_energy(noise, float(lo)) < float(n):
        warnings.warn(
            f"no integer cutoff reaches the feasibility window: Delta(M_n={lo}) < n",
            RuntimeWarning,
            stacklevel=2,
        )
    return float(lo)


def penalty_values(
    noise: NoiseModel, n: int, ms: np.ndarray, constant: float
) -> np.ndarray:
    """pen(m) = constant * (Delta(m)/log(m+1))^2 * Delta(m) / n, pen(0) = 0."""
    ms = np.asarray(ms, dtype=float)
    delta_m = _noise_energy_curve(noise, ms)
    out = np.zeros_like(ms)
    pos = ms > 0
    out[pos] = (
        constant
        * (delta_m[pos] / np.log(ms[pos] + 1.0)) ** 2
        * delta_m[pos]
        / float(n)
    )
    return out


def penalized_select(sample_y, noise: NoiseModel, n: int, cfg: PenaltyConfig) -> float:
    """Penalized cutoff choice; ties break toward the smallest cutoff."""
    grid = cfg.grid
    phi_x = deconv_cf(ecf(sample_y, grid), noise)
    norm_sq = cumulative_power(phi_x) / (2.0 * math.pi)

    m_cap = max_feasible_cutoff(noise, n)
    if cfg.m_search_grid is None:
        ms = grid.positive_nodes
    else:
        ms = np.asarray(cfg.m_search_grid, dtype=float)
        if np.any(ms < 0):
            raise ConfigurationError("search cutoffs must be nonnegative")
    feasible = ms[ms <= m_cap + 1e-12]
    if feasible.size == 0:
        raise ConfigurationError("no search cutoff is feasible (all exceed M_n)")
    idx = np.array([grid.snap_positive(m) for m in feasible])
    snapped = grid.positive_nodes[idx]
    objective = -norm_sq[idx] + penalty_values(noise, n, snapped, cfg.constant(n))
    return float(snapped[int(np.argmin(objective))])


def oracle_select(
    truth: DensityModel,
    noise_or_cp: NoiseModel | CpConfig,
    n: int | None,
    cfg: OracleConfig,
    rng: np.random.Generator | None = None,
) -> tuple[float, np.ndarray]:
    """Cutoff minimizing the Monte Carlo mean L2 risk, plus the risk curve.

    ``noise_or_cp`` selects the problem: a NoiseModel runs the deconvolution
    estimator (spectral division without thresholding), a CpConfig runs the
    decompounding estimator.  ``n = None`` evaluates the noise-free
    infinite-data idealization where the estimated CF equals the truth, so
    the curve is the pure bias tail_energy(m)/(2pi).  With common random
    numbers one replicate sample serves every cutoff, making the curve
    deterministic given (rng state, replicates).
    """
    is_cp = isinstance(noise_or_cp, CpConfig)
    grid = noise_or_cp.grid if is_cp else cfg.grid
    if cfg.m_grid is None:
        ms = grid.positive_nodes
    else:
        ms = np.asarray(sorted(cfg.m_grid), dtype=float)
    idx = np.array([grid.snap_positive(m) for m in ms])
    snapped = grid.positive_nodes[idx]
    tails = np.array([truth.tail_energy(m) for m in snapped])

    if n is None:
        curve = tails / (2.0 * math.pi)
        return float(snapped[int(np.argmin(curve))]), curve

    if rng is None:
        rng = np.random.default_rng(0)
    truth_pos = truth.cf(grid.positive_nodes)

    def replicate_cum() -> np.ndarray:
        if is_cp:
            cp = noise_or_cp if noise_or_cp.n == n else replace(noise_or_cp, n=n)
            inc = sample_increments(truth, cp, rng)
            phi_est = decompound_cf(inc)
        else:
            x = truth.sample(rng, n)
            eps = noise_or_cp.sample(rng, n)
            phi_est = deconv_cf(ecf(x + eps, grid), noise_or_cp)
        return cumulative_sq_error(phi_est, truth_pos)

    if cfg.common_random_numbers:
        acc = np.zeros(grid.n_half + 1)
        for _ in range(cfg.replicates):
            acc += replicate_cum()
        curve = (acc[idx] / cfg.replicates + tails) / (2.0 * math.pi)
    else:
        curve = np.empty(len(idx))
        for j, k in enumerate(idx):
            total = 0.0
            for _ in range(cfg.replicates):
                total += replicate_cum()[k]
            curve[j] = (total / cfg.replicates + tails[j]) / (2.0 * math.pi)
    return float(snapped[int(np.argmin(curve))]), curve
