"""Deconvolution with known noise.

Pipeline: empirical CF of the noisy sample -> global threshold at
kappa_n / sqrt(n) -> spectral division by the noise CF with a clamp onto the
unit disc -> Fourier inversion at an adaptively selected cutoff.  The cutoff
is the last grid frequency where the raw empirical CF still clears the
threshold, capped at min(n^alpha, u_max).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import NoiseModel
from .errors import ConfigurationError
from .spectral import (
    FrequencyGrid,
    SpectralFunction,
    default_grid,
    ecf,
    fourier_invert,
)

__all__ = [
    "DeconvConfig",
    "CutoffResult",
    "threshold_ecf",
    "deconv_cf",
    "select_cutoff",
    "estimate_cf",
    "estimate",
]

_NOISE_CF_FLOOR = 1e-300


@dataclass(frozen=True)
class DeconvConfig:
    """Sample size, threshold constant kappa, cutoff exponent and grid."""

    n: int
    kappa: float
    alpha: float = 1.0
    grid: FrequencyGrid = field(default_factory=default_grid)

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("sample size n must be >= 1")
        if not self.kappa > 0:
            raise ConfigurationError("kappa must be positive")
        if not 0.0 < self.alpha <= 1.0:
            raise ConfigurationError("alpha must lie in (0, 1]")

    @property
    def kappa_n(self) -> float:
        """Threshold multiplier 1 + kappa * sqrt(log n)."""
        return 1.0 + self.kappa * math.sqrt(math.log(self.n))

    @property
    def threshold(self) -> float:
        """ECF modulus threshold kappa_n / sqrt(n)."""
        return self.kappa_n / math.sqrt(self.n)

    @property
    def cutoff_cap(self) -> float:
        """Upper end of the cutoff search range, min(n^alpha, u_max)."""
        return min(float(self.n) ** self.alpha, self.grid.u_max)


@dataclass(frozen=True)
class CutoffResult:
    """Selected cutoff with the threshold and crossing diagnostics."""

    m_hat: float
    threshold: float
    capped: bool = False
    never_crossed: bool = False


def _last_crossing(phi: SpectralFunction, threshold: float, cap: float) -> CutoffResult:
    """Largest nonnegative grid node <= cap where |phi| still >= threshold."""
    grid = phi.grid
    cap_idx = min(int(math.floor(cap / grid.h + 1e-9)), grid.n_half)
    mags = np.abs(phi.positive_values[:cap_idx + 1])
    above = np.nonzero(mags >= threshold)[0]
    if above.size == 0:
        return CutoffResult(0.0, threshold, capped=False, never_crossed=True)
    i = int(above[-1])
    return CutoffResult(
        float(grid.positive_nodes[i]), threshold, capped=(i == cap_idx),
        never_crossed=False,
    )


def threshold_ecf(phi_y: SpectralFunction, cfg: DeconvConfig) -> SpectralFunction:
    """Zero the ECF wherever its modulus falls below kappa_n / sqrt(n)."""
    mags = np.abs(phi_y.values)
    if mags.max() > 1.0 + 1e-9:
        raise ValueError("threshold_ecf expects an empirical CF with |values| <= 1")
    kept = np.where(mags >= cfg.threshold, phi_y.values, 0.0 + 0.0j)
    return SpectralFunction(phi_y.grid, kept, hermitian=phi_y.hermitian)


def deconv_cf(phi_y: SpectralFunction, noise: NoiseModel) -> SpectralFunction:
    """Divide by the noise CF and clamp onto the closed unit disc.

    r(u) = phi_y(u) / phi_eps(u) is replaced by r(u) / max(1, |r(u)|), which
    keeps the argument of r and never increases the distance to any point of
    the closed unit disc.
    """
    eps = noise.cf(phi_y.grid.nodes)
    if np.min(np.abs(eps)) < _NOISE_CF_FLOOR:
        raise ConfigurationError(
            "noise CF underflows on the grid; the grid is too wide for this noise"
        )
    r = phi_y.values / eps
    clamped = r / np.maximum(1.0, np.abs(r))
    return SpectralFunction(phi_y.grid, clamped, hermitian=phi_y.hermitian)


def select_cutoff(phi_y: SpectralFunction, cfg: DeconvConfig) -> CutoffResult:
    """Adaptive cutoff: last node of the raw ECF above the threshold.

    If no node qualifies the cutoff is 0 and ``never_crossed`` is set (the
    estimator is then identically zero); if the search endpoint qualifies,
    ``capped`` is set.
    """
    return _last_crossing(phi_y, cfg.threshold, cfg.cutoff_cap)


def estimate_cf(
    sample_y, noise: NoiseModel, cfg: DeconvConfig
) -> tuple[SpectralFunction, CutoffResult]:
    """Thresholded, deconvolved, clamped CF estimate plus cutoff diagnostics."""
    phi_y = ecf(sample_y, cfg.grid)
    cut = select_cutoff(phi_y, cfg)
    phi_x = deconv_cf(threshold_ecf(phi_y, cfg), noise)
    return phi_x, cut


def estimate(
    sample_y, noise: NoiseModel, cfg: DeconvConfig, x_grid
) -> tuple[np.ndarray, CutoffResult]:
    """Density estimate on ``x_grid`` at the adaptive cutoff."""
    phi_x, cut = estimate_cf(sample_y, noise, cfg)
    return fourier_invert(phi_x, cut.m_hat, x_grid), cut
