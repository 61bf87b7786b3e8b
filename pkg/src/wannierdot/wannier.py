"""Real, localized 1D Wannier orbitals in the projection gauge, and their 2D products."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_hermite

from .bands import BandStructure1D
from .device import DeviceConfig, NumericsConfig

logger = logging.getLogger(__name__)

TAIL_TOL = 1e-4
GAUGE_TOL = 1e-3


class WannierError(RuntimeError):
    pass


@dataclass(frozen=True)
class WannierOrbital1D:
    band: int
    x: np.ndarray  # nm, measured from the dot centre
    amplitude: np.ndarray  # 1/sqrt(nm)
    tail_ratio: float
    points_per_period: int

    @property
    def grid_step(self) -> float:
        return float(self.x[1] - self.x[0])

    def norm(self) -> float:
        return float(np.sum(self.amplitude**2) * self.grid_step)

    def parity(self) -> float:
        """<w(-x)|w(x)>, i.e. +1 for even and -1 for odd orbitals."""
        return float(np.sum(self.amplitude[::-1] * self.amplitude) * self.grid_step)

    def overlap(self, other: "WannierOrbital1D", shift_sites: int = 0) -> float:
        """<w_self(x) | w_other(x - shift_sites * lam)> on the shared grid."""
        if self.x.shape != other.x.shape or not np.isclose(self.grid_step, other.grid_step):
            raise ValueError("orbitals sampled on different grids")
        s = shift_sites * self.points_per_period
        a, b = self.amplitude, other.amplitude
        if s > 0:
            return float(np.sum(a[s:] * b[:-s]) * self.grid_step)
        if s < 0:
            return float(np.sum(a[:s] * b[-s:]) * self.grid_step)
        return float(np.sum(a * b) * self.grid_step)


def oscillator_length(cfg: DeviceConfig) -> float:
    """Length of the harmonic approximation to a potential minimum.

    Capped at lam / 3, which also covers the free-particle limit.
    """
    cap = cfg.lambda_nm / 3.0
    if cfg.v0_mev <= 0:
        return cap
    hw = (2 * math.pi / cfg.lambda_nm) * math.sqrt(2 * cfg.kinetic_prefactor * cfg.v0_mev)
    return min(math.sqrt(2 * cfg.kinetic_prefactor / hw), cap)


def real_grid(cfg: DeviceConfig, num: NumericsConfig) -> np.ndarray:
    h = cfg.lambda_nm / num.real_grid
    half = num.real_span * num.real_grid // 2
    return np.arange(-half, half + 1) * h


def _trial_projection(q, coefs, order, ell):
    # <g|psi_k> up to a positive constant; g is the oscillator state of given order
    g = (1j) ** order * eval_hermite(order, q * ell) * np.exp(-0.5 * (q * ell) ** 2)
    return np.sum(g * coefs, axis=1)


def build_wannier_1d(bs: BandStructure1D, band: int, cfg: DeviceConfig, num: NumericsConfig,
                     check_tail: bool = True) -> WannierOrbital1D:
    """Wannier orbital of 1D band ``band`` (1-based) centred on a potential minimum.

    Bloch phases are fixed so that each Bloch state has a real, positive
    overlap with a harmonic-oscillator trial orbital of the band's parity.
    Raises :class:`WannierError` if that overlap nearly vanishes somewhere in
    the zone, or (with ``check_tail``) if the orbital has not decayed to 1e-4
    of its peak at the edge of the sampled span.
    """
    if not 1 <= band <= bs.nbands:
        raise ValueError(f"band {band} not in band structure (have {bs.nbands})")
    ell = oscillator_length(cfg)
    coefs = bs.coefficients[:, :, band - 1]
    q = bs.k[:, None] + bs.G[None, :]
    proj = _trial_projection(q, coefs, band - 1, ell)
    mag = np.abs(proj)
    if mag.min() < GAUGE_TOL * mag.max():
        raise WannierError(f"trial projection nearly vanishes for band {band} (min/max {mag.min() / mag.max():.1e})")
    phase = np.conj(proj) / mag
    weighted = (bs.weights * phase)[:, None] * coefs  # (nk, nG)

    x = real_grid(cfg, num)
    # sum_k sum_m weighted[k, m] exp(i (k + G_m) x) / sqrt(lam)
    partial = weighted.T @ np.exp(1j * np.outer(bs.k, x))  # (nG, nx)
    amp = np.sum(np.exp(1j * np.outer(bs.G, x)) * partial, axis=0) / math.sqrt(cfg.lambda_nm)

    peak = np.argmax(np.abs(amp))
    amp = amp * np.abs(amp[peak]) / amp[peak]
    if np.max(np.abs(amp.imag)) > 1e-6 * np.abs(amp[peak]):
        raise WannierError(f"band {band} orbital is not real after gauge fixing")
    amp = amp.real.copy()
    # sign convention: even orbitals positive at the centre, odd ones rising through it
    centre = len(x) // 2
    ref = amp[centre] if band % 2 else amp[centre + 1]
    if ref < 0:
        amp = -amp

    tail = float(max(abs(amp[0]), abs(amp[-1])) / np.max(np.abs(amp)))
    if check_tail and tail > TAIL_TOL:
        raise WannierError(
            f"band {band} orbital not localized within {num.real_span} periods "
            f"(edge/peak = {tail:.1e}); increase numerics.real_span")
    return WannierOrbital1D(band=band, x=x, amplitude=amp, tail_ratio=tail, points_per_period=num.real_grid)


def build_wannier_set(bs: BandStructure1D, cfg: DeviceConfig, num: NumericsConfig) -> list[WannierOrbital1D]:
    """Orbitals for bands 1..orbital_cutoff; poor localization is only logged here."""
    out = []
    for n in range(1, num.orbital_cutoff + 1):
        w = build_wannier_1d(bs, n, cfg, num, check_tail=False)
        if w.tail_ratio > TAIL_TOL:
            logger.warning("Wannier orbital of band %d has edge/peak %.1e", n, w.tail_ratio)
        out.append(w)
    return out


@dataclass(frozen=True)
class Wannier2D:
    wx: WannierOrbital1D
    wy: WannierOrbital1D

    @property
    def index(self) -> tuple[int, int]:
        return (self.wx.band, self.wy.band)

    def norm(self) -> float:
        return self.wx.norm() * self.wy.norm()

    def values(self) -> np.ndarray:
        """Samples on the (x, y) grid, indexed [ix, iy]."""
        return np.outer(self.wx.amplitude, self.wy.amplitude)

    def overlap(self, other: "Wannier2D", shift=(0, 0)) -> float:
        return self.wx.overlap(other.wx, shift[0]) * self.wy.overlap(other.wy, shift[1])


def wannier_2d(wx: WannierOrbital1D, wy: WannierOrbital1D) -> Wannier2D:
    if wx.x.shape != wy.x.shape or not np.allclose(wx.x, wy.x):
        raise ValueError("1D orbitals must share a grid")
    return Wannier2D(wx, wy)


def realspace_hopping(w: WannierOrbital1D, other: WannierOrbital1D, cfg: DeviceConfig, shift_sites: int) -> float:
    """<w|H0|other shifted by shift_sites> in real space (1D, fourth-order finite differences)."""
    h = w.grid_step
    f = other.amplitude
    lap = np.zeros_like(f)
    lap[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * h * h)
    pot = -cfg.v0_mev * np.cos(2 * math.pi * w.x / cfg.lambda_nm)
    hf = -cfg.kinetic_prefactor * lap + pot * f
    hw = WannierOrbital1D(other.band, other.x, hf, other.tail_ratio, other.points_per_period)
    return w.overlap(hw, shift_sites)
