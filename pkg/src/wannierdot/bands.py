"""Bloch bands of the separable cosine lattice potential.

The 1D problem is solved in a plane-wave basis; 2D bands are sums of two 1D
dispersions. Brillouin-zone integrals use Gauss-Legendre quadrature on the two
half zones ``[-pi/lam, 0]`` and ``[0, pi/lam]`` so that band touchings at
``k = 0`` and at the zone edge sit on panel boundaries.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh_tridiagonal

from .device import ConvergenceError, DeviceConfig, NumericsConfig

logger = logging.getLogger(__name__)

CUTOFF_DRIFT_TOL = 1e-6
QUADRATURE_DRIFT_TOL = 1e-8


def bz_quadrature(lambda_nm: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights (summing to 1) for averages over the 1D Brillouin zone."""
    x, w = np.polynomial.legendre.leggauss(n // 2)
    half = np.pi / lambda_nm / 2
    k = np.concatenate([(x - 1) * half, (x + 1) * half])
    weights = np.concatenate([w, w]) / 4.0
    return k, weights


def _tridiagonal(k, G, prefactor, v0):
    diag = prefactor * (k + G) ** 2
    off = np.full(len(G) - 1, -v0 / 2.0)
    return diag, off


def bloch_solve(k_points, cfg: DeviceConfig, cutoff: int, nbands: int, vectors=True):
    """Diagonalize H(k) at each k.

    The Hamiltonian is written about a potential minimum, where the lattice
    potential reads ``-V0 cos(2 pi u / lam)``; its spectrum equals that of
    ``+V0 cos`` about the origin and the eigenvectors are then directly the
    plane-wave coefficients of dot-centred Bloch functions.
    """
    m = np.arange(-cutoff, cutoff + 1)
    G = 2 * np.pi * m / cfg.lambda_nm
    k_points = np.atleast_1d(k_points)
    energies = np.empty((len(k_points), nbands))
    coefs = np.empty((len(k_points), len(G), nbands)) if vectors else None
    for i, k in enumerate(k_points):
        d, e = _tridiagonal(k, G, cfg.kinetic_prefactor, cfg.v0_mev)
        if vectors:
            vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, nbands - 1))
            # deterministic sign: largest component positive
            idx = np.argmax(np.abs(vecs), axis=0)
            vecs = vecs * np.sign(vecs[idx, np.arange(nbands)])
            coefs[i] = vecs
        else:
            vals = eigh_tridiagonal(d, e, eigvals_only=True, select="i", select_range=(0, nbands - 1))
        energies[i] = vals
    return G, energies, coefs


@dataclass(frozen=True)
class BandStructure1D:
    lambda_nm: float
    k: np.ndarray  # quadrature nodes, 1/nm
    weights: np.ndarray  # BZ-average weights, sum to 1
    energies: np.ndarray  # (nk, nbands), meV
    G: np.ndarray  # reciprocal vectors, 1/nm
    coefficients: np.ndarray  # (nk, nG, nbands), dot-centred
    edge_energies: np.ndarray  # (2, nbands) at k = 0 and k = pi/lam
    cutoff_drift: float
    quadrature_drift: np.ndarray  # per band, max over |j| <= 2
    half_k: np.ndarray
    half_weights: np.ndarray
    half_energies: np.ndarray

    @property
    def nbands(self) -> int:
        return self.energies.shape[1]

    @property
    def converged(self) -> bool:
        return self.cutoff_drift <= CUTOFF_DRIFT_TOL

    def fourier(self, band: int, j: int) -> float:
        """BZ Fourier coefficient of band ``band`` (1-based) at displacement ``j`` sites."""
        return float(np.sum(self.weights * self.energies[:, band - 1] * np.cos(self.k * j * self.lambda_nm)))

    def onsite(self, band: int) -> float:
        return self.fourier(band, 0)

    def band_min(self, band: int) -> float:
        return float(min(self.energies[:, band - 1].min(), self.edge_energies[:, band - 1].min()))

    def band_max(self, band: int) -> float:
        return float(max(self.energies[:, band - 1].max(), self.edge_energies[:, band - 1].max()))

    def delta_sum(self, j: int) -> float:
        """Quadrature of the BZ average of exp(i k j lam); 1 for j = 0, ~0 otherwise."""
        return float(np.sum(self.weights * np.cos(self.k * j * self.lambda_nm)))


def solve_bands_1d(cfg: DeviceConfig, num: NumericsConfig, nbands: int | None = None, strict: bool = True) -> BandStructure1D:
    """Plane-wave band structure of the 1D cosine potential.

    Retains ``orbital_cutoff + 2`` bands by default. The cutoff is checked by
    re-solving at ``plane_wave_cutoff - 4``; a relative drift above 1e-6
    raises :class:`ConvergenceError` when ``strict``.
    """
    if nbands is None:
        nbands = num.orbital_cutoff + 2
    k, weights = bz_quadrature(cfg.lambda_nm, num.k_grid)
    G, energies, coefs = bloch_solve(k, cfg, num.plane_wave_cutoff, nbands)
    _, coarse, _ = bloch_solve(k, cfg, num.plane_wave_cutoff - 4, nbands, vectors=False)
    scale = np.maximum(np.abs(energies), cfg.kinetic_prefactor / cfg.lambda_nm**2)
    drift = float(np.max(np.abs(coarse - energies) / scale))
    edges = np.array([0.0, np.pi / cfg.lambda_nm])
    _, edge_energies, _ = bloch_solve(edges, cfg, num.plane_wave_cutoff, nbands, vectors=False)

    hk, hw = bz_quadrature(cfg.lambda_nm, num.k_grid // 2 if num.k_grid >= 8 else num.k_grid)
    _, h_energies, _ = bloch_solve(hk, cfg, num.plane_wave_cutoff, nbands, vectors=False)
    qdrift = np.zeros(nbands)
    for j in range(3):
        full = np.sum(weights[:, None] * energies * np.cos(k * j * cfg.lambda_nm)[:, None], axis=0)
        half = np.sum(hw[:, None] * h_energies * np.cos(hk * j * cfg.lambda_nm)[:, None], axis=0)
        ref = np.maximum(np.abs(full), cfg.kinetic_prefactor / cfg.lambda_nm**2)
        qdrift = np.maximum(qdrift, np.abs(full - half) / ref)

    bs = BandStructure1D(
        lambda_nm=cfg.lambda_nm, k=k, weights=weights, energies=energies, G=G,
        coefficients=coefs, edge_energies=edge_energies, cutoff_drift=drift,
        quadrature_drift=qdrift, half_k=hk, half_weights=hw, half_energies=h_energies,
    )
    if not bs.converged:
        msg = f"band energies drift {drift:.2e} between plane-wave cutoffs {num.plane_wave_cutoff} and {num.plane_wave_cutoff - 4}"
        if strict:
            raise ConvergenceError(msg)
        warnings.warn(msg, RuntimeWarning)
    return bs


# -- 2D bands ------------------------------------------------------------------


@dataclass(frozen=True)
class Band2D:
    nx: int
    ny: int
    onsite: float
    band_min: float
    band_max: float

    @property
    def index(self) -> tuple[int, int]:
        return (self.nx, self.ny)

    @property
    def partner(self) -> tuple[int, int] | None:
        """The x-y swapped band degenerate with this one, if distinct."""
        return None if self.nx == self.ny else (self.ny, self.nx)


def assemble_bands_2d(bs: BandStructure1D, orbital_cutoff: int) -> list[Band2D]:
    """All (nx, ny) bands with both indices <= orbital_cutoff, sorted by on-site energy."""
    eps = [bs.onsite(n) for n in range(1, orbital_cutoff + 1)]
    out = []
    for nx in range(1, orbital_cutoff + 1):
        for ny in range(1, orbital_cutoff + 1):
            out.append(Band2D(
                nx, ny,
                onsite=eps[nx - 1] + eps[ny - 1],
                band_min=bs.band_min(nx) + bs.band_min(ny),
                band_max=bs.band_max(nx) + bs.band_max(ny),
            ))
    # rounding keeps exact x-y partners adjacent with the smaller nx first
    out.sort(key=lambda b: (round(b.onsite, 9), b.nx))
    return out


def group_shells(bands2d: list[Band2D]) -> list[list[Band2D]]:
    """Group x-y partners into shells, preserving energy order."""
    shells, seen = [], set()
    lookup = {b.index: b for b in bands2d}
    for b in bands2d:
        if b.index in seen:
            continue
        shell = [b]
        seen.add(b.index)
        if b.partner is not None and b.partner in lookup:
            shell.append(lookup[b.partner])
            seen.add(b.partner)
        shells.append(shell)
    return shells


def hopping_from_dispersion(bs: BandStructure1D, band: tuple[int, int], displacement: tuple[int, int]) -> float:
    """Lattice Fourier coefficient of the 2D dispersion of ``band``.

    For the separable dispersion this is ``c_nx(jx) S(jy) + S(jx) c_ny(jy)``
    where ``c_n`` are the 1D coefficients and ``S(j)`` the quadrature of the
    BZ average of ``exp(i k j lam)``. Returns the signed value; the hopping
    magnitude is its absolute value.
    """
    nx, ny = band
    jx, jy = displacement
    for n in (nx, ny):
        if not 1 <= n <= bs.nbands:
            raise ValueError(f"band index {n} not retained (have {bs.nbands})")
    drift = max(bs.quadrature_drift[nx - 1], bs.quadrature_drift[ny - 1])
    if drift > QUADRATURE_DRIFT_TOL:
        logger.debug("k quadrature drift %.1e for band %s", drift, band)
    return bs.fourier(nx, jx) * bs.delta_sum(jy) + bs.delta_sum(jx) * bs.fourier(ny, jy)


def nearest_hopping(bs: BandStructure1D, band: tuple[int, int]) -> float:
    """Nearest-neighbour hopping magnitude averaged over the x and y bonds."""
    return 0.5 * (abs(hopping_from_dispersion(bs, band, (1, 0))) + abs(hopping_from_dispersion(bs, band, (0, 1))))


def axial_next_hopping(bs: BandStructure1D, band: tuple[int, int]) -> float:
    """Two-site axial hopping magnitude averaged over x and y."""
    return 0.5 * (abs(hopping_from_dispersion(bs, band, (2, 0))) + abs(hopping_from_dispersion(bs, band, (0, 2))))


def diagonal_hopping(bs: BandStructure1D, band: tuple[int, int]) -> float:
    return abs(hopping_from_dispersion(bs, band, (1, 1)))


@dataclass(frozen=True)
class IsolationReport:
    isolated: dict  # (nx, ny) -> bool
    certified: dict  # (nx, ny) -> bool; False when a band above the cutoff could overlap

    def isolated_bands(self) -> list[tuple[int, int]]:
        return [b for b, flag in self.isolated.items() if flag]


def band_isolation_report(bs: BandStructure1D, bands2d: list[Band2D]) -> IsolationReport:
    """Flag bands whose energy range overlaps no other band.

    An x-y partner is part of the same shell and is not counted as an
    overlapping band. A band is only reported isolated if it also lies below
    the lowest band beyond the retained set (index ``orbital_cutoff + 1`` on
    one axis); ``certified`` records that second condition.
    """
    isolated, certified = {}, {}
    cutoff = max(max(b.nx, b.ny) for b in bands2d)
    beyond = None
    if bs.nbands > cutoff:
        beyond = min(bs.band_min(1) + bs.band_min(cutoff + 1), bs.band_min(cutoff + 1) + bs.band_min(1))
    for b in bands2d:
        ok = True
        for other in bands2d:
            if other.index == b.index or other.index == b.partner:
                continue
            if other.band_min <= b.band_max and b.band_min <= other.band_max:
                ok = False
                break
        certified[b.index] = beyond is not None and b.band_max < beyond
        isolated[b.index] = ok and certified[b.index]
        if ok and not certified[b.index]:
            logger.info("band %s clears the retained bands but may overlap bands above the cutoff; "
                        "not counted as isolated", b.index)
    return IsolationReport(isolated=isolated, certified=certified)
