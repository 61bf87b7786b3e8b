"""Image-screened Coulomb kernel and on-site matrix elements over Wannier orbitals.

Matrix elements are evaluated in momentum space on a polar grid (Gauss-Legendre
in |q|, uniform in angle). The area element ``q dq dphi`` cancels the ``1/q``
of the 2D Coulomb transform, so screened and bare kernels are both smooth
integrands.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .device import COULOMB_CONST
from .wannier import Wannier2D, WannierOrbital1D

ZERO_THRESHOLD = 1e-6  # meV
FLAG_RELATIVE_ERROR = 0.02
_CHUNK = 2048


@dataclass(frozen=True)
class ScreenedKernel:
    """U_C(r) = (e^2 / 4 pi eps) f_s(r) / r for a 2DEG a depth d below a grounded plate.

    ``depth_nm = inf`` gives the bare Coulomb interaction.
    """

    epsilon_r: float
    depth_nm: float

    @property
    def prefactor(self) -> float:
        return COULOMB_CONST / self.epsilon_r

    def screening(self, r):
        r = np.asarray(r, dtype=float)
        if math.isinf(self.depth_nm):
            return np.ones_like(r)
        return 1.0 - r / np.sqrt(r * r + 4 * self.depth_nm**2)

    def value(self, r):
        """Kernel in meV; ``inf`` at r = 0."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return self.prefactor * self.screening(r) / r

    def q_times_fourier(self, q):
        """q * V(q), finite everywhere (meV nm)."""
        q = np.asarray(q, dtype=float)
        if math.isinf(self.depth_nm):
            return np.full_like(q, 2 * math.pi * self.prefactor)
        return -2 * math.pi * self.prefactor * np.expm1(-2 * q * self.depth_nm)

    def fourier(self, q):
        """2D transform V(q) = (e^2 / 2 eps)(1 - exp(-2 q d)) / q in meV nm^2."""
        q = np.asarray(q, dtype=float)
        if math.isinf(self.depth_nm):
            with np.errstate(divide="ignore"):
                return 2 * math.pi * self.prefactor / q
        small = q * self.depth_nm < 1e-8
        safe = np.where(small, 1.0, q)
        return np.where(small, 4 * math.pi * self.prefactor * self.depth_nm, self.q_times_fourier(safe) / safe)


def kernel_value(r, kernel: ScreenedKernel):
    return kernel.value(r)


def kernel_fourier(q, kernel: ScreenedKernel):
    return kernel.fourier(q)


@dataclass(frozen=True)
class PolarGrid:
    q: np.ndarray  # (nr,)
    phi: np.ndarray  # (nphi,)
    radial_weights: np.ndarray  # (nr,)

    @property
    def qx(self) -> np.ndarray:
        return np.outer(self.q, np.cos(self.phi))

    @property
    def qy(self) -> np.ndarray:
        return np.outer(self.q, np.sin(self.phi))

    def measure(self) -> np.ndarray:
        """Weights for integrating f(q) q dq dphi / (2 pi)^2 with the q factor removed.

        Multiply by ``q * V(q)`` and the densities to get a matrix element.
        """
        dphi = 2 * math.pi / len(self.phi)
        return np.outer(self.radial_weights, np.full(len(self.phi), dphi)) / (2 * math.pi) ** 2


def polar_grid(q_max: float, n_radial: int, n_angular: int) -> PolarGrid:
    if n_angular % 4:
        raise ValueError("angular points must be a multiple of 4")
    x, w = np.polynomial.legendre.leggauss(n_radial)
    q = 0.5 * q_max * (x + 1)
    phi = 2 * math.pi * np.arange(n_angular) / n_angular
    return PolarGrid(q=q, phi=phi, radial_weights=0.5 * q_max * w)


def density_transforms(orbitals: list[WannierOrbital1D], q: np.ndarray) -> np.ndarray:
    """rho_ab(q) = int w_a(x) w_b(x) exp(-i q x) dx for all orbital pairs.

    Returns a complex array of shape (n, n) + q.shape.
    """
    n = len(orbitals)
    x = orbitals[0].x
    h = orbitals[0].grid_step
    amps = np.array([o.amplitude for o in orbitals])
    prods = (amps[:, None, :] * amps[None, :, :]).reshape(n * n, -1) * h
    flat = q.ravel()
    out = np.empty((n * n, flat.size), dtype=complex)
    for s in range(0, flat.size, _CHUNK):
        arg = np.outer(x, flat[s:s + _CHUNK])
        out[:, s:s + _CHUNK] = prods @ np.cos(arg) - 1j * (prods @ np.sin(arg))
    return out.reshape((n, n) + q.shape)


def _rotate_quarter(arr: np.ndarray) -> np.ndarray:
    """Map values on q_x = q cos(phi) to q_y = q sin(phi) = q cos(phi - pi/2)."""
    quarter = arr.shape[-1] // 4
    return np.roll(arr, quarter, axis=-1)


@dataclass(frozen=True)
class CoulombTensor:
    orbitals: tuple  # tuple of (nx, ny)
    values: np.ndarray  # (M, M, M, M), meV
    errors: np.ndarray  # (M, M, M, M), meV
    q_max: float
    q_grid: int
    q_angular: int

    @property
    def flagged(self) -> np.ndarray:
        mag = np.abs(self.values)
        return (mag > 0) & (self.errors > FLAG_RELATIVE_ERROR * mag)

    def element(self, a, b, c, d) -> float:
        idx = {o: i for i, o in enumerate(self.orbitals)}
        return float(self.values[idx[a], idx[b], idx[c], idx[d]])

    def subset(self, orbitals) -> "CoulombTensor":
        idx = [self.orbitals.index(o) for o in orbitals]
        ix = np.ix_(idx, idx, idx, idx)
        return CoulombTensor(tuple(orbitals), self.values[ix], self.errors[ix], self.q_max, self.q_grid, self.q_angular)


def _symmetrize(u: np.ndarray) -> np.ndarray:
    # real orbitals: invariant under 1<->4, 2<->3 and exchange of the two densities
    images = [
        u,
        u.transpose(3, 1, 2, 0),
        u.transpose(0, 2, 1, 3),
        u.transpose(3, 2, 1, 0),
        u.transpose(1, 0, 3, 2),
        u.transpose(2, 0, 3, 1),
        u.transpose(1, 3, 0, 2),
        u.transpose(2, 3, 0, 1),
    ]
    return sum(images) / len(images)


def _tensor_on_grid(orb1d, orbitals2d, kernel, grid: PolarGrid) -> np.ndarray:
    rx = density_transforms(orb1d, grid.qx)
    ry = _rotate_quarter(rx)
    m = len(orbitals2d)
    nx = np.array([o[0] - 1 for o in orbitals2d])
    ny = np.array([o[1] - 1 for o in orbitals2d])
    pair = rx[nx[:, None], nx[None, :]] * ry[ny[:, None], ny[None, :]]  # (M, M, nr, nphi)
    pair = pair.reshape(m * m, -1)
    weight = (grid.measure() * kernel.q_times_fourier(grid.q)[:, None]).ravel()
    t = (pair * weight) @ pair.conj().T  # [(1,4), (2,3)]
    u = t.real.reshape(m, m, m, m).transpose(0, 2, 3, 1)
    return _symmetrize(u)


def onsite_tensor(orbitals1d: list[WannierOrbital1D], orbitals2d, kernel: ScreenedKernel,
                  q_max: float, q_grid: int, q_angular: int) -> CoulombTensor:
    """Four-index on-site elements U[n1, n2, n3, n4] over the given 2D orbitals.

    ``orbitals1d[i]`` must hold 1D band ``i + 1``. The error estimate is the
    difference from a grid with half as many radial and angular nodes.
    """
    orbitals2d = tuple(tuple(o) for o in orbitals2d)
    fine = _tensor_on_grid(orbitals1d, orbitals2d, kernel, polar_grid(q_max, q_grid, q_angular))
    coarse = _tensor_on_grid(orbitals1d, orbitals2d, kernel, polar_grid(q_max, max(q_grid // 2, 1), q_angular // 2))
    err = np.abs(fine - coarse)
    fine = np.where(np.abs(fine) < ZERO_THRESHOLD, 0.0, fine)
    return CoulombTensor(orbitals2d, fine, err, q_max, q_grid, q_angular)


def _diagonal_transforms(orbitals: list[WannierOrbital1D], q: np.ndarray) -> np.ndarray:
    """|rho_aa(q)|^2 for each orbital; shape (n,) + q.shape."""
    amps = np.array([o.amplitude for o in orbitals])
    dens = amps**2 * orbitals[0].grid_step
    flat = q.ravel()
    out = np.empty((len(orbitals), flat.size))
    x = orbitals[0].x
    for s in range(0, flat.size, _CHUNK):
        arg = np.outer(x, flat[s:s + _CHUNK])
        out[:, s:s + _CHUNK] = (dens @ np.cos(arg)) ** 2 + (dens @ np.sin(arg)) ** 2
    return out.reshape((len(orbitals),) + q.shape)


def _neighbor_on_grid(orbitals1d, pairs, kernels, grid, displacement, lambda_nm) -> np.ndarray:
    """V for each (wx, wy) index pair and kernel; shape (len(pairs), len(kernels))."""
    sx = _diagonal_transforms(orbitals1d, grid.qx)
    sy = _rotate_quarter(sx)
    phase = np.cos((grid.qx * displacement[0] + grid.qy * displacement[1]) * lambda_nm) * grid.measure()
    weights = np.array([(phase * k.q_times_fourier(grid.q)[:, None]).ravel() for k in kernels])
    dens = np.array([(sx[a] * sy[b]).ravel() for a, b in pairs])
    return dens @ weights.T


def neighbor_table(orbitals1d: list[WannierOrbital1D], orbitals2d, kernels, lambda_nm: float, q_max: float,
                   q_grid: int, q_angular: int, displacement=(1, 0)) -> tuple[np.ndarray, np.ndarray]:
    """Neighbour density-density values and error estimates for many orbitals and kernels at once.

    ``orbitals1d[i]`` must hold 1D band ``i + 1``. Both arrays have shape
    ``(len(orbitals2d), len(kernels))``.
    """
    pairs = [(o[0] - 1, o[1] - 1) for o in orbitals2d]
    fine = _neighbor_on_grid(orbitals1d, pairs, kernels, polar_grid(q_max, q_grid, q_angular), displacement, lambda_nm)
    coarse = _neighbor_on_grid(orbitals1d, pairs, kernels, polar_grid(q_max, max(q_grid // 2, 1), q_angular // 2),
                               displacement, lambda_nm)
    return fine, np.abs(fine - coarse)


def neighbor_V(orbital: Wannier2D, kernel: ScreenedKernel, lambda_nm: float, q_max: float,
               q_grid: int, q_angular: int, displacement=(1, 0)) -> tuple[float, float]:
    """Density-density interaction between an orbital and its copy on a neighbouring site.

    Returns ``(value, error_estimate)`` in meV.
    """
    orbs = [orbital.wx, orbital.wy]
    fine, err = neighbor_table(orbs, [(1, 2)], [kernel], lambda_nm, q_max, q_grid, q_angular, displacement)
    return float(fine[0, 0]), float(err[0, 0])


def realspace_element(o1: Wannier2D, o2: Wannier2D, o3: Wannier2D, o4: Wannier2D,
                      kernel: ScreenedKernel, stride: int = 1, shift=(0, 0)) -> float:
    """Direct real-space quadrature of U[1, 2, 3, 4] on the sampled grid.

    The double area integral is evaluated as a discrete convolution; the
    integrable singularity is replaced by the kernel's average over one grid
    cell. ``shift`` displaces orbitals 2 and 3 by whole sites.
    """
    h = o1.wx.grid_step * stride
    sl = slice(None, None, stride)
    a = np.outer(o1.wx.amplitude[sl] * o4.wx.amplitude[sl], o1.wy.amplitude[sl] * o4.wy.amplitude[sl])
    b = np.outer(o2.wx.amplitude[sl] * o3.wx.amplitude[sl], o2.wy.amplitude[sl] * o3.wy.amplitude[sl])
    n = a.shape[0]
    per = o1.wx.points_per_period
    if per % stride:
        raise ValueError("stride must divide the points per period")
    off = np.array(shift) * (per // stride)
    r1 = (np.arange(-(n - 1), n) + off[0]) * h
    r2 = (np.arange(-(n - 1), n) + off[1]) * h
    r = np.hypot(r1[:, None], r2[None, :])
    kern = kernel.value(np.where(r > 0, r, 1.0))
    singular = r == 0
    if singular.any():
        depth_term = 0.0 if math.isinf(kernel.depth_nm) else 1.0 / (2 * kernel.depth_nm)
        kern = np.where(singular, kernel.prefactor * (4 * math.log(1 + math.sqrt(2)) / h - depth_term), kern)
    # potential at x from density a at x' (b at x is displaced by +shift)
    pot = fftconvolve(a, kern, mode="full")[n - 1:2 * n - 1, n - 1:2 * n - 1]
    return float(np.sum(b * pot) * h**4)
