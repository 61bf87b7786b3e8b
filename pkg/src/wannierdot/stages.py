"""Stage graph bands -> wannier -> coulomb -> ed, with per-stage cache keys.

Each stage key holds only the configuration fields the stage (and its
upstream stages) actually read, so e.g. a change of depth never invalidates
band or Wannier results.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass

import numpy as np

from . import ed
from .bands import BandStructure1D, assemble_bands_2d, band_isolation_report, solve_bands_1d
from .cache import StageCache, StageKey, run_stage
from .coulomb import CoulombTensor, ScreenedKernel, neighbor_table, onsite_tensor
from .device import ConfigError, DeviceConfig, NumericsConfig, derive_scales
from .wannier import build_wannier_set

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CoulombData:
    tensor: CoulombTensor
    neighbor: dict  # (nx, ny) -> (V screened, error, V bare) for an x-bond


class Runner:
    """Evaluates stages for one device/numerics configuration.

    With ``cache`` set, stage outputs are loaded from or written to a
    :class:`StageCache`; in-memory memoization applies either way.
    """

    def __init__(self, cfg: DeviceConfig, num: NumericsConfig, cache: StageCache | None = None):
        self.cfg = cfg
        self.num = num
        self.cache = cache
        self.solves = 0
        self.log: list[str] = []
        self._memo: dict = {}

    # -- keys -----------------------------------------------------------------
    def _fields(self, stage: str) -> dict:
        c, n = self.cfg, self.num
        f = {"lambda_nm": c.lambda_nm, "mass_ratio": c.mass_ratio}
        if stage == "scales":
            f["epsilon_r"] = c.epsilon_r
            return f
        f.update(v0_mev=c.v0_mev, plane_wave_cutoff=n.plane_wave_cutoff, k_grid=n.k_grid, orbital_cutoff=n.orbital_cutoff)
        if stage == "bands":
            return f
        f.update(real_grid=n.real_grid, real_span=n.real_span)
        if stage == "wannier":
            return f
        f.update(epsilon_r=c.epsilon_r, depth_nm=c.depth_nm, q_grid=n.q_grid, q_angular=n.q_angular,
                 q_max_nm_inv=n.q_max_nm_inv)
        if stage == "coulomb":
            return f
        f.update(eigensolver_tol=n.eigensolver_tol, ed_max_iterations=n.ed_max_iterations)
        return f

    def key(self, stage: str, **extra) -> StageKey:
        return StageKey.make(stage, **self._fields(stage), **extra)

    def _run(self, key: StageKey, producer):
        memo_key = (key.stage, key.digest)
        if memo_key in self._memo:
            return self._memo[memo_key]
        computed = []

        def produce():
            computed.append(True)
            return producer()

        start = time.perf_counter()
        value = run_stage(key, produce, self.cache)
        hit = bool(self.cache) and not computed
        self.log.append(f"stage={key.stage} key={key.digest} cache_hit={int(hit)} seconds={time.perf_counter() - start:.3f}")
        self._memo[memo_key] = value
        return value

    # -- stages ---------------------------------------------------------------
    def scales(self):
        return self._run(self.key("scales"), lambda: derive_scales(self.cfg))

    def bands(self) -> BandStructure1D:
        return self._run(self.key("bands"), lambda: solve_bands_1d(self.cfg, self.num))

    def bands2d(self):
        return assemble_bands_2d(self.bands(), self.num.orbital_cutoff)

    def isolation(self):
        return band_isolation_report(self.bands(), self.bands2d())

    def wannier(self):
        return self._run(self.key("wannier"), lambda: build_wannier_set(self.bands(), self.cfg, self.num))

    def kernel(self, bare: bool = False) -> ScreenedKernel:
        return ScreenedKernel(self.cfg.epsilon_r, math.inf if bare else self.cfg.depth_nm)

    def _coulomb(self) -> CoulombData:
        w1d = self.wannier()
        orbitals = [b.index for b in self.bands2d()]
        n = self.num
        tensor = onsite_tensor(w1d, orbitals, self.kernel(), n.q_max_nm_inv, n.q_grid, n.q_angular)
        vals, errs = neighbor_table(w1d, orbitals, [self.kernel(), self.kernel(bare=True)], self.cfg.lambda_nm,
                                    n.q_max_nm_inv, n.q_grid, n.q_angular)
        neighbor = {o: (float(v[0]), float(e[0]), float(v[1])) for o, v, e in zip(orbitals, vals, errs)}
        return CoulombData(tensor, neighbor)

    def coulomb(self) -> CoulombData:
        return self._run(self.key("coulomb"), self._coulomb)

    def onsite_energies(self, orbitals) -> np.ndarray:
        lookup = {b.index: b.onsite for b in self.bands2d()}
        return np.array([lookup[o] for o in orbitals])

    def sector(self, orbitals, n_electrons: int, two_sz: int, n_states: int = 1) -> ed.SectorResult:
        """Lowest ``n_states`` energies of the on-site Hamiltonian restricted to ``orbitals``."""
        orbitals = tuple(tuple(o) for o in orbitals)
        dim = ed.FockSector(len(orbitals), n_electrons, two_sz).dimension
        if dim > self.num.ed_max_dim:
            raise ConfigError([f"numerics.ed_max_dim: sector N={n_electrons}, 2Sz={two_sz} on {len(orbitals)} "
                               f"orbitals has dimension {dim} > {self.num.ed_max_dim}; lower numerics.orbital_cutoff"])

        def produce():
            self.solves += 1
            tensor = self.coulomb().tensor.subset(orbitals).values
            eps = self.onsite_energies(orbitals)
            return ed.solve_sector(eps, tensor, n_electrons, two_sz, n_states,
                                   self.num.eigensolver_tol, self.num.ed_max_iterations)

        key = self.key("ed", orbitals=[list(o) for o in orbitals], n_electrons=n_electrons,
                       two_sz=two_sz, n_states=n_states)
        return self._run(key, produce)

    def ed_result(self, orbitals, electron_numbers) -> ed.EDResult:
        orbitals = tuple(tuple(o) for o in orbitals)
        res = ed.EDResult(n_orbitals=len(orbitals), tol=self.num.eigensolver_tol)
        for n in electron_numbers:
            for two_sz in ed.sector_two_sz_values(len(orbitals), n):
                res.sectors[(n, two_sz)] = self.sector(orbitals, n, two_sz)
        return res

    def all_orbitals(self) -> tuple:
        return tuple(b.index for b in self.bands2d())


def config_fields(cfg: DeviceConfig, num: NumericsConfig) -> dict:
    return {**asdict(cfg), **asdict(num)}
