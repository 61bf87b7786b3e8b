"""Effective single-band Hubbard parameters from the Wannier-dot spectrum.

For a closed-shell base filling N_b the dot states with N_b, N_b + 1 and
N_b + 2 electrons play the roles of the empty, singly and doubly occupied
Hubbard site. Hoppings come from the non-interacting band of the outermost
shell; the neighbour Coulomb term is the density-density element of that
band's orbital with its copy on the adjacent site.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .bands import axial_next_hopping, diagonal_hopping, group_shells, nearest_hopping
from .device import DeviceConfig, NumericsConfig, Scales
from .ed import FockSector
from .stages import Runner

logger = logging.getLogger(__name__)

AF_THRESHOLD_T = 0.01  # meV
SC_THRESHOLD_T = 0.04  # meV
MUCH_LARGER = 10.0


@dataclass(frozen=True)
class Shell:
    bands: tuple  # (nx, ny) of each member, lowest nx first
    onsite: float
    nb: int  # electrons in all lower shells

    @property
    def degenerate(self) -> bool:
        return len(self.bands) > 1

    @property
    def size(self) -> int:
        return len(self.bands)


def shells_of(runner: Runner) -> list[Shell]:
    out, nb = [], 0
    for group in group_shells(runner.bands2d()):
        out.append(Shell(tuple(b.index for b in group), group[0].onsite, nb))
        nb += 2 * len(group)
    return out


def shell_for(runner: Runner, nb: int) -> tuple[int, Shell]:
    shells = shells_of(runner)
    for i, s in enumerate(shells):
        if s.nb == nb:
            return i, s
    closures = [s.nb for s in shells]
    raise ValueError(f"N_b = {nb} is not a shell closure (closures: {closures})")


@dataclass
class EffectiveParams:
    v0_mev: float
    n_base: int
    outer_band: tuple
    partner: tuple | None  # x-y partner of the outer band in a degenerate shell
    degenerate_shell: bool
    E0: float
    mu_up: float
    mu_down: float
    U: float
    U_err: float
    t: float
    t_prime: float
    t_diagonal: float
    V: float
    V_err: float
    V_bare: float
    isolated: bool
    n_orbitals_ed: int
    u_by_basis: list = field(default_factory=list)  # (n_orbitals, U) for each basis tried
    anomalies: list = field(default_factory=list)
    U_all_states: float = float("nan")  # alternate rule for degenerate shells: mean over all six pair states
    averaging: str = ""


def _basis_candidates(shells: list[Shell], outer: int, n_electrons: int, max_dim: int) -> list[tuple]:
    """Shell-prefix orbital sets through the outer shell, growing while the sector fits ``max_dim``."""
    bases = []
    orbitals: list = []
    for i, s in enumerate(shells):
        orbitals = orbitals + list(s.bands)
        if i < outer:
            continue
        m = len(orbitals)
        two_sz = n_electrons % 2
        if n_electrons > 2 * m:
            continue
        if FockSector(m, n_electrons, two_sz).dimension > max_dim:
            break
        bases.append(tuple(orbitals))
    if not bases:
        raise ValueError(f"no orbital basis for {n_electrons} electrons fits ed_max_dim = {max_dim}")
    return bases


SECTOR_AVERAGE = "mean over the Sz = -1, 0, +1 two-electron ground sectors"


def _u_in_basis(runner: Runner, orbitals, nb: int, degenerate: bool):
    """(E0, mu_up, mu_down, U, U from the all-states rule) in one orbital basis."""
    e0 = runner.sector(orbitals, nb, 0).energies[0]
    e_up = runner.sector(orbitals, nb + 1, 1).energies[0]
    e_dn = runner.sector(orbitals, nb + 1, -1).energies[0]
    base = e0 - e_up - e_dn
    if not degenerate:
        return e0, e_up - e0, e_dn - e0, runner.sector(orbitals, nb + 2, 0).energies[0] + base, float("nan")
    # Sz = -1 mirrors Sz = +1 exactly, so it enters with weight two
    sz0 = runner.sector(orbitals, nb + 2, 0, n_states=4).energies
    sz1 = runner.sector(orbitals, nb + 2, 2).energies[0]
    u = (sz0[0] + 2 * sz1) / 3.0 + base
    u_states = (sum(sz0[:4]) + 2 * sz1) / 6.0 + base
    return e0, e_up - e0, e_dn - e0, u, u_states


def effective_params(cfg: DeviceConfig | None = None, num: NumericsConfig | None = None, nb: int = 0,
                     runner: Runner | None = None) -> EffectiveParams:
    """One Table-I style row for base filling ``nb``.

    ``U`` is evaluated in the largest shell-prefix orbital basis whose
    (N_b + 2)-electron sector fits ``numerics.ed_max_dim``; ``U_err`` is the
    change from the next smaller basis.
    """
    runner = runner or Runner(cfg, num)
    num = runner.num
    shells = shells_of(runner)
    idx, shell = shell_for(runner, nb)
    outer = shell.bands[0]
    bs = runner.bands()

    bases = _basis_candidates(shells, idx, nb + 2, num.ed_max_dim)
    by_basis = []
    for orbitals in bases[-2:]:
        by_basis.append((len(orbitals), _u_in_basis(runner, orbitals, nb, shell.degenerate)))
    e0, mu_up, mu_dn, u, u_states = by_basis[-1][1]
    u_err = abs(u - by_basis[-2][1][3]) if len(by_basis) > 1 else float("nan")

    coul = runner.coulomb()
    v_vals = []
    for band in shell.bands:
        # x-bond of this band and x-bond of its partner = y-bond of this band
        v_vals.append(coul.neighbor[band])
        v_vals.append(coul.neighbor[(band[1], band[0])])
    v = float(np.mean([x[0] for x in v_vals]))
    v_err = float(max(x[1] for x in v_vals))
    v_bare = float(np.mean([x[2] for x in v_vals]))

    isolation = runner.isolation()
    anomalies = []
    if u < 0:
        anomalies.append("negative U")
    if abs(mu_up - mu_dn) > 10 * num.eigensolver_tol * max(1.0, abs(mu_up)):
        anomalies.append("spin-dependent chemical potential")
    if not isolation.isolated[outer]:
        anomalies.append("outer band overlaps other bands")
    for a in anomalies:
        logger.warning("N_b=%d at V0=%g meV: %s", nb, runner.cfg.v0_mev, a)

    return EffectiveParams(
        v0_mev=runner.cfg.v0_mev, n_base=nb, outer_band=outer,
        partner=shell.bands[1] if shell.degenerate else None, degenerate_shell=shell.degenerate,
        E0=e0, mu_up=mu_up, mu_down=mu_dn, U=u, U_err=u_err,
        t=nearest_hopping(bs, outer), t_prime=axial_next_hopping(bs, outer), t_diagonal=diagonal_hopping(bs, outer),
        V=v, V_err=v_err, V_bare=v_bare, isolated=bool(isolation.isolated[outer]),
        n_orbitals_ed=by_basis[-1][0], u_by_basis=[(m, r[3]) for m, r in by_basis], anomalies=anomalies,
        U_all_states=u_states, averaging=SECTOR_AVERAGE if shell.degenerate else "",
    )


@dataclass(frozen=True)
class ValidityReport:
    isolated_shells: tuple  # shells (as band tuples) separated from all other bands
    admissible_nb: tuple


def validity_check(cfg: DeviceConfig | None = None, num: NumericsConfig | None = None,
                   runner: Runner | None = None) -> ValidityReport:
    runner = runner or Runner(cfg, num)
    report = runner.isolation()
    shells = shells_of(runner)
    isolated = [s for s in shells if all(report.isolated[b] for b in s.bands)]
    return ValidityReport(tuple(s.bands for s in isolated), tuple(s.nb for s in isolated))


@dataclass(frozen=True)
class FeasibilityReport:
    nb: int
    temperature_k: float
    thermal_energy: float
    qpt: bool
    af: bool
    sc: bool
    af_threshold_t: float = AF_THRESHOLD_T
    sc_threshold_t: float = SC_THRESHOLD_T


def feasibility_report(params: EffectiveParams, temperature_k: float) -> FeasibilityReport:
    """Temperature verdicts; "much larger than k_B T" is taken as a ratio of at least 10."""
    kt = Scales.thermal_energy(temperature_k)
    u, t = params.U, params.t
    if kt > 0:
        qpt = u / kt >= MUCH_LARGER and t / kt >= MUCH_LARGER
    else:
        qpt = u > 0 and t > 0
    return FeasibilityReport(params.n_base, temperature_k, kt, bool(qpt), bool(t > AF_THRESHOLD_T), bool(t > SC_THRESHOLD_T))


def table_report(cfg: DeviceConfig | None = None, num: NumericsConfig | None = None, nb_list=(),
                 runner: Runner | None = None) -> list[EffectiveParams]:
    runner = runner or Runner(cfg, num)
    return [effective_params(nb=nb, runner=runner) for nb in nb_list]


def hopping_row(runner: Runner, nb: int) -> tuple[tuple, float, float]:
    """Outer band, t and t' for base filling ``nb`` without any many-body work."""
    _, shell = shell_for(runner, nb)
    bs = runner.bands()
    band = shell.bands[0]
    return band, nearest_hopping(bs, band), axial_next_hopping(bs, band)
