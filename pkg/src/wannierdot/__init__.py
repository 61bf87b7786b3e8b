"""Effective Hubbard parameters of a 2DEG under a periodic gate potential.

Pipeline: 1D bands -> Wannier orbitals -> Coulomb tensor -> exact
diagonalization of one dot -> effective parameters. Units are meV and nm.
"""

from .device import ConfigError, ConvergenceError, DeviceConfig, NumericsConfig, TaskConfig, derive_scales, load_config
from .effective import EffectiveParams, effective_params, feasibility_report, table_report, validity_check
from .stages import Runner

__all__ = [
    "ConfigError", "ConvergenceError", "DeviceConfig", "NumericsConfig", "TaskConfig", "derive_scales",
    "load_config", "EffectiveParams", "effective_params", "feasibility_report", "table_report",
    "validity_check", "Runner",
]
