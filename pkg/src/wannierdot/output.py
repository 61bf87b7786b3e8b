"""CSV writing with a fixed float format, plus row builders shared by the CLI and sweeps."""

from __future__ import annotations

import csv
import math
from pathlib import Path

from .effective import EffectiveParams, FeasibilityReport

TABLE_COLUMNS = ["v0_mev", "nb", "nx", "ny", "degenerate", "U_mev", "U_err_mev", "V_mev", "V_err_mev",
                 "t_mev", "tprime_mev", "isolated"]
SWEEP_PREFIX = ["sweep_v0_mev", "sweep_depth_nm", "sweep_nb"]
SWEEP_COLUMNS = SWEEP_PREFIX + TABLE_COLUMNS + ["error"]
FEASIBILITY_COLUMNS = ["nb", "T_K", "kbt_mev", "qpt", "af", "sc"]
EFFECTIVE_COLUMNS = ["v0_mev", "nb", "nx", "ny", "partner_nx", "partner_ny", "degenerate", "E0_mev", "mu_up_mev",
                     "mu_down_mev", "U_mev", "U_err_mev", "U_all_states_mev", "V_mev", "V_err_mev", "V_bare_mev",
                     "t_mev", "tprime_mev", "tdiag_mev", "isolated", "n_orbitals", "averaging", "anomalies"]


def fmt(value) -> str:
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.10g}"
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            if isinstance(row, dict):
                row = [row.get(c, "") for c in header]
            w.writerow([fmt(v) for v in row])
    return path


def table_row(p: EffectiveParams) -> dict:
    return {
        "v0_mev": p.v0_mev, "nb": p.n_base, "nx": p.outer_band[0], "ny": p.outer_band[1],
        "degenerate": p.degenerate_shell, "U_mev": p.U, "U_err_mev": p.U_err, "V_mev": p.V, "V_err_mev": p.V_err,
        "t_mev": p.t, "tprime_mev": p.t_prime, "isolated": p.isolated,
    }


def effective_row(p: EffectiveParams) -> dict:
    partner = p.partner or (None, None)
    return {
        **table_row(p), "partner_nx": partner[0], "partner_ny": partner[1], "E0_mev": p.E0,
        "mu_up_mev": p.mu_up, "mu_down_mev": p.mu_down, "U_all_states_mev": p.U_all_states,
        "V_bare_mev": p.V_bare, "tdiag_mev": p.t_diagonal, "n_orbitals": p.n_orbitals_ed,
        "averaging": p.averaging, "anomalies": ";".join(p.anomalies),
    }


def feasibility_row(r: FeasibilityReport) -> dict:
    return {"nb": r.nb, "T_K": r.temperature_k, "kbt_mev": r.thermal_energy, "qpt": r.qpt, "af": r.af, "sc": r.sc}
