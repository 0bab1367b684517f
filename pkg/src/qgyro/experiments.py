"""Experiment drivers: turn a validated config into named data tables."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import channel, markov, semiclassical, spin, thermo
from .errors import ToleranceError
from .measurement import figure_of_merit, induced_povm, longevity
from .spin import ReferenceGeometry, SourceState

UNITS = {
    "ell": "hbar", "d": "dimensionless", "s_z": "hbar", "t": "measured particles",
    "Lx": "hbar", "Ly": "hbar", "Lz": "hbar", "r": "dimensionless", "theta": "rad",
    "merit": "probability", "Lz_over_ell": "dimensionless", "width": "hbar",
    "inv_gap": "measured particles", "estimate": "measured particles",
    "exact_sum": "measured particles", "closed_form": "measured particles", "ratio": "dimensionless",
    "epsilon": "dimensionless", "truncated_sum": "measured particles", "empirical": "measured particles",
    "theta_exact": "rad", "theta_sc": "rad", "r_exact": "dimensionless",
    "max_deviation": "rad", "min_r": "dimensionless", "steps": "measured particles",
    "longevity": "measured particles",
}


@dataclass
class Table:
    columns: list
    rows: list = field(default_factory=list)


@dataclass
class Result:
    tables: dict
    report: dict | None = None


def _geoms(cfg):
    return [ReferenceGeometry(t) for t in cfg.twice_ell]


def _source(cfg) -> SourceState:
    if cfg.bloch is not None:
        return SourceState(tuple(cfg.bloch))
    return SourceState.polarized_z(cfg.s_z[0])


def initial_state(cfg, geom: ReferenceGeometry) -> np.ndarray:
    name = cfg.initial_state
    if name == "coherent":
        return spin.coherent_state(geom, cfg.theta0, cfg.phi0)
    if name == "mixed":
        return spin.maximally_mixed(geom)
    if name == "up":
        return spin.basis_state(geom, geom.ell)
    if name == "down":
        return spin.basis_state(geom, -geom.ell)
    return spin.random_density_matrix(geom.d, np.random.default_rng(cfg.seed))


def run_evolve(cfg) -> Result:
    xi = _source(cfg)
    table = Table(["ell", "t", "Lx", "Ly", "Lz", "r", "theta", "merit"])
    summary = Table(["ell", "steps", "longevity"])
    tol = cfg.tolerances
    for geom in _geoms(cfg):
        rho0 = initial_state(cfg, geom)
        rec = channel.iterate(rho0, xi, cfg.steps, geom=geom, n_hat=cfg.n_hat)
        tr = np.trace(rec.final).real
        if abs(tr - 1) > tol["trace"]:
            raise ToleranceError(f"trace drifted to {tr!r} after {cfg.steps} steps")
        spin.check_positive(rec.final, tol["positivity"])
        for t, lv, r, th, q in zip(rec.times, rec.L_exp, rec.r, rec.theta, rec.merit):
            table.rows.append([geom.ell, int(t), *lv, r, th, q])
        if cfg.threshold is not None:
            q0 = figure_of_merit(rho0, cfg.n_hat, geom)
            life = longevity(rho0, xi, cfg.n_hat, cfg.threshold, cfg.budget, geom) if q0 >= cfg.threshold else 0
            summary.rows.append([geom.ell, cfg.steps, life])
    tables = {"trajectory.csv": table}
    if summary.rows:
        tables["longevity.csv"] = summary
    return Result(tables)


def run_thermal_curve(cfg) -> Result:
    curve = Table(["ell", "s_z", "Lz_over_ell"])
    widths = Table(["ell", "width"])
    for geom in _geoms(cfg):
        s, y = thermo.thermal_curve(geom, cfg.points)
        if np.max(np.abs(y + y[::-1])) > cfg.tolerances["symmetry"]:
            raise ToleranceError("thermal curve lost antisymmetry")
        curve.rows.extend([geom.ell, a, b] for a, b in zip(s, y))
        widths.rows.append([geom.ell, thermo.transition_width(geom)])
    return Result({"thermal_curve.csv": curve, "transition_width.csv": widths})


def run_gap_sweep(cfg) -> Result:
    table = Table(["ell", "s_z", "inv_gap", "estimate"])
    for s in cfg.s_z:
        for geom in _geoms(cfg):
            gap = markov.spectral_gap(markov.transition_matrix(geom, s))
            if abs(gap.lambda1 - 1) > cfg.tolerances["symmetry"] * geom.d:
                raise ToleranceError(f"leading eigenvalue of W is {gap.lambda1!r}, not 1")
            est = geom.ell / (2 * abs(s)) if s != 0 else math.inf
            table.rows.append([geom.ell, s, gap.relaxation_time, est])
    return Result({"gap.csv": table})


def run_hitting_time(cfg) -> Result:
    full = Table(["ell", "d", "exact_sum", "closed_form", "ratio"])
    relaxed = Table(["ell", "d", "epsilon", "truncated_sum", "closed_form", "empirical"])
    for geom in _geoms(cfg):
        h = markov.hitting_time_antiparallel(geom)
        full.rows.append([geom.ell, geom.d, h.exact_sum, h.closed_form, h.exact_sum / h.closed_form])
        e = markov.hitting_time_epsilon(geom, cfg.epsilon)
        relaxed.rows.append([geom.ell, geom.d, e.epsilon, e.truncated_sum, e.closed_form, e.empirical])
    return Result({"hitting_time.csv": full, "hitting_time_relaxed.csv": relaxed})


def run_trajectory_compare(cfg) -> Result:
    series = Table(["ell", "t", "theta_exact", "theta_sc", "r_exact", "Lx", "Lz"])
    summary = Table(["ell", "max_deviation", "min_r"])
    for geom in _geoms(cfg):
        c = semiclassical.compare_exact_semiclassical(geom, cfg.theta0, cfg.s_z[0], cfg.steps)
        if c.max_abs_Ly > cfg.tolerances["positivity"]:
            raise ToleranceError(f"trajectory left the x-z plane (|<L_y>| = {c.max_abs_Ly:.3e})")
        for i, t in enumerate(c.times):
            series.rows.append([geom.ell, int(t), c.theta_exact[i], c.theta_sc[i], c.r_exact[i],
                                c.L_exp[i, 0], c.L_exp[i, 2]])
        summary.rows.append([geom.ell, c.max_deviation, c.min_r])
    return Result({"trajectory_compare.csv": series, "trajectory_summary.csv": summary})


def povm_report(cfg) -> dict:
    geom = _geoms(cfg)[0]
    rho = initial_state(cfg, geom)
    st = spin.state_statistics(rho, geom)
    povm = induced_povm(rho, geom)

    def mat(a):
        return [[[float(z.real), float(z.imag)] for z in row] for row in a]

    return {
        "ell": geom.ell,
        "state": cfg.initial_state,
        "n_rho": [float(x) for x in st.n_rho],
        "r": st.r,
        "theta": None if math.isnan(st.theta) else st.theta,
        "lambda_plus": mat(povm.lambda_plus),
        "lambda_minus": mat(povm.lambda_minus),
        "n_hat": list(cfg.n_hat),
        "q_ave": figure_of_merit(rho, cfg.n_hat, geom),
    }


def run_povm_report(cfg) -> Result:
    rep = povm_report(cfg)
    t = Table(["ell", "r", "theta", "merit"], [[rep["ell"], rep["r"], rep["theta"], rep["q_ave"]]])
    return Result({"povm.csv": t}, report=rep)


RUNNERS = {
    "evolve": run_evolve,
    "thermal-curve": run_thermal_curve,
    "gap-sweep": run_gap_sweep,
    "hitting-time": run_hitting_time,
    "trajectory-compare": run_trajectory_compare,
    "povm-report": run_povm_report,
}


def run_experiment(cfg) -> Result:
    return RUNNERS[cfg.experiment](cfg)
