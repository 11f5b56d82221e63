"""Command-line driver.

Each experiment kind runs in two phases.  ``plan`` resolves defaults and
checks every guard (grid extent, truncation tails, sampling, step bounds);
failures there are configuration errors.  ``execute`` computes, writes the CSV
and GridFileV1 artifacts and records every tolerance comparison.  Exit codes:
0 pass, 2 configuration error, 3 numerical-invariant failure.
"""
from __future__ import annotations

import argparse
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__, oracle
from .checks import Check, kernels_selftest, oracle_verify
from .coherent import (FLAT_LEVEL, NonlinearCoherentSpec, modulation_experiment,
                       modulation_setup, suggest_truncation, uncertainty_audit)
from .config import KINDS, ConfigError, RunConfig, load_config, parse_config
from .free_particle import FVState, evolve_free, gaussian_amplitude, moments, wigner_components
from .io import write_csv, write_grid_file, write_manifest
from .kernel import PhaseField, fock_projection, make_grid, oscillator_grid, star_sqrt
from .kernel.grid import BOUNDARY_DECAY
from .rotator import (EnergyRepState, check_resolution, eps_chi_matrix, evolve_energy_rep,
                      evolve_moyal_rotator, hamiltonian_symbol, kernel_hermiticity_defect,
                      landau_spectrum,
                      min_moyal_steps, radius_observable, trajectory_observable,
                      wigner_energy_rep)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INVARIANT = 3

INVARIANT_TOL = 1e-10
MOYAL_TOL = 1e-6
MODULATION_TOL = 0.05
ROUTE_TOL = 1e-8
SPECTRUM_TOL = 1e-8


@dataclass
class Record:
    """Everything a run reports: checks, scalar results and artifact names."""

    checks: list[Check] = field(default_factory=list)
    results: dict = field(default_factory=dict)
    artifacts: list[str] = field(default_factory=list)

    def check(self, name: str, value: float, tol: float):
        self.checks.append(Check(name, float(value), tol))

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]


# ---------------------------------------------------------------------------
# free-evolve

def _free_state(cfg: RunConfig):
    g = cfg.section("grid")
    grid = make_grid(g["n_p"], g["n_q"], g["p_extent"], g["q_extent"])
    psi = {1: np.zeros(grid.n_p, complex), -1: np.zeros(grid.n_p, complex)}
    for pk in cfg.section("state")["packets"]:
        amp = pk.get("amplitude", 1.0) * np.exp(1j * pk.get("phase", 0.0))
        psi[pk["charge"]] += amp * gaussian_amplitude(grid.p, pk["p0"], pk["sigma_p"],
                                                      pk.get("q0", 0.0), cfg.scales)
    return FVState(grid, psi[1], psi[-1])


def _plan_free(cfg: RunConfig) -> dict:
    state = _free_state(cfg)
    ratio = state.boundary_ratio()
    if ratio > BOUNDARY_DECAY:
        raise ConfigError([f"state amplitude at the p boundary is {ratio:.2e} of peak "
                           f"(limit {BOUNDARY_DECAY:.0e}); enlarge grid.p_extent"])
    return {"state": state}


def _exec_free(cfg: RunConfig, plan: dict, out: Path, rec: Record):
    sc = cfg.scales
    state = plan["state"]
    tm = cfg.section("time")
    disp = cfg.section("free")["dispersion"]
    W0 = wigner_components(state, sc, check=False)
    times = np.linspace(0.0, tm["t_end"], tm["samples"])
    cols = {k: [] for k in ("t", "mean_q", "mean_p", "mean_q2", "charge_norm",
                            "even_imag", "odd_antisymmetry")}
    for t in times:
        W = evolve_free(W0, t, sc, dispersion=disp)
        d = W.structure_defects()
        cols["t"].append(t)
        cols["mean_q"].append(moments(W, 0, 1)["total"].real)
        cols["mean_p"].append(moments(W, 1, 0)["total"].real)
        cols["mean_q2"].append(moments(W, 0, 2)["total"].real)
        cols["charge_norm"].append(W.charge_norm())
        cols["even_imag"].append(d["even_imag"])
        cols["odd_antisymmetry"].append(d["odd_antisymmetry"])
    write_csv(out / "timeseries.csv", cols)
    rec.artifacts.append("timeseries.csv")

    charge = np.asarray(cols["charge_norm"])
    rec.check("charge_norm_drift", np.max(np.abs(charge - state.charge_norm())), INVARIANT_TOL)
    rec.check("even_imag", max(cols["even_imag"]), INVARIANT_TOL)
    rec.check("odd_antisymmetry", max(cols["odd_antisymmetry"]), INVARIANT_TOL)
    peak = max(abs(state.psi_plus).max(), abs(state.psi_minus).max()) ** 2
    for a, f_even, f_odd, psi in ((+1, W0.even_plus, W0.odd_plus, state.psi_plus),
                                  (-1, W0.even_minus, W0.odd_minus, state.psi_minus)):
        tag = "plus" if a > 0 else "minus"
        rec.check(f"even_marginal_{tag}",
                  np.max(np.abs(f_even.q_marginal() - np.abs(psi) ** 2)) / peak, INVARIANT_TOL)
        rec.check(f"odd_marginal_{tag}", np.max(np.abs(f_odd.q_marginal())) / peak,
                  INVARIANT_TOL)
    if disp == "relativistic":
        t = float(times[-1])
        a, b = oracle.wavefunction_evolution_free(state.psi_plus, state.psi_minus,
                                                  state.grid.p, t, sc)
        lhs = wigner_components(FVState(state.grid, a, b), sc, check=False)
        rec.check("commuting_square_t_end", lhs.max_deviation(evolve_free(W0, t, sc)),
                  INVARIANT_TOL)
    rec.results["final_mean_q2"] = cols["mean_q2"][-1]
    if cfg.section("output")["grids"]:
        for i, t in enumerate(tm["snapshots"]):
            name = f"W_{i:03d}.fvwg"
            write_grid_file(out / name, evolve_free(W0, t, sc, dispersion=disp))
            rec.artifacts.append(name)
        rec.results["snapshot_times"] = list(tm["snapshots"])


# ---------------------------------------------------------------------------
# rotator-evolve

def _plan_rotator(cfg: RunConfig) -> dict:
    sc, N = cfg.scales, cfg.N
    st = cfg.section("state")
    amps = {1: {}, -1: {}}
    for lv in st["levels"]:
        amps[lv["charge"]][lv["n"]] = lv["re"] + 1j * lv.get("im", 0.0)
    try:
        state = EnergyRepState.from_levels(N, amps[1], amps[-1])
    except ValueError as exc:
        raise ConfigError([f"state.levels: {exc}"]) from None
    if st["normalize"]:
        state = state.normalized()
    t_end = cfg.section("time")["t_end"]
    if t_end is None:
        t_end = 2.0 * np.pi / sc.omega_c
    plan = {"state": state, "t_end": t_end, "spec": landau_spectrum(N, sc)}
    need_grid = bool(cfg.section("time")["snapshots"]) or cfg.section("time")["steps"]
    if need_grid:
        grid = oscillator_grid(cfg.section("grid")["n"], sc)
        try:
            check_resolution(grid, N, sc)
        except ValueError as exc:
            raise ConfigError([f"grid.n: {exc}"]) from None
        plan["grid"] = grid
    steps = cfg.section("time")["steps"]
    if steps:
        symbol = hamiltonian_symbol(plan["spec"], plan["grid"])
        need = min_moyal_steps(symbol, t_end, sc)
        if steps < need:
            raise ConfigError([f"time.steps = {steps} violates the RK4 stability bound; "
                               f"needs >= {need}"])
        defect = kernel_hermiticity_defect(
            wigner_energy_rep(state, eps_chi_matrix(plan["spec"]), plan["grid"], sc), sc)
        if defect > INVARIANT_TOL:
            raise ConfigError([f"grid.n = {cfg.section('grid')['n']}: position kernels are not "
                               f"decayed where the grid wraps (Hermiticity defect {defect:.2e}); "
                               "increase grid.n"])
        plan["symbol"] = symbol
        plan["kernel_defect"] = defect
    return plan


def _exec_rotator(cfg: RunConfig, plan: dict, out: Path, rec: Record):
    sc = cfg.scales
    state, spec = plan["state"], plan["spec"]
    em = eps_chi_matrix(spec)
    tm = cfg.section("time")
    times = np.linspace(0.0, plan["t_end"], tm["samples"])
    cols = {k: [] for k in ("t", "mean_R2", "charge_norm", "mean_q", "mean_p")}
    for t in times:
        s = evolve_energy_rep(state, spec, t)
        q, p = trajectory_observable(s, em, sc)
        cols["t"].append(t)
        cols["mean_R2"].append(radius_observable(s, sc))
        cols["charge_norm"].append(s.charge_norm())
        cols["mean_q"].append(q)
        cols["mean_p"].append(p)
    write_csv(out / "timeseries.csv", cols)
    rec.artifacts.append("timeseries.csv")
    charge = np.asarray(cols["charge_norm"])
    r2 = np.asarray(cols["mean_R2"])
    rec.check("charge_norm_drift", np.max(np.abs(charge - state.charge_norm())), INVARIANT_TOL)
    rec.check("mean_R2_drift", np.max(np.abs(r2 - r2[0])) / r2[0], INVARIANT_TOL)

    if "grid" in plan:
        grid = plan["grid"]
        W0 = wigner_energy_rep(state, em, grid, sc)
        for i, t in enumerate(tm["snapshots"]):
            W = wigner_energy_rep(evolve_energy_rep(state, spec, t), em, grid, sc)
            d = W.structure_defects()
            rec.check(f"snapshot_{i:03d}_even_imag", d["even_imag"], INVARIANT_TOL)
            rec.check(f"snapshot_{i:03d}_odd_antisymmetry", d["odd_antisymmetry"], INVARIANT_TOL)
            rec.check(f"snapshot_{i:03d}_charge_norm",
                      abs(W.charge_norm() - state.charge_norm()), INVARIANT_TOL)
            if cfg.section("output")["grids"]:
                name = f"W_{i:03d}.fvwg"
                write_grid_file(out / name, W)
                rec.artifacts.append(name)
        if "symbol" in plan:
            res = evolve_moyal_rotator(W0, plan["symbol"], plan["t_end"], tm["steps"], sc)
            ref = wigner_energy_rep(evolve_energy_rep(state, spec, plan["t_end"]), em, grid, sc)
            d = res.W.structure_defects()
            rec.check("kernel_hermiticity", plan["kernel_defect"], INVARIANT_TOL)
            rec.check("moyal_vs_energy_rep", res.W.max_deviation(ref), MOYAL_TOL)
            rec.check("moyal_even_imag", d["even_imag"], INVARIANT_TOL)
            rec.check("moyal_odd_antisymmetry", d["odd_antisymmetry"], INVARIANT_TOL)
            rec.check("moyal_charge_norm",
                      abs(res.W.charge_norm() - W0.charge_norm()), INVARIANT_TOL)
            rec.results.update(moyal_steps=res.steps, moyal_step_bound=res.step_bound,
                               moyal_error_estimate=res.error_estimate)
            if cfg.section("output")["grids"]:
                write_grid_file(out / "W_moyal_end.fvwg", res.W)
                rec.artifacts.append("W_moyal_end.fvwg")
    rec.results["t_end"] = plan["t_end"]


# ---------------------------------------------------------------------------
# nlcs-scan

def _plan_nlcs(cfg: RunConfig) -> dict:
    sc, nl = cfg.scales, cfg.section("nlcs")
    R = max(nl["R_bar"]) * sc.a
    need = suggest_truncation(NonlinearCoherentSpec(R, 2, nl["convention"]), sc)
    if cfg.N < need:
        raise ConfigError([f"N = {cfg.N} truncates the packet at R_bar = {max(nl['R_bar']):g} a; "
                           f"needs N >= {need}"])
    return {}


def _exec_nlcs(cfg: RunConfig, plan: dict, out: Path, rec: Record):
    sc, nl = cfg.scales, cfg.section("nlcs")
    a = sc.a
    report = uncertainty_audit(nl["b"], np.asarray(nl["R_bar"]) * a, sc, N=cfg.N,
                               convention=nl["convention"])
    e = report.entries
    cols = {"R_bar": [x.R_bar / a for x in e],
            "dR2_closed": [x.dR2_closed for x in e],
            "dR2_direct": [x.dR2_direct for x in e],
            "dR2_variance": [x.dR2_variance for x in e],
            "reference": [x.reference for x in e],
            "uncertainty_ratio": [x.uncertainty_ratio for x in e],
            "flag_radius": [x.flag_radius for x in e],
            "flag_quadrature": [x.flag_quadrature for x in e]}
    write_csv(out / "scan.csv", cols)
    rec.artifacts.append("scan.csv")
    rec.check("closed_vs_direct", report.max_route_mismatch, ROUTE_TOL)
    if nl["b"] == 0:
        dev = max(abs(x.dR2_direct - sc.a2) for x in e) / sc.a2
        rec.check("undeformed_limit_a2", dev, INVARIANT_TOL)
    window = report.flag_window
    rec.results.update(
        b=nl["b"], convention=nl["convention"],
        flags_R_bar=[f / a for f in report.flags],
        flag_window=None if window is None else [window[0] / a, window[1] / a],
        quadrature_flags=[x.R_bar / a for x in e if x.flag_quadrature])


# ---------------------------------------------------------------------------
# modulation

def _plan_modulation(cfg: RunConfig) -> dict:
    sc, md, tm = cfg.scales, cfg.section("modulation"), cfg.section("time")
    try:
        setup = modulation_setup(sc.b, md["R_bar"], sc, N=cfg.N, convention=md["convention"],
                                 harmonic=md["harmonic"])
    except ValueError as exc:
        raise ConfigError([f"modulation: {exc}"]) from None
    T = tm["t_end"]
    if T is None:
        T = tm["envelope_periods"] * setup.envelope_period
    if not md["harmonic"] and T < 5.0 * setup.envelope_period:
        raise ConfigError([f"time.t_end = {T:.6g} covers fewer than 5 envelope periods; "
                           f"needs >= {5.0 * setup.envelope_period:.6g}"])
    samples = tm["samples"] or 2 * setup.min_samples(T)
    if samples < setup.min_samples(T):
        raise ConfigError([f"time.samples = {samples} undersamples the carrier; "
                           f"needs >= {setup.min_samples(T)}"])
    return {"T": T, "samples": samples}


def _exec_modulation(cfg: RunConfig, plan: dict, out: Path, rec: Record):
    sc, md = cfg.scales, cfg.section("modulation")
    res = modulation_experiment(sc.b, md["R_bar"], plan["T"], plan["samples"], sc, N=cfg.N,
                                convention=md["convention"], harmonic=md["harmonic"])
    write_csv(out / "timeseries.csv", {
        "t": res.t, "mean_R2": res.mean_R2, "charge_norm": res.charge_norm,
        "mean_q": res.mean_q, "mean_p": res.mean_p, "traj_R2": res.traj_R2,
        "envelope": res.envelope})
    rec.artifacts.append("timeseries.csv")
    dg = res.diagnostics
    rec.check("charge_norm_drift", dg["charge_norm_drift"], INVARIANT_TOL)
    rec.check("mean_R2_drift", dg["mean_R2_drift"], INVARIANT_TOL)
    if md["harmonic"]:
        rec.check("harmonic_envelope_flat", dg["envelope_variation"], FLAT_LEVEL)
    else:
        rec.check("Omega_vs_prediction", res.relative_error, MODULATION_TOL)
    rec.results.update(Omega_est=res.Omega_est, Omega_pred=res.Omega_pred,
                       Omega_nominal=res.Omega_nominal, n_star=res.n_star, flat=res.flat,
                       carrier=res.carrier, T=plan["T"], samples=plan["samples"],
                       diagnostics=dg)


# ---------------------------------------------------------------------------
# spectrum

def _plan_spectrum(cfg: RunConfig) -> dict:
    grid = oscillator_grid(cfg.section("grid")["n"], cfg.scales)
    try:
        check_resolution(grid, cfg.N, cfg.scales)
    except ValueError as exc:
        raise ConfigError([f"grid.n: {exc}"]) from None
    return {"grid": grid}


def _exec_spectrum(cfg: RunConfig, plan: dict, out: Path, rec: Record):
    sc, N, grid = cfg.scales, cfg.N, plan["grid"]
    spec = landau_spectrum(N, sc)
    mc2 = sc.rest_energy
    Hs = PhaseField.from_function(grid, lambda p, q: 1 + (2 / mc2) * (
        p * p / (2 * sc.mass) + sc.mass * sc.omega_c**2 * q * q / 2))
    X = star_sqrt(Hs, sc, tol=SPECTRUM_TOL, N=max(24, N + 4))
    star = mc2 * fock_projection(X, N, sc, diagonals=1).diagonal().real
    dense = mc2 * oracle.dense_sqrt_spectrum(sc.b, 2 * N)[:N]
    second = np.full(N, np.nan)
    second[1:-1] = spec.second_difference
    write_csv(out / "spectrum.csv", {"n": np.arange(N), "E_closed": spec.E, "E_star_sqrt": star,
                                     "E_dense_sqrt": dense, "second_difference": second})
    rec.artifacts.append("spectrum.csv")
    rec.check("star_sqrt_vs_closed", np.max(np.abs(star / spec.E - 1)), SPECTRUM_TOL)
    rec.check("star_sqrt_residual", X._meta["residual"], SPECTRUM_TOL)
    rec.check("dense_sqrt_vs_closed", np.max(np.abs(dense / spec.E - 1)), INVARIANT_TOL)
    d = eps_chi_matrix(spec).defects()
    rec.check("eps_chi_hyperbolic", d["hyperbolic"], 1e-13)
    rec.check("eps_symmetry", d["eps_symmetry"], 1e-14)
    rec.check("chi_antisymmetry", d["chi_antisymmetry"], 1e-14)


# ---------------------------------------------------------------------------
# batteries

def _exec_battery(battery):
    def execute(cfg, plan, out, rec):
        rec.checks.extend(battery())
    return execute


def _no_plan(cfg):
    return {}


RUNNERS = {
    "free-evolve": (_plan_free, _exec_free),
    "rotator-evolve": (_plan_rotator, _exec_rotator),
    "nlcs-scan": (_plan_nlcs, _exec_nlcs),
    "modulation": (_plan_modulation, _exec_modulation),
    "spectrum": (_plan_spectrum, _exec_spectrum),
    "kernels-selftest": (_no_plan, _exec_battery(kernels_selftest)),
    "oracle-verify": (_no_plan, _exec_battery(oracle_verify)),
}


def _manifest(cfg: RunConfig | None, status: str, code: int, rec: Record | None,
              errors: list[str], **extra) -> dict:
    m = {"fvwigner_version": __version__, "status": status, "exit_code": code,
         "errors": errors}
    if cfg is not None:
        m["config"] = cfg.echo()
    if rec is not None:
        m["checks"] = [c.as_dict() for c in rec.checks]
        m["results"] = rec.results
        m["artifacts"] = rec.artifacts
    m.update(extra)
    return m


def run_single(cfg: RunConfig, out: Path) -> int:
    """Run one (non-swept) config into ``out``; returns the exit code."""
    out.mkdir(parents=True, exist_ok=True)
    plan_fn, exec_fn = RUNNERS[cfg.kind]
    try:
        plan = plan_fn(cfg)
    except ConfigError as exc:
        write_manifest(out / "manifest.json",
                       _manifest(cfg, "config-error", EXIT_CONFIG, None, exc.errors))
        return EXIT_CONFIG
    rec = Record()
    errors = []
    try:
        exec_fn(cfg, plan, out, rec)
    except (ValueError, ArithmeticError, RuntimeError) as exc:
        errors.append(f"{type(exc).__name__}: {exc}")
    errors += [f"check failed: {name}" for name in rec.failed()]
    code = EXIT_INVARIANT if errors else EXIT_OK
    write_manifest(out / "manifest.json",
                   _manifest(cfg, "fail" if errors else "pass", code, rec, errors))
    return code


def run(cfg: RunConfig, out, threads: int = 1) -> int:
    """Run ``cfg``, expanding sweeps into ``out/child-XXX`` directories."""
    out = Path(out)
    if not cfg.sweep:
        return run_single(cfg, out)
    children = cfg.children()
    out.mkdir(parents=True, exist_ok=True)
    dirs = [out / f"child-{i:03d}" for i in range(len(children))]
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        codes = list(pool.map(run_single, [c for _, c in children], dirs))
    summary = [{"index": i, "dir": d.name, "overrides": ov, "exit_code": code}
               for i, ((ov, _), d, code) in enumerate(zip(children, dirs, codes))]
    code = max(codes)
    status = {EXIT_OK: "pass", EXIT_CONFIG: "config-error"}.get(code, "fail")
    write_manifest(out / "manifest.json",
                   _manifest(cfg, status, code, None, [], children=summary))
    return code


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fvwigner", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in ("run",) + KINDS:
        sp = sub.add_parser(kind, help="use the kind named in the config" if kind == "run"
                            else f"{kind} experiment")
        needs = kind in ("run", "free-evolve", "rotator-evolve")
        sp.add_argument("--config", type=Path, required=needs, help="TOML run description")
        sp.add_argument("--out", type=Path, required=True, help="output directory")
        sp.add_argument("--threads", type=int, default=1, help="parallel sweep children")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    kind = None if args.command == "run" else args.command
    if args.threads < 1:
        print("fvwigner: --threads must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = parse_config("", kind) if args.config is None else load_config(args.config, kind)
    except ConfigError as exc:
        for e in exc.errors:
            print(f"fvwigner: config error: {e}", file=sys.stderr)
        args.out.mkdir(parents=True, exist_ok=True)
        write_manifest(args.out / "manifest.json",
                       _manifest(None, "config-error", EXIT_CONFIG, None, exc.errors))
        return EXIT_CONFIG
    code = run(cfg, args.out, args.threads)
    label = {EXIT_OK: "pass", EXIT_CONFIG: "config error"}.get(code, "invariant failure")
    print(f"fvwigner {cfg.kind}: {label} (manifest: {args.out / 'manifest.json'})")
    return code


if __name__ == "__main__":
    sys.exit(main())
