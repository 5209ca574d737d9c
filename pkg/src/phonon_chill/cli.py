"""Command-line front end: ``phonon-chill <command> --config scenario.json --out dir``."""
from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
import tempfile
from typing import Optional, Sequence

import numpy as np

from . import cooling, lindblad, schemes, spectrum
from .operators import HilbertSpace
from .schemes import ConfigError, SchemeKind
from .units import CONSTANTS, Scenario, preset, preset_names, run_time

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("spectrum", "coefficients", "evolve", "steadystate", "robust", "compare", "preset")


# --- output helpers -------------------------------------------------------

def _atomic_write(path: str, text: str) -> None:
    folder = os.path.dirname(os.path.abspath(path))
    os.makedirs(folder, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    return f"{float(x):.9e}"


def write_csv(path: str, header: Sequence[str], rows: Sequence[Sequence[float]]) -> None:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError("CSV row length does not match header")
        if not all(math.isfinite(float(v)) for v in row):
            raise ArithmeticError(f"non-finite value in CSV row {row}")
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def write_json(path: str, payload: dict) -> None:
    body = dict(payload)
    body["constants"] = CONSTANTS
    _atomic_write(path, json.dumps(_jsonable(body), indent=2, sort_keys=True) + "\n")


# --- commands ---------------------------------------------------------------

def _config(args, scen: Scenario) -> schemes.SchemeConfig:
    cfg = scen.config()
    fock = args.fock if args.fock is not None else scen.run.get("fock_dim")
    if fock is not None:
        cfg = cfg.replace(fock_dim=int(fock))
        cfg.validate()
    return cfg


def _tol(args, scen: Scenario) -> float:
    return float(args.tol if args.tol is not None else scen.run.get("tol", 1e-8))


def cmd_spectrum(args, scen: Scenario) -> None:
    cfg = _config(args, scen)
    run = scen.run
    lo = args.omega_min if args.omega_min is not None else run.get("omega_min", -2.0)
    hi = args.omega_max if args.omega_max is not None else run.get("omega_max", 3.0)
    steps = args.omega_steps if args.omega_steps is not None else run.get("omega_steps", 1001)
    grid = spectrum.default_grid(cfg.omega_k, lo, hi, int(steps))
    comps = cfg.kind is SchemeKind.ASYMMETRIC
    res = spectrum.spectrum(cfg, grid, components=comps)
    header = ["omega", "S_re", "S_im", "S_abs"]
    cols = [res.s_values]
    if comps:
        header += ["S_eit_re", "S_eit_im", "S_stark_re", "S_stark_im", "S_int_re", "S_int_im"]
        cols += list(res.components)
    rows = []
    for i, w in enumerate(grid):
        if i in res.singular:
            continue
        row = [w, res.s_values[i].real, res.s_values[i].imag, abs(res.s_values[i])]
        for c in cols[1:]:
            row += [c[i].real, c[i].imag]
        rows.append(row)
    write_csv(os.path.join(args.out, "spectrum.csv"), header, rows)
    finite = np.abs(res.s_values[np.isfinite(res.s_values)])
    write_json(os.path.join(args.out, "spectrum.json"), {
        "scheme": cfg.to_dict(), "a_plus": res.a_plus, "a_minus": res.a_minus,
        "max_abs_S": float(finite.max()) if finite.size else 0.0,
        "singular_omega": [float(grid[i]) for i in res.singular],
    })


def cmd_coefficients(args, scen: Scenario) -> None:
    cfg = _config(args, scen)
    ap, am = spectrum.coefficients(cfg)
    out = {"scheme": cfg.to_dict(), "a_plus": ap, "a_minus": am, "cooling_rate": am - ap}
    try:
        out["n_ss_rate_eq"] = cooling.rate_equation_nss(ap, am, cfg.n_thermal, cfg.gamma_k)
    except cooling.HeatingDominatedError as exc:
        out["n_ss_rate_eq"] = None
        out["warning"] = str(exc)
    if cfg.kind is SchemeKind.ASYMMETRIC:
        out["analytic_heating"] = spectrum.analytic_heating(cfg)
    if cfg.kind in (SchemeKind.ASYMMETRIC, SchemeKind.SYMMETRIC):
        peak, point = spectrum.analytic_cooling_peak(cfg)
        out["analytic_cooling_peak"] = peak
        out["analytic_peak_point"] = point
    write_json(os.path.join(args.out, "coefficients.json"), out)


def _n0(scen: Scenario) -> float:
    return float(scen.run.get("n0", 1.0))


def cmd_evolve(args, scen: Scenario) -> None:
    cfg = _config(args, scen)
    t_final = run_time(scen, args.t_final)
    res = cooling.cooling_trajectory(cfg, n0=_n0(scen), t_final=t_final,
                                     n_samples=int(scen.run.get("n_samples", 201)), tol=_tol(args, scen))
    tr = res.trajectory
    header = ["t", "n", "p_A2", "p_plus1", "p_0", "p_minus1", "trace_error", "hermiticity_error", "min_eigenvalue"]
    rows = [[tr.times[i], tr.n[i], *tr.populations[i], tr.trace_error[i], tr.hermiticity_error[i], tr.min_eigenvalue[i]]
            for i in range(len(tr.times))]
    write_csv(os.path.join(args.out, "trajectory.csv"), header, rows)
    summary = res.summary()
    summary["scheme"] = cfg.to_dict()
    summary["t_final"] = t_final
    if scen.si is not None:
        summary["omega_k_rad_s"] = scen.omega_k_si
        summary["t_final_s"] = t_final / scen.omega_k_si
    write_json(os.path.join(args.out, "evolve.json"), summary)


def cmd_steadystate(args, scen: Scenario) -> None:
    cfg = _config(args, scen)
    space = HilbertSpace(cfg.fock_dim)
    h = schemes.bare_hamiltonian(cfg, space)
    diss = schemes.dissipators(cfg, space)
    ap, am = spectrum.coefficients(cfg)
    rho = lindblad.steady_state(h, diss, space, rate_hint=max(am - ap + cfg.gamma_k, 1e-12)).rho
    out = {
        "scheme": cfg.to_dict(),
        "mean_phonon": lindblad.mean_phonon(rho, space),
        "internal_populations": lindblad.internal_populations(rho, space),
        "phonon_distribution": lindblad.phonon_distribution(rho, space),
        "purity": float(np.real(np.trace(rho @ rho))),
        "min_eigenvalue": lindblad.min_eigenvalue(rho),
    }
    if cfg.kind in (SchemeKind.ASYMMETRIC, SchemeKind.SYMMETRIC):
        psi = schemes.ansatz_steady_state(cfg, space)
        out["ansatz_fidelity"] = float(np.real(psi.conj() @ rho @ psi))
    write_json(os.path.join(args.out, "steadystate.json"), out)


def cmd_robust(args, scen: Scenario) -> None:
    cfg = _config(args, scen)
    run = scen.run
    parameter = run.get("parameter", "Omega_g" if cfg.kind is SchemeKind.ASYMMETRIC else "Delta_g")
    mags = np.geomspace(0.005, 0.05, 6)
    deviations = run.get("deviations", np.concatenate([-mags[::-1], mags]).tolist())
    rep = cooling.robustness_scan(cfg, parameter, deviations)
    write_csv(os.path.join(args.out, "robust.csv"), ["deviation", "delta_n"], rep.rows())
    write_json(os.path.join(args.out, "robust.json"), {
        "scheme": cfg.to_dict(), "parameter": parameter, "slope": rep.slope,
        "slope_negative": rep.slope_negative, "slope_positive": rep.slope_positive,
        "n_reference": rep.n_reference,
    })


def cmd_compare(args, scen: Scenario) -> None:
    base = _config(args, scen)
    t_final = run_time(scen, args.t_final)
    kinds = scen.run.get("schemes", [k.value for k in SchemeKind])
    n0 = _n0(scen)
    cfgs = cooling.scheme_set(base.lam, base.Omega, base.Gamma, t_final, n0=n0, kinds=kinds,
                              omega_k=base.omega_k, gamma_k=base.gamma_k, n_thermal=base.n_thermal,
                              fock_dim=base.fock_dim)
    rows = cooling.compare_schemes(cfgs, t_final, n0=n0, threads=args.threads,
                                   n_samples=int(scen.run.get("n_samples", 101)), tol=_tol(args, scen))
    ok = [r for r in rows if r.error is None]
    write_csv(os.path.join(args.out, "compare.csv"), ["index", "rank", "n_final", "fitted_w", "n_ss_rate_eq"],
              [[r.index, r.rank, r.n_final, r.fitted_w, r.n_ss_rate_eq if math.isfinite(r.n_ss_rate_eq) else -1.0]
               for r in ok])
    write_json(os.path.join(args.out, "compare.json"), {
        "t_final": t_final,
        "ranking": [r.kind for r in sorted(ok, key=lambda r: r.rank)],
        "rows": [{"index": r.index, "kind": r.kind, "rank": r.rank, "n_final": r.n_final,
                  "fitted_w": r.fitted_w, "n_ss_rate_eq": r.n_ss_rate_eq, "error": r.error,
                  "scheme": cfgs[r.index].to_dict()} for r in rows],
    })


def cmd_preset(args, scen: Optional[Scenario]) -> None:
    if args.name is None:
        write_json(os.path.join(args.out, "presets.json"), {"presets": preset_names()})
        print("\n".join(preset_names()))
        return
    _atomic_write(os.path.join(args.out, f"{args.name}.json"), preset(args.name).dumps() + "\n")


_PLOT_TEMPLATE = """# Generated helper: plot {csv} (requires matplotlib)
import csv
import matplotlib.pyplot as plt

with open({csv!r}) as fh:
    rows = list(csv.reader(fh))
header, data = rows[0], [[float(x) for x in r] for r in rows[1:]]
x = [r[0] for r in data]
for j in {columns}:
    plt.plot(x, [r[j] for r in data], label=header[j])
plt.xlabel(header[0])
plt.legend()
plt.savefig({png!r}, dpi=150)
"""

_PLOT_COLUMNS = {"spectrum": ("spectrum.csv", [1, 2]), "evolve": ("trajectory.csv", [1]),
                 "robust": ("robust.csv", [1]), "compare": ("compare.csv", [2])}


def write_plot_script(command: str, out: str) -> None:
    if command not in _PLOT_COLUMNS:
        return
    csv_name, cols = _PLOT_COLUMNS[command]
    text = _PLOT_TEMPLATE.format(csv=csv_name, columns=cols, png=csv_name.replace(".csv", ".png"))
    _atomic_write(os.path.join(out, f"plot_{command}.py"), text)


_DISPATCH = {
    "spectrum": cmd_spectrum, "coefficients": cmd_coefficients, "evolve": cmd_evolve,
    "steadystate": cmd_steadystate, "robust": cmd_robust, "compare": cmd_compare, "preset": cmd_preset,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="phonon-chill", description="Dark-state ground-state cooling of spin-vibration systems.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="scenario JSON file")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--name", help="preset name (preset command)")
    p.add_argument("--fock", type=int, help="Fock-space dimension")
    p.add_argument("--tol", type=float, help="integrator relative tolerance")
    p.add_argument("--omega-min", type=float)
    p.add_argument("--omega-max", type=float)
    p.add_argument("--omega-steps", type=int)
    p.add_argument("--t-final", type=float, help="horizon in units of 1/omega_k")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--plot-script", action="store_true", help="also write a matplotlib script for the CSV")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def _fail(args, code: int, exc: BaseException) -> int:
    payload = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
    print(json.dumps(payload), file=sys.stderr)
    if args is not None and getattr(args, "out", None):
        try:
            write_json(os.path.join(args.out, "error.json"), payload)
        except OSError:
            pass
    return code


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        scen = None
        if args.command != "preset":
            if args.config is None:
                raise ConfigError("--config is required")
            with open(args.config, encoding="utf-8") as fh:
                scen = Scenario.loads(fh.read())
        _DISPATCH[args.command](args, scen)
        if args.plot_script:
            write_plot_script(args.command, args.out)
    except (ConfigError, OSError, KeyError, TypeError) as exc:
        return _fail(args, EXIT_CONFIG, exc)
    except (ArithmeticError, np.linalg.LinAlgError, lindblad.IntegrationError,
            lindblad.DegenerateSteadyStateError, ValueError) as exc:
        return _fail(args, EXIT_NUMERIC, exc)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
