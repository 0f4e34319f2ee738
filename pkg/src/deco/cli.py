"""Command-line front end: ``deco kernels|compare|lutz|dissipator|evolve|fdr-check``.

Exit codes: 0 success, 1 file I/O failure, 2 invalid input (schema,
validation, bad flags), 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .dissipator import algebraic_dissipator
from .errors import (DecoError, InputError, IoError, NonPositiveKernel, NumericalError,
                     ValidationError)
from .evolution import (exact_bath_trajectory, magnus_trajectory, master_equation_evolve,
                        Trajectory)
from .grids import FrequencyGrid
from .ordering import check_kernel_positive, compare_environments, fdr_fit, lutz_compare
from .report import Report, emit_report
from .scenario import Scenario, document_digest, parse_density, parse_scenario
from .spectral import DiscreteBathSpec, ThermalReservoirSpec, total_damping

EXIT_OK, EXIT_IO, EXIT_INPUT, EXIT_NUMERICAL = 0, 1, 2, 3
COMMANDS = ("kernels", "compare", "lutz", "dissipator", "evolve", "fdr-check")

log = logging.getLogger("deco")


def _load(path: str) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoError(f"cannot read {path}: {exc.strerror or exc}") from exc
    return parse_scenario(text)


def _freq_grid(sc: Scenario, omega_max: float | None = None) -> FrequencyGrid:
    return FrequencyGrid.symmetric(omega_max or sc.omega_max(), sc.grids.n_omega)


def _require_positive(sc: Scenario, kernel) -> None:
    rep = check_kernel_positive(kernel, _freq_grid(sc), sc.tolerances.tol_rel)
    if not rep.is_psd:
        raise NonPositiveKernel(
            f"scenario kernel is not positive (min eigenvalue {rep.min_eigenvalue:.3g} "
            f"at omega={rep.worst_point:.6g})")


def _checkpoints(sc: Scenario) -> np.ndarray:
    return np.linspace(0.0, sc.grids.t_max, sc.grids.n_t)


def _record_every(sc: Scenario, dt: float) -> int:
    spacing = sc.grids.t_max / (sc.grids.n_t - 1)
    k = int(round(spacing / dt))
    if k < 1 or abs(k * dt - spacing) > 1e-9 * spacing:
        raise ValidationError(f"grids.dt: {dt} does not divide the checkpoint spacing {spacing}")
    return k


def _matrix_pairs(m: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.atleast_2d(m)]


# --- commands ---------------------------------------------------------------

def cmd_kernels(sc: Scenario, args) -> tuple[dict, list, list]:
    kernel = sc.kernel()
    grid = _freq_grid(sc)
    vals = kernel.freq_eval(grid.points)
    n = kernel.n_channels
    cols = ["omega"]
    for a in range(n):
        for b in range(n):
            cols += [f"alpha_re_{a}{b}", f"alpha_im_{a}{b}"]
    rows = []
    for om, mat in zip(grid.points, vals):
        row = [float(om)]
        for z in mat.reshape(-1):
            row += [float(z.real), float(z.imag)]
        rows.append(row)
    out = {
        "n_channels": n,
        "columns": cols,
        "rows": rows,
        "lines": [{"omega": float(w), "weight": _matrix_pairs(W)} for w, W in kernel.lines],
        "local": None if kernel.local is None else _matrix_pairs(kernel.local),
    }
    return out, cols, rows


def _order_table(res: dict) -> tuple[list, list]:
    tol = res["tolerances"]
    cols = ["verdict", "min_eig_forward", "min_eig_backward", "worst_point",
            "tol_rel", "tol_equivalent", "tol_strict"]
    row = [res["verdict"], res["min_eig_forward"], res["min_eig_backward"], res["worst_point"],
           tol["tol_rel"], tol["tol_equivalent"], tol["tol_strict"]]
    return cols, [row]


def cmd_compare(sc: Scenario, args) -> tuple[dict, list, list]:
    if not args.scenario_b:
        raise ValidationError("compare needs --scenario-b")
    other = _load(args.scenario_b)
    ka, kb = sc.kernel(), other.kernel()
    grid = FrequencyGrid.symmetric(max(sc.omega_max(), other.omega_max()),
                                   max(sc.grids.n_omega, other.grids.n_omega))
    res = compare_environments(ka, kb, grid, sc.tolerances).to_dict()
    cols, rows = _order_table(res)
    return res, cols, rows


def cmd_lutz(sc: Scenario, args) -> tuple[dict, list, list]:
    p = sc.lutz
    if p is None:
        raise ValidationError("lutz: the scenario has no lutz block")
    grid = None
    if sc.grids.omega_max is not None:
        grid = FrequencyGrid.symmetric(sc.grids.omega_max, sc.grids.n_omega)
    res = lutz_compare(p.gamma0, p.lambda_high, p.lambda_low, p.t_hot, p.t_cold, p.family,
                       grid, sc.tolerances).to_dict()
    cols, rows = _order_table(res)
    return res, cols, rows


def cmd_dissipator(sc: Scenario, args) -> tuple[dict, list, list]:
    kernel = sc.kernel()
    _require_positive(sc, kernel)
    dm = algebraic_dissipator(sc.system, kernel, sc.grids.t_max, sc.grids.n_tau,
                              sc.grids.rate_steps)
    out = dm.to_dict()
    out["kernel_positive"] = dm.kernel_positive
    d2 = dm.matrix.shape[0]
    cols = ["I", "J", "re", "im"]
    rows = [[i, j, float(dm.matrix[i, j].real), float(dm.matrix[i, j].imag)]
            for i in range(d2) for j in range(d2)]
    return out, cols, rows


def cmd_evolve(sc: Scenario, args) -> tuple[dict, list, list]:
    rho0 = sc.rho0 if args.rho0 is None else parse_density(args.rho0, sc.system.dim)
    times = _checkpoints(sc)
    dt = sc.grids.dt if args.dt is None else args.dt
    if not dt > 0:
        raise ValidationError("--dt must be positive")
    kernel = sc.kernel()
    _require_positive(sc, kernel)
    if args.method == "magnus":
        traj = magnus_trajectory(sc.system, kernel, times, rho0, sc.grids.n_tau)
    elif args.method == "master":
        every = _record_every(sc, dt)
        traj = master_equation_evolve(sc.system, kernel, sc.grids.t_max, dt, rho0,
                                      sc.step_tol, every)
    else:
        baths = [e for e in sc.environments if isinstance(e, DiscreteBathSpec)]
        if len(baths) != len(sc.environments):
            raise ValidationError("environments: the exact method needs discrete baths only")
        every = _record_every(sc, dt)
        fine = np.linspace(0.0, sc.grids.t_max, every * (sc.grids.n_t - 1) + 1)
        full = exact_bath_trajectory(sc.system, baths, fine, rho0)
        traj = Trajectory(times, full.states[::every], full.method)
    cols, rows = traj.table()
    return {"method": traj.method, "columns": cols, "rows": rows}, cols, rows


def cmd_fdr_check(sc: Scenario, args) -> tuple[dict, list, list]:
    thermal = sc.thermal_environments()
    if len(thermal) != len(sc.environments):
        raise ValidationError("environments: fdr-check needs thermal reservoirs only")
    kernel = sc.kernel()
    if kernel.n_channels != 1:
        raise ValidationError("system.couplings: fdr-check needs a single channel")
    t_star, resid = fdr_fit(kernel, total_damping(thermal), _freq_grid(sc))
    out = {"t_star": t_star, "residual": resid, "obeys_fdr": bool(resid < 1e-6)}
    return out, ["t_star", "residual", "obeys_fdr"], [[t_star, resid, out["obeys_fdr"]]]


HANDLERS = {
    "kernels": cmd_kernels,
    "compare": cmd_compare,
    "lutz": cmd_lutz,
    "dissipator": cmd_dissipator,
    "evolve": cmd_evolve,
    "fdr-check": cmd_fdr_check,
}


def run_command(command: str, args) -> Report:
    """Parse the scenario(s) named in ``args``, run ``command`` and build its report."""
    if command not in HANDLERS:
        raise ValidationError(f"unknown command {command!r}")
    start = time.perf_counter()
    sc = _load(args.scenario)
    docs = [sc.document]
    if getattr(args, "scenario_b", None):
        docs.append(_load(args.scenario_b).document)
    flags = {k: getattr(args, k, None) for k in ("method", "dt")}
    if getattr(args, "rho0", None):
        docs.append(Path(args.rho0).read_text())
    outputs, cols, rows = HANDLERS[command](sc, args)
    digest = document_digest({"command": command, "inputs": docs, "flags": flags})
    wall = time.perf_counter() - start if getattr(args, "timing", False) else None
    return Report(command, digest, outputs, __version__, wall, cols, rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deco", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"deco {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--scenario", required=True, metavar="PATH")
        p.add_argument("--out", metavar="PATH", help="output file (default stdout)")
        p.add_argument("--format", choices=("json", "csv"), default="json")
        p.add_argument("--timing", action="store_true",
                       help="record wall time (reports are then no longer byte-reproducible)")
        if name == "compare":
            p.add_argument("--scenario-b", required=True, metavar="PATH")
        if name == "evolve":
            p.add_argument("--method", choices=("master", "magnus", "exact"), default="magnus")
            p.add_argument("--rho0", metavar="PATH")
            p.add_argument("--dt", type=float)
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="deco: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    try:
        report = run_command(args.command, args)
        emit_report(report, args.format, args.out)
    except IoError as exc:
        print(f"deco: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except InputError as exc:
        print(f"deco: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as exc:
        print(f"deco: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except DecoError as exc:
        print(f"deco: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"deco: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
