"""Command-line entry point.

Subcommands: simulate | check | sweep | report.  Configuration is a single
strict JSON file (unknown keys are errors) with a top-level version field;
CSV output uses '.' decimals, ',' separators and 17 significant digits, so
identical configs and seeds reproduce byte-identical files.

Exit codes: 0 success (and all verdicts true for check), 1 numerical failure
or any false verdict, 2 configuration errors.
"""
from __future__ import annotations

import argparse
import json
import sys as _sys
from pathlib import Path

import numpy as np

from . import comparison as cmp
from . import dynamics as dyn
from . import lie as lie_mod
from .errors import ContractError, NhvakError, NumericalError
from .systems import REGISTRY, build_from_registry

_CONFIG_KEYS = {"version", "system", "params", "initial", "horizon", "step",
                "seed", "family_size", "multiplier_samples", "tolerances",
                "criteria", "multiplier_initial", "workers", "algebra", "splitting"}

_DEFAULTS = {"horizon": 10.0, "step": 1e-3, "seed": 42, "family_size": 8,
             "multiplier_samples": 200, "workers": 1}


class ConfigError(ContractError):
    pass


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(raw) - _CONFIG_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if raw.get("version") != 1:
        raise ConfigError("config must declare \"version\": 1")
    if "system" not in raw:
        raise ConfigError("config must name a system")
    cfg = dict(_DEFAULTS)
    cfg.update(raw)
    cfg.setdefault("params", {})
    cfg.setdefault("tolerances", {})
    cfg.setdefault("criteria", [])
    if cfg["horizon"] < 0:
        raise ConfigError("horizon must be nonnegative")
    if cfg["step"] <= 0:
        raise ConfigError("step must be positive")
    for name in cfg["tolerances"]:
        if name not in cmp.CRITERIA:
            raise ConfigError(f"tolerance override for unknown criterion '{name}'")
    return cfg


def _apply_structure_sections(cfg, system):
    """Validate an inline algebra section and apply a complement override.

    The algebra section spells the system's structure constants as sparse
    (a, b, d, value) entries with antisymmetry auto-completed; it must agree
    with the constants of the selected system.  The splitting section may
    replace the complement d' (the comparison verdicts are independent of
    that choice); the constraint subspace d itself is system data and cannot
    be overridden.
    """
    import dataclasses

    if cfg.get("algebra") is not None:
        section = dict(cfg["algebra"])
        unknown = set(section) - {"dim", "labels", "constants"}
        if unknown:
            raise ConfigError(f"unknown algebra keys: {sorted(unknown)}")
        try:
            alg = lie_mod.algebra_from_entries(
                int(section.get("dim", system.dim)),
                section.get("labels", system.algebra.basis_labels),
                section.get("constants", []))
        except ContractError as exc:
            raise ConfigError(f"bad algebra section: {exc}") from exc
        if alg.dim != system.dim or not np.array_equal(alg.c, system.algebra.c):
            raise ConfigError("algebra section disagrees with the structure "
                              f"constants of system '{system.name}'")
    if cfg.get("splitting") is not None:
        section = dict(cfg["splitting"])
        unknown = set(section) - {"dprime_basis"}
        if unknown:
            raise ConfigError(f"unknown splitting keys: {sorted(unknown)}")
        Dp = np.asarray(section.get("dprime_basis"), dtype=float)
        if Dp.ndim != 2 or Dp.shape != (system.dim, system.dim - system.k):
            raise ConfigError(f"dprime_basis must be {system.dim} x "
                              f"{system.dim - system.k} (columns span d')")
        try:
            new_split = lie_mod.ConstraintSplitting.from_bases(
                system.splitting.d_basis, Dp)
        except (ContractError, NumericalError) as exc:
            raise ConfigError(f"bad splitting section: {exc}") from exc
        system = dataclasses.replace(system, splitting=new_split)
    return system


def _build(cfg):
    system = build_from_registry(cfg["system"], cfg["params"])
    system = _apply_structure_sections(cfg, system)
    defaults = REGISTRY[cfg["system"]][1]
    initial = dict(cfg.get("initial") or {})
    unknown = set(initial) - {"q0", "v0"}
    if unknown:
        raise ConfigError(f"unknown initial-condition keys: {sorted(unknown)}")
    q0 = np.asarray(initial.get("q0", defaults["q0"]), dtype=float)
    v0 = np.asarray(initial.get("v0", defaults["v0"]), dtype=float)
    if q0.shape != (system.dim,):
        raise ConfigError(f"q0 must have length {system.dim}")
    if v0.shape != (system.k,):
        raise ConfigError(f"v0 must carry {system.k} constraint coordinates")
    if cfg["family_size"] < (system.dim - system.k) + 1:
        raise ConfigError("family_size must be at least dim(d') + 1")
    return system, q0, v0


def _tol(cfg, criterion, fallback):
    return float(cfg["tolerances"].get(criterion, fallback))


def report_to_dict(report: cmp.ComparisonReport, system, params, seed) -> dict:
    return {
        "criterion": report.criterion,
        "residual": report.residual,
        "tolerance": report.tolerance,
        "verdict": report.verdict,
        "samples": report.samples,
        "system": system,
        "params": {k: params[k] for k in sorted(params)},
        "seed": seed,
    }


def _run_criteria(system, traj, criteria, cfg):
    """Evaluate the named criteria; multiplier-dependent ones share work."""
    reports = []
    tab = dyn.trajectory_tables(system, traj)
    best = None
    for crit in criteria:
        if crit == "NH_IS_UNCONSTRAINED":
            rep = cmp.check_unconstrained(system, traj,
                                          tol=_tol(cfg, crit, cmp.POINTWISE_TOL),
                                          _tables=tab)
        elif crit == "NH_IS_VAK_INTEGRAL":
            rep = cmp.check_nh_is_vak_integral(
                system, traj, n=cfg["family_size"], seed=cfg["seed"],
                tol=_tol(cfg, crit, cmp.INTEGRAL_TOL),
                workers=cfg["workers"], _tables=tab)
        elif crit == "NH_IS_VAK_MULTIPLIER":
            rep, best = cmp.check_nh_is_vak_multiplier(
                system, traj, m_samples=cfg["multiplier_samples"],
                tol=_tol(cfg, crit, cmp.INTEGRAL_TOL), _tables=tab)
        elif crit == "VAK_IS_NH":
            if best is None:
                _, best = cmp.check_nh_is_vak_multiplier(
                    system, traj, m_samples=cfg["multiplier_samples"], _tables=tab)
            rep = cmp.check_vak_is_nh(system, traj, best,
                                      tol=_tol(cfg, crit, cmp.POINTWISE_TOL))
        else:
            raise ConfigError(f"unknown criterion '{crit}'")
        reports.append(rep)
    return reports


def cmd_simulate(cfg, out_dir: Path) -> int:
    system, q0, v0 = _build(cfg)
    traj = dyn.integrate_nonholonomic(system, q0, v0, cfg["horizon"], cfg["step"])
    lam = None
    if cfg.get("multiplier_initial") is not None:
        lam0 = np.asarray(cfg["multiplier_initial"], dtype=float)
        if lam0.shape != (system.dim - system.k,):
            raise ConfigError(f"multiplier_initial must have length {system.dim - system.k}")
        lam = dyn.solve_multiplier(system, traj, lam0)
    out_dir.mkdir(parents=True, exist_ok=True)
    traj_path = out_dir / "trajectory.csv"
    dyn.write_trajectory_csv(traj, traj_path)
    print(f"wrote {traj_path} ({len(traj)} samples)")
    if lam is not None:
        mult_path = out_dir / "multiplier.csv"
        with open(mult_path, "w", encoding="utf-8") as fh:
            cols = ["t"] + [f"lam{i}" for i in range(lam.lam.shape[1])]
            fh.write(",".join(cols) + "\n")
            for ti, row in zip(lam.t, lam.lam):
                fh.write(",".join(_fmt(x) for x in (ti, *row)) + "\n")
        print(f"wrote {mult_path}")
    return 0


def cmd_check(cfg, out_dir: Path, criteria=None) -> int:
    criteria = list(criteria if criteria is not None else cfg["criteria"])
    if not criteria:
        raise ConfigError("no criteria requested")
    for crit in criteria:
        if crit not in cmp.CRITERIA:
            raise ConfigError(f"unknown criterion '{crit}'")
    system, q0, v0 = _build(cfg)
    traj = dyn.integrate_nonholonomic(system, q0, v0, cfg["horizon"], cfg["step"])
    reports = _run_criteria(system, traj, criteria, cfg)
    out_dir.mkdir(parents=True, exist_ok=True)
    payload = [report_to_dict(r, system.name, system.params, cfg["seed"]) for r in reports]
    report_path = out_dir / "reports.json"
    with open(report_path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")
    print(f"{'criterion':<22} {'residual':>13} {'tolerance':>10} verdict")
    for rep in reports:
        print(f"{rep.criterion:<22} {rep.residual:>13.4e} {rep.tolerance:>10.1e} "
              f"{'true' if rep.verdict else 'false'}")
    print(f"wrote {report_path}")
    return 0 if all(r.verdict for r in reports) else 1


def cmd_sweep(cfg, out_dir: Path, param: str, values, criterion: str) -> int:
    if criterion not in cmp.CRITERIA:
        raise ConfigError(f"unknown criterion '{criterion}'")
    rows = []
    for value in values:
        params = dict(cfg["params"])
        params[param] = value
        sub = dict(cfg)
        sub["params"] = params
        try:
            system, q0, v0 = _build(sub)
        except (ContractError, TypeError) as exc:
            raise ConfigError(f"cannot build system with {param}={value}: {exc}") from exc
        traj = dyn.integrate_nonholonomic(system, q0, v0, sub["horizon"], sub["step"])
        rep = _run_criteria(system, traj, [criterion], sub)[0]
        xy = system.params.get("XY", "")
        rows.append((value, xy, rep.residual, rep.verdict))
    out_dir.mkdir(parents=True, exist_ok=True)
    sweep_path = out_dir / "sweep.csv"
    with open(sweep_path, "w", encoding="utf-8") as fh:
        fh.write("value,XY,residual,verdict\n")
        for value, xy, residual, verdict in rows:
            xy_s = _fmt(xy) if xy != "" else ""
            fh.write(f"{_fmt(value)},{xy_s},{_fmt(residual)},{str(verdict).lower()}\n")
    print(f"{param:>12} {'XY':>12} {'residual':>13} verdict")
    for value, xy, residual, verdict in rows:
        xy_s = f"{xy:12.6g}" if xy != "" else " " * 12
        print(f"{value:12.6g} {xy_s} {residual:13.4e} {'true' if verdict else 'false'}")
    print(f"wrote {sweep_path}")
    return 0


def cmd_report(path) -> int:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read report {path}: {exc}") from exc
    if isinstance(payload, dict):
        payload = [payload]
    print(f"{'system':<16} {'criterion':<22} {'residual':>13} {'tolerance':>10} "
          f"{'samples':>8} verdict")
    for rep in payload:
        print(f"{rep.get('system', '?'):<16} {rep.get('criterion', '?'):<22} "
              f"{rep.get('residual', float('nan')):>13.4e} "
              f"{rep.get('tolerance', float('nan')):>10.1e} "
              f"{rep.get('samples', 0):>8} "
              f"{'true' if rep.get('verdict') else 'false'}")
    return 0


def _parse_tol_overrides(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"bad --tol '{item}', expected NAME=VALUE")
        name, _, value = item.partition("=")
        try:
            out[name] = float(value)
        except ValueError as exc:
            raise ConfigError(f"bad --tol value '{value}'") from exc
    return out


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhvak",
        description="simulate constrained systems and compare nonholonomic "
                    "and vakonomic dynamics")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, help="JSON run configuration")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override config seed")
        p.add_argument("--tol", action="append", default=None, metavar="NAME=VALUE",
                       help="override a criterion tolerance")

    p_sim = sub.add_parser("simulate", help="integrate and write trajectory CSV")
    common(p_sim)
    p_chk = sub.add_parser("check", help="run comparison criteria")
    common(p_chk)
    p_chk.add_argument("--criteria", default=None,
                       help="comma-separated criterion list (overrides config)")
    p_swp = sub.add_parser("sweep", help="sweep one parameter and re-run a criterion")
    common(p_swp)
    p_swp.add_argument("--param", required=True, help="parameter name to sweep")
    p_swp.add_argument("--values", required=True,
                       help="comma-separated parameter values")
    p_swp.add_argument("--criteria", default="NH_IS_VAK_INTEGRAL",
                       help="criterion evaluated per row")
    p_rep = sub.add_parser("report", help="pretty-print a JSON report file")
    p_rep.add_argument("path", help="reports.json produced by check")
    return parser


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        if args.command == "report":
            return cmd_report(args.path)
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg["seed"] = args.seed
        cfg["tolerances"].update(_parse_tol_overrides(args.tol))
        out_dir = Path(args.out)
        if args.command == "simulate":
            return cmd_simulate(cfg, out_dir)
        if args.command == "check":
            criteria = None
            if args.criteria is not None:
                criteria = [c for c in args.criteria.split(",") if c]
            return cmd_check(cfg, out_dir, criteria)
        if args.command == "sweep":
            try:
                values = [float(v) for v in args.values.split(",") if v != ""]
            except ValueError as exc:
                raise ConfigError(f"bad --values list: {exc}") from exc
            return cmd_sweep(cfg, out_dir, args.param, values, args.criteria)
        raise ConfigError(f"unknown command {args.command}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except ContractError as exc:
        print(f"config error: {exc}", file=_sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=_sys.stderr)
        return 1
    except NhvakError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
