"""Command line entry point: ``wentzell {spectrum,run,compare,converge}``.

Exit codes: 0 success, 2 solver error, 3 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .errors import WentzellError
from .experiments import (ACCURACY, CASES, METHODS, PRESETS, REPRODUCTION, CaseConfig,
                          compare_controls, convergence_study, default_alpha, run_case)
from .spectral import WentzellParams, spectrum

EXIT_OK, EXIT_SOLVER, EXIT_CONFIG = 0, 2, 3

# CLI dest -> CaseConfig field (None for keys handled separately)
_FIELDS = {
    "case": "case_id", "nx": "n_x", "nt": "n_t", "T": "T_horizon", "eps": "eps",
    "alpha": "alpha", "tol": "tol", "max_iter": "max_iter", "modes": "n_modes",
    "method": "method", "out": "out_dir", "a": None, "b": None, "d": None,
    "reproduce_paper": None,
}


class ConfigError(ValueError):
    pass


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wentzell", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true", help="log progress")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (("spectrum", "eigenpair table"), ("run", "uncontrolled and controlled runs"),
                        ("compare", "HUM vs moment cross-validation"),
                        ("converge", "grid refinement study of the free solve")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--config", type=Path, help="JSON config; flags override its values")
        s.add_argument("--case", choices=CASES)
        s.add_argument("--a", type=float)
        s.add_argument("--b", type=float)
        s.add_argument("--d", type=float)
        s.add_argument("--nx", type=int)
        s.add_argument("--nt", type=int)
        s.add_argument("--T", type=float)
        s.add_argument("--eps", type=float)
        s.add_argument("--alpha", type=float)
        s.add_argument("--tol", type=float)
        s.add_argument("--max-iter", dest="max_iter", type=int)
        s.add_argument("--modes", type=int)
        s.add_argument("--method", choices=METHODS)
        s.add_argument("--out", type=Path)
        s.add_argument("--reproduce-paper", dest="reproduce_paper", action="store_true", default=None,
                       help="coarse reproduction run: nx=25, T=1, eps=1e-3, 7 CG iterations from V0=0")
        if name == "converge":
            s.add_argument("--levels", type=int, nargs="+", default=[50, 100, 200, 400])
    return p


def _merged_options(args: argparse.Namespace) -> dict:
    opts: dict = {}
    if args.config is not None:
        try:
            loaded = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(loaded, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(loaded) - set(_FIELDS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        opts.update(loaded)
    for key in _FIELDS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def config_from_options(opts: dict) -> CaseConfig:
    """Build a validated CaseConfig from merged file/flag options."""
    opts = dict(opts)
    case = opts.pop("case", "sub")
    reproduce = bool(opts.pop("reproduce_paper", False))
    a, b, d = (opts.pop(k, None) for k in ("a", "b", "d"))
    kwargs = {_FIELDS[k]: v for k, v in opts.items()}
    if kwargs.get("out_dir") is not None:
        kwargs["out_dir"] = Path(kwargs["out_dir"])
    if reproduce:
        kwargs.update(n_x=REPRODUCTION["n_x"], T_horizon=REPRODUCTION["T"],
                      eps=REPRODUCTION["eps"], max_iter=REPRODUCTION["max_iter"], reproduce=True)
        # a fixed iteration count, not a tolerance, ends the reproduction run
        kwargs["tol"] = 1e-12
        kwargs.pop("n_t", None)
    else:
        kwargs.setdefault("n_x", ACCURACY["n_x"])
        if kwargs["n_x"] == ACCURACY["n_x"]:
            kwargs.setdefault("n_t", ACCURACY["n_t"])
    try:
        if case in PRESETS:
            pa, pb, pd, alpha = PRESETS[case]
            if any(v is not None and v != ref for v, ref in zip((a, b, d), (pa, pb, pd))):
                raise ConfigError(f"--a/--b/--d conflict with preset {case!r}; use --case custom")
            if kwargs.get("alpha", alpha) != alpha:
                raise ConfigError(f"preset {case!r} pins alpha={alpha}; use --case custom")
            kwargs.pop("alpha", None)
            return CaseConfig.preset(case, **kwargs)
        if None in (a, b, d):
            raise ConfigError("custom case needs --a, --b and --d")
        params = WentzellParams(float(a), float(b), float(d))
        kwargs.setdefault("alpha", default_alpha(params))
        return CaseConfig(case_id="custom", params=params, **kwargs)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _emit(payload: dict, out: Path | None, name: str) -> None:
    if out is not None:
        io.write_json(out / name, payload)
    print(json.dumps(io.to_jsonable(payload), indent=2))


def _cmd_spectrum(cfg: CaseConfig) -> None:
    pairs = spectrum(cfg.params, cfg.n_modes)
    if cfg.out_dir is not None:
        io.write_eigen_csv(cfg.out_dir / "eigenpairs.csv", pairs)
    print("n,kind,mu,lambda,norm_H")
    for p in pairs:
        print(f"{p.n},{p.kind.value},{p.mu:.17g},{p.lam:.17g},{p.norm_H:.17g}")


def _cmd_run(cfg: CaseConfig) -> int:
    report = run_case(cfg)
    print(json.dumps(io.to_jsonable(report.to_dict()), indent=2))
    return EXIT_SOLVER if report.errors else EXIT_OK


def _cmd_compare(cfg: CaseConfig) -> None:
    _emit(compare_controls(cfg), cfg.out_dir, "compare.json")


def _cmd_converge(cfg: CaseConfig, levels) -> None:
    table = convergence_study(cfg, levels)
    if cfg.out_dir is not None:
        table.write_csv(cfg.out_dir / "convergence.csv")
    _emit({"rows": table.rows, "order": table.order}, cfg.out_dir, "convergence.json")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = config_from_options(_merged_options(args))
        if args.command == "converge":
            lv = args.levels
            if min(lv) < 4 or any(b <= a for a, b in zip(lv, lv[1:])):
                raise ConfigError("--levels needs increasing grid sizes >= 4")
    except ConfigError as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "spectrum":
            _cmd_spectrum(cfg)
        elif args.command == "run":
            return _cmd_run(cfg)
        elif args.command == "compare":
            _cmd_compare(cfg)
        else:
            _cmd_converge(cfg, args.levels)
    except (WentzellError, np.linalg.LinAlgError) as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
