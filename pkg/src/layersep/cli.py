"""Command-line entry point ``layersep``.

Exit codes: 0 success, 1 usage error, 2 configuration or missing-artifact
error, 3 a case blew up numerically.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .czdecomp import ConstructionError, ResolutionError, UnresolvedCubeError
from .harness import (
    OUTPUT_ENV,
    CaseBlowUp,
    ConfigError,
    DependencyError,
    ExperimentConfig,
    bounds_for_sweep,
    decompose_case,
    run_all,
    plain_data,
    write_report,
)
from .prandtl import ramp_profile, separation_series, separation_sharp_step
from .subsolution import SubsolutionParams, deviation_rate, energy_rate, residual_check, rescale_profile

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_BLOWUP = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for configuration errors here
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _emit(obj) -> None:
    """One-line JSON summary on stdout."""
    print(json.dumps(plain_data(obj), sort_keys=True, separators=(",", ":")))


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _root(args, cfg: ExperimentConfig | None = None) -> Path:
    if getattr(args, "out", None):
        return Path(args.out)
    if cfg is not None:
        return cfg.output_root()
    raise UsageError("an output directory is required (--out, or a config / $" + OUTPUT_ENV + ")")


def _cmd_run(args) -> int:
    cfg = _load(args)
    root = _root(args, cfg)
    manifests = run_all(cfg, root, workers=args.workers)
    _emit({"output": str(root), "cases": [{"index": m["case"]["index"], "final_separation": m["final_separation"],
                                           "energy_residual_max": m["energy_residual_max"]} for m in manifests]})
    return EXIT_OK


def _sweep_root(args) -> Path:
    if args.out:
        return Path(args.out)
    if args.config:
        return _load(args).output_root()
    raise UsageError("pass --out or --config to locate the sweep artifacts")


def _case_indices(root: Path, wanted) -> list[int]:
    path = root / "sweep.json"
    if not path.exists():
        raise DependencyError(f"no sweep artifacts under {root}; run the sweep first")
    n = len(json.loads(path.read_text())["cases"])
    if wanted is None:
        return list(range(n))
    bad = [i for i in wanted if not 0 <= i < n]
    if bad:
        raise UsageError(f"case indices {bad} out of range [0, {n})")
    return list(wanted)


def _cmd_decompose(args) -> int:
    root = _sweep_root(args)
    out = []
    for i in _case_indices(root, args.case):
        try:
            res = decompose_case(root, i, c0=args.c0, min_samples=args.min_samples,
                                 on_unresolved="keep" if args.keep_unresolved else "raise",
                                 max_generation=args.max_generation)
        except (ResolutionError, UnresolvedCubeError, ConstructionError) as exc:
            raise ConfigError(f"case {i}: {exc}") from exc
        out.append(res["summary"])
    _emit(out)
    return EXIT_OK


def _cmd_bounds(args) -> int:
    root = _sweep_root(args)
    res = bounds_for_sweep(root, split=args.split)
    _emit({"fit": res["fit"], "C_by_resolution": res["C_by_resolution"], "stability": res["stability"],
           "all_hold": all(c["combined"]["holds"] for c in res["cases"])})
    return EXIT_OK


def _cmd_subsolution(args) -> int:
    try:
        p = SubsolutionParams(args.lam, args.eps, args.A)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    t = 0.5 * p.horizon / p.A
    _emit({
        "lam": p.lam, "eps": p.eps, "A": p.A, "horizon": p.horizon,
        "check": residual_check(p, n_t=args.samples, n_x=args.samples),
        "energy_rate": energy_rate(p), "deviation_rate": deviation_rate(p),
        "C": rescale_profile(p, t)["C"],
    })
    return EXIT_OK


def _cmd_prandtl(args) -> int:
    if not (args.A > 0 and args.nu > 0 and args.W > 0 and args.H > 0):
        raise ConfigError("A, nu, W and H must be positive")
    prof = ramp_profile(args.A, args.delta, args.H, args.nu, args.modes)
    rows = []
    for t in args.times:
        if t <= 0:
            raise ConfigError("times must be positive")
        series = float(separation_series(prof, args.A, args.W, t)[0])
        sharp = float(separation_sharp_step(args.A, args.W, args.nu, t))
        rows.append({"t": t, "series": series, "sharp_step": sharp, "relative": abs(series - sharp) / sharp})
    _emit(rows)
    return EXIT_OK


def _cmd_report(args) -> int:
    root = _sweep_root(args)
    paths = write_report(root)
    _emit({"written": [str(p) for p in paths]})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="layersep", description="Shear-layer separation experiments in a periodic channel.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    r = sub.add_parser("run", help="run every case of a sweep config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help=f"output directory (overrides the config and ${OUTPUT_ENV})")
    r.add_argument("--seed", type=int)
    r.add_argument("--workers", type=int, default=1)
    r.set_defaults(func=_cmd_run)

    for name, func, text in (("decompose", _cmd_decompose, "decompose the stored wall dissipation"),
                             ("bounds", _cmd_bounds, "assemble the energy bounds and fit constants"),
                             ("report", _cmd_report, "write gnuplot-ready data files")):
        s = sub.add_parser(name, help=text)
        s.add_argument("--config")
        s.add_argument("--out")
        s.add_argument("--seed", type=int)
        s.set_defaults(func=func)
        if name == "decompose":
            s.add_argument("--case", type=int, nargs="+")
            s.add_argument("--c0", type=float)
            s.add_argument("--min-samples", type=int)
            s.add_argument("--max-generation", type=int, help="cap on cube generations (same cubes on every grid)")
            s.add_argument("--keep-unresolved", action="store_true",
                           help="stop refinement at the grid scale instead of failing")
        if name == "bounds":
            s.add_argument("--split", action="store_true", help="also split the wall term (needs decompose)")

    s = sub.add_parser("subsolution", help="check the closed-form subsolution")
    s.add_argument("--lambda", dest="lam", type=float, required=True)
    s.add_argument("--eps", type=float, required=True)
    s.add_argument("--A", type=float, default=1.0)
    s.add_argument("--samples", type=int, default=100)
    s.set_defaults(func=_cmd_subsolution)

    s = sub.add_parser("prandtl-check", help="compare the ramp series with the sharp-step law")
    s.add_argument("--A", type=float, default=1.0)
    s.add_argument("--nu", type=float, default=1e-3)
    s.add_argument("--W", type=float, default=1.0)
    s.add_argument("--H", type=float, default=1.0)
    s.add_argument("--delta", type=float, default=0.0)
    s.add_argument("--modes", type=int, default=4000)
    s.add_argument("--times", type=float, nargs="+", default=[0.25, 0.5, 1.0])
    s.set_defaults(func=_cmd_prandtl)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, DependencyError) as exc:
        print(f"layersep: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CaseBlowUp as exc:
        print(f"layersep: {exc}", file=sys.stderr)
        return EXIT_BLOWUP


if __name__ == "__main__":
    sys.exit(main())
