"""Parameter sweeps over shear strength, viscosity and resolution; bound assembly and fits.

Config files are JSON (``schema_version`` 1)::

    {
      "schema_version": 1,
      "geometry": {"W": 1.0, "H": 1.0, "d": 2},
      "shear": {"kind": "constant", "A": [1.0]},
      "nu": [0.01],
      "perturbation": {"amplitude": 0.0, "band": [2, 8], "seed": 0},
      "T": 1.0,
      "resolutions": [[16, 64], [32, 128]],
      "ramp_width": 0.0625,
      "cfl": 0.4,
      "c0": 0.00390625,
      "min_samples": 8,
      "output_dir": "out"
    }

Cases are the product A x nu x resolution, indexed in that nesting order.
Each case writes its artifacts to ``<output_dir>/case_NNN/``.
"""

from __future__ import annotations

import csv
import itertools
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .czdecomp import (
    DEFAULT_C0,
    BaseScales,
    Decomposition,
    ParabolicCube,
    TildeOmega,
    base_scales,
    boundary_regularity_statistic,
    check_partition,
    decompose,
    tilde_omega,
    weak_lorentz,
)
from .fields import BOTTOM, TOP, WALLS, ChannelGeometry, Grid, SpaceTimeDensity, load_arrays, save_arrays, save_field
from .nschannel import (
    BlowUpError,
    BoundaryVorticityTrace,
    Perturbation,
    SolverConfig,
    make_initial_shear,
    rescale_to_unit_viscosity,
    run,
    shear_profile,
)
from .prandtl import t_star

SCHEMA_VERSION = 1
OUTPUT_ENV = "LAYERSEP_OUT"


class ConfigError(ValueError):
    pass


class DependencyError(RuntimeError):
    pass


class CaseBlowUp(RuntimeError):
    def __init__(self, case: int, meta: dict, cause: BlowUpError):
        super().__init__(f"case {case} ({meta}) blew up: {cause}")
        self.case = case
        self.cause = cause


# ---------------------------------------------------------------------------
# configuration

@dataclass(frozen=True)
class ExperimentConfig:
    W: float = 1.0
    H: float = 1.0
    d: int = 2
    shear_kind: str = "constant"
    A: tuple = (1.0,)
    nu: tuple = (0.01,)
    amplitude: float = 0.0
    band: tuple = (2, 8)
    seed: int = 0
    T: float = 1.0
    resolutions: tuple = ((16, 64),)
    ramp_width: float = 0.0625
    cfl: float = 0.4
    c0: float = DEFAULT_C0
    min_samples: int = 8
    sample_dt: float | None = None
    output_dir: str = "out"

    def __post_init__(self):
        if self.W <= 0 or self.H <= 0:
            raise ConfigError("geometry W and H must be positive")
        if self.d not in (2, 3):
            raise ConfigError(f"dimension must be 2 or 3, got {self.d}")
        if self.shear_kind not in ("constant", "linear"):
            raise ConfigError(f"unknown shear kind {self.shear_kind!r}")
        for name in ("A", "nu", "resolutions"):
            if len(getattr(self, name)) == 0:
                raise ConfigError(f"{name} must be a non-empty list")
        if any(a < 0 for a in self.A):
            raise ConfigError("shear strengths must be non-negative")
        if any(n <= 0 for n in self.nu):
            raise ConfigError("viscosities must be positive")
        res = [tuple(r) for r in self.resolutions]
        if any(len(r) != 2 or min(r) < 4 for r in res):
            raise ConfigError("resolutions are [nx, ny] pairs with nx, ny >= 4")
        if any(b[0] <= a[0] or b[1] <= a[1] for a, b in zip(res, res[1:])):
            raise ConfigError("resolutions must be strictly increasing")
        if self.T <= 0:
            raise ConfigError("T must be positive")
        if not 0 <= self.amplitude:
            raise ConfigError("perturbation amplitude must be non-negative")
        if not 0 < self.ramp_width <= self.H / 2:
            raise ConfigError("ramp_width must lie in (0, H/2]")
        if not 0 < self.cfl < 1:
            raise ConfigError("cfl must lie in (0, 1)")
        if self.c0 <= 0:
            raise ConfigError("c0 must be positive")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if raw.get("schema_version") != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {raw.get('schema_version')!r}, expected {SCHEMA_VERSION}")
        known = {"schema_version", "geometry", "shear", "nu", "perturbation", "T", "resolutions",
                 "ramp_width", "cfl", "c0", "min_samples", "sample_dt", "output_dir"}
        extra = set(raw) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        geo = raw.get("geometry", {})
        shear = raw.get("shear", {})
        pert = raw.get("perturbation", {})
        A = shear.get("A", 1.0)
        nu = raw.get("nu", [0.01])
        try:
            return cls(
                W=float(geo.get("W", 1.0)), H=float(geo.get("H", 1.0)), d=int(geo.get("d", 2)),
                shear_kind=shear.get("kind", "constant"),
                A=tuple(float(a) for a in (A if isinstance(A, list) else [A])),
                nu=tuple(float(n) for n in (nu if isinstance(nu, list) else [nu])),
                amplitude=float(pert.get("amplitude", 0.0)),
                band=tuple(int(b) for b in pert.get("band", [2, 8])),
                seed=int(pert.get("seed", 0)),
                T=float(raw.get("T", 1.0)),
                resolutions=tuple(tuple(int(v) for v in r) for r in raw.get("resolutions", [[16, 64]])),
                ramp_width=float(raw.get("ramp_width", 0.0625)),
                cfl=float(raw.get("cfl", 0.4)),
                c0=float(raw.get("c0", DEFAULT_C0)),
                min_samples=int(raw.get("min_samples", 8)),
                sample_dt=None if raw.get("sample_dt") is None else float(raw["sample_dt"]),
                output_dir=str(raw.get("output_dir", "out")),
            )
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file {path} not found") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(raw)

    def to_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "geometry": {"W": self.W, "H": self.H, "d": self.d},
            "shear": {"kind": self.shear_kind, "A": list(self.A)},
            "nu": list(self.nu),
            "perturbation": {"amplitude": self.amplitude, "band": list(self.band), "seed": self.seed},
            "T": self.T,
            "resolutions": [list(r) for r in self.resolutions],
            "ramp_width": self.ramp_width,
            "cfl": self.cfl,
            "c0": self.c0,
            "min_samples": self.min_samples,
            "sample_dt": self.sample_dt,
            "output_dir": self.output_dir,
        }

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return ExperimentConfig(**{**asdict(self), "seed": int(seed)})

    def output_root(self) -> Path:
        return Path(os.environ.get(OUTPUT_ENV) or self.output_dir)

    def cases(self) -> list[dict]:
        out = []
        for i, (A, nu, res) in enumerate(itertools.product(self.A, self.nu, self.resolutions)):
            out.append({"index": i, "A": A, "nu": nu, "nx": res[0], "ny": res[1]})
        return out

    @property
    def geometry(self) -> ChannelGeometry:
        return ChannelGeometry(self.W, self.H, self.d)


@dataclass(frozen=True)
class ShearStats:
    """``G = ||grad ubar||_inf``, ``A = ||ubar||_inf``, ``E = ||ubar||^2`` and the channel measures."""

    G: float
    A: float
    E: float
    area: float
    boundary: float
    W: float
    H: float

    @classmethod
    def of(cls, kind: str, A: float, geometry: ChannelGeometry) -> "ShearStats":
        W, H = geometry.W, geometry.H
        if kind == "constant":
            G, E = 0.0, A * A * W * H
        else:
            G, E = 2 * A / H, A * A * W * H / 3
        return cls(G, A, E, W * H, geometry.boundary_measure, W, H)

    def reynolds(self, nu: float) -> float:
        return self.A * self.H / nu


def _case_dir(root: Path, index: int) -> Path:
    return Path(root) / f"case_{index:03d}"


def default_sample_dt(cfg: ExperimentConfig, nu: float, grid: Grid) -> float:
    """Trace cadence: ``1/min_samples`` of the time length of the finest cube whose
    doubled footprint holds four grid cells per axis, and at most ``T/64``."""
    sc = base_scales(cfg.T / nu, cfg.W / nu, cfg.H / nu)
    dx_r, dy_r = grid.dx / nu, grid.dy / nu
    k = 0
    while k < 40 and 2.0 ** -(k + 1) * sc.W0 >= 2 * dx_r and 2.0 ** -(k + 1) * sc.H0 >= 2 * dy_r:
        k += 1
    l_phys = 4.0**-k * sc.L0 * nu
    return min(cfg.T / 64, l_phys / cfg.min_samples)


# ---------------------------------------------------------------------------
# running cases

def _write_rows(path: Path, header, rows) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, (str, int)) and not isinstance(v, bool) else repr(float(v)) for v in row])


def _read_rows(path: Path) -> tuple[list, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [[float(v) for v in r] for r in reader]
    return header, np.array(rows)


def _cumtrapz(t, v):
    out = np.zeros_like(v, dtype=float)
    dt = np.diff(t).reshape((-1,) + (1,) * (v.ndim - 1))
    out[1:] = np.cumsum(0.5 * dt * (v[1:] + v[:-1]), axis=0)
    return out


@dataclass
class SeparationRecord:
    t: np.ndarray
    separation: np.ndarray  # ||u(t) - ubar||^2
    dissipation: np.ndarray  # nu int_0^t ||grad u||^2
    wall_integral: np.ndarray  # (nt, 2): int_0^t int_wall nu omega dx' ds, bottom and top
    t_nu: float
    meta: dict = field(default_factory=dict)

    def to_csv(self, path) -> None:
        _write_rows(Path(path), ["t", "separation", "dissipation", "wall_bottom", "wall_top"],
                    zip(self.t, self.separation, self.dissipation, self.wall_integral[:, 0], self.wall_integral[:, 1]))

    @classmethod
    def from_csv(cls, path, t_nu: float, meta: dict | None = None) -> "SeparationRecord":
        _, a = _read_rows(Path(path))
        return cls(a[:, 0], a[:, 1], a[:, 2], a[:, 3:5], t_nu, meta or {})


def run_case(cfg: ExperimentConfig, index: int, root=None) -> dict:
    """Run one case and write its artifacts. Returns the case manifest."""
    if cfg.d != 2:
        raise ConfigError("only d = 2 channels can be run; d = 3 is carried in configs but not simulated")
    case = cfg.cases()[index]
    root = Path(root) if root is not None else cfg.output_root()
    out = _case_dir(root, index)
    A, nu = case["A"], case["nu"]
    grid = Grid(cfg.geometry, case["nx"], case["ny"])
    ramp_cells = max(2, int(round(cfg.ramp_width / grid.dy)))
    if 2 * ramp_cells > grid.ny:
        raise ConfigError("ramp wider than half the channel at this resolution")
    pert = Perturbation(cfg.amplitude, tuple(cfg.band), cfg.seed) if cfg.amplitude > 0 else None
    init = make_initial_shear(grid, A, cfg.shear_kind, ramp_cells, pert)
    sample_dt = cfg.sample_dt or default_sample_dt(cfg, nu, grid)
    scfg = SolverConfig(nu=nu, t_end=cfg.T, cfl=cfg.cfl, sample_dt=sample_dt)
    U = shear_profile(cfg.shear_kind, A, cfg.H)
    try:
        res = run(init, scfg, background=U)
    except BlowUpError as exc:
        raise CaseBlowUp(index, case, exc) from exc

    stats = ShearStats.of(cfg.shear_kind, A, cfg.geometry)
    cut = t_star(stats.E, stats.boundary, nu, cfg.T) if stats.E > 0 else None
    t_nu = cut.t_nu if cut else 0.0
    ledger = res.ledger
    record = SeparationRecord(ledger.t, res.separation, ledger.cumulative_dissipation,
                              _cumtrapz(ledger.t, res.wall_rate), t_nu)
    record.to_csv(out / "separation.csv")
    ledger.to_csv(out / "ledger.csv")
    res.trace.to_csv(out / "trace.csv")
    save_arrays(out / "density", {"times": res.density.times, "values": res.density.values},
                {"W": cfg.W, "H": cfg.H, "nu": nu, "quantity": "|grad u|^2"})
    save_field(out / "final_velocity", res.final)
    manifest = {
        "case": case,
        "version": __version__,
        "geometry": {"W": cfg.W, "H": cfg.H, "d": cfg.d},
        "solver": {"nu": nu, "t_end": cfg.T, "cfl": cfg.cfl, "sample_dt": sample_dt,
                   "steps": int(ledger.t.size - 1), "substeps": res.substeps},
        "initial": {"shear": cfg.shear_kind, "A": A, "ramp_cells": ramp_cells, "ramp_width": init.ramp_width,
                    "deviation_l2": init.deviation, "perturbation": asdict(pert) if pert else None},
        "seed": cfg.seed,
        "shear_stats": asdict(stats),
        "reynolds": stats.reynolds(nu),
        "t_star": cut.t_star if cut else None,
        "t_nu": t_nu,
        "t_nu_degenerate": bool(cut.degenerate) if cut else False,
        "energy_residual_max": float(np.max(ledger.residual())),
        "kinetic0": float(ledger.kinetic[0]),
        "final_separation": float(res.separation[-1]),
    }
    _dump_json(out / "manifest.json", manifest)
    return manifest


def _dump_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(plain_data(obj), indent=2, sort_keys=True) + "\n")


def plain_data(obj):
    if isinstance(obj, dict):
        return {str(k): plain_data(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [plain_data(v) for v in obj]
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _run_case_args(args):
    cfg, index, root = args
    return run_case(cfg, index, root)


def run_all(cfg: ExperimentConfig, root=None, workers: int = 1) -> list[dict]:
    """Run every case; results are ordered by case index whatever the worker count."""
    root = Path(root) if root is not None else cfg.output_root()
    jobs = [(cfg, c["index"], root) for c in cfg.cases()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            manifests = list(pool.map(_run_case_args, jobs))
    else:
        manifests = [_run_case_args(j) for j in jobs]
    _dump_json(root / "sweep.json", {"config": cfg.to_dict(), "cases": manifests})
    return manifests


def load_case(root, index: int) -> dict:
    out = _case_dir(Path(root), index)
    path = out / "manifest.json"
    if not path.exists():
        raise DependencyError(f"no run artifacts for case {index} under {root}; run the sweep first")
    manifest = json.loads(path.read_text())
    record = SeparationRecord.from_csv(out / "separation.csv", manifest["t_nu"], manifest)
    arrays, meta = load_arrays(out / "density")
    density = SpaceTimeDensity(arrays["times"], arrays["values"], meta["W"], meta["H"])
    trace = _load_trace(out / "trace.csv", manifest)
    return {"manifest": manifest, "record": record, "density": density, "trace": trace, "dir": out}


def _load_trace(path: Path, manifest: dict):
    geo = ChannelGeometry(**manifest["geometry"])
    return BoundaryVorticityTrace.from_csv(path, geo)


# ---------------------------------------------------------------------------
# decomposition of a stored run

def decompose_case(root, index: int, c0: float | None = None, min_samples: int | None = None,
                   on_unresolved: str = "raise", max_generation: int | None = None) -> dict:
    """Rescale a stored run to unit viscosity, decompose the wall and compute the
    boundary-vorticity statistic. Writes ``decomposition.json``, ``lorentz.csv``
    and ``regularity.json`` next to the run artifacts."""
    case = load_case(root, index)
    m = case["manifest"]
    nu = m["case"]["nu"]
    sweep = _sweep_config(root)
    c0 = c0 if c0 is not None else (sweep.c0 if sweep else DEFAULT_C0)
    min_samples = min_samples if min_samples is not None else (sweep.min_samples if sweep else 8)
    dens = rescale_to_unit_viscosity(case["density"], nu)
    trace = rescale_to_unit_viscosity(case["trace"], nu)
    decomp = decompose(dens, c0, min_samples, on_unresolved, max_generation)
    tilde = tilde_omega(decomp, trace.times, trace.x, trace.omega, min_samples=max(1, min_samples // 2))
    grad_sq = dens.total()
    stat = boundary_regularity_statistic(tilde, dens.W, dens.H, grad_sq)
    checks = check_partition(decomp)
    out = case["dir"]
    decomp.to_json(out / "decomposition.json", tilde)
    above = _above_mask(tilde, dens.W, dens.H)
    rep = weak_lorentz(np.where(above, tilde.values, 0.0), [c.wall_measure for c in tilde.cubes], 1.5)
    rep.to_csv(out / "lorentz.csv")
    summary = {"case": index, "c0": c0, "cubes": len(decomp.cubes), "unresolved": len(decomp.unresolved),
               "max_generation": max(c.k for c in decomp.cubes), **stat, **checks}
    _dump_json(out / "regularity.json", summary)
    return {"decomposition": decomp, "tilde": tilde, "statistic": stat, "checks": checks, "summary": summary}


def _sweep_config(root) -> ExperimentConfig | None:
    path = Path(root) / "sweep.json"
    if not path.exists():
        return None
    return ExperimentConfig.from_dict(json.loads(path.read_text())["config"])


def _above_mask(tilde: TildeOmega, W: float, H: float) -> np.ndarray:
    s = np.array([c.s for c in tilde.cubes])
    thresh = np.full(s.shape, np.inf)
    pos = s > 0
    thresh[pos] = np.maximum(1.0 / s[pos], max(W**-2, H**-2))
    return tilde.values > thresh


def load_decomposition(path) -> tuple[Decomposition, TildeOmega]:
    path = Path(path)
    if not path.exists():
        raise DependencyError(f"no decomposition at {path}; run decompose first")
    raw = json.loads(path.read_text())
    cubes = [ParabolicCube(c["k"], c["wall"], c["s"], c["t"], c["x"], c["w"], c["h"], c["r"], c["clamped"])
             for c in raw["cubes"]]
    decomp = Decomposition(cubes, raw["c0"], BaseScales(**raw["scales"]), raw["T"], raw["W"], raw["H"],
                           np.array([c["avg_dissipation"] for c in raw["cubes"]]), [None] * len(cubes))
    vals = [c["tilde_omega"] for c in raw["cubes"]]
    if any(v is None for v in vals):
        raise DependencyError(f"decomposition at {path} carries no averaged vorticity")
    return decomp, TildeOmega(cubes, np.array(vals, dtype=float))


# ---------------------------------------------------------------------------
# bound assembly

def _at(t, values, when):
    """Linear interpolation of sampled ``values`` (leading axis over ``t``) at time ``when``."""
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        return float(np.interp(when, t, values))
    return np.array([np.interp(when, t, values[:, j]) for j in range(values.shape[1])])


def _integral(t, values, a, b):
    """Integral over ``(a, b)`` of the piecewise-linear interpolant."""
    grid = np.concatenate([[a], t[(t > a) & (t < b)], [b]])
    v = np.interp(grid, t, values)
    return float(np.sum(0.5 * np.diff(grid) * (v[1:] + v[:-1])))


def assemble_combined_bound(record: SeparationRecord, stats: ShearStats, nu: float, T_nu: float | None = None) -> dict:
    """Every term of the combined energy estimate at the final time T, and ``rhs - lhs``.

    ``lhs = 1/2 ||u(T) - ubar||^2 + nu/2 ||grad u||^2_{L2((0,T) x Omega)}``. When
    ``T <= T_nu`` the short-time bound (no wall terms, no Gronwall integral) is used.
    """
    t = record.t
    T = float(t[-1])
    T_nu = record.t_nu if T_nu is None else T_nu
    sep0 = float(record.separation[0])
    lhs = 0.5 * float(record.separation[-1]) + 0.5 * float(record.dissipation[-1])
    # A^2 |Omega| / Re written without dividing by Re (Re = 0 at rest)
    prandtl = stats.A * stats.area * nu / stats.H
    terms = {
        "initial": 2.0 * sep0,
        "viscous_shear": nu * stats.G**2 * T * stats.area,
        "prandtl": prandtl,
    }
    degenerate = T <= T_nu
    if degenerate:
        terms.update({"gronwall": 0.0, "wall_bottom": 0.0, "wall_top": 0.0})
    else:
        walls = record.wall_integral[-1] - _at(t, record.wall_integral, T_nu)
        terms.update({
            "gronwall": stats.G * _integral(t, record.separation, T_nu, T),
            "wall_bottom": stats.A * abs(float(walls[0])),
            "wall_top": stats.A * abs(float(walls[1])),
        })
    rhs = math.fsum(terms.values())
    return {"T": T, "T_nu": T_nu, "degenerate": degenerate, "lhs": lhs, "terms": terms, "rhs": rhs,
            "residual": rhs - lhs, "holds": lhs <= rhs * (1 + 1e-12) + 1e-300}


def split_boundary_term(tilde: TildeOmega | None, A: float, W: float, H: float, nu: float, T_nu: float, T: float,
                        dissipation: float = 0.0) -> dict:
    """Split ``int_{T_nu}^T int_walls A nu tilde_omega`` at the threshold ``max(nu/t, nu^2/W^2, nu^2/H^2)``.

    ``tilde`` lives in unit-viscosity variables (there ``nu tilde_omega^nu`` is
    simply ``tilde_omega`` and the threshold is ``max(1/t, W^-2, H^-2)``). The
    split is exact per cube in t, so ``above + remainder == total``.
    ``dissipation`` is ``nu ||grad u||^2_{L2((0,T) x Omega)}`` in physical units.
    """
    if tilde is None:
        raise DependencyError("the boundary split needs a decomposition with averaged vorticity")
    if A == 0 or T_nu <= 0:
        keys = ("total", "above", "remainder", "sum_error", "remainder_bound", "remainder_bound_paper",
                "weak_norm", "l31_norm_A", "holder_product", "holder_ratio", "young_constant")
        return dict.fromkeys(keys, 0.0)
    Wr, Hr = W / nu, H / nu
    a0, b0 = T_nu / nu, T / nu
    cW = max(Wr**-2, Hr**-2)
    total_parts, above_parts, below_parts = [], [], []
    above_vals, above_meas = [], []
    for c, v in zip(tilde.cubes, tilde.values):
        a, b = max(c.s, a0), min(c.t, b0)
        if b <= a:
            continue
        scale = A * nu * nu * c.w * v
        total_parts.append(scale * (b - a))
        up = 0.0
        if v > cW:
            up = max(0.0, b - max(a, 1.0 / v))
        above_parts.append(scale * up)
        below_parts.append(scale * (b - a - up))
        if up > 0:
            above_vals.append(v)
            above_meas.append(nu * nu * c.w * up)
    total = math.fsum(total_parts)
    above = math.fsum(above_parts)
    remainder = math.fsum(below_parts)
    boundary = 2.0 * W
    c = nu * nu * min(W, H) ** -2
    t_c = nu / c
    if t_c > T_nu:
        per_wall = nu * math.log(min(T, t_c) / T_nu) + c * max(0.0, T - t_c)
    else:
        per_wall = c * (T - T_nu)
    remainder_exact = A * per_wall * boundary
    remainder_paper = A * nu * math.log(T / T_nu) * boundary + A * nu * nu * min(W, H) ** -2 * T * boundary
    weak = weak_lorentz(above_vals, above_meas, 1.5).value
    l31 = A * (T * boundary) ** (1.0 / 3.0)
    holder = weak * l31
    cubic = A**3 * T * boundary
    return {
        "total": total, "above": above, "remainder": remainder,
        "sum_error": abs(above + remainder - total) / total if total > 0 else abs(above + remainder),
        "remainder_bound": remainder_exact, "remainder_bound_paper": remainder_paper,
        "weak_norm": weak, "l31_norm_A": l31, "holder_product": holder,
        "holder_ratio": above / holder if holder > 0 else 0.0,
        "young_constant": max(0.0, above - dissipation / 8.0) / cubic if cubic > 0 else 0.0,
    }


def constant_shear_terms(A: float, T: float, initial_sq: float, nu: float) -> dict:
    """Right-hand side pieces for the unit channel with ``Re = A/nu``; ``cubic`` and ``log`` carry an unknown C."""
    Re = A / nu
    log_term = A * A / Re * math.log(2 + Re) if Re > 0 else 0.0
    return {"initial": 4.0 * initial_sq, "cubic": A**3 * T, "log": log_term}


def general_shear_terms(stats: ShearStats, T: float, initial_sq: float, nu: float) -> dict:
    """Right-hand side pieces of the general-shear bound; ``log`` and ``cubic`` carry an unknown C."""
    Re = stats.reynolds(nu)
    log_term = stats.A**2 * stats.area / Re * math.log(2 + Re) if Re > 0 else 0.0
    return {
        "envelope": math.exp(2 * stats.G * T),
        "initial": 4.0 * initial_sq,
        "viscous_shear": 2 * nu * stats.G**2 * T * stats.area,
        "log": log_term,
        "energy": 2.0 * stats.E / Re if Re > 0 else 0.0,
        "cubic": stats.A**3 * T * stats.boundary * max(stats.H / stats.W, 1.0) ** 2,
    }


def reduce_to_constant_shear(gen: dict, stats: ShearStats) -> dict:
    """Map the general-shear terms onto the unit-channel constant-shear terms.

    Valid for ``G = 0`` and ``W = H = 1``: the envelope is 1, the viscous-shear
    term vanishes, ``log`` coincides, ``cubic`` differs by the fixed factor
    ``|dOmega| = 2`` and ``energy = 2 A^2/Re <= (2/log 2) log``, both absorbed into C.
    """
    if stats.G != 0 or stats.W != 1 or stats.H != 1:
        raise ValueError("reduction applies to constant shear on the unit channel")
    return {
        "initial": gen["initial"] * gen["envelope"],
        "log": gen["log"],
        "cubic": gen["cubic"] / stats.boundary,
        "absorbed": {
            "viscous_shear": gen["viscous_shear"],
            "energy_over_log": gen["energy"] / gen["log"] if gen["log"] > 0 else 0.0,
            "envelope": gen["envelope"],
            "cubic_factor": stats.boundary,
        },
    }


# ---------------------------------------------------------------------------
# fits

def fit_scaling(points) -> dict:
    """Exponents of ``separation ~ A^a T^b`` and the least C with
    ``lhs <= 4 initial + C (A^3 T + A^2 Re^-1 log(2 + Re))`` over all points.

    Each point is a mapping with ``A``, ``T``, ``separation`` and optionally
    ``initial`` (``||u0 - ubar||^2``), ``dissipation`` (``nu ||grad u||^2``
    integrated, entering the left side with weight 1/2) and ``Re``.
    """
    pts = list(points)
    A = np.array([p["A"] for p in pts], dtype=float)
    T = np.array([p["T"] for p in pts], dtype=float)
    sep = np.array([p["separation"] for p in pts], dtype=float)
    init = np.array([p.get("initial", 0.0) for p in pts], dtype=float)
    diss = np.array([p.get("dissipation", 0.0) for p in pts], dtype=float)
    Re = np.array([p.get("Re") if p.get("Re") is not None else np.inf for p in pts], dtype=float)
    out = {"points": len(pts), "undefined": bool(np.all(sep <= 0))}
    pos = (sep > 0) & (A > 0) & (T > 0)
    if np.unique(A[pos]).size >= 2 and np.unique(T[pos]).size >= 2:
        X = np.column_stack([np.log(A[pos]), np.log(T[pos]), np.ones(pos.sum())])
        coef, *_ = np.linalg.lstsq(X, np.log(sep[pos]), rcond=None)
        out.update({"exponent_A": float(coef[0]), "exponent_T": float(coef[1]), "prefactor": float(np.exp(coef[2]))})
    else:
        out.update({"exponent_A": None, "exponent_T": None, "prefactor": None})
    with np.errstate(divide="ignore", invalid="ignore"):
        log_term = np.where(np.isfinite(Re) & (Re > 0), A**2 / Re * np.log(2 + Re), 0.0)
    base = A**3 * T + log_term
    lhs = sep + 0.5 * diss
    need = np.where(base > 0, (lhs - 4 * init) / np.where(base > 0, base, 1.0), 0.0)
    C = float(max(0.0, need.max())) if need.size else 0.0
    out["C"] = C
    out["holds"] = bool(np.all(lhs <= 4 * init + C * base + 1e-12 * np.maximum(lhs, 1.0)))
    return out


def resolution_stability(C_by_level, tol: float = 0.25) -> dict:
    """Flag growth of a fitted constant by more than ``tol`` between the two finest levels."""
    C = list(C_by_level)
    if len(C) < 2:
        return {"growth": None, "stable": True}
    growth = C[-1] / C[-2] - 1.0 if C[-2] > 0 else (0.0 if C[-1] == 0 else math.inf)
    return {"growth": growth, "stable": growth <= tol, "monotone": all(b <= a * (1 + 1e-12) for a, b in zip(C, C[1:]))}


# ---------------------------------------------------------------------------
# sweep-level reports

def bounds_for_sweep(root, split: bool = False) -> dict:
    """Combined-bound tables for every stored case plus the scaling fit; writes ``bounds.json``."""
    root = Path(root)
    cfg = _sweep_config(root)
    if cfg is None:
        raise DependencyError(f"no sweep artifacts under {root}; run the sweep first")
    rows, points, by_res, trajectory = [], [], {}, []
    for case in cfg.cases():
        data = load_case(root, case["index"])
        m = data["manifest"]
        rec = data["record"]
        stats = ShearStats(**m["shear_stats"])
        nu = case["nu"]
        init_sq = m["initial"]["deviation_l2"] ** 2
        combined = assemble_combined_bound(rec, stats, nu)
        gen = general_shear_terms(stats, cfg.T, init_sq, nu)
        row = {"case": case["index"], "A": case["A"], "nu": nu, "nx": case["nx"], "ny": case["ny"],
               "combined": combined, "general_shear": gen}
        if split:
            _, tilde = load_decomposition(data["dir"] / "decomposition.json")
            row["split"] = split_boundary_term(tilde, case["A"], cfg.W, cfg.H, nu, rec.t_nu, cfg.T,
                                               float(rec.dissipation[-1]))
        rows.append(row)
        pt = {"A": case["A"], "T": cfg.T, "separation": float(rec.separation[-1]), "initial": init_sq,
              "dissipation": float(rec.dissipation[-1]), "Re": stats.reynolds(nu)}
        points.append(pt)
        for frac in (0.25, 0.5, 1.0):
            trajectory.append({"A": case["A"], "T": frac * cfg.T,
                               "separation": _at(rec.t, rec.separation, frac * cfg.T)})
        by_res.setdefault((case["nx"], case["ny"]), []).append(pt)
    fit = fit_scaling(points)
    per_res = [fit_scaling(by_res[tuple(r)])["C"] for r in cfg.resolutions]
    traj = fit_scaling(trajectory)
    result = {"cases": rows, "fit": fit, "C_by_resolution": per_res,
              "trajectory_exponents": {"A": traj["exponent_A"], "T": traj["exponent_T"]},
              "stability": resolution_stability(per_res)}
    _dump_json(root / "bounds.json", result)
    _write_rows(root / "bound_terms.csv",
                ["case", "A", "nu", "nx", "ny", "lhs", "rhs", "residual", "initial", "gronwall",
                 "viscous_shear", "prandtl", "wall_bottom", "wall_top"],
                [[r["case"], r["A"], r["nu"], r["nx"], r["ny"], r["combined"]["lhs"], r["combined"]["rhs"],
                  r["combined"]["residual"], *(r["combined"]["terms"][k] for k in
                  ("initial", "gronwall", "viscous_shear", "prandtl", "wall_bottom", "wall_top"))]
                 for r in rows])
    return result


def write_report(root) -> list[Path]:
    """Two-column whitespace-separated data files (gnuplot-ready) under ``<root>/report``."""
    root = Path(root)
    cfg = _sweep_config(root)
    if cfg is None:
        raise DependencyError(f"no sweep artifacts under {root}; run the sweep first")
    out = root / "report"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for case in cfg.cases():
        data = load_case(root, case["index"])
        rec = data["record"]
        for name, values in (("separation", rec.separation), ("dissipation", rec.dissipation),
                             ("wall_bottom", rec.wall_integral[:, 0]), ("wall_top", rec.wall_integral[:, 1])):
            path = out / f"{name}_case_{case['index']:03d}.dat"
            with open(path, "w") as fh:
                fh.write(f"# t {name}  A={case['A']!r} nu={case['nu']!r} nx={case['nx']} ny={case['ny']}\n")
                for t, v in zip(rec.t, values):
                    fh.write(f"{float(t)!r} {float(v)!r}\n")
            written.append(path)
    return written
