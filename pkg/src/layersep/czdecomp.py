"""Parabolic dyadic decomposition of the wall, stopping-time refinement, and the
statistics of time-averaged wall vorticity built on it.

All routines work in unit-viscosity variables (see
``nschannel.rescale_to_unit_viscosity``). A boundary cube at generation k is

    Q  = (t - l, t) x {|x' - x| < w/2} x (0, h)       (measured from its wall)
    2Q = (t - 2l, t) x {|x' - x| < w}  x (0, 2h)

with ``l = 4^-k L0``, ``w = 2^-k W0``, ``h = 2^-k H0``, scale ``r = 2^-k R0``.
A cube is suitable when the average of ``|grad u|^2`` over 2Q is at most
``c0 r^-4``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .fields import BOTTOM, TOP, WALLS, SpaceTimeDensity

DEFAULT_C0 = 2.0**-8


class ConstructionError(RuntimeError):
    pass


class ResolutionError(ValueError):
    pass


class UnresolvedCubeError(RuntimeError):
    def __init__(self, offenders):
        self.offenders = list(offenders)
        head = ", ".join(f"({c.wall}, k={c.k}, s={c.s:.4g}, x={c.x:.4g})" for c in self.offenders[:5])
        more = "" if len(self.offenders) <= 5 else f" and {len(self.offenders) - 5} more"
        super().__init__(f"{len(self.offenders)} cube(s) unsuitable at the finest resolvable generation: {head}{more}")


class RangeError(ValueError):
    pass


@dataclass(frozen=True)
class ParabolicCube:
    k: int
    wall: str
    s: float
    t: float
    x: float  # centre of the wall box
    w: float
    h: float
    r: float
    clamped: bool = False  # 2Q cut off at t = 0

    @property
    def l(self) -> float:
        return self.t - self.s

    @property
    def wall_measure(self) -> float:
        """Measure of the cube's footprint ``(s, t) x box`` on the wall."""
        return self.l * self.w

    @property
    def volume(self) -> float:
        return self.l * self.w * self.h

    def doubled(self, H: float) -> tuple:
        """Bounds ``(t1, t2, x1, x2, y1, y2)`` of 2Q in channel coordinates."""
        t1 = max(self.t - 2 * self.l, 0.0) if self.clamped else self.t - 2 * self.l
        if self.wall == BOTTOM:
            y1, y2 = 0.0, 2 * self.h
        else:
            y1, y2 = H - 2 * self.h, H
        return t1, self.t, self.x - self.w, self.x + self.w, y1, y2

    def children(self) -> list["ParabolicCube"]:
        """The 8 boundary cubes among the 4 x 2 x 2 dyadic children."""
        l4, w2 = self.l / 4, self.w / 2
        out = []
        for j in range(4):
            s, t = self.s + j * l4, self.s + (j + 1) * l4
            clamped = self.clamped and t - 2 * l4 < 0
            for i in (-1, 1):
                out.append(ParabolicCube(self.k + 1, self.wall, s, t, self.x + i * w2 / 2, w2,
                                         self.h / 2, self.r / 2, clamped))
        return out

    def sort_key(self):
        return (WALLS.index(self.wall), self.s, self.x)


@dataclass(frozen=True)
class BaseScales:
    R0: float
    L0: float
    W0: float
    H0: float
    k_L: int
    k_W: int
    k_H: int


@dataclass
class InitialPartition:
    L: float
    W: float
    H: float
    scales: BaseScales
    k_max: int
    cubes: list  # boundary cubes of the graded selection

    @property
    def q0_count(self) -> int:
        """Number of cubes of the coarsest level filling (0, L) x channel."""
        s = self.scales
        return 4**s.k_L * 2 ** (s.k_W + 1) * 2 ** (s.k_H + 1)


def _smallest_k(value, lo, hi, base, kmax=60):
    for k in range(kmax + 1):
        v = value / base**k
        if lo * (1 - 1e-12) <= v <= hi * (1 + 1e-12):
            return k, v
    raise ConstructionError(f"no admissible k <= {kmax} for {value} in [{lo}, {hi}] scaled by {base}^-k")


def base_scales(L: float, W: float, H: float) -> BaseScales:
    """Smallest non-negative integers with ``R0 <= sqrt(L0), W0, H0 <= 2 R0``."""
    if min(L, W, H) <= 0:
        raise ConstructionError("L, W, H must be positive")
    R0 = min(math.sqrt(L), W / 2, H / 2)
    k_L, L0 = _smallest_k(L, R0**2, 4 * R0**2, 4)
    k_W, W0 = _smallest_k(W / 2, R0, 2 * R0, 2)
    k_H, H0 = _smallest_k(H / 2, R0, 2 * R0, 2)
    return BaseScales(R0, L0, W0, H0, k_L, k_W, k_H)


def _generation_resolvable(sc: BaseScales, k: int, spacing, min_samples: int) -> bool:
    if spacing is None:
        return True
    dt, dx, dy = spacing
    l, w, h = 4.0**-k * sc.L0, 2.0**-k * sc.W0, 2.0**-k * sc.H0
    slack = 1 - 1e-9
    return l >= min_samples * dt * slack and 2 * w >= min_samples * dx * slack and 2 * h >= min_samples * dy * slack


def _layer(sc: BaseScales, W: float, k: int, s0: float, n_time: int, clamped=False) -> list:
    l, w, h, r = 4.0**-k * sc.L0, 2.0**-k * sc.W0, 2.0**-k * sc.H0, 2.0**-k * sc.R0
    nx = int(round(W / w))
    cubes = []
    for wall in WALLS:
        for j in range(n_time):
            s = s0 + j * l
            for i in range(nx):
                cubes.append(ParabolicCube(k, wall, s, s + l, (i + 0.5) * w, w, h, r, clamped))
    return cubes


def initial_partition(L: float, W: float, H: float, spacing=None, min_samples: int = 8,
                      max_generation: int | None = None) -> InitialPartition:
    """Graded initial selection of boundary cubes.

    For ``k >= 1`` the band ``4^-k L0 <= t <= 4^-k+1 L0`` is tiled by
    generation-k cubes, and ``t >= L0`` by generation-0 cubes. The bands are
    generated down to ``k_max``, the finest generation resolvable at the
    given sample ``spacing = (dt, dx, dy)``, capped by ``max_generation``
    (default 30, or 0 when no spacing is given); the remaining layer ``(0, 4^-k_max L0)`` is one generation-``k_max`` cube
    thick, with its doubled cube cut off at ``t = 0`` (``clamped``).
    """
    sc = base_scales(L, W, H)
    if max_generation is None:
        # without sample spacing every generation counts as resolved
        max_generation = 30 if spacing is not None else 0
    k_max = 0
    while k_max < max_generation and _generation_resolvable(sc, k_max + 1, spacing, min_samples):
        k_max += 1
    cubes = []
    cubes += _layer(sc, W, k_max, 0.0, 1, clamped=True)
    for k in range(k_max, 0, -1):
        cubes += _layer(sc, W, k, 4.0**-k * sc.L0, 3)
    if sc.k_L > 0:
        cubes += _layer(sc, W, 0, sc.L0, 4**sc.k_L - 1)
    cubes.sort(key=ParabolicCube.sort_key)
    return InitialPartition(L, W, H, sc, k_max, cubes)


# ---------------------------------------------------------------------------
# suitability and refinement

def _count_in(points, a, b):
    return int(np.count_nonzero((points >= a) & (points <= b)))


def _sample_counts(cube: ParabolicCube, density: SpaceTimeDensity) -> tuple[int, int, int]:
    t1, t2, x1, x2, y1, y2 = cube.doubled(density.H)
    nt = _count_in(density.times, t1, t2)
    nx = int(math.floor((x2 - x1) / density.dx + 1e-9))
    ny = _count_in((np.arange(density.ny) + 0.5) * density.dy, y1, y2)
    return nt, nx, ny


def doubled_average(cubes, density: SpaceTimeDensity, min_samples: int = 8) -> np.ndarray:
    """Average of the density over each cube's 2Q; raises ResolutionError when under-sampled."""
    if not cubes:
        return np.zeros(0)
    for c in cubes:
        counts = _sample_counts(c, density)
        if min(counts) < min_samples:
            raise ResolutionError(
                f"2Q of cube (k={c.k}, s={c.s:.4g}) holds {counts} samples per axis, need {min_samples}")
    b = np.array([c.doubled(density.H) for c in cubes])
    integral = density.box_integral(*b.T)
    vol = (b[:, 1] - b[:, 0]) * (b[:, 3] - b[:, 2]) * (b[:, 5] - b[:, 4])
    return integral / vol


def suitability(cube: ParabolicCube, density: SpaceTimeDensity, c0: float = DEFAULT_C0,
                min_samples: int = 8) -> bool:
    avg = doubled_average([cube], density, min_samples)[0]
    return bool(avg <= c0 * cube.r**-4)


@dataclass
class Decomposition:
    cubes: list
    c0: float
    scales: BaseScales
    T: float
    W: float
    H: float
    averages: np.ndarray  # 2Q average per cube
    witness: list  # parent 2Q average (None for cubes of the initial selection)
    unresolved: list = field(default_factory=list)

    def total_measure(self) -> float:
        return math.fsum(c.wall_measure for c in self.cubes)

    def to_json(self, path=None, tilde=None) -> str:
        rows = []
        for n, c in enumerate(self.cubes):
            rows.append({
                "k": c.k, "wall": c.wall, "s": c.s, "t": c.t, "x": c.x, "w": c.w, "h": c.h, "r": c.r,
                "clamped": c.clamped, "avg_dissipation": float(self.averages[n]),
                "tilde_omega": None if tilde is None else float(tilde.values[n]),
            })
        text = json.dumps({"c0": self.c0, "scales": asdict(self.scales), "T": self.T, "W": self.W,
                           "H": self.H, "cubes": rows}, indent=1, sort_keys=True)
        if path is not None:
            Path(path).parent.mkdir(parents=True, exist_ok=True)
            Path(path).write_text(text)
        return text


def refine(initial: InitialPartition, density: SpaceTimeDensity, c0: float = DEFAULT_C0,
           max_generation: int | None = None, min_samples: int = 8,
           on_unresolved: str = "raise") -> Decomposition:
    """Split unsuitable boundary cubes into their 8 boundary children until all are suitable.

    Cubes still unsuitable at ``max_generation`` (default: the finest
    generation the density resolves) raise UnresolvedCubeError, or with
    ``on_unresolved="keep"`` are kept and listed in ``Decomposition.unresolved``.
    """
    if on_unresolved not in ("raise", "keep"):
        raise ValueError("on_unresolved must be 'raise' or 'keep'")
    sc = initial.scales
    spacing = (density.sample_spacing, density.dx, density.dy)
    if max_generation is None:
        max_generation = initial.k_max
        while _generation_resolvable(sc, max_generation + 1, spacing, min_samples):
            max_generation += 1

    done, done_avg, done_wit, offenders = [], [], [], []
    frontier = list(initial.cubes)
    witness = [None] * len(frontier)
    while frontier:
        avg = doubled_average(frontier, density, min_samples)
        nxt, nxt_wit = [], []
        for c, a, wit in zip(frontier, avg, witness):
            if a <= c0 * c.r**-4:
                done.append(c); done_avg.append(a); done_wit.append(wit)
            elif c.k >= max_generation:
                offenders.append(c)
                done.append(c); done_avg.append(a); done_wit.append(wit)
            else:
                kids = c.children()
                nxt += kids
                nxt_wit += [float(a)] * len(kids)
        frontier, witness = nxt, nxt_wit
    if offenders and on_unresolved == "raise":
        raise UnresolvedCubeError(offenders)
    order = sorted(range(len(done)), key=lambda n: done[n].sort_key())
    return Decomposition([done[n] for n in order], c0, sc, initial.L, initial.W, initial.H,
                         np.array([done_avg[n] for n in order]), [done_wit[n] for n in order],
                         sorted(offenders, key=ParabolicCube.sort_key))


def decompose(density: SpaceTimeDensity, c0: float = DEFAULT_C0, min_samples: int = 8,
              on_unresolved: str = "raise", max_generation: int | None = None) -> Decomposition:
    """Initial selection over the density's time span, then refinement.

    ``max_generation`` caps both the graded initial selection and the
    refinement; by default the cap is the finest generation the samples
    resolve. An explicit cap keeps cube families identical across grids, and
    raises ResolutionError if the density cannot resolve it.
    """
    T = density.times[-1] - density.times[0]
    if density.times[0] != 0.0:
        raise RangeError("density must start at t = 0")
    spacing = (density.sample_spacing, density.dx, density.dy)
    cap = 30 if max_generation is None else max_generation
    init = initial_partition(T, density.W, density.H, spacing, min_samples, max_generation=cap)
    if max_generation is not None and init.k_max < max_generation:
        raise ResolutionError(f"generation {max_generation} is not resolved by the samples "
                              f"(finest resolvable: {init.k_max})")
    return refine(init, density, c0, max_generation=max_generation, min_samples=min_samples,
                  on_unresolved=on_unresolved)


def check_partition(decomp: Decomposition, rtol: float = 1e-10) -> dict:
    """Measure, disjointness and scale-bracketing checks of a decomposition."""
    total = decomp.total_measure()
    expected = decomp.T * 2 * decomp.W
    measure_ok = abs(total - expected) <= rtol * expected
    bracket_ok = all(
        c.r * (1 - 1e-12) <= min(math.sqrt(c.l), c.w, c.h) and max(math.sqrt(c.l), c.w, c.h) <= 2 * c.r * (1 + 1e-12)
        for c in decomp.cubes
    )
    return {"measure": total, "expected": expected, "measure_ok": measure_ok,
            "disjoint": footprints_disjoint(decomp.cubes, decomp.W), "bracket_ok": bracket_ok}


def footprints_disjoint(cubes, W: float) -> bool:
    """Pairwise disjointness of the open footprints ``(s,t) x (x - w/2, x + w/2)`` on each wall."""
    for wall in WALLS:
        cs = [c for c in cubes if c.wall == wall]
        if not cs:
            continue
        s = np.array([c.s for c in cs]); t = np.array([c.t for c in cs])
        a = np.array([c.x - c.w / 2 for c in cs]); w = np.array([c.w for c in cs])
        eps = 1e-12 * max(W, float(t.max()))
        tov = (s[:, None] < t[None, :] - eps) & (s[None, :] < t[:, None] - eps)
        d = (a[None, :] - a[:, None]) % W  # offset of j's left edge from i's
        xov = (d < w[:, None] - eps) | (d > W - w[None, :] + eps)
        np.fill_diagonal(tov, False)
        if np.any(tov & xov):
            return False
    return True


def witness_check(decomp: Decomposition) -> bool:
    """Every refined cube's parent average exceeds ``c0 (2r)^-4``."""
    return all(w is None or w > decomp.c0 * (2 * c.r) ** -4
               for c, w in zip(decomp.cubes, decomp.witness))


# ---------------------------------------------------------------------------
# averaged wall vorticity

def _cum_trapezoid(t, v):
    out = np.zeros_like(v, dtype=float)
    dt = np.diff(t).reshape((-1,) + (1,) * (v.ndim - 1))
    out[1:] = np.cumsum(0.5 * dt * (v[1:] + v[:-1]), axis=0)
    return out


def _linear_integral_to(t, cum, v, a):
    """``int_{t[0]}^a`` of the piecewise-linear interpolant of samples ``v`` at ``t``."""
    k = int(np.clip(np.searchsorted(t, a, side="right") - 1, 0, t.size - 2))
    s = a - t[k]
    slope = (v[k + 1] - v[k]) / (t[k + 1] - t[k])
    return cum[k] + v[k] * s + 0.5 * slope * s * s


def periodic_linear_average(xs, g, W: float, a: float, b: float) -> float:
    """Mean over ``(a, b)`` of the periodic piecewise-linear interpolant of ``g`` at nodes ``xs``."""
    xe = np.append(xs, W)
    ge = np.append(g, g[0])
    cum = _cum_trapezoid(xe, ge)
    period = cum[-1]

    def G(x):
        q = math.floor(x / W)
        return q * period + _linear_integral_to(xe, cum, ge, x - q * W)

    return (G(b) - G(a)) / (b - a)


@dataclass
class TildeOmega:
    cubes: list
    values: np.ndarray

    def lookup(self, t: float, x: float, wall: str, W: float) -> float:
        for c, v in zip(self.cubes, self.values):
            if c.wall == wall and c.s <= t < c.t and ((x - (c.x - c.w / 2)) % W) < c.w:
                return float(v)
        raise RangeError(f"no cube contains (t={t}, x={x}) on the {wall} wall")


def tilde_omega(decomp: Decomposition, times, x, omega: dict, min_samples: int = 4) -> TildeOmega:
    """Per cube: time-average ``omega`` over ``(s, t)`` at each wall sample, take
    ``|.|``, then average over the wall box.

    ``omega[wall]`` has shape ``(len(times), len(x))``; ``x`` are periodic
    sample positions on ``[0, W)``. Time integrals are exact for the
    piecewise-linear interpolant in t, the spatial mean is exact for the
    periodic piecewise-linear interpolant in x'.
    """
    times = np.asarray(times, dtype=float)
    x = np.asarray(x, dtype=float)
    cums = {w: _cum_trapezoid(times, np.asarray(omega[w], dtype=float)) for w in WALLS}
    vals = np.empty(len(decomp.cubes))
    for n, c in enumerate(decomp.cubes):
        nt = _count_in(times, c.s, c.t)
        nxs = int(math.floor(c.w / (x[1] - x[0]) + 1e-9)) if x.size > 1 else 0
        if nt < min_samples or nxs < min_samples:
            raise ResolutionError(
                f"cube (k={c.k}, s={c.s:.4g}) holds {nt} trace times and {nxs} wall samples, need {min_samples}")
        om = np.asarray(omega[c.wall], dtype=float)
        cum = cums[c.wall]
        avg_t = (_linear_integral_to(times, cum, om, c.t) - _linear_integral_to(times, cum, om, c.s)) / c.l
        vals[n] = periodic_linear_average(x, np.abs(avg_t), decomp.W, c.x - c.w / 2, c.x + c.w / 2)
    return TildeOmega(decomp.cubes, vals)


# ---------------------------------------------------------------------------
# weak Lorentz quasi-norms

@dataclass
class LorentzReport:
    p: float
    value: float
    sigma_star: float
    levels: np.ndarray  # distinct values of |f|, descending
    measures: np.ndarray  # |{|f| >= level}|

    def to_csv(self, path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sigma", "measure", "sigma_times_measure_pow"])
            for s, m in zip(self.levels, self.measures):
                w.writerow([repr(float(s)), repr(float(m)), repr(float(s * m ** (1 / self.p)))])


def weak_lorentz(values, measures, p: float) -> LorentzReport:
    """``sup_sigma sigma |{|f| > sigma}|^(1/p)`` for ``f`` taking ``values`` on sets of ``measures``.

    The supremum is approached as sigma rises to a sample value, so it is
    evaluated at the distinct sample values of ``|f|``.
    """
    if p <= 0:
        raise ValueError("p must be positive")
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    m = np.broadcast_to(np.asarray(measures, dtype=float), np.shape(values)).ravel()
    keep = (v > 0) & (m > 0)
    v, m = v[keep], m[keep]
    if v.size == 0:
        return LorentzReport(p, 0.0, 0.0, np.zeros(0), np.zeros(0))
    order = np.argsort(-v, kind="stable")
    v, m = v[order], m[order]
    levels, first = np.unique(-v, return_index=True)
    levels = -levels
    cm = np.cumsum(m)
    last = np.append(first[1:], v.size) - 1
    meas = cm[last]
    curve = levels * meas ** (1.0 / p)
    i = int(np.argmax(curve))
    return LorentzReport(p, float(curve[i]), float(levels[i]), levels, meas)


def boundary_regularity_statistic(tilde: TildeOmega, W: float, H: float, grad_sq_total: float) -> dict:
    """Weak-L^{3/2} size of ``tilde_omega`` above ``max(1/s, W^-2, H^-2)`` against ``||grad u||^2``.

    ``s`` is each cube's left time endpoint; cubes starting at 0 never count.
    """
    cubes = tilde.cubes
    s = np.array([c.s for c in cubes])
    with np.errstate(divide="ignore"):
        thresh = np.maximum(np.where(s > 0, 1.0 / np.where(s > 0, s, 1.0), np.inf), max(W**-2, H**-2))
    above = tilde.values > thresh
    meas = np.array([c.wall_measure for c in cubes])
    rep = weak_lorentz(np.where(above, tilde.values, 0.0), meas, 1.5)
    lhs = rep.value**1.5
    ratio = lhs / grad_sq_total if grad_sq_total > 0 else (0.0 if lhs == 0 else math.inf)
    return {"lhs": lhs, "rhs_raw": grad_sq_total, "ratio": ratio, "above_count": int(above.sum()),
            "above_measure": float(meas[above].sum())}


def level_set_check(decomp: Decomposition, tilde: TildeOmega, r_star: float, c1: float | None = None) -> dict:
    """Measure of ``{tilde_omega > max(c1 r*^-2, 1/t, W^-2, H^-2)}`` against the cube bookkeeping bound.

    ``c1`` defaults to the fitted ``max_i tilde_omega_i r_i^2``.
    """
    r = np.array([c.r for c in tilde.cubes])
    if c1 is None:
        c1 = float(np.max(tilde.values * r**2)) if r.size else 0.0
    floor = max(c1 * r_star**-2, decomp.W**-2, decomp.H**-2)
    lhs = 0.0
    for c, v in zip(tilde.cubes, tilde.values):
        # exact measure of {t in (s,t): v > max(floor, 1/t)}
        if v > floor:
            lhs += max(0.0, c.t - max(c.s, 1.0 / v)) * c.w
    # |Q-bar| <= |Q| / r since h >= r
    rhs = math.fsum(c.volume / c.r for c in tilde.cubes if c.r < r_star * (1 - 1e-12))
    return {"lhs": lhs, "rhs": rhs, "c1": c1, "holds": lhs <= rhs * (1 + 1e-12)}


# ---------------------------------------------------------------------------
# parabolic maximal function

def parabolic_maximal(density: SpaceTimeDensity, t, x, y, radii=None) -> np.ndarray:
    """``sup_r`` of the mean of the density over ``(t-r^2, t+r^2) x box_r(x, y)``.

    The density is zero outside the sampled span and channel, periodic in x.
    ``box_r`` is the l-infinity ball of radius r; the supremum runs over the
    dyadic ``radii`` (default: from ``max(W, H, sqrt(span))`` down to half the
    finest cell size), so the result is within a dimensional factor of the
    supremum over all r.
    """
    if radii is None:
        radii = dyadic_radii(density)
    t, x, y = np.broadcast_arrays(*(np.asarray(a, dtype=float) for a in (t, x, y)))
    best = np.zeros(t.shape)
    for r in radii:
        integral = density.box_integral(t - r * r, t + r * r, x - r, x + r, y - r, y + r)
        best = np.maximum(best, integral / (2 * r * r * (2 * r) ** 2))
    return best


def dyadic_radii(density: SpaceTimeDensity) -> np.ndarray:
    span = density.times[-1] - density.times[0]
    r_max = max(density.W, density.H, math.sqrt(span))
    dt_min = float(np.min(np.diff(density.times)))
    r_min = 0.5 * min(density.dx, density.dy, math.sqrt(dt_min))
    n = int(math.ceil(math.log2(r_max / r_min)))
    return r_max * 2.0 ** -np.arange(n + 1)


def maximal_weak_constant(density: SpaceTimeDensity, radii=None) -> dict:
    """``||M f||_{L^{1,inf}} / ||f||_{L^1}`` with ``M f`` evaluated at every sample."""
    T, X, Y = np.meshgrid(density.times, (np.arange(density.nx) + 0.5) * density.dx,
                          (np.arange(density.ny) + 0.5) * density.dy, indexing="ij")
    Mf = parabolic_maximal(density, T, X, Y, radii)
    cell_t = np.diff(density.time_edges)[:, None, None]
    meas = np.broadcast_to(cell_t * density.dx * density.dy, Mf.shape)
    rep = weak_lorentz(Mf, meas, 1.0)
    l1 = density.total()
    return {"weak_norm": rep.value, "l1": l1, "constant": rep.value / l1 if l1 > 0 else 0.0}


# ---------------------------------------------------------------------------
# unit-scale local check

def local_average_vorticity_check(times, x, omega_wall, density: SpaceTimeDensity, t0: float,
                                  x0: float, wall: str = BOTTOM) -> dict:
    """``int_{|x'-x0|<1} |int_{t0-1}^{t0} omega dt| dx'`` and
    ``int_{t0-4}^{t0} ||grad u||^2_{L2(B+_2)} dt``, with ``B+_2`` the half box of
    radius 2 on ``wall``. Unit-viscosity data only.
    """
    if t0 - 4 < density.times[0] - 1e-12 or t0 > density.times[-1] + 1e-12:
        raise RangeError("the time window (t0-4, t0) must lie inside the run")
    if density.H < 2 or density.W < 4:
        raise RangeError("the half box of radius 2 does not fit in the channel")
    times = np.asarray(times, dtype=float)
    om = np.asarray(omega_wall, dtype=float)
    cum = _cum_trapezoid(times, om)
    integ = _linear_integral_to(times, cum, om, t0) - _linear_integral_to(times, cum, om, t0 - 1)
    lhs = 2.0 * periodic_linear_average(np.asarray(x, dtype=float), np.abs(integ), density.W, x0 - 1, x0 + 1)
    y1, y2 = (0.0, 2.0) if wall == BOTTOM else (density.H - 2.0, density.H)
    c0_local = float(density.box_integral(t0 - 4, t0, x0 - 2, x0 + 2, y1, y2))
    return {"lhs": lhs, "c0_local": c0_local}


def cube_count_by_generation(decomp: Decomposition) -> dict:
    out = {}
    for c in decomp.cubes:
        out[c.k] = out.get(c.k, 0) + 1
    return dict(sorted(out.items()))

