"""Time integration of the 2D channel Navier-Stokes equations with no-slip walls.

Scheme, per step of length ``dt``:

1. implicit midpoint rule for ``u_t + (u.grad)u = nu lap u`` with the
   advection in skew-symmetric MAC form, solved by fixed-point iteration.
   The diffusion part of each iterate is inverted exactly: a real FFT in x
   leaves one tridiagonal system in y per Fourier mode;
2. non-incremental projection onto discretely divergence-free fields, same
   FFT/tridiagonal structure with Neumann rows at the walls.

The skew form does no work on the midpoint ``m``, step 2 is an orthogonal
projection, so kinetic energy falls by at least ``nu*dt*||grad m||^2`` per
step. The ledger's cumulative dissipation is that applied amount.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .fields import (
    BOTTOM,
    TOP,
    WALLS,
    ChannelGeometry,
    Grid,
    SpaceTimeDensity,
    VelocityField,
    dirichlet_form,
    dissipation_density,
    divergence,
    gradient,
    inner,
    J_of,
    laplacian,
    l2_norm,
    modified_wavenumbers,
    pressure_gradient,
    shear_field,
    solve_tridiagonal,
    wall_normal_derivative,
)


class BlowUpError(RuntimeError):
    def __init__(self, step: int, t: float):
        super().__init__(f"non-finite velocity at step {step} (t={t:.6g})")
        self.step = step
        self.t = t


class InvalidConfigError(ValueError):
    pass


class InvalidWindowError(ValueError):
    pass


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    t_end: float
    cfl: float = 0.4
    output_stride: int | None = None
    sample_dt: float | None = None
    min_speed: float = 1.0
    store_density: bool = True
    store_snapshots: bool = False

    def __post_init__(self):
        if not self.nu > 0:
            raise InvalidConfigError(f"viscosity must be positive, got {self.nu}")
        if not 0 < self.cfl < 1:
            raise InvalidConfigError(f"cfl must lie in (0, 1), got {self.cfl}")
        if not self.t_end > 0:
            raise InvalidConfigError(f"t_end must be positive, got {self.t_end}")
        if self.output_stride is not None and self.output_stride < 1:
            raise InvalidConfigError("output_stride must be >= 1")


# ---------------------------------------------------------------------------
# initial data

@dataclass(frozen=True)
class Perturbation:
    amplitude: float = 0.0
    band: tuple[int, int] = (2, 8)
    seed: int = 0
    wall_margin: float = 0.125  # fraction of H kept free of noise near each wall


@dataclass(frozen=True)
class InitialData:
    field: VelocityField
    deviation: float  # ||u0 - ubar||_{L2}
    ramp_width: float


def shear_profile(kind: str, A: float, H: float) -> Callable[[np.ndarray], np.ndarray]:
    """Background shear U(y): ``constant`` (A) or ``linear`` (A at y=0 to -A at y=H)."""
    if kind == "constant":
        return lambda y: np.full_like(np.asarray(y, dtype=float), A)
    if kind == "linear":
        return lambda y: A * (1.0 - 2.0 * np.asarray(y, dtype=float) / H)
    raise InvalidConfigError(f"unknown shear profile {kind!r}")


def ramp(y, delta: float, H: float) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    return np.clip(np.minimum(y, H - y) / delta, 0.0, 1.0)


def solenoidal_noise(grid: Grid, pert: Perturbation, rms: float) -> VelocityField:
    """Band-limited divergence-free noise from a stream function vanishing near the walls."""
    W, H = grid.geometry.W, grid.geometry.H
    rng = np.random.default_rng(pert.seed)
    kmin, kmax = pert.band
    x = grid.x_faces[:, None]
    y = grid.y_faces[None, :]
    psi = np.zeros((grid.nx, grid.ny + 1))
    for kx in range(0, kmax + 1):
        for ky in range(1, kmax + 1):
            k = math.hypot(kx, ky)
            if not kmin <= k <= kmax:
                continue
            amp = rng.standard_normal() / k
            ph1, ph2 = rng.uniform(0, 2 * np.pi, size=2)
            psi += amp * np.cos(2 * np.pi * kx * x / W + ph1) * np.cos(np.pi * ky * y / H + ph2)
    m = pert.wall_margin * H
    s = np.clip((y - m) / (H - 2 * m), 0.0, 1.0)
    psi *= np.sin(np.pi * s) ** 2
    u1 = (psi[:, 1:] - psi[:, :-1]) / grid.dy
    u2 = -(np.roll(psi, -1, axis=0) - psi) / grid.dx
    u2[:, 0] = u2[:, -1] = 0.0
    f = VelocityField(grid, u1, u2)
    norm = l2_norm(f) / math.sqrt(grid.geometry.area)
    if norm == 0.0:
        return f
    return f * (rms / norm)


def make_initial_shear(grid: Grid, A: float, profile: str | Callable = "constant",
                       ramp_cells: int = 4, perturbation: Perturbation | None = None) -> InitialData:
    """Shear ``A s(y) U(y) e1`` ramped to zero over ``ramp_cells`` cells at each wall.

    With a perturbation, divergence-free noise of RMS ``amplitude * A`` is added
    away from the walls.
    """
    if ramp_cells < 2:
        raise InvalidConfigError("ramp_cells must be >= 2")
    if 2 * ramp_cells > grid.ny:
        raise InvalidConfigError("ramp wider than half the channel")
    H = grid.geometry.H
    U = shear_profile(profile, A, H) if isinstance(profile, str) else profile
    delta = ramp_cells * grid.dy
    u = shear_field(grid, lambda y: U(y) * ramp(y, delta, H))
    if perturbation is not None and perturbation.amplitude > 0 and A != 0:
        u = u + solenoidal_noise(grid, perturbation, perturbation.amplitude * abs(A))
    ubar = shear_field(grid, U)
    return InitialData(u, l2_norm(u - ubar), delta)


# ---------------------------------------------------------------------------
# records

@dataclass
class EnergyLedger:
    t: np.ndarray
    kinetic: np.ndarray
    dissipation_rate: np.ndarray
    cumulative_dissipation: np.ndarray

    def residual(self) -> np.ndarray:
        """``kinetic(t) + cumulative(t) - kinetic(0)``; non-positive for a dissipative run."""
        return self.kinetic + self.cumulative_dissipation - self.kinetic[0]

    def to_csv(self, path) -> None:
        _write_csv(path, ["t", "kinetic", "dissipation_rate", "cumulative_dissipation"],
                   zip(self.t, self.kinetic, self.dissipation_rate, self.cumulative_dissipation))


@dataclass
class BoundaryVorticityTrace:
    times: np.ndarray
    x: np.ndarray
    omega: dict  # wall -> (nt, nx)
    geometry: ChannelGeometry

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("trace sample times must be strictly increasing")
        for w in WALLS:
            if self.omega[w].shape != (self.times.size, self.x.size):
                raise ValueError(f"trace for {w} wall has shape {self.omega[w].shape}")

    def to_csv(self, path) -> None:
        header = ["t", "wall"] + [f"omega_{i}" for i in range(self.x.size)]
        rows = []
        for k, t in enumerate(self.times):
            for w in WALLS:
                rows.append([t, w, *self.omega[w][k]])
        _write_csv(path, header, rows)

    @classmethod
    def from_csv(cls, path, geometry: ChannelGeometry) -> "BoundaryVorticityTrace":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            nx = len(header) - 2
            times, data = [], {w: [] for w in WALLS}
            for row in reader:
                t = float(row[0])
                if not times or times[-1] != t:
                    times.append(t)
                data[row[1]].append([float(v) for v in row[2:]])
        x = np.arange(nx) * geometry.W / nx
        return cls(np.array(times), x, {w: np.array(data[w]) for w in WALLS}, geometry)


@dataclass
class RunResult:
    grid: Grid
    config: SolverConfig
    ledger: EnergyLedger
    trace: BoundaryVorticityTrace
    separation: np.ndarray  # ||u(t) - ubar||^2 on ledger times
    wall_rate: np.ndarray  # (nt, 2): int nu omega dx' per wall (bottom, top), ledger times
    density: SpaceTimeDensity | None
    snapshots: list = field(default_factory=list)  # (t, VelocityField)
    final: VelocityField | None = None
    substeps: int = 0


def _write_csv(path, header, rows) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([v if isinstance(v, str) else repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# solver

def wall_vorticity(u: VelocityField, wall: str) -> np.ndarray:
    """Wall vorticity at the u1 x-positions: ``-du1/dy`` (``d1 u2`` vanishes there)."""
    return -wall_normal_derivative(u.u1, u.grid.dy, wall)


def advect(a: VelocityField, v: VelocityField) -> VelocityField:
    """Skew-symmetric MAC advection of ``v`` by ``a``: ``div(a (x) v) - 1/2 v div_cv(a)``.

    ``inner(advect(a, v), v) == 0`` for any ``a`` with zero wall flux, and for
    divergence-free ``a`` this is the Harlow-Welch conservative form.
    """
    g = a.grid
    dx, dy = g.dx, g.dy
    a1, a2, v1, v2 = a.u1, a.u2, v.u1, v.u2

    # x-momentum control volumes around u1: faces at cell centres and corners
    a1c = 0.5 * (a1 + np.roll(a1, -1, axis=0))
    v1c = 0.5 * (v1 + np.roll(v1, -1, axis=0))
    a2x = 0.5 * (a2 + np.roll(a2, 1, axis=0))
    v1y = np.zeros_like(v2)
    v1y[:, 1:-1] = 0.5 * (v1[:, 1:] + v1[:, :-1])
    fx = a1c * v1c
    fy = a2x * v1y
    n1 = (fx - np.roll(fx, 1, axis=0)) / dx + (fy[:, 1:] - fy[:, :-1]) / dy
    d1 = (a1c - np.roll(a1c, 1, axis=0)) / dx + (a2x[:, 1:] - a2x[:, :-1]) / dy
    n1 -= 0.5 * d1 * v1

    # y-momentum control volumes around interior u2
    a1y = np.zeros_like(a2)
    a1y[:, 1:-1] = 0.5 * (a1[:, 1:] + a1[:, :-1])
    v2x = 0.5 * (v2 + np.roll(v2, 1, axis=0))
    a2c = 0.5 * (a2[:, 1:] + a2[:, :-1])
    v2c = 0.5 * (v2[:, 1:] + v2[:, :-1])
    gx = a1y * v2x
    gy = a2c * v2c
    n2 = np.zeros_like(v2)
    n2[:, 1:-1] = ((np.roll(gx, -1, axis=0) - gx) / dx)[:, 1:-1] + (gy[:, 1:] - gy[:, :-1]) / dy
    d2 = ((np.roll(a1y, -1, axis=0) - a1y) / dx)[:, 1:-1] + (a2c[:, 1:] - a2c[:, :-1]) / dy
    n2[:, 1:-1] -= 0.5 * d2 * v2[:, 1:-1]
    return VelocityField(g, n1, n2)


def advection(u: VelocityField) -> VelocityField:
    """``(u . grad) u`` in skew-symmetric form."""
    return advect(u, u)


class NotConvergedError(RuntimeError):
    pass


class ChannelSolver:
    """Stateful integrator; one instance advances one run, single-threaded.

    Each step solves the implicit midpoint rule
    ``u* = u - dt advect(m, m) + nu dt lap(m)``, ``m = (u + u*)/2`` by
    fixed-point iteration, with the diffusion part inverted exactly,
    then projects ``u*``.
    """

    def __init__(self, u0: VelocityField, cfg: SolverConfig, tol: float = 1e-13, max_iter: int = 60):
        self.grid = u0.grid
        self.cfg = cfg
        self.u = project(u0)
        self.t = 0.0
        self.tol = tol
        self.max_iter = max_iter
        self._kx2 = modified_wavenumbers(self.grid.nx, self.grid.dx)

    def _diffuse(self, rhs: VelocityField, dt: float) -> VelocityField:
        g = self.grid
        a = 0.5 * self.cfg.nu * dt
        off = -a / g.dy**2
        kx2 = self._kx2[:, None]

        r1 = np.fft.rfft(rhs.u1, axis=0)
        d1 = 1.0 + a * (kx2 + 2.0 / g.dy**2) * np.ones((1, g.ny))
        d1[:, 0] += a / g.dy**2
        d1[:, -1] += a / g.dy**2
        u1 = np.fft.irfft(solve_tridiagonal(off, d1, off, r1), n=g.nx, axis=0)

        r2 = np.fft.rfft(rhs.u2[:, 1:-1], axis=0)
        d2 = 1.0 + a * (kx2 + 2.0 / g.dy**2) * np.ones((1, g.ny - 1))
        u2 = np.zeros((g.nx, g.ny + 1))
        u2[:, 1:-1] = np.fft.irfft(solve_tridiagonal(off, d2, off, r2), n=g.nx, axis=0)
        return VelocityField(g, u1, u2)

    def step(self, dt: float) -> float:
        """Advance by ``dt``; returns the dissipation ``nu*dt*||grad m||^2`` applied."""
        nu = self.cfg.nu
        u = self.u
        base = u + laplacian(u) * (0.5 * nu * dt)
        m = u
        scale = max(l2_norm(u), 1e-300)
        for _ in range(self.max_iter):
            u_star = self._diffuse(base - advect(m, m) * dt, dt)
            m_new = (u_star + u) * 0.5
            change = l2_norm(m_new - m)
            m = m_new
            if change <= self.tol * scale:
                break
        else:
            raise NotConvergedError(f"midpoint iteration stalled (change {change / scale:.3g})")
        applied = nu * dt * dirichlet_form(m)
        self.u = project(u_star)
        self.t += dt
        return applied

    def advance(self, dt: float, depth: int = 0) -> tuple[float, int]:
        """``step`` with recursive halving when the midpoint iteration stalls."""
        saved = (self.u, self.t)
        try:
            return self.step(dt), 1
        except NotConvergedError:
            if depth >= 8:
                raise
            self.u, self.t = saved
        d1, n1 = self.advance(0.5 * dt, depth + 1)
        d2, n2 = self.advance(0.5 * dt, depth + 1)
        return d1 + d2, n1 + n2


@functools.lru_cache(maxsize=32)
def _poisson_bands(nx: int, ny: int, dx: float, dy: float):
    kx2 = modified_wavenumbers(nx, dx)[:, None]
    diag = -(kx2 + 2.0 / dy**2) * np.ones((1, ny))
    diag[:, 0] += 1.0 / dy**2
    diag[:, -1] += 1.0 / dy**2
    lower = np.full((kx2.shape[0], ny), 1.0 / dy**2)
    upper = lower.copy()
    # pin the mean of the k=0 mode
    diag[0, 0] = 1.0
    upper[0, 0] = 0.0
    return lower, diag, upper


def project(u: VelocityField) -> VelocityField:
    """Orthogonal projection onto discretely divergence-free fields with zero wall flux."""
    g = u.grid
    D = np.fft.rfft(divergence(u), axis=0)
    D[0, 0] = 0.0
    lower, diag, upper = _poisson_bands(g.nx, g.ny, g.dx, g.dy)
    phi = np.fft.irfft(solve_tridiagonal(lower, diag, upper, D), n=g.nx, axis=0)
    return u - pressure_gradient(g, phi)


def _initial_dt(u: VelocityField, cfg: SolverConfig) -> float:
    g = u.grid
    speed = max(u.max_speed(), cfg.min_speed)
    return cfg.cfl * min(g.dx, g.dy) / speed


def run(initial: VelocityField | InitialData, cfg: SolverConfig,
        background: Callable[[np.ndarray], np.ndarray] | None = None) -> RunResult:
    """Integrate to ``cfg.t_end`` recording energy, separation and wall vorticity.

    ``background`` is the shear profile U(y) of the reference state ``U e1``
    defining the separation ``||u - U e1||^2``; defaults to zero.
    """
    u0 = initial.field if isinstance(initial, InitialData) else initial
    g = u0.grid
    H = g.geometry.H
    U = background or (lambda y: np.zeros_like(np.asarray(y, dtype=float)))
    ubar = shear_field(g, U)

    solver = ChannelSolver(u0, cfg)
    n_steps = max(1, math.ceil(cfg.t_end / _initial_dt(solver.u, cfg) - 1e-9))
    dt = cfg.t_end / n_steps
    if cfg.output_stride is not None:
        stride = cfg.output_stride
    elif cfg.sample_dt is not None:
        stride = max(1, int(round(cfg.sample_dt / dt)))
    else:
        stride = max(1, n_steps // 200)

    ts, kin, rate, cum, sep, brate = [], [], [], [], [], []
    s_times, s_omega, s_density, snaps = [], {w: [] for w in WALLS}, [], []
    cumulative = 0.0

    def record(u: VelocityField, t: float):
        ts.append(t)
        kin.append(0.5 * inner(u, u))
        rate.append(cfg.nu * dirichlet_form(u))
        cum.append(cumulative)
        sep.append(inner(u - ubar, u - ubar))
        brate.append([cfg.nu * float(np.sum(wall_vorticity(u, w))) * g.dx for w in WALLS])

    def sample(u: VelocityField, t: float):
        s_times.append(t)
        for w in WALLS:
            s_omega[w].append(wall_vorticity(u, w))
        if cfg.store_density:
            s_density.append(dissipation_density(u))
        if cfg.store_snapshots:
            snaps.append((t, u))

    record(solver.u, 0.0)
    sample(solver.u, 0.0)
    substeps = 0
    for n in range(1, n_steps + 1):
        u = solver.u
        c = dt * max(np.abs(u.u1).max() / g.dx, np.abs(u.u2).max() / g.dy)
        m = max(1, math.ceil(c / cfg.cfl - 1e-12)) if c > cfg.cfl else 1
        substeps += m - 1
        for _ in range(m):
            applied, k = solver.advance(dt / m)
            cumulative += applied
            substeps += k - 1
        solver.t = n * dt
        if not (np.all(np.isfinite(solver.u.u1)) and np.all(np.isfinite(solver.u.u2))):
            raise BlowUpError(n, solver.t)
        record(solver.u, solver.t)
        if n % stride == 0 or n == n_steps:
            sample(solver.u, solver.t)

    ledger = EnergyLedger(np.array(ts), np.array(kin), np.array(rate), np.array(cum))
    trace = BoundaryVorticityTrace(np.array(s_times), g.x_faces.copy(),
                                   {w: np.array(s_omega[w]) for w in WALLS}, g.geometry)
    density = None
    if cfg.store_density:
        density = SpaceTimeDensity(np.array(s_times), np.array(s_density), g.geometry.W, H)
    return RunResult(g, cfg, ledger, trace, np.array(sep), np.array(brate), density, snaps,
                     solver.u, substeps)


# ---------------------------------------------------------------------------
# post-processing

def _cumulative_trapezoid(times: np.ndarray, values: np.ndarray) -> np.ndarray:
    out = np.zeros_like(values, dtype=float)
    dt = np.diff(times).reshape((-1,) + (1,) * (values.ndim - 1))
    out[1:] = np.cumsum(0.5 * dt * (values[1:] + values[:-1]), axis=0)
    return out


def _integral_at(times, cum, values, t):
    """Integral from times[0] to t of the piecewise-linear interpolant."""
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2))
    h = times[k + 1] - times[k]
    s = t - times[k]
    slope = (values[k + 1] - values[k]) / h
    return cum[k] + values[k] * s + 0.5 * slope * s * s


def time_mollify(times, values, window: float):
    """Sliding average ``(1/window) int_{t-window}^t f(s) ds`` (trapezoid rule).

    Returns the sample times with ``t >= times[0] + window`` and the averages there.
    """
    times = np.asarray(times, dtype=float)
    values = np.asarray(values, dtype=float)
    span = times[-1] - times[0]
    if not 0 < window <= span * (1 + 1e-12):
        raise InvalidWindowError(f"window {window} must lie in (0, {span}]")
    cum = _cumulative_trapezoid(times, values)
    keep = times >= times[0] + window - 1e-12 * max(1.0, abs(times[-1]))
    out = []
    for k in np.flatnonzero(keep):
        a = max(times[k] - window, times[0])
        out.append((cum[k] - _integral_at(times, cum, values, a)) / window)
    return times[keep], np.array(out)


@functools.singledispatch
def rescale_to_unit_viscosity(obj, nu: float):
    """Reinterpret data of a viscosity-``nu`` run in the variables ``u(t,x) = u_nu(nu t, nu x)``."""
    raise TypeError(f"cannot rescale {type(obj).__name__}")


@rescale_to_unit_viscosity.register
def _(geom: ChannelGeometry, nu: float):
    return geom.scaled(1.0 / nu)


@rescale_to_unit_viscosity.register
def _(u: VelocityField, nu: float):
    return VelocityField(u.grid.scaled(1.0 / nu), u.u1.copy(), u.u2.copy())


@rescale_to_unit_viscosity.register
def _(trace: BoundaryVorticityTrace, nu: float):
    return BoundaryVorticityTrace(trace.times / nu, trace.x / nu,
                                  {w: trace.omega[w] * nu for w in WALLS},
                                  trace.geometry.scaled(1.0 / nu))


@rescale_to_unit_viscosity.register
def _(density: SpaceTimeDensity, nu: float):
    return density.scaled(1.0 / nu, 1.0 / nu, nu * nu)


def energy_identity_terms(snapshots, times, nu: float, profile: Callable | None = None,
                          profile_derivative: Callable | None = None) -> dict:
    """Terms of ``d/dt 1/2||u - ubar||^2 = -nu||grad u||^2 + corrections - int J[ubar].(nu omega)``.

    ``snapshots`` holds three consecutive velocity fields at ``times``; the
    time derivative is the centred difference and every other term is
    evaluated on the middle field. ``profile`` is the shear U(y) (default 0).
    The correction ``nu (grad ubar, grad u) - (u - ubar, (u - ubar).grad ubar)``
    vanishes for constant shear.
    """
    if len(snapshots) != 3 or len(times) != 3:
        raise InsufficientDataError("need the snapshot and both time neighbours")
    prev, cur, nxt = snapshots
    g = cur.grid
    H = g.geometry.H
    U = profile or (lambda y: np.zeros_like(np.asarray(y, dtype=float)))
    ubar = shear_field(g, U)
    dp, dn = prev - ubar, nxt - ubar
    lhs = (0.5 * inner(dn, dn) - 0.5 * inner(dp, dp)) / (times[2] - times[0])
    dissipation = -nu * dirichlet_form(cur)
    correction = 0.0
    if profile_derivative is not None:
        dU = np.asarray(profile_derivative(g.y_centers), dtype=float)
        G = gradient(cur)
        correction += nu * float(np.sum(G[0, 1] * dU[None, :])) * g.cell_area
        d = cur - ubar
        d2c = 0.5 * (d.u2[:, 1:] + d.u2[:, :-1])
        d1c = 0.5 * (d.u1 + np.roll(d.u1, -1, axis=0))
        correction -= float(np.sum(d1c * d2c * dU[None, :])) * g.cell_area
    walls = {BOTTOM: float(U(np.array([0.0]))[0]), TOP: float(U(np.array([H]))[0])}
    boundary = -sum(
        float(J_of(walls[w], w)) * nu * float(np.sum(wall_vorticity(cur, w))) * g.dx for w in WALLS
    )
    rhs = dissipation + correction + boundary
    return {
        "lhs_rate": lhs,
        "dissipation_term": dissipation + correction,
        "boundary_term": boundary,
        "residual": lhs - rhs,
    }
