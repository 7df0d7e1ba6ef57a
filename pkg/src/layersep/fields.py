"""Geometry, staggered (MAC) grids and discrete operators on the periodic channel.

Layout on a grid with ``nx`` cells in the periodic direction and ``ny`` cells
between the walls ``y = 0`` and ``y = H``::

    u1[i, j]  at (i*dx,       (j+1/2)*dy)   x-faces,      shape (nx, ny)
    u2[i, j]  at ((i+1/2)*dx,  j*dy)        y-faces,      shape (nx, ny+1)
    p[i, j]   at ((i+1/2)*dx, (j+1/2)*dy)   cell centres, shape (nx, ny)

``u2[:, 0]`` and ``u2[:, ny]`` sit on the walls and are identically zero.
No-slip for ``u1`` is imposed through the antisymmetric ghost value
``u1_ghost = -u1[:, 0]`` (and likewise at the top wall).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import RegularGridInterpolator

BOTTOM = "bottom"
TOP = "top"
WALLS = (BOTTOM, TOP)


class ShapeError(ValueError):
    """Array dimensions do not match the grid."""


@dataclass(frozen=True)
class ChannelGeometry:
    W: float = 1.0
    H: float = 1.0
    d: int = 2

    def __post_init__(self):
        if not (self.W > 0 and self.H > 0):
            raise ValueError(f"channel needs W > 0 and H > 0, got W={self.W}, H={self.H}")
        if self.d not in (2, 3):
            raise ValueError(f"dimension must be 2 or 3, got {self.d}")

    @property
    def area(self) -> float:
        """|Omega| (d = 2)."""
        return self.W * self.H

    @property
    def boundary_measure(self) -> float:
        """|dOmega|: two walls of length W."""
        return 2.0 * self.W

    def scaled(self, factor: float) -> "ChannelGeometry":
        return ChannelGeometry(self.W * factor, self.H * factor, self.d)


@dataclass(frozen=True)
class Grid:
    geometry: ChannelGeometry
    nx: int
    ny: int

    def __post_init__(self):
        if self.nx < 4 or self.ny < 4:
            raise ValueError(f"grid needs nx, ny >= 4, got ({self.nx}, {self.ny})")
        if self.geometry.d != 2:
            raise ValueError("grids are two-dimensional")

    @property
    def dx(self) -> float:
        return self.geometry.W / self.nx

    @property
    def dy(self) -> float:
        return self.geometry.H / self.ny

    @property
    def x_faces(self) -> np.ndarray:
        return np.arange(self.nx) * self.dx

    @property
    def x_centers(self) -> np.ndarray:
        return (np.arange(self.nx) + 0.5) * self.dx

    @property
    def y_faces(self) -> np.ndarray:
        return np.arange(self.ny + 1) * self.dy

    @property
    def y_centers(self) -> np.ndarray:
        return (np.arange(self.ny) + 0.5) * self.dy

    @property
    def cell_area(self) -> float:
        return self.dx * self.dy

    def scaled(self, factor: float) -> "Grid":
        return Grid(self.geometry.scaled(factor), self.nx, self.ny)


@dataclass(frozen=True)
class VelocityField:
    grid: Grid
    u1: np.ndarray
    u2: np.ndarray

    def __post_init__(self):
        g = self.grid
        if self.u1.shape != (g.nx, g.ny):
            raise ShapeError(f"u1 has shape {self.u1.shape}, expected {(g.nx, g.ny)}")
        if self.u2.shape != (g.nx, g.ny + 1):
            raise ShapeError(f"u2 has shape {self.u2.shape}, expected {(g.nx, g.ny + 1)}")

    @classmethod
    def zeros(cls, grid: Grid) -> "VelocityField":
        return cls(grid, np.zeros((grid.nx, grid.ny)), np.zeros((grid.nx, grid.ny + 1)))

    def __add__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.grid, self.u1 + other.u1, self.u2 + other.u2)

    def __sub__(self, other: "VelocityField") -> "VelocityField":
        return VelocityField(self.grid, self.u1 - other.u1, self.u2 - other.u2)

    def __mul__(self, c: float) -> "VelocityField":
        return VelocityField(self.grid, c * self.u1, c * self.u2)

    __rmul__ = __mul__

    def max_speed(self) -> float:
        return float(max(np.abs(self.u1).max(), np.abs(self.u2).max()))


@dataclass(frozen=True)
class ScalarField:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        g = self.grid
        if self.values.shape != (g.nx, g.ny):
            raise ShapeError(f"scalar field has shape {self.values.shape}, expected {(g.nx, g.ny)}")


def shear_field(grid: Grid, profile) -> VelocityField:
    """x-independent field (U(y), 0) with U sampled at the u1 points."""
    u1 = np.broadcast_to(np.asarray(profile(grid.y_centers), dtype=float), (grid.nx, grid.ny)).copy()
    return VelocityField(grid, u1, np.zeros((grid.nx, grid.ny + 1)))


# ---------------------------------------------------------------------------
# norms and inner products (midpoint rule on the staggered control volumes)

def inner(f: VelocityField, g: VelocityField) -> float:
    if f.grid != g.grid:
        raise ShapeError("fields live on different grids")
    # u2 wall rows carry zero weight (half volumes times zero velocity)
    s = np.sum(f.u1 * g.u1) + np.sum(f.u2[:, 1:-1] * g.u2[:, 1:-1])
    return float(s * f.grid.cell_area)


def l2_norm(f) -> float:
    """Midpoint-rule approximation of ``(int_Omega |f|^2 dx)^(1/2)``."""
    if isinstance(f, VelocityField):
        return float(np.sqrt(max(inner(f, f), 0.0)))
    if isinstance(f, ScalarField):
        return float(np.sqrt(np.sum(f.values**2) * f.grid.cell_area))
    raise TypeError(f"cannot take the L2 norm of {type(f).__name__}")


# ---------------------------------------------------------------------------
# derivatives

def _ddy_cells_noslip(u1: np.ndarray, dy: float) -> np.ndarray:
    """d/dy of a cell-centred (in y) quantity vanishing on both walls.

    Centred differences inside; at the first and last rows a quadratic
    through the wall value 0 and the two nearest samples.
    """
    out = np.empty_like(u1)
    out[:, 1:-1] = (u1[:, 2:] - u1[:, :-2]) / (2 * dy)
    out[:, 0] = (u1[:, 0] + u1[:, 1] / 3.0) / dy
    out[:, -1] = -(u1[:, -1] + u1[:, -2] / 3.0) / dy
    return out


def wall_normal_derivative(u1: np.ndarray, dy: float, wall: str) -> np.ndarray:
    """du1/dy on a wall from the one-sided 3-point stencil with u1 = 0 there."""
    if wall == BOTTOM:
        a, b = u1[:, 0], u1[:, 1]
        return (9 * a - b) / (3 * dy)
    if wall == TOP:
        a, b = u1[:, -1], u1[:, -2]
        return -(9 * a - b) / (3 * dy)
    raise ValueError(f"unknown wall {wall!r}")


def gradient(f: VelocityField) -> np.ndarray:
    """Velocity gradient at cell centres, ``G[a, b] = d u_a / d x_b``.

    Returns an array of shape (2, 2, nx, ny).
    """
    g = f.grid
    dx, dy = g.dx, g.dy
    u1, u2 = f.u1, f.u2
    G = np.empty((2, 2, g.nx, g.ny))
    G[0, 0] = (np.roll(u1, -1, axis=0) - u1) / dx
    G[1, 1] = (u2[:, 1:] - u2[:, :-1]) / dy
    du1dy = _ddy_cells_noslip(u1, dy)
    G[0, 1] = 0.5 * (du1dy + np.roll(du1dy, -1, axis=0))
    du2dx = (np.roll(u2, -1, axis=0) - np.roll(u2, 1, axis=0)) / (2 * dx)
    G[1, 0] = 0.5 * (du2dx[:, 1:] + du2dx[:, :-1])
    return G


def dissipation_density(f: VelocityField) -> np.ndarray:
    """|grad u|^2 at cell centres."""
    G = gradient(f)
    return np.sum(G**2, axis=(0, 1))


def curl2d(f: VelocityField) -> np.ndarray:
    """Vorticity ``d1 u2 - d2 u1`` at the cell corners (i*dx, j*dy), shape (nx, ny+1).

    Wall rows use the one-sided no-slip stencil; there ``d1 u2 = 0``.
    """
    g = f.grid
    w = np.empty((g.nx, g.ny + 1))
    d1u2 = (f.u2 - np.roll(f.u2, 1, axis=0)) / g.dx
    d2u1 = (f.u1[:, 1:] - f.u1[:, :-1]) / g.dy
    w[:, 1:-1] = d1u2[:, 1:-1] - d2u1
    w[:, 0] = -wall_normal_derivative(f.u1, g.dy, BOTTOM)
    w[:, -1] = -wall_normal_derivative(f.u1, g.dy, TOP)
    return w


def divergence(f: VelocityField) -> np.ndarray:
    g = f.grid
    return (np.roll(f.u1, -1, axis=0) - f.u1) / g.dx + (f.u2[:, 1:] - f.u2[:, :-1]) / g.dy


def pressure_gradient(grid: Grid, p: np.ndarray) -> VelocityField:
    """MAC gradient of a cell-centred scalar; zero normal component on the walls."""
    g1 = (p - np.roll(p, 1, axis=0)) / grid.dx
    g2 = np.zeros((grid.nx, grid.ny + 1))
    g2[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / grid.dy
    return VelocityField(grid, g1, g2)


def laplacian(f: VelocityField) -> VelocityField:
    """Five-point Laplacian with no-slip ghost rows for u1 and Dirichlet walls for u2."""
    g = f.grid
    dx2, dy2 = g.dx**2, g.dy**2
    u1 = f.u1
    lap1 = (np.roll(u1, -1, 0) - 2 * u1 + np.roll(u1, 1, 0)) / dx2
    up = np.concatenate([u1[:, 1:], -u1[:, -1:]], axis=1)
    dn = np.concatenate([-u1[:, :1], u1[:, :-1]], axis=1)
    lap1 = lap1 + (up - 2 * u1 + dn) / dy2
    u2 = f.u2
    lap2 = np.zeros_like(u2)
    lap2[:, 1:-1] = (np.roll(u2, -1, 0) - 2 * u2 + np.roll(u2, 1, 0))[:, 1:-1] / dx2
    lap2[:, 1:-1] += (u2[:, 2:] - 2 * u2[:, 1:-1] + u2[:, :-2]) / dy2
    return VelocityField(g, lap1, lap2)


def dirichlet_form(f: VelocityField) -> float:
    """Discrete ``||grad u||^2`` paired with :func:`laplacian`: ``-<Lap u, u>``."""
    return -inner(laplacian(f), f)


def J_of(w, wall: str):
    """``n_perp . w`` on a wall of the 2D channel.

    ``n`` is the outer normal (``-e2`` at the bottom, ``+e2`` at the top) and
    ``n_perp`` its counter-clockwise rotation, so ``J[A e1] = A`` on the bottom
    wall and ``-A`` on the top wall. ``w`` is either the tangential component
    (a scalar or array) or a pair ``(w1, w2)``.
    """
    if wall == BOTTOM:
        n_perp = (1.0, 0.0)
    elif wall == TOP:
        n_perp = (-1.0, 0.0)
    else:
        raise ValueError(f"unknown wall {wall!r}")
    if isinstance(w, tuple):
        return n_perp[0] * np.asarray(w[0]) + n_perp[1] * np.asarray(w[1])
    return n_perp[0] * np.asarray(w)


# ---------------------------------------------------------------------------
# banded solves

def solve_tridiagonal(lower, diag, upper, rhs):
    """Thomas algorithm along the last axis, batched over the leading axes.

    ``lower[..., 0]`` and ``upper[..., -1]`` are ignored. No pivoting: the
    systems assembled here are diagonally dominant.
    """
    rhs = np.asarray(rhs)
    dtype = np.result_type(lower, diag, upper, rhs)
    shape = rhs.shape
    a = np.broadcast_to(lower, shape).astype(dtype, copy=False)
    b = np.broadcast_to(diag, shape).astype(dtype, copy=False)
    c = np.broadcast_to(upper, shape).astype(dtype, copy=False)
    n = shape[-1]
    cp = np.empty(shape, dtype=dtype)
    dp = np.empty(shape, dtype=dtype)
    cp[..., 0] = c[..., 0] / b[..., 0]
    dp[..., 0] = rhs[..., 0] / b[..., 0]
    for i in range(1, n):
        m = b[..., i] - a[..., i] * cp[..., i - 1]
        cp[..., i] = c[..., i] / m
        dp[..., i] = (rhs[..., i] - a[..., i] * dp[..., i - 1]) / m
    x = np.empty(shape, dtype=dtype)
    x[..., -1] = dp[..., -1]
    for i in range(n - 2, -1, -1):
        x[..., i] = dp[..., i] - cp[..., i] * x[..., i + 1]
    return x


def modified_wavenumbers(n: int, h: float) -> np.ndarray:
    """Eigenvalues of minus the periodic 3-point second difference for ``rfft`` modes."""
    m = np.arange(n // 2 + 1)
    return (2.0 * np.sin(np.pi * m / n) / h) ** 2


# ---------------------------------------------------------------------------
# space-time densities

@dataclass
class SpaceTimeDensity:
    """Non-negative density sampled at cell centres and discrete times.

    Integrals treat the samples as piecewise constant: in space on the grid
    cells, in time on cells whose edges are the midpoints between samples
    (half cells at both ends, i.e. the trapezoid rule for whole-span integrals).
    Outside the sampled time span and outside ``0 < y < H`` the density is
    zero; in ``x`` it is periodic.
    """

    times: np.ndarray
    values: np.ndarray
    W: float
    H: float
    _interp: RegularGridInterpolator | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 3 or self.values.shape[0] != self.times.size:
            raise ShapeError("density values must have shape (nt, nx, ny)")
        if self.times.size < 2 or np.any(np.diff(self.times) <= 0):
            raise ValueError("density sample times must be strictly increasing (at least 2)")

    @property
    def nx(self) -> int:
        return self.values.shape[1]

    @property
    def ny(self) -> int:
        return self.values.shape[2]

    @property
    def dx(self) -> float:
        return self.W / self.nx

    @property
    def dy(self) -> float:
        return self.H / self.ny

    @property
    def time_edges(self) -> np.ndarray:
        t = self.times
        return np.concatenate([[t[0]], 0.5 * (t[1:] + t[:-1]), [t[-1]]])

    @property
    def sample_spacing(self) -> float:
        return float(np.max(np.diff(self.times)))

    def _cumulative(self) -> RegularGridInterpolator:
        if self._interp is None:
            te = self.time_edges
            vol = np.diff(te)[:, None, None] * self.dx * self.dy
            F = np.zeros((self.times.size + 1, self.nx + 1, self.ny + 1))
            F[1:, 1:, 1:] = np.cumsum(np.cumsum(np.cumsum(self.values * vol, 0), 1), 2)
            xe = np.arange(self.nx + 1) * self.dx
            ye = np.arange(self.ny + 1) * self.dy
            xe[-1], ye[-1] = self.W, self.H  # clipped queries must stay inside the table
            self._interp = RegularGridInterpolator((te, xe, ye), F, method="linear")
        return self._interp

    def _F(self, t, x, y):
        interp = self._cumulative()
        te = self.time_edges
        t = np.clip(t, te[0], te[-1])
        y = np.clip(y, 0.0, self.H)
        q = np.floor(x / self.W)
        xr = np.clip(x - q * self.W, 0.0, self.W)
        t, xr, y, q = np.broadcast_arrays(t, xr, y, q)
        pts = np.stack([t.ravel(), xr.ravel(), y.ravel()], axis=-1)
        full = np.stack([t.ravel(), np.full(t.size, self.W), y.ravel()], axis=-1)
        val = interp(pts) + q.ravel() * interp(full)
        return val.reshape(t.shape)

    def box_integral(self, t1, t2, x1, x2, y1, y2):
        """Integral over ``(t1,t2) x (x1,x2) x (y1,y2)`` (vectorised over the bounds)."""
        total = 0.0
        for ta, st in ((t2, 1.0), (t1, -1.0)):
            for xa, sx in ((x2, 1.0), (x1, -1.0)):
                for ya, sy in ((y2, 1.0), (y1, -1.0)):
                    total = total + st * sx * sy * self._F(ta, xa, ya)
        return total

    def total(self) -> float:
        te = self.time_edges
        return float(np.sum(self.values * np.diff(te)[:, None, None]) * self.dx * self.dy)

    def scaled(self, time_factor: float, length_factor: float, value_factor: float) -> "SpaceTimeDensity":
        return SpaceTimeDensity(self.times * time_factor, self.values * value_factor,
                                self.W * length_factor, self.H * length_factor)


# ---------------------------------------------------------------------------
# serialization: flat little-endian float64 blob plus a JSON sidecar

def save_arrays(stem, arrays: dict, meta: dict | None = None) -> None:
    stem = Path(stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    entries = []
    offset = 0
    with open(stem.with_suffix(".bin"), "wb") as fh:
        for name, arr in arrays.items():
            a = np.ascontiguousarray(arr, dtype="<f8")
            fh.write(a.tobytes(order="C"))
            entries.append({"name": name, "shape": list(a.shape), "offset": offset})
            offset += a.size
    sidecar = {"format": "f8-le-rowmajor", "arrays": entries, "meta": meta or {}}
    stem.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True))


def load_arrays(stem) -> tuple[dict, dict]:
    stem = Path(stem)
    sidecar = json.loads(stem.with_suffix(".json").read_text())
    flat = np.fromfile(stem.with_suffix(".bin"), dtype="<f8")
    arrays = {}
    for e in sidecar["arrays"]:
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        arrays[e["name"]] = flat[e["offset"]:e["offset"] + n].reshape(e["shape"]).astype(float)
    return arrays, sidecar["meta"]


def _grid_meta(grid: Grid) -> dict:
    return {"nx": grid.nx, "ny": grid.ny, "W": grid.geometry.W, "H": grid.geometry.H, "d": grid.geometry.d}


def save_field(stem, f) -> None:
    if isinstance(f, VelocityField):
        save_arrays(stem, {"u1": f.u1, "u2": f.u2}, {"kind": "velocity", **_grid_meta(f.grid)})
    elif isinstance(f, ScalarField):
        save_arrays(stem, {"values": f.values}, {"kind": "scalar", **_grid_meta(f.grid)})
    else:
        raise TypeError(f"cannot serialize {type(f).__name__}")


def load_field(stem):
    arrays, meta = load_arrays(stem)
    grid = Grid(ChannelGeometry(meta["W"], meta["H"], meta.get("d", 2)), meta["nx"], meta["ny"])
    if meta["kind"] == "velocity":
        return VelocityField(grid, arrays["u1"], arrays["u2"])
    return ScalarField(grid, arrays["values"])
