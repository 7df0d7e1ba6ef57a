"""Sine-series solution of the heat equation for shear layers, and the bounds built on it.

A shear flow ``v(t, y) e1`` with no-slip walls at ``y = 0, H`` solves the
Navier-Stokes equations exactly (zero pressure) when ``v_t = nu v_yy``, so
the series

    v(t, y) = sum_n b_n sin(k_n y) exp(-nu k_n^2 t),   k_n = n pi / H

is an exact reference trajectory for the channel solver.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.fft import dst
from scipy.special import erfc


class InvalidProfileError(ValueError):
    pass


class UndefinedBoundError(ValueError):
    pass


@dataclass(frozen=True)
class ShearProfile:
    """Sine coefficients ``b[n-1]`` of an initial shear on (0, H)."""

    b: np.ndarray
    H: float
    nu: float

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float)
        if b.ndim != 1 or b.size < 1:
            raise InvalidProfileError("need at least one sine coefficient")
        if not np.all(np.isfinite(b)):
            raise InvalidProfileError("non-finite sine coefficients")
        object.__setattr__(self, "b", b)

    @property
    def N(self) -> int:
        return self.b.size

    @property
    def wavenumbers(self) -> np.ndarray:
        return np.arange(1, self.N + 1) * np.pi / self.H

    def l2_norm(self) -> float:
        """``||v0||_{L2(0,H)}`` by Parseval."""
        return math.sqrt(0.5 * self.H * float(np.sum(self.b**2)))

    def scaled(self, c: float) -> "ShearProfile":
        return ShearProfile(c * self.b, self.H, self.nu)


def sine_coefficients(samples, H: float, nu: float, N: int | None = None) -> ShearProfile:
    """Sine coefficients of a profile sampled at the ``ny`` cell centres of (0, H)."""
    samples = np.asarray(samples, dtype=float)
    ny = samples.size
    N = ny if N is None else N
    if N < 1 or N > ny:
        raise InvalidProfileError(f"mode cap {N} must lie in [1, {ny}]")
    b = dst(samples, type=2) / ny
    return ShearProfile(b[:N], H, nu)


def ramp_profile(A: float, delta: float, H: float, nu: float, N: int) -> ShearProfile:
    """Closed-form coefficients of ``A min(y/delta, 1, (H-y)/delta)``.

    ``delta = 0`` gives the discontinuous constant profile, ``b_n = 4A/(n pi)`` for odd n.
    """
    if not 0 <= delta <= H / 2:
        raise InvalidProfileError("ramp width must lie in [0, H/2]")
    n = np.arange(1, N + 1)
    k = n * np.pi / H
    odd = (n % 2 == 1).astype(float)
    if delta == 0:
        b = 4.0 * A / (n * np.pi) * odd
    else:
        b = 4.0 * A * np.sin(k * delta) / (H * k**2 * delta) * odd
    return ShearProfile(b, H, nu)


def _modes(profile: ShearProfile, t: float):
    if t < 0:
        raise ValueError("t must be non-negative")
    k = profile.wavenumbers
    return k, profile.b * np.exp(-profile.nu * k**2 * t)


def evaluate(profile: ShearProfile, t: float, y) -> np.ndarray:
    k, c = _modes(profile, t)
    y = np.asarray(y, dtype=float)
    return np.sin(np.multiply.outer(y, k)) @ c


def gradient_is_reliable(profile: ShearProfile, t: float) -> bool:
    """False at very early times, where truncation (Gibbs) dominates wall gradients."""
    return t >= 1e-6 * profile.H**2 / profile.nu


def evaluate_gradient(profile: ShearProfile, t: float, y) -> np.ndarray:
    k, c = _modes(profile, t)
    y = np.asarray(y, dtype=float)
    return np.cos(np.multiply.outer(y, k)) @ (k * c)


def max_gradient(profile: ShearProfile, t: float, samples: int | None = None) -> float:
    """``sup_y |dv/dy|`` over a grid resolving the highest retained mode eight times."""
    samples = samples or 8 * profile.N + 1
    y = np.linspace(0.0, profile.H, max(samples, 65))
    out = 0.0
    for chunk in np.array_split(y, max(1, y.size * profile.N // 4_000_000)):
        out = max(out, float(np.abs(evaluate_gradient(profile, t, chunk)).max()))
    return out


def lipschitz_decay_check(profile: ShearProfile, t: float) -> dict:
    """Both sides of ``||dv/dy(t)||_inf <= 1/2 (nu t)^(-3/4) ||v0||_{L2}``."""
    if t <= 0:
        raise UndefinedBoundError("the decay bound is undefined at t <= 0")
    lhs = max_gradient(profile, t)
    rhs = 0.5 * (profile.nu * t) ** -0.75 * profile.l2_norm()
    return {"lhs": lhs, "rhs": rhs, "holds": lhs <= rhs}


def series_bound_check(z: float) -> dict:
    """``sum_{n>=1} n^2 exp(-n^2 z)`` against ``z^(-3/2)``.

    Summation stops once ``n^2 z > 80``; ``tail`` is the integral bound on the
    remainder, ``int_N^inf x^2 exp(-z x^2) dx``.
    """
    if z <= 0:
        raise ValueError(f"z must be positive, got {z}")
    N = math.ceil(math.sqrt(80.0 / z)) + 10
    n = np.arange(1, N + 1, dtype=float)
    total = math.fsum(n**2 * np.exp(-(n**2) * z))
    tail = N * math.exp(-z * N * N) / (2 * z) + math.sqrt(math.pi) / (4 * z**1.5) * erfc(N * math.sqrt(z))
    bound = z**-1.5
    return {"sum": total, "bound": bound, "tail": tail, "holds": total < bound}


@dataclass(frozen=True)
class CutoffTime:
    t_star: float
    t_nu: float  # T / 4^K
    K: int
    degenerate: bool  # T < t_star / 4: no snapping possible, t_nu = T


def t_star(E: float, boundary_measure: float, nu: float, T: float | None = None) -> CutoffTime:
    """``(log 2 / 4)^4 E^-2 |dOmega|^2 nu^3`` and the snapped time ``T / 4^K`` in ``[t_star/4, t_star]``."""
    for name, v in (("E", E), ("boundary_measure", boundary_measure), ("nu", nu)):
        if not v > 0:
            raise ValueError(f"{name} must be positive, got {v}")
    ts = (math.log(2) / 4) ** 4 * E**-2 * boundary_measure**2 * nu**3
    if T is None:
        return CutoffTime(ts, ts, 0, False)
    if T < ts / 4:
        return CutoffTime(ts, T, 0, True)
    K = max(0, math.ceil(math.log(T / ts, 4)))
    while T / 4**K > ts:
        K += 1
    while K > 0 and T / 4 ** (K - 1) <= ts:
        K -= 1
    return CutoffTime(ts, T / 4**K, K, False)


def l1inf_integral(E: float, boundary_measure: float, nu: float, t_nu: float) -> float:
    """``int_0^{t_nu} (nu t)^(-3/4) (E/|dOmega|)^(1/2) dt``, which is at most log 2 for t_nu <= t_star."""
    return 4.0 * nu**-0.75 * t_nu**0.25 * math.sqrt(E / boundary_measure)


def separation_sharp_step(A: float, W: float, nu: float, t) -> np.ndarray:
    """``||v(t) - A||^2`` over a channel of width W for the unramped constant profile.

    Both walls are treated as independent half-space layers:
    ``v - A = -A erfc(y / (2 sqrt(nu t)))`` at each wall, whose squared norm is
    ``2 (2 - sqrt 2) / sqrt(pi) * A^2 sqrt(nu t)`` per unit wall length.
    Accurate while ``sqrt(nu t) << H``.
    """
    t = np.asarray(t, dtype=float)
    return 4.0 * (2.0 - math.sqrt(2.0)) / math.sqrt(math.pi) * A**2 * W * np.sqrt(nu * t)


def separation_series(profile: ShearProfile, A: float, W: float, t, samples: int = 4096) -> np.ndarray:
    """``W * int_0^H (v(t,y) - A)^2 dy`` from the series, by midpoint quadrature."""
    y = (np.arange(samples) + 0.5) * profile.H / samples
    t = np.atleast_1d(np.asarray(t, dtype=float))
    out = np.array([np.sum((evaluate(profile, s, y) - A) ** 2) * profile.H / samples for s in t])
    return W * out


def dump_decay_curve(path, profile: ShearProfile, times) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "max_gradient", "bound"])
        for t in times:
            r = lipschitz_decay_check(profile, float(t))
            w.writerow([repr(float(t)), repr(r["lhs"]), repr(r["rhs"])])
