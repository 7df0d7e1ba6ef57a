"""Closed-form Euler subsolution in which a vortex sheet at the walls spreads
into a linear layer, and the rates it realizes.

On the channel ``0 < x2 < 1`` (extended to ``[-1, 2]``) the data are

    alpha: piecewise linear through (-1,0), (0,0), (lam t,1), (1-lam t,1), (1,0), (2,0)
    gamma: -lam/2 (1 - alpha^2) for x2 <= 1/2,  +lam/2 (1 - alpha^2) otherwise
    beta = q = alpha^2 / 2
    e    = 1/2 - eps/2 (1 - lam)(1 - alpha^2)

with averaged velocity ``(alpha, 0)`` and averaged stress ``((beta, gamma), (gamma, -beta))``.
The relaxed equations reduce to ``d_t alpha + d_x2 gamma = 0`` and the
constraint matrix ``((e - alpha^2 + beta, gamma), (gamma, e - beta))`` being
positive semi-definite. The energy ``int_0^1 e`` decreases at
``r = 2/3 eps lam (1 - lam)`` while the momentum leaves through the walls at
rate ``lam``, so ``1/2 ||v(t) - v(0)||^2`` grows at ``lam - r``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class HorizonError(ValueError):
    pass


@dataclass(frozen=True)
class SubsolutionParams:
    lam: float
    eps: float
    A: float = 1.0

    def __post_init__(self):
        if not 0 < self.lam < 1:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam}")
        # eps = 1 is admitted: the constraint matrix is then only semi-definite off the plateau
        if not 0 < self.eps <= 1:
            raise ValueError(f"eps must lie in (0, 1], got {self.eps}")
        if not self.A > 0:
            raise ValueError(f"A must be positive, got {self.A}")

    @property
    def horizon(self) -> float:
        """End of validity ``1/(2 lam)`` in unscaled time; the ramps meet there."""
        return 1.0 / (2.0 * self.lam)

    @property
    def energy_rate(self) -> float:
        return 2.0 / 3.0 * self.eps * self.lam * (1.0 - self.lam)


def _check_time(t, lam):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0) or np.any(t >= 1.0 / (2.0 * lam)):
        raise HorizonError(f"t must lie in [0, {1.0 / (2.0 * lam)}) for lambda={lam}")
    return t


def alpha(t, x2, lam: float) -> np.ndarray:
    t = _check_time(t, lam)
    t, x2 = np.broadcast_arrays(t, np.asarray(x2, dtype=float))
    a = lam * t
    with np.errstate(divide="ignore", invalid="ignore"):
        left = np.where(a > 0, x2 / np.where(a > 0, a, 1.0), 1.0)
        right = np.where(a > 0, (1.0 - x2) / np.where(a > 0, a, 1.0), 1.0)
    out = np.clip(np.minimum(left, right), 0.0, 1.0)
    inside = (x2 >= 0.0) & (x2 <= 1.0)
    # at t = 0 the ramps collapse onto the walls: alpha is the indicator of [0, 1]
    out = np.where(inside, out, 0.0)
    return out if out.ndim else float(out)


def gamma(t, x2, lam: float) -> np.ndarray:
    al = np.asarray(alpha(t, x2, lam))
    x2 = np.broadcast_to(np.asarray(x2, dtype=float), al.shape)
    sign = np.where(x2 <= 0.5, -1.0, 1.0)
    out = sign * 0.5 * lam * (1.0 - al**2)
    return out if out.ndim else float(out)


def energy_density(t, x2, lam: float, eps: float) -> np.ndarray:
    al = np.asarray(alpha(t, x2, lam))
    out = 0.5 - 0.5 * eps * (1.0 - lam) * (1.0 - al**2)
    return out if out.ndim else float(out)


def constraint_matrix(t, x2, lam: float, eps: float) -> np.ndarray:
    """``((e - alpha^2 + beta, gamma), (gamma, e - beta))`` with trailing shape (..., 2, 2)."""
    al = np.asarray(alpha(t, x2, lam))
    g = np.asarray(gamma(t, x2, lam))
    e = np.asarray(energy_density(t, x2, lam, eps))
    beta = 0.5 * al**2
    M = np.empty(al.shape + (2, 2))
    M[..., 0, 0] = e - al**2 + beta
    M[..., 1, 1] = e - beta
    M[..., 0, 1] = M[..., 1, 0] = g
    return M


def min_eigenvalue_closed_form(t, x2, lam: float, eps: float):
    al = np.asarray(alpha(t, x2, lam))
    return 0.5 * (1.0 - al**2) * (1.0 - lam) * (1.0 - eps)


def _kinks(t, lam):
    return np.array([-1.0, 0.0, lam * t, 1.0 - lam * t, 1.0, 2.0])


def residual_check(params: SubsolutionParams, n_t: int = 100, n_x: int = 100,
                   kink_margin: float = 1e-6, t_min_fraction: float = 1e-3) -> dict:
    """Transport residual (five-point differences, away from kinks) and the
    smallest constraint-matrix eigenvalue over an ``n_t x n_x`` sample of
    ``(t_min, horizon) x [-1, 2]``.
    """
    lam, eps = params.lam, params.eps
    T = params.horizon
    ts = np.linspace(t_min_fraction * T, T * (1 - 1e-3), n_t)
    xs = np.linspace(-1.0, 2.0, n_x)
    hx = 1e-5
    worst = 0.0
    used = 0
    for t in ts:
        ht = 1e-4 * t
        kink = _kinks(t, lam)
        dist = np.min(np.abs(xs[:, None] - kink[None, :]), axis=1)
        ok = dist > kink_margin + 2 * lam * ht + 2 * hx
        x = xs[ok]
        if x.size == 0:
            continue
        da = (-alpha(t + 2 * ht, x, lam) + 8 * alpha(t + ht, x, lam)
              - 8 * alpha(t - ht, x, lam) + alpha(t - 2 * ht, x, lam)) / (12 * ht)
        dg = (-gamma(t, x + 2 * hx, lam) + 8 * gamma(t, x + hx, lam)
              - 8 * gamma(t, x - hx, lam) + gamma(t, x - 2 * hx, lam)) / (12 * hx)
        worst = max(worst, float(np.max(np.abs(da + dg))))
        used += x.size
    T_, X_ = np.meshgrid(np.linspace(0.0, T * (1 - 1e-9), n_t), xs, indexing="ij")
    eig = np.linalg.eigvalsh(constraint_matrix(T_, X_, lam, eps))
    return {"transport_residual": worst, "points": used, "min_eigenvalue": float(eig.min()),
            "samples": int(T_.size)}


def _integral_01(f, t, lam, n: int = 64) -> float:
    """``int_0^1 f(t, x) dx`` by Simpson's rule on each smooth piece (exact for quadratics)."""
    knots = np.unique(np.clip([0.0, lam * t, 0.5, 1.0 - lam * t, 1.0], 0.0, 1.0))
    total = 0.0
    for a, b in zip(knots[:-1], knots[1:]):
        if b <= a:
            continue
        x = np.linspace(a, b, 2 * n + 1)
        y = np.asarray(f(t, x))
        h = (b - a) / (2 * n)
        total += h / 3 * (y[0] + y[-1] + 4 * y[1:-1:2].sum() + 2 * y[2:-1:2].sum())
    return float(total)


def energy_integral(params: SubsolutionParams, t: float) -> float:
    return _integral_01(lambda s, x: energy_density(s, x, params.lam, params.eps), t, params.lam)


def momentum_integral(params: SubsolutionParams, t: float) -> float:
    return _integral_01(lambda s, x: alpha(s, x, params.lam), t, params.lam)


def energy_rate(params: SubsolutionParams, t: float | None = None) -> dict:
    """Closed-form ``r`` and ``-d/dt int_0^1 e`` by quadrature and central differencing."""
    T = params.horizon
    t = 0.5 * T if t is None else t
    h = 1e-3 * min(t, T - t)
    measured = -(energy_integral(params, t + h) - energy_integral(params, t - h)) / (2 * h)
    return {"formula": params.energy_rate, "measured": measured}


def deviation_rate(params: SubsolutionParams, t: float | None = None) -> dict:
    """``d/dt 1/2 ||v(t) - v(0)||^2 = lam - r``.

    Uses ``1/2 |v|^2 = e`` and ``int v . v(0) = int_0^1 alpha``, whose rate is
    the wall flux ``gamma(t,0) - gamma(t,1) = -lam``.
    """
    T = params.horizon
    t = 0.5 * T if t is None else t
    lam = params.lam
    flux = float(gamma(t, 1.0, lam) - gamma(t, 0.0, lam))
    h = 1e-3 * min(t, T - t)
    momentum = -(momentum_integral(params, t + h) - momentum_integral(params, t - h)) / (2 * h)
    r = energy_rate(params, t)
    return {
        "formula": lam - params.energy_rate,
        "measured": momentum - r["measured"],
        "wall_flux": flux,
        "momentum_rate": momentum,
        "profile": (lam - params.energy_rate) * t,
    }


def energy_linearity_residual(params: SubsolutionParams, n: int = 50) -> float:
    """Max deviation of ``int_0^1 e(t)`` from its least-squares line on (0, horizon)."""
    ts = np.linspace(0.0, params.horizon * (1 - 1e-6), n)
    E = np.array([energy_integral(params, t) for t in ts])
    coef = np.polyfit(ts, E, 1)
    return float(np.max(np.abs(np.polyval(coef, ts) - E)))


def rescale_profile(params: SubsolutionParams, t) -> dict:
    """Layer separation of ``v*(t, x) = A v(A t, x)``: ``1/2 ||v* - A e1||^2 = (lam - r) A^3 t``.

    ``C = 2 (lam - r)`` is the constant in ``||v*(t) - A e1||^2 = C A^3 t``.
    """
    A = params.A
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0) or np.any(t >= params.horizon / A):
        raise HorizonError(f"t must lie in (0, {params.horizon / A}) for A={A}")
    rate = params.lam - params.energy_rate
    C = 2.0 * rate
    if not 0 < C < 2:
        raise ArithmeticError(f"separation constant {C} outside (0, 2)")
    sep = rate * A**3 * t
    return {"separation": sep if sep.ndim else float(sep), "C": C}


def horizon_gap(params: SubsolutionParams) -> float:
    """Plateau length ``1 - 2 lam t`` at the horizon (zero up to rounding)."""
    return 1.0 - 2.0 * params.lam * params.horizon


def curve(params: SubsolutionParams, n: int = 51):
    """Rows ``(t, int_0^1 e, 1/2 ||v* - A e1||^2)`` on the rescaled horizon, in rescaled time."""
    A = params.A
    rows = []
    for k in range(1, n):
        t = params.horizon / A * k / n
        rows.append((t, A**2 * energy_integral(params, A * t), rescale_profile(params, t)["separation"]))
    return rows


def exact_energy_integral(params: SubsolutionParams, t: float) -> float:
    return 0.5 - params.energy_rate * t


def constant_grid(lams, epss) -> np.ndarray:
    """``C = 2 (lam - r)`` over a grid of parameters."""
    out = np.empty((len(lams), len(epss)))
    for i, lam in enumerate(lams):
        for j, eps in enumerate(epss):
            out[i, j] = rescale_profile(SubsolutionParams(lam, eps), 0.5 * SubsolutionParams(lam, eps).horizon)["C"]
    return out


