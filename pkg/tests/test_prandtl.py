import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from layersep.prandtl import (
    InvalidProfileError,
    ShearProfile,
    UndefinedBoundError,
    dump_decay_curve,
    evaluate,
    evaluate_gradient,
    l1inf_integral,
    lipschitz_decay_check,
    ramp_profile,
    separation_series,
    separation_sharp_step,
    series_bound_check,
    sine_coefficients,
    t_star,
)


def test_single_mode_decays_exactly():
    p = ShearProfile(np.array([1.0]), 1.0, 0.1)
    y = np.linspace(0, 1, 7)
    np.testing.assert_allclose(evaluate(p, 0.5, y), np.sin(np.pi * y) * np.exp(-0.1 * np.pi**2 * 0.5))


def test_parseval_norm():
    p = ShearProfile(np.array([1.0, 0.5]), 2.0, 1.0)
    y = (np.arange(20000) + 0.5) * 2.0 / 20000
    direct = math.sqrt(np.sum(evaluate(p, 0.0, y) ** 2) * 2.0 / 20000)
    assert p.l2_norm() == pytest.approx(direct, rel=1e-8)


def test_sine_coefficients_recover_modes():
    ny = 64
    y = (np.arange(ny) + 0.5) / ny
    samples = 2 * np.sin(np.pi * y) - 0.5 * np.sin(3 * np.pi * y)
    p = sine_coefficients(samples, 1.0, 0.1)
    np.testing.assert_allclose(p.b[:4], [2.0, 0.0, -0.5, 0.0], atol=1e-12)
    with pytest.raises(InvalidProfileError):
        sine_coefficients(samples, 1.0, 0.1, N=65)


def test_ramp_coefficients_match_transform():
    ny = 4096
    y = (np.arange(ny) + 0.5) / ny
    delta = 0.1
    samples = np.minimum(np.minimum(y / delta, 1.0), (1 - y) / delta)
    num = sine_coefficients(samples, 1.0, 1.0, N=9).b
    exact = ramp_profile(1.0, delta, 1.0, 1.0, 9).b
    np.testing.assert_allclose(num, exact, atol=1e-6)


def test_step_coefficients():
    b = ramp_profile(2.0, 0.0, 1.0, 1.0, 4).b
    np.testing.assert_allclose(b, [8 / np.pi, 0, 8 / (3 * np.pi), 0])
    with pytest.raises(InvalidProfileError):
        ramp_profile(1.0, 0.6, 1.0, 1.0, 4)


def test_profile_rejects_nonfinite():
    with pytest.raises(InvalidProfileError):
        ShearProfile(np.array([np.nan]), 1.0, 1.0)


def test_gradient_matches_finite_difference():
    p = ramp_profile(1.0, 0.2, 1.0, 0.1, 50)
    y = np.linspace(0.1, 0.9, 5)
    h = 1e-6
    fd = (evaluate(p, 0.3, y + h) - evaluate(p, 0.3, y - h)) / (2 * h)
    np.testing.assert_allclose(evaluate_gradient(p, 0.3, y), fd, atol=1e-6)


def test_series_bound_spot_value():
    r = series_bound_check(1.0)
    assert r["sum"] == pytest.approx(0.44225, abs=1e-4)
    assert r["holds"]
    with pytest.raises(ValueError):
        series_bound_check(0.0)


@given(st.floats(1e-3, 1e3))
@settings(max_examples=60, deadline=None)
def test_series_bound_holds(z):
    r = series_bound_check(z)
    assert r["sum"] < r["bound"]
    assert r["tail"] <= 1e-15


def test_decay_bound_undefined_at_zero():
    with pytest.raises(UndefinedBoundError):
        lipschitz_decay_check(ramp_profile(1.0, 0.1, 1.0, 1.0, 8), 0.0)


@given(st.integers(0, 2**31 - 1), st.floats(1e-3, 10.0))
@settings(max_examples=30, deadline=None)
def test_decay_bound_random_profiles(seed, t):
    rng = np.random.default_rng(seed)
    p = ShearProfile(rng.standard_normal(rng.integers(1, 40)), 1.0, 0.05)
    assert lipschitz_decay_check(p, t)["holds"]


def test_t_star_snapping():
    c = t_star(1.0, 2.0, 0.01, T=1.0)
    assert c.t_star == pytest.approx((math.log(2) / 4) ** 4 * 4 * 1e-6)
    assert c.t_star / 4 <= c.t_nu <= c.t_star
    assert c.t_nu == pytest.approx(1.0 / 4**c.K)
    assert not c.degenerate
    d = t_star(1.0, 2.0, 0.01, T=1e-12)
    assert d.degenerate and d.t_nu == 1e-12
    with pytest.raises(ValueError):
        t_star(0.0, 2.0, 0.01)


def test_l1inf_integral_below_log2_at_cutoff():
    c = t_star(3.0, 2.0, 0.01)
    assert l1inf_integral(3.0, 2.0, 0.01, c.t_nu) == pytest.approx(math.log(2))


def test_series_matches_sharp_law():
    p = ramp_profile(1.0, 0.0, 1.0, 1e-3, 4000)
    for t in (0.25, 0.5, 1.0):
        ratio = separation_series(p, 1.0, 1.0, t, samples=8192)[0] / separation_sharp_step(1.0, 1.0, 1e-3, t)
        assert abs(ratio - 1) < 1e-4


def test_ramp_offset_shrinks_with_width():
    law = separation_sharp_step(1.0, 1.0, 1e-3, 0.5)
    gaps = [separation_series(ramp_profile(1.0, d, 1.0, 1e-3, 4000), 1.0, 1.0, 0.5, samples=8192)[0] / law - 1
            for d in (1 / 64, 1 / 256)]
    assert 0 < gaps[1] < gaps[0] / 8


def test_decay_curve_csv(tmp_path):
    dump_decay_curve(tmp_path / "d.csv", ramp_profile(1.0, 0.1, 1.0, 0.1, 16), [0.1, 1.0])
    lines = (tmp_path / "d.csv").read_text().splitlines()
    assert lines[0] == "t,max_gradient,bound"
    assert len(lines) == 3
