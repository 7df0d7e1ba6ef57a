"""Acceptance suite: one PASS/FAIL line per criterion, tolerances pinned.

Run with ``pytest tests/test_acceptance.py -v``; the lines are written to the
terminal even when output capture is on.
"""

import math
import time

import numpy as np
import pytest

from layersep.czdecomp import (
    base_scales,
    check_partition,
    decompose,
    initial_partition,
    maximal_weak_constant,
    witness_check,
)
from layersep.fields import ChannelGeometry, Grid, SpaceTimeDensity
from layersep.harness import (
    ExperimentConfig,
    ShearStats,
    bounds_for_sweep,
    decompose_case,
    fit_scaling,
    load_case,
    reduce_to_constant_shear,
    run_all,
    split_boundary_term,
    constant_shear_terms,
    general_shear_terms,
)
from layersep.nschannel import SolverConfig, make_initial_shear, run, shear_profile
from layersep.prandtl import (
    ShearProfile,
    evaluate,
    lipschitz_decay_check,
    ramp_profile,
    separation_sharp_step,
    series_bound_check,
)
from layersep.subsolution import (
    SubsolutionParams,
    constant_grid,
    deviation_rate,
    energy_rate,
    residual_check,
)


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
        return ok

    return emit


# ---------------------------------------------------------------------------
# shared sweeps

def _sweep(root, **raw):
    base = {"schema_version": 1, "geometry": {"W": 1.0, "H": 1.0}, "T": 1.0, "output_dir": str(root)}
    cfg = ExperimentConfig.from_dict({**base, **raw})
    run_all(cfg)
    return cfg


@pytest.fixture(scope="module")
def scaling_sweep(tmp_path_factory):
    """Constant shear, three strengths, three resolutions, weak perturbation."""
    root = tmp_path_factory.mktemp("scaling")
    cfg = _sweep(root, shear={"kind": "constant", "A": [0.5, 1.0, 2.0]}, nu=[0.01],
                 perturbation={"amplitude": 0.05, "band": [2, 8], "seed": 11},
                 resolutions=[[16, 32], [32, 64], [64, 128]], ramp_width=0.0625)
    return cfg, root


@pytest.fixture(scope="module")
def reynolds_sweep(tmp_path_factory):
    """Perturbed runs at Re = 100, 300, 1000 on two grids."""
    root = tmp_path_factory.mktemp("reynolds")
    cfg = _sweep(root, shear={"kind": "constant", "A": [1.0]}, nu=[1e-2, 1 / 300, 1e-3],
                 perturbation={"amplitude": 0.1, "band": [2, 8], "seed": 7},
                 resolutions=[[64, 64], [128, 128]], ramp_width=0.03125)
    return cfg, root


# cube family for the boundary statistic: generation 1 is the finest one
# resolved (4 samples per axis) on both grids at every Re of the sweep
STAT_SAMPLES = 4
STAT_GENERATION = 1


@pytest.fixture(scope="module")
def reynolds_decompositions(reynolds_sweep):
    cfg, root = reynolds_sweep
    return {c["index"]: decompose_case(root, c["index"], min_samples=STAT_SAMPLES, on_unresolved="keep",
                                       max_generation=STAT_GENERATION)
            for c in cfg.cases()}


# ---------------------------------------------------------------------------

def test_criterion_1_solver_matches_series(report):
    nu, delta = 1e-2, 1 / 16
    oracle = ramp_profile(1.0, delta, 1.0, nu, 20000)
    errors, runtimes = [], []
    for ny in (64, 128, 256):
        g = Grid(ChannelGeometry(1.0, 1.0), 4, ny)
        init = make_initial_shear(g, 1.0, "constant", ramp_cells=ny // 16)
        t0 = time.perf_counter()
        res = run(init, SolverConfig(nu=nu, t_end=1.0, store_density=False),
                  background=shear_profile("constant", 1.0, 1.0))
        runtimes.append(time.perf_counter() - t0)
        exact = evaluate(oracle, 1.0, g.y_centers)
        u = res.final.u1[0]
        errors.append(float(np.linalg.norm(u - exact) / np.linalg.norm(exact)))
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    ok = errors[-1] <= 1e-3 and orders.min() >= 1.8 and max(runtimes) <= 120
    assert report(1, ok, f"rel L2 errors {[f'{e:.2e}' for e in errors]}, orders {np.round(orders, 3).tolist()}, "
                          f"max runtime {max(runtimes):.1f}s")


def test_criterion_2_energy_inequality(report, scaling_sweep, reynolds_sweep):
    worst = -math.inf
    runs = 0
    for cfg, root in (scaling_sweep, reynolds_sweep):
        for c in cfg.cases():
            m = load_case(root, c["index"])["manifest"]
            worst = max(worst, m["energy_residual_max"] / m["kinetic0"])
            runs += 1
    ok = worst <= 1e-6
    assert report(2, ok, f"max residual / kinetic(0) over {runs} runs: {worst:.3e} (limit 1e-6)")


def test_criterion_3_series_bound(report):
    t0 = time.perf_counter()
    results = [series_bound_check(z) for z in np.logspace(-3, 3, 61)]
    elapsed = time.perf_counter() - t0
    spot = series_bound_check(1.0)["sum"]
    ok = (all(r["holds"] for r in results) and max(r["tail"] for r in results) <= 1e-15
          and abs(spot - 0.44225) <= 1e-4 and elapsed < 1.0)
    assert report(3, ok, f"61/61 hold: {all(r['holds'] for r in results)}, max tail "
                          f"{max(r['tail'] for r in results):.1e}, spot {spot:.6f}, {elapsed * 1e3:.0f} ms")


def test_criterion_4_gradient_decay(report):
    rng = np.random.default_rng(2024)
    violations = checks = 0
    for _ in range(100):
        N = int(rng.integers(1, 65))
        b = rng.standard_normal(N) / np.arange(1, N + 1) ** rng.uniform(0, 2)
        p = ShearProfile(b, float(rng.uniform(0.5, 2.0)), float(10 ** rng.uniform(-3, 0)))
        for t in np.sort(10 ** rng.uniform(-4, 1, 20)):
            checks += 1
            violations += not lipschitz_decay_check(p, float(t))["holds"]
    ok = violations == 0 and checks == 2000
    assert report(4, ok, f"{violations} violations in {checks} checks")


def test_criterion_5_decomposition_invariants(report):
    rng = np.random.default_rng(5)
    failures = []
    for n in range(200):
        T, W, H = rng.uniform(0.25, 4.0), rng.uniform(0.5, 3.0), rng.uniform(0.5, 3.0)
        sc = base_scales(T, W, H)
        nt = max(int(rng.integers(9, 33)), math.ceil(2 * T / sc.L0) + 1)
        nx = max(int(rng.integers(8, 25)), math.ceil(W / sc.W0))
        ny = max(int(rng.integers(8, 25)), math.ceil(H / sc.H0))
        v = rng.random((nt, nx, ny)) * 10 ** rng.uniform(-2, 3)
        v[rng.random(v.shape) < rng.uniform(0, 0.99)] = 0.0
        d = SpaceTimeDensity(np.linspace(0, T, nt), v, W, H)
        dec = decompose(d, 10 ** rng.uniform(-4, 2), min_samples=2, on_unresolved="keep")
        chk = check_partition(dec)
        if not (chk["measure_ok"] and chk["disjoint"] and chk["bracket_ok"] and witness_check(dec)):
            failures.append(n)
        zero = SpaceTimeDensity(d.times, np.zeros_like(v), W, H)
        dz = decompose(zero, min_samples=2)
        init = initial_partition(T, W, H, (zero.sample_spacing, zero.dx, zero.dy), 2)
        if [c.sort_key() for c in dz.cubes] != [c.sort_key() for c in init.cubes]:
            failures.append(n)
    ok = not failures
    assert report(5, ok, f"200 random densities, failures: {failures}")


def test_criterion_6_boundary_statistic(report, reynolds_sweep, reynolds_decompositions):
    cfg, root = reynolds_sweep
    ratio = {}
    for c in cfg.cases():
        ratio[(c["nu"], c["nx"])] = reynolds_decompositions[c["index"]]["statistic"]["ratio"]
    fine, coarse = cfg.resolutions[-1][0], cfg.resolutions[-2][0]
    values = np.array(list(ratio.values()))
    finite = bool(np.all(np.isfinite(values)) and np.all(values > 0))
    at_fine = [ratio[(nu, fine)] for nu in cfg.nu]
    spread = max(at_fine) / min(at_fine)
    change = max(abs(ratio[(nu, fine)] / ratio[(nu, coarse)] - 1) for nu in cfg.nu)
    ok = finite and spread <= 3 and change <= 0.25
    table = ", ".join(f"Re={1 / nu:.0f}: {ratio[(nu, coarse)]:.4f}/{ratio[(nu, fine)]:.4f}" for nu in cfg.nu)
    assert report(6, ok, f"ratio coarse/fine {table}; spread x{spread:.2f} (limit 3), "
                          f"resolution change {change:.1%} (limit 25%)")


def _blob_density(rng, n):
    k = rng.integers(1, 4)
    c = rng.uniform(0.2, 0.8, (k, 3))
    s = rng.uniform(0.08, 0.2, k)
    m = rng.uniform(0.5, 2.0, k)
    t = np.linspace(0, 1, n + 1)
    x = (np.arange(n) + 0.5) / n
    T, X, Y = np.meshgrid(t, x, x, indexing="ij")
    f = sum(mi * np.exp(-((T - ci[0]) ** 2 + (X - ci[1]) ** 2 + (Y - ci[2]) ** 2) / (2 * si**2))
            for ci, si, mi in zip(c, s, m))
    return SpaceTimeDensity(t, f, 1.0, 1.0)


def test_criterion_7_maximal_weak_constant(report):
    fitted = []
    for n in (16, 32):
        consts = [maximal_weak_constant(_blob_density(np.random.default_rng(seed), n))["constant"]
                  for seed in range(50)]
        fitted.append(max(consts))
    change = abs(fitted[1] / fitted[0] - 1)
    ok = change <= 0.2
    assert report(7, ok, f"C_d at 16^3 / 32^3 samples: {fitted[0]:.4f} / {fitted[1]:.4f}, change {change:.1%}")


def test_criterion_8_subsolution(report):
    p = SubsolutionParams(0.5, 0.5)
    t0 = time.perf_counter()
    chk = residual_check(p, n_t=100, n_x=100)
    er = energy_rate(p)
    dr = deviation_rate(p)
    elapsed = time.perf_counter() - t0
    worst = {"transport": chk["transport_residual"], "eig": chk["min_eigenvalue"],
             "energy": abs(er["measured"] - er["formula"]), "deviation": abs(dr["measured"] - dr["formula"])}
    for lam in (0.2, 0.8):
        for eps in (0.1, 0.9):
            q = SubsolutionParams(lam, eps)
            c = residual_check(q, n_t=100, n_x=100)
            worst["transport"] = max(worst["transport"], c["transport_residual"])
            worst["eig"] = min(worst["eig"], c["min_eigenvalue"])
            e, d = energy_rate(q), deviation_rate(q)
            worst["energy"] = max(worst["energy"], abs(e["measured"] - e["formula"]))
            worst["deviation"] = max(worst["deviation"], abs(d["measured"] - d["formula"]))
    C = constant_grid(np.linspace(0.05, 0.95, 10), np.linspace(0.05, 1.0, 10))
    ok = (worst["transport"] <= 1e-8 and worst["eig"] >= -1e-12 and worst["energy"] <= 1e-6
          and worst["deviation"] <= 1e-6 and bool(np.all((C > 0) & (C < 2))) and chk["samples"] >= 10**4
          and elapsed < 1.0)
    assert report(8, ok, f"transport {worst['transport']:.1e}, min eig {worst['eig']:.1e}, "
                          f"energy rate err {worst['energy']:.1e}, deviation err {worst['deviation']:.1e}, "
                          f"C in [{C.min():.3f}, {C.max():.3f}], single-suite {elapsed * 1e3:.0f} ms")


def test_criterion_9_separation_scaling(report, scaling_sweep):
    synth = fit_scaling([{"A": A, "T": T, "separation": 2 * A**3 * T} for A in (0.5, 1, 2) for T in (0.5, 1, 2)])
    exact = abs(synth["exponent_A"] - 3) < 1e-9 and abs(synth["exponent_T"] - 1) < 1e-9
    worst = 0.0
    for A in (0.5, 1.0, 2.0):
        g = Grid(ChannelGeometry(1.0, 1.0), 4, 128)
        res = run(make_initial_shear(g, A, "constant", 2), SolverConfig(nu=1e-3, t_end=1.0, store_density=False),
                  background=shear_profile("constant", A, 1.0))
        for t in (0.25, 0.5, 1.0):
            measured = np.interp(t, res.ledger.t, res.separation)
            worst = max(worst, abs(measured / separation_sharp_step(A, 1.0, 1e-3, t) - 1))
    cfg, root = scaling_sweep
    b = bounds_for_sweep(root)
    C = b["fit"]["C"]
    ok = (exact and worst <= 0.10 and math.isfinite(C) and b["stability"]["stable"] and b["fit"]["holds"]
          and all(c["combined"]["holds"] for c in b["cases"]))
    assert report(9, ok, f"synthetic exponents ({synth['exponent_A']:.6f}, {synth['exponent_T']:.6f}); "
                          f"heat-layer law max deviation {worst:.1%}; fitted C {C:.4f}, "
                          f"C by resolution {np.round(b['C_by_resolution'], 4).tolist()}; "
                          f"trajectory exponents A {b['trajectory_exponents']['A']:.3f}, "
                          f"T {b['trajectory_exponents']['T']:.3f}")


def test_criterion_10_term_accounting(report, reynolds_sweep, reynolds_decompositions):
    cfg, root = reynolds_sweep
    worst_split = 0.0
    for c in cfg.cases():
        rec = load_case(root, c["index"])["record"]
        tl = reynolds_decompositions[c["index"]]["tilde"]
        s = split_boundary_term(tl, c["A"], cfg.W, cfg.H, c["nu"], rec.t_nu, cfg.T, float(rec.dissipation[-1]))
        worst_split = max(worst_split, s["sum_error"])
    worst_red = 0.0
    for A in (0.5, 1.0, 2.0):
        for nu in (1e-2, 1e-3):
            stats = ShearStats.of("constant", A, ChannelGeometry(1.0, 1.0))
            red = reduce_to_constant_shear(general_shear_terms(stats, 1.0, 0.1, nu), stats)
            const = constant_shear_terms(A, 1.0, 0.1, nu)
            worst_red = max([worst_red] + [abs(red[k] / const[k] - 1) for k in ("initial", "log", "cubic")])
            worst_red = max(worst_red, red["absorbed"]["viscous_shear"], abs(red["absorbed"]["envelope"] - 1))
    ok = worst_split <= 1e-10 and worst_red <= 1e-12
    assert report(10, ok, f"split sum relative error {worst_split:.1e}; "
                           f"reduction max term mismatch {worst_red:.1e}")
