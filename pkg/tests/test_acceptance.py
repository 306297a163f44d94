"""Acceptance suite: one test per criterion, each printing a measured summary.

Run as `pytest tests/test_acceptance.py -v -s` to see one line per criterion
alongside the pass/fail verdicts.
"""

import math

import numpy as np
import pytest

from brownloop import doob, evolve as ev, hkernel, loopmc
from brownloop.doob import (
    check_normalization,
    relativized_generator_apply,
    relativized_kernel_radial,
    semigroup_identity_check,
    sup_norm_scaled,
)
from brownloop.hkernel import SpacePoint, busemann_rho, heat_kernel_scaled, phi0_product_check, ratio_gap
from brownloop.rootsys import EpsilonSchedule

INV_4PI_32 = (4.0 * math.pi) ** -1.5


def _report(name, detail):
    print(f"\n[acceptance] {name}: {detail}")


def test_c01_exact_gaussian_collapse(space3):
    worst = 0.0
    for t in (0.5, 1.0, 10.0, 100.0):
        r = np.linspace(0.0, 20.0, 50)
        vals = relativized_kernel_radial(space3, t, r)
        resid = np.abs(vals * (4 * math.pi * t) ** 1.5 * np.exp(r * r / (4 * t)) - 1.0)
        worst = max(worst, float(resid.max()))
    _report("C1 exact Gaussian collapse", f"max residual {worst:.3e} (< 1e-12)")
    assert worst < 1e-12


def test_c02_inversion_formula_consistency(h3):
    worst = 0.0
    for t in np.geomspace(0.5, 50.0, 10):
        r = np.linspace(0.0, 4.0 * math.sqrt(t), 20)
        spectral = heat_kernel_scaled(h3, t, r, method="spectral")
        closed = heat_kernel_scaled(h3, t, r, method="closed")
        worst = max(worst, float(np.max(np.abs(spectral / closed - 1.0))))
    _report("C2 inversion-formula consistency", f"max rel err {worst:.3e} (< 1e-8)")
    assert worst < 1e-8


def test_c03_normalization(space3, space2):
    worst = 0.0
    for space in (space3, space2):
        for t in (1.0, 10.0, 100.0):
            worst = max(worst, abs(check_normalization(space, t) - 1.0))
    _report("C3 normalization", f"max |mass - 1| {worst:.3e} (< 1e-6)")
    assert worst < 1e-6


def test_c04_sup_norm_law(space3, space2):
    worst = 0.0
    for t in (10.0, 100.0, 1000.0):
        worst = max(worst, abs(sup_norm_scaled(space3, t) - INV_4PI_32))
    vals = np.array([sup_norm_scaled(space2, t) for t in np.geomspace(10.0, 1000.0, 7)])
    band_center = math.sqrt(vals.max() * vals.min())
    ratio = vals.max() / vals.min()
    slope = np.polyfit(np.log(np.geomspace(10.0, 1000.0, 7)), np.log(vals), 1)[0]
    _report("C4 sup-norm law",
            f"H3 dev {worst:.2e} (< 1e-8); H2 band ratio {ratio:.2f} "
            f"(within [B/2, 2B]), drift slope {slope:+.3f}")
    assert worst < 1e-8
    assert np.all(vals >= band_center / 2.0) and np.all(vals <= 2.0 * band_center)


def test_c05_l1_convergence_offcenter(space3):
    f = ev.offcenter_bump(space3)
    ts = np.array([10.0, 100.0, 1000.0])
    vals = np.array([ev.l1_distance(space3, f, t) for t in ts])
    slope = np.polyfit(np.log(ts), np.log(vals), 1)[0]
    _report("C5 L1 convergence (off-center)",
            f"values {np.array2string(vals, precision=4)}, slope {slope:+.3f}, "
            f"final {vals[-1]:.4f} (< 0.05)")
    assert vals[0] > vals[1] > vals[2]
    assert vals[2] < 0.05
    assert -0.8 <= slope <= -0.2


def test_c06_linf_convergence(space3):
    ts = np.array([10.0, 100.0, 1000.0])
    rad = np.array([ev.linf_scaled_distance(space3, ev.radial_bump(space3), t)
                    for t in ts])
    off = np.array([ev.linf_scaled_distance(space3, ev.offcenter_bump(space3), t)
                    for t in ts])
    _report("C6 scaled sup-norm convergence",
            f"radial {np.array2string(rad, precision=2)} (final < 1e-2); "
            f"off-center {np.array2string(off, precision=2)} (final < 0.05)")
    assert rad[0] > rad[1] > rad[2] and rad[2] < 1e-2
    assert off[0] > off[1] > off[2] and off[2] < 0.05


def test_c07_ratio_gap_decay(h3):
    xi = 1.0
    ts = np.array([1e2, 1e3, 1e4])
    sups = []
    for t in ts:
        sup = 0.0
        for frac in (0.25, 0.5, 0.75, 1.0):
            g = SpacePoint(frac * math.sqrt(t))
            for ry in (0.5 * xi, xi):
                for ang in np.linspace(0.0, math.pi, 5):
                    sup = max(sup, abs(ratio_gap(h3, t, g, SpacePoint(ry, ang))))
        sups.append(sup)
    sups = np.array(sups)
    slope = np.polyfit(np.log(ts), np.log(sups), 1)[0]
    _report("C7 ratio-gap decay",
            f"sups {np.array2string(sups, precision=4)}, slope {slope:+.3f} "
            f"(in [-0.65, -0.35])")
    assert sups[0] > sups[1] > sups[2]
    assert -0.65 <= slope <= -0.35


def test_c08_mass_constancy(space3, space2):
    rng = np.random.default_rng(2026)
    worst = 0.0
    for space in (space3, space2):
        f = ev.radial_bump(space)
        const = ev.mass_constant_radial(space, f)
        for _ in range(20):
            g = SpacePoint(float(5.0 * rng.random()),
                           float(math.pi * rng.random()),
                           float(2.0 * math.pi * rng.random()))
            worst = max(worst, abs(ev.mass_function(space, f, g) - const))
    _report("C8 mass constancy", f"max |M(g) - M| {worst:.3e} (< 1e-6)")
    assert worst < 1e-6


def test_c09_concentration(space3):
    eps = EpsilonSchedule()
    far = ev.concentration_outside_omega(space3, 1e4, eps)
    near = ev.concentration_outside_omega(space3, 1e2, eps)
    sup_tail = ev.linf_outside_R(space3, 1e4, eps)
    closed = INV_4PI_32 * math.exp(-0.25 * math.sqrt(1e4))
    _report("C9 concentration",
            f"omega-mass {far:.3e} < 0.1 and < {near:.3e}; "
            f"linf tail {sup_tail:.6e} vs closed {closed:.6e}")
    assert far < 0.1 and far < near
    assert sup_tail == pytest.approx(closed, rel=1e-8)


def test_c10_monte_carlo_bessel3(h3, space3):
    cfg = loopmc.MCConfig(n_paths=100000, dt=1e-3, t_end=1.0, seed=20260809,
                          worker_count=4)
    sample = loopmc.simulate_loop(h3, cfg)
    mean_sq = sample.mean_square()
    ks = loopmc.ks_distance(sample, lambda x: loopmc.loop_marginal_cdf(space3, 1.0, x))
    _report("C10 Monte Carlo Bessel(3)",
            f"mean r^2 = {mean_sq:.4f} (|. - 6| < 0.05), KS = {ks:.5f} (< 0.01)")
    assert abs(mean_sq - 6.0) < 0.05
    assert ks < 0.01


def test_c11_bridge_to_loop(h3):
    gaps = loopmc.bridge_to_loop_gap(h3, [10.0, 50.0, 250.0], 1.0)
    values = np.array([g for _, g in gaps])
    _report("C11 bridge-to-loop limit",
            f"sup gaps {np.array2string(values, precision=5)} (final < 0.05)")
    assert values[0] > values[1] > values[2]
    assert values[2] < 0.05


def test_c12_transform_identity_suite(space3, space2, h3, h2):
    grid_c = np.linspace(0.5, 6.0, 513)
    grid_f = np.linspace(0.5, 6.0, 1025)
    fn = lambda r: np.exp(-(r - 2.0) ** 2)
    ratio = relativized_generator_apply(space3, fn, grid_c).discrepancy \
        / relativized_generator_apply(space3, fn, grid_f).discrepancy
    semi = max(semigroup_identity_check(space3, 1.0, ev.radial_bump(space3)),
               semigroup_identity_check(space2, 1.0, ev.radial_bump(space2)))
    prod = max(abs(phi0_product_check(h3, SpacePoint(1.0), SpacePoint(2.0))),
               abs(phi0_product_check(h2, SpacePoint(1.0), SpacePoint(1.0))))
    rng = np.random.default_rng(99)
    violations = 0
    for _ in range(1000):
        model = h3 if rng.random() < 0.5 else h2
        p = SpacePoint(float(8.0 * rng.random()), float(math.pi * rng.random()),
                       float(2.0 * math.pi * rng.random()))
        if busemann_rho(model, p) > model.rho * p.r + 1e-12:
            violations += 1
    _report("C12 transform identity suite",
            f"generator ratio {ratio:.3f} (in [3.5, 4.5]); semigroup {semi:.2e} "
            f"(< 1e-8); product {prod:.2e} (< 1e-8); horocycle violations {violations}")
    assert 3.5 <= ratio <= 4.5
    assert semi < 1e-8
    assert prod < 1e-8
    assert violations == 0
