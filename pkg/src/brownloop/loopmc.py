"""Monte Carlo for the loop's radial part, with analytic-law comparisons.

The radial diffusion dr = drift(r) dt + sqrt(2) dB follows the convention
du/dt = Lap u (variance 2t per flat coordinate).  In H3 the drift is exactly
2/r, the Bessel(3) generator, so the terminal law has closed Maxwell form;
bridge laws come from products of heat kernels pinned at the origin.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erf

from . import hkernel
from .doob import RelativizedSpace, relativized_kernel_radial

__all__ = [
    "MCConfig",
    "EmpiricalSample",
    "loop_drift",
    "simulate_loop",
    "simulate_radial_bm",
    "loop_marginal_density",
    "loop_marginal_cdf",
    "bridge_radial_density",
    "bridge_to_loop_gap",
    "ks_distance",
]


@dataclass(frozen=True)
class MCConfig:
    """Path count, step size, horizon, start radius, seed and substream count.

    Results are bit-for-bit reproducible given (seed, worker_count): each
    worker owns a counter-based substream keyed by (seed, worker index) and a
    fixed contiguous block of paths.
    """

    n_paths: int
    dt: float = 1e-3
    t_end: float = 1.0
    r0: float = 0.0
    seed: int = 12345
    worker_count: int = 1

    def __post_init__(self):
        if self.n_paths < 1000:
            raise ValueError("n_paths must be at least 1000")
        if not 0.0 < self.dt <= 1e-2:
            raise ValueError("dt must lie in (0, 1e-2]")
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.r0 < 0:
            raise ValueError("start radius must be nonnegative")
        if self.worker_count < 1:
            raise ValueError("worker_count must be positive")

    def blocks(self):
        base, extra = divmod(self.n_paths, self.worker_count)
        return [base + (1 if i < extra else 0) for i in range(self.worker_count)]


@dataclass
class EmpiricalSample:
    """Terminal radii of a simulation run plus bookkeeping."""

    radii: np.ndarray
    n_reflected: int
    config: MCConfig
    mean_drift_probe: float | None = None

    @property
    def sorted_radii(self):
        return np.sort(self.radii)

    def mean_square(self) -> float:
        return float(np.mean(self.radii ** 2))

    def ecdf(self, x):
        return np.searchsorted(self.sorted_radii, x, side="right") / self.radii.size

    def histogram(self, bins=60):
        return np.histogram(self.radii, bins=bins, density=True)


def loop_drift(model: hkernel.HyperbolicModel, r):
    """Radial drift of the loop: (n-1) coth r + 2 (log phi0)'(r).

    Equals 2/r exactly in H3 and tends to 0 at infinity in every model; the
    plain radial Brownian motion keeps the ballistic drift 2 rho instead.
    """
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("loop drift has a pole at r = 0; use the reflection step")
    if model.n == 3:
        return 2.0 / r
    return 1.0 / np.tanh(r) + 2.0 * hkernel.dlog_phi0(model, r)


def _simulate(model, cfg: MCConfig, drift_fn, probe_threshold=None):
    n_steps = max(1, int(round(cfg.t_end / cfg.dt)))
    step_noise = math.sqrt(2.0 * cfg.dt)
    floor = math.sqrt(2.0 * cfg.dt)
    pieces = []
    n_reflected = 0
    probe_sum = 0.0
    probe_count = 0
    for widx, block in enumerate(cfg.blocks()):
        if block == 0:
            continue
        rng = np.random.Generator(np.random.Philox(
            key=np.array([cfg.seed % (1 << 64), widx], dtype=np.uint64)))
        r = np.full(block, float(cfg.r0))
        for _ in range(n_steps):
            safe = np.maximum(r, floor)
            incr = drift_fn(safe) * cfg.dt + step_noise * rng.standard_normal(block)
            if probe_threshold is not None:
                mask = r > probe_threshold
                probe_sum += float(np.sum(incr[mask]))
                probe_count += int(np.count_nonzero(mask))
            r = r + incr
            neg = r < 0
            n_reflected += int(np.count_nonzero(neg))
            r = np.abs(r)
        pieces.append(r)
    radii = np.concatenate(pieces)
    probe = probe_sum / (probe_count * cfg.dt) if probe_count else None
    return EmpiricalSample(radii, n_reflected, cfg, probe)


def simulate_loop(model: hkernel.HyperbolicModel, cfg: MCConfig,
                  probe_threshold=None) -> EmpiricalSample:
    """Euler-Maruyama paths of the loop radius, reflected near the origin."""
    return _simulate(model, cfg, lambda r: loop_drift(model, r), probe_threshold)


def simulate_radial_bm(model: hkernel.HyperbolicModel, cfg: MCConfig,
                       probe_threshold=None) -> EmpiricalSample:
    """Comparator process: the radial part of plain Brownian motion."""
    return _simulate(model, cfg, lambda r: (model.n - 1) / np.tanh(r),
                     probe_threshold)


def loop_marginal_density(space: RelativizedSpace, t: float, r):
    """Radial law of the loop at time t from the origin: htilde_t(o, r) w(r)."""
    r = np.asarray(r, dtype=float)
    return relativized_kernel_radial(space, t, r) * space.weight(r)


def loop_marginal_cdf(space: RelativizedSpace, t: float, r):
    """CDF of the loop's radial law; closed form in H3, quadrature in H2."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if space.model.n == 3:
        x = r / (2.0 * math.sqrt(t))
        out = erf(x) - 2.0 * x * np.exp(-x ** 2) / math.sqrt(math.pi)
        return np.clip(out, 0.0, 1.0)
    hi = max(float(r.max(initial=0.0)), 12.0 * math.sqrt(t) + 10.0)
    grid = np.linspace(0.0, hi, 4000)
    dens = loop_marginal_density(space, t, grid)
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1])
                                           * np.diff(grid))])
    return np.clip(np.interp(r, grid, cum / cum[-1]), 0.0, 1.0)


def bridge_radial_density(model: hkernel.HyperbolicModel, L: float, t: float, r):
    """Radial law at time t of the bridge of length L pinned at the origin.

    h_t(r) h_{L-t}(r) / h_L(0) against the radial Riemannian density; the
    spectral-gap factors cancel between numerator and denominator.
    """
    if not 0.0 < t < L:
        raise ValueError("bridge time must satisfy 0 < t < L")
    r = np.asarray(r, dtype=float)
    qa = hkernel.heat_kernel_scaled(model, t, r)
    qb = hkernel.heat_kernel_scaled(model, L - t, r)
    q0 = hkernel.heat_kernel_scaled(model, L, 0.0)
    return qa * qb / q0 * hkernel.radial_measure_density(model, r)


def bridge_to_loop_gap(model: hkernel.HyperbolicModel, L_grid, t: float):
    """[(L, sup-gap)] between the bridge radial law and the loop marginal."""
    space = RelativizedSpace(model)
    r = np.linspace(0.0, 5.0 + 4.0 * math.sqrt(t), 900)
    loop = loop_marginal_density(space, t, r)
    out = []
    for L in L_grid:
        gap = float(np.max(np.abs(bridge_radial_density(model, L, t, r) - loop)))
        out.append((float(L), gap))
    return out


def ks_distance(sample, cdf) -> float:
    """Kolmogorov-Smirnov distance between an empirical sample and a CDF."""
    radii = sample.sorted_radii if isinstance(sample, EmpiricalSample) \
        else np.sort(np.asarray(sample, dtype=float))
    n = radii.size
    if n == 0:
        raise ValueError("empty sample")
    F = np.asarray(cdf(radii), dtype=float)
    up = np.arange(1, n + 1) / n - F
    down = F - np.arange(0, n) / n
    return float(max(up.max(), down.max()))
