"""The ground-state transform: relativized measure, kernel and generator checks.

Conjugating the Laplacian by the ground spherical function and shifting by the
spectral gap turns the heat kernel into

    htilde_t(x, y) = exp(rho^2 t) h_t(d(x, y)) / (phi0(|x|) phi0(|y|)),

a stochastic kernel with respect to the polynomially-growing measure
w(r) dr = phi0(r)^2 * delta(r) * area(S^{n-1}) dr.  In H3 this collapses to the
flat 3-d Gaussian against 4 pi r^2 dr.
"""

import math
from dataclasses import dataclass

import numpy as np

from .quad import gauss_legendre, composite_gauss_legendre
from . import hkernel
from .hkernel import SpacePoint

__all__ = [
    "RelativizedSpace",
    "relativized_kernel",
    "relativized_kernel_radial",
    "check_normalization",
    "normalization_report",
    "GeneratorApplication",
    "relativized_generator_apply",
    "semigroup_identity_check",
    "sup_norm_scaled",
]


class RelativizedSpace:
    """A hyperbolic model together with its ground-state-squared radial measure."""

    def __init__(self, model: hkernel.HyperbolicModel):
        self.model = model

    def __repr__(self):
        return f"RelativizedSpace({self.model!r})"

    def weight(self, r):
        """Radial density of the relativized measure, w(r) = phi0^2 delta area."""
        r = np.asarray(r, dtype=float)
        out = np.exp(2.0 * hkernel.log_phi0(self.model, r)
                     + hkernel.log_radial_measure_density(self.model, r))
        return np.where(r > 0, out, 0.0)

    def kernel_radial(self, t, r_max):
        return self.model.kernel_radial(t, r_max)


def relativized_kernel(space: RelativizedSpace, t: float, x: SpacePoint,
                       y: SpacePoint, method: str = "auto") -> float:
    """htilde_t(x, y); symmetric in x, y and invariant under joint rotations."""
    m = space.model
    d = hkernel.hyperbolic_distance(m, x, y)
    q = hkernel.heat_kernel_scaled(m, t, d, method=method)
    return float(q / (hkernel.phi0(m, x.r) * hkernel.phi0(m, y.r)))


def relativized_kernel_radial(space: RelativizedSpace, t: float, r,
                              method: str = "auto"):
    """htilde_t(o, r) pinned at the origin, vectorized over radii.

    Evaluated as a ratio of exponentially tilted quantities, which stays exact
    at radii where the bare kernel and ground state underflow.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    m = space.model
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if method == "auto":
        out = hkernel.tilted_heat_scaled(m, t, r) / hkernel.tilted_phi0(m, r)
    else:
        out = hkernel.heat_kernel_scaled(m, t, r, method=method) / m.phi0_fast(r)
    return out


def _default_r_max(t: float) -> float:
    return max(6.0 * math.sqrt(t) + 10.0, 12.0 * math.sqrt(t))


def check_normalization(space: RelativizedSpace, t: float,
                        r_max: float | None = None) -> float:
    """Total relativized mass of htilde_t, which should equal 1."""
    return normalization_report(space, t, r_max)[0]


def normalization_report(space: RelativizedSpace, t: float,
                         r_max: float | None = None):
    """(integral, r_max, tail_bound) of the htilde normalization quadrature.

    The truncation radius must be at least 6 sqrt(t) + 10; the recorded tail
    bound comes from a Gaussian comparison at the truncation radius.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    floor = 6.0 * math.sqrt(t) + 10.0
    if r_max is not None and r_max < floor:
        raise ValueError(f"r_max must be at least {floor}")
    R = max(r_max or 0.0, _default_r_max(t))
    edges = np.unique(np.array([0.0, math.sqrt(t), 4.0 * math.sqrt(t), R]))
    r, w = composite_gauss_legendre(edges, 320)
    integrand = relativized_kernel_radial(space, t, r) * space.weight(r)
    value = float(np.sum(w * integrand))
    edge_val = float(relativized_kernel_radial(space, t, np.array([R]))[0]
                     * space.weight(np.array([R]))[0])
    tail_bound = edge_val * (2.0 * t / R) * 2.0
    return value, R, tail_bound


def _d1(values, h):
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - values[:-2]) / (2.0 * h)
    out[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h)
    out[-1] = (3.0 * values[-1] - 4.0 * values[-2] + values[-3]) / (2.0 * h)
    return out


def _d2(values, h):
    out = np.empty_like(values)
    out[1:-1] = (values[2:] - 2.0 * values[1:-1] + values[:-2]) / h ** 2
    out[0] = (2.0 * values[0] - 5.0 * values[1] + 4.0 * values[2] - values[3]) / h ** 2
    out[-1] = (2.0 * values[-1] - 5.0 * values[-2] + 4.0 * values[-3] - values[-4]) / h ** 2
    return out


@dataclass
class GeneratorApplication:
    grid: np.ndarray
    path_a: np.ndarray
    path_b: np.ndarray
    discrepancy: float


def relativized_generator_apply(space: RelativizedSpace, f, grid) -> GeneratorApplication:
    """Apply the relativized radial generator along two finite-difference routes.

    Path A conjugates: (1/phi0) (Lap_radial + rho^2) (phi0 f).  Path B uses the
    drift form f'' + [(n-1) coth r + 2 (log phi0)'] f'.  Their discrepancy is a
    second-order-in-spacing consistency measure.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size < 66:
        raise ValueError("generator check needs at least 64 interior nodes")
    h = grid[1] - grid[0]
    if not np.allclose(np.diff(grid), h, rtol=1e-10):
        raise ValueError("generator check requires a uniform grid")
    if grid[0] <= 0:
        raise ValueError("grid must avoid the coordinate singularity at r = 0")
    fv = f(grid) if callable(f) else np.asarray(f, dtype=float)
    m = space.model
    ph = hkernel.phi0(m, grid)
    coth = 1.0 / np.tanh(grid)
    drift0 = (m.n - 1) * coth

    g = ph * fv
    path_a = (_d2(g, h) + drift0 * _d1(g, h) + m.rho_sq * g) / ph
    path_b = _d2(fv, h) + (drift0 + 2.0 * hkernel.dlog_phi0(m, grid)) * _d1(fv, h)
    disc = float(np.max(np.abs(path_a[1:-1] - path_b[1:-1])))
    return GeneratorApplication(grid, path_a, path_b, disc)


def _radial_profile_of(f):
    """Radial evaluator r -> f(r) from an InitialData-like object or callable."""
    evaluator = getattr(f, "evaluator", None)
    if evaluator is not None:
        if getattr(f, "symmetry", "radial") != "radial":
            raise ValueError("semigroup identity check requires radial data")
        xi = getattr(f, "support_radius", np.inf)
        return (lambda r: evaluator(r, np.zeros_like(r), np.zeros_like(r))), xi
    return f, np.inf


def semigroup_identity_check(space: RelativizedSpace, t: float, f,
                             support_radius: float | None = None) -> float:
    """|LHS - RHS| of the conjugated-semigroup identity applied at the origin.

    LHS integrates htilde against the relativized measure; RHS routes through
    the plain kernel with the ground-state weights written out.  The identity
    is algebraic, so the residual measures only arithmetic rearrangement.
    """
    if t <= 0:
        raise ValueError("t must be positive")
    fr, xi = _radial_profile_of(f)
    if support_radius is not None:
        xi = support_radius
    if not np.isfinite(xi):
        xi = 12.0 * math.sqrt(t) + 20.0
    m = space.model
    r, w = gauss_legendre(0.0, xi, 400)
    fv = fr(r)
    lhs = float(np.sum(w * relativized_kernel_radial(space, t, r) * fv
                       * space.weight(r)))
    q = hkernel.heat_kernel_scaled(m, t, r)
    ph = m.phi0_fast(r)
    rhs = float(np.sum(w * q * ph * fv * hkernel.radial_measure_density(m, r))
                / hkernel.phi0(m, 0.0))
    return abs(lhs - rhs)


def sup_norm_scaled(space: RelativizedSpace, t: float) -> float:
    """t^((nu+n)/4) * sup_r htilde_t(o, r), located on a two-stage grid."""
    if t <= 0:
        raise ValueError("t must be positive")
    m = space.model
    power = 0.25 * (m.nu + m.n)
    hi = 8.0 * math.sqrt(t) + 10.0
    grid = np.linspace(0.0, hi, 1500)
    vals = relativized_kernel_radial(space, t, grid)
    k = int(np.argmax(vals))
    lo2 = grid[max(k - 1, 0)]
    hi2 = grid[min(k + 1, grid.size - 1)]
    fine = np.linspace(lo2, hi2, 300)
    best = max(float(vals[k]), float(np.max(relativized_kernel_radial(space, t, fine))))
    return t ** power * best
