"""Spherical functions, Plancherel densities and heat kernels on H2 and H3.

The H3 kernel has an elementary closed form; H2 quantities are evaluated by
quadrature of their classical integral representations.  All heat-kernel code
funnels through the spectral-gap-compensated kernel

    q_t(r) = exp(rho^2 t) * h_t(r),

which stays in floating range for arbitrarily large times; the raw kernel and
the relativized kernel are both cheap functions of q_t.
"""

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.interpolate import CubicSpline

from .quad import gauss_legendre
from . import rootsys

__all__ = [
    "QuadratureSpec",
    "SpacePoint",
    "KernelProfile",
    "HyperbolicModel",
    "make_model",
    "spherical_phi",
    "phi0",
    "log_phi0",
    "dlog_phi0",
    "plancherel_density",
    "heat_kernel",
    "heat_kernel_scaled",
    "heat_kernel_envelope",
    "hyperbolic_distance",
    "distance_polar",
    "busemann_rho",
    "ratio_gap",
    "phi0_product_check",
    "radial_measure_density",
    "log_radial_measure_density",
]


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts, truncation rules and tolerance for the numerical integrals.

    lambda_cut is in units of 1/sqrt(t): spectral integrals are truncated at
    (lambda_cut + 2)/sqrt(t), where the Gaussian factor exp(-t lambda^2) has
    decayed below 1e-27 of its peak.
    """

    node_count: int = 192
    lambda_cut: float = 8.0
    r_max: float = 80.0
    rel_tol: float = 1e-8

    def __post_init__(self):
        if self.node_count < 16:
            raise ValueError("node_count must be at least 16")
        if self.lambda_cut <= 0 or self.r_max <= 0:
            raise ValueError("truncation parameters must be positive")
        if not 0.0 < self.rel_tol <= 1e-4:
            raise ValueError("rel_tol must lie in (0, 1e-4]")

    def lambda_max(self, t: float) -> float:
        return (self.lambda_cut + 2.0) / math.sqrt(t)


@dataclass(frozen=True)
class SpacePoint:
    """Geodesic polar coordinates around the origin.

    In H3, theta in [0, pi] is the colatitude from the reference (north) axis
    and phi the longitude.  In H2, theta is the full circle angle and phi is
    unused.
    """

    r: float
    theta: float = 0.0
    phi: float = 0.0

    def __post_init__(self):
        if self.r < 0:
            raise ValueError("radius must be nonnegative")


def _r_over_sinh(r):
    """r / sinh(r), stable for all r >= 0 (equals 1 at r = 0)."""
    r = np.asarray(r, dtype=float)
    num = 2.0 * r * np.exp(-r)
    den = -np.expm1(-2.0 * r)
    with np.errstate(invalid="ignore"):
        out = np.where(r > 0, num / np.where(den > 0, den, 1.0), 1.0)
    return out


def _log_sinh(x):
    """log(sinh(x)) for x > 0 without overflow."""
    x = np.asarray(x, dtype=float)
    small = x < 20.0
    direct = np.log(np.sinh(np.where(small, x, 1.0)))
    large = x - math.log(2.0) + np.log1p(-np.exp(-2.0 * np.maximum(x, 1.0)))
    return np.where(small, direct, large)


def _arccosh1p(v):
    """arccosh(1 + v) for v >= 0, accurate near v = 0."""
    v = np.asarray(v, dtype=float)
    return np.log1p(v + np.sqrt(v * (v + 2.0)))


class KernelProfile:
    """A positive radial profile at fixed time, sampled on a grid.

    Interpolation happens on the logarithm of the values, which keeps relative
    accuracy uniform down the Gaussian tail.
    """

    def __init__(self, t: float, r_grid, values):
        values = np.asarray(values, dtype=float)
        r_grid = np.asarray(r_grid, dtype=float)
        if t <= 0:
            raise ValueError("t must be positive")
        if np.any(values <= 0):
            raise ValueError("kernel profile values must be positive")
        self.t = t
        self.r_grid = r_grid
        self.values = values
        self._spline = CubicSpline(r_grid, np.log(values))

    @property
    def r_max(self) -> float:
        return float(self.r_grid[-1])

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0) or np.any(r > self.r_max * (1 + 1e-12)):
            raise ValueError(f"profile evaluated outside [0, {self.r_max}]")
        return np.exp(self._spline(np.minimum(r, self.r_max)))


class HyperbolicModel:
    """Curvature -1 model of H^n (n = 2 or 3) with calibrated normalizations."""

    def __init__(self, dimension: int, quadrature: QuadratureSpec | None = None):
        if dimension not in (2, 3):
            raise ValueError("kernel numerics support dimensions 2 and 3 only")
        self.n = dimension
        self.rho = 0.5 * (dimension - 1)
        self.rho_sq = self.rho ** 2
        self.quadrature = quadrature or QuadratureSpec()
        self.datum = rootsys.hyperbolic_datum(dimension)
        self.nu = self.datum.nu
        self.sphere_area = 2.0 * math.pi if dimension == 2 else 4.0 * math.pi
        self.normalization_constant = self._calibrate_normalization()
        self._phi0_spline = None
        self._phi0_env = None
        self._heat_env = None
        self._profiles: dict = {}

    def __repr__(self):
        return f"HyperbolicModel(n={self.n})"

    # -- calibration -------------------------------------------------------

    def _calibrate_normalization(self) -> float:
        """Scalar making the spectral kernel a probability density at t = 1."""
        r, w = gauss_legendre(1e-9, 17.0, 400)
        q = _heat_scaled_spectral(self, 1.0, r, constant=1.0)
        mass = float(np.sum(w * q * math.exp(-self.rho_sq)
                            * self.sphere_area * np.sinh(r) ** (self.n - 1)))
        return 1.0 / mass

    @property
    def phi0_envelope_constants(self):
        if self._phi0_env is None:
            grid = np.concatenate([[0.0], np.geomspace(1e-3, 30.0, 2000)])
            exact = phi0(self, grid)
            shape = np.array([rootsys.phi0_envelope_shape(self.datum, (g,)) for g in grid])
            ratio = exact / shape
            self._phi0_env = (float(ratio.min()) * (1 - 1e-4),
                              float(ratio.max()) * (1 + 1e-4))
        return self._phi0_env

    @property
    def heat_envelope_constants(self):
        if self._heat_env is None:
            lo, hi = np.inf, -np.inf
            for t in np.geomspace(1.0, 100.0, 21):
                r = np.linspace(0.0, 4.0 * math.sqrt(t), 160)
                ratio = heat_kernel_scaled(self, t, r) / _heat_envelope_shape_scaled(self, t, r)
                lo = min(lo, float(ratio.min()))
                hi = max(hi, float(ratio.max()))
            self._heat_env = (lo * (1 - 1e-3), hi * (1 + 1e-3))
        return self._heat_env

    # -- fast radial evaluators ---------------------------------------------

    def phi0_fast(self, r):
        """Ground spherical function, spline-backed in H2 for bulk evaluation."""
        if self.n == 3:
            return _r_over_sinh(r)
        if self._phi0_spline is None:
            grid = np.concatenate([np.linspace(0.0, 5.0, 1200, endpoint=False),
                                   np.linspace(5.0, 120.0, 4600)])
            self._phi0_spline = CubicSpline(grid, np.log(phi0(self, grid)))
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.empty_like(r)
        inside = r <= 120.0
        out[inside] = np.exp(self._phi0_spline(r[inside]))
        if np.any(~inside):
            out[~inside] = phi0(self, r[~inside])
        return out

    def kernel_radial(self, t: float, r_max: float):
        """Vectorized q_t(r) on [0, r_max]: closed form in H3, cached profile in H2.

        H2 profile values deep in the Gaussian tail sit below the quadrature
        noise floor and are clamped to it, keeping the profile positive.
        """
        if self.n == 3:
            return lambda r: heat_kernel_scaled(self, t, r)
        r_cap = float(np.ceil(r_max + 1.0))
        key = (float(t), r_cap)
        if key not in self._profiles:
            n = int(np.clip(r_cap * 50, 1200, 12000))
            grid = np.linspace(0.0, r_cap, n)
            vals = heat_kernel_scaled(self, t, grid)
            vals = np.maximum(vals, float(np.max(vals)) * 1e-18)
            self._profiles[key] = KernelProfile(t, grid, vals)
        return self._profiles[key]


@lru_cache(maxsize=8)
def _default_model(dimension: int) -> HyperbolicModel:
    return HyperbolicModel(dimension)


def make_model(name, quadrature: QuadratureSpec | None = None) -> HyperbolicModel:
    """Model factory: accepts 'h2'/'h3' or a dimension."""
    if isinstance(name, str):
        key = name.lower()
        if key not in ("h2", "h3"):
            raise ValueError(f"unsupported kernel model {name!r}")
        dimension = int(key[1])
    else:
        dimension = int(name)
    if quadrature is None:
        return _default_model(dimension)
    return HyperbolicModel(dimension, quadrature)


# ---------------------------------------------------------------------------
# spherical functions
# ---------------------------------------------------------------------------

def _h2_phi_matrix(model, lams, r, n_u: int | None = None, tilt: float = 0.0):
    """phi_lambda(r) for H2 as a (len(r), len(lams)) matrix, times exp(tilt*r).

    Uses the cone-function integral with the endpoint substitution s = r(1-x^2),
    which removes the inverse-square-root singularity and is stable for all r.
    With tilt = rho the output grows only polynomially, so ratios of tilted
    quantities stay in floating range at radii where the bare values underflow.
    """
    lams = np.atleast_1d(np.asarray(lams, dtype=float))
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if n_u is None:
        phase = float(np.max(np.abs(lams), initial=0.0) * np.max(r, initial=0.0))
        n_u = int(np.clip(2.0 * phase + 96, 128, 1024))
    x, w = gauss_legendre(0.0, 1.0, n_u)
    rc = r[:, None]
    a = 0.5 * rc * x ** 2            # u^2 / 2
    b = rc - a                       # r - u^2 / 2
    log_den = 0.5 * (math.log(2.0) + _log_sinh(np.maximum(a, 1e-300))
                     + _log_sinh(np.maximum(b, 1e-300)))
    base = (math.sqrt(2.0) / math.pi) * 2.0 * rc * x * np.exp(tilt * rc - log_den) * w
    s = rc * (1.0 - x ** 2)
    out = np.empty((r.size, lams.size))
    for j, lam in enumerate(lams):
        out[:, j] = np.sum(base * np.cos(lam * s), axis=1)
    tiny = r < 1e-12
    if np.any(tiny):
        out[tiny, :] = 1.0
    return out


def tilted_phi0(model, r):
    """exp(rho r) * phi0(r): polynomially growing, safe at all radii."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if model.n == 3:
        den = -np.expm1(-2.0 * r)
        with np.errstate(invalid="ignore"):
            return np.where(r > 0, 2.0 * r / np.where(den > 0, den, 1.0), 1.0)
    return _h2_phi_matrix(model, [0.0], r, tilt=model.rho)[:, 0]


def tilted_heat_scaled(model, t, r):
    """exp(rho r) * q_t(r): shares the tilt of tilted_phi0, so their ratio is htilde."""
    r = np.atleast_1d(np.asarray(r, dtype=float))
    if model.n == 3:
        return (4.0 * math.pi * t) ** -1.5 * tilted_phi0(model, r) \
            * np.exp(-r ** 2 / (4.0 * t))
    return _heat_scaled_spectral(model, t, r, tilt=model.rho)


def spherical_phi(model: HyperbolicModel, lam: float, r):
    """Spherical function phi_lambda at radius r; symmetric in lam -> -lam.

    H3 uses the closed form sin(lam r)/(lam sinh r); H2 evaluates the integral
    representation by quadrature.
    """
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    if model.n == 3:
        out = np.sinc(lam * r_arr / math.pi) * _r_over_sinh(r_arr)
    else:
        out = _h2_phi_matrix(model, [lam], r_arr)[:, 0]
    return out if np.ndim(r) else float(out[0])


def phi0(model: HyperbolicModel, r):
    """Ground spherical function phi_0(r) > 0, phi_0(0) = 1."""
    return spherical_phi(model, 0.0, r)


def log_phi0(model: HyperbolicModel, r):
    """log phi_0(r), stable at radii where phi_0 underflows a direct product."""
    r = np.asarray(r, dtype=float)
    if model.n == 3:
        with np.errstate(divide="ignore"):
            return np.where(r > 0,
                            np.log(2.0 * np.maximum(r, 1e-300)) - r
                            - np.log(np.maximum(-np.expm1(-2.0 * r), 1e-300)),
                            0.0)
    shape = r.shape
    out = -model.rho * r + np.log(tilted_phi0(model, np.atleast_1d(r)))
    return out.reshape(shape) if shape else float(out[0])


def dlog_phi0(model: HyperbolicModel, r):
    """(log phi_0)'(r): analytic in H3, spline derivative of the tabulation in H2."""
    r = np.asarray(r, dtype=float)
    if model.n == 3:
        small = r < 0.05
        safe = np.where(small, 1.0, r)
        return np.where(small, -r / 3.0 + r ** 3 / 45.0,
                        1.0 / safe - 1.0 / np.tanh(safe))
    model.phi0_fast(np.array([0.0]))  # force the spline
    deriv = model._phi0_spline.derivative()
    inside = r <= 120.0
    out = np.asarray(deriv(np.minimum(r, 120.0)), dtype=float)
    if np.any(~inside):
        # asymptotic regime: phi0 ~ (1+r) e^{-r/2} up to constants
        out = np.where(inside, out, -model.rho + 1.0 / (1.0 + r))
    return out


def _spherical_phi_circle(model: HyperbolicModel, lam: float, r: float, n: int = 512):
    """H2 spherical function via the circle integral; small-r cross-check only.

    Fixed-node quadrature of this representation loses accuracy for r beyond
    roughly 10 because the integrand develops an O(e^-r)-wide endpoint peak.
    """
    if model.n != 2:
        raise ValueError("circle representation implemented for H2 only")
    th, w = gauss_legendre(0.0, math.pi, n)
    base = np.exp(-r) + 2.0 * np.sinh(r) * np.sin(0.5 * th) ** 2
    return float(np.sum(w * base ** (-0.5) * np.cos(lam * np.log(base))) / math.pi)


# ---------------------------------------------------------------------------
# Plancherel density and heat kernels
# ---------------------------------------------------------------------------

def _plancherel_shape(model: HyperbolicModel, lam):
    lam = np.asarray(lam, dtype=float)
    if model.n == 3:
        return lam ** 2
    return lam * np.tanh(math.pi * lam)


def plancherel_density(model: HyperbolicModel, lam):
    """Calibrated spectral density: ~ lam^2 in H3, ~ lam tanh(pi lam) in H2."""
    return model.normalization_constant * _plancherel_shape(model, lam)


def _heat_scaled_spectral(model, t, r, constant=None, tilt: float = 0.0):
    """q_t(r) by quadrature of the inversion formula (Gaussian factor only).

    The node count grows with lambda_max * max(r) so that the oscillations of
    phi_lambda in lambda stay resolved at large radii.
    """
    if constant is None:
        constant = model.normalization_constant
    r = np.atleast_1d(np.asarray(r, dtype=float))
    spec = model.quadrature
    phase = spec.lambda_max(t) * float(np.max(r, initial=0.0))
    nodes = int(np.clip(2.5 * phase + 48, spec.node_count, 2048))
    lam, wl = gauss_legendre(0.0, spec.lambda_max(t), nodes)
    weights = wl * _plancherel_shape(model, lam) * np.exp(-t * lam ** 2)
    if model.n == 3:
        phis = np.sinc(np.outer(r, lam) / math.pi) * _r_over_sinh(r)[:, None]
        if tilt:
            phis *= np.exp(tilt * r)[:, None]
    else:
        phis = _h2_phi_matrix(model, lam, r, tilt=tilt)
    out = constant * phis @ weights
    # deep in the Gaussian tail the oscillatory quadrature bottoms out at its
    # noise floor; clamp those values to a positive lower bound of the kernel
    bad = out <= 0
    if np.any(bad):
        if tilt:
            base = tilted_phi0(model, r[bad])
        else:
            base = np.maximum(phi0(model, r[bad]), 1e-280)
        out[bad] = 1e-20 * t ** (-0.5 * model.n) * base * np.exp(-r[bad] ** 2 / (4.0 * t))
        out[bad] = np.maximum(out[bad], 5e-324)
    return out


def heat_kernel_scaled(model: HyperbolicModel, t: float, r, method: str = "auto"):
    """Spectral-gap-compensated heat kernel q_t(r) = exp(rho^2 t) h_t(r).

    method 'auto' takes the closed form in H3 and the spectral quadrature in
    H2; 'spectral' forces the quadrature path (the H3 verification route).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0):
        raise ValueError("radius must be nonnegative")
    if method not in ("auto", "closed", "spectral"):
        raise ValueError(f"unknown method {method!r}")
    if method == "closed" and model.n != 3:
        raise ValueError("closed form is available in H3 only")
    if model.n == 3 and method in ("auto", "closed"):
        out = (4.0 * math.pi * t) ** -1.5 * _r_over_sinh(r_arr) \
            * np.exp(-r_arr ** 2 / (4.0 * t))
    else:
        out = _heat_scaled_spectral(model, t, r_arr)
    return out if np.ndim(r) else float(out[0])


def heat_kernel(model: HyperbolicModel, t: float, r, method: str = "auto"):
    """Heat kernel h_t(r) of the Laplace-Beltrami operator, curvature -1."""
    return math.exp(-model.rho_sq * t) * heat_kernel_scaled(model, t, r, method)


def _heat_envelope_shape_scaled(model, t, r):
    """exp(rho^2 t) times the global-estimate shape of the heat kernel."""
    r = np.asarray(r, dtype=float)
    p = 0.5 * (model.n - 1) - 1.0
    return t ** (-0.5 * model.n) * (1.0 + t + r) ** p * phi0(model, r) \
        * np.exp(-r ** 2 / (4.0 * t))


def heat_kernel_envelope(model: HyperbolicModel, t: float, r):
    """Calibrated (lower, upper) bracket of h_t(r) from the global estimate."""
    if t <= 0:
        raise ValueError("t must be positive")
    c_lo, c_hi = model.heat_envelope_constants
    shape = math.exp(-model.rho_sq * t) * _heat_envelope_shape_scaled(model, t, r)
    return c_lo * shape, c_hi * shape


# ---------------------------------------------------------------------------
# geometry
# ---------------------------------------------------------------------------

def _cosh_dist_minus_one(model, rp, tp, pp, rq, tq, pq):
    """cosh d(p,q) - 1 from polar coordinates, by positive-term haversines."""
    v = 2.0 * np.sinh(0.5 * (rp - rq)) ** 2
    if model.n == 3:
        ang = np.sin(0.5 * (tp - tq)) ** 2 \
            + np.sin(tp) * np.sin(tq) * np.sin(0.5 * (pp - pq)) ** 2
    else:
        ang = np.sin(0.5 * (tp - tq)) ** 2
    return v + 2.0 * np.sinh(rp) * np.sinh(rq) * ang


def distance_polar(model: HyperbolicModel, rp, tp, pp, rq, tq, pq):
    """Vectorized geodesic distance between polar-coordinate point arrays."""
    return _arccosh1p(_cosh_dist_minus_one(model, rp, tp, pp, rq, tq, pq))


def hyperbolic_distance(model: HyperbolicModel, p: SpacePoint, q: SpacePoint) -> float:
    """Geodesic distance realized through the hyperbolic law of cosines."""
    return float(distance_polar(model, p.r, p.theta, p.phi, q.r, q.theta, q.phi))


def busemann_rho(model: HyperbolicModel, p: SpacePoint) -> float:
    """<rho, A(p)> via the Busemann function toward the reference direction.

    The reference boundary point is the north pole theta = 0; along its ray
    the value is exactly rho * r, and rho * r is an upper bound everywhere.
    """
    base = np.exp(-p.r) + 2.0 * np.sinh(p.r) * np.sin(0.5 * p.theta) ** 2
    return float(-model.rho * np.log(base))


# ---------------------------------------------------------------------------
# composite checks
# ---------------------------------------------------------------------------

def ratio_gap(model: HyperbolicModel, t: float, g: SpacePoint, y: SpacePoint) -> float:
    """h_t(d(g,y))/h_t(|g|) - phi_0(d(g,y))/phi_0(|g|)."""
    d = hyperbolic_distance(model, g, y)
    qs = heat_kernel_scaled(model, t, np.array([d, g.r]))
    ps = phi0(model, np.array([d, g.r]))
    return float(qs[0] / qs[1] - ps[0] / ps[1])


def phi0_product_check(model: HyperbolicModel, x: SpacePoint, y: SpacePoint) -> float:
    """Residual of the rotational product identity of phi_0.

    Averages phi_0(d(x, k.y)) over rotations k about the origin and subtracts
    phi_0(|x|) phi_0(|y|); the result should vanish to quadrature accuracy.
    """
    rx, ry = x.r, y.r
    n = 2 * model.quadrature.node_count
    if model.n == 3:
        c, w = gauss_legendre(-1.0, 1.0, n)
        v = 2.0 * np.sinh(0.5 * (rx - ry)) ** 2 \
            + np.sinh(rx) * np.sinh(ry) * (1.0 - c)
        avg = 0.5 * float(np.sum(w * phi0(model, _arccosh1p(v))))
    else:
        g, w = gauss_legendre(0.0, math.pi, n)
        v = 2.0 * np.sinh(0.5 * (rx - ry)) ** 2 \
            + 2.0 * np.sinh(rx) * np.sinh(ry) * np.sin(0.5 * g) ** 2
        avg = float(np.sum(w * phi0(model, _arccosh1p(v))) / math.pi)
    return avg - float(phi0(model, rx) * phi0(model, ry))


def radial_measure_density(model: HyperbolicModel, r):
    """Radial density of the Riemannian measure: area(S^{n-1}) sinh^{n-1} r."""
    r = np.asarray(r, dtype=float)
    return model.sphere_area * np.sinh(r) ** (model.n - 1)


def log_radial_measure_density(model: HyperbolicModel, r):
    r = np.asarray(r, dtype=float)
    return math.log(model.sphere_area) + (model.n - 1) * _log_sinh(np.maximum(r, 1e-300))
