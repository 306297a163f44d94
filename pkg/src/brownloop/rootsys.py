"""Structural constants of symmetric spaces and the geometry of critical regions.

A root datum holds the reduced positive roots of a noncompact symmetric space
together with their multiplicities.  From it we derive the dimension n, the
dimension at infinity nu, the half-sum rho, the radial Haar density and the
time-dependent regions where the relativized heat kernel concentrates.

Conventions: real hyperbolic space H^n is realized in rank one with a single
reduced root of unit length and multiplicity n-1, which pins the metric to
constant curvature -1 and gives rho = (n-1)/2.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "PositiveRoot",
    "RootDatum",
    "EpsilonSchedule",
    "ChamberPoint",
    "build_root_datum",
    "hyperbolic_datum",
    "a2_datum",
    "dimensions",
    "haar_density",
    "haar_density_envelope",
    "phi0_envelope",
    "mu_min",
    "in_omega_t",
    "in_omega_double_prime",
    "in_R_t",
    "omega_bounds",
]


@dataclass(frozen=True)
class PositiveRoot:
    """A reduced positive root with multiplicities for alpha and 2*alpha."""

    vector: tuple
    multiplicity: int
    multiplicity_double: int = 0

    def __post_init__(self):
        vec = tuple(float(v) for v in self.vector)
        object.__setattr__(self, "vector", vec)
        if not any(v != 0.0 for v in vec):
            raise ValueError("root vector must be nonzero")
        if self.multiplicity < 1:
            raise ValueError("root multiplicity must be >= 1")
        if self.multiplicity_double < 0:
            raise ValueError("multiplicity of the doubled root must be >= 0")


@dataclass(frozen=True)
class RootDatum:
    """Rank and reduced positive roots (with multiplicities) of a symmetric space."""

    rank: int
    roots: tuple
    name: str = "custom"

    def __post_init__(self):
        if self.rank < 1:
            raise ValueError("rank must be a positive integer")
        roots = tuple(self.roots)
        object.__setattr__(self, "roots", roots)
        vecs = []
        for root in roots:
            if len(root.vector) != self.rank:
                raise ValueError(
                    f"root vector {root.vector} has length {len(root.vector)}, "
                    f"expected rank {self.rank}"
                )
            vecs.append(root.vector)
        if len(set(vecs)) != len(vecs):
            raise ValueError("positive roots must be pairwise distinct")

    @property
    def n(self) -> int:
        """Dimension: rank plus all root multiplicities (doubled roots included)."""
        return self.rank + sum(r.multiplicity + r.multiplicity_double for r in self.roots)

    @property
    def nu(self) -> int:
        """Dimension at infinity: rank plus twice the number of reduced positive roots."""
        return self.rank + 2 * len(self.roots)

    @property
    def rho(self) -> np.ndarray:
        """Half sum of positive roots counted with multiplicities."""
        rho = np.zeros(self.rank)
        for r in self.roots:
            alpha = np.asarray(r.vector)
            rho += (0.5 * r.multiplicity + r.multiplicity_double) * alpha
        return rho

    def positive_roots(self):
        """All positive roots as (vector, multiplicity) pairs, doubled roots expanded."""
        out = []
        for r in self.roots:
            alpha = np.asarray(r.vector)
            out.append((alpha, r.multiplicity))
            if r.multiplicity_double > 0:
                out.append((2.0 * alpha, r.multiplicity_double))
        return out


def hyperbolic_datum(n: int) -> RootDatum:
    """Rank-one datum of real hyperbolic space H^n, curvature -1."""
    if n < 2:
        raise ValueError("hyperbolic space needs dimension >= 2")
    return RootDatum(rank=1, roots=(PositiveRoot((1.0,), n - 1),), name=f"h{n}")


def a2_datum() -> RootDatum:
    """A2 datum: three reduced positive roots of unit length, all multiplicity one."""
    a1 = (1.0, 0.0)
    a2 = (-0.5, 0.5 * np.sqrt(3.0))
    a3 = (0.5, 0.5 * np.sqrt(3.0))
    roots = tuple(PositiveRoot(v, 1) for v in (a1, a2, a3))
    return RootDatum(rank=2, roots=roots, name="a2")


_FAMILIES = {
    "h2": lambda: hyperbolic_datum(2),
    "h3": lambda: hyperbolic_datum(3),
    "a2": a2_datum,
}


def build_root_datum(spec) -> RootDatum:
    """Build a RootDatum from a family name ('h2', 'h3', 'hN', 'a2') or an explicit list.

    An explicit list consists of (vector, multiplicity[, multiplicity_double])
    tuples; the rank is inferred from the vector length.
    """
    if isinstance(spec, str):
        key = spec.lower()
        if key in _FAMILIES:
            return _FAMILIES[key]()
        if key.startswith("h") and key[1:].isdigit():
            return hyperbolic_datum(int(key[1:]))
        raise ValueError(f"unknown root datum family {spec!r}")
    entries = list(spec)
    if not entries:
        raise ValueError("explicit root list must be nonempty")
    roots = []
    for entry in entries:
        vec, m = entry[0], entry[1]
        m2 = entry[2] if len(entry) > 2 else 0
        roots.append(PositiveRoot(tuple(vec), int(m), int(m2)))
    rank = len(roots[0].vector)
    return RootDatum(rank=rank, roots=tuple(roots), name="custom")


def dimensions(datum: RootDatum):
    """(n, nu) of the datum."""
    return datum.n, datum.nu


@dataclass(frozen=True)
class EpsilonSchedule:
    """Power-family shrinking schedule eps(t) = scale * t**(-gamma), 0 < gamma < 1/2.

    The constraints eps(t) -> 0 and eps(t)*sqrt(t) -> infinity both hold for
    this family; they are what the concentration statements require.
    """

    gamma: float = 0.25
    scale: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.gamma < 0.5:
            raise ValueError("gamma must lie in (0, 1/2)")
        if not self.scale > 0.0:
            raise ValueError("scale must be positive")

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t <= 0):
            raise ValueError("epsilon schedule requires t > 0")
        return self.scale * t ** (-self.gamma)


class ChamberPoint:
    """A point H of the closed positive chamber of a root datum."""

    __slots__ = ("datum", "H")

    def __init__(self, datum: RootDatum, H, tol: float = 1e-12):
        H = np.atleast_1d(np.asarray(H, dtype=float))
        if H.shape != (datum.rank,):
            raise ValueError(f"chamber vector must have length {datum.rank}")
        for alpha, _ in datum.positive_roots():
            if float(alpha @ H) < -tol:
                raise ValueError(f"{H} is outside the closed positive chamber")
        self.datum = datum
        self.H = H

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.H))

    def __repr__(self):
        return f"ChamberPoint({self.datum.name}, {self.H.tolist()})"


def radial_point(datum: RootDatum, r: float) -> ChamberPoint:
    """Rank-one chamber point at radius r (along the unique root direction)."""
    if datum.rank != 1:
        raise ValueError("radial_point only applies to rank-one data")
    return ChamberPoint(datum, (float(r),))


def _as_vector(datum, H):
    if isinstance(H, ChamberPoint):
        return H.H
    return np.atleast_1d(np.asarray(H, dtype=float))


def haar_density(datum: RootDatum, H) -> float:
    """Radial Haar density: product of sinh<alpha,H>**m over positive roots."""
    H = _as_vector(datum, H)
    out = 1.0
    for alpha, m in datum.positive_roots():
        out *= float(np.sinh(alpha @ H)) ** m
    return out


def haar_density_envelope(datum: RootDatum, H) -> float:
    """Envelope of the Haar density: prod (<a,H>/(1+<a,H>))**m * exp(2<rho,H>)."""
    H = _as_vector(datum, H)
    out = 1.0
    for alpha, m in datum.positive_roots():
        x = float(alpha @ H)
        out *= (x / (1.0 + x)) ** m
    return out * float(np.exp(2.0 * (datum.rho @ H)))


def phi0_envelope_shape(datum: RootDatum, H) -> float:
    """Uncalibrated two-sided envelope shape of the ground spherical function."""
    H = _as_vector(datum, H)
    out = 1.0
    for root in datum.roots:
        out *= 1.0 + float(np.asarray(root.vector) @ H)
    return out * float(np.exp(-(datum.rho @ H)))


def phi0_envelope(datum: RootDatum, H, constants=(1.0, 1.0)):
    """Calibrated (lower, upper) bracket for the ground spherical function at H.

    The bracket is c_lo/c_hi times the product-times-exponential shape; the
    constants come from sampling the exact function on a reference model.
    """
    c_lo, c_hi = constants
    if not 0.0 < c_lo <= c_hi:
        raise ValueError("envelope constants must satisfy 0 < c_lo <= c_hi")
    shape = phi0_envelope_shape(datum, H)
    return c_lo * shape, c_hi * shape


def mu_min(datum: RootDatum, H) -> float:
    """Minimum of <alpha, H> over the positive roots (distance-to-wall gauge)."""
    roots = datum.positive_roots()
    if not roots:
        raise ValueError("root system is empty")
    H = _as_vector(datum, H)
    return min(float(alpha @ H) for alpha, _ in roots)


def in_omega_t(datum: RootDatum, H, t: float, eps: EpsilonSchedule) -> bool:
    """Membership in the L1 critical region Omega_t.

    Omega_t is the chamber shell eps(t)*sqrt(t) <= |H| <= sqrt(t)/eps(t) with
    the wall condition mu(H) >= eps(t)*sqrt(t).
    """
    if t <= 0:
        raise ValueError("t must be positive")
    H = _as_vector(datum, H)
    e = float(eps(t))
    st = np.sqrt(t)
    norm = float(np.linalg.norm(H))
    return (e * st <= norm <= st / e) and (mu_min(datum, H) >= e * st)


def in_omega_double_prime(datum: RootDatum, H, t: float, eps: EpsilonSchedule) -> bool:
    """Membership in the shrunk region Omega_t'' (the schedule doubled: eps'' = 2 eps)."""
    doubled = EpsilonSchedule(gamma=eps.gamma, scale=2.0 * eps.scale)
    return in_omega_t(datum, H, t, doubled)


def in_R_t(datum: RootDatum, H, t: float, eps: EpsilonSchedule) -> bool:
    """Membership in the L-infinity critical region: the ball |H| <= sqrt(t)/eps(t)."""
    if t <= 0:
        raise ValueError("t must be positive")
    H = _as_vector(datum, H)
    return float(np.linalg.norm(H)) <= np.sqrt(t) / float(eps(t))


def omega_bounds(t: float, eps: EpsilonSchedule):
    """(inner, outer) radii of the Omega_t shell at time t."""
    if t <= 0:
        raise ValueError("t must be positive")
    e = float(eps(t))
    return e * np.sqrt(t), np.sqrt(t) / e
