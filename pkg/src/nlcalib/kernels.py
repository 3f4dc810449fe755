"""Radial interaction kernels, their truncations and tail integrals.

Every kernel is described by a radial profile ``k(r)`` with ``K(z) = k(|z|)``,
so evenness holds by construction.  Kernels live in dimension 1 or 2.
Integrability of ``min(1, |z|) K(z)`` is checked once at construction.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .errors import KernelDomainError

_QUAD_OPTS = dict(epsabs=0.0, epsrel=1e-10, limit=400)


def _sphere_measure(n):
    """Surface measure of the unit sphere in R^n (number of directions for n=1)."""
    return 2.0 if n == 1 else 2.0 * np.pi


class Kernel:
    """Common machinery; subclasses provide ``profile`` and a few closed forms."""

    singular = False
    family = "abstract"

    # -- subclasses ---------------------------------------------------------

    def profile(self, r):
        raise NotImplementedError

    def _tail_closed_form(self, radius):
        return None

    def _breakpoints(self):
        return ()

    def params(self):
        raise NotImplementedError

    # -- shared -------------------------------------------------------------

    def _check_dimension(self):
        if self.dimension not in (1, 2):
            raise KernelDomainError(f"dimension must be 1 or 2, got {self.dimension}")

    def radial_density(self, r):
        """``k(r)`` times the radial volume element ``|S^{n-1}| r^{n-1}``."""
        r = np.asarray(r, dtype=float)
        return _sphere_measure(self.dimension) * self.profile(r) * r ** (self.dimension - 1)

    def evaluate(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.shape[-1] != self.dimension and not (self.dimension == 1 and z.size == 1):
            raise KernelDomainError(f"displacement {z} does not have dimension {self.dimension}")
        r = float(np.sqrt(np.sum(z * z)))
        if r == 0.0 and self.singular:
            raise KernelDomainError(f"{self.family} kernel is singular at z = 0; exclude the diagonal")
        return float(self.profile(np.array(r)))

    def evaluate_truncated(self, z, eps):
        if not eps > 0:
            raise KernelDomainError("truncation radius must be positive")
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if np.sqrt(np.sum(z * z)) < eps:
            return 0.0
        return self.evaluate(z)

    def annulus_integral(self, r1, r2):
        """``(value, abserr)`` of the integral of K over ``r1 < |z| < r2``."""
        if r2 <= r1:
            return 0.0, 0.0
        pts = [p for p in self._breakpoints() if r1 < p < r2]
        val, err = integrate.quad(self.radial_density, r1, r2, points=pts or None, **_QUAD_OPTS)
        return val, err

    def tail_integral_with_error(self, radius):
        """``(value, abserr)`` of the integral of K over ``|z| > radius``."""
        if not radius > 0:
            raise KernelDomainError("tail radius must be positive")
        closed = self._tail_closed_form(radius)
        if closed is not None:
            return float(closed), 0.0
        edges = [radius] + [p for p in self._breakpoints() if p > radius]
        total, err = 0.0, 0.0
        for a, b in zip(edges[:-1], edges[1:]):
            v, e = integrate.quad(self.radial_density, a, b, **_QUAD_OPTS)
            total += v
            err += e
        v, e = integrate.quad(self.radial_density, edges[-1], np.inf, **_QUAD_OPTS)
        if not np.isfinite(v):
            raise KernelDomainError(f"tail of {self.family} kernel is not integrable")
        return total + v, err + e

    def tail_integral(self, radius):
        return self.tail_integral_with_error(radius)[0]

    def integrability_constant(self):
        """Quadrature of ``min(1, |z|) K(z)`` over the whole space."""
        weighted = lambda r: min(1.0, r) * self.radial_density(r)
        pts = [p for p in self._breakpoints() if 0 < p < 1]
        inner, _ = integrate.quad(weighted, 0.0, 1.0, points=pts or None, **_QUAD_OPTS)
        return inner + self.tail_integral(1.0)

    def _validate(self):
        self._check_dimension()
        c = self.integrability_constant()
        if not np.isfinite(c):
            raise KernelDomainError(f"{self.family} kernel fails the integrability condition")
        object.__setattr__(self, "_integrability", c)

    def to_dict(self):
        return {"family": self.family, "dimension": self.dimension, **self.params()}


@dataclass(frozen=True)
class FractionalPower(Kernel):
    """``K(z) = scale * |z|^(-n - alpha)``."""

    alpha: float
    scale: float = 1.0
    dimension: int = 1

    singular = True
    family = "fractional_power"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise KernelDomainError(f"alpha must lie in (0, 1), got {self.alpha}")
        if not self.scale > 0:
            raise KernelDomainError("scale must be positive")
        self._validate()
        expected = self.integrability_closed_form()
        if abs(self._integrability - expected) > 1e-8 * expected:
            raise KernelDomainError("integrability quadrature disagrees with its closed form")

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore"):
            return self.scale * r ** (-self.dimension - self.alpha)

    def _tail_closed_form(self, radius):
        return _sphere_measure(self.dimension) * self.scale * radius ** (-self.alpha) / self.alpha

    def integrability_closed_form(self):
        a = self.alpha
        return _sphere_measure(self.dimension) * self.scale * (1.0 / (1.0 - a) + 1.0 / a)

    def params(self):
        return {"alpha": self.alpha, "scale": self.scale}


@dataclass(frozen=True)
class Exponential(Kernel):
    """``K(z) = exp(-rate * |z|)``."""

    rate: float
    dimension: int = 1

    family = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise KernelDomainError("rate must be positive")
        self._validate()

    def profile(self, r):
        return np.exp(-self.rate * np.asarray(r, dtype=float))

    def _tail_closed_form(self, radius):
        lam = self.rate
        if self.dimension == 1:
            return 2.0 * np.exp(-lam * radius) / lam
        return 2.0 * np.pi * np.exp(-lam * radius) * (radius / lam + 1.0 / lam**2)

    def params(self):
        return {"rate": self.rate}


@dataclass(frozen=True)
class CompactSupport(Kernel):
    """``K(z) = height`` for ``|z| <= radius`` and 0 beyond."""

    radius: float
    height: float = 1.0
    dimension: int = 1

    family = "compact_support"

    def __post_init__(self):
        if not self.radius > 0:
            raise KernelDomainError("radius must be positive")
        if not self.height >= 0:
            raise KernelDomainError("height must be nonnegative")
        self._validate()

    def profile(self, r):
        r = np.asarray(r, dtype=float)
        return np.where(r <= self.radius, self.height, 0.0)

    def _breakpoints(self):
        return (self.radius,)

    def _tail_closed_form(self, radius):
        if self.dimension == 1:
            return 2.0 * self.height * max(self.radius - radius, 0.0)
        return np.pi * self.height * max(self.radius**2 - radius**2, 0.0)

    def params(self):
        return {"radius": self.radius, "height": self.height}


@dataclass(frozen=True)
class CustomRadial(Kernel):
    """Piecewise-linear profile through ``(distance, value)`` nodes, zero past the last node."""

    distances: tuple = field(default=())
    values: tuple = field(default=())
    dimension: int = 1

    family = "custom_radial"

    def __post_init__(self):
        d = np.asarray(self.distances, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if d.ndim != 1 or d.size == 0 or d.shape != v.shape:
            raise KernelDomainError("custom table needs matching, nonempty distance and value lists")
        if np.any(d < 0) or np.any(np.diff(d) <= 0):
            raise KernelDomainError("custom table distances must be nonnegative and increasing")
        if np.any(v < 0) or not np.all(np.isfinite(v)):
            raise KernelDomainError("custom table values must be finite and nonnegative")
        object.__setattr__(self, "distances", tuple(float(x) for x in d))
        object.__setattr__(self, "values", tuple(float(x) for x in v))
        self._validate()

    @classmethod
    def from_pairs(cls, pairs, dimension=1):
        pairs = list(pairs)
        return cls(tuple(p[0] for p in pairs), tuple(p[1] for p in pairs), dimension)

    def profile(self, r):
        return np.interp(np.asarray(r, dtype=float), self.distances, self.values, right=0.0)

    def _breakpoints(self):
        return self.distances

    def _tail_closed_form(self, radius):
        if radius >= self.distances[-1]:
            return 0.0
        return None

    def params(self):
        return {"table": [[d, v] for d, v in zip(self.distances, self.values)]}


_FAMILIES = {
    "fractional_power": lambda p, n: FractionalPower(float(p["alpha"]), float(p.get("scale", 1.0)), n),
    "exponential": lambda p, n: Exponential(float(p["rate"]), n),
    "compact_support": lambda p, n: CompactSupport(float(p["radius"]), float(p.get("height", 1.0)), n),
    "custom_radial": lambda p, n: CustomRadial.from_pairs(p["table"], n),
}


def kernel_from_dict(spec):
    """Inverse of :meth:`Kernel.to_dict`."""
    try:
        family = spec["family"]
        build = _FAMILIES[family]
    except KeyError as exc:
        raise KernelDomainError(f"unknown or missing kernel family in {spec!r}") from exc
    return build(spec, int(spec.get("dimension", 1)))


def evaluate(kernel, z):
    return kernel.evaluate(z)


def evaluate_truncated(kernel, z, eps):
    return kernel.evaluate_truncated(z, eps)


def tail_integral(kernel, radius):
    return kernel.tail_integral(radius)
