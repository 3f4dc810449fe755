"""Canonical constructions, scenario configs and continuum refinement studies.

Scenarios are JSON documents (see the README for the schema).  Builders return
a :class:`Built` bundle holding the lattice, weights, the candidate set ``E``
and, when one exists, its foliation ``phi``.
"""

from dataclasses import dataclass, field
from fractions import Fraction
import json
import math

import numpy as np
from scipy import integrate

from .errors import ConfigError, PreconditionError, SeparationError
from .functionals import nmc_level_many, nmc_set_many, perimeter
from .calibration import ordered_identity, assemble_ordered_foliation
from .kernels import FractionalPower, Kernel, kernel_from_dict
from .lattice import (
    CELL_AVERAGED,
    MIDPOINT,
    IndicatorField,
    Lattice,
    LevelField,
    build_weights,
)

# --------------------------------------------------------------------------
# function specs
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class FunctionSpec:
    """``u(x) = sum_k c_k x^k + slope * |x|``."""

    coefficients: tuple = (0.0,)
    slope: float = 0.0

    @classmethod
    def from_dict(cls, spec):
        if spec is None:
            return cls()
        kind = spec.get("kind", "polynomial")
        coeffs = tuple(float(c) for c in spec.get("coefficients", [0.0]))
        if kind == "polynomial":
            return cls(coeffs, 0.0)
        if kind == "abs":
            return cls(coeffs, float(spec["slope"]))
        raise ConfigError(f"unknown function kind {kind!r}")

    def to_dict(self):
        if self.slope:
            return {"kind": "abs", "slope": self.slope, "coefficients": list(self.coefficients)}
        return {"kind": "polynomial", "coefficients": list(self.coefficients)}

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for c in reversed(self.coefficients):
            out = out * x + c
        if self.slope:
            out = out + self.slope * np.abs(x)
        return out

    def exact(self, x):
        """``u(x)`` in rational arithmetic for a :class:`~fractions.Fraction` ``x``."""
        out = Fraction(0)
        for c in reversed(self.coefficients):
            out = out * x + Fraction(c)
        if self.slope:
            out += Fraction(self.slope) * abs(x)
        return out

    @property
    def is_affine(self):
        return self.slope == 0.0 and all(c == 0.0 for c in self.coefficients[2:])


# --------------------------------------------------------------------------
# constructions
# --------------------------------------------------------------------------


@dataclass
class Built:
    lattice: Lattice
    W: object
    E: IndicatorField
    phi: LevelField = None
    info: dict = field(default_factory=dict)


def _exact_centers(lattice, axis):
    h = Fraction(lattice.h)
    return [h * Fraction(2 * (lattice.lo[axis] + i) + 1, 2) for i in range(lattice.shape[axis])]


def build_halfspace(lattice, normal, offset=0.0):
    """``E = {x . normal < offset}`` and ``phi = offset - x . normal``.

    Levels are evaluated in rational arithmetic and rounded once, so pairs
    that tie exactly keep tying and the level curvatures vanish exactly for
    any normal.
    """
    normal = np.asarray(normal, dtype=float).reshape(-1)
    if normal.size != lattice.dimension:
        raise PreconditionError("normal does not match the lattice dimension")
    nq = [Fraction(float(v)) for v in normal]
    off = Fraction(float(offset))
    c0 = _exact_centers(lattice, 0)
    if lattice.dimension == 1:
        vals = np.array([[float(off - nq[0] * a)] for a in c0])
    else:
        c1 = _exact_centers(lattice, 1)
        vals = np.array([[float(off - nq[0] * a - nq[1] * b) for b in c1] for a in c0])
    phi = LevelField(lattice, vals)
    return phi.positive_set(), phi


def build_subgraph(lattice, u):
    """``E = {x_n < u(x')}`` with the vertical-translation foliation ``phi = u(x') - x_n``.

    For a :class:`FunctionSpec` the levels are computed in rational arithmetic
    and rounded once, which keeps exact ties of affine graphs intact.
    """
    if lattice.dimension != 2:
        raise PreconditionError("subgraph constructions need a 2D lattice")
    x1, x2 = lattice.centers()
    ux = u(x1[:, 0])
    lo = lattice.h * lattice.lo[1]
    hi = lattice.h * (lattice.lo[1] + lattice.shape[1])
    out = np.flatnonzero((ux < lo) | (ux > hi))
    if out.size:
        raise PreconditionError(f"u leaves the universe vertically at x' = {float(x1[out[0], 0])!r}")
    if isinstance(u, FunctionSpec):
        uq = [u.exact(a) for a in _exact_centers(lattice, 0)]
        c1 = _exact_centers(lattice, 1)
        vals = np.array([[float(ua - b) for b in c1] for ua in uq])
    else:
        vals = ux[:, None] - x2
    phi = LevelField(lattice, vals)
    return phi.positive_set(), phi


def build_ball(lattice, center, radius):
    """Cells with center inside the ball, with the radial foliation ``radius - |x - center|``."""
    centers = lattice.centers()
    c = np.asarray(center, dtype=float).reshape(-1)
    dist = np.sqrt(sum((x - ci) ** 2 for x, ci in zip(centers, c)))
    phi = LevelField(lattice, radius - dist)
    return phi.positive_set(), phi


def build_bending(lattice, slope, intercept, bend, center=0.0):
    """Affine subgraph with a strict two-sided subsolution foliation.

    ``phi = (slope x1 + intercept - x2) / (1 - bend (x1 - center)^2)``.  Its
    positive level sets are subgraphs of convex functions and its negative
    level sets subgraphs of concave ones, so level curvatures are ``<= 0`` on
    ``E`` and ``>= 0`` off it, strictly where the bending is felt.
    """
    if lattice.dimension != 2:
        raise PreconditionError("bending foliations need a 2D lattice")
    if bend < 0:
        raise PreconditionError("bend must be nonnegative")
    s, b, a, m = (Fraction(float(v)) for v in (slope, intercept, bend, center))
    c1 = _exact_centers(lattice, 1)
    rows = []
    for x in _exact_centers(lattice, 0):
        denom = 1 - a * (x - m) ** 2
        if denom <= 0:
            raise PreconditionError("bend too large: the foliation denominator vanishes on the universe")
        rows.append([float((s * x + b - y) / denom) for y in c1])
    phi = LevelField(lattice, np.array(rows))
    return phi.positive_set(), phi


def build_convex_subgraph(lattice, u):
    """Subgraph of a convex ``u`` with ``phi = u(x') - x_n``: level curvatures are ``<= 0`` everywhere."""
    return build_subgraph(lattice, u)


def random_instance(lattice, rng, density=0.5):
    """Random set and a tie-free foliation of it (``|N(0,1)|`` magnitudes with the right signs)."""
    e = rng.random(lattice.grid_shape) < density
    mag = np.abs(rng.standard_normal(lattice.grid_shape)) + 1e-3
    phi = LevelField(lattice, np.where(e, mag, -mag))
    return IndicatorField(lattice, e), phi


@dataclass
class ViscosityTouch:
    """Raised-graph construction over an exterior set ``F`` touched from inside by ``A``."""

    F: IndicatorField
    A: IndicatorField
    E: IndicatorField
    phi: LevelField
    family: list
    lastclaim_violations: int
    domination_gap: float
    curvature_A_origin: float
    identity: tuple
    band_levels: np.ndarray = None

    @property
    def perimeter_decreases(self):
        return self.identity[0] < 0

    def to_dict(self):
        return {
            "family": [[t, p] for t, p in self.family],
            "lastclaim_violations": self.lastclaim_violations,
            "domination_gap": self.domination_gap,
            "curvature_A_origin": self.curvature_A_origin,
            "perimeter_E_minus_F": self.identity[0],
            "level_curvature_sum": self.identity[1],
            "perimeter_decreases": self.perimeter_decreases,
        }


def q_rho_lattice(lattice, origin, rho):
    """Same universe with the window replaced by ``Q_rho`` around the ``origin`` cell."""
    o = lattice.local_index(origin)
    x1, x2 = lattice.centers()
    mask = (np.abs(x1 - x1[o]) < rho) & (np.abs(x2 - x2[o]) < rho)
    return lattice.with_window(mask)


def build_viscosity_touch(lattice, W, F, u, t0, rho, origin):
    """Raise the graph of ``u`` by ``t0`` inside ``|x'| < 1`` on top of ``F``.

    Coordinates are relative to the center of the ``origin`` cell.  ``A`` is
    the subgraph of ``u`` inside ``Q_2`` joined with ``F`` outside ``Q_2``; it
    must lie in ``F``.  The raised set is ``E = A_t0 u F`` with the band
    foliation ``phi = t0 + u(x') - x_n`` between ``F`` and the complement.  The
    window of ``lattice`` must be ``Q_rho``.
    """
    if lattice.dimension != 2:
        raise PreconditionError("viscosity constructions need a 2D lattice")
    h = lattice.h
    o = lattice.local_index(origin)
    x1, x2 = lattice.centers()
    xp = x1 - x1[o]
    xn = x2 - x2[o]
    ux = u(xp)
    if abs(float(u(np.array(0.0)))) > 0:
        raise PreconditionError("u must vanish at the origin")
    if abs(float(u(np.array(h))) - float(u(np.array(-h)))) > 1e-12:
        raise PreconditionError("u must be symmetric to second order at the origin (u(h) == u(-h))")
    if t0 > rho / 3.0 or t0 <= 0:
        raise PreconditionError("t0 must lie in (0, rho / 3]")
    near = np.abs(xp) < rho
    if np.any(ux[near] >= rho / 3.0):
        raise PreconditionError("u must stay below rho / 3 on |x'| < rho")
    q2 = (np.abs(xp) < 2.0) & (np.abs(xn) < 2.0)
    q_rho = (np.abs(xp) < rho) & (np.abs(xn) < rho)
    if not np.array_equal(q_rho, lattice.window):
        raise PreconditionError("the lattice window must be the box Q_rho around the origin")
    fv = F.values
    a = np.where(q2, xn < ux, fv)
    if np.any(a & ~fv):
        bad = np.argwhere(a & ~fv)[0]
        raise PreconditionError(f"A is not contained in F at x' = {float(xp[tuple(bad)])!r}")
    if fv[o]:
        raise PreconditionError("the origin cell must lie outside F")
    level = xn - ux
    unit = np.abs(xp) < 1.0

    def a_t(t):
        return a | (unit & (level >= 0) & (level < t))

    band = a_t(t0) & ~a
    far = band & (np.abs(xp) >= rho) & ~fv
    if far.any():
        bad = np.argwhere(far)[0]
        raise SeparationError(f"raised band leaves F outside the window at x' = {float(xp[tuple(bad)])!r}", float(xp[tuple(bad)]))
    e = a_t(t0) | fv
    E = IndicatorField(lattice, e)
    interior = np.where(e & ~fv, t0 - level, 0.0)
    phi = assemble_ordered_foliation(E, F, interior)

    # family of raised sets on the row-spacing grid
    steps = max(1, int(round(t0 / h)))
    family = []
    for k in range(steps + 1):
        t = t0 * k / steps
        family.append((t, perimeter(IndicatorField(lattice, a_t(t) | fv), W)))

    # cellwise scan: sign(phi(x) - phi(y)) <= 1_{A^x complement}(y) - 1_{A^x}(y)
    cells = np.argwhere(e & ~fv)
    violations = 0
    gap = np.inf
    r0, r1 = W.reach
    n0, n1 = lattice.grid_shape
    pv = phi.values
    for x in cells:
        ax = a | (unit & (level >= 0) & (level < level[tuple(x)]))
        i0, i1 = max(0, x[0] - r0), min(n0, x[0] + r0 + 1)
        j0, j1 = max(0, x[1] - r1), min(n1, x[1] + r1 + 1)
        py = pv[i0:i1, j0:j1]
        px = pv[tuple(x)]
        s = (px > py).astype(float) - (px < py)
        rhs = np.where(ax[i0:i1, j0:j1], -1.0, 1.0)
        w = W.table[i0 - x[0] + r0 : i1 - x[0] + r0, j0 - x[1] + r1 : j1 - x[1] + r1]
        live = w > 0
        violations += int(np.count_nonzero((s > rhs) & live))
        hset = nmc_set_many(IndicatorField(lattice, ax), W, x[None, :])[0]
        hlev = nmc_level_many(phi, W, x[None, :])[0]
        gap = min(gap, hset - hlev)
    lhs, rhs = ordered_identity(E, F, LevelField(lattice, np.where(e & ~fv, t0 - level, 0.0)), W)
    curv_a = float(nmc_set_many(IndicatorField(lattice, a), W, np.array([o], dtype=np.int64))[0])
    return ViscosityTouch(F, IndicatorField(lattice, a), E, phi, family, violations,
                          float(gap if cells.size else 0.0), curv_a, (lhs, rhs), level)


# --------------------------------------------------------------------------
# continuum oracles and refinement studies
# --------------------------------------------------------------------------


def disk_curvature_oracle(kernel, radius):
    """Nonlocal mean curvature of a disk at a boundary point, by nested adaptive quadrature.

    Pairs each inward direction at angle ``theta`` to the tangent with its
    opposite: the full line contributes ``2 int_{L}^inf k(r) r dr`` with chord
    length ``L = 2 R sin(theta)``.
    """
    if kernel.dimension != 2:
        raise PreconditionError("disk curvature needs a 2D kernel")

    def line(theta):
        chord = 2.0 * radius * math.sin(theta)
        return 2.0 * kernel.tail_integral(chord) / (2.0 * math.pi)

    val, err = integrate.quad(line, 0.0, math.pi, points=[math.pi / 2], epsabs=0.0, epsrel=1e-11, limit=400)
    return val, err


def disk_curvature_closed_form(kernel, radius):
    """Closed form for the fractional power kernel, used to cross-check the quadrature oracle."""
    a = kernel.alpha
    ang, _ = integrate.quad(lambda t: math.sin(t) ** (-a), 0.0, math.pi, points=[math.pi / 2],
                            epsabs=0.0, epsrel=1e-12, limit=400)
    return kernel.scale * (2.0 / a) * (2.0 * radius) ** (-a) * ang


def interval_perimeter_oracle(kernel, length):
    """Perimeter of an interval in the whole line: ``int_0^l (T(x) + T(l - x)) dx`` with one-sided tails ``T``."""
    if kernel.dimension != 1:
        raise PreconditionError("interval perimeter needs a 1D kernel")
    side = lambda x: 0.5 * kernel.tail_integral(x) if x > 0 else np.inf
    val, err = integrate.quad(lambda x: 2.0 * side(x), 0.0, length, epsabs=0.0, epsrel=1e-11, limit=400)
    return val, err


def interval_perimeter_closed_form(kernel, length):
    a = kernel.alpha
    return kernel.scale * 2.0 * length ** (1.0 - a) / (a * (1.0 - a))


def _interval_row(kernel, h, length, mode):
    n_e = int(round(length / h))
    margin = n_e
    lat = Lattice.around_window(h, (0, n_e - 1), margin)
    W = build_weights(lat, kernel, mode, reach=margin)
    E = IndicatorField(lat, lat.window)
    raw = perimeter(E, W)
    # pairs beyond the reach: each E cell against everything past M cells on each side
    tail, _ = integrate.quad(lambda r: 0.5 * kernel.tail_integral(r), margin * h, (margin + 1) * h,
                             epsabs=0.0, epsrel=1e-12)
    return raw, raw + 2.0 * n_e * tail


def _disk_row(kernel, h, radius, samples, truncation_cells, rcut, offset):
    c = np.array(offset, dtype=float) * h
    reach = int(math.ceil(rcut / h)) + 1
    half = int(math.ceil((radius + 0.5 * h) / h)) + 2
    lo0 = int(math.floor(c[0] / h)) - half - reach
    lo1 = int(math.floor(c[1] / h)) - half - reach
    n = 2 * (half + reach) + 2
    g = (math.sqrt(5.0) - 1.0) / 2.0
    theta = 2.0 * math.pi * (np.arange(samples) + g) / samples
    px = c[0] + radius * np.cos(theta)
    py = c[1] + radius * np.sin(theta)
    gi = np.floor(px / h).astype(int)
    gj = np.floor(py / h).astype(int)
    mask = np.zeros((n, n), dtype=bool)
    mask[gi - lo0, gj - lo1] = True
    lat = Lattice(h, (lo0, lo1), (n, n), mask)
    W = build_weights(lat, kernel, MIDPOINT, reach=reach)
    _, phi = build_ball(lat, c, radius)
    cells = np.stack([gi - lo0, gj - lo1], axis=1).astype(np.int64)
    x1, x2 = lat.centers()
    rx = np.hypot(x1[cells[:, 0], cells[:, 1]] - c[0], x2[cells[:, 0], cells[:, 1]] - c[1])
    scale = (rx / radius) ** kernel.alpha if isinstance(kernel, FractionalPower) else np.ones_like(rx)
    tail = kernel.tail_integral(rcut)

    def mean_curv(eps):
        vals = nmc_level_many(phi, W, cells, eps=eps, rcut=rcut) + tail
        return float(np.mean(vals * scale))

    full = float(np.mean((nmc_level_many(phi, W, cells, rcut=rcut) + tail) * scale))
    m = truncation_cells
    h1, h2 = mean_curv(m * h), mean_curv(2 * m * h)
    if isinstance(kernel, FractionalPower):
        q = 2.0 ** (1.0 - kernel.alpha)
        extrap = (q * h1 - h2) / (q - 1.0)
    else:
        extrap = 2.0 * h1 - h2
    return full, extrap


@dataclass
class StudyTable:
    kind: str
    columns: list
    rows: list
    reference: float
    notes: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_csv(self):
        lines = [",".join(self.columns)]
        for r in self.rows:
            lines.append(",".join(repr(r[c]) if isinstance(r[c], float) else str(r[c]) for c in self.columns))
        return "\n".join(lines) + "\n"

    def to_dict(self):
        return {"kind": self.kind, "columns": self.columns, "rows": self.rows, "reference": self.reference,
                "notes": self.notes, "flags": self.flags}


def _flag_monotone(table, column):
    errs = [abs(r[column]) for r in table.rows]
    if any(b > a for a, b in zip(errs[:-1], errs[1:])):
        table.flags.append(f"non-monotone {column}")


def _observed_orders(rows, hs, column):
    for k in range(len(rows)):
        if k == 0 or rows[k - 1][column] == 0 or rows[k][column] == 0:
            rows[k]["observed_order"] = float("nan")
        else:
            rows[k]["observed_order"] = math.log(abs(rows[k - 1][column] / rows[k][column])) / math.log(hs[k - 1] / hs[k])


def refinement_study(kind, h_list, kernel=None, **params):
    """Convergence table of a canonical shape under mesh refinement.

    ``kind`` is ``"halfspace"`` (level curvature identically zero),
    ``"disk"`` (boundary curvature against :func:`disk_curvature_oracle`) or
    ``"interval"`` (1D perimeter against :func:`interval_perimeter_oracle`).
    """
    hs = [float(h) for h in h_list]
    if not hs or any(not h > 0 for h in hs):
        raise PreconditionError("h list must be a nonempty list of positive spacings")
    if any(b >= a for a, b in zip(hs[:-1], hs[1:])):
        raise PreconditionError("h list must be strictly decreasing")
    if kind == "halfspace":
        dim = int(params.get("dimension", 1))
        kernel = kernel or FractionalPower(0.5, dimension=dim)
        half = int(params.get("window_half", 4))
        rows = []
        for h in hs:
            if dim == 1:
                lat = Lattice.around_window(h, (-half, half - 1), 2 * half)
            else:
                lat = Lattice.around_window(h, ((-half, half - 1), (-half, half - 1)), 2 * half)
            W = build_weights(lat, kernel)
            normal = (1.0,) if dim == 1 else (0.0, 1.0)
            E, phi = build_halfspace(lat, normal, 0.0)
            curv = nmc_level_many(phi, W)
            rows.append({"h": h, "max_abs_curvature": float(np.max(np.abs(curv))), "perimeter": perimeter(E, W)})
        return StudyTable(kind, ["h", "max_abs_curvature", "perimeter"], rows, 0.0)
    if kind == "disk":
        kernel = kernel or FractionalPower(0.5, dimension=2)
        radius = float(params.get("radius", 1.0))
        ref, ref_err = disk_curvature_oracle(kernel, radius)
        notes = [f"quadrature oracle {ref!r} (abs err {ref_err:.1e})"]
        if isinstance(kernel, FractionalPower):
            notes.append(f"closed form {disk_curvature_closed_form(kernel, radius)!r}")
        rows = []
        for h in hs:
            full, extrap = _disk_row(
                kernel, h, radius,
                samples=int(params.get("samples", 64)),
                truncation_cells=int(params.get("truncation_cells", 8)),
                rcut=float(params.get("rcut", 2.5 * radius)),
                offset=params.get("center_offset", (0.1234567, 0.3141592)),
            )
            rows.append({"h": h, "curvature": extrap, "rel_error": (extrap - ref) / ref,
                         "curvature_full_sum": full, "rel_error_full_sum": (full - ref) / ref})
        table = StudyTable(kind, ["h", "curvature", "rel_error", "observed_order", "curvature_full_sum",
                                  "rel_error_full_sum"], rows, ref, notes)
        _observed_orders(rows, hs, "rel_error")
        _flag_monotone(table, "rel_error")
        return table
    if kind == "interval":
        kernel = kernel or FractionalPower(0.5, dimension=1)
        length = float(params.get("length", 1.0))
        ref, ref_err = interval_perimeter_oracle(kernel, length)
        notes = [f"quadrature oracle {ref!r} (abs err {ref_err:.1e})"]
        if isinstance(kernel, FractionalPower):
            notes.append(f"closed form {interval_perimeter_closed_form(kernel, length)!r}")
        rows = []
        for h in hs:
            raw, corrected = _interval_row(kernel, h, length, CELL_AVERAGED)
            mid_raw, mid = _interval_row(kernel, h, length, MIDPOINT)
            rows.append({"h": h, "perimeter": corrected, "rel_error": (corrected - ref) / ref,
                         "perimeter_uncorrected": raw, "perimeter_midpoint": mid,
                         "rel_error_midpoint": (mid - ref) / ref})
        _observed_orders(rows, hs, "rel_error_midpoint")
        # midpoint error behaves like h^(1 - alpha) for the power kernel
        p = 1.0 - kernel.alpha if isinstance(kernel, FractionalPower) else 1.0
        for k, r in enumerate(rows):
            if k == 0:
                r["perimeter_midpoint_richardson"] = float("nan")
                r["rel_error_midpoint_richardson"] = float("nan")
                continue
            q = (hs[k - 1] / hs[k]) ** p
            ext = (q * r["perimeter_midpoint"] - rows[k - 1]["perimeter_midpoint"]) / (q - 1.0)
            r["perimeter_midpoint_richardson"] = ext
            r["rel_error_midpoint_richardson"] = (ext - ref) / ref
        table = StudyTable(kind, ["h", "perimeter", "rel_error", "perimeter_uncorrected", "perimeter_midpoint",
                                  "rel_error_midpoint", "observed_order", "perimeter_midpoint_richardson",
                                  "rel_error_midpoint_richardson"], rows, ref, notes)
        _flag_monotone(table, "rel_error_midpoint")
        return table
    raise PreconditionError(f"unknown study kind {kind!r}")


# --------------------------------------------------------------------------
# scenario configs
# --------------------------------------------------------------------------

_CONSTRUCTIONS = {"halfspace", "subgraph", "ball", "bending", "viscosity_touch", "random", "custom"}
_FOLIATIONS = {
    "halfspace": {"natural", "explicit", "two_valued"},
    "subgraph": {"vertical_translation", "explicit"},
    "ball": {"natural", "explicit", "two_valued"},
    "bending": {"natural", "explicit"},
    "viscosity_touch": {"raised_graph"},
    "random": {"natural", "two_valued"},
    "custom": {"explicit", "two_valued", "none"},
}
_DEFAULT_FOLIATION = {
    "halfspace": "natural", "subgraph": "vertical_translation", "ball": "natural", "bending": "natural",
    "viscosity_touch": "raised_graph", "random": "natural", "custom": "explicit",
}


def _require(cfg, key, where):
    if key not in cfg:
        raise ConfigError(f"missing required field {where}{key!r}")
    return cfg[key]


def parse_config(text, source="<config>"):
    """Parse and validate a JSON scenario; errors carry line and column numbers."""
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"{source}: top level must be an object")
    validate_config(cfg)
    return cfg


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    cfg = parse_config(text, str(path))
    cfg.setdefault("_source", str(path))
    return cfg


def validate_config(cfg):
    seed = _require(cfg, "seed", "")
    if not isinstance(seed, int) or isinstance(seed, bool):
        raise ConfigError("'seed' must be an integer")
    if "study" in cfg and "construction" not in cfg:
        study = cfg["study"]
        hl = _require(study, "h_list", "study.")
        if not isinstance(hl, list) or not hl or not all(isinstance(h, (int, float)) and h > 0 for h in hl):
            raise ConfigError("study.h_list must be a nonempty list of positive numbers")
        return
    _require(cfg, "kernel", "")
    lat = _require(cfg, "lattice", "")
    for k in ("h", "universe", "window"):
        _require(lat, k, "lattice.")
    cons = _require(cfg, "construction", "")
    ctype = _require(cons, "type", "construction.")
    if ctype not in _CONSTRUCTIONS:
        raise ConfigError(f"unknown construction type {ctype!r}")
    fol = cfg.get("foliation", {}).get("type", _DEFAULT_FOLIATION[ctype])
    if fol not in _FOLIATIONS[ctype]:
        raise ConfigError(f"foliation {fol!r} is inconsistent with construction {ctype!r}")


def _read_grid_source(cfg, key, base_dir):
    if key + "_grid" in cfg:
        return cfg[key + "_grid"]
    if key + "_file" in cfg:
        import os

        path = cfg[key + "_file"]
        if not os.path.isabs(path) and base_dir:
            path = os.path.join(base_dir, path)
        try:
            with open(path) as fh:
                return fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read {key} file {path}: {exc}") from exc
    return None


def build_scenario(cfg):
    """Materialize a validated config into a :class:`Built` bundle."""
    import os

    for key in ("kernel", "lattice", "construction"):
        _require(cfg, key, "")
    try:
        kernel = kernel_from_dict(cfg["kernel"])
    except Exception as exc:
        raise ConfigError(f"bad kernel: {exc}") from exc
    lc = cfg["lattice"]
    try:
        lat = Lattice.box(float(lc["h"]), lc["universe"], lc["window"])
    except Exception as exc:
        raise ConfigError(f"bad lattice: {exc}") from exc
    wc = cfg.get("weights", {})
    mode = wc.get("mode", MIDPOINT)
    if mode not in (MIDPOINT, CELL_AVERAGED):
        raise ConfigError(f"unknown weight mode {mode!r}")
    try:
        W = build_weights(lat, kernel, mode, reach=wc.get("reach"))
    except Exception as exc:
        raise ConfigError(f"cannot build weights: {exc}") from exc
    cons = cfg["construction"]
    ctype = cons["type"]
    fol = cfg.get("foliation", {}).get("type", _DEFAULT_FOLIATION[ctype])
    rng = np.random.default_rng(cfg["seed"])
    base_dir = os.path.dirname(cfg.get("_source", "")) or None
    info = {}
    try:
        if ctype == "halfspace":
            E, phi = build_halfspace(lat, cons.get("normal", [1.0] if lat.dimension == 1 else [0.0, 1.0]),
                                     float(cons.get("offset", 0.0)))
        elif ctype == "subgraph":
            E, phi = build_subgraph(lat, FunctionSpec.from_dict(cons.get("u")))
        elif ctype == "ball":
            E, phi = build_ball(lat, cons["center"], float(cons["radius"]))
        elif ctype == "bending":
            E, phi = build_bending(lat, float(cons.get("slope", 0.0)), float(cons.get("intercept", 0.0)),
                                   float(cons["bend"]), float(cons.get("center", 0.0)))
        elif ctype == "random":
            E, phi = random_instance(lat, rng, float(cons.get("density", 0.5)))
        elif ctype == "custom":
            grid = _read_grid_source(cons, "set", base_dir)
            if grid is None:
                raise ConfigError("custom construction needs set_grid or set_file")
            E = IndicatorField.from_text(lat, grid)
            phi = None
            if fol == "explicit":
                fgrid = _read_grid_source(cons, "foliation", base_dir)
                if fgrid is None:
                    raise ConfigError("explicit foliation needs foliation_grid or foliation_file")
                phi = LevelField.from_text(lat, fgrid)
        elif ctype == "viscosity_touch":
            lat = q_rho_lattice(lat, cons.get("origin", [0, 0]), float(cons["rho"]))
            W = build_weights(lat, kernel, mode, reach=wc.get("reach"))
            ext = cons.get("exterior", {"type": "halfspace"})
            if ext.get("type") == "halfspace":
                F, _ = build_halfspace(lat, [0.0, 1.0], float(ext.get("offset", 0.0)))
            elif ext.get("type") == "corner":
                s = float(ext["slope"])
                o = lat.local_index(cons.get("origin", [0, 0]))
                x1, x2 = lat.centers()
                F = IndicatorField(lat, (x2 - x2[o]) < s * np.abs(x1 - x1[o]))
            else:
                raise ConfigError(f"unknown viscosity exterior {ext!r}")
            touch = build_viscosity_touch(lat, W, F, FunctionSpec.from_dict(cons.get("u")), float(cons["t0"]),
                                          float(cons["rho"]), cons.get("origin", [0, 0]))
            E, phi = touch.E, touch.phi
            info["viscosity"] = touch
        else:  # pragma: no cover - validated earlier
            raise ConfigError(ctype)
    except ConfigError:
        raise
    except (PreconditionError, KeyError, ValueError, TypeError) as exc:
        raise ConfigError(f"construction {ctype!r} failed: {exc}") from exc
    if fol == "two_valued":
        phi = LevelField.two_valued(E)
    elif fol == "explicit" and ctype != "custom":
        fgrid = _read_grid_source(cfg.get("foliation", {}), "foliation", base_dir)
        if fgrid is None:
            raise ConfigError("explicit foliation needs foliation_grid or foliation_file")
        phi = LevelField.from_text(lat, fgrid)
    perturb = cons.get("perturb", [])
    for cell in perturb:
        E.flip(cell if lat.dimension == 2 else cell[0] if isinstance(cell, list) else cell)
    return Built(lat, W, E.freeze(), phi, info)


def echo(cfg):
    """Config without private bookkeeping keys, for embedding in reports."""
    return {k: v for k, v in cfg.items() if not k.startswith("_")}
