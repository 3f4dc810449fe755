"""Finite cell lattices, binary and level fields, and translation-invariant weights.

All arrays are stored two-dimensionally; a one-dimensional lattice of ``N``
cells uses shape ``(N, 1)``.  Cells are addressed from the outside by their
global multi-index (an ``int`` in 1D, a pair in 2D); the cell with index
``i`` has center ``h * (i + 1/2)``.

Weight tables are truncated to a displacement reach ``R`` (``|d|_inf <= R``).
By default ``R`` is the largest margin separating the window from the edge of
the universe, so every window cell sees a complete point-symmetric
neighborhood of interacting cells.  The truncated kernel is still even and
nonnegative, hence a legitimate kernel in its own right.
"""

from dataclasses import dataclass, field
import warnings

import numpy as np
from scipy import integrate

from .errors import ExteriorFrozenError, PreconditionError
from .kernels import FractionalPower, Exponential, Kernel

MIDPOINT = "midpoint"
CELL_AVERAGED = "cell_averaged"
CUSTOM = "custom"


def _as_ranges(ranges, dimension=None):
    """Normalize ``(lo, hi)`` or ``((lo, hi), (lo, hi))`` to a tuple of inclusive pairs."""
    ranges = tuple(ranges)
    if len(ranges) == 2 and all(np.isscalar(r) for r in ranges):
        ranges = (ranges,)
    out = tuple((int(lo), int(hi)) for lo, hi in ranges)
    if dimension is not None and len(out) != dimension:
        raise PreconditionError(f"expected {dimension} index ranges, got {len(out)}")
    for lo, hi in out:
        if hi < lo:
            raise PreconditionError(f"empty index range ({lo}, {hi})")
    return out


@dataclass(frozen=True, eq=False)
class Lattice:
    """Axis-aligned box of cells with spacing ``h`` and a window mask."""

    h: float
    lo: tuple
    shape: tuple
    window: np.ndarray = field(repr=False)

    def __post_init__(self):
        if len(self.shape) not in (1, 2) or len(self.lo) != len(self.shape):
            raise PreconditionError("lattices have dimension 1 or 2")
        if not self.h > 0:
            raise PreconditionError("spacing must be positive")
        w = np.asarray(self.window, dtype=bool).reshape(self.grid_shape).copy()
        w.setflags(write=False)
        object.__setattr__(self, "window", w)
        object.__setattr__(self, "lo", tuple(int(v) for v in self.lo))
        object.__setattr__(self, "shape", tuple(int(v) for v in self.shape))

    # -- construction -------------------------------------------------------

    @classmethod
    def box(cls, h, universe, window):
        """Universe and window given as inclusive global index ranges per axis."""
        uni = _as_ranges(universe)
        win = _as_ranges(window, len(uni))
        lo = tuple(a for a, _ in uni)
        shape = tuple(b - a + 1 for a, b in uni)
        mask = np.zeros(shape, dtype=bool)
        sl = []
        for (ua, ub), (wa, wb) in zip(uni, win):
            if wa < ua or wb > ub:
                raise PreconditionError("window must lie inside the universe")
            sl.append(slice(wa - ua, wb - ua + 1))
        mask[tuple(sl)] = True
        return cls(float(h), lo, shape, mask)

    @classmethod
    def around_window(cls, h, window, margin):
        """Universe obtained by padding the window box with ``margin`` cells on every side."""
        win = _as_ranges(window)
        margins = (margin,) * len(win) if np.isscalar(margin) else tuple(margin)
        uni = tuple((a - m, b + m) for (a, b), m in zip(win, margins))
        return cls.box(h, uni, win)

    def with_window(self, mask):
        return Lattice(self.h, self.lo, self.shape, np.asarray(mask, dtype=bool).reshape(self.grid_shape))

    # -- geometry -----------------------------------------------------------

    @property
    def dimension(self):
        return len(self.shape)

    @property
    def grid_shape(self):
        return self.shape if self.dimension == 2 else (self.shape[0], 1)

    @property
    def volume(self):
        return self.h**self.dimension

    @property
    def n_window(self):
        return int(self.window.sum())

    @property
    def window_cells(self):
        """Local 2D indices of window cells in row-major order (the bit order of patterns)."""
        return np.argwhere(self.window).astype(np.int64)

    @property
    def all_cells(self):
        return np.argwhere(np.ones(self.grid_shape, dtype=bool)).astype(np.int64)

    def global_index(self, local):
        i, j = int(local[0]), int(local[1])
        if self.dimension == 1:
            return self.lo[0] + i
        return (self.lo[0] + i, self.lo[1] + j)

    def local_index(self, cell):
        idx = (cell,) if np.isscalar(cell) else tuple(cell)
        if len(idx) != self.dimension:
            raise PreconditionError(f"cell {cell!r} does not match dimension {self.dimension}")
        loc = [int(c) - o for c, o in zip(idx, self.lo)]
        for k, n in zip(loc, self.shape):
            if not 0 <= k < n:
                raise PreconditionError(f"cell {cell!r} lies outside the universe")
        return (loc[0], loc[1] if self.dimension == 2 else 0)

    def index_arrays(self):
        """Global index arrays of grid shape, one per axis."""
        axes = [np.arange(n) + o for n, o in zip(self.shape, self.lo)]
        if self.dimension == 1:
            return (axes[0][:, None],)
        return tuple(np.meshgrid(*axes, indexing="ij"))

    def centers(self):
        """Cell-center coordinate arrays of grid shape, one per axis."""
        return tuple(self.h * (a + 0.5) for a in self.index_arrays())

    def window_margin(self):
        """Smallest distance, in cells, from the window to the edge of the universe."""
        if not self.window.any():
            return min(self.shape) - 1
        best = None
        for axis in range(self.dimension):
            occupied = np.flatnonzero(self.window.any(axis=1 - axis) if self.dimension == 2 else self.window[:, 0])
            m = min(occupied[0], self.shape[axis] - 1 - occupied[-1])
            best = m if best is None else min(best, m)
        return int(best)

    def to_dict(self):
        win = self.window_cells
        return {
            "h": self.h,
            "lo": list(self.lo),
            "shape": list(self.shape),
            "window_cells": [list(self.global_index(c)) if self.dimension == 2 else [self.global_index(c)] for c in win],
        }


# --------------------------------------------------------------------------
# fields
# --------------------------------------------------------------------------


def _read_grid(lattice, text, parse):
    rows = [ln.split() if parse is float else list(ln.strip()) for ln in text.strip().splitlines() if ln.strip()]
    n0, n1 = lattice.grid_shape
    if lattice.dimension == 1:
        if len(rows) != 1 or len(rows[0]) != n0:
            raise PreconditionError(f"expected one row of {n0} entries")
        return np.array([parse(t) for t in rows[0]])[:, None]
    if len(rows) != n1 or any(len(r) != n0 for r in rows):
        raise PreconditionError(f"expected {n1} rows of {n0} entries")
    top_down = np.array([[parse(t) for t in r] for r in rows])
    return top_down[::-1].T


def _write_grid(lattice, values, fmt, sep):
    if lattice.dimension == 1:
        return sep.join(fmt(v) for v in values[:, 0]) + "\n"
    return "".join(sep.join(fmt(v) for v in row) + "\n" for row in values.T[::-1])


def _fmt_level(v):
    if v == np.inf:
        return "inf"
    if v == -np.inf:
        return "-inf"
    return repr(float(v))


class IndicatorField:
    """Set membership per universe cell; exterior cells become immutable once frozen."""

    def __init__(self, lattice, values, frozen=False):
        v = np.asarray(values, dtype=bool).reshape(lattice.grid_shape).copy()
        self.lattice = lattice
        self._v = v
        self.frozen = bool(frozen)

    @classmethod
    def empty(cls, lattice):
        return cls(lattice, np.zeros(lattice.grid_shape, dtype=bool))

    @classmethod
    def full(cls, lattice):
        return cls(lattice, np.ones(lattice.grid_shape, dtype=bool))

    @classmethod
    def from_function(cls, lattice, predicate):
        return cls(lattice, predicate(*lattice.centers()))

    @property
    def values(self):
        view = self._v.view()
        view.setflags(write=False)
        return view

    def __getitem__(self, cell):
        return bool(self._v[self.lattice.local_index(cell)])

    def set(self, cell, value):
        loc = self.lattice.local_index(cell)
        if self.frozen and not self.lattice.window[loc]:
            raise ExteriorFrozenError(f"cell {cell!r} is outside the window and frozen")
        self._v[loc] = bool(value)

    def flip(self, cell):
        self.set(cell, not self[cell])

    def freeze(self):
        return IndicatorField(self.lattice, self._v, frozen=True)

    def copy(self):
        return IndicatorField(self.lattice, self._v, frozen=self.frozen)

    def complement(self):
        return IndicatorField(self.lattice, ~self._v, frozen=self.frozen)

    def window_bits(self):
        return self._v[self.lattice.window].copy()

    def window_pattern(self):
        """The window bits packed into an integer, bit ``k`` = ``k``-th window cell."""
        bits = self.window_bits()
        return int(sum(1 << k for k in np.flatnonzero(bits)))

    def with_window(self, pattern):
        """Competitor sharing this exterior, with window cells from ``pattern``."""
        m = self.lattice.n_window
        if isinstance(pattern, (int, np.integer)):
            bits = (int(pattern) >> np.arange(m)) & 1
        else:
            bits = np.asarray(pattern).reshape(-1)
            if bits.size != m:
                raise PreconditionError(f"pattern has {bits.size} bits, window has {m} cells")
        v = self._v.copy()
        v[self.lattice.window] = bits.astype(bool)
        return IndicatorField(self.lattice, v, frozen=self.frozen)

    def same_exterior(self, other):
        ext = ~self.lattice.window
        return bool(np.array_equal(self._v[ext], other._v[ext]))

    def cells(self):
        """Global indices of member cells."""
        return [self.lattice.global_index(c) for c in np.argwhere(self._v)]

    def __eq__(self, other):
        return isinstance(other, IndicatorField) and np.array_equal(self._v, other._v)

    def __repr__(self):
        return f"IndicatorField({self._v.sum()} of {self._v.size} cells, frozen={self.frozen})"

    def to_text(self):
        return _write_grid(self.lattice, self._v, lambda b: "1" if b else "0", "")

    @classmethod
    def from_text(cls, lattice, text):
        def parse(c):
            if c not in "01":
                raise PreconditionError(f"indicator grids hold only 0/1, got {c!r}")
            return c == "1"

        return cls(lattice, _read_grid(lattice, text, parse))


class LevelField:
    """Extended-real values per universe cell."""

    def __init__(self, lattice, values):
        v = np.asarray(values, dtype=float).reshape(lattice.grid_shape).copy()
        if np.isnan(v).any():
            raise PreconditionError("level fields may not contain NaN")
        v.setflags(write=False)
        self.lattice = lattice
        self.values = v

    @classmethod
    def from_function(cls, lattice, fn):
        return cls(lattice, fn(*lattice.centers()))

    @classmethod
    def two_valued(cls, indicator):
        """``1`` on the set and ``-1`` off it."""
        return cls(indicator.lattice, np.where(indicator.values, 1.0, -1.0))

    def __getitem__(self, cell):
        return float(self.values[self.lattice.local_index(cell)])

    def positive_set(self):
        return IndicatorField(self.lattice, self.values > 0)

    def zero_level_count(self):
        return int(np.count_nonzero(self.values[self.lattice.window] == 0))

    def to_text(self):
        return _write_grid(self.lattice, self.values, _fmt_level, " ")

    @classmethod
    def from_text(cls, lattice, text):
        return cls(lattice, _read_grid(lattice, text, float))


def freeze_exterior(field):
    """Copy of ``field`` whose non-window cells can no longer be changed."""
    return field.freeze()


def sign_diff(a, b):
    """``sign(a - b)`` for extended reals with ``inf - inf = 0``."""
    if a == b:
        return 0
    return 1 if a > b else -1


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightTable:
    """Weights indexed by displacement; ``table[R0 + a, R1 + b]`` belongs to ``d = (a, b)``."""

    lattice: Lattice
    table: np.ndarray = field(repr=False)
    kernel: Kernel = None
    mode: str = CUSTOM

    def __post_init__(self):
        t = np.array(self.table, dtype=float)
        if t.ndim == 1:
            t = t[:, None]
        if t.shape[0] % 2 == 0 or t.shape[1] % 2 == 0:
            raise PreconditionError("weight tables have odd extent in each axis")
        if self.lattice.dimension == 1 and t.shape[1] != 1:
            raise PreconditionError("1D lattices need a 1D weight table")
        if np.any(t < 0) or not np.all(np.isfinite(t)):
            raise PreconditionError("weights must be finite and nonnegative")
        if not np.array_equal(t, t[::-1, ::-1]):
            raise PreconditionError("weight table is not even")
        r0, r1 = (t.shape[0] - 1) // 2, (t.shape[1] - 1) // 2
        t[r0, r1] = 0.0
        t.setflags(write=False)
        object.__setattr__(self, "table", t)

    @classmethod
    def from_function(cls, lattice, weight, reach):
        """Custom weights ``weight(d)`` for integer displacements ``d`` with ``|d|_inf <= reach``."""
        r0, r1 = _reach_pair(lattice, reach)
        t = np.zeros((2 * r0 + 1, 2 * r1 + 1))
        for a in range(-r0, r0 + 1):
            for b in range(-r1, r1 + 1):
                if a or b:
                    d = a if lattice.dimension == 1 else (a, b)
                    t[a + r0, b + r1] = weight(d)
        return cls(lattice, t)

    @property
    def reach(self):
        return ((self.table.shape[0] - 1) // 2, (self.table.shape[1] - 1) // 2)

    def weight(self, d):
        a, b = (d, 0) if np.isscalar(d) else (tuple(d) + (0,))[:2]
        r0, r1 = self.reach
        if abs(a) > r0 or abs(b) > r1:
            return 0.0
        return float(self.table[a + r0, b + r1])

    def items(self):
        """Nonzero ``(displacement, weight)`` pairs."""
        r0, r1 = self.reach
        for a, b in np.argwhere(self.table > 0):
            d = (int(a) - r0, int(b) - r1)
            yield (d[0] if self.lattice.dimension == 1 else d), float(self.table[a, b])

    def realized_displacements(self):
        """Boolean mask of table entries whose displacement fits inside the universe."""
        r0, r1 = self.reach
        n0, n1 = self.lattice.grid_shape
        a = np.abs(np.arange(-r0, r0 + 1))[:, None]
        b = np.abs(np.arange(-r1, r1 + 1))[None, :]
        mask = (a < n0) & (b < n1)
        mask[r0, r1] = False
        return mask

    def pair_matrix(self, cells_a, cells_b=None):
        """Dense ``W[x - y]`` for two lists of local cell indices."""
        cells_b = cells_a if cells_b is None else cells_b
        r0, r1 = self.reach
        da = cells_a[:, None, 0] - cells_b[None, :, 0]
        db = cells_a[:, None, 1] - cells_b[None, :, 1]
        ok = (np.abs(da) <= r0) & (np.abs(db) <= r1)
        out = np.zeros(da.shape)
        out[ok] = self.table[da[ok] + r0, db[ok] + r1]
        return out


def _reach_pair(lattice, reach):
    n0, n1 = lattice.grid_shape
    if reach == "full":
        r = (n0 - 1, n1 - 1)
    else:
        if reach is None:
            reach = lattice.window_margin()
        reach = int(reach)
        if reach < 0:
            raise PreconditionError("reach must be nonnegative")
        r = (min(reach, n0 - 1), min(reach, n1 - 1))
    if lattice.dimension == 1:
        r = (r[0], 0)
    return r


def _displacement_grid(r0, r1):
    a = np.arange(-r0, r0 + 1)[:, None] * np.ones((1, 2 * r1 + 1), dtype=np.int64)
    b = np.ones((2 * r0 + 1, 1), dtype=np.int64) * np.arange(-r1, r1 + 1)[None, :]
    return a, b


def _midpoint_table(kernel, h, r0, r1, dimension):
    a, b = _displacement_grid(r0, r1)
    r = h * np.sqrt(a * a + b * b)
    r[r0, r1] = 1.0
    t = kernel.profile(r) * h ** (2 * dimension)
    t[r0, r1] = 0.0
    return t


# Cell-averaged weights.  For cells at integer displacement d the double
# integral over the two cells collapses to a tent-weighted single integral:
#     w(d) = h^(2n) * int_{[-1,1]^n} T(u) K(h (d + u)) du,   T(u) = prod(1 - |u_i|).


def _power_1d_cell_weights(kernel, h, r0):
    a = kernel.alpha
    d = np.arange(-r0, r0 + 1, dtype=float)

    def G(z):
        return -np.abs(z) ** (1.0 - a) / (a * (1.0 - a))

    w = kernel.scale * h ** (1.0 - a) * (G(d + 1) - 2.0 * G(d) + G(d - 1))
    w[r0] = 0.0
    return w[:, None]


def _generic_1d_cell_weight(kernel, h, d):
    pts = [p / h - d for p in kernel._breakpoints()] + [-p / h - d for p in kernel._breakpoints()]
    total = 0.0
    for lo, hi in ((-1.0, 0.0), (0.0, 1.0)):
        inner = sorted(p for p in pts if lo < p < hi)
        f = lambda u: (1.0 - abs(u)) * kernel.profile(h * abs(d + u))
        v, _ = integrate.quad(f, lo, hi, points=inner or None, epsabs=0.0, epsrel=1e-11, limit=400)
        total += v
    return total * h**2


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)


def _gauss_cell_weights_2d(kernel, h, disp):
    """Tensor Gauss-Legendre over the four unit sub-squares, vectorized over displacements."""
    x = 0.5 * (_GL_X + 1.0)
    wq = 0.5 * _GL_W
    out = np.zeros(len(disp))
    for s0 in (-1.0, 1.0):
        for s1 in (-1.0, 1.0):
            u0 = s0 * x[:, None]
            u1 = s1 * x[None, :]
            tent = (1.0 - x[:, None]) * (1.0 - x[None, :]) * wq[:, None] * wq[None, :]
            for k, (a, b) in enumerate(disp):
                r = h * np.hypot(a + u0, b + u1)
                out[k] += np.sum(tent * kernel.profile(r))
    return out * h**4


def _adaptive_cell_weight_2d(kernel, h, a, b):
    """Nested adaptive quadrature; polar coordinates around a singular corner."""
    opts = dict(epsabs=0.0, epsrel=1e-11, limit=200)
    total = 0.0
    for s0 in (-1.0, 1.0):
        for s1 in (-1.0, 1.0):
            # sub-square u in s * [0, 1]^2; the kernel singularity sits at u = -d
            c0, c1 = -a, -b
            singular_corner = kernel.singular and c0 in (0.0, s0) and c1 in (0.0, s1)
            if singular_corner:
                total += _polar_corner(kernel, h, a, b, s0, s1, c0, c1, opts)
                continue
            brk = kernel._breakpoints()

            def inner(u0):
                f = lambda u1: (1.0 - abs(u1)) * kernel.profile(h * np.hypot(a + u0, b + u1))
                lo, hi = sorted((0.0, s1))
                pts = []
                for R in brk:
                    rr = (R / h) ** 2 - (a + u0) ** 2
                    if rr > 0:
                        pts += [p for p in (-b + np.sqrt(rr), -b - np.sqrt(rr)) if lo < p < hi]
                return integrate.quad(f, lo, hi, points=pts or None, **opts)[0]

            lo, hi = sorted((0.0, s0))
            pts = [p for R in brk for p in (R / h - a, -R / h - a, -a) if lo < p < hi]
            v, _ = integrate.quad(lambda u0: (1.0 - abs(u0)) * inner(u0), lo, hi, points=pts or None, **opts)
            total += v
    return total * h**4


def _polar_corner(kernel, h, a, b, s0, s1, c0, c1, opts):
    # sub-square corners are c and its opposite corner o; integrate over the
    # quarter of directions pointing into the square from c
    o0 = s0 if c0 == 0.0 else 0.0
    o1 = s1 if c1 == 0.0 else 0.0
    e0 = 1.0 if o0 > c0 else -1.0
    e1 = 1.0 if o1 > c1 else -1.0
    power = isinstance(kernel, FractionalPower) and kernel.dimension == 2

    def radial(theta):
        ct, st = np.cos(theta), np.sin(theta)
        rmax = min(1.0 / ct if ct > 1e-300 else np.inf, 1.0 / st if st > 1e-300 else np.inf)

        def tent(rho):
            u0 = c0 + e0 * rho * ct
            u1 = c1 + e1 * rho * st
            return (1.0 - abs(u0)) * (1.0 - abs(u1))

        if power:
            # K(h rho) rho = scale h^(-2-alpha) rho^(-1-alpha).  At least one tent
            # factor vanishes linearly at the corner, so tent / rho is a polynomial
            # and QUADPACK's algebraic weight carries rho^(-alpha).
            def tent_over_rho(rho):
                f0 = ct if abs(c0) == 1.0 else 1.0 - abs(c0 + e0 * rho * ct)
                f1 = st if abs(c1) == 1.0 else 1.0 - abs(c1 + e1 * rho * st)
                return f0 * f1 * (rho if abs(c0) == 1.0 and abs(c1) == 1.0 else 1.0)

            c = kernel.scale * h ** (-2.0 - kernel.alpha)
            return c * integrate.quad(tent_over_rho, 0.0, rmax, weight="alg", wvar=(-kernel.alpha, 0.0))[0]
        return integrate.quad(lambda rho: tent(rho) * kernel.profile(h * rho) * rho, 0.0, rmax, **opts)[0]

    v, _ = integrate.quad(radial, 0.0, np.pi / 2, points=[np.pi / 4], **opts)
    return v


def _cell_averaged_table(kernel, h, r0, r1, dimension):
    if dimension == 1:
        if isinstance(kernel, FractionalPower):
            return _power_1d_cell_weights(kernel, h, r0)
        t = np.zeros((2 * r0 + 1, 1))
        for d in range(1, r0 + 1):
            t[r0 + d, 0] = t[r0 - d, 0] = _generic_1d_cell_weight(kernel, h, d)
        return t
    t = np.zeros((2 * r0 + 1, 2 * r1 + 1))
    smooth = isinstance(kernel, (FractionalPower, Exponential))
    reps = sorted({(max(abs(a), abs(b)), min(abs(a), abs(b))) for a in range(-r0, r0 + 1) for b in range(-r1, r1 + 1)})
    reps = [d for d in reps if d != (0, 0)]
    far = [d for d in reps if smooth and d[0] >= 3]
    near = [d for d in reps if not (smooth and d[0] >= 3)]
    values = dict(zip(far, _gauss_cell_weights_2d(kernel, h, far))) if far else {}
    for a, b in near:
        values[(a, b)] = _adaptive_cell_weight_2d(kernel, h, float(a), float(b))
    for a in range(-r0, r0 + 1):
        for b in range(-r1, r1 + 1):
            if a or b:
                t[a + r0, b + r1] = values[(max(abs(a), abs(b)), min(abs(a), abs(b)))]
    return t


def build_weights(lattice, kernel, mode=MIDPOINT, reach=None):
    """Translation-invariant weight table for ``kernel`` on ``lattice``.

    ``reach`` is ``None`` (largest window margin), ``"full"`` (every
    displacement realized in the universe) or an integer.
    """
    if kernel.dimension != lattice.dimension:
        raise PreconditionError("kernel and lattice dimensions differ")
    r0, r1 = _reach_pair(lattice, reach)
    if reach is None and r0 == 0 and lattice.window.any() and lattice.n_window < lattice.window.size:
        warnings.warn("window touches the universe edge; the default reach is 0 and all weights vanish", stacklevel=2)
    if mode == MIDPOINT:
        t = _midpoint_table(kernel, lattice.h, r0, r1, lattice.dimension)
    elif mode == CELL_AVERAGED:
        t = _cell_averaged_table(kernel, lattice.h, r0, r1, lattice.dimension)
    else:
        raise PreconditionError(f"unknown quadrature mode {mode!r}")
    # enforce exact evenness against rounding in the quadrature routes
    t = 0.5 * (t + t[::-1, ::-1])
    return WeightTable(lattice, t, kernel, mode)
