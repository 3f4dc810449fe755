"""Interaction functional, nonlocal perimeter and nonlocal mean curvatures on a lattice.

Curvatures are densities: lattice sums divided by the cell volume ``h^n``.
Truncation radii ``eps`` and cutoffs ``rcut`` are in physical units and act
on center-to-center distances.
"""

from dataclasses import dataclass, field
import csv
import io

import numpy as np

from . import _hot
from .errors import PreconditionError
from .lattice import IndicatorField, LevelField

_SLACK = 1e-12


def _mask(lattice, obj):
    if isinstance(obj, IndicatorField):
        return obj.values
    m = np.asarray(obj, dtype=bool)
    return m.reshape(lattice.grid_shape)


def _cells(lattice, cells):
    """Global cell indices (one or many) to an ``(k, 2)`` array of local indices."""
    if cells is None:
        return lattice.window_cells
    if isinstance(cells, np.ndarray) and cells.ndim == 2 and cells.shape[1] == 2 and cells.dtype.kind == "i":
        return cells
    if np.isscalar(cells) or (lattice.dimension == 2 and len(cells) == 2 and np.isscalar(cells[0])):
        cells = [cells]
    return np.array([lattice.local_index(c) for c in cells], dtype=np.int64).reshape(-1, 2)


def _radii(lattice, eps, rcut):
    h = lattice.h
    eps2 = 0.0 if eps is None else (eps / h) ** 2 * (1.0 - _SLACK)
    rcut2 = np.inf if rcut is None else (rcut / h) ** 2 * (1.0 + _SLACK)
    return eps2, rcut2


def interaction(A, B, W):
    """``sum_{a in A} sum_{b in B} W[a - b]`` for disjoint cell sets."""
    lat = W.lattice
    a, b = _mask(lat, A), _mask(lat, B)
    if np.any(a & b):
        raise PreconditionError("interaction needs disjoint cell sets")
    return float(_hot.interaction_sum(a, b, W.table))


def perimeter(E, W):
    """Nonlocal perimeter inside the window: interactions across the set boundary touching the window."""
    win = W.lattice.window
    e = E.values
    inside, outside = e & win, ~e & win
    return (
        interaction(inside, outside, W)
        + interaction(inside, ~e & ~win, W)
        + interaction(outside, e & ~win, W)
    )


def perimeter_pairform(E, W):
    """Half the ordered-pair sum of ``|1_E(x) - 1_E(y)| W[x - y]`` over pairs not both exterior."""
    f = E.values.astype(float)
    return float(_hot.pair_abs_sum(f, W.lattice.window, W.table))


def nmc_set_many(E, W, cells=None, eps=None, rcut=None):
    """Curvature density of ``E`` at several cells (window cells by default)."""
    lat = W.lattice
    v = np.where(E.values, -1.0, 1.0)
    eps2, rcut2 = _radii(lat, eps, rcut)
    return np.asarray(_hot.set_sums(_cells(lat, cells), v, W.table, eps2, rcut2)) / lat.volume


def nmc_set(E, x, W, eps=None, rcut=None):
    """Nonlocal mean curvature density of ``E`` at cell ``x``: weighted count of ``E^c`` minus ``E``."""
    return float(nmc_set_many(E, W, [x] if not isinstance(x, np.ndarray) else x, eps, rcut)[0])


def nmc_level_many(phi, W, cells=None, eps=None, rcut=None):
    """Level-set curvature density of ``phi`` at several cells (window cells by default)."""
    lat = W.lattice
    loc = _cells(lat, cells)
    vals = phi.values[loc[:, 0], loc[:, 1]]
    if not np.all(np.isfinite(vals)):
        bad = [lat.global_index(c) for c in loc[~np.isfinite(vals)]]
        raise PreconditionError(f"level curvature needs finite values at the evaluation cells; infinite at {bad}")
    eps2, rcut2 = _radii(lat, eps, rcut)
    return np.asarray(_hot.level_sums(loc, phi.values, W.table, eps2, rcut2)) / lat.volume


def nmc_level(phi, x, W, eps=None, rcut=None):
    """``sum_y sign(phi(x) - phi(y)) W[x - y] / h^n``."""
    return float(nmc_level_many(phi, W, [x], eps, rcut)[0])


@dataclass
class PrincipalValueResult:
    values: list
    extrapolated: object
    converged: bool
    limsup: float
    tolerance: float = field(default=1e-6)

    def to_dict(self):
        return {
            "values": [[e, v] for e, v in self.values],
            "extrapolated": self.extrapolated,
            "converged": self.converged,
            "limsup": self.limsup,
            "tolerance": self.tolerance,
        }


def default_schedule(h, levels=7):
    return [h * 2.0 ** (levels - 1 - k) for k in range(levels)]


def nmc_principal_value(target, x, W, schedule=None, pv_tolerance=1e-6, order=None):
    """Truncated curvatures along a decreasing ``eps`` schedule, with a limit estimate.

    Converged when the last two values agree within ``pv_tolerance``; otherwise
    the last three values are extrapolated geometrically (Aitken, or a fixed
    algebraic ``order`` in ``eps``) when their differences contract, and the
    limit is reported as ``"divergent"`` when they do not.
    """
    h = W.lattice.h
    schedule = default_schedule(h) if schedule is None else [float(e) for e in schedule]
    if any(b >= a for a, b in zip(schedule[:-1], schedule[1:])):
        raise PreconditionError("eps schedule must be strictly decreasing")
    if min(schedule) < h * (1.0 - _SLACK):
        raise PreconditionError("eps schedule must stay at or above the lattice spacing")
    if isinstance(target, LevelField):
        fn = lambda e: nmc_level(target, x, W, eps=e)
    else:
        fn = lambda e: nmc_set(target, x, W, eps=e)
    vals = [fn(e) for e in schedule]
    tail = vals[len(vals) // 2 :]
    limsup = float(max(tail))
    converged = len(vals) >= 2 and abs(vals[-1] - vals[-2]) <= pv_tolerance
    if converged or len(vals) == 1:
        extrapolated = vals[-1]
    elif len(vals) >= 3:
        d1, d2 = vals[-2] - vals[-3], vals[-1] - vals[-2]
        if order is not None:
            r = (schedule[-1] / schedule[-2]) ** order
        else:
            r = d2 / d1 if d1 != 0 else np.inf
        extrapolated = vals[-1] + d2 * r / (1.0 - r) if 0.0 < r < 1.0 else "divergent"
    else:
        extrapolated = "divergent"
    return PrincipalValueResult(list(zip(schedule, vals)), extrapolated, bool(converged), limsup, pv_tolerance)


def curvature_csv(lattice, results):
    """CSV with one row per cell: index, truncated values per ``eps``, limit estimate.

    ``results`` maps global cell indices to :class:`PrincipalValueResult`.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    items = list(results.items())
    eps = [e for e, _ in items[0][1].values] if items else []
    axes = ["i"] if lattice.dimension == 1 else ["i", "j"]
    writer.writerow(axes + [f"eps={e:.6g}" for e in eps] + ["extrapolated", "converged", "limsup"])
    for cell, res in items:
        idx = [cell] if lattice.dimension == 1 else list(cell)
        writer.writerow(idx + [repr(v) for _, v in res.values] + [res.extrapolated, int(res.converged), repr(res.limsup)])
    return buf.getvalue()
