"""Calibration functional of a foliation, minimality certificates and exact identities.

A foliation is a :class:`~nlcalib.lattice.LevelField` ``phi`` whose positive
set is the candidate ``E``.  The calibration of a competitor ``F`` pairs the
sign of ``phi(x) - phi(y)`` with the jump of ``1_F``.  Because
``|a| >= s * a`` for ``s`` in ``{-1, 0, 1}``, the calibration never exceeds the
perimeter, and it equals the perimeter at ``F = E``.  Its value for ``F``
only depends on ``F`` through the level curvatures of ``phi`` on ``F``,
which turns sign conditions on those curvatures into minimality of ``E``.
"""

from dataclasses import dataclass, field
import json

import numpy as np

from . import _hot
from .errors import FoliationMismatchError, PreconditionError
from .functionals import nmc_level_many, perimeter
from .lattice import IndicatorField, LevelField

TWO_SIDED = "TwoSided"
ONE_SIDED_INSIDE = "OneSidedInside"
ONE_SIDED_OUTSIDE = "OneSidedOutside"
FAIL = "Fail"


class VerificationError(AssertionError):
    """An identity or inequality that must hold exactly was found violated."""


def calibration_pairform(F, phi, W):
    """Half the ordered-pair sum of ``sign(phi(x) - phi(y)) (1_F(x) - 1_F(y)) W[x - y]``."""
    f = F.values.astype(float)
    return float(_hot.pair_sign_sum(f, phi.values, W.lattice.window, W.table))


def _check_exterior(F, E):
    win = F.lattice.window
    bad = np.argwhere((F.values != E.values) & ~win)
    if bad.size:
        cells = [F.lattice.global_index(c) for c in bad]
        raise PreconditionError(f"competitor and foliated set differ outside the window at {cells[:10]}")


class Calibration:
    """Curvature form of the calibration for a fixed foliation, with cached pieces.

    The boundary term (exterior part of the positive set against the window)
    does not depend on the competitor and is computed once.  Window curvatures
    are computed lazily, only for cells a competitor actually occupies.
    """

    def __init__(self, phi, W):
        self.phi = phi
        self.W = W
        self.E = phi.positive_set()
        lat = W.lattice
        ext_e = self.E.values & ~lat.window
        self.boundary_term = float(_hot.masked_sign_sum(ext_e, lat.window, phi.values, W.table))
        self._curv = None

    @property
    def window_curvatures(self):
        if self._curv is None:
            self._curv = nmc_level_many(self.phi, self.W)
        return self._curv

    def __call__(self, F):
        _check_exterior(F, self.E)
        lat = self.W.lattice
        inside = F.values[lat.window]
        if not inside.any():
            return self.boundary_term
        if self._curv is None:
            cells = lat.window_cells[inside]
            curv = nmc_level_many(self.phi, self.W, cells)
            return float(np.sum(curv) * lat.volume + self.boundary_term)
        return float(np.sum(self._curv[inside]) * lat.volume + self.boundary_term)


def calibration_curvform(F, phi, W, cache=None):
    """Calibration of ``F`` through level curvatures of ``phi`` on ``F`` plus a fixed boundary term."""
    cal = cache if cache is not None else Calibration(phi, W)
    return cal(F)


@dataclass
class FoliationCertificate:
    status: str
    violations: list
    curvature_bound: float
    zero_level_measure: int
    null_lagrangian: bool
    sign_tolerance: float
    curvatures: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)

    @property
    def minimality_guaranteed(self):
        return self.status == TWO_SIDED

    def to_dict(self):
        return {
            "status": self.status,
            "violations": self.violations,
            "curvature_bound": self.curvature_bound,
            "zero_level_measure": self.zero_level_measure,
            "null_lagrangian": self.null_lagrangian,
            "sign_tolerance": self.sign_tolerance,
            "curvatures": self.curvatures,
            "hypotheses": self.hypotheses,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _cell_key(lattice, local):
    g = lattice.global_index(local)
    return g if lattice.dimension == 1 else list(g)


def certify(E, phi, W, sign_tolerance=0.0):
    """Check the sign conditions of the level curvatures of ``phi`` on the window.

    ``TwoSided``: curvature ``<= tol`` on ``E`` and ``>= -tol`` off ``E``, which
    makes ``E`` a perimeter minimizer among competitors with its exterior.
    ``OneSidedInside`` / ``OneSidedOutside``: only the inside / outside half holds.
    """
    lat = W.lattice
    mismatch = np.argwhere((phi.values > 0) != E.values)
    if mismatch.size:
        cells = [lat.global_index(c) for c in mismatch]
        raise FoliationMismatchError(f"positive set of the foliation differs from E at {cells[:20]}", cells)
    curv = nmc_level_many(phi, W)
    cells = lat.window_cells
    in_e = E.values[cells[:, 0], cells[:, 1]]
    bad_in = in_e & (curv > sign_tolerance)
    bad_out = ~in_e & (curv < -sign_tolerance)
    if not bad_in.any() and not bad_out.any():
        status = TWO_SIDED
    elif not bad_in.any():
        status = ONE_SIDED_INSIDE
    elif not bad_out.any():
        status = ONE_SIDED_OUTSIDE
    else:
        status = FAIL
    violations = []
    for k in np.flatnonzero(bad_in | bad_out):
        violations.append(
            {"cell": _cell_key(lat, cells[k]), "curvature": float(curv[k]), "required": "<=0" if in_e[k] else ">=0"}
        )
    return FoliationCertificate(
        status=status,
        violations=violations,
        curvature_bound=float(curv.max()) if curv.size else 0.0,
        zero_level_measure=phi.zero_level_count(),
        null_lagrangian=bool(np.all(np.abs(curv) <= sign_tolerance)),
        sign_tolerance=float(sign_tolerance),
        curvatures=[[_cell_key(lat, c), float(v)] for c, v in zip(cells, curv)],
    )


def _level_witnesses(E, phi, W):
    """Window cells lacking an exterior cell that pins their level to the exterior datum.

    A window cell ``x`` with ``phi(x) < 0`` needs an exterior ``y`` outside ``E``
    with ``W[x - y] > 0`` and ``phi(x) <= phi(y) < 0``; a cell with
    ``phi(x) > 0`` needs an exterior ``y`` in ``E`` with ``0 < phi(y) <= phi(x)``.
    Any equal-perimeter competitor must be monotone in ``phi`` across every
    interacting pair, and such a witness forbids flipping ``x``.
    """
    lat = W.lattice
    ext = np.argwhere(~lat.window)
    win = lat.window_cells
    if ext.size == 0:
        return [_cell_key(lat, c) for c in win]
    wmat = W.pair_matrix(win, ext)
    pw = phi.values[win[:, 0], win[:, 1]]
    pe = phi.values[ext[:, 0], ext[:, 1]]
    ee = E.values[ext[:, 0], ext[:, 1]]
    missing = []
    for k, x in enumerate(win):
        linked = wmat[k] > 0
        if pw[k] < 0:
            ok = np.any(linked & ~ee & (pe >= pw[k]) & (pe < 0))
        elif pw[k] > 0:
            ok = np.any(linked & ee & (pe <= pw[k]) & (pe > 0))
        else:
            ok = False
        if not ok:
            missing.append(_cell_key(lat, x))
    return missing


def check_uniqueness_hypotheses(E, phi, W, certificate=None):
    """Whether ``E`` is certified as the unique minimizer; returns ``(ok, report)``."""
    cert = certificate if certificate is not None else certify(E, phi, W)
    lat = W.lattice
    realized = W.realized_displacements()
    kernel_positive = bool(np.all(W.table[realized] > 0))
    zero_level = phi.zero_level_count()
    ext = ~lat.window
    e_out = bool(np.any(E.values & ext))
    ec_out = bool(np.any(~E.values & ext))
    missing = _level_witnesses(E, phi, W)
    report = {
        "two_sided": cert.status == TWO_SIDED,
        "kernel_positive": kernel_positive,
        "zero_level_cells": zero_level,
        "exterior_has_set": e_out,
        "exterior_has_complement": ec_out,
        "cells_without_level_witness": missing,
    }
    ok = report["two_sided"] and kernel_positive and zero_level == 0 and e_out and ec_out and not missing
    report["unique"] = bool(ok)
    cert.hypotheses = report
    return bool(ok), report


def one_sided_deficit(E, F, phi, W):
    """``perimeter(F) - perimeter(E)`` for ``F`` inside ``E`` with the same exterior.

    Raises :class:`VerificationError` if ``phi`` has strictly negative level
    curvature on all of ``E`` in the window, ``F`` differs from ``E`` and the
    deficit is not strictly positive.
    """
    _check_exterior(F, E)
    if np.any(F.values & ~E.values):
        raise PreconditionError("one-sided deficit needs F contained in E")
    deficit = perimeter(F, W) - perimeter(E, W)
    lat = W.lattice
    inside = E.values & lat.window
    if inside.any() and not np.array_equal(F.values, E.values):
        curv = nmc_level_many(phi, W, np.argwhere(inside))
        if np.all(curv < 0) and not deficit > 0:
            raise VerificationError(f"strict inside curvature but deficit {deficit!r} is not positive")
    return float(deficit)


def assemble_ordered_foliation(E, F, interior):
    """Foliation equal to ``+inf`` on ``F``, ``interior`` on ``E \\ F`` and ``-inf`` off ``E``."""
    vals = interior.values if isinstance(interior, LevelField) else np.asarray(interior, dtype=float)
    vals = np.broadcast_to(vals, E.lattice.grid_shape)
    band = E.values & ~F.values
    if not np.all(np.isfinite(vals[band])):
        raise PreconditionError("the foliation must be finite between the two ordered sets")
    out = np.where(F.values, np.inf, np.where(E.values, vals, -np.inf))
    return LevelField(E.lattice, out)


def ordered_identity(E, F, interior, W):
    """``(perimeter(E) - perimeter(F), sum over E \\ F of level curvature * h^n)``.

    ``F`` must lie inside ``E`` with the same exterior; the level field is
    assembled by :func:`assemble_ordered_foliation`.  The two numbers agree
    exactly on a lattice.
    """
    if np.any(F.values & ~E.values):
        raise PreconditionError("ordered identity needs F contained in E")
    _check_exterior(F, E)
    phi = assemble_ordered_foliation(E, F, interior)
    band = np.argwhere(E.values & ~F.values)
    lhs = perimeter(E, W) - perimeter(F, W)
    rhs = float(np.sum(nmc_level_many(phi, W, band)) * W.lattice.volume) if band.size else 0.0
    return float(lhs), rhs
