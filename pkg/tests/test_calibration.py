import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlcalib import (
    FAIL,
    ONE_SIDED_INSIDE,
    ONE_SIDED_OUTSIDE,
    TWO_SIDED,
    Calibration,
    Exponential,
    FoliationMismatchError,
    FractionalPower,
    IndicatorField,
    Lattice,
    LevelField,
    PreconditionError,
    VerificationError,
    assemble_ordered_foliation,
    build_weights,
    calibration_curvform,
    calibration_pairform,
    certify,
    check_uniqueness_hypotheses,
    enumerate_minimizers,
    one_sided_deficit,
    ordered_identity,
    perimeter,
)
from nlcalib.scenarios import build_bending, build_halfspace, build_subgraph, random_instance

LAT = Lattice.box(0.5, ((-6, 5), (-6, 5)), ((-2, 1), (-2, 1)))
W = build_weights(LAT, FractionalPower(0.5, dimension=2))
WE = build_weights(LAT, Exponential(0.7, dimension=2))

seeds = st.integers(0, 10**6)


def rel(a, b):
    s = max(abs(a), abs(b))
    return abs(a - b) / s if s else 0.0


@given(seeds)
def test_pair_and_curvature_forms_agree(seed):
    rng = np.random.default_rng(seed)
    E, phi = random_instance(LAT, rng)
    cal = Calibration(phi, WE)
    for _ in range(5):
        F = E.with_window(rng.random(LAT.n_window) < 0.5)
        assert rel(calibration_pairform(F, phi, WE), cal(F)) <= 1e-12


@given(seeds)
def test_lazy_and_eager_curvatures_agree(seed):
    rng = np.random.default_rng(seed)
    E, phi = random_instance(LAT, rng)
    F = E.with_window(rng.random(LAT.n_window) < 0.5)
    lazy = calibration_curvform(F, phi, W)
    cal = Calibration(phi, W)
    cal.window_curvatures
    assert rel(lazy, cal(F)) <= 1e-13


@given(seeds)
def test_calibration_below_perimeter_with_equality_at_E(seed):
    rng = np.random.default_rng(seed)
    E, phi = random_instance(LAT, rng)
    p = perimeter(E, W)
    assert rel(calibration_pairform(E, phi, W), p) <= 1e-12
    for _ in range(5):
        F = E.with_window(rng.random(LAT.n_window) < 0.5)
        pf = perimeter(F, W)
        assert pf >= calibration_pairform(F, phi, W) - 1e-12 * max(1.0, pf)


def test_calibration_rejects_other_exterior():
    E, phi = random_instance(LAT, np.random.default_rng(1))
    G = E.complement()
    with pytest.raises(PreconditionError):
        Calibration(phi, W)(G)


def test_empty_competitor_is_boundary_term():
    E, phi = random_instance(LAT, np.random.default_rng(2))
    cal = Calibration(phi, W)
    F = E.with_window(0)
    assert cal(F) == cal.boundary_term
    assert rel(calibration_pairform(F, phi, W), cal.boundary_term) <= 1e-12


def test_halfspace_is_null_lagrangian():
    E, phi = build_halfspace(LAT, (0.0, 1.0), 0.0)
    cert = certify(E, phi, W)
    assert cert.status == TWO_SIDED and cert.null_lagrangian and cert.curvature_bound == 0.0
    vals = [calibration_pairform(E.with_window(p), phi, W) for p in range(0, 1 << 16, 997)]
    assert max(vals) - min(vals) <= 1e-12 * abs(vals[0])


def test_bending_two_sided_with_strict_cells():
    E, phi = build_bending(LAT, 0.3, 0.1, 0.02, 0.0)
    cert = certify(E, phi, W)
    assert cert.status == TWO_SIDED and not cert.null_lagrangian
    curv = dict((tuple(c), v) for c, v in cert.curvatures)
    assert any(v != 0 for v in curv.values())


def test_convex_and_concave_subgraphs():
    E, phi = build_subgraph(LAT, lambda x: 0.1 * x * x)
    cert = certify(E, phi, W)
    assert cert.status == ONE_SIDED_INSIDE
    assert all(v["required"] == ">=0" for v in cert.violations)
    E, phi = build_subgraph(LAT, lambda x: -0.1 * x * x)
    assert certify(E, phi, W).status == ONE_SIDED_OUTSIDE


def test_fail_status_and_tolerance():
    E, phi = random_instance(LAT, np.random.default_rng(4))
    cert = certify(E, phi, W)
    assert cert.status == FAIL and cert.violations
    bound = max(abs(v["curvature"]) for v in cert.violations)
    assert certify(E, phi, W, sign_tolerance=bound).status == TWO_SIDED


def test_mismatched_foliation_is_reported():
    E, phi = build_halfspace(LAT, (0.0, 1.0), 0.0)
    F = E.copy()
    F.flip((0, 0))
    with pytest.raises(FoliationMismatchError) as err:
        certify(F, phi, W)
    assert err.value.cells == [(0, 0)]


def test_certificate_json():
    E, phi = build_bending(LAT, 0.3, 0.1, 0.02, 0.0)
    cert = certify(E, phi, W)
    check_uniqueness_hypotheses(E, phi, W, cert)
    d = json.loads(cert.to_json())
    assert d["status"] == TWO_SIDED and "unique" in d["hypotheses"]
    assert len(d["curvatures"]) == LAT.n_window


def test_uniqueness_2d_halfspace():
    E, phi = build_halfspace(LAT, (0.0, 1.0), 0.0)
    ok, report = check_uniqueness_hypotheses(E, phi, W)
    assert ok and report["kernel_positive"] and report["zero_level_cells"] == 0
    res = enumerate_minimizers(E, W)
    assert res.minimizers == [E.window_pattern()]


def test_uniqueness_1d_halfspace_fails_and_ties_exist():
    # in 1D every monotone filling of the window ties with the halfspace
    lat = Lattice.box(1.0, (-8, 7), (-4, 3))
    W1 = build_weights(lat, FractionalPower(0.5, dimension=1))
    E, phi = build_halfspace(lat, (1.0,), 0.0)
    ok, report = check_uniqueness_hypotheses(E, phi, W1)
    assert not ok and report["cells_without_level_witness"]
    assert report["kernel_positive"] and report["exterior_has_set"] and report["exterior_has_complement"]
    res = enumerate_minimizers(E, W1)
    assert len(res.minimizers) == lat.n_window + 1


def test_uniqueness_needs_nonzero_levels():
    E, phi = build_halfspace(LAT, (0.0, 1.0), 0.0)
    vals = phi.values.copy()
    vals[LAT.local_index((0, -1))] = 0.0
    phi0 = LevelField(LAT, vals)
    E0 = phi0.positive_set()
    ok, report = check_uniqueness_hypotheses(E0, phi0, W)
    assert not ok and report["zero_level_cells"] == 1


def test_uniqueness_needs_positive_kernel():
    from nlcalib import CompactSupport

    Wc = build_weights(LAT, CompactSupport(0.6, dimension=2))
    E, phi = build_halfspace(LAT, (0.0, 1.0), 0.0)
    ok, report = check_uniqueness_hypotheses(E, phi, Wc)
    assert not ok and not report["kernel_positive"]


def test_one_sided_deficit_strict():
    E, phi = build_subgraph(LAT, lambda x: 0.1 * x * x + 0.2)
    cert = certify(E, phi, W)
    inside = [v for c, v in cert.curvatures if E[tuple(c)]]
    assert inside and max(inside) < 0
    bits = E.window_bits()
    idx = np.flatnonzero(bits)
    rng = np.random.default_rng(0)
    for _ in range(20):
        drop = bits.copy()
        drop[idx[rng.random(idx.size) < 0.5]] = False
        if np.array_equal(drop, bits):
            continue
        assert one_sided_deficit(E, E.with_window(drop), phi, W) > 0
    assert one_sided_deficit(E, E, phi, W) == 0.0
    with pytest.raises(PreconditionError):
        one_sided_deficit(E, E.with_window(~bits), phi, W)


def test_one_sided_deficit_guard(monkeypatch):
    # the guard only fires if the perimeter disagrees with the curvature signs
    import nlcalib.calibration as cal

    E, phi = build_subgraph(LAT, lambda x: 0.1 * x * x + 0.2)
    F = E.with_window(0)
    monkeypatch.setattr(cal, "perimeter", lambda S, W: 0.0)
    with pytest.raises(VerificationError):
        one_sided_deficit(E, F, phi, W)


@given(seeds)
def test_ordered_identity_exact(seed):
    rng = np.random.default_rng(seed)
    e = rng.random(LAT.grid_shape) < 0.5
    E = IndicatorField(LAT, e)
    F = E.with_window(E.window_bits() & (rng.random(LAT.n_window) < 0.5))
    interior = rng.standard_normal(LAT.grid_shape)
    lhs, rhs = ordered_identity(E, F, interior, W)
    assert rel(lhs, rhs) <= 1e-12 or abs(lhs - rhs) <= 1e-13


def test_ordered_identity_with_ties():
    E, _ = build_halfspace(LAT, (0.0, 1.0), 0.5)
    F = E.with_window(0)
    lhs, rhs = ordered_identity(E, F, np.zeros(LAT.grid_shape), W)
    assert rel(lhs, rhs) <= 1e-12


def test_assemble_ordered_foliation():
    E, _ = build_halfspace(LAT, (0.0, 1.0), 0.5)
    F = E.with_window(0)
    phi = assemble_ordered_foliation(E, F, np.ones(LAT.grid_shape))
    assert np.all(phi.values[F.values] == np.inf)
    assert np.all(phi.values[~E.values] == -np.inf)
    with pytest.raises(PreconditionError):
        assemble_ordered_foliation(E, F, np.full(LAT.grid_shape, np.inf))
    with pytest.raises(PreconditionError):
        ordered_identity(F, E, np.zeros(LAT.grid_shape), W)
