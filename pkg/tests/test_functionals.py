import numpy as np
import pytest
from hypothesis import given, strategies as st

from nlcalib import (
    Exponential,
    FractionalPower,
    IndicatorField,
    Lattice,
    LevelField,
    PreconditionError,
    build_weights,
    interaction,
    nmc_level,
    nmc_level_many,
    nmc_principal_value,
    nmc_set,
    nmc_set_many,
    perimeter,
    perimeter_pairform,
)
from nlcalib.functionals import curvature_csv, default_schedule

LAT2 = Lattice.box(0.5, ((-5, 4), (-5, 4)), ((-2, 1), (-2, 1)))
W2 = build_weights(LAT2, Exponential(0.7, dimension=2))
LAT1 = Lattice.box(1.0, (-10, 9), (-3, 3))
W1 = build_weights(LAT1, FractionalPower(0.5, dimension=1))


def brute_perimeter(E, W):
    lat = W.lattice
    cells = lat.all_cells
    f = E.values[cells[:, 0], cells[:, 1]].astype(float)
    win = lat.window[cells[:, 0], cells[:, 1]]
    total = 0.0
    for i in range(len(cells)):
        for j in range(len(cells)):
            if win[i] or win[j]:
                total += abs(f[i] - f[j]) * W.weight(tuple(cells[i] - cells[j]))
    return 0.5 * total


def random_set(lat, seed, density=0.5):
    return IndicatorField(lat, np.random.default_rng(seed).random(lat.grid_shape) < density)


seeds = st.integers(0, 10**6)


def test_interaction_disjoint_and_symmetric():
    A = random_set(LAT2, 1)
    B = IndicatorField(LAT2, ~A.values & (np.random.default_rng(2).random(LAT2.grid_shape) < 0.5))
    assert interaction(A, B, W2) == pytest.approx(interaction(B, A, W2), rel=1e-14)
    with pytest.raises(PreconditionError):
        interaction(A, A, W2)


def test_interaction_frozen_1d():
    lat = Lattice.box(1.0, (0, 9), (4, 5))
    W = build_weights(lat, FractionalPower(0.5, dimension=1), reach=3)
    a = np.zeros((10, 1), bool)
    b = np.zeros((10, 1), bool)
    a[2], b[4], b[6] = True, True, True
    # distances 2 and 4; 4 is beyond the reach
    assert interaction(a, b, W) == pytest.approx(2.0**-1.5, rel=1e-15)


@pytest.mark.parametrize("seed", range(4))
def test_perimeter_matches_pair_loop(seed):
    E = random_set(LAT2, seed)
    assert perimeter(E, W2) == pytest.approx(brute_perimeter(E, W2), rel=1e-12)
    E1 = random_set(LAT1, seed)
    assert perimeter(E1, W1) == pytest.approx(brute_perimeter(E1, W1), rel=1e-12)


@given(seeds)
def test_perimeter_pairform_agrees(seed):
    E = random_set(LAT2, seed, density=np.random.default_rng(seed).random())
    p = perimeter(E, W2)
    assert perimeter_pairform(E, W2) == pytest.approx(p, rel=1e-12, abs=1e-14)


@given(seeds)
def test_perimeter_complement_invariant(seed):
    E = random_set(LAT2, seed)
    assert perimeter(E.complement(), W2) == pytest.approx(perimeter(E, W2), rel=1e-12)


@given(seeds)
def test_perimeter_submodular(seed):
    E = random_set(LAT2, seed)
    F = random_set(LAT2, seed + 1)
    U = IndicatorField(LAT2, E.values | F.values)
    I = IndicatorField(LAT2, E.values & F.values)
    lhs = perimeter(U, W2) + perimeter(I, W2)
    assert lhs <= perimeter(E, W2) + perimeter(F, W2) + 1e-12 * lhs


def test_perimeter_of_trivial_sets():
    assert perimeter(IndicatorField.empty(LAT2), W2) == 0.0
    assert perimeter(IndicatorField.full(LAT2), W2) == 0.0


def test_perimeter_translation_invariant():
    lat = Lattice.box(1.0, ((-10, 9), (-10, 9)), ((-10, 9), (-10, 9)))
    W = build_weights(lat, FractionalPower(0.5, dimension=2), reach=4)
    x1, x2 = lat.index_arrays()
    E = IndicatorField(lat, (np.abs(x1) <= 2) & (np.abs(x2 - 1) <= 1))
    F = IndicatorField(lat, (np.abs(x1 - 3) <= 2) & (np.abs(x2 + 2) <= 1))
    assert perimeter(E, W) == pytest.approx(perimeter(F, W), rel=1e-13)


@given(seeds)
def test_flip_changes_perimeter_by_curvature(seed):
    E = random_set(LAT2, seed)
    rng = np.random.default_rng(seed)
    c = LAT2.window_cells[rng.integers(LAT2.n_window)]
    g = LAT2.global_index(c)
    H = nmc_set(E, g, W2)
    F = E.copy()
    F.flip(g)
    delta = perimeter(F, W2) - perimeter(E, W2)
    expect = H * LAT2.volume if not E[g] else -H * LAT2.volume
    assert delta == pytest.approx(expect, rel=1e-10, abs=1e-12)


def test_set_curvature_frozen_1d():
    lat = Lattice.box(1.0, (-8, 7), (-3, 2))
    W = build_weights(lat, FractionalPower(0.5, dimension=1))
    E = IndicatorField(lat, lat.index_arrays()[0] == 0)
    # cell 1: all neighbours within reach 5 count +1 except cell 0
    expect = sum(2.0 * d**-1.5 for d in range(1, 6)) - 2.0
    assert nmc_set(E, 1, W) == pytest.approx(expect, rel=1e-14)
    # discrete halfspace: the two interface cells see balanced neighbourhoods,
    # deeper cells see 2 W(1) + ... of excess on their own side
    H = IndicatorField(lat, lat.index_arrays()[0] < 0)
    c = nmc_set_many(H, W, [-3, -2, -1, 0, 1, 2])
    w = [0.0] + [d**-1.5 for d in range(1, 6)]
    assert c.tolist() == pytest.approx([-2 * (w[1] + w[2]), -2 * w[1], 0.0, 0.0, 2 * w[1], 2 * (w[1] + w[2])], rel=1e-14)


@given(seeds)
def test_level_curvature_matches_superlevel_set(seed):
    rng = np.random.default_rng(seed)
    phi = LevelField(LAT2, rng.standard_normal(LAT2.grid_shape))
    for c in LAT2.window_cells[:4]:
        g = LAT2.global_index(c)
        sup = IndicatorField(LAT2, phi.values > phi.values[tuple(c)])
        assert nmc_level(phi, g, W2) == pytest.approx(nmc_set(sup, g, W2), rel=1e-12, abs=1e-12)


def test_level_curvature_extended_values():
    phi = np.where(LAT2.index_arrays()[1] < 0, np.inf, -np.inf)
    phi[LAT2.window] = 0.5
    lf = LevelField(LAT2, phi)
    c = nmc_level_many(lf, W2)
    # infinite values on both sides, the finite window is a tie plateau
    assert np.all(np.isfinite(c))
    with pytest.raises(PreconditionError):
        nmc_level(lf, (-5, -5), W2)


def test_level_curvature_antisymmetric():
    phi = LevelField(LAT2, np.random.default_rng(9).standard_normal(LAT2.grid_shape))
    neg = LevelField(LAT2, -phi.values)
    assert np.allclose(nmc_level_many(phi, W2), -nmc_level_many(neg, W2), atol=1e-13)


def test_truncation_and_cutoff():
    E = random_set(LAT2, 5)
    full = nmc_set_many(E, W2)
    assert np.array_equal(nmc_set_many(E, W2, eps=LAT2.h), full)
    near = nmc_set_many(E, W2, rcut=LAT2.h)
    far = nmc_set_many(E, W2, eps=1.01 * LAT2.h)
    assert np.allclose(near + far, full, atol=1e-12)


def test_cells_argument_forms():
    E = random_set(LAT2, 6)
    a = nmc_set_many(E, W2, [(0, 0), (-1, 1)])
    b = nmc_set_many(E, W2, np.array([LAT2.local_index((0, 0)), LAT2.local_index((-1, 1))]))
    assert np.array_equal(a, b)
    assert nmc_set(E, (0, 0), W2) == a[0]


def test_principal_value_converges_for_smooth_kernel():
    E = random_set(LAT2, 7)
    res = nmc_principal_value(E, (0, 0), W2, schedule=[2.0, 1.0, 0.5])
    assert res.values[-1][1] == pytest.approx(nmc_set(E, (0, 0), W2))
    assert res.to_dict()["values"][0][0] == 2.0


def test_principal_value_halfspace_is_zero():
    lat = Lattice.box(0.25, ((-16, 15), (-16, 15)), ((-2, 1), (-2, 1)))
    W = build_weights(lat, FractionalPower(0.5, dimension=2))
    phi = LevelField.from_function(lat, lambda x1, x2: -x2)
    res = nmc_principal_value(phi, (0, 0), W)
    assert all(v == 0.0 for _, v in res.values)
    assert res.converged and res.extrapolated == 0.0
    # the set curvature of the same halfspace keeps the tie row and blows up as eps -> h
    E = phi.positive_set()
    vals = [v for _, v in nmc_principal_value(E, (0, 0), W).values]
    assert vals[-1] > vals[-2] > vals[-3] > 0


def test_principal_value_extrapolation_and_divergence():
    lat = Lattice.box(1.0, (-40, 39), (-1, 0))
    W = build_weights(lat, FractionalPower(0.5, dimension=1))
    E = IndicatorField(lat, lat.index_arrays()[0] == -1)
    # one-sided sums grow like eps^(-alpha): the differences do not contract
    res = nmc_principal_value(E, 0, W, schedule=[32.0, 16.0, 8.0, 4.0], pv_tolerance=1e-12)
    assert not res.converged and res.extrapolated == "divergent"
    assert res.limsup == res.values[-1][1]
    # with a prescribed order the last three values are extrapolated geometrically
    res = nmc_principal_value(E, 0, W, schedule=[32.0, 16.0, 8.0], pv_tolerance=1e-12, order=1.0)
    (_, a), (_, b), (_, c) = res.values
    assert res.extrapolated == pytest.approx(c + (c - b) * 0.5 / 0.5, rel=1e-14)
    with pytest.raises(PreconditionError):
        nmc_principal_value(E, 0, W, schedule=[1.0, 2.0])
    with pytest.raises(PreconditionError):
        nmc_principal_value(E, 0, W, schedule=[2.0, 0.5])


def test_default_schedule():
    assert default_schedule(0.5) == [32.0, 16.0, 8.0, 4.0, 2.0, 1.0, 0.5]


def test_curvature_csv():
    E = random_set(LAT2, 8)
    res = {(0, 0): nmc_principal_value(E, (0, 0), W2, schedule=[1.0, 0.5])}
    text = curvature_csv(LAT2, res)
    lines = text.strip().splitlines()
    assert lines[0].startswith("i,j,eps=1,eps=0.5,extrapolated")
    assert lines[1].startswith("0,0,")
