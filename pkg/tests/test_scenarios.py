import json
import math
from pathlib import Path

import numpy as np
import pytest

from nlcalib import (
    TWO_SIDED,
    ConfigError,
    Exponential,
    FractionalPower,
    Lattice,
    PreconditionError,
    SeparationError,
    build_weights,
    certify,
    nmc_level_many,
    perimeter,
)
from nlcalib.scenarios import (
    FunctionSpec,
    build_ball,
    build_bending,
    build_halfspace,
    build_scenario,
    build_subgraph,
    build_viscosity_touch,
    disk_curvature_closed_form,
    disk_curvature_oracle,
    echo,
    interval_perimeter_closed_form,
    interval_perimeter_oracle,
    load_config,
    parse_config,
    q_rho_lattice,
    refinement_study,
)

CONFIGS = Path(__file__).resolve().parent.parent / "configs"
LAT = Lattice.box(0.5, ((-6, 5), (-6, 5)), ((-2, 1), (-2, 1)))


def test_function_spec():
    u = FunctionSpec((1.0, 0.0, 2.0), 0.5)
    assert u(np.array([-1.0, 2.0])).tolist() == [3.5, 10.0]
    assert FunctionSpec.from_dict(u.to_dict()) == u
    assert FunctionSpec((0.0, 3.0)).is_affine and not u.is_affine
    with pytest.raises(ConfigError):
        FunctionSpec.from_dict({"kind": "spline"})


def test_halfspace_builder():
    E, phi = build_halfspace(LAT, (0.0, 1.0), 0.25)
    x2 = LAT.centers()[1]
    assert np.array_equal(E.values, x2 < 0.25)
    # oblique normals keep exact ties, so the level curvature vanishes identically
    E, phi = build_halfspace(LAT, (0.3, -0.7), 0.1)
    W = build_weights(LAT, FractionalPower(0.5, dimension=2))
    assert np.all(nmc_level_many(phi, W) == 0.0)
    with pytest.raises(PreconditionError):
        build_halfspace(LAT, (1.0,))


def test_subgraph_and_ball_builders():
    E, phi = build_subgraph(LAT, FunctionSpec((0.0, 0.5)))
    x1, x2 = LAT.centers()
    assert np.array_equal(E.values, x2 < 0.5 * x1)
    with pytest.raises(PreconditionError, match="leaves the universe"):
        build_subgraph(LAT, FunctionSpec((0.0, 0.0, 1.0)))
    E, phi = build_ball(LAT, (0.0, 0.0), 1.0)
    assert E.values.sum() == 12 and certify(E, phi, build_weights(LAT, Exponential(1.0, dimension=2))) is not None


def test_affine_subgraph_exact_ties():
    E, phi = build_subgraph(LAT, FunctionSpec((0.1, 0.5)))
    W = build_weights(LAT, FractionalPower(0.5, dimension=2))
    assert np.all(nmc_level_many(phi, W) == 0.0)
    # naive floating point evaluation breaks some of the ties
    x1, x2 = LAT.centers()
    naive = type(phi)(LAT, 0.1 + 0.5 * x1 - x2)
    assert np.any(nmc_level_many(naive, W) != 0.0)


def test_bending_builder():
    E, phi = build_bending(LAT, 0.2, 0.0, 0.02)
    assert np.array_equal(E.values, phi.values > 0)
    with pytest.raises(PreconditionError):
        build_bending(LAT, 0.2, 0.0, 1.0)
    with pytest.raises(PreconditionError):
        build_bending(LAT, 0.2, 0.0, -0.1)


def _touch_setup(exterior):
    lat = Lattice.box(0.125, ((-24, 23), (-24, 23)), ((0, 0), (0, 0)))
    lat = q_rho_lattice(lat, (0, 0), 1.0)
    W = build_weights(lat, FractionalPower(0.5, dimension=2))
    x1, x2 = lat.centers()
    o = lat.local_index((0, 0))
    if exterior == "corner":
        F = (x2 - x2[o]) < np.abs(x1 - x1[o])
    else:
        F = (x2 - x2[o]) < 0
    from nlcalib import IndicatorField

    return lat, W, IndicatorField(lat, F)


def test_viscosity_corner_frozen():
    lat, W, F = _touch_setup("corner")
    touch = build_viscosity_touch(lat, W, F, FunctionSpec((0.0, 0.0, 0.25)), 0.25, 1.0, (0, 0))
    assert touch.lastclaim_violations == 0 and touch.domination_gap > 0
    assert touch.perimeter_decreases
    lhs, rhs = touch.identity
    assert abs(lhs - rhs) <= 1e-12 * abs(lhs)
    assert lhs == pytest.approx(-0.8811210668216525, rel=1e-9)
    assert touch.curvature_A_origin == pytest.approx(-8.536688786765591, rel=1e-9)
    assert [t for t, _ in touch.family] == [0.0, 0.125, 0.25]


def test_viscosity_halfspace_increases():
    lat, W, F = _touch_setup("halfspace")
    touch = build_viscosity_touch(lat, W, F, FunctionSpec((0.0, 0.0, -0.25)), 0.25, 1.0, (0, 0))
    assert touch.lastclaim_violations == 0 and touch.domination_gap > 0
    assert not touch.perimeter_decreases and touch.curvature_A_origin > 0
    assert touch.identity[0] == pytest.approx(touch.identity[1], rel=1e-12)


def test_viscosity_preconditions():
    lat, W, F = _touch_setup("halfspace")
    with pytest.raises(PreconditionError, match="not contained"):
        build_viscosity_touch(lat, W, F, FunctionSpec((0.0, 0.0, 0.25)), 0.25, 1.0, (0, 0))
    with pytest.raises(PreconditionError, match="t0"):
        build_viscosity_touch(lat, W, F, FunctionSpec((0.0, 0.0, -0.25)), 0.5, 1.0, (0, 0))
    with pytest.raises(PreconditionError, match="vanish"):
        build_viscosity_touch(lat, W, F, FunctionSpec((-0.1,)), 0.25, 1.0, (0, 0))
    with pytest.raises(PreconditionError, match="Q_rho"):
        build_viscosity_touch(lat, W, F, FunctionSpec((0.0, 0.0, -0.25)), 0.2, 0.75, (0, 0))
    small = q_rho_lattice(lat, (0, 0), 0.75)
    Ws = build_weights(small, FractionalPower(0.5, dimension=2))
    from nlcalib import IndicatorField

    with pytest.raises(SeparationError) as err:
        build_viscosity_touch(small, Ws, IndicatorField(small, F.values), FunctionSpec((0.0, 0.0, -0.1)), 0.25,
                              0.75, (0, 0))
    assert err.value.abscissa == pytest.approx(-0.875)


def test_continuum_oracles():
    k2 = FractionalPower(0.5, dimension=2)
    val, err = disk_curvature_oracle(k2, 1.0)
    assert val == pytest.approx(disk_curvature_closed_form(k2, 1.0), rel=1e-11) and err < 1e-9
    assert val == pytest.approx(14.832597418410069, rel=1e-11)
    # curvature scales like R^-alpha
    assert disk_curvature_oracle(k2, 4.0)[0] == pytest.approx(val / 2.0, rel=1e-9)
    k1 = FractionalPower(0.5)
    assert interval_perimeter_oracle(k1, 1.0)[0] == pytest.approx(8.0, rel=1e-12)
    assert interval_perimeter_closed_form(k1, 4.0) == pytest.approx(8.0 * 4.0**0.5, rel=1e-14)
    e = Exponential(1.0)
    # int_0^1 (e^-x + e^-(1-x)) dx = 2 (1 - e^-1)
    assert interval_perimeter_oracle(e, 1.0)[0] == pytest.approx(2.0 * (1.0 - math.exp(-1.0)), rel=1e-10)


def test_refinement_study_small():
    t = refinement_study("halfspace", [0.5, 0.25], dimension=2)
    assert all(r["max_abs_curvature"] == 0.0 for r in t.rows)
    t = refinement_study("interval", [0.25, 0.125])
    assert all(abs(r["rel_error"]) < 1e-12 for r in t.rows)
    assert t.rows[1]["observed_order"] == pytest.approx(0.5, abs=0.1)
    assert t.to_csv().splitlines()[0].startswith("h,perimeter,rel_error")
    t = refinement_study("disk", [0.125, 0.0625])
    assert abs(t.rows[-1]["rel_error"]) < abs(t.rows[0]["rel_error"])
    with pytest.raises(PreconditionError):
        refinement_study("disk", [0.1, 0.2])
    with pytest.raises(PreconditionError):
        refinement_study("sphere", [0.1])


def test_parse_config_errors():
    with pytest.raises(ConfigError, match="line 2, column"):
        parse_config('{"seed": 1,\n  "kernel": }')
    with pytest.raises(ConfigError, match="seed"):
        parse_config('{"kernel": {}}')
    base = json.loads((CONFIGS / "halfspace_2d.json").read_text())
    bad = dict(base, construction={"type": "torus"})
    with pytest.raises(ConfigError, match="unknown construction"):
        parse_config(json.dumps(bad))
    bad = dict(base, foliation={"type": "raised_graph"})
    with pytest.raises(ConfigError, match="inconsistent"):
        parse_config(json.dumps(bad))
    bad = dict(base)
    del bad["lattice"]
    with pytest.raises(ConfigError, match="lattice"):
        parse_config(json.dumps(bad))
    with pytest.raises(ConfigError, match="cannot read"):
        load_config("/nonexistent/config.json")


@pytest.mark.parametrize("name", sorted(p.name for p in CONFIGS.glob("*.json") if "study" not in p.name
                                        and "oracle_25" not in p.name))
def test_shipped_configs_build(name):
    cfg = load_config(CONFIGS / name)
    b = build_scenario(cfg)
    assert b.E.frozen and b.E.lattice is b.lattice
    assert "_source" not in echo(cfg)


def test_seeded_random_is_reproducible():
    cfg = load_config(CONFIGS / "random_perimeter.json")
    a, b = build_scenario(cfg), build_scenario(cfg)
    assert a.E == b.E and perimeter(a.E, a.W) == perimeter(b.E, b.W)


def test_perturb_and_custom_grids(tmp_path):
    base = json.loads((CONFIGS / "halfspace_2d.json").read_text())
    base["construction"]["perturb"] = [[0, 0]]
    b = build_scenario(parse_config(json.dumps(base)))
    assert b.E[(0, 0)]
    grid = "\n".join("0" * 16 if j >= 6 else "1" * 16 for j in range(12)) + "\n"
    (tmp_path / "set.txt").write_text(grid)
    cfg = dict(base, construction={"type": "custom", "set_file": "set.txt"}, foliation={"type": "two_valued"})
    path = tmp_path / "c.json"
    path.write_text(json.dumps(cfg))
    b = build_scenario(load_config(path))
    assert b.E.values.sum() == 16 * 6 and b.phi is not None
    cfg["construction"]["set_file"] = "missing.txt"
    path.write_text(json.dumps(cfg))
    with pytest.raises(ConfigError, match="cannot read"):
        build_scenario(load_config(path))


def test_bad_kernel_and_weight_mode():
    base = json.loads((CONFIGS / "halfspace_2d.json").read_text())
    with pytest.raises(ConfigError, match="bad kernel"):
        build_scenario(parse_config(json.dumps(dict(base, kernel={"family": "fractional_power", "alpha": 2.0}))))
    with pytest.raises(ConfigError, match="weight mode"):
        build_scenario(parse_config(json.dumps(dict(base, weights={"mode": "trapezoid"}))))
