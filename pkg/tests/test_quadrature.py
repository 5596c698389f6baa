import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import ellipeinc, ellipkinc

from layerpot.errors import AllComponentsBelowCutoff
from layerpot.quadrature import (THETA_DEFAULT, bump, generate_rule, integrate,
                                 partition_weights, write_nodes_csv)
from layerpot.surface import RotatedEllipsoid, UnitSphere


def ellipsoid_area(a, b, c):
    # a > b > c
    phi = math.acos(c / a)
    m = a * a * (b * b - c * c) / (b * b * (a * a - c * c))
    s = math.sin(phi)
    return 2 * math.pi * c * c + 2 * math.pi * a * b / s * (
        ellipeinc(phi, m) * s * s + ellipkinc(phi, m) * math.cos(phi) ** 2)


def test_bump():
    assert bump(0.0) == 1.0
    assert bump(1.0) == 0.0 and bump(-1.2) == 0.0
    assert bump(0.5) == pytest.approx(math.exp(2 * 0.25 / (0.25 - 1)))


@settings(max_examples=100, deadline=None)
@given(st.tuples(*[st.floats(-1, 1, allow_nan=False)] * 3))
def test_partition_of_unity(v):
    n = np.array(v)
    if np.linalg.norm(n) < 1e-3:
        return
    n /= np.linalg.norm(n)
    psi = partition_weights(n)
    assert psi.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(psi >= 0)
    assert np.all(psi[np.abs(n) < math.cos(THETA_DEFAULT)] == 0)


def test_all_components_below_cutoff():
    with pytest.raises(AllComponentsBelowCutoff):
        partition_weights(np.ones(3) / math.sqrt(3), theta=np.deg2rad(20))


def test_sphere_area_converges():
    hs = [1 / 8, 1 / 16, 1 / 32]
    errs = [abs(integrate(generate_rule(UnitSphere(), h), lambda x: np.ones(len(x))) - 4 * math.pi)
            for h in hs]
    assert errs[-1] < 1e-6
    orders = [math.log2(errs[i] / errs[i + 1]) for i in range(2)]
    assert min(orders) >= 4


def test_rotated_ellipsoid_area():
    area = integrate(generate_rule(RotatedEllipsoid(), 1 / 64), lambda x: np.ones(len(x)))
    assert area == pytest.approx(ellipsoid_area(1.0, 0.8, 0.6), abs=1e-6)


def test_second_moment(sphere_rule_32):
    assert integrate(sphere_rule_32, lambda x: x[:, 0] ** 2) == pytest.approx(4 * math.pi / 3, abs=1e-6)


def test_vector_integrand(sphere_rule_32):
    v = integrate(sphere_rule_32, sphere_rule_32.n * sphere_rule_32.x[:, :1])
    assert np.allclose(v, [4 * math.pi / 3, 0, 0], atol=1e-6)


def test_partition_consistency_without_cutoff():
    s = UnitSphere()
    a = generate_rule(s, 1 / 16)
    b = generate_rule(s, 1 / 16, membership=np.pi / 2)
    assert len(b) > len(a)
    assert abs(integrate(a, np.ones(len(a))) - integrate(b, np.ones(len(b)))) < 1e-10


def test_node_count_scales_like_h_minus_two(sphere_rule_16, sphere_rule_32):
    assert len(sphere_rule_32) / len(sphere_rule_16) == pytest.approx(4.0, rel=0.05)


def test_nodes_on_surface_and_on_grid_lines(sphere_rule_16):
    r = sphere_rule_16
    assert np.max(np.abs(UnitSphere().level(r.x))) < 1e-12 * UnitSphere().scale
    for d in range(3):
        sel = r.axis == d
        others = [k for k in range(3) if k != d]
        assert np.allclose(r.x[sel][:, others], r.index[sel] * r.h)
        assert np.all(np.abs(r.n[sel, d]) >= math.cos(THETA_DEFAULT))


def test_rule_is_deterministic():
    a = generate_rule(RotatedEllipsoid(), 1 / 16)
    b = generate_rule(RotatedEllipsoid(), 1 / 16)
    assert np.array_equal(a.x, b.x) and np.array_equal(a.w, b.w)


def test_node_dump(tmp_path, sphere_rule_16):
    path = tmp_path / "nodes.csv"
    write_nodes_csv(sphere_rule_16, path)
    with open(path) as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["axis", "i", "j", "x1", "x2", "x3", "n1", "n2", "n3", "w"]
    assert len(rows) == len(sphere_rule_16) + 1
    assert {r[0] for r in rows[1:]} == {"1", "2", "3"}
