import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergpoly import geometry
from bergpoly.geometry import DomainError


P = 60


def test_catalog_names_complete():
    names = [e.name for e in geometry.catalog_entries(P)]
    assert names == list(geometry.CATALOG_NAMES)
    assert all(e.notes for e in geometry.catalog_entries(P))


def test_unknown_catalog_name():
    with pytest.raises(DomainError, match="unknown catalog"):
        geometry.catalog("pentagon", precision_digits=P)


@pytest.mark.parametrize("name,params", [
    ("disk", (-1,)), ("ellipse", (0.25, 1)), ("ellipse", (1, 0)),
    ("square", (0,)), ("square_map", (-2,)), ("hypocycloid", (1,)), ("hypocycloid", (2.5,)),
])
def test_catalog_parameter_validation(name, params):
    with pytest.raises(DomainError):
        geometry.catalog(name, params, precision_digits=P)


def test_ellipse_area_and_capacity():
    spec = geometry.catalog("ellipse", (1, 0.25), precision_digits=P)
    val, bound = geometry.area(spec)
    with mp.workdps(P):
        assert abs(val - mp.mpf("0.9375") * mp.pi) < mp.mpf(10) ** (-(P - 5))
    assert bound == 0
    assert spec.capacity == 1


def test_disk_area():
    spec = geometry.catalog("disk", (2,), precision_digits=P)
    with mp.workdps(P):
        assert abs(geometry.area(spec)[0] - 4 * mp.pi) < mp.mpf(10) ** (-(P - 5))


def test_hypocycloid_area_and_cusps():
    spec = geometry.catalog("hypocycloid", (3,), precision_digits=P)
    with mp.workdps(P):
        # pi (1 - 3 / 9)
        assert abs(geometry.area(spec)[0] - 2 * mp.pi / 3) < mp.mpf(10) ** (-(P - 5))
    assert len(spec.cusp_angles) == 4
    assert spec.corners == ()


def test_polygon_areas():
    assert geometry.area(geometry.catalog("square", precision_digits=P))[0] == 1
    assert geometry.area(geometry.catalog("lshape", precision_digits=P))[0] == 3
    assert geometry.area(geometry.catalog("square", (3,), precision_digits=P))[0] == 9


def test_square_capacity_value():
    with mp.workdps(30):
        assert abs(geometry.square_capacity(1, 30) - mp.mpf("0.590170299508048")) < mp.mpf("1e-15")


def test_square_series_coefficients():
    # b_{-3} = b C(1/2, 1) / (1 - 4) = -b / 6
    psi = geometry.square_series(1, 20, P)
    with mp.workdps(P):
        b = geometry.square_capacity(1, P)
        assert abs(psi.coeff(-3) + b / 6) < mp.mpf(10) ** (-(P - 3))
        assert abs(psi.coeff(-7) - b * mp.binomial(0.5, 2) / (-7)) < mp.mpf(10) ** (-(P - 3))
        for m in (0, 1, 2, 4, 5, 6):
            assert psi.coeff(-m) == 0


@pytest.mark.parametrize("n_max", [8, 20, 40])
def test_square_map_area_within_truncation_bound(n_max):
    spec = geometry.catalog("square_map", precision_digits=P, n_max=n_max)
    val, bound = geometry.area(spec)
    assert bound > 0
    # the truncated curve encloses slightly more than the square
    assert 0 < val - 1 <= bound


def test_square_map_corners_near_vertices():
    spec = geometry.catalog("square_map", precision_digits=P, n_max=40)
    for c in spec.corners:
        z = complex(c.position)
        assert abs(abs(z.real) - 0.5) < 1e-3 and abs(abs(z.imag) - 0.5) < 1e-3
        assert c.omega == 1.5


def test_lshape_corners():
    spec = geometry.catalog("lshape", precision_digits=P)
    omegas = sorted(float(c.omega) for c in spec.corners)
    assert omegas == [0.5] + [1.5] * 5


def test_collinear_vertex_is_not_a_corner():
    spec = geometry.polygon([0, 1, 2, 2 + 1j, 1j], P)
    assert len(spec.corners) == 4


@pytest.mark.parametrize("verts,msg", [
    ([0, 1], "at least 3"),
    ([0, 1, 1, 1j], "distinct"),
    ([0, 1, 1j, 1 + 1j], "intersect"),
    ([0, 1j, 1 + 1j, 1], "counterclockwise"),
])
def test_polygon_validation(verts, msg):
    with pytest.raises(DomainError, match=msg):
        geometry.polygon(verts, P)


@pytest.mark.parametrize("name", ["disk", "ellipse", "square_map", "hypocycloid"])
def test_map_boundaries_wind_once(name):
    spec = geometry.catalog(name, precision_digits=P)
    assert geometry.check_winding(spec) == 1


@pytest.mark.parametrize("name", ["square", "lshape"])
def test_polygon_interior_point(name):
    spec = geometry.catalog(name, precision_digits=P)
    assert geometry.contains(spec, geometry.interior_point(spec))
    assert geometry.check_winding(spec) == 1


def test_contains():
    sq = geometry.catalog("square", precision_digits=P)
    assert geometry.contains(sq, 0.1 + 0.2j)
    assert not geometry.contains(sq, 0.6)
    ls = geometry.catalog("lshape", precision_digits=P)
    assert geometry.contains(ls, 0.5 + 1.5j)
    assert not geometry.contains(ls, 1.5 + 1.5j)
    el = geometry.catalog("ellipse", precision_digits=P)
    assert geometry.contains(el, 1.2)
    assert not geometry.contains(el, 1.3)


def test_convex_hull_of_lshape():
    ls = geometry.catalog("lshape", precision_digits=P)
    hull = geometry.convex_hull([complex(v) for v in ls.vertices])
    assert sorted((h.real, h.imag) for h in hull) == sorted(
        [(0, 0), (2, 0), (2, 1), (1, 2), (0, 2)])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.complex_numbers(max_magnitude=10, allow_nan=False, allow_infinity=False),
                min_size=1, max_size=30))
def test_convex_hull_contains_points(points):
    hull = geometry.convex_hull(points)
    if len(hull) < 3:
        return
    for p in points:
        for i in range(len(hull)):
            a, b = hull[i], hull[(i + 1) % len(hull)]
            cross = (b - a).real * (p - a).imag - (b - a).imag * (p - a).real
            assert cross >= -1e-9


@pytest.mark.parametrize("name", list(geometry.CATALOG_NAMES))
def test_config_round_trip(name):
    spec = geometry.catalog(name, precision_digits=P, n_max=8)
    back = geometry.from_config(geometry.to_config(spec))
    assert back.digest() == spec.digest()
    assert back.kind == spec.kind


def test_from_config_catalog_form():
    spec = geometry.from_config({"catalog": "ellipse", "params": [1, 0.5]}, precision_digits=40)
    assert spec.precision_digits == 40
    assert spec.psi.coeff(-1) == 0.5


def test_digest_depends_on_domain():
    a = geometry.catalog("ellipse", (1, 0.25), precision_digits=P)
    b = geometry.catalog("ellipse", (1, 0.25), precision_digits=P)
    c = geometry.catalog("ellipse", (1, 0.5), precision_digits=P)
    assert a.digest() == b.digest() != c.digest()


def test_boundary_samples_ccw():
    for name in ("square", "ellipse", "lshape"):
        spec = geometry.catalog(name, precision_digits=P)
        z = geometry.boundary_samples(spec, 2000)
        # shoelace on the samples is positive
        assert 0.5 * np.sum((np.conj(z) * np.roll(z, -1)).imag) > 0
