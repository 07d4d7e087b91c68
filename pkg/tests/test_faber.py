import csv

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bergpoly import conformal, faber, geometry
from bergpoly.series import LaurentAtInfinity, TruncationError


P = 50
TOL = mp.mpf(10) ** (-(P - 10))


def _psi(name, params=(), n_max=12):
    return geometry.catalog(name, params, precision_digits=P, n_max=n_max).psi


def test_disk_faber():
    fam = faber.faber_recurrence(_psi("disk", (2,)), 6)
    with mp.workdps(P):
        for n in range(7):
            want = [0] * n + [mp.mpf(2) ** -n]
            assert all(abs(a - b) < TOL for a, b in zip(fam.F[n], want))
        assert fam.gamma == mp.mpf(1) / 2


@pytest.mark.parametrize("b", ["0.25", "0.5", "0.1"])
def test_ellipse_faber_is_scaled_chebyshev(b):
    # F_n(z) = 2 b^(n/2) T_n(z / (2 sqrt b)) for psi(w) = w + b/w
    fam = faber.faber_recurrence(_psi("ellipse", (1, float(b))), 8)
    with mp.workdps(P):
        bb = mp.mpf(float(b))
        for n in range(1, 9):
            for z in (mp.mpc("0.3", "0.7"), mp.mpc(-2)):
                want = 2 * bb ** (mp.mpf(n) / 2) * mp.chebyt(n, z / (2 * mp.sqrt(bb)))
                assert abs(fam.F_at(n, z) - want) < TOL * (1 + abs(want))


def test_ellipse_second_faber():
    fam = faber.faber_recurrence(_psi("ellipse", (1, 0.25)), 3)
    with mp.workdps(P):
        # F_2 = z^2 - 2b
        assert abs(fam.F[2][0] + mp.mpf("0.5")) < TOL
        # G_1 = F_2' / 2 = z
        assert abs(fam.G2[1][1] - 1) < TOL and abs(fam.G2[1][0]) < TOL


def test_hypocycloid_faber():
    # psi = w + 1/(3 w^3): F_1 = z, F_2 = z^2, F_3 = z^3, F_4 = z^4 - 4/3
    fam = faber.faber_recurrence(_psi("hypocycloid", (3,)), 4)
    with mp.workdps(P):
        for n in range(4):
            assert all(abs(c) < TOL for c in fam.F[n][:n]) and abs(fam.F[n][n] - 1) < TOL
        assert abs(fam.F[4][0] + mp.mpf(4) / 3) < TOL


@pytest.mark.parametrize("name", ["ellipse", "hypocycloid", "square_map"])
def test_recurrence_matches_reversion_oracle(name):
    psi = _psi(name, n_max=10)
    a = faber.faber_recurrence(psi, 10)
    b = faber.faber_oracle(psi, 10)
    assert faber.max_coefficient_gap(a, b) < mp.mpf(10) ** (-(P - 15))
    with mp.workdps(P):
        assert abs(a.gamma - b.gamma) < TOL


def test_recurrence_refuses_short_series():
    psi = LaurentAtInfinity.from_powers({1: 1, -1: mp.mpf("0.25")}, 2, P)
    with pytest.raises(TruncationError):
        faber.faber_recurrence(psi, 5)


def test_recurrence_needs_simple_pole():
    psi = LaurentAtInfinity.from_powers({2: 1}, 2, P, exact=True)
    with pytest.raises(ValueError):
        faber.faber_recurrence(psi, 3)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.05, 0.9), st.integers(1, 8),
       st.floats(1.05, 3.0), st.floats(0, 6.283))
def test_ellipse_singular_part_closed_form(b, n, r, t):
    # F_n(psi(w)) = w^n + (b/w)^n for the ellipse, so E_n = (b/w)^n
    psi = LaurentAtInfinity.from_powers({1: 1, -1: b}, 1, P, exact=True)
    fam = faber.faber_recurrence(psi, n + 1)
    emap = conformal.ExteriorMap(psi)
    with mp.workdps(P):
        w = mp.mpf(r) * mp.expj(t)
        E, _ = faber.singular_parts(fam, lambda z: emap.from_w(w), n, psi(w))
        assert abs(E - (mp.mpf(b) / w) ** n) < TOL


def test_singular_parts_need_next_degree():
    fam = faber.faber_recurrence(_psi("ellipse", (1, 0.25)), 3)
    with pytest.raises(ValueError, match="F_4"):
        faber.singular_parts(fam, None, 3, 2)


def test_singular_parts_decay_with_level():
    psi = _psi("square_map", n_max=10)
    fam = faber.faber_recurrence(psi, 10)
    emap = conformal.ExteriorMap(psi)
    vals = []
    for R in (1.2, 2.0, 4.0):
        E, H = faber.singular_parts(fam, lambda z: emap.from_w(R), 8, psi(R))
        vals.append(abs(E))
    assert vals[0] > vals[1] > vals[2]


@pytest.mark.parametrize("name", ["ellipse", "square_map", "hypocycloid"])
def test_boundary_identities(name):
    psi = _psi(name, n_max=10)
    fam = faber.faber_recurrence(psi, 10)
    for m, n in [(0, 0), (2, 3), (3, 2), (4, 4)]:
        I_H, I_E, I_d = faber.boundary_identities(fam, psi, m, n)
        assert abs(I_H) < 1e-8
        assert abs(I_E) < 1e-8
        assert abs(I_d - (1 if m == n else 0)) < 1e-8


def test_horner_and_numpy_agree():
    fam = faber.faber_recurrence(_psi("ellipse", (1, 0.25)), 6)
    z = 0.3 - 0.8j
    for n in range(7):
        assert abs(complex(fam.F_at(n, z)) - faber.horner_numpy(fam.F[n], z)) < 1e-12
    assert np.allclose(faber.horner_numpy(fam.F[3], np.array([0, 1])), [complex(fam.F_at(3, 0)), complex(fam.F_at(3, 1))])


def test_fprime_matches_G():
    fam = faber.faber_recurrence(_psi("square_map"), 8)
    z = mp.mpc("0.2", "0.1")
    with mp.workdps(P):
        for n in range(8):
            assert abs(fam.Fprime_at(n + 1, z) / (n + 1) - fam.G_at(n, z)) < TOL


def test_export(tmp_path):
    fam = faber.faber_recurrence(_psi("ellipse", (1, 0.25)), 3)
    faber.export_family(tmp_path / "F.csv", fam, "F")
    faber.export_family(tmp_path / "G.csv", fam, "G")
    assert len(list(csv.DictReader(open(tmp_path / "F.csv")))) == 1 + 2 + 3 + 4
    assert len(list(csv.DictReader(open(tmp_path / "G.csv")))) == 1 + 2 + 3
