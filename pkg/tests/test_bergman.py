import csv

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from bergpoly import bergman, geometry, moments
from bergpoly.bergman import CholeskyBreakdown


P = 60


def _basis(name, params=(), N=10, P=P):
    spec = geometry.catalog(name, params, precision_digits=P, n_max=N)
    M = moments.gram_matrix(spec, N, use_cache=False)
    return spec, M, bergman.orthonormalize(M)


def _ellipse_closed_form(n, z):
    # psi(w) = w + 1/(4w): foci at +-1 and semi-axis sum 2, so
    # p_n = 2 sqrt((n+1)/pi) U_n(z) / sqrt(2^(2n+2) - 2^-(2n+2))
    with mp.workdps(P):
        scale = 2 * mp.sqrt((n + 1) / mp.pi) / mp.sqrt(mp.mpf(2) ** (2 * n + 2) - mp.mpf(2) ** (-2 * n - 2))
        return scale * mp.chebyu(n, z)


def test_disk_basis():
    _, _, B = _basis("disk", N=8)
    with mp.workdps(P):
        for n in range(9):
            assert abs(B.lambdas[n] - mp.sqrt((n + 1) / mp.pi)) < mp.mpf(10) ** (-(P - 5))
            assert all(abs(c) < mp.mpf(10) ** (-(P - 5)) for c in B.coeffs[n][:n])


@pytest.mark.parametrize("n", [0, 1, 4, 7, 10])
def test_ellipse_matches_chebyshev_closed_form(n):
    _, _, B = _basis("ellipse", (1, 0.25), N=10)
    for z in (mp.mpc("0.3", "0.2"), mp.mpc("-1.1", "0.4"), mp.mpc(2)):
        with mp.workdps(P):
            assert abs(bergman.evaluate(B, n, z) - _ellipse_closed_form(n, z)) \
                < mp.mpf(10) ** (-(P - 8)) * (1 + abs(_ellipse_closed_form(n, z)))


@pytest.mark.parametrize("name", ["ellipse", "square", "lshape", "hypocycloid"])
def test_gram_residual(name):
    N = 12
    _, M, B = _basis(name, N=N)
    assert bergman.gram_residual(B, M) < mp.mpf(10) ** (-(P - 3 * N))


def test_lambdas_positive_and_leading_real():
    _, _, B = _basis("lshape", N=8)
    for n in range(9):
        assert B.lambdas[n] > 0
        assert B.coeffs[n][n].imag == 0


def test_cholesky_breakdown_suggests_more_digits():
    spec = geometry.catalog("lshape", precision_digits=15)
    M = moments.gram_matrix(spec, 40, use_cache=False)
    with pytest.raises(CholeskyBreakdown) as info:
        bergman.orthonormalize(M)
    assert info.value.suggested_digits > 15
    assert "digits" in str(info.value)


def test_evaluate_all_and_numpy_agree():
    _, _, B = _basis("lshape", N=6)
    z = mp.mpc("0.7", "0.4")
    vals = bergman.evaluate_all(B, z)
    for n in range(7):
        with mp.workdps(P):
            assert abs(vals[n] - bergman.evaluate(B, n, z)) < mp.mpf(10) ** (-(P - 10))
        assert abs(complex(vals[n]) - complex(bergman.evaluate_numpy(B, n, complex(z)))) < 1e-10


def test_disk_kernel():
    _, _, B = _basis("disk", N=8)
    z, zeta = mp.mpc("0.3", "0.1"), mp.mpc("-0.2", "0.5")
    with mp.workdps(P):
        q = z * mp.conj(zeta)
        want = mp.fsum((n + 1) * q ** n for n in range(9)) / mp.pi
        assert abs(bergman.kernel(B, z, zeta) - want) < mp.mpf(10) ** (-(P - 5))


@settings(max_examples=20, deadline=None)
@given(st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False),
       st.complex_numbers(max_magnitude=1, allow_nan=False, allow_infinity=False))
def test_kernel_hermitian(z, zeta):
    _, _, B = _basis("lshape", N=5)
    with mp.workdps(P):
        a = bergman.kernel(B, z, zeta)
        b = mp.conj(bergman.kernel(B, zeta, z))
        assert abs(a - b) < mp.mpf(10) ** (-(P - 10)) * (1 + abs(a))
    assert bergman.kernel(B, z, z).real >= 0


def test_disk_hessenberg():
    _, M, B = _basis("disk", N=6)
    H = bergman.hessenberg(M, B)
    with mp.workdps(P):
        for n in range(6):
            for k in range(7):
                want = mp.sqrt(mp.mpf(n + 1) / (n + 2)) if k == n + 1 else 0
                assert abs(H[k, n] - want) < mp.mpf(10) ** (-(P - 5))


def test_hessenberg_is_upper_hessenberg():
    _, M, B = _basis("lshape", N=8)
    H = bergman.hessenberg(M, B)
    for n in range(8):
        for k in range(n + 2, 9):
            assert abs(H[k, n]) < mp.mpf(10) ** (-(P - 30))
        assert H[n + 1, n].real > 0


def test_hessenberg_needs_enough_moments():
    _, M, B = _basis("disk", N=4)
    with pytest.raises(ValueError):
        bergman.hessenberg(M.leading(3), B)


@pytest.mark.parametrize("name", ["lshape", "square", "ellipse"])
def test_zeros_match_hessenberg_eigenvalues(name):
    N = 10
    _, M, B = _basis(name, N=N)
    H = bergman.hessenberg(M, B)
    for n in (3, 6, 10):
        zs = bergman.zeros(B, n)
        ev = bergman.hessenberg_eigenvalues(H, n)
        assert len(zs) == n
        assert bergman.match_roots(zs, ev) < mp.mpf(10) ** (-P // 4)


@pytest.mark.parametrize("n", [1, 5, 10])
def test_ellipse_zeros_on_focal_segment(n):
    # zeros of U_n are cos(k pi / (n + 1))
    _, _, B = _basis("ellipse", (1, 0.25), N=10)
    zs = bergman.zeros(B, n)
    with mp.workdps(P):
        want = [mp.cos(k * mp.pi / (n + 1)) for k in range(1, n + 1)]
        assert bergman.match_roots(zs, want) < mp.mpf(10) ** (-(P - 15))


def test_square_zero_at_origin():
    # p_5 = z q(z^4) on the square
    _, _, B = _basis("square", N=5)
    zs = bergman.zeros(B, 5)
    assert sum(1 for z in zs if z == 0) == 1


def test_zeros_rejects_degree_zero():
    _, _, B = _basis("disk", N=2)
    with pytest.raises(ValueError):
        bergman.zeros(B, 0)


def test_interior_values_decay_relative_to_lambda():
    # |p_n(z)| / lambda_n shrinks geometrically inside the ellipse
    _, _, B = _basis("ellipse", (1, 0.25), N=20, P=80)
    with mp.workdps(80):
        r = [abs(bergman.evaluate(B, n, mp.mpf("0.2"))) / B.lambdas[n] for n in (10, 20)]
    assert r[1] < r[0] * 1e-3


def test_exports(tmp_path):
    _, _, B = _basis("lshape", N=3)
    bergman.export_basis(tmp_path / "basis.csv", B)
    rows = list(csv.DictReader(open(tmp_path / "basis.csv")))
    assert len(rows) == 10
    with mp.workdps(P):
        assert abs(mp.mpf(rows[-1]["re"]) - B.coeffs[3][3].real) < mp.mpf(10) ** (-(P - 5))
    zs = {2: bergman.zeros(B, 2), 3: bergman.zeros(B, 3)}
    bergman.export_zeros(tmp_path / "zeros.csv", zs, P)
    rows = list(csv.DictReader(open(tmp_path / "zeros.csv")))
    assert [r["n"] for r in rows] == ["2", "2", "3", "3", "3"]
