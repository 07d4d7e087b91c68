"""Cross-module invariants on the catalog domains at the acceptance sizes."""

import mpmath as mp
import numpy as np
import pytest

from bergpoly import acceptance, bergman, cli, conformal, diagnostics as diag, faber, geometry, moments


# max |p_n| on a disk about an interior point is attained on its rim
RIM = [0.2 * np.exp(2j * np.pi * k / 64) for k in range(64)]


def _bounded_after_pivot(vals, pivot=10, factor=2.0):
    ref = vals[pivot]
    return all(v <= factor * ref for n, v in vals.items() if n >= pivot)


@pytest.mark.parametrize("name", list(geometry.CATALOG_NAMES))
def test_gram_residual_all_catalog(name):
    N = 20
    spec = geometry.catalog(name, n_max=N)
    P = spec.precision_digits
    M = moments.gram_matrix(spec, N, use_cache=False)
    B = bergman.orthonormalize(M)
    assert bergman.gram_residual(B, M) < mp.mpf(10) ** (-(P - 3 * N))
    assert all(lam > 0 for lam in B.lambdas)
    # entries[0][0] is the area
    with mp.workdps(P):
        assert abs(M[0, 0] - geometry.area(spec)[0]) < mp.mpf(10) ** (-(P - 10))


def test_ellipse_symmetry_zeros():
    spec = geometry.catalog("ellipse", precision_digits=60)
    M = moments.gram_matrix(spec, 9, use_cache=False)
    for j in range(10):
        for k in range(10):
            if (j - k) % 2:
                assert abs(M[j, k]) < mp.mpf(10) ** -50


@pytest.mark.parametrize("name", ["lshape", "square", "ellipse"])
def test_hessenberg_column_norms(name):
    N = 12
    spec = geometry.catalog(name, n_max=N)
    M = moments.gram_matrix(spec, N, use_cache=False)
    B = bergman.orthonormalize(M)
    H = bergman.hessenberg(M, B)
    P = B.precision_digits
    with mp.workdps(P):
        for n in range(N):
            assert H[n + 1, n].real > 0 and H[n + 1, n].imag == 0
            col = mp.fsum(abs(H[k, n]) ** 2 for k in range(N + 1))
            zp = [mp.mpc(0)] + list(B.coeffs[n])
            assert abs(col - M.norm2(zp)) < mp.mpf(10) ** (-(P - 3 * N))


def test_square_interior_decay():
    B = acceptance.context("square").basis
    vals = {n: max(abs(complex(bergman.evaluate(B, n, z))) for z in RIM) * n ** 0.5
            for n in range(5, 41)}
    assert _bounded_after_pivot(vals)
    assert max(vals.values()) == vals[5]


def test_square_faber_derivative_decay():
    fam = acceptance.context("square_map").fam
    vals = {n: max(abs(complex(fam.Fprime_at(n + 1, z))) for z in RIM) * n ** 1.5
            for n in range(5, 40)}
    assert _bounded_after_pivot(vals)
    G = {n: max(abs(complex(fam.G_at(n, z))) for z in RIM) * n ** 2.5 for n in range(5, 40)}
    assert _bounded_after_pivot(G)


def test_faber_leading_coefficients():
    fam = acceptance.context("square_map").fam
    P = fam.precision_digits
    with mp.workdps(P):
        for n in range(fam.N):
            assert abs(fam.F[n][n] - fam.gamma ** n) < mp.mpf(10) ** (-(P - 10))
            assert abs(fam.G2[n][n] - fam.gamma ** (n + 1)) < mp.mpf(10) ** (-(P - 10))


def test_ellipse_kronecker_identity_full():
    psi = geometry.catalog("ellipse", precision_digits=40).psi
    fam = faber.faber_recurrence(psi, 10)
    for m in range(9):
        for n in range(9):
            _, _, I_d = faber.boundary_identities(fam, psi, m, n)
            assert abs(I_d - (1 if m == n else 0)) < 1e-10


@pytest.mark.parametrize("name", ["disk", "ellipse", "square_map", "hypocycloid"])
def test_inversion_on_sample_circles(name):
    spec = geometry.catalog(name, precision_digits=50, n_max=20)
    emap = conformal.exterior_map_for(spec)
    with mp.workdps(50):
        for R in ("1.1", "1.5", "3"):
            for j in range(12):
                w = mp.mpf(R) * mp.expj(2 * mp.pi * (j + mp.mpf(1) / 7) / 12)
                assert abs(emap.at(spec.psi(w)).w - w) < mp.mpf(10) ** (-(50 - 12))


@pytest.mark.parametrize("name", ["disk", "ellipse", "square", "square_map", "hypocycloid"])
def test_alpha_not_negative_on_catalog(name):
    N = 20
    spec = geometry.catalog(name, n_max=N)
    B = bergman.orthonormalize(moments.gram_matrix(spec, N, use_cache=False))
    floor = -mp.mpf(10) ** (-spec.precision_digits / 2)
    assert all(diag.alpha(B, spec.gamma, n) >= floor for n in range(N + 1))


@pytest.mark.parametrize("name", ["disk", "hypocycloid"])
def test_sum_identity_other_map_domains(name):
    N = 30
    spec = geometry.catalog(name, n_max=N)
    P = spec.precision_digits
    M = moments.gram_matrix(spec, N, use_cache=False)
    B = bergman.orthonormalize(M)
    fam = faber.faber_recurrence(spec.psi, N + 1)
    eps = diag.epsilon_all(spec.psi, fam, range(N + 1))
    for n in range(N + 1):
        chk = diag.check_sum_identity(diag.alpha(B, spec.gamma, n), diag.beta(B, fam, M, n),
                                      eps[n].eps, 1e-6, mp.mpf(10) ** -30, P)
        assert chk.passed, (n, chk.detail)


def test_beta_over_eps_stable_on_square():
    ctx = acceptance.context("square_map")
    M = moments.gram_matrix(ctx.spec, ctx.basis.N, use_cache=False)
    eps = acceptance._eps("square_map", 30)
    ratio = {n: diag.beta(ctx.basis, ctx.fam, M, n) / eps[n].eps for n in range(10, 31)}
    assert all(r >= 0 for r in ratio.values())
    assert max(ratio.values()) <= 2 * min(ratio.values())


def test_xi_scaled_bounded_on_square():
    ctx = acceptance.context("square")
    vals = {n: abs(diag.xi(ctx.basis, ctx.spec.gamma, n)) * n for n in range(10, 41)}
    assert _bounded_after_pivot(vals)


def test_verify_is_deterministic_and_reports_failure(tmp_path, capsys):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["verify", "--only", "1", "6", "13", "--out", str(a)]) == 0
    assert cli.main(["verify", "--only", "1", "6", "13", "--out", str(b)]) == 0
    for name in ("acceptance.json", "acceptance.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    out = capsys.readouterr().out
    assert "3/3 criteria passed" in out
    # a failing criterion gives exit status 1
    assert cli.main(["verify", "--only", "12"]) == 1
    assert "failed: C12" in capsys.readouterr().out
