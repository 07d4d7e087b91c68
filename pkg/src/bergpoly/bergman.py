"""Bergman polynomials from a moment matrix.

With the Cholesky factorisation M = L L^H, the rows of C = L^{-1} are the
coefficients of the orthonormal polynomials, since C M C^H = I and the
diagonal of C is real and positive.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .io import mp_to_str, write_csv


class CholeskyBreakdown(ArithmeticError):
    def __init__(self, degree, precision_digits, suggested_digits):
        self.degree = degree
        self.suggested_digits = suggested_digits
        super().__init__(
            f"Cholesky breakdown at degree {degree} with {precision_digits} digits; "
            f"rerun with at least {suggested_digits} digits")


class RootFindingError(ArithmeticError):
    pass


@dataclass(eq=False)
class OrthonormalBasis:
    N: int
    coeffs: list          # coeffs[n][m], m <= n
    lambdas: list
    precision_digits: int
    domain_digest: str = ""

    def row(self, n):
        return self.coeffs[n]


@dataclass(eq=False)
class HessenbergMatrix:
    entries: list         # entries[k][n] = <z p_n, p_k>, n <= N-1, k <= N
    precision_digits: int

    def __getitem__(self, kn):
        k, n = kn
        return self.entries[k][n]

    @property
    def columns(self):
        return len(self.entries[0]) if self.entries else 0


def _cholesky(entries, P):
    """Lower-triangular L with L L^H = M."""
    n = len(entries)
    L = [[mp.mpc(0)] * n for _ in range(n)]
    for j in range(n):
        s = entries[j][j].real - mp.fsum(abs(L[j][p]) ** 2 for p in range(j))
        if not s > 0:
            # pivots shrink roughly geometrically; extrapolate the digits needed
            raise CholeskyBreakdown(j, P, P + 3 * (n - j) + 20)
        d = mp.sqrt(s)
        L[j][j] = mp.mpc(d)
        for i in range(j + 1, n):
            v = entries[i][j] - mp.fsum(L[i][p] * mp.conj(L[j][p]) for p in range(j))
            L[i][j] = v / d
    return L


def _lower_inverse(L):
    n = len(L)
    C = [[mp.mpc(0)] * n for _ in range(n)]
    for i in range(n):
        C[i][i] = 1 / L[i][i]
        for j in range(i - 1, -1, -1):
            s = mp.fsum(L[i][p] * C[p][j] for p in range(j, i))
            C[i][j] = -s / L[i][i]
    return C


def orthonormalize(M):
    """Orthonormal basis p_0..p_N for the moment matrix ``M``."""
    P = M.precision_digits
    with mp.workdps(P):
        L = _cholesky(M.entries, P)
        C = _lower_inverse(L)
        coeffs = [[C[n][m] for m in range(n + 1)] for n in range(M.N + 1)]
        for n in range(M.N + 1):
            coeffs[n][n] = mp.mpc(coeffs[n][n].real, 0)
        lambdas = [coeffs[n][n].real for n in range(M.N + 1)]
    return OrthonormalBasis(M.N, coeffs, lambdas, P, M.domain_digest)


def gram_residual(basis, M):
    """max |C M C^H - I| over the leading (N+1) x (N+1) block."""
    N = basis.N
    with mp.workdps(basis.precision_digits):
        # T = C M, then T C^H
        T = []
        for n in range(N + 1):
            cn = basis.coeffs[n]
            T.append([mp.fsum(cn[m] * M.entries[m][l] for m in range(n + 1)) for l in range(N + 1)])
        worst = mp.mpf(0)
        for n in range(N + 1):
            for k in range(n, N + 1):
                ck = basis.coeffs[k]
                v = mp.fsum(T[n][l] * mp.conj(ck[l]) for l in range(k + 1))
                if n == k:
                    v -= 1
                worst = max(worst, abs(v))
        return worst


# -- evaluation ------------------------------------------------------------------

def evaluate(basis, n, z):
    """p_n(z) by Horner's rule."""
    with mp.workdps(basis.precision_digits):
        z = mp.mpmathify(z)
        acc = mp.mpc(0)
        for c in reversed(basis.coeffs[n]):
            acc = acc * z + c
        return acc


def evaluate_all(basis, z, upto=None):
    """[p_0(z), ..., p_upto(z)]."""
    upto = basis.N if upto is None else upto
    with mp.workdps(basis.precision_digits):
        z = mp.mpmathify(z)
        pw = [mp.mpc(1)]
        for _ in range(upto):
            pw.append(pw[-1] * z)
        return [mp.fsum(c * pw[m] for m, c in enumerate(basis.coeffs[n])) for n in range(upto + 1)]


def evaluate_numpy(basis, n, z):
    """Float evaluation on arrays (plotting and warm starts)."""
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for c in reversed(basis.coeffs[n]):
        acc = acc * z + complex(c)
    return acc


def kernel(basis, z, zeta, N=None):
    """K_N(z, zeta) = sum_{n <= N} p_n(z) conj(p_n(zeta))."""
    N = basis.N if N is None else N
    with mp.workdps(basis.precision_digits):
        pz = evaluate_all(basis, z, N)
        pzeta = evaluate_all(basis, zeta, N)
        return mp.fsum(a * mp.conj(b) for a, b in zip(pz, pzeta))


# -- recurrence matrix -------------------------------------------------------------

def hessenberg(M, basis):
    """a[k][n] = <z p_n, p_k> for n <= N - 1 and k <= N.

    Multiplying by z shifts monomial degrees, so <z^(m+1), z^l> = M[m+1][l].
    """
    N = basis.N
    if M.N < N:
        raise ValueError("moment matrix smaller than the basis")
    with mp.workdps(basis.precision_digits):
        # R[n][l] = sum_m c[n][m] M[m+1][l]
        R = []
        for n in range(N):
            cn = basis.coeffs[n]
            R.append([mp.fsum(cn[m] * M.entries[m + 1][l] for m in range(n + 1)) for l in range(N + 1)])
        a = [[mp.mpc(0)] * N for _ in range(N + 1)]
        for n in range(N):
            for k in range(N + 1):
                ck = basis.coeffs[k]
                a[k][n] = mp.fsum(R[n][l] * mp.conj(ck[l]) for l in range(k + 1))
    return HessenbergMatrix(a, basis.precision_digits)


# -- zeros ---------------------------------------------------------------------

def _aberth_float(c, z, maxit=500):
    c = np.asarray(c, dtype=complex)
    dc = c[1:] * np.arange(1, len(c))
    for _ in range(maxit):
        p = np.polyval(c[::-1], z)
        dp = np.polyval(dc[::-1], z)
        with np.errstate(all="ignore"):
            ratio = p / dp
            diff = z[:, None] - z[None, :]
            np.fill_diagonal(diff, 1)
            s = (1 / diff).sum(axis=1) - 1
            step = ratio / (1 - ratio * s)
        if not np.all(np.isfinite(step)):
            break
        z = z - step
        if np.max(np.abs(step)) < 1e-14 * max(1.0, np.max(np.abs(z))):
            break
    return z


def _horner_d(c, x):
    p = mp.mpc(0)
    dp = mp.mpc(0)
    for a in reversed(c):
        dp = dp * x + p
        p = p * x + a
    return p, dp


def zeros(basis, n, maxit=200):
    """All n zeros of p_n, refined to the working precision.

    Aberth iteration from a perturbed circle of radius |c_0 / lambda_n|^(1/n),
    first in double precision and then at the working precision, followed by
    a Newton polish of each root.
    """
    if n < 1:
        raise ValueError("zeros need n >= 1")
    P = basis.precision_digits
    with mp.workdps(P):
        lam = basis.lambdas[n]
        monic = [c / lam for c in basis.coeffs[n]]
        # symmetric domains give p_n = z^r q(z^s); coefficients that vanish
        # to working precision mark an exact zero root of multiplicity r,
        # which Aberth would only resolve to half precision
        scale = max(abs(c) for c in monic)
        r = 0
        while r < n and abs(monic[r]) <= mp.mpf(10) ** (-(P - 20)) * scale:
            r += 1
        full_n = n
        monic = monic[r:]
        n -= r
        if n == 0:
            return [mp.mpc(0)] * full_n
        r0 = abs(monic[0]) ** (mp.mpf(1) / n)
        ang = 2 * np.pi * (np.arange(n) + 0.25) / n + 0.4 / n
        z0 = float(r0) * np.exp(1j * ang)
        zf = _aberth_float([complex(c) for c in monic], z0)
        if not np.all(np.isfinite(zf)):
            zf = z0
        z = [mp.mpc(complex(v)) for v in zf]
        tol = mp.mpf(10) ** (-(P - 5))
        near = mp.mpf(10) ** (-(P // 3))
        extra = 0
        for _ in range(maxit):
            biggest = mp.mpf(0)
            new = list(z)
            for i in range(n):
                p, dp = _horner_d(monic, z[i])
                if p == 0:
                    continue
                ratio = p / dp
                s = mp.fsum(1 / (z[i] - z[j]) for j in range(n) if j != i)
                step = ratio / (1 - ratio * s)
                new[i] = z[i] - step
                biggest = max(biggest, abs(step) / max(1, abs(z[i])))
            z = new
            if biggest < tol:
                break
            # once close, rounding noise can keep steps above tol; two more
            # (cubically convergent) sweeps reach the attainable accuracy
            if biggest < near:
                extra += 1
                if extra > 2:
                    break
        bound = mp.mpf(10) ** (-(P - 10))
        out = []
        for i, x in enumerate(z):
            for _ in range(3):
                p, dp = _horner_d(monic, x)
                if p == 0 or dp == 0:
                    break
                x = x - p / dp
            res = abs(evaluate(basis, full_n, x))
            if not res < bound * lam * max(1, abs(x)) ** full_n:
                raise RootFindingError(f"zero {i} of p_{full_n} did not converge "
                                       f"(residual {mp.nstr(res, 5)})")
            out.append(x)
        out += [mp.mpc(0)] * r
    return sorted(out, key=lambda v: (float(v.real), float(v.imag)))


def hessenberg_eigenvalues(H, n):
    """Eigenvalues of the leading n x n block of the recurrence matrix."""
    with mp.workdps(H.precision_digits):
        A = mp.matrix(n, n)
        for k in range(n):
            for m in range(n):
                A[k, m] = H.entries[k][m]
        ev = mp.eig(A, left=False, right=False)
    return sorted(ev, key=lambda v: (float(v.real), float(v.imag)))


def match_roots(a, b):
    """Largest distance after greedy nearest matching of two root lists."""
    remaining = list(b)
    worst = 0
    for x in a:
        j = min(range(len(remaining)), key=lambda i: abs(remaining[i] - x))
        worst = max(worst, abs(remaining[j] - x))
        remaining.pop(j)
    return worst


# -- export --------------------------------------------------------------------

def export_basis(path, basis):
    with mp.workdps(basis.precision_digits):
        rows = [(n, m, mp_to_str(c.real), mp_to_str(c.imag))
                for n in range(basis.N + 1) for m, c in enumerate(basis.coeffs[n])]
    write_csv(path, ("n", "m", "re", "im"), rows)


def export_zeros(path, zeros_by_n, precision_digits):
    with mp.workdps(precision_digits):
        rows = [(n, i, mp_to_str(z.real), mp_to_str(z.imag))
                for n in sorted(zeros_by_n) for i, z in enumerate(zeros_by_n[n])]
    write_csv(path, ("n", "index", "re", "im"), rows)
