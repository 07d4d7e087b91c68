"""Faber polynomials of the first and second kind.

F_n is the polynomial part of Phi^n at infinity and G_n = F_{n+1}' / (n+1)
the polynomial part of Phi^n Phi'.  Two independent routes compute F_n:

* the recurrence obtained from the generating function
  psi'(w) / (psi(w) - z) = sum_n F_n(z) w^(-n-1):
  b F_{m+1} = (z - b_0) F_m - sum_{k=1}^{m} b_k F_{m-k} - m b_m,  F_0 = 1;
* the polynomial part of the series power Phi^n, with Phi obtained by
  reverting psi.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np

from .io import mp_to_str, write_csv
from .series import TruncationError, reversion


@dataclass(eq=False)
class FaberFamily:
    N: int
    F: list        # F[n] ascending coefficients, length n + 1
    G2: list       # G2[n] ascending coefficients of G_n, n <= N - 1
    gamma: mp.mpf
    precision_digits: int

    def F_at(self, n, z):
        return horner(self.F[n], z, self.precision_digits)

    def G_at(self, n, z):
        return horner(self.G2[n], z, self.precision_digits)

    def Fprime_at(self, n, z):
        return horner(derivative(self.F[n]), z, self.precision_digits)


def horner(coeffs, z, precision_digits=None):
    with mp.workdps(precision_digits or mp.mp.dps):
        z = mp.mpmathify(z)
        acc = mp.mpc(0)
        for c in reversed(coeffs):
            acc = acc * z + c
        return acc


def horner_numpy(coeffs, z):
    z = np.asarray(z, dtype=complex)
    acc = np.zeros_like(z)
    for c in reversed(coeffs):
        acc = acc * z + complex(c)
    return acc


def derivative(coeffs):
    return [m * c for m, c in enumerate(coeffs)][1:] or [mp.mpc(0)]


def laurent_coefficient(psi, m):
    """b_m, the coefficient of w^(-m) in psi (m = -1 gives b itself)."""
    return psi.coeff(-m)


def _second_kind(F, P):
    with mp.workdps(P):
        return [[c / (n + 1) for c in derivative(F[n + 1])] for n in range(len(F) - 1)]


def faber_recurrence(psi, N):
    """F_0..F_N (and G_0..G_{N-1}) from the coefficients of psi."""
    P = psi.precision_digits
    if psi.top_power != 1:
        raise ValueError("psi must have top power 1")
    if not psi.exact and psi.depth < N:
        raise TruncationError(f"psi depth {psi.depth} is below N = {N}")
    with mp.workdps(P):
        b = psi.coeff(1)
        if b == 0:
            raise ValueError("leading coefficient is zero")
        bk = [psi.coeff(-k) for k in range(0, N + 1)]  # bk[0] = b_0
        F = [[mp.mpc(1)]]
        for m in range(N):
            # (z - b_0) F_m
            nxt = [mp.mpc(0)] + list(F[m])
            for i, c in enumerate(F[m]):
                nxt[i] -= bk[0] * c
            for k in range(1, m + 1):
                if bk[k] != 0:
                    for i, c in enumerate(F[m - k]):
                        nxt[i] -= bk[k] * c
            nxt[0] -= m * bk[m] if m >= 1 else 0
            F.append([c / b for c in nxt])
        gamma = 1 / b.real
    return FaberFamily(N, F, _second_kind(F, P), gamma, P)


def faber_oracle(psi, N):
    """F_n as the polynomial part of Phi^n, Phi by series reversion."""
    P = psi.precision_digits
    phi, _ = reversion(psi, depth=N + 2)
    with mp.workdps(P):
        F = [[mp.mpc(1)]]
        cur = None
        for n in range(1, N + 1):
            cur = phi if cur is None else cur * phi
            F.append([cur.coeff(k) for k in range(n + 1)])
        gamma = phi.coeffs[0].real
    return FaberFamily(N, F, _second_kind(F, P), gamma, P)


def max_coefficient_gap(fa, fb, upto=None):
    upto = min(fa.N, fb.N) if upto is None else upto
    with mp.workdps(fa.precision_digits):
        return max(abs(a - b) for n in range(upto + 1) for a, b in zip(fa.F[n], fb.F[n]))


def singular_parts(fam, phi_at, n, z):
    """(E_n(z), H_n(z)) at an exterior point.

    ``phi_at(z)`` must return an object with attributes ``w`` (Phi(z)) and
    ``dphi`` (Phi'(z)), e.g. :func:`bergpoly.conformal.invert_exterior_map`.
    """
    if n > fam.N - 1:
        raise ValueError(f"H_{n} needs F_{n + 1}; the family stops at N = {fam.N}")
    v = phi_at(z)
    with mp.workdps(fam.precision_digits):
        wn = v.w ** n
        E = fam.F_at(n, z) - wn
        H = fam.G_at(n, z) - wn * v.dphi
    return E, H


def boundary_identities(fam, psi, m, n, nodes=4096):
    """Three boundary integrals over Gamma = psi(|w| = 1), by the trapezoidal rule.

    Returns (I_H, I_E, I_delta) with
    I_H = int H_m conj(Phi^(n+1)) dz,  I_E = int Phi^m Phi' conj(E_(n+1)) dz,
    I_delta = (1/(2 pi i)) int Phi^m Phi' conj(Phi^(n+1)) dz;
    the first two vanish and the last is the Kronecker delta.
    """
    # half-step offset keeps nodes off cusp preimages, where psi' = 0
    th = 2 * np.pi * (np.arange(nodes) + 0.5) / nodes
    w = np.exp(1j * th)
    z = psi.eval_numpy(w)
    dpsi = psi.derivative().eval_numpy(w)
    dz = dpsi * 1j * w * (2 * np.pi / nodes)
    dphi = 1 / dpsi
    Hm = horner_numpy(fam.G2[m], z) - w ** m * dphi
    En1 = horner_numpy(fam.F[n + 1], z) - w ** (n + 1)
    I_H = np.sum(Hm * np.conj(w ** (n + 1)) * dz)
    I_E = np.sum(w ** m * dphi * np.conj(En1) * dz)
    I_d = np.sum(w ** m * dphi * np.conj(w ** (n + 1)) * dz) / (2j * np.pi)
    return I_H, I_E, I_d


def export_family(path, fam, kind="F"):
    rows_src = fam.F if kind == "F" else fam.G2
    with mp.workdps(fam.precision_digits):
        rows = [(n, m, mp_to_str(mp.mpc(c).real), mp_to_str(mp.mpc(c).imag))
                for n, row in enumerate(rows_src) for m, c in enumerate(row)]
    write_csv(path, ("n", "m", "re", "im"), rows)
