"""Exterior map evaluation, capacity estimates and the Bergman kernel method.

Phi is evaluated pointwise by Newton's method on psi(w) = z: a double
precision solve from a good starting guess, then a polish at the working
precision.  Truncated series for Phi are never trusted near the boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import bergman
from .geometry import boundary_samples, contains


class InversionError(ArithmeticError):
    """Newton's method failed or the point is not exterior."""


@dataclass(frozen=True)
class ExteriorPointValue:
    z: mp.mpc
    w: mp.mpc
    dphi: mp.mpc
    level: mp.mpf


# -- exterior map ---------------------------------------------------------------

class ExteriorMap:
    """Pointwise Phi for the exterior of psi(|w| = 1).

    The double-precision starting guess comes from the nearest node of a
    polar grid in the w-plane (or z/b far away).
    """

    FAR = 3.0

    def __init__(self, psi):
        self.psi = psi
        self.dpsi = psi.derivative()
        self.P = psi.precision_digits
        self.b = float(psi.coeffs[0].real)
        self._grid = None

    def _guess_grid(self):
        if self._grid is None:
            r = 1.0 + np.geomspace(1e-3, 3.0, 120)
            th = 2 * np.pi * np.arange(720) / 720
            W = (r[:, None] * np.exp(1j * th[None, :])).ravel()
            self._grid = (W, self.psi.eval_numpy(W))
        return self._grid

    def _float_newton(self, z):
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = z / self.b
        near = np.abs(w) < self.FAR
        if near.any():
            W, Z = self._guess_grid()
            for i in np.nonzero(near)[0]:
                w[i] = W[np.argmin(np.abs(Z - z[i]))]
        for _ in range(60):
            f = self.psi.eval_numpy(w) - z
            d = self.dpsi.eval_numpy(w)
            step = f / d
            # damp steps that would cross into the unit disk
            w_new = w - step
            bad = np.abs(w_new) <= 1
            w_new[bad] = w[bad] - 0.5 * step[bad]
            w = w_new
            if np.max(np.abs(step)) < 1e-15 * np.max(np.abs(w)):
                break
        return w

    def at(self, z, w0=None):
        """ExteriorPointValue at z (Newton, at most 50 steps at working precision)."""
        P = self.P
        with mp.workdps(P):
            z = mp.mpc(z)
            w = mp.mpc(self._float_newton(complex(z))[0] if w0 is None else w0)
            tol = mp.mpf(10) ** (-(P - 10)) * (1 + abs(z))
            for _ in range(50):
                f = self.psi(w) - z
                if abs(f) < tol:
                    break
                w -= f / self.dpsi(w)
            else:
                raise InversionError(f"Newton did not converge at z={mp.nstr(z, 8)}")
            if abs(w) <= 1 + mp.mpf(10) ** (-P / 2):
                raise InversionError(f"z={mp.nstr(z, 8)} is not exterior (|w| = {mp.nstr(abs(w), 8)})")
            return ExteriorPointValue(z, w, 1 / self.dpsi(w), abs(w))

    def at_many(self, zs):
        ws = self._float_newton(zs)
        return [self.at(z, w0=complex(w)) for z, w in zip(np.atleast_1d(zs), ws)]

    def from_w(self, w):
        """Value at z = psi(w), with Phi(z) = w known exactly."""
        with mp.workdps(self.P):
            w = mp.mpc(w)
            if abs(w) <= 1:
                raise InversionError("|w| must exceed 1")
            return ExteriorPointValue(self.psi(w), w, 1 / self.dpsi(w), abs(w))

    def numpy_phi(self, zs):
        """Float (Phi, Phi') arrays for sampling-heavy diagnostics."""
        w = self._float_newton(zs)
        return w, 1 / self.dpsi.eval_numpy(w)


def invert_exterior_map(psi, z):
    """Phi(z) and Phi'(z) for z outside the closed domain bounded by psi(|w| = 1)."""
    return _exterior_map(psi).at(z)


_MAPS = {}


def _exterior_map(psi):
    key = id(psi)
    hit = _MAPS.get(key)
    if hit is None or hit.psi is not psi:
        hit = ExteriorMap(psi)
        _MAPS[key] = hit
    return hit


def exterior_map_for(spec):
    """ExteriorMap for a domain, or None if its exterior series is unknown."""
    psi = spec.exterior_series
    return None if psi is None else _exterior_map(psi)


# -- capacity and ratio estimates -------------------------------------------------

def capacity_from_ratio(basis, n, known_capacity=None):
    """(gamma_hat, cap_hat, sigma_n) with gamma_hat = sqrt((n+1)/(n+2)) lambda_{n+1}/lambda_n.

    sigma_n = gamma_hat - gamma is None unless the capacity is known.
    """
    if n + 1 > basis.N:
        raise ValueError("need n + 1 <= N")
    with mp.workdps(basis.precision_digits):
        g = mp.sqrt(mp.mpf(n + 1) / (n + 2)) * basis.lambdas[n + 1] / basis.lambdas[n]
        sigma = None if known_capacity is None else g - 1 / mp.mpf(known_capacity)
        return g, 1 / g, sigma


def phi_from_ratio(basis, n, z):
    """sqrt((n+1)/(n+2)) p_{n+1}(z) / p_n(z), an estimate of Phi(z)."""
    with mp.workdps(basis.precision_digits):
        pn = bergman.evaluate(basis, n, z)
        if abs(pn) < mp.mpf(10) ** (-(basis.precision_digits - 10)) * basis.lambdas[n]:
            raise ZeroDivisionError(f"p_{n} vanishes to working precision at z")
        return mp.sqrt(mp.mpf(n + 1) / (n + 2)) * bergman.evaluate(basis, n + 1, z) / pn


# -- interior map ------------------------------------------------------------------

def interior_map_bkm(basis, z0, z, N=None, spec=None):
    """Bergman kernel method: f_N(z) = sqrt(pi / K_N(z0, z0)) int_{z0}^{z} K_N(t, z0) dt.

    The kernel is a polynomial in t, so the integral is a termwise
    antiderivative and does not depend on the path.  When ``spec`` is given
    both endpoints are checked to be interior.
    """
    N = basis.N if N is None else N
    if spec is not None:
        for p in (z0, z):
            if not contains(spec, complex(p)):
                raise ValueError(f"point {complex(p)} is not inside the domain")
    with mp.workdps(basis.precision_digits):
        z0 = mp.mpc(z0)
        z = mp.mpc(z)
        pz0 = bergman.evaluate_all(basis, z0, N)
        k00 = mp.fsum(abs(v) ** 2 for v in pz0)
        # K_N(t, z0) = sum_m kappa_m t^m
        kappa = [mp.fsum(basis.coeffs[n][m] * mp.conj(pz0[n]) for n in range(m, N + 1))
                 for m in range(N + 1)]
        zp, z0p = z, z0
        acc = mp.mpc(0)
        for m, k in enumerate(kappa):
            acc += k * (zp - z0p) / (m + 1)
            zp *= z
            z0p *= z0
        return mp.sqrt(mp.pi / k00) * acc


# -- distance and grids ------------------------------------------------------------

def _segment_distance(z, a, b):
    d = b - a
    t = np.clip(((z - a) * np.conj(d)).real / (abs(d) ** 2), 0.0, 1.0)
    return np.abs(z - (a + t * d))


def boundary_distance(spec, z, samples=4096):
    """dist(z, Gamma): exact segments for polygons, sampling plus one Newton step for maps."""
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    if spec.kind == "polygon":
        vs = [complex(v) for v in spec.vertices]
        return np.min([_segment_distance(z, vs[i], vs[(i + 1) % len(vs)])
                       for i in range(len(vs))], axis=0)
    psi = spec.psi
    th = 2 * np.pi * np.arange(samples) / samples
    curve = psi.eval_numpy(np.exp(1j * th))
    idx = np.argmin(np.abs(curve[None, :] - z[:, None]), axis=1)
    t = th[idx]
    best = np.abs(curve[idx] - z)
    # one Newton step on g(t) = Re(conj(psi - z) dpsi/dt)
    d1 = psi.derivative()
    d2 = d1.derivative()
    w = np.exp(1j * t)
    f = psi.eval_numpy(w) - z
    zt = 1j * w * d1.eval_numpy(w)
    ztt = -w * d1.eval_numpy(w) - w * w * d2.eval_numpy(w)
    g = (np.conj(f) * zt).real
    gp = np.abs(zt) ** 2 + (np.conj(f) * ztt).real
    with np.errstate(all="ignore"):
        t2 = t - np.where(gp > 0, g / gp, 0.0)
    refined = np.abs(psi.eval_numpy(np.exp(1j * t2)) - z)
    return np.where(np.isfinite(refined) & (refined < best), refined, best)


def level_grid(emap, levels=(1.1, 1.25, 1.5, 2.0, 3.0), count=100):
    """ExteriorPointValues on level sets |Phi| = R, equi-angular in w.

    ``count`` points in total, split evenly over the levels.
    """
    per = max(1, count // len(levels))
    out = []
    with mp.workdps(emap.P):
        for R in levels:
            for j in range(per):
                th = 2 * mp.pi * (j + mp.mpf(1) / 3) / per
                out.append(emap.from_w(mp.mpf(R) * mp.expj(th)))
    return out


def exterior_lattice(spec, n=20, margin=1e-3):
    """Nodes of an n x n lattice around the domain that lie outside it.

    The box is [-1.5 R, 1.5 R]^2 about the origin with R the largest
    boundary modulus; nodes within ``margin`` of the boundary are dropped.
    """
    curve = boundary_samples(spec, 4096)
    c = complex(np.mean(curve))
    R = float(np.max(np.abs(curve - c)))
    xs = np.linspace(-1.5 * R, 1.5 * R, n)
    pts = (xs[None, :] + 1j * xs[:, None]).ravel() + c
    keep = [p for p in pts if not contains(spec, p)]
    keep = np.array(keep, dtype=complex)
    d = boundary_distance(spec, keep)
    return keep[d > margin]


def distortion_check(spec, emap, points):
    """max over points of (|Phi(z)| - 1) / (4 dist(z, Gamma) |Phi'(z)|); at most 1 when the bound holds."""
    dist = boundary_distance(spec, points)
    worst = 0.0
    rows = []
    for z, dz in zip(points, dist):
        v = emap.at(z)
        ratio = float((v.level - 1) / (4 * dz * abs(v.dphi)))
        rows.append((complex(z), float(v.level), float(dz), float(abs(v.dphi)), ratio))
        worst = max(worst, ratio)
    return worst, rows
