"""Area moments <z^j, z^k> = int_G z^j conj(z)^k dA.

Three routes:

* polygons, exactly: Green's formula turns the area integral into
  (1 / (2i(k+1))) * contour integral of z^j conj(z)^(k+1) dz; on each edge
  the integrand is a polynomial in the edge parameter.  Vertices are
  binary floating point numbers, i.e. dyadic rationals, so the whole
  computation runs in integers with a single final division.
* map domains, exactly: with z = psi(w) and psi^m = sum_p s_p^(m) w^p the
  contour integral over |w| = 1 collapses to
  pi / ((j+1)(k+1)) * sum_p p s_p^(j+1) conj(s_p^(k+1)).
* map domains, by quadrature: composite Gauss-Legendre panels on
  theta in [0, 2 pi) graded geometrically toward corner preimages.
  Independent of the series route, so each checks the other.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp
import numpy as np
from mpmath.libmp import from_man_exp

from . import _kernels
from ._precision import GUARD_BITS, dps_to_bits
from .io import atomic_write_text, mp_to_str

CACHE_VERSION = 1
CACHE_ENV = "BERGPOLY_CACHE_DIR"


class MomentError(ArithmeticError):
    """Quadrature failed to converge or input was degenerate."""


class CacheError(RuntimeError):
    """A cache file does not match its digest or is malformed."""


@dataclass(eq=False)
class MomentMatrix:
    N: int
    entries: list
    domain_digest: str
    precision_digits: int
    recomputed: int = 0
    method: str = ""

    def __getitem__(self, jk):
        j, k = jk
        return self.entries[j][k]

    def matrix(self):
        with mp.workdps(self.precision_digits):
            return mp.matrix(self.entries)

    def leading(self, n):
        """The (n+1) x (n+1) leading block as a new MomentMatrix."""
        return MomentMatrix(n, [row[:n + 1] for row in self.entries[:n + 1]],
                            self.domain_digest, self.precision_digits, 0, self.method)

    def inner(self, u, v):
        """<sum u_j z^j, sum v_k z^k> for coefficient vectors ``u``, ``v``."""
        with mp.workdps(self.precision_digits):
            acc = mp.mpc(0)
            for j, uj in enumerate(u):
                if uj == 0:
                    continue
                row = self.entries[j]
                acc += uj * mp.fsum(row[k] * mp.conj(vk) for k, vk in enumerate(v) if vk != 0)
            return acc

    def norm2(self, u):
        return self.inner(u, u).real


# -- exact polygon moments ------------------------------------------------------

def _dyadic(x):
    """mpf -> (integer mantissa, exponent)."""
    sign, man, exp, _ = mp.mpf(x)._mpf_
    if not man:
        return 0, 0
    return (-man if sign else man), exp


def _edge_data(vertices):
    """Edges a + t d with Gaussian-integer numerators over a common 2**e."""
    parts = []
    for v in vertices:
        parts.extend([_dyadic(v.real), _dyadic(v.imag)])
    e = min(ex for m, ex in parts if m) if any(m for m, _ in parts) else 0
    ints = [(m << (ex - e)) if m else 0 for m, ex in parts]
    pts = [(ints[2 * i], ints[2 * i + 1]) for i in range(len(vertices))]
    edges = []
    n = len(pts)
    for i in range(n):
        a = pts[i]
        b = pts[(i + 1) % n]
        d = (b[0] - a[0], b[1] - a[1])
        if d == (0, 0):
            raise MomentError(f"degenerate edge at vertex {i}")
        edges.append((a, d))
    return edges, e


def _power_rows(a, d, m_max):
    """Coefficients in t of (a + d t)**m for m <= m_max, as integer arrays."""
    size = m_max + 1
    Wr = np.zeros((size, size), dtype=object)
    Wi = np.zeros((size, size), dtype=object)
    Wr[0, 0] = 1
    Wi[0, 0] = 0
    ar, ai = a
    dr, di = d
    for m in range(m_max):
        r, i = Wr[m], Wi[m]
        nr = np.zeros(size, dtype=object)
        ni = np.zeros(size, dtype=object)
        # times a
        nr[:m + 1] += r[:m + 1] * ar - i[:m + 1] * ai
        ni[:m + 1] += r[:m + 1] * ai + i[:m + 1] * ar
        # times d t
        nr[1:m + 2] += r[:m + 1] * dr - i[:m + 1] * di
        ni[1:m + 2] += r[:m + 1] * di + i[:m + 1] * dr
        Wr[m + 1], Wi[m + 1] = nr, ni
    return Wr, Wi


def _polygon_integer_table(vertices, N):
    """Integer matrices (Re, Im) and scale data for all j, k <= N."""
    edges, e = _edge_data(vertices)
    L = 1
    for q in range(1, 2 * N + 3):
        L = L * q // math.gcd(L, q)
    size = N + 2
    H = np.array([[L // (p + q + 1) for q in range(size)] for p in range(size)], dtype=object)
    Tr = np.zeros((N + 1, N + 1), dtype=object)
    Ti = np.zeros((N + 1, N + 1), dtype=object)
    for a, d in edges:
        Wr, Wi = _power_rows(a, d, N + 1)
        Ur, Ui = Wr[:N + 1], Wi[:N + 1]
        Vr, Vi = Wr[1:], Wi[1:]
        Xr, Xi = Ur.dot(H), Ui.dot(H)
        # X conj(V)^T
        Yr = Xr.dot(Vr.T) + Xi.dot(Vi.T)
        Yi = Xi.dot(Vr.T) - Xr.dot(Vi.T)
        dr, di = d
        Tr += Yr * dr - Yi * di
        Ti += Yr * di + Yi * dr
    return Tr, Ti, e, L


def _polygon_entry(Tr, Ti, e, L, j, k):
    # value = T * 2**(e (j + k + 2)) / (2 i (k + 1) L)
    #       = (Ti - i Tr) * 2**(e (j + k + 2)) / (2 (k + 1) L)
    den = 2 * (k + 1) * L
    ex = e * (j + k + 2)
    return mp.mpc(_ratio(int(Ti[j, k]), den, ex), _ratio(-int(Tr[j, k]), den, ex))


def _ratio(num, den, ex):
    # num * 2**ex / den correctly rounded at the working precision
    return mp.mpf(from_man_exp(num, ex, mp.mp.prec + 20, "n")) / den


def polygon_moment(vertices, j, k, precision_digits=None):
    """Exact <z^j, z^k> over the polygon with the given counterclockwise vertices."""
    P = precision_digits or mp.mp.dps
    with mp.workdps(P):
        vs = [mp.mpc(v) for v in vertices]
        n = max(j, k)
        Tr, Ti, e, L = _polygon_integer_table(vs, n)
        return _polygon_entry(Tr, Ti, e, L, j, k)


def polygon_moments(vertices, N, precision_digits):
    with mp.workdps(precision_digits):
        vs = [mp.mpc(v) for v in vertices]
        Tr, Ti, e, L = _polygon_integer_table(vs, N)
        return [[_polygon_entry(Tr, Ti, e, L, j, k) for k in range(N + 1)] for j in range(N + 1)]


# -- exact series moments -------------------------------------------------------

def fixed_power_table(psi, m_max, F):
    """Fixed-point coefficients of psi^1 .. psi^m_max, one row per power.

    Column c holds the coefficient of w^(m_max - c); returns (re, im, m_max).
    ``psi`` must be exact with top power 1.
    """
    key = (id(psi), m_max, F)
    hit = _POWER_MEMO.get("last")
    if hit is not None and hit[0] == key and hit[1] is psi:
        return hit[2]
    top = m_max
    low = -m_max * psi.depth
    width = top - low + 1
    Sr = np.zeros((m_max, width), dtype=object)
    Si = np.zeros((m_max, width), dtype=object)
    base = _kernels.encode(psi.coeffs, F)
    cur = base
    for m in range(1, m_max + 1):
        if m > 1:
            cur = _kernels.cmul(cur, base, F)
        re, im = cur
        off = top - m
        Sr[m - 1, off:off + len(re)] = re
        Si[m - 1, off:off + len(im)] = im
    _POWER_MEMO["last"] = (key, psi, (Sr, Si, top))
    return Sr, Si, top


_POWER_MEMO = {}


def series_moments(psi, N, rows=None):
    """Moment matrix of the domain bounded by psi(|w| = 1), psi exact.

    ``rows`` restricts computation to the listed j (the full row over k is
    returned for each); default is every row.
    """
    if not psi.exact:
        raise MomentError("series moments need an exact (finite) Laurent polynomial")
    P = psi.precision_digits
    F = dps_to_bits(P) + GUARD_BITS
    if rows is None:
        rows = range(N + 1)
    rows = sorted(set(rows))
    with mp.workdps(P):
        Sr, Si, top = fixed_power_table(psi, N + 1, F)
        width = Sr.shape[1]
        weights = np.array([top - c for c in range(width)], dtype=object)
        Ar, Ai = Sr[rows] * weights, Si[rows] * weights
        # A conj(S)^T
        Gr = Ar.dot(Sr.T) + Ai.dot(Si.T)
        Gi = Ai.dot(Sr.T) - Ar.dot(Si.T)
        out = {}
        pi = mp.pi
        prec = mp.mp.prec
        for r, j in enumerate(rows):
            vals = []
            for k in range(N + 1):
                z = mp.make_mpc((from_man_exp(int(Gr[r, k]), -2 * F, prec + 10, "n"),
                                 from_man_exp(int(Gi[r, k]), -2 * F, prec + 10, "n")))
                vals.append(pi * z / ((j + 1) * (k + 1)))
            out[j] = vals
        return out


# -- graded boundary quadrature -------------------------------------------------

def _gl_nodes(n, P):
    """Gauss-Legendre nodes and weights on [-1, 1] with n points (Newton-polished)."""
    key = (n, P)
    if key in _GL_CACHE:
        return _GL_CACHE[key]
    x0, _ = np.polynomial.legendre.leggauss(n)
    xs, ws = [], []
    with mp.workdps(P + 10):
        for x in x0:
            x = mp.mpf(x)
            for _ in range(100):
                p, dp = mp.legendre(n, x), mp.diff(lambda t: mp.legendre(n, t), x)
                dx = p / dp
                x -= dx
                if abs(dx) < mp.mpf(10) ** (-(P + 8)):
                    break
            dp = mp.diff(lambda t: mp.legendre(n, t), x)
            xs.append(x)
            ws.append(2 / ((1 - x * x) * dp * dp))
    _GL_CACHE[key] = (xs, ws)
    return xs, ws


_GL_CACHE = {}


def graded_breakpoints(corner_angles, levels, base_panels=8):
    """Panel endpoints on [0, 2 pi], halving toward each corner angle."""
    two_pi = 2 * mp.pi
    pts = {mp.mpf(0), two_pi}
    for i in range(1, base_panels):
        pts.add(two_pi * i / base_panels)
    h = two_pi / (2 * base_panels)
    for c in corner_angles:
        c = mp.mpf(c) % two_pi
        pts.add(c)
        for lev in range(1, levels + 1):
            off = h * mp.mpf(2) ** (-lev)
            for x in (c - off, c + off):
                pts.add(x % two_pi)
        for x in (c - h, c + h):
            pts.add(x % two_pi)
    return sorted(pts)


def _grading_levels(P, ratio=0.5):
    return min(int(math.ceil(P * math.log(10) / abs(math.log(ratio)))), 60)


def map_moments_quadrature(psi, corner_angles, N, precision_digits=None, order=8,
                           max_doublings=6, tol_digits=None):
    """All moments j, k <= N by graded Gauss-Legendre boundary quadrature.

    The node count per panel doubles until two successive results agree to
    ``10**-tol_digits`` relatively (default ``P - 10``).  Raises
    :class:`MomentError` if that never happens.
    """
    P = precision_digits or psi.precision_digits
    tol_digits = P - 10 if tol_digits is None else tol_digits
    levels = _grading_levels(P)
    dpsi = psi.derivative()
    prev = None
    with mp.workdps(P + 10):
        bps = graded_breakpoints(corner_angles, levels)
        tol = mp.mpf(10) ** (-tol_digits)
        n = order
        for _ in range(max_doublings + 1):
            xs, ws = _gl_nodes(n, P)
            cur = [[mp.mpc(0)] * (N + 1) for _ in range(N + 1)]
            for a, b in zip(bps[:-1], bps[1:]):
                half, mid = (b - a) / 2, (a + b) / 2
                for x, wt in zip(xs, ws):
                    th = mid + half * x
                    w = mp.expj(th)
                    z = psi(w)
                    dz = dpsi(w) * 1j * w * wt * half
                    zc = mp.conj(z)
                    zj = [mp.mpc(1)]
                    for _j in range(N):
                        zj.append(zj[-1] * z)
                    zk = zc
                    for k in range(N + 1):
                        fac = zk * dz
                        row = cur
                        for j in range(N + 1):
                            row[j][k] += zj[j] * fac
                        zk *= zc
            for j in range(N + 1):
                for k in range(N + 1):
                    cur[j][k] /= 2j * (k + 1)
            if prev is not None:
                scale = max(abs(cur[j][j]) for j in range(N + 1))
                diff = max(abs(cur[j][k] - prev[j][k]) for j in range(N + 1) for k in range(N + 1))
                if diff <= tol * scale:
                    with mp.workdps(P):
                        return [[+v for v in row] for row in cur]
            prev = cur
            n *= 2
    raise MomentError("graded quadrature did not converge; corner under-resolved or cusp present")


def map_moment(psi, corners, j, k, precision_digits=None, **kw):
    """Single moment by graded quadrature; ``corners`` are Corner objects or angles."""
    angles = []
    for c in corners:
        ang = getattr(c, "preimage_angle", c)
        if ang is not None:
            angles.append(ang)
    n = max(j, k)
    return map_moments_quadrature(psi, angles, n, precision_digits, **kw)[j][k]


# -- cache ----------------------------------------------------------------------

def default_cache_dir():
    env = os.environ.get(CACHE_ENV)
    if env:
        return Path(env)
    return Path(os.path.expanduser("~")) / ".cache" / "bergpoly"


def cache_path(cache_dir, digest, method):
    return Path(cache_dir) / f"{digest}-{method}.moments"


def write_cache(path, mm):
    prec = dps_to_bits(mm.precision_digits) + 20
    lines = [f"bergpoly-moments {CACHE_VERSION}", f"digest {mm.domain_digest}",
             f"precision {mm.precision_digits}", f"N {mm.N}"]
    with mp.workdps(mm.precision_digits):
        for j in range(mm.N + 1):
            for k in range(j, mm.N + 1):
                v = mm.entries[j][k]
                lines.append(f"{j} {k} {mp_to_str(v.real, prec)} {mp_to_str(v.imag, prec)}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_cache(path, digest, precision_digits):
    """Return ``(N, entries)`` from a cache file, or raise CacheError."""
    try:
        text = Path(path).read_text()
    except FileNotFoundError:
        return None
    lines = text.splitlines()
    try:
        if lines[0] != f"bergpoly-moments {CACHE_VERSION}":
            raise CacheError(f"{path}: unsupported cache header {lines[0]!r}")
        if lines[1] != f"digest {digest}":
            raise CacheError(f"{path}: digest mismatch ({lines[1]!r}, expected {digest})")
        if lines[2] != f"precision {precision_digits}":
            raise CacheError(f"{path}: precision mismatch")
        N = int(lines[3].split()[1])
        entries = [[None] * (N + 1) for _ in range(N + 1)]
        with mp.workprec(dps_to_bits(precision_digits) + 20):
            for line in lines[4:]:
                j, k, re, im = line.split()
                j, k = int(j), int(k)
                v = mp.mpc(mp.mpf(re), mp.mpf(im))
                entries[j][k] = v
                entries[k][j] = mp.conj(v)
    except CacheError:
        raise
    except (IndexError, ValueError) as exc:
        raise CacheError(f"{path}: malformed cache file ({exc})") from exc
    if any(v is None for row in entries for v in row):
        raise CacheError(f"{path}: incomplete cache file")
    with mp.workdps(precision_digits):
        entries = [[+v for v in row] for row in entries]
    return N, entries


_MEMO = {}


def clear_memo():
    _MEMO.clear()


def gram_matrix(spec, N, precision_digits=None, method="auto", cache_dir=None, use_cache=True):
    """Moment matrix of ``spec`` for degrees 0..N.

    Parameters
    ----------
    method : {"auto", "exact", "series", "quadrature"}
        ``auto`` picks the exact polygon route or the series route.
    cache_dir : path, optional
        Directory of the on-disk cache (default: ``$BERGPOLY_CACHE_DIR`` or
        ``~/.cache/bergpoly``).  Pass ``use_cache=False`` to bypass it.

    Entries present in the cache or in the in-process memo are reused;
    ``recomputed`` on the result counts the upper-triangle entries that had
    to be computed.
    """
    P = precision_digits or spec.precision_digits
    if P != spec.precision_digits:
        raise ValueError("precision differs from the domain's precision context; rebuild the domain")
    if method == "auto":
        method = "exact" if spec.kind == "polygon" else "series"
    if (method == "exact") != (spec.kind == "polygon"):
        raise ValueError(f"method {method!r} does not apply to a {spec.kind} domain")
    digest = spec.digest()
    key = (digest, method)
    known_N, known = -1, None
    if key in _MEMO and _MEMO[key].N >= 0:
        known_N, known = _MEMO[key].N, _MEMO[key].entries
    path = None
    if use_cache:
        path = cache_path(cache_dir or default_cache_dir(), digest, method)
        if known_N < N:
            got = read_cache(path, digest, P)
            if got is not None and got[0] > known_N:
                known_N, known = got
    if known_N >= N:
        mm = MomentMatrix(N, [row[:N + 1] for row in known[:N + 1]], digest, P, 0, method)
        return mm
    with mp.workdps(P):
        if method == "exact":
            entries = polygon_moments(spec.vertices, N, P)
            if known is not None:
                for j in range(known_N + 1):
                    entries[j][:known_N + 1] = known[j][:known_N + 1]
        elif method == "series":
            rows = range(known_N + 1, N + 1)
            new = series_moments(spec.psi, N, rows)
            entries = [[None] * (N + 1) for _ in range(N + 1)]
            for j in range(known_N + 1):
                entries[j][:known_N + 1] = known[j][:known_N + 1]
            for j, vals in new.items():
                for k in range(N + 1):
                    if k <= j or k > known_N:
                        entries[j][k] = vals[k]
                        entries[k][j] = mp.conj(vals[k])
            for j in range(N + 1):
                entries[j][j] = mp.mpc(entries[j][j].real, 0)
        else:
            angles = [c.preimage_angle for c in spec.corners if c.preimage_angle is not None]
            angles += list(spec.cusp_angles)
            entries = map_moments_quadrature(spec.psi, angles, N, P)
        # exact Hermitian symmetry: keep the upper triangle, mirror it
        for j in range(N + 1):
            entries[j][j] = mp.mpc(entries[j][j].real, 0)
            for k in range(j + 1, N + 1):
                entries[k][j] = mp.conj(entries[j][k])
    total = (N + 1) * (N + 2) // 2
    done = (known_N + 1) * (known_N + 2) // 2 if known_N >= 0 else 0
    mm = MomentMatrix(N, entries, digest, P, total - done, method)
    _MEMO[key] = mm
    if path is not None:
        write_cache(path, mm)
    return mm
