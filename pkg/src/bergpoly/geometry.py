"""Jordan domains: polygons and images of the unit circle under a Laurent map.

A map-defined domain is the bounded region enclosed by ``psi(|w| = 1)``
where ``psi`` is the stored (finite) Laurent polynomial.  For the square
the stored series is a truncation of the exterior Schwarz-Christoffel map,
so that domain is a square with very slightly rounded corners; the
truncation bound reported by :func:`area` measures the difference.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np

from ._precision import auto_precision
from .series import LaurentAtInfinity


class DomainError(ValueError):
    """Invalid domain data."""


@dataclass(frozen=True)
class Corner:
    position: mp.mpc
    omega: mp.mpf
    # angle of the preimage on |w| = 1, when the exterior map is known
    preimage_angle: mp.mpf | None = None

    def __post_init__(self):
        if not 0 < self.omega < 2:
            raise DomainError(f"corner exterior angle factor omega={self.omega} not in (0, 2)")


@dataclass(frozen=True, eq=False)
class DomainSpec:
    kind: str
    precision_digits: int
    vertices: tuple = ()
    psi: LaurentAtInfinity | None = None
    corners: tuple = ()
    known_capacity: mp.mpf | None = None
    reflection_factor_k: float | None = None
    name: str = ""
    # preimage angles of cusps (omega = 2), kept for quadrature grading only
    cusp_angles: tuple = ()
    # exterior map series of a polygon, when one is available (the square)
    map_series: LaurentAtInfinity | None = None
    # bound on |area(stored domain) - area(ideal domain)| from series truncation
    truncation_bound: mp.mpf = field(default_factory=lambda: mp.mpf(0))

    def __post_init__(self):
        if self.kind not in ("polygon", "map"):
            raise DomainError(f"unknown domain kind {self.kind!r}")
        k = self.reflection_factor_k
        if k is not None and not 0 <= k < 1:
            raise DomainError("reflection factor k must satisfy 0 <= k < 1")
        if self.known_capacity is not None and not self.known_capacity > 0:
            raise DomainError("known capacity must be positive")
        if self.kind == "polygon":
            _validate_polygon(self.vertices, self.precision_digits)
        else:
            if self.psi is None:
                raise DomainError("map-defined domain needs psi")
            if self.psi.top_power != 1:
                raise DomainError("psi must have top power 1")
            b = self.psi.coeffs[0]
            if not (b.imag == 0 and b.real > 0):
                raise DomainError("psi leading coefficient b must be real and positive")
            if self.psi.precision_digits != self.precision_digits:
                raise DomainError("psi precision differs from domain precision")

    @property
    def is_polygon(self):
        return self.kind == "polygon"

    @property
    def exterior_series(self):
        """Series of the exterior map ``psi``, or None when unknown."""
        return self.psi if self.kind == "map" else self.map_series

    @property
    def capacity(self):
        """cap = b, from the series when exact, else from metadata, else None."""
        if self.kind == "map":
            return self.psi.coeffs[0].real
        return self.known_capacity

    @property
    def gamma(self):
        c = self.capacity
        if c is None:
            return None
        with mp.workdps(self.precision_digits):
            return 1 / mp.mpf(c)

    def digest(self):
        return hashlib.sha256(json.dumps(_canonical(self), sort_keys=True).encode()).hexdigest()[:32]


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    spec: DomainSpec
    notes: str = ""


# -- polygons -----------------------------------------------------------------

def _seg_intersect(p1, p2, q1, q2):
    def orient(a, b, c):
        v = (b - a).real * (c - a).imag - (b - a).imag * (c - a).real
        return (v > 0) - (v < 0)

    def on_seg(a, b, c):
        return (min(a.real, b.real) <= c.real <= max(a.real, b.real)
                and min(a.imag, b.imag) <= c.imag <= max(a.imag, b.imag))

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    return ((o1 == 0 and on_seg(p1, p2, q1)) or (o2 == 0 and on_seg(p1, p2, q2))
            or (o3 == 0 and on_seg(q1, q2, p1)) or (o4 == 0 and on_seg(q1, q2, p2)))


def signed_area(vertices):
    s = 0
    n = len(vertices)
    for i in range(n):
        a, b = vertices[i], vertices[(i + 1) % n]
        s += a.real * b.imag - b.real * a.imag
    return s / 2


def _validate_polygon(vertices, P):
    n = len(vertices)
    if n < 3:
        raise DomainError("a polygon needs at least 3 vertices")
    with mp.workdps(P):
        if len(set((v.real, v.imag) for v in vertices)) != n:
            raise DomainError("polygon vertices must be distinct")
        for i in range(n):
            for j in range(i + 1, n):
                if j == i + 1 or (i == 0 and j == n - 1):
                    continue
                if _seg_intersect(vertices[i], vertices[(i + 1) % n],
                                  vertices[j], vertices[(j + 1) % n]):
                    raise DomainError(f"polygon edges {i} and {j} intersect")
        if signed_area(vertices) <= 0:
            raise DomainError("polygon vertices must be counterclockwise")


def polygon_corners(vertices, P):
    """Corners at every vertex where the boundary turns."""
    out = []
    n = len(vertices)
    with mp.workdps(P):
        for i in range(n):
            prev, cur, nxt = vertices[i - 1], vertices[i], vertices[(i + 1) % n]
            turn = mp.arg((nxt - cur) / (cur - prev))
            if turn == 0:
                continue
            out.append(Corner(cur, 1 + turn / mp.pi))
    return tuple(out)


def polygon(vertices, precision_digits, known_capacity=None, reflection_factor_k=None,
            name="polygon", map_series=None):
    with mp.workdps(precision_digits):
        vs = tuple(mp.mpc(v) for v in vertices)
        cap = None if known_capacity is None else mp.mpf(known_capacity)
    _validate_polygon(vs, precision_digits)
    return DomainSpec("polygon", precision_digits, vertices=vs,
                      corners=polygon_corners(vs, precision_digits), known_capacity=cap,
                      reflection_factor_k=reflection_factor_k, name=name, map_series=map_series)


def from_series(psi, corners=(), reflection_factor_k=None, name="map", cusp_angles=(),
                truncation_bound=0):
    return DomainSpec("map", psi.precision_digits, psi=psi, corners=tuple(corners),
                      known_capacity=psi.coeffs[0].real,
                      reflection_factor_k=reflection_factor_k, name=name,
                      cusp_angles=tuple(cusp_angles), truncation_bound=mp.mpf(truncation_bound))


# -- catalog ------------------------------------------------------------------

def default_depth(n_max):
    return 4 * int(n_max) + 64


def square_capacity(side, P):
    """cap of the square: Gamma(1/4)^2 s / (4 pi^(3/2))."""
    with mp.workdps(P):
        return mp.gamma(mp.mpf(1) / 4) ** 2 * mp.mpf(side) / (4 * mp.pi ** 1.5)


def square_series(side, depth, P):
    """Exterior map of the axis-aligned square, truncated at ``w**-depth``.

    From psi'(w) = b (1 + w**-4)**(1/2): expanding binomially and
    integrating termwise gives b_{4k-1} = b C(1/2, k) / (1 - 4k).  The sign
    inside the root puts the corners at psi(exp(i pi/4) i**j).
    """
    with mp.workdps(P):
        b = square_capacity(side, P)
        terms = {1: b}
        half = mp.mpf(1) / 2
        k = 1
        while 4 * k - 1 <= depth:
            terms[1 - 4 * k] = b * mp.binomial(half, k) / (1 - 4 * k)
            k += 1
        return LaurentAtInfinity.from_powers(terms, depth, P, exact=True)


def _square_tail_area(side, depth, P):
    # sum over omitted terms of m |b_m|^2, with m = 4k - 1
    with mp.workdps(30):
        b = square_capacity(side, 30)
        k0 = (depth + 1) // 4 + 1
        k1 = 64 * k0
        s = mp.fsum(mp.binomial(mp.mpf(1) / 2, k) ** 2 / (4 * k - 1) for k in range(k0, k1))
        # C(1/2, k)^2 < 1/(4 pi k^3), so the rest is below 1/(48 pi (k1-1)^3)
        s += 1 / (48 * mp.pi * mp.mpf(k1 - 1) ** 3)
        return mp.pi * b ** 2 * s


def _hypocycloid(n, P, depth):
    if int(n) != n or n < 2:
        raise DomainError("hypocycloid needs an integer n >= 2")
    n = int(n)
    with mp.workdps(P):
        psi = LaurentAtInfinity.from_powers({1: 1, -n: mp.mpf(1) / n}, n, P, exact=True)
        cusps = tuple(2 * mp.pi * j / (n + 1) for j in range(n + 1))
    return from_series(psi, name=f"hypocycloid{n}", cusp_angles=cusps)


CATALOG_NAMES = ("disk", "ellipse", "square", "square_map", "hypocycloid", "lshape")

_NOTES = {
    "disk": "psi(w) = r w; every diagnostic vanishes identically",
    "ellipse": "psi(w) = a w + b/w with a > b > 0; semi-axes a + b and a - b, capacity a",
    "square": "axis-aligned square as a polygon, vertices (+-s/2, +-s/2); exact moments",
    "square_map": "the same square through its truncated exterior Schwarz-Christoffel series",
    "hypocycloid": "psi(w) = w + 1/(n w^n); n + 1 cusps, so no admissible corners",
    "lshape": "L-shaped hexagon, one reentrant corner (omega = 1/2)",
}


def catalog(name, params=(), precision_digits=None, n_max=None, depth=None):
    """Build a catalog domain.

    Parameters
    ----------
    name : str
        One of ``CATALOG_NAMES``.
    params : sequence of float
        Family parameters (radius, (a, b), side, n); defaults where omitted.
    precision_digits : int, optional
        Working digits; defaults to the automatic rule for ``n_max``.
    n_max : int, optional
        Largest degree the domain will be used for (default 20); fixes the
        default series depth ``4 n_max + 64`` for the square.
    """
    params = list(params)
    if n_max is None:
        n_max = 20
    P = precision_digits or auto_precision(n_max)
    if depth is None:
        depth = default_depth(n_max)
    with mp.workdps(P):
        if name == "disk":
            r = mp.mpf(params[0]) if params else mp.mpf(1)
            if r <= 0:
                raise DomainError("disk radius must be positive")
            psi = LaurentAtInfinity.from_powers({1: r}, 0, P, exact=True)
            spec = from_series(psi, reflection_factor_k=0.0, name="disk")
        elif name == "ellipse":
            a, b = (mp.mpf(params[0]), mp.mpf(params[1])) if len(params) >= 2 else (mp.mpf(1), mp.mpf("0.25"))
            if not a > b > 0:
                raise DomainError("ellipse needs a > b > 0")
            psi = LaurentAtInfinity.from_powers({1: a, -1: b}, 1, P, exact=True)
            spec = from_series(psi, name="ellipse")
        elif name == "square":
            s = mp.mpf(params[0]) if params else mp.mpf(1)
            if s <= 0:
                raise DomainError("side must be positive")
            h = s / 2
            verts = [mp.mpc(-h, -h), mp.mpc(h, -h), mp.mpc(h, h), mp.mpc(-h, h)]
            spec = polygon(verts, P, known_capacity=square_capacity(s, P), name="square",
                           map_series=square_series(s, max(depth, 512), P))
        elif name == "square_map":
            s = mp.mpf(params[0]) if params else mp.mpf(1)
            if s <= 0:
                raise DomainError("side must be positive")
            psi = square_series(s, depth, P)
            corners = []
            for j in range(4):
                t = mp.pi / 4 + j * mp.pi / 2
                corners.append(Corner(psi(mp.expjpi(t / mp.pi)), mp.mpf(3) / 2, t))
            spec = from_series(psi, corners, name="square_map",
                               truncation_bound=_square_tail_area(s, depth, P))
        elif name == "hypocycloid":
            n = params[0] if params else 3
            spec = _hypocycloid(n, P, depth)
        elif name == "lshape":
            verts = [0, 2, 2 + 1j, 1 + 1j, 1 + 2j, 2j]
            spec = polygon(verts, P, name="lshape")
        else:
            raise DomainError(f"unknown catalog domain {name!r}; known: {', '.join(CATALOG_NAMES)}")
    return spec


def catalog_entries(precision_digits=60):
    return [CatalogEntry(n, catalog(n, precision_digits=precision_digits), _NOTES[n])
            for n in CATALOG_NAMES]


# -- measurements ---------------------------------------------------------------

def area(spec):
    """Return ``(area, truncation_bound)``.

    Polygons use the shoelace formula.  Map domains use
    pi (b^2 - sum m |b_m|^2), exact for the stored series.
    """
    P = spec.precision_digits
    with mp.workdps(P):
        if spec.kind == "polygon":
            return signed_area(spec.vertices), mp.mpf(0)
        psi = spec.psi
        val = abs(psi.coeffs[0]) ** 2
        for m in range(1, psi.depth + 1):
            c = psi.coeff(-m)
            if c:
                val -= m * abs(c) ** 2
        val *= mp.pi
        if val <= 0:
            raise DomainError("area formula is non-positive: series not univalent or under-truncated")
        return val, spec.truncation_bound


def boundary_samples(spec, count=4096, dtype=complex):
    """Points along the boundary in counterclockwise order (float)."""
    if spec.kind == "map":
        th = 2 * np.pi * np.arange(count) / count
        return spec.psi.eval_numpy(np.exp(1j * th))
    vs = np.array([complex(v) for v in spec.vertices])
    lens = np.abs(np.roll(vs, -1) - vs)
    per = np.maximum(1, np.round(count * lens / lens.sum()).astype(int))
    pts = []
    for i, v in enumerate(vs):
        t = np.arange(per[i]) / per[i]
        pts.append(v + t * (vs[(i + 1) % len(vs)] - v))
    return np.concatenate(pts)


def winding_number(curve, z):
    """Winding number of the closed sampled curve about ``z``."""
    d = np.asarray(curve, dtype=complex) - complex(z)
    ang = np.angle(np.roll(d, -1) / d)
    return int(round(ang.sum() / (2 * np.pi)))


def interior_point(spec):
    if spec.kind == "map":
        return complex(spec.psi.coeff(0))
    vs = [complex(v) for v in spec.vertices]
    # centroid of a triangle fan is inside for the convex and L-shaped cases;
    # fall back to a search on a grid otherwise
    c = sum(vs) / len(vs)
    if contains(spec, c):
        return c
    xs = [v.real for v in vs]
    ys = [v.imag for v in vs]
    for x in np.linspace(min(xs), max(xs), 41)[1:-1]:
        for y in np.linspace(min(ys), max(ys), 41)[1:-1]:
            if contains(spec, complex(x, y)):
                return complex(x, y)
    raise DomainError("could not find an interior point")


def contains(spec, z, samples=4096):
    """True when ``z`` lies in the open domain (float test)."""
    z = complex(z)
    if spec.kind == "polygon":
        vs = [complex(v) for v in spec.vertices]
        inside = False
        n = len(vs)
        for i in range(n):
            a, b = vs[i], vs[(i + 1) % n]
            if (a.imag > z.imag) != (b.imag > z.imag):
                x = a.real + (z.imag - a.imag) * (b.real - a.real) / (b.imag - a.imag)
                if z.real < x:
                    inside = not inside
        return inside
    return winding_number(boundary_samples(spec, samples), z) == 1


def check_winding(spec, samples=4096):
    """Winding number of the sampled boundary about an interior point (should be 1)."""
    pt = interior_point(spec) if spec.kind == "map" else interior_point(spec)
    return winding_number(boundary_samples(spec, samples), pt)


def convex_hull(points):
    """Counterclockwise hull of complex points (monotone chain)."""
    pts = sorted(set((p.real, p.imag) for p in points))
    if len(pts) <= 2:
        return [complex(*p) for p in pts]

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower, upper = [], []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return [complex(*p) for p in lower[:-1] + upper[:-1]]


# -- serialisation ------------------------------------------------------------

def _s(x):
    from .io import mp_to_str
    return mp_to_str(x)


def _canonical(spec):
    with mp.workdps(spec.precision_digits):
        d = {"kind": spec.kind, "precision_digits": spec.precision_digits}
        if spec.kind == "polygon":
            d["vertices"] = [[_s(v.real), _s(v.imag)] for v in spec.vertices]
        else:
            d["psi"] = spec.psi.to_record()
        if spec.known_capacity is not None:
            d["known_capacity"] = _s(spec.known_capacity)
        if spec.reflection_factor_k is not None:
            d["reflection_factor_k"] = repr(float(spec.reflection_factor_k))
        return d


def to_config(spec):
    """Plain dict suitable for the TOML writer (decimal strings throughout)."""
    d = _canonical(spec)
    with mp.workdps(spec.precision_digits):
        d["name"] = spec.name
        if spec.kind == "map":
            psi = d.pop("psi")
            d["top_power"] = psi["top_power"]
            d["exact"] = psi["exact"]
            d["coeffs"] = psi["coeffs"]
            d["corners"] = [[_s(c.position.real), _s(c.position.imag), _s(c.omega),
                             "" if c.preimage_angle is None else _s(c.preimage_angle)]
                            for c in spec.corners]
    return d


def from_config(d, precision_digits=None, n_max=None):
    """Inverse of :func:`to_config`; also accepts ``{"catalog": name, "params": [...]}``."""
    if "catalog" in d:
        return catalog(d["catalog"], d.get("params", ()),
                       precision_digits=precision_digits or d.get("precision_digits"), n_max=n_max)
    P = int(precision_digits or d["precision_digits"])
    kind = d.get("kind")
    k = d.get("reflection_factor_k")
    k = None if k is None else float(k)
    with mp.workdps(P):
        cap = d.get("known_capacity")
        cap = None if cap is None else mp.mpf(cap)
        if kind == "polygon":
            verts = [mp.mpc(mp.mpf(re), mp.mpf(im)) for re, im in d["vertices"]]
            return polygon(verts, P, known_capacity=cap, reflection_factor_k=k,
                           name=d.get("name", "polygon"))
        if kind == "map":
            rec = {"top_power": d.get("top_power", 1), "precision_digits": P,
                   "exact": d.get("exact", True), "coeffs": d["coeffs"]}
            psi = LaurentAtInfinity.from_record(rec)
            corners = []
            for row in d.get("corners", []):
                ang = row[3] if len(row) > 3 and row[3] != "" else None
                corners.append(Corner(mp.mpc(mp.mpf(row[0]), mp.mpf(row[1])), mp.mpf(row[2]),
                                      None if ang is None else mp.mpf(ang)))
            return from_series(psi, corners, reflection_factor_k=k, name=d.get("name", "map"))
    raise DomainError(f"unknown domain kind {kind!r}")
