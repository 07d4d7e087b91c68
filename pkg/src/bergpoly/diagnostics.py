"""Strong-asymptotic error quantities, identity checks and rate fits.

Per degree n:

alpha_n   1 - (n+1)/pi * gamma^(2(n+1)) / lambda_n^2
beta_n    (n+1)/pi * ||q_{n-1}||^2 with q_{n-1} = G_n - (gamma^(n+1)/lambda_n) p_n
eps_n     (n+1)/pi * int_Omega |H_n|^2 dA, computed in the w-plane
xi_n      lambda_n / gamma^(n+1) = sqrt((n+1)/pi) (1 + xi_n)
sigma_n   gamma_hat_n - gamma

The exact identity alpha_n = beta_n + eps_n ties the three routes together.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import mpmath as mp
import numpy as np
from mpmath.libmp import from_man_exp

from . import _kernels, bergman
from ._precision import GUARD_BITS, dps_to_bits
from .conformal import boundary_distance, capacity_from_ratio, phi_from_ratio
from .io import atomic_write_text, mp_to_str, write_csv
from .moments import fixed_power_table


class CapacityUnavailable(ValueError):
    """gamma is needed but neither a series nor a known capacity is available."""


class TailTooLarge(ArithmeticError):
    """The truncated tail of h is not negligible against the eps_n sum."""


# -- per-degree quantities -------------------------------------------------------

def alpha(basis, gamma, n):
    if gamma is None:
        raise CapacityUnavailable("alpha_n needs gamma; supply a known capacity or an exterior series")
    with mp.workdps(basis.precision_digits):
        g = mp.mpf(gamma)
        return 1 - (n + 1) / mp.pi * g ** (2 * (n + 1)) / basis.lambdas[n] ** 2


def xi(basis, gamma, n):
    if gamma is None:
        raise CapacityUnavailable("xi_n needs gamma")
    with mp.workdps(basis.precision_digits):
        return basis.lambdas[n] / mp.mpf(gamma) ** (n + 1) / mp.sqrt((n + 1) / mp.pi) - 1


def q_coefficients(basis, fam, n):
    """Coefficients of q_{n-1} = G_n - (gamma^(n+1)/lambda_n) p_n (degree <= n-1)."""
    with mp.workdps(basis.precision_digits):
        s = fam.gamma ** (n + 1) / basis.lambdas[n]
        G = fam.G2[n]
        q = [G[m] - s * basis.coeffs[n][m] for m in range(n + 1)]
        return q[:n] if n > 0 else [mp.mpc(0)]


def beta(basis, fam, M, n):
    q = q_coefficients(basis, fam, n)
    with mp.workdps(basis.precision_digits):
        return (n + 1) / mp.pi * M.norm2(q)


def q_norm(basis, fam, M, n):
    with mp.workdps(basis.precision_digits):
        return mp.sqrt(M.norm2(q_coefficients(basis, fam, n)))


@dataclass
class EpsilonResult:
    n: int
    eps: mp.mpf
    tail_bound: mp.mpf
    c2: mp.mpc            # coefficient of w^-2 in h
    residual: mp.mpf      # largest coefficient of h at powers >= -1 (should vanish)


def _h_coefficients(psi, fam, ns):
    """{n: (h coefficients as mpc list, lowest power)} for h = G_n(psi) psi' - w^n.

    G_n(psi) psi' = (F_{n+1}(psi))' / (n+1), and F_{n+1}(psi) is a linear
    combination of the powers psi^m.  Rows of zero Faber coefficients and
    all-zero columns of the power table are skipped, which for symmetric
    domains removes most of the work.
    """
    P = psi.precision_digits
    Fb = dps_to_bits(P) + GUARD_BITS
    m_max = max(ns) + 1
    Sr, Si, top = fixed_power_table(psi, m_max, Fb)
    width = Sr.shape[1]
    nz_r = Sr != 0
    nz_i = Si != 0
    out = {}
    with mp.workdps(P):
        for n in ns:
            f = fam.F[n + 1]
            fr, fi = _kernels.encode(f, Fb)
            rows = [m for m in range(1, n + 2) if fr[m] or fi[m]]
            cols = np.nonzero((nz_r[[m - 1 for m in rows]] | nz_i[[m - 1 for m in rows]]).any(axis=0))[0]
            vr = np.array([fr[m] for m in rows], dtype=object)
            vi = np.array([fi[m] for m in rows], dtype=object)
            R = Sr[np.ix_([m - 1 for m in rows], cols)]
            I = Si[np.ix_([m - 1 for m in rows], cols)]
            Tr = vr.dot(R) - vi.dot(I)
            Ti = vr.dot(I) + vi.dot(R)
            # constant term f_0 * psi^0 sits at power 0
            coeff = {}
            for c, tr, ti in zip(cols, Tr, Ti):
                p = top - int(c)
                coeff[p] = (int(tr), int(ti))
            h = {}
            prec = mp.mp.prec
            for p, (tr, ti) in coeff.items():
                if p == 0:
                    continue  # the derivative kills the constant
                val = mp.make_mpc((from_man_exp(tr * p, -2 * Fb, prec, "n"),
                                   from_man_exp(ti * p, -2 * Fb, prec, "n"))) / (n + 1)
                h[p - 1] = val
            h[n] = h.get(n, mp.mpc(0)) - 1
            out[n] = h
    return out


def epsilon_all(psi, fam, ns):
    """EpsilonResult for each n in ``ns`` (map-defined domains only)."""
    if psi is None:
        raise ValueError("eps_n needs the exterior series of a map-defined domain")
    ns = sorted(set(ns))
    P = psi.precision_digits
    hs = _h_coefficients(psi, fam, ns)
    res = {}
    with mp.workdps(P):
        for n in ns:
            h = hs[n]
            resid = max((abs(v) for p, v in h.items() if p >= -1), default=mp.mpf(0))
            terms = {-p: v for p, v in h.items() if p <= -2}
            eps = (n + 1) * mp.fsum(abs(v) ** 2 / (m - 1) for m, v in terms.items())
            tail = mp.mpf(0)
            if not psi.exact:
                # powers below (n+1)*depth are unreliable; bound the tail by
                # extrapolating the last quarter of the retained terms
                ms = sorted(terms)
                q = ms[-max(1, len(ms) // 4):]
                tail = (n + 1) * mp.fsum(abs(terms[m]) ** 2 / (m - 1) for m in q)
                if tail > mp.mpf(10) ** (-(P / 3)) * eps:
                    raise TailTooLarge(f"eps_{n}: tail {mp.nstr(tail, 3)} vs sum {mp.nstr(eps, 3)}")
            res[n] = EpsilonResult(n, eps, tail, terms.get(2, mp.mpc(0)), resid)
    return res


def epsilon(psi, fam, n):
    return epsilon_all(psi, fam, [n])[n]


# -- identity and bound checks -------------------------------------------------------

@dataclass
class CheckResult:
    passed: bool
    residual: object
    detail: str = ""


def check_sum_identity(alpha_n, beta_n, eps_n, tol, floor, precision_digits=None):
    """|alpha - (beta + eps)| <= tol * max(alpha, floor)."""
    with mp.workdps(precision_digits or mp.mp.dps):
        r = abs(alpha_n - (beta_n + eps_n)) / max(alpha_n, mp.mpf(floor))
    return CheckResult(bool(r <= tol), r, f"relative residual {mp.nstr(r, 3)} (tol {tol})")


def norm_identity_check(fam, M, eps_n, n):
    """Relative gap between ||G_n||^2 from moments and pi/(n+1) (1 - eps_n)."""
    with mp.workdps(M.precision_digits):
        lhs = M.norm2(fam.G2[n])
        rhs = mp.pi / (n + 1) * (1 - eps_n)
        return abs(lhs - rhs) / abs(rhs)


def lower_bound_check(alpha_n, eps_n, psi, area_value, k, n):
    """alpha_n and eps_n against pi(1-k^2)/A(G) (n+1)|b_{n+1}|^2; skipped without k."""
    if k is None:
        return CheckResult(True, None, "skipped: reflection factor k not supplied")
    with mp.workdps(psi.precision_digits):
        bound = mp.pi * (1 - mp.mpf(k) ** 2) / area_value * (n + 1) * abs(psi.coeff(-(n + 1))) ** 2
        ok = alpha_n >= bound and eps_n >= bound
        return CheckResult(bool(ok), bound,
                           f"bound {mp.nstr(bound, 6)}, alpha {mp.nstr(alpha_n, 6)}, eps {mp.nstr(eps_n, 6)}")


def pointwise_A(basis, value, n):
    """A_n(z) = p_n(z) / (sqrt((n+1)/pi) Phi^n Phi') - 1 at an ExteriorPointValue."""
    with mp.workdps(basis.precision_digits):
        pn = bergman.evaluate(basis, n, value.z)
        return pn / (mp.sqrt((n + 1) / mp.pi) * value.w ** n * value.dphi) - 1


def pointwise_B(basis, value, n):
    """B_n(z) from the ratio estimate of Phi."""
    with mp.workdps(basis.precision_digits):
        return phi_from_ratio(basis, n, value.z) / value.w - 1


def pointwise_EH(fam, value, n):
    with mp.workdps(fam.precision_digits):
        wn = value.w ** n
        return fam.F_at(n, value.z) - wn, fam.G_at(n, value.z) - wn * value.dphi


def h_bound_check(fam, values, dists, n):
    """max over the grid of n dist(z, Gamma) |H_n(z)|."""
    worst = 0.0
    for v, d in zip(values, dists):
        _, H = pointwise_EH(fam, v, n)
        worst = max(worst, n * float(d) * float(abs(H)))
    return worst


# -- growth estimates ------------------------------------------------------------------

def _poly_from_basis(basis, a):
    """Monomial coefficients of sum_k a_k p_k."""
    n = len(a) - 1
    out = [mp.mpc(0)] * (n + 1)
    for k, ak in enumerate(a):
        for m, c in enumerate(basis.coeffs[k]):
            out[m] += ak * c
    return out


def sup_on_boundary(spec, coeffs, samples=4096):
    """max |P| over Gamma: dense sampling then golden-section refinement of the best samples."""
    from scipy.optimize import minimize_scalar
    cf = np.array([complex(c) for c in coeffs])[::-1]
    if spec.kind == "polygon":
        vs = [complex(v) for v in spec.vertices]
        edges = [(vs[i], vs[(i + 1) % len(vs)]) for i in range(len(vs))]

        def point(t):
            i = min(int(t), len(edges) - 1)
            a, b = edges[i]
            return a + (t - i) * (b - a)
        span = len(edges)
    else:
        psi = spec.psi

        def point(t):
            return complex(psi.eval_numpy(np.array([np.exp(2j * np.pi * t / span)]))[0])
        span = 1.0
    ts = np.linspace(0, span, samples, endpoint=False)
    if spec.kind == "polygon":
        pts = np.array([point(t) for t in ts])
    else:
        pts = spec.psi.eval_numpy(np.exp(2j * np.pi * ts / span))
    vals = np.abs(np.polyval(cf, pts))
    best = float(vals.max())
    h = span / samples
    for i in np.argsort(vals)[-8:]:
        lo, hi = ts[i] - h, ts[i] + h
        if spec.kind == "polygon":
            # stay on one edge so the parametrisation is smooth
            e = int(ts[i])
            lo, hi = max(lo, e), min(hi, e + 1)
        r = minimize_scalar(lambda t: -abs(np.polyval(cf, point(t % span))), bounds=(lo, hi),
                            method="bounded", options={"xatol": 1e-12 * span})
        best = max(best, -float(r.fun))
    return best


def growth_check(M, basis, values, dists, a, spec=None, sup_norm=None):
    """Scaled growth ratios for P = sum a_k p_k of degree n = len(a) - 1.

    Returns ``(lemma_ratio, bw_ratio)``: the maximum over the grid of
    |P(z)| dist(z, Gamma) / (sqrt((n+1)/pi) ||P||_2 |Phi(z)|^(n+1)) and of
    |P(z)| / (||P||_inf |Phi(z)|^n).  ||P||_2 comes from the moment
    quadratic form, ||P||_inf from boundary sampling.
    """
    n = len(a) - 1
    with mp.workdps(basis.precision_digits):
        coeffs = _poly_from_basis(basis, a)
        l2 = mp.sqrt(M.norm2(coeffs))
        if sup_norm is None:
            sup_norm = sup_on_boundary(spec, coeffs)
        c = mp.sqrt((n + 1) / mp.pi)
        lemma, bw = 0.0, 0.0
        for v, d in zip(values, dists):
            pz = abs(_horner(coeffs, v.z))
            lemma = max(lemma, float(pz * d / (c * l2 * v.level ** (n + 1))))
            bw = max(bw, float(pz / (sup_norm * v.level ** n)))
        return lemma, bw


def _horner(coeffs, z):
    acc = mp.mpc(0)
    for c in reversed(coeffs):
        acc = acc * z + c
    return acc


# -- rates ------------------------------------------------------------------------

@dataclass
class RateFit:
    slope: float
    intercept: float
    residual: float
    mode: str


def rate_fit(values, ns, mode="algebraic"):
    """Least-squares fit of log v against log n (algebraic) or n (geometric)."""
    v = np.array([float(x) for x in values])
    n = np.array([float(x) for x in ns])
    if np.any(v <= 0):
        raise ValueError("rate_fit needs positive values")
    x = np.log(n) if mode == "algebraic" else n
    if mode not in ("algebraic", "geometric"):
        raise ValueError(f"unknown mode {mode!r}")
    A = np.vstack([x, np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(v), rcond=None)
    resid = float(np.sqrt(np.mean((A @ coef - np.log(v)) ** 2)))
    return RateFit(float(coef[0]), float(coef[1]), resid, mode)


# -- the corner integral -------------------------------------------------------------

def corner_integral_inner(omega, k, r):
    """int_r^inf exp(-k s^(1/omega)) s^(1/omega - 2) ds = omega k^(omega-1) Gamma(1-omega, k r^(1/omega))."""
    omega = mp.mpf(omega)
    return omega * mp.mpf(k) ** (omega - 1) * mp.gammainc(1 - omega, k * mp.mpf(r) ** (1 / omega))


def corner_integral_check(omega, k, dps=30):
    """k^2 I(omega, k) with I = int_0^delta [inner(r)]^2 r dr, delta = k^-omega.

    The inner integral is in closed form (incomplete gamma); the outer one
    uses tanh-sinh quadrature, which copes with the integrable singularity
    at r = 0.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if not 0 < omega <= 2:
        raise ValueError("omega must lie in (0, 2]")
    with mp.workdps(dps):
        delta = mp.mpf(k) ** (-mp.mpf(omega))
        f = lambda r: corner_integral_inner(omega, k, r) ** 2 * r
        pts = [0] + [delta * mp.mpf(2) ** (-j) for j in range(20, 0, -4)] + [delta]
        val, err = mp.quad(f, pts, error=True)
        if err > mp.mpf(10) ** (-(dps // 2)) * abs(val):
            raise ArithmeticError(f"quadrature did not converge (omega={omega}, k={k}, err={err})")
        return mp.mpf(k) ** 2 * val


# -- zeros -------------------------------------------------------------------------

def _in_hull(hull, z, tol=1e-12):
    n = len(hull)
    if n < 3:
        return True
    for i in range(n):
        a, b = hull[i], hull[(i + 1) % n]
        cross = (b - a).real * (z - a).imag - (b - a).imag * (z - a).real
        if cross < -tol:
            return False
    return True


@dataclass
class ZeroSummary:
    n: int
    in_hull: bool
    max_exterior_level: float | None
    exterior_count: int
    weak_gap: float | None


def zero_diagnostics(basis, emap, n, spec, zs=None, weak_level=2.0, weak_points=32):
    """Convex-hull flag, largest |Phi| over exterior zeros and the n-th root gap."""
    from .geometry import boundary_samples, contains, convex_hull
    if zs is None:
        zs = bergman.zeros(basis, n)
    if spec.kind == "polygon":
        hull = convex_hull([complex(v) for v in spec.vertices])
    else:
        hull = convex_hull(list(boundary_samples(spec, 4096)))
    scale = max(abs(h) for h in hull) if hull else 1.0
    in_hull = all(_in_hull(hull, complex(z), 1e-12 * scale) for z in zs)
    ext = [z for z in zs if not contains(spec, complex(z))]
    level = None
    if ext and emap is not None:
        level = max(float(emap.at(z).level) for z in ext)
    gap = None
    if emap is not None:
        gap = 0.0
        with mp.workdps(basis.precision_digits):
            for j in range(weak_points):
                v = emap.from_w(weak_level * mp.expj(2 * mp.pi * (j + 0.5) / weak_points))
                root = abs(bergman.evaluate(basis, n, v.z)) ** (mp.mpf(1) / n)
                gap = max(gap, float(abs(root - v.level) / v.level))
    return ZeroSummary(n, in_hull, level, len(ext), gap)


# -- report -----------------------------------------------------------------------

@dataclass
class DiagnosticsReport:
    domain: str
    N: int
    precision_digits: int
    per_n: dict = field(default_factory=dict)       # n -> {name: value}
    grid: list = field(default_factory=list)        # dicts: n, z, A, B, E, H
    fits: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def column(self, name, ns=None):
        ns = sorted(self.per_n) if ns is None else ns
        return [self.per_n[n][name] for n in ns]

    def to_dict(self):
        def enc(v):
            if isinstance(v, mp.mpc):
                return [mp_to_str(v.real), mp_to_str(v.imag)]
            if isinstance(v, mp.mpf):
                return mp_to_str(v)
            if isinstance(v, complex):
                return [repr(v.real), repr(v.imag)]
            if isinstance(v, float):
                return repr(v)
            return v
        with mp.workdps(self.precision_digits):
            return {
                "domain": self.domain,
                "N": self.N,
                "precision_digits": self.precision_digits,
                "per_n": {str(n): {k: enc(v) for k, v in sorted(row.items())}
                          for n, row in sorted(self.per_n.items())},
                "grid": [{k: enc(v) for k, v in sorted(g.items())} for g in self.grid],
                "fits": {k: {kk: enc(vv) for kk, vv in sorted(v.items())} for k, v in sorted(self.fits.items())},
                "tolerances": {k: enc(v) for k, v in sorted(self.tolerances.items())},
                "notes": list(self.notes),
            }

    def write_json(self, path):
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    def write_csv(self, path, digits=30):
        names = sorted({k for row in self.per_n.values() for k in row})
        rows = []
        with mp.workdps(self.precision_digits):
            for n in sorted(self.per_n):
                row = [n]
                for k in names:
                    v = self.per_n[n].get(k)
                    row.append(_cell(v, digits))
                rows.append(row)
        write_csv(path, ["n"] + names, rows)

    def write_grid_csv(self, path, digits=20):
        cols = ("A", "B", "E", "H")
        rows = []
        with mp.workdps(self.precision_digits):
            for g in self.grid:
                z = mp.mpc(g["z"])
                row = [g["n"], mp.nstr(z.real, digits), mp.nstr(z.imag, digits),
                       mp.nstr(g["level"], 8), repr(g["dist"])]
                for c in cols:
                    v = g.get(c)
                    row += ["", ""] if v is None else [mp.nstr(v.real, digits), mp.nstr(v.imag, digits)]
                rows.append(row)
        head = ["n", "re_z", "im_z", "level", "dist"] + [f"{p}_{c}" for c in cols for p in ("re", "im")]
        write_csv(path, head, rows)


def _cell(v, digits):
    if v is None:
        return ""
    if isinstance(v, (mp.mpf, mp.mpc)):
        return mp.nstr(v, digits)
    if isinstance(v, bool):
        return "true" if v else "false"
    return repr(v)


ALL_DIAGNOSTICS = ("alpha", "beta", "eps", "xi", "sigma", "grid", "zeros")
DEFAULT_LEVELS = (1.1, 1.25, 1.5, 2.0, 3.0)
DEFAULT_TOLERANCES = {"sum_identity": 1e-6, "norm_identity": 1e-8, "pivot": 10}


def build_report(spec, N, M, basis, include=ALL_DIAGNOSTICS, levels=DEFAULT_LEVELS, count=100,
                 tolerances=None, log=None):
    """Assemble a DiagnosticsReport for degrees 0..N.

    beta_n and eps_n need a map-defined domain (the Faber polynomials of
    a polygon's series describe a slightly different curve), so they are
    skipped for polygons with a note.  ``log`` is an optional callable
    taking one message string.
    """
    from .conformal import exterior_map_for, level_grid
    from .faber import faber_recurrence
    say = log or (lambda msg: None)
    tol = dict(DEFAULT_TOLERANCES)
    tol.update(tolerances or {})
    P = basis.precision_digits
    rep = DiagnosticsReport(spec.name, N, P, tolerances=tol)
    gamma = spec.gamma
    psi = spec.exterior_series
    fam = faber_recurrence(psi, N + 1) if psi is not None and spec.kind == "map" else None
    if gamma is None:
        rep.notes.append("gamma unknown: alpha, xi and sigma skipped")
    if fam is None and ({"beta", "eps"} & set(include)):
        rep.notes.append("beta and eps need a map-defined domain; skipped")
    eps = {}
    if fam is not None and "eps" in include:
        say(f"eps_n for n <= {N}")
        eps = epsilon_all(psi, fam, range(N + 1))
    with mp.workdps(P):
        for n in range(N + 1):
            row = {"lambda": basis.lambdas[n]}
            if gamma is not None and "alpha" in include:
                row["alpha"] = alpha(basis, gamma, n)
            if gamma is not None and "xi" in include:
                row["xi"] = xi(basis, gamma, n)
            if "sigma" in include and n + 1 <= N:
                g, cap, s = capacity_from_ratio(basis, n, spec.known_capacity if spec.known_capacity is not None
                                                else (None if gamma is None else 1 / mp.mpf(gamma)))
                row["gamma_hat"] = g
                if s is not None:
                    row["sigma"] = s
            if fam is not None and "beta" in include:
                row["beta"] = beta(basis, fam, M, n)
            if n in eps:
                row["eps"] = eps[n].eps
                row["eps_tail"] = eps[n].tail_bound
                row["norm_identity_residual"] = norm_identity_check(fam, M, eps[n].eps, n)
                if "alpha" in row and "beta" in row:
                    chk = check_sum_identity(row["alpha"], row["beta"], eps[n].eps,
                                             tol["sum_identity"], mp.mpf(10) ** (-(P // 2)), P)
                    row["sum_identity_residual"] = chk.residual
            rep.per_n[n] = row
    pivot = int(tol["pivot"])
    ns = [n for n in range(max(1, pivot), N + 1)]
    for name in ("alpha", "beta", "eps"):
        vals = [rep.per_n[n].get(name) for n in ns]
        if len(ns) >= 3 and all(v is not None and v > 0 for v in vals):
            for mode in ("algebraic", "geometric"):
                f = rate_fit(vals, ns, mode)
                rep.fits[f"{name}_{mode}"] = {"slope": f.slope, "intercept": f.intercept,
                                              "residual": f.residual, "n_from": ns[0], "n_to": ns[-1]}
    emap = exterior_map_for(spec)
    if "grid" in include and emap is not None:
        say(f"pointwise errors on {count} grid points")
        grid = level_grid(emap, levels, count)
        dists = boundary_distance(spec, np.array([complex(v.z) for v in grid]))
        with mp.workdps(P):
            for v, d in zip(grid, dists):
                pz = bergman.evaluate_all(basis, v.z, N)
                for n in range(1, N + 1):
                    g = {"n": n, "z": v.z, "level": v.level, "dist": float(d),
                         "A": pz[n] / (mp.sqrt((n + 1) / mp.pi) * v.w ** n * v.dphi) - 1}
                    if n + 1 <= N and pz[n] != 0:
                        g["B"] = mp.sqrt(mp.mpf(n + 1) / (n + 2)) * pz[n + 1] / pz[n] / v.w - 1
                    if fam is not None:
                        E, H = pointwise_EH(fam, v, n)
                        g["E"], g["H"] = E, H
                    rep.grid.append(g)
    elif "grid" in include:
        rep.notes.append("no exterior series: grid diagnostics skipped")
    if "zeros" in include:
        say("zeros")
        for n in range(1, N + 1):
            s = zero_diagnostics(basis, emap, n, spec, weak_points=16 if emap is not None else 0)
            row = rep.per_n[n]
            row["zeros_in_hull"] = s.in_hull
            row["zeros_exterior"] = s.exterior_count
            if s.max_exterior_level is not None:
                row["zeros_max_level"] = s.max_exterior_level
            if s.weak_gap is not None:
                row["weak_gap"] = s.weak_gap
    return rep
