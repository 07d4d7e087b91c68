"""The fourteen acceptance criteria, runnable from tests and from ``bergpoly verify``.

Each criterion returns a :class:`CriterionResult`; the heavy objects
(moment matrices, bases, Faber families) are built once per process and
shared.  Tolerances are the stated ones; nothing here is tuned to pass.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import bergman, conformal, diagnostics as D, faber, geometry, moments


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str

    def line(self):
        return f"[{'PASS' if self.passed else 'FAIL'}] C{self.number:02d} {self.name}: {self.detail}"


_SETTINGS = {"cache_dir": None, "use_cache": False}


def configure(cache_dir=None, use_cache=False):
    """Route moment matrices through the on-disk cache (off by default)."""
    _SETTINGS["cache_dir"] = cache_dir
    _SETTINGS["use_cache"] = use_cache


@dataclass(eq=False)
class Context:
    spec: object
    M: object
    basis: object
    fam: object
    emap: object


@functools.lru_cache(maxsize=None)
def context(key):
    """Shared setups: disk, square, square_map, ellipse, ellipse100."""
    table = {
        "disk": ("disk", (1,), 20, 60),
        "square": ("square", (1,), 41, None),
        "square_map": ("square_map", (1,), 40, None),
        "ellipse": ("ellipse", (1, 0.25), 40, None),
        "ellipse100": ("ellipse", (1, 0.25), 20, 100),
    }
    name, params, N, P = table[key]
    spec = geometry.catalog(name, params, precision_digits=P, n_max=N)
    M = moments.gram_matrix(spec, N, cache_dir=_SETTINGS["cache_dir"], use_cache=_SETTINGS["use_cache"])
    basis = bergman.orthonormalize(M)
    psi = spec.exterior_series
    fam = faber.faber_recurrence(psi, N + 1) if psi is not None and spec.kind == "map" else None
    return Context(spec, M, basis, fam, conformal.exterior_map_for(spec))


@functools.lru_cache(maxsize=None)
def _eps(key, upto):
    c = context(key)
    return D.epsilon_all(c.spec.psi, c.fam, range(0, upto + 1))


def _fmt(x, d=3):
    return mp.nstr(mp.mpf(x), d) if not isinstance(x, float) else f"{x:.{d}g}"


# -- 1 ---------------------------------------------------------------------------

def c01_disk():
    c = context("disk")
    P = c.spec.precision_digits
    with mp.workdps(P):
        lam = max(abs(c.basis.lambdas[n] - mp.sqrt((n + 1) / mp.pi)) for n in range(21))
        al = max(abs(D.alpha(c.basis, c.spec.gamma, n)) for n in range(21))
        fam = faber.faber_recurrence(c.spec.psi, 21)
        be = max(D.beta(c.basis, fam, c.M, n) for n in range(21))
        ep = max(r.eps for r in D.epsilon_all(c.spec.psi, fam, range(21)).values())
        A = mp.mpf(0)
        for v in conformal.level_grid(c.emap):
            for n in range(21):
                A = max(A, abs(D.pointwise_A(c.basis, v, n)))
        zero = mp.mpf(10) ** (-(P - 10))   # "= 0" means zero to working precision
        ok = lam < mp.mpf(10) ** -40 and al < mp.mpf(10) ** -40 and be <= zero and ep <= zero \
            and A < mp.mpf(10) ** -35
    return CriterionResult(1, "disk exactness", bool(ok),
                           f"max|lambda err| {_fmt(lam)}, max alpha {_fmt(al)}, max beta {_fmt(be)}, "
                           f"max eps {_fmt(ep)}, max|A| {_fmt(A)}")


# -- 2 ---------------------------------------------------------------------------

def c02_orthonormality():
    # the shared square context runs at the automatic 153 digits; this one is pinned to 150
    spec = geometry.catalog("square", (1,), precision_digits=150, n_max=40)
    M = moments.gram_matrix(spec, 40, cache_dir=_SETTINGS["cache_dir"], use_cache=_SETTINGS["use_cache"])
    r = bergman.gram_residual(bergman.orthonormalize(M), M)
    return CriterionResult(2, "orthonormality (square polygon, N=40, P=150)", bool(r < mp.mpf(10) ** -20),
                           f"Gram residual {_fmt(r)} (< 1e-20)")


# -- 3 ---------------------------------------------------------------------------

def c03_faber_oracle():
    P = 80
    gaps = {}
    for name, params in (("ellipse", (1, 0.25)), ("square_map", (1,))):
        spec = geometry.catalog(name, params, precision_digits=P, n_max=30)
        fr = faber.faber_recurrence(spec.psi, 30)
        fo = faber.faber_oracle(spec.psi, 30)
        gaps[name] = faber.max_coefficient_gap(fr, fo)
    tol = mp.mpf(10) ** (-(P - 15))
    ok = all(g < tol for g in gaps.values())
    return CriterionResult(3, "Faber recurrence vs polynomial part of Phi^n", bool(ok),
                           ", ".join(f"{k} gap {_fmt(v)}" for k, v in gaps.items()) + " (< 1e-65)")


# -- 4 ---------------------------------------------------------------------------

def c04_sum_identity():
    worst = {}
    ok = True
    for key in ("ellipse", "square_map"):
        c = context(key)
        E = _eps(key, 30)
        w = mp.mpf(0)
        for n in range(31):
            a = D.alpha(c.basis, c.fam.gamma, n)
            b = D.beta(c.basis, c.fam, c.M, n)
            chk = D.check_sum_identity(a, b, E[n].eps, 1e-6, mp.mpf(10) ** -30, c.spec.precision_digits)
            ok = ok and chk.passed
            w = max(w, chk.residual)
        worst[key] = w
    return CriterionResult(4, "alpha = beta + eps", bool(ok),
                           ", ".join(f"{k} max rel residual {_fmt(v)}" for k, v in worst.items()) + " (< 1e-6)")


# -- 5 ---------------------------------------------------------------------------

def _alphas(key, ns):
    c = context(key)
    return [D.alpha(c.basis, c.spec.gamma, n) for n in ns]


def c05_corner_rate():
    ns = list(range(10, 41))
    al = _alphas("square", ns)
    pos = all(a > 0 for a in al)
    na = [n * float(a) for n, a in zip(ns, al)]
    c10 = na[0]
    band = all(c10 / 4 <= v <= 4 * c10 for v in na)
    fit = D.rate_fit(al, ns, "algebraic") if pos else None
    slope_ok = fit is not None and -1.25 <= fit.slope <= -0.75
    ok = pos and band and slope_ok
    return CriterionResult(5, "corner rate alpha_n ~ 1/n (square)", ok,
                           f"n*alpha in [{min(na):.4f}, {max(na):.4f}] vs band [{c10 / 4:.4f}, {4 * c10:.4f}], "
                           f"slope {fit.slope if fit else float('nan'):.3f} (in [-1.25, -0.75])")


# -- 6 ---------------------------------------------------------------------------

def c06_analytic_rate():
    ns = list(range(15, 41))
    al = _alphas("ellipse", ns)
    c = context("ellipse")
    psi = c.spec.psi
    with mp.workdps(psi.precision_digits):
        ratio = float((psi.coeff(-1) / psi.coeff(1)).real)
    if not all(a > 0 for a in al):
        return CriterionResult(6, "geometric rate (ellipse)", False, "nonpositive alpha_n")
    fit = D.rate_fit(al, ns, "geometric")
    rate = math.exp(fit.slope)
    return CriterionResult(6, "geometric rate (ellipse)", rate <= 1.1 * ratio,
                           f"fitted per-step rate {rate:.4g} (<= 1.1 * b/a = {1.1 * ratio:.4g})")


# -- 7 ---------------------------------------------------------------------------

def c07_norm_identity():
    worst = {}
    for key in ("ellipse", "square_map"):
        c = context(key)
        E = _eps(key, 30)
        worst[key] = max(D.norm_identity_check(c.fam, c.M, E[n].eps, n) for n in range(31))
    ok = all(v < mp.mpf(10) ** -8 for v in worst.values())
    return CriterionResult(7, "||G_n||^2 = pi/(n+1) (1 - eps_n)", bool(ok),
                           ", ".join(f"{k} max rel gap {_fmt(v)}" for k, v in worst.items()) + " (< 1e-8)")


# -- 8 ---------------------------------------------------------------------------

CAPACITY_REFERENCE = 0.5901970


def c08_capacity():
    c = context("square")
    oracle = c.spec.exterior_series.coeffs[0].real     # leading coefficient b of the square's series
    _, cap40, _ = conformal.capacity_from_ratio(c.basis, 40)
    sig = []
    for n in range(10, 41):
        _, _, s = conformal.capacity_from_ratio(c.basis, n, c.spec.known_capacity)
        sig.append(n * abs(float(s)))
    bound = 2 * sig[0]
    err = abs(float(cap40) - CAPACITY_REFERENCE)
    err_oracle = abs(float(cap40 - oracle))
    ok = err < 5e-3 and err_oracle < 5e-3 and max(sig) <= bound
    return CriterionResult(8, "capacity from lambda ratios (square)", ok,
                           f"cap_hat(40) = {float(cap40):.7f}, |diff| {err:.2e} vs 0.5901970 and {err_oracle:.2e} "
                           f"vs series b = {float(oracle):.7f} (< 5e-3); max n|sigma_n| {max(sig):.4f} "
                           f"<= 2 x {sig[0]:.4f}")


# -- 9 ---------------------------------------------------------------------------

@functools.lru_cache(maxsize=None)
def _pointwise_square_map():
    c = context("square_map")
    grid = conformal.level_grid(c.emap)
    dist = conformal.boundary_distance(c.spec, np.array([complex(v.z) for v in grid]))
    A = {n: 0.0 for n in range(1, 41)}
    H = {n: 0.0 for n in range(1, 41)}
    with mp.workdps(c.spec.precision_digits):
        for v, d in zip(grid, dist):
            pz = bergman.evaluate_all(c.basis, v.z, 40)
            dphi = abs(v.dphi)
            for n in range(1, 41):
                a = pz[n] / (mp.sqrt((n + 1) / mp.pi) * v.w ** n * v.dphi) - 1
                A[n] = max(A[n], float(abs(a)) * min(math.sqrt(n) * float(d) * float(dphi), n))
                h = c.fam.G_at(n, v.z) - v.w ** n * v.dphi
                H[n] = max(H[n], n * float(d) * float(abs(h)))
    return A, H


def c09_pointwise():
    A, H = _pointwise_square_map()
    ns = range(10, 41)
    a_ok = max(A[n] for n in ns) <= 2 * A[10]
    h_ok = max(H[n] for n in ns) <= 2 * H[10]
    return CriterionResult(9, "pointwise A_n and H_n bounds (square map)", a_ok and h_ok,
                           f"scaled |A_n| max {max(A[n] for n in ns):.4g} vs 2 x {A[10]:.4g}; "
                           f"n dist |H_n| max {max(H[n] for n in ns):.4g} vs 2 x {H[10]:.4g}")


# -- 10 --------------------------------------------------------------------------

def c10_growth(seed=20240601, draws=50):
    c = context("square")
    grid = conformal.level_grid(c.emap)
    dist = conformal.boundary_distance(c.spec, np.array([complex(v.z) for v in grid]))
    rng = np.random.default_rng(seed)
    worst_l, worst_bw = 0.0, 0.0
    for n in (5, 10, 20):
        for _ in range(draws):
            a = rng.standard_normal(n + 1) + 1j * rng.standard_normal(n + 1)
            with mp.workdps(c.spec.precision_digits):
                a = [mp.mpc(complex(x)) for x in a]
            lem, bw = D.growth_check(c.M, c.basis, grid, dist, a, spec=c.spec)
            worst_l, worst_bw = max(worst_l, lem), max(worst_bw, bw)
    ok = worst_l <= 10 and worst_bw <= 1 + 1e-6
    return CriterionResult(10, "growth estimate and Bernstein-Walsh (square)", ok,
                           f"max scaled ratio {worst_l:.4g} (<= 10), max Bernstein-Walsh ratio {worst_bw:.6f} "
                           f"(<= 1 + 1e-6)")


# -- 11 --------------------------------------------------------------------------

def c11_zeros():
    c = context("square")
    hull_ok, far = True, 0
    for n in range(1, 31):
        s = D.zero_diagnostics(c.basis, c.emap, n, c.spec, weak_points=0)
        hull_ok = hull_ok and s.in_hull
        if n >= 20 and s.max_exterior_level is not None and s.max_exterior_level > 1.05:
            far += 1
    s40 = D.zero_diagnostics(c.basis, c.emap, 40, c.spec, weak_level=2.0)
    ok = hull_ok and far == 0 and s40.weak_gap < 0.05
    return CriterionResult(11, "zeros and weak asymptotics (square)", ok,
                           f"all zeros in hull for n <= 30: {hull_ok}; degrees with a zero at |Phi| > 1.05: {far}; "
                           f"weak gap at n=40, |Phi|=2: {s40.weak_gap:.4f} (< 0.05)")


# -- 12 --------------------------------------------------------------------------

def c12_recurrence():
    c = context("ellipse100")
    H = bergman.hessenberg(c.M, c.basis)
    band = mp.mpf(0)
    for n in range(20):
        for k in range(n - 1):
            band = max(band, abs(H[k, n]))
    banded = band < mp.mpf(10) ** -30
    s = context("square")
    Hs = bergman.hessenberg(s.M.leading(16), _leading_basis(s.basis, 16))
    off2 = max(abs(Hs[n - 2, n]) for n in range(2, 16))
    off3 = max(abs(Hs[n - 3, n]) for n in range(3, 16))
    non_banded = off2 > mp.mpf(10) ** -6
    return CriterionResult(12, "recurrence structure", bool(banded and non_banded),
                           f"ellipse max |a[k][n]| (k < n-1) {_fmt(band)} (< 1e-30); square max |a[n-2][n]| "
                           f"{_fmt(off2)} (> 1e-6 required; max |a[n-3][n]| = {_fmt(off3)})")


def _leading_basis(basis, n):
    return bergman.OrthonormalBasis(n, basis.coeffs[:n + 1], basis.lambdas[:n + 1],
                                    basis.precision_digits, basis.domain_digest)


# -- 13 --------------------------------------------------------------------------

def c13_corner_integral():
    ks = (2, 4, 8, 16, 32, 64)
    worst, worst1 = mp.mpf(0), mp.mpf(0)
    for om in ("0.6", "1", "1.4", "2"):
        for k in ks:
            v = D.corner_integral_check(mp.mpf(om), k)
            worst = max(worst, v)
            if om == "1":
                worst1 = max(worst1, v)
    bound1 = 2 * mp.log(2) + mp.mpf(10) ** -6
    ok = worst <= 5 and worst1 <= bound1
    return CriterionResult(13, "corner integral k^2 I(omega, k)", bool(ok),
                           f"max {_fmt(worst, 6)} (<= 5); omega=1 max {_fmt(worst1, 10)} (<= 2 log 2 + 1e-6)")


# -- 14 --------------------------------------------------------------------------

def c14_distortion():
    worst = {}
    for key in ("ellipse", "square_map"):
        c = context(key)
        pts = conformal.exterior_lattice(c.spec, 20)
        worst[key] = conformal.distortion_check(c.spec, c.emap, pts)[0]
    ok = all(v <= 1 for v in worst.values())
    return CriterionResult(14, "distortion inequality on a 20x20 exterior lattice", ok,
                           ", ".join(f"{k} max ratio {v:.4f}" for k, v in worst.items()) + " (<= 1)")


CRITERIA = {
    1: c01_disk, 2: c02_orthonormality, 3: c03_faber_oracle, 4: c04_sum_identity,
    5: c05_corner_rate, 6: c06_analytic_rate, 7: c07_norm_identity, 8: c08_capacity,
    9: c09_pointwise, 10: c10_growth, 11: c11_zeros, 12: c12_recurrence,
    13: c13_corner_integral, 14: c14_distortion,
}


def run(numbers=None, out=None):
    """Run the selected criteria (default all) and return their results in order."""
    results = []
    for k in sorted(numbers or CRITERIA):
        try:
            r = CRITERIA[k]()
        except (ArithmeticError, ValueError) as exc:
            r = CriterionResult(k, CRITERIA[k].__name__, False, f"error: {exc}")
        results.append(r)
        if out is not None:
            print(r.line(), file=out, flush=True)
    return results
