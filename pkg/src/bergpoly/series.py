"""Truncated Laurent series at infinity.

A series ``s(w) = c_p w**p + c_{p-1} w**(p-1) + ... + c_{-M} w**(-M) + O(w**(-M-1))``
is stored as its coefficient list from the top power ``p`` down to the
depth ``M``.  When ``exact`` is set the omitted tail is identically zero, so
products keep every term instead of truncating; this is how finite Laurent
polynomials such as ``a*w + b/w`` are represented.

All operands of a binary operation must share one precision context.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import mpmath as mp
import numpy as np

from . import _kernels
from ._precision import GUARD_BITS, PrecisionMismatch, check_same_precision, dps_to_bits


class TruncationError(ValueError):
    """A coefficient beyond the retained depth was requested."""


class ReversionError(ArithmeticError):
    """Series reversion could not proceed (zero leading coefficient)."""


def _frac_bits(dps):
    return dps_to_bits(dps) + GUARD_BITS


@dataclass(frozen=True, eq=False)
class LaurentAtInfinity:
    top_power: int
    coeffs: tuple
    precision_digits: int
    exact: bool = False

    def __post_init__(self):
        if len(self.coeffs) == 0:
            raise ValueError("a series needs at least one coefficient")
        with mp.workdps(self.precision_digits):
            object.__setattr__(self, "coeffs", tuple(mp.mpc(c) for c in self.coeffs))
        if self.depth < 0:
            raise ValueError("lowest retained power must be <= 0 (depth M >= 0)")

    # -- construction ------------------------------------------------------

    @classmethod
    def from_powers(cls, terms, depth, precision_digits, exact=False, top_power=None):
        """Build from ``{power: coefficient}``; missing powers are zero."""
        if top_power is None:
            top_power = max(terms) if terms else 0
        n = top_power + depth + 1
        coeffs = [0] * n
        for k, v in terms.items():
            if k > top_power:
                raise ValueError(f"power {k} above top power {top_power}")
            if k < -depth:
                if v != 0:
                    raise ValueError(f"power {k} below depth {depth}")
                continue
            coeffs[top_power - k] = v
        return cls(top_power, tuple(coeffs), precision_digits, exact)

    @classmethod
    def identity(cls, precision_digits, depth=0):
        return cls.from_powers({1: 1}, depth, precision_digits, exact=True)

    @classmethod
    def constant(cls, value, precision_digits, depth=0, exact=True):
        return cls.from_powers({0: value}, depth, precision_digits, exact=exact, top_power=0)

    # -- inspection --------------------------------------------------------

    @property
    def depth(self):
        return len(self.coeffs) - self.top_power - 1

    @property
    def lowest_power(self):
        return -self.depth

    def coeff(self, power):
        if power > self.top_power:
            return mp.mpc(0)
        if power < -self.depth:
            if self.exact:
                return mp.mpc(0)
            raise TruncationError(f"w^{power} lies beyond the retained depth {self.depth}")
        return self.coeffs[self.top_power - power]

    def powers(self):
        return range(self.top_power, -self.depth - 1, -1)

    def items(self):
        return zip(self.powers(), self.coeffs)

    def max_abs(self):
        with mp.workdps(self.precision_digits):
            return max(abs(c) for c in self.coeffs)

    def polynomial_part(self):
        """Ascending coefficients of the nonnegative powers."""
        return [self.coeff(k) for k in range(0, max(self.top_power, 0) + 1)]

    def __repr__(self):
        head = ", ".join(mp.nstr(c, 8) for c in self.coeffs[:4])
        more = ", ..." if len(self.coeffs) > 4 else ""
        return (f"LaurentAtInfinity(top={self.top_power}, depth={self.depth}, "
                f"exact={self.exact}, P={self.precision_digits}, [{head}{more}])")

    # -- shape changes -----------------------------------------------------

    def truncate(self, depth):
        """Drop powers below ``-depth``; the result is no longer exact."""
        if depth > self.depth and not self.exact:
            raise TruncationError(f"cannot extend depth {self.depth} to {depth}")
        coeffs = [self.coeff(k) for k in range(self.top_power, -depth - 1, -1)]
        return LaurentAtInfinity(self.top_power, tuple(coeffs), self.precision_digits, False)

    def with_depth(self, depth):
        """Pad (exact series only) or truncate to the given depth, keeping exactness."""
        if depth >= self.depth and self.exact:
            coeffs = list(self.coeffs) + [0] * (depth - self.depth)
            return LaurentAtInfinity(self.top_power, tuple(coeffs), self.precision_digits, True)
        return self.truncate(depth)

    def trimmed(self):
        """Exact series with trailing zero coefficients removed (depth >= 0 kept)."""
        if not self.exact:
            return self
        coeffs = list(self.coeffs)
        while len(coeffs) > self.top_power + 1 and coeffs[-1] == 0:
            coeffs.pop()
        return LaurentAtInfinity(self.top_power, tuple(coeffs), self.precision_digits, True)

    # -- evaluation --------------------------------------------------------

    def _strided(self):
        # symmetric maps have nonzero coefficients only every s-th power;
        # Horner in u**s then does 1/s of the work
        hit = self.__dict__.get("_stride")
        if hit is None:
            idx = [i for i, c in enumerate(self.coeffs) if c != 0]
            step = 0
            for i in idx:
                step = math.gcd(step, i)
            step = step or 1
            last = idx[-1] if idx else 0
            hit = (step, self.coeffs[:last + 1:step])
            object.__setattr__(self, "_stride", hit)
        return hit

    def __call__(self, w):
        step, cs = self._strided()
        with mp.workdps(self.precision_digits):
            w = mp.mpmathify(w)
            u = (1 / w) ** step
            acc = mp.mpc(0)
            for c in reversed(cs):
                acc = acc * u + c
            return acc * w ** self.top_power

    def eval_numpy(self, w):
        """Vectorised complex128 evaluation, for sampling and warm starts."""
        step, cs = self._strided()
        w = np.asarray(w, dtype=complex)
        u = (1.0 / w) ** step
        acc = np.zeros_like(w)
        for c in reversed(cs):
            acc = acc * u + complex(c)
        return acc * w ** self.top_power


    # -- arithmetic --------------------------------------------------------

    def _lowest_known(self):
        return None if self.exact else -self.depth

    def __neg__(self):
        return LaurentAtInfinity(self.top_power, tuple(-c for c in self.coeffs),
                                 self.precision_digits, self.exact)

    def __add__(self, other):
        if not isinstance(other, LaurentAtInfinity):
            other = LaurentAtInfinity.constant(other, self.precision_digits)
        return arith(self, other, "add")

    __radd__ = __add__

    def __sub__(self, other):
        if not isinstance(other, LaurentAtInfinity):
            other = LaurentAtInfinity.constant(other, self.precision_digits)
        return arith(self, -other, "add")

    def __rsub__(self, other):
        return (-self).__add__(other)

    def __mul__(self, other):
        if not isinstance(other, LaurentAtInfinity):
            with mp.workdps(self.precision_digits):
                s = mp.mpmathify(other)
                return LaurentAtInfinity(self.top_power, tuple(c * s for c in self.coeffs),
                                         self.precision_digits, self.exact)
        return arith(self, other, "mul")

    __rmul__ = __mul__

    def derivative(self):
        return differentiate(self)

    # -- serialisation -----------------------------------------------------

    def to_record(self):
        from .io import mp_to_str
        with mp.workdps(self.precision_digits):
            coeffs = [[mp_to_str(c.real), mp_to_str(c.imag)] for c in self.coeffs]
        return {
            "top_power": self.top_power,
            "precision_digits": self.precision_digits,
            "exact": self.exact,
            "coeffs": coeffs,
        }

    @classmethod
    def from_record(cls, rec):
        P = int(rec["precision_digits"])
        with mp.workdps(P):
            coeffs = tuple(mp.mpc(mp.mpf(re), mp.mpf(im)) for re, im in rec["coeffs"])
        return cls(int(rec["top_power"]), coeffs, P, bool(rec.get("exact", False)))


# -- core operations ----------------------------------------------------------

def _convolve(a_coeffs, b_coeffs, dps):
    F = _frac_bits(dps)
    with mp.workdps(dps):
        prod = _kernels.cmul(_kernels.encode(a_coeffs, F), _kernels.encode(b_coeffs, F), F)
        return _kernels.decode(*prod, F)


def arith(a, b, op):
    """Add or multiply two series with truncation tracking."""
    P = check_same_precision(a.precision_digits, b.precision_digits)
    if op == "add":
        top = max(a.top_power, b.top_power)
        limits = [x for x in (a._lowest_known(), b._lowest_known()) if x is not None]
        if limits:
            low = max(limits)
        else:
            low = min(a.lowest_power, b.lowest_power)
        with mp.workdps(P):
            coeffs = [a.coeff(k) + b.coeff(k) for k in range(top, low - 1, -1)]
        return LaurentAtInfinity(top, tuple(coeffs), P, a.exact and b.exact)
    if op != "mul":
        raise ValueError(f"unknown op {op!r}")
    top = a.top_power + b.top_power
    full_low = a.lowest_power + b.lowest_power
    limits = []
    if not a.exact:
        limits.append(b.top_power - a.depth)
    if not b.exact:
        limits.append(a.top_power - b.depth)
    low = max(limits) if limits else full_low
    if low > top:
        raise TruncationError("product retains no coefficients")
    prod = _convolve(a.coeffs, b.coeffs, P)
    n_keep = top - low + 1
    coeffs = prod[:n_keep] + [mp.mpc(0)] * max(0, n_keep - len(prod))
    return LaurentAtInfinity(top, tuple(coeffs), P, a.exact and b.exact)


def power(a, n):
    """``a**n`` by repeated squaring."""
    if n < 0:
        raise ValueError("power needs n >= 0")
    result = LaurentAtInfinity.constant(1, a.precision_digits, depth=0, exact=True)
    base = a
    while n:
        if n & 1:
            result = result * base
        n >>= 1
        if n:
            base = base * base
    return result


def differentiate(s):
    """Termwise derivative.

    ``O(w**-(M+1))`` differentiates to ``O(w**-(M+2))``, so the number of
    retained coefficients is unchanged while every power drops by one.
    """
    with mp.workdps(s.precision_digits):
        coeffs = [k * c for k, c in s.items()]
    return LaurentAtInfinity(s.top_power - 1, tuple(coeffs), s.precision_digits, s.exact)


def reciprocal(s, depth=None):
    """``1/s``; for exact input ``depth`` bounds the (infinite) result."""
    P = s.precision_digits
    lead = s.coeffs[0]
    if lead == 0:
        raise ZeroDivisionError("leading coefficient is zero")
    top = -s.top_power
    if s.exact:
        if depth is None:
            raise ValueError("reciprocal of an exact series needs an explicit depth")
        n = top + depth + 1
    else:
        n = len(s.coeffs)
        if depth is not None:
            n = min(n, top + depth + 1)
    with mp.workdps(P):
        src = [s.coeffs[i] if i < len(s.coeffs) else mp.mpc(0) for i in range(n)]
        inv_lead = 1 / lead
        q = [inv_lead]
        for i in range(1, n):
            acc = mp.fsum(src[j] * q[i - j] for j in range(1, i + 1))
            q.append(-acc * inv_lead)
    return LaurentAtInfinity(top, tuple(q), P, False)


def compose_poly(poly, s):
    """Evaluate the polynomial with ascending coefficients ``poly`` at series ``s``.

    Horner's rule runs entirely in fixed point.  For exact ``s`` nothing is
    truncated; otherwise only the powers the tail of ``s`` cannot reach are
    kept.
    """
    P = s.precision_digits
    deg = len(poly) - 1
    while deg > 0 and poly[deg] == 0:
        deg -= 1
    F = _frac_bits(P)
    with mp.workdps(P):
        sf = _kernels.encode(s.coeffs, F)
        cf = _kernels.encode(poly[:deg + 1], F)
        re, im = [cf[0][deg]], [cf[1][deg]]
        top, low = 0, None          # low: lowest trustworthy power, None if exact
        for k in range(deg - 1, -1, -1):
            new_low = []
            if not s.exact:
                new_low.append(top + s.lowest_power)
            if low is not None:
                new_low.append(low + s.top_power)
            re, im = _kernels.cmul((re, im), sf, F)
            top += s.top_power
            if new_low:
                low = max(new_low)
                keep = max(top - low + 1, 1)
                re, im = re[:keep], im[:keep]
            if top < 0:
                re, im = [0] * -top + re, [0] * -top + im
                top = 0
            if low is None or low <= 0:
                if top >= len(re):
                    pad = top - len(re) + 1
                    re, im = re + [0] * pad, im + [0] * pad
                re[top] += cf[0][k]
                im[top] += cf[1][k]
        coeffs = _kernels.decode(re, im, F)
    if top - len(coeffs) + 1 > 0:
        coeffs += [mp.mpc(0)] * (top - len(coeffs) + 1)
    return LaurentAtInfinity(top, tuple(coeffs), P, s.exact or deg == 0)


def _clip(s, depth):
    if s.exact and depth >= s.depth:
        return s
    return s.truncate(min(depth, s.depth))


def compose(psi, phi, depth=None):
    """``psi(phi(z))`` for Laurent series at infinity with ``phi`` of top power >= 1.

    The result may retain fewer than ``depth`` terms when the truncation of
    ``psi`` or ``phi`` does not support more.
    """
    P = check_same_precision(psi.precision_digits, phi.precision_digits)
    q = phi.top_power
    if q < 1:
        raise ValueError("inner series must have a pole at infinity")
    if depth is None:
        depth = phi.depth
    if not phi.exact:
        depth = min(depth, phi.depth)
    if not psi.exact:
        # the unknown coefficient of w**-(M+1) enters at z**(-q*(M+1))
        depth = min(depth, q * (psi.depth + 1) - 1)
    pos = _clip(compose_poly(psi.polynomial_part(), phi), depth)
    n_neg = min(psi.depth, depth // q)
    if n_neg <= 0 or all(psi.coeff(-m) == 0 for m in range(1, n_neg + 1)):
        return pos
    u = reciprocal(phi, depth=depth)
    neg = compose_poly([0] + [psi.coeff(-m) for m in range(1, n_neg + 1)], u)
    return _clip(pos + _clip(neg, depth), depth)


def reversion(psi, depth, max_iter=60):
    """Series of the inverse map ``phi`` with ``psi(phi(z)) = z`` through ``depth``.

    Newton iteration on series; each step roughly doubles the number of
    correct coefficients.  Returns ``(phi, residual)`` where ``residual`` is
    the largest coefficient of ``psi(phi(z)) - z`` over the retained depth.
    """
    P = psi.precision_digits
    if psi.top_power != 1:
        raise ReversionError("reversion expects a series with a simple pole at infinity")
    b = psi.coeffs[0]
    if b == 0:
        raise ReversionError("leading coefficient b is zero")
    dpsi = differentiate(psi)
    z = LaurentAtInfinity.identity(P).with_depth(depth)
    with mp.workdps(P):
        phi = LaurentAtInfinity.from_powers({1: 1 / b}, depth, P)
        tol = mp.mpf(10) ** (-P)
        prev = None
        for _ in range(max_iter):
            r = compose(psi, phi, depth) - z
            # the z coefficient of r vanishes because phi keeps the leading 1/b
            r = LaurentAtInfinity(0, r.coeffs[1:], P, False)
            step = compose(dpsi, phi, depth)
            delta = r * reciprocal(step, depth=depth + 1)
            delta = delta.truncate(min(delta.depth, depth))
            phi = (phi - delta).truncate(depth)
            size = delta.max_abs()
            if size <= tol * (1 + phi.max_abs()) or (prev is not None and size >= prev and size < tol ** 0.5):
                break
            prev = size
        residual = (compose(psi, phi, depth) - z).max_abs()
    return phi, residual
