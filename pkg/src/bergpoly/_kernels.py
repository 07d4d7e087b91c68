"""Fixed-point complex convolution kernels.

Series arithmetic spends nearly all of its time convolving coefficient
vectors.  Coefficients are converted to fixed-point integers (a common
scale ``2**frac_bits``) and convolved exactly; only the final rescale rounds.
Two interchangeable implementations exist:

``kronecker``
    Packs each vector into one large integer and lets GMP multiply.
``schoolbook``
    Direct double loop over Python ints.  Slow, obviously correct.

Both produce bit-identical integers.  The active path is read from the
``BERGPOLY_KERNEL`` environment variable (default ``kronecker``) and can be
switched at runtime with :func:`set_kernel`.
"""

import os

import gmpy2
import mpmath as mp
from mpmath.libmp import from_man_exp

_KERNELS = ("kronecker", "schoolbook")
_active = os.environ.get("BERGPOLY_KERNEL", "kronecker").strip().lower()
if _active not in _KERNELS:
    raise ValueError(f"BERGPOLY_KERNEL must be one of {_KERNELS}, got {_active!r}")

# below this length the packing overhead outweighs the GMP product
_SMALL = 8


def active_kernel():
    return _active


def set_kernel(name):
    global _active
    name = name.strip().lower()
    if name not in _KERNELS:
        raise ValueError(f"unknown kernel {name!r}")
    previous, _active = _active, name
    return previous


# -- conversion ---------------------------------------------------------------

def _mpf_tuple_to_fixed(t, frac_bits):
    sign, man, exp, _ = t
    if not man:
        return 0
    s = exp + frac_bits
    if s >= 0:
        v = man << s
    else:
        v = (man + (1 << (-s - 1))) >> -s
    return -v if sign else v


def encode(values, frac_bits):
    """Complex mp values -> (re, im) lists of ints scaled by ``2**frac_bits``."""
    re, im = [], []
    for v in values:
        v = mp.mpmathify(v)
        if isinstance(v, mp.mpc):
            r, i = v._mpc_
        else:
            r, i = v._mpf_, (0, 0, 0, 0)
        re.append(_mpf_tuple_to_fixed(r, frac_bits))
        im.append(_mpf_tuple_to_fixed(i, frac_bits))
    return re, im


def decode(re, im, frac_bits):
    """Inverse of :func:`encode`, rounded to the current mp precision."""
    prec = mp.mp.prec
    out = []
    for r, i in zip(re, im):
        out.append(mp.make_mpc((from_man_exp(int(r), -frac_bits, prec, "n"),
                                from_man_exp(int(i), -frac_bits, prec, "n"))))
    return out


def rescale(values, shift):
    """Round-to-nearest right shift of every integer by ``shift`` bits."""
    if shift <= 0:
        return [v << -shift for v in values]
    half = 1 << (shift - 1)
    return [(v + half) >> shift for v in values]


# -- real convolution ---------------------------------------------------------

def _conv_schoolbook(x, y):
    out = [0] * (len(x) + len(y) - 1)
    for i, xi in enumerate(x):
        if xi:
            for j, yj in enumerate(y):
                out[i + j] += xi * yj
    return out


def _pack(values, width):
    nbytes = width // 8
    pos = b"".join((v if v > 0 else 0).to_bytes(nbytes, "little") for v in values)
    neg = b"".join((-v if v < 0 else 0).to_bytes(nbytes, "little") for v in values)
    return gmpy2.mpz(int.from_bytes(pos, "little")) - gmpy2.mpz(int.from_bytes(neg, "little"))


def _unpack(packed, count, width):
    nbytes = width // 8
    half = 1 << (width - 1)
    offset = int.from_bytes(half.to_bytes(nbytes, "little") * count, "little")
    buf = (int(packed) + offset).to_bytes(nbytes * count, "little")
    return [int.from_bytes(buf[k * nbytes:(k + 1) * nbytes], "little") - half
            for k in range(count)]


def _slot_width(x, y, terms=1):
    bx = max((abs(v).bit_length() for v in x), default=0)
    by = max((abs(v).bit_length() for v in y), default=0)
    w = bx + by + min(len(x), len(y)).bit_length() + terms.bit_length() + 2
    return (w + 7) // 8 * 8


def conv(x, y):
    """Exact integer convolution of two int lists."""
    if not x or not y:
        return []
    if _active == "schoolbook" or min(len(x), len(y)) <= _SMALL:
        return _conv_schoolbook(x, y)
    width = _slot_width(x, y)
    return _unpack(_pack(x, width) * _pack(y, width), len(x) + len(y) - 1, width)


def cconv(a, b):
    """Exact convolution of complex fixed-point vectors ``a=(re, im)``, ``b``.

    The result carries twice the input scale.
    """
    ar, ai = a
    br, bi = b
    if not ar or not br:
        return [], []
    if _active == "schoolbook" or min(len(ar), len(br)) <= _SMALL:
        rr = _conv_schoolbook(ar, br)
        ii = _conv_schoolbook(ai, bi)
        ri = _conv_schoolbook(ar, bi)
        ir = _conv_schoolbook(ai, br)
        return [p - q for p, q in zip(rr, ii)], [p + q for p, q in zip(ri, ir)]
    width = _slot_width(ar + ai, br + bi, terms=2)
    Ar, Ai = _pack(ar, width), _pack(ai, width)
    Br, Bi = _pack(br, width), _pack(bi, width)
    n = len(ar) + len(br) - 1
    return _unpack(Ar * Br - Ai * Bi, n, width), _unpack(Ar * Bi + Ai * Br, n, width)


def cmul(a, b, frac_bits):
    """Convolution rescaled back to ``frac_bits``."""
    re, im = cconv(a, b)
    return rescale(re, frac_bits), rescale(im, frac_bits)

