import os
import subprocess
import sys

import mpmath as mp
import pytest
from hypothesis import given, settings, strategies as st

from bergpoly import _kernels
from bergpoly._precision import PrecisionMismatch, auto_precision, check_same_precision, dps_to_bits

ints = st.lists(st.integers(min_value=-(1 << 300), max_value=1 << 300), min_size=1, max_size=40)


def _both(fn, *args):
    out = {}
    for k in ("schoolbook", "kronecker"):
        prev = _kernels.set_kernel(k)
        try:
            out[k] = fn(*args)
        finally:
            _kernels.set_kernel(prev)
    return out


@given(ints, ints)
@settings(max_examples=60, deadline=None)
def test_real_convolution_kernels_agree(x, y):
    out = _both(_kernels.conv, x, y)
    assert out["schoolbook"] == out["kronecker"]


@given(ints, ints, ints, ints)
@settings(max_examples=40, deadline=None)
def test_complex_convolution_kernels_agree(ar, ai, br, bi):
    n, m = min(len(ar), len(ai)), min(len(br), len(bi))
    a, b = (ar[:n], ai[:n]), (br[:m], bi[:m])
    out = _both(_kernels.cconv, a, b)
    assert out["schoolbook"] == out["kronecker"]


def test_convolution_small_case():
    assert _kernels.conv([1, 2], [3, 4, 5]) == [3, 10, 13, 10]
    # (1 + i)(1 - i) = 2
    assert _kernels.cconv(([1], [1]), ([1], [-1])) == ([2], [0])


@given(st.lists(st.tuples(st.floats(-1e6, 1e6), st.floats(-1e6, 1e6)), min_size=1, max_size=10))
@settings(max_examples=50, deadline=None)
def test_encode_decode_round_trip(vals):
    F = dps_to_bits(40) + 64
    with mp.workdps(40):
        zs = [mp.mpc(a, b) for a, b in vals]
        back = _kernels.decode(*_kernels.encode(zs, F), F)
        for z, w in zip(zs, back):
            assert abs(z - w) <= mp.mpf(2) ** (-F + 1) * (1 + abs(z))


def test_rescale_rounds_to_nearest():
    assert _kernels.rescale([5, 6, 7, -5, -6], 2) == [1, 2, 2, -1, -1]


def test_unknown_kernel_rejected():
    with pytest.raises(ValueError):
        _kernels.set_kernel("numba")


def test_kernel_selected_by_environment():
    code = "from bergpoly import _kernels; print(_kernels.active_kernel())"
    env = dict(os.environ, BERGPOLY_KERNEL="schoolbook")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert out.stdout.strip() == "schoolbook"
    env["BERGPOLY_KERNEL"] = "fortran"
    bad = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
    assert bad.returncode != 0 and "BERGPOLY_KERNEL" in bad.stderr


def test_precision_helpers():
    assert auto_precision(40) == 150
    assert check_same_precision(60, 60) == 60
    with pytest.raises(PrecisionMismatch):
        check_same_precision(60, 61)
