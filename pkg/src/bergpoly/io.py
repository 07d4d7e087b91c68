"""Text formats: round-trip decimal strings, CSV tables, atomic writes."""

import csv
import json
import math
import os
import tempfile

import mpmath as mp
from mpmath.libmp import to_str


def roundtrip_digits(prec_bits):
    # enough decimal digits for a binary value of prec_bits to parse back exactly
    return int(math.ceil(prec_bits * math.log10(2))) + 2


def mp_to_str(x, prec_bits=None):
    """Decimal string that reads back to the identical mpf at ``prec_bits``."""
    x = mp.mpf(x)
    if prec_bits is None:
        prec_bits = mp.mp.prec
    return to_str(x._mpf_, roundtrip_digits(prec_bits))


def atomic_write_text(path, text):
    """Write via a temporary file in the same directory and rename into place."""
    path = os.fspath(path)
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv(path, header, rows):
    import io as _io
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    atomic_write_text(path, buf.getvalue())


def read_csv(path):
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        return header, [row for row in r]


def write_json(path, obj):
    atomic_write_text(path, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def complex_row(z, digits):
    """(re, im) decimal strings with ``digits`` significant digits."""
    z = mp.mpc(z)
    return to_str(z.real._mpf_, digits), to_str(z.imag._mpf_, digits)
