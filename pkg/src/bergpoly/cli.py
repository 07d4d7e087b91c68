"""Command line front end.

    bergpoly domains list
    bergpoly moments DOMAIN        bergpoly basis DOMAIN       bergpoly faber DOMAIN
    bergpoly conformal capacity|map DOMAIN
    bergpoly diagnostics DOMAIN
    bergpoly verify
    bergpoly cache purge
    bergpoly run --config run.toml

DOMAIN is a catalog name (``--params`` sets its parameters) or omitted when
``--config`` supplies a ``[domain]`` table.  Exit codes: 0 ok, 1 acceptance
criterion failed, 2 usage or config error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import datetime
import json
import re
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import mpmath as mp

from . import acceptance, bergman, conformal, faber, geometry, moments
from . import diagnostics as diag
from ._precision import auto_precision
from .io import atomic_write_text, mp_to_str, write_csv

try:
    import tomllib
except ModuleNotFoundError:      # python < 3.11
    import tomli as tomllib

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class ConfigError(ValueError):
    def __init__(self, msg, path=None, line=None):
        self.line = line
        where = f"{path or 'config'}:{line}: " if line else f"{path or 'config'}: "
        super().__init__(where + msg)


# -- TOML ---------------------------------------------------------------------

def _toml_scalar(v):
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return json.dumps(v)     # JSON string escapes are valid TOML basic strings
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_scalar(x) for x in v) + "]"
    raise TypeError(f"cannot write {type(v).__name__} to TOML")


def dumps_toml(d, _prefix=""):
    """Small TOML writer: scalars, arrays and nested tables (enough for run configs)."""
    lines = []
    tables = []
    for k in d:
        v = d[k]
        if isinstance(v, dict):
            tables.append(k)
        elif v is not None:
            lines.append(f"{k} = {_toml_scalar(v)}")
    out = "\n".join(lines)
    for k in tables:
        name = f"{_prefix}{k}"
        body = dumps_toml(d[k], name + ".")
        out += ("\n\n" if out else "") + f"[{name}]" + ("\n" + body if body else "")
    return out + ("\n" if out and not _prefix else "")


def _key_lines(text):
    """{(table, key): line number} for top-level assignments in a TOML text."""
    table = ""
    where = {}
    for i, raw in enumerate(text.splitlines(), 1):
        s = raw.strip()
        m = re.match(r"^\[([^\[\]]+)\]$", s)
        if m:
            table = m.group(1).strip()
            where.setdefault((table, None), i)
            continue
        m = re.match(r'^([A-Za-z0-9_\-"]+)\s*=', s)
        if m:
            where.setdefault((table, m.group(1).strip('"')), i)
    return where


# -- run configuration ----------------------------------------------------------

@dataclass
class RunConfig:
    domain: dict
    n_max: int = 20
    precision: object = "auto"
    out: str = "bergpoly-out"
    diagnostics: tuple = diag.ALL_DIAGNOSTICS
    levels: tuple = diag.DEFAULT_LEVELS
    count: int = 100
    tolerances: dict = field(default_factory=dict)
    source: str = ""

    @property
    def precision_digits(self):
        return auto_precision(self.n_max) if self.precision == "auto" else int(self.precision)

    def to_dict(self):
        return {"n_max": self.n_max, "precision": self.precision, "out": self.out,
                "diagnostics": list(self.diagnostics),
                "domain": dict(self.domain),
                "grid": {"levels": [repr(float(x)) for x in self.levels], "count": self.count},
                "tolerances": {k: repr(v) for k, v in sorted(self.tolerances.items())}}


_TOP = {"n_max", "precision", "out", "diagnostics", "domain", "grid", "tolerances"}


def parse_config(text, path=None):
    """RunConfig from TOML text; errors name the offending line."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"not valid TOML ({exc})", path) from None
    lines = _key_lines(text)

    def err(msg, table, key):
        raise ConfigError(msg, path, lines.get((table, key)) or lines.get((table, None)))

    for k in raw:
        if k not in _TOP:
            err(f"unknown key {k!r} (expected one of {', '.join(sorted(_TOP))})", "", k)
    cfg = RunConfig(domain={}, source=text)
    if "n_max" in raw:
        v = raw["n_max"]
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            err("n_max must be an integer >= 1", "", "n_max")
        cfg.n_max = v
    if "precision" in raw:
        v = raw["precision"]
        if v != "auto" and not (isinstance(v, int) and not isinstance(v, bool) and v >= 15):
            err('precision must be "auto" or an integer >= 15', "", "precision")
        cfg.precision = v
    if "out" in raw:
        if not isinstance(raw["out"], str) or not raw["out"]:
            err("out must be a non-empty string", "", "out")
        cfg.out = raw["out"]
    if "diagnostics" in raw:
        v = raw["diagnostics"]
        bad = [x for x in v if x not in diag.ALL_DIAGNOSTICS] if isinstance(v, list) else [v]
        if bad:
            err(f"unknown diagnostics {bad}; choose from {', '.join(diag.ALL_DIAGNOSTICS)}",
                "", "diagnostics")
        cfg.diagnostics = tuple(v)
    dom = raw.get("domain")
    if not isinstance(dom, dict):
        err("a [domain] table is required", "", "domain")
    if "catalog" in dom:
        if dom["catalog"] not in geometry.CATALOG_NAMES:
            err(f"unknown catalog domain {dom['catalog']!r}", "domain", "catalog")
        try:
            params = [float(x) for x in dom.get("params", [])]
        except (TypeError, ValueError):
            err("params must be numbers or decimal strings", "domain", "params")
    elif dom.get("kind") not in ("polygon", "map"):
        err('domain needs catalog = "..." or kind = "polygon" | "map"', "domain", "kind")
    elif dom["kind"] == "polygon" and not isinstance(dom.get("vertices"), list):
        err("polygon domains need a vertices array of [re, im] pairs", "domain", "vertices")
    elif dom["kind"] == "map" and not isinstance(dom.get("coeffs"), list):
        err("map domains need a coeffs array of [re, im] pairs", "domain", "coeffs")
    cfg.domain = dom
    grid = raw.get("grid", {})
    if "levels" in grid:
        try:
            cfg.levels = tuple(float(x) for x in grid["levels"])
        except (TypeError, ValueError):
            err("grid levels must be numbers", "grid", "levels")
        if not cfg.levels or min(cfg.levels) <= 1:
            err("grid levels must all exceed 1", "grid", "levels")
    if "count" in grid:
        if not isinstance(grid["count"], int) or grid["count"] < 1:
            err("grid count must be a positive integer", "grid", "count")
        cfg.count = grid["count"]
    for k, v in raw.get("tolerances", {}).items():
        try:
            cfg.tolerances[k] = float(v)
        except (TypeError, ValueError):
            err(f"tolerance {k} must be a number", "tolerances", k)
    return cfg


def load_config(path):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config ({exc.strerror})", path) from None
    return parse_config(text, str(path))


# -- helpers --------------------------------------------------------------------

class RunLog:
    """Timestamped log in ``<out>/run.log``; the only place wall-clock time appears."""

    def __init__(self, out, quiet=False):
        self.path = Path(out) / "run.log" if out else None
        self.quiet = quiet
        self.lines = []

    def __call__(self, msg):
        stamp = datetime.datetime.now().isoformat(timespec="seconds")
        self.lines.append(f"{stamp} {msg}")
        if not self.quiet:
            print(msg, file=sys.stderr)

    def flush(self):
        if self.path is not None:
            atomic_write_text(self.path, "\n".join(self.lines) + "\n")


def _parse_params(s):
    if not s:
        return ()
    try:
        return tuple(float(x) for x in s.split(","))
    except ValueError:
        raise ConfigError(f"--params expects comma-separated numbers, got {s!r}") from None


def _resolve(args):
    """(spec, N, cfg) from --config and/or the positional domain."""
    cfg = load_config(args.config) if getattr(args, "config", None) else None
    n_max = args.nmax or (cfg.n_max if cfg else 20)
    P = args.precision or (cfg.precision_digits if cfg and cfg.precision != "auto" else None) \
        or auto_precision(n_max)
    name = getattr(args, "domain", None)
    if name:
        spec = geometry.catalog(name, _parse_params(args.params), precision_digits=P, n_max=n_max)
    elif cfg is not None:
        spec = geometry.from_config(cfg.domain, precision_digits=P, n_max=n_max)
    else:
        raise ConfigError("give a catalog domain name or --config")
    return spec, n_max, cfg


def _out_dir(args, cfg=None, default="bergpoly-out"):
    out = args.out or (cfg.out if cfg else default)
    Path(out).mkdir(parents=True, exist_ok=True)
    return Path(out)


def _gram(spec, N, args):
    return moments.gram_matrix(spec, N, cache_dir=args.cache_dir, use_cache=not args.no_cache)


# -- subcommands -------------------------------------------------------------------

def cmd_domains(args):
    for e in geometry.catalog_entries(precision_digits=30):
        print(f"{e.name:12s} {e.spec.kind:8s} {e.notes}")
    return EXIT_OK


def cmd_moments(args):
    spec, N, _ = _resolve(args)
    M = _gram(spec, N, args)
    out = _out_dir(args)
    with mp.workdps(M.precision_digits):
        rows = [(j, k, mp_to_str(M[j, k].real), mp_to_str(M[j, k].imag))
                for j in range(N + 1) for k in range(N + 1)]
    write_csv(out / "moments.csv", ("j", "k", "re", "im"), rows)
    print(f"moments N={N} P={M.precision_digits} method={M.method} recomputed={M.recomputed}")
    return EXIT_OK


def cmd_basis(args):
    spec, N, _ = _resolve(args)
    M = _gram(spec, N, args)
    basis = bergman.orthonormalize(M)
    out = _out_dir(args)
    bergman.export_basis(out / "basis.csv", basis)
    r = bergman.gram_residual(basis, M)
    print(f"basis N={N} P={basis.precision_digits} gram_residual={mp.nstr(r, 3)}")
    return EXIT_OK


def cmd_faber(args):
    spec, N, _ = _resolve(args)
    psi = spec.exterior_series
    if psi is None:
        raise ConfigError(f"domain {spec.name} has no exterior series")
    fam = faber.faber_recurrence(psi, N)
    out = _out_dir(args)
    faber.export_family(out / "faber_F.csv", fam, "F")
    faber.export_family(out / "faber_G.csv", fam, "G")
    print(f"faber N={N} P={fam.precision_digits} gamma={mp.nstr(fam.gamma, 15)}")
    return EXIT_OK


def cmd_conformal(args):
    spec, N, _ = _resolve(args)
    out = _out_dir(args)
    if args.what == "capacity":
        basis = bergman.orthonormalize(_gram(spec, N, args))
        rows = []
        with mp.workdps(basis.precision_digits):
            for n in range(N):
                g, cap, s = conformal.capacity_from_ratio(basis, n, spec.known_capacity)
                rows.append((n, mp.nstr(g, 20), mp.nstr(cap, 20), "" if s is None else mp.nstr(s, 10)))
        write_csv(out / "capacity.csv", ("n", "gamma_hat", "cap_hat", "sigma"), rows)
        print(f"cap_hat({N - 1}) = {rows[-1][2]}")
        return EXIT_OK
    emap = conformal.exterior_map_for(spec)
    if emap is None:
        raise ConfigError(f"domain {spec.name} has no exterior series")
    rows = []
    with mp.workdps(spec.precision_digits):
        for v in conformal.level_grid(emap, count=args.count):
            rows.append((mp.nstr(v.z.real, 20), mp.nstr(v.z.imag, 20), mp.nstr(v.w.real, 20),
                         mp.nstr(v.w.imag, 20), mp.nstr(v.dphi.real, 20), mp.nstr(v.dphi.imag, 20),
                         mp.nstr(v.level, 10)))
    write_csv(out / "exterior_map.csv",
              ("re_z", "im_z", "re_phi", "im_phi", "re_dphi", "im_dphi", "level"), rows)
    print(f"exterior map on {len(rows)} level-set points")
    return EXIT_OK


def _diagnostics(spec, N, args, cfg, out, log):
    M = _gram(spec, N, args)
    log(f"moments: method={M.method} recomputed={M.recomputed}")
    basis = bergman.orthonormalize(M)
    include = cfg.diagnostics if cfg else diag.ALL_DIAGNOSTICS
    levels = cfg.levels if cfg else diag.DEFAULT_LEVELS
    count = cfg.count if cfg else 100
    tol = cfg.tolerances if cfg else {}
    rep = diag.build_report(spec, N, M, basis, include, levels, count, tol, log=log)
    rep.write_json(out / "diagnostics.json")
    rep.write_csv(out / "diagnostics.csv")
    if rep.grid:
        rep.write_grid_csv(out / "grid.csv")
    return M, basis, rep


def cmd_diagnostics(args):
    spec, N, cfg = _resolve(args)
    out = _out_dir(args, cfg)
    log = RunLog(out, args.quiet)
    try:
        _, _, rep = _diagnostics(spec, N, args, cfg, out, log)
    finally:
        log.flush()
    for n in sorted(rep.per_n):
        row = rep.per_n[n]
        cols = [f"{k}={mp.nstr(row[k], 6)}" for k in ("alpha", "beta", "eps") if k in row]
        print(f"n={n:3d} " + " ".join(cols))
    for k, f in sorted(rep.fits.items()):
        print(f"fit {k}: slope {f['slope']:.4f}")
    return EXIT_OK


def cmd_run(args):
    if not args.config:
        raise ConfigError("run needs --config")
    spec, N, cfg = _resolve(args)
    out = _out_dir(args, cfg)
    log = RunLog(out, args.quiet)
    try:
        log(f"run: domain={spec.name} N={N} P={spec.precision_digits} out={out}")
        log("tolerances: " + json.dumps({**diag.DEFAULT_TOLERANCES, **cfg.tolerances}, sort_keys=True))
        atomic_write_text(out / "config.toml", dumps_toml(cfg.to_dict()))
        M, basis, rep = _diagnostics(spec, N, args, cfg, out, log)
        bergman.export_basis(out / "basis.csv", basis)
        if "zeros" in cfg.diagnostics:
            zs = {n: bergman.zeros(basis, n) for n in range(1, N + 1)}
            bergman.export_zeros(out / "zeros.csv", zs, basis.precision_digits)
        log(f"wrote {', '.join(sorted(p.name for p in out.iterdir() if p.name != 'run.log'))}")
    finally:
        log.flush()
    return EXIT_OK


def _one_criterion(args):
    k, cache_dir, use_cache = args
    acceptance.configure(cache_dir, use_cache)
    return acceptance.run([k])[0]


def cmd_verify(args):
    acceptance.configure(args.cache_dir, not args.no_cache)
    nums = sorted(args.only) if args.only else sorted(acceptance.CRITERIA)
    t0 = time.time()
    if args.jobs and args.jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(args.jobs) as ex:
            results = list(ex.map(_one_criterion, [(k, args.cache_dir, not args.no_cache) for k in nums]))
        for r in results:
            print(r.line(), flush=True)
    else:
        results = acceptance.run(nums, out=sys.stdout)
    failed = [r.number for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} criteria passed" +
          (f"; failed: {', '.join(f'C{k:02d}' for k in failed)}" if failed else ""))
    if args.out:
        out = _out_dir(args)
        body = [{"criterion": r.number, "name": r.name, "passed": r.passed, "detail": r.detail} for r in results]
        atomic_write_text(out / "acceptance.json", json.dumps(body, indent=2, sort_keys=True) + "\n")
        write_csv(out / "acceptance.csv", ("criterion", "name", "passed", "detail"),
                  [(r.number, r.name, "pass" if r.passed else "fail", r.detail) for r in results])
        log = RunLog(out, quiet=True)
        log(f"verify: {len(results)} criteria in {time.time() - t0:.1f}s")
        log.flush()
    return EXIT_FAIL if failed else EXIT_OK


def cmd_cache(args):
    d = Path(args.cache_dir or moments.default_cache_dir())
    n = 0
    if d.is_dir():
        for p in d.glob("*.moments"):
            p.unlink()
            n += 1
    moments.clear_memo()
    print(f"removed {n} cache file(s) from {d}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------------

def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML run configuration")
    common.add_argument("--precision", type=int, help="working decimal digits (default 30 + 3 N)")
    common.add_argument("--nmax", type=int, help="largest degree N")
    common.add_argument("--out", help="output directory")
    common.add_argument("--cache-dir", help="moment cache directory (default $BERGPOLY_CACHE_DIR)")
    common.add_argument("--no-cache", action="store_true", help="bypass the moment cache")
    common.add_argument("--jobs", type=int, default=1, help="worker processes where supported")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="bergpoly", description="Bergman polynomials and their asymptotics.")
    sub = p.add_subparsers(dest="command", required=True)

    d = sub.add_parser("domains", parents=[common], help="catalog domains")
    d.add_argument("action", choices=["list"])
    d.set_defaults(func=cmd_domains)

    def domain_cmd(name, func, helptext):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("domain", nargs="?", help="catalog name (omit with --config)")
        s.add_argument("--params", default="", help="comma-separated catalog parameters")
        s.set_defaults(func=func)
        return s

    domain_cmd("moments", cmd_moments, "moment matrix to moments.csv")
    domain_cmd("basis", cmd_basis, "orthonormal basis to basis.csv")
    domain_cmd("faber", cmd_faber, "Faber polynomials to faber_F.csv and faber_G.csv")
    c = sub.add_parser("conformal", parents=[common], help="capacity estimates or exterior map samples")
    c.add_argument("what", choices=["capacity", "map"])
    c.add_argument("domain", nargs="?")
    c.add_argument("--params", default="")
    c.add_argument("--count", type=int, default=100, help="level-set points for 'map'")
    c.set_defaults(func=cmd_conformal)
    domain_cmd("diagnostics", cmd_diagnostics, "per-degree diagnostics report")

    v = sub.add_parser("verify", parents=[common], help="run the acceptance criteria")
    v.add_argument("--only", type=int, nargs="+", choices=sorted(acceptance.CRITERIA), metavar="K")
    v.set_defaults(func=cmd_verify)

    k = sub.add_parser("cache", parents=[common], help="moment cache maintenance")
    k.add_argument("action", choices=["purge"])
    k.set_defaults(func=cmd_cache)

    r = sub.add_parser("run", parents=[common], help="config-driven batch run")
    r.set_defaults(func=cmd_run, domain=None)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.nmax is not None and args.nmax < 1:
        parser.error("--nmax must be >= 1")
    if args.precision is not None and args.precision < 15:
        parser.error("--precision must be >= 15")
    try:
        return args.func(args)
    except (ConfigError, geometry.DomainError, moments.CacheError) as exc:
        print(f"bergpoly: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ArithmeticError as exc:
        print(f"bergpoly: numerical failure in {type(exc).__module__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
