"""Command-line driver: JSON config plus flag overrides, CSV out.

Exit codes: 0 success, 1 configuration error, 2 solver failure,
3 verification failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, IncompleteSearchError, PoleError, SolverError, TruncationError
from .rational_ts import RationalP0

log = logging.getLogger("xxz_tba")

MODES = ("ts-check", "finite-check", "free-energy", "correlation", "free-fermion", "sweep")
EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_VERIFY = 0, 1, 2, 3


@dataclass(frozen=True)
class BetaRange:
    start: float
    stop: float
    count: int
    geometric: bool = False

    def values(self):
        if self.geometric:
            return [float(b) for b in np.geomspace(self.start, self.stop, self.count)]
        return [float(b) for b in np.linspace(self.start, self.stop, self.count)]


@dataclass(frozen=True)
class RunConfig:
    mode: str
    p0: str = "5"
    J: float = 1.0
    beta: float | None = None
    beta_range: BetaRange | None = None
    k: tuple = (2, 3)
    N: int = 8
    u: float | None = None
    grid_extent: float = 40.0
    grid_points: int | None = None  # None: refined to the narrowest kernel
    tol: float | None = None
    out: str = "xxz_out.csv"
    workers: int = 1

    def betas(self):
        if self.beta_range is not None:
            return self.beta_range.values()
        return [self.beta]


_FIELDS = {f.name for f in dataclasses.fields(RunConfig)}


def parse_beta_range(text) -> BetaRange:
    """'a:b:n' or 'a:b:n:geom', or a mapping with start/stop/count/geometric."""
    if isinstance(text, dict):
        extra = set(text) - {"start", "stop", "count", "geometric"}
        if extra:
            raise ConfigError(f"beta_range: unknown keys {sorted(extra)}")
        try:
            return _checked_range(float(text["start"]), float(text["stop"]), int(text["count"]), bool(text.get("geometric", False)))
        except KeyError as e:
            raise ConfigError(f"beta_range: missing {e.args[0]!r}") from None
    parts = str(text).split(":")
    if len(parts) not in (3, 4) or (len(parts) == 4 and parts[3] not in ("geom", "lin")):
        raise ConfigError(f"beta_range: expected 'a:b:n[:geom]', got {text!r}")
    try:
        a, b, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"beta_range: cannot parse {text!r}") from None
    return _checked_range(a, b, n, len(parts) == 4 and parts[3] == "geom")


def _checked_range(a, b, n, geom):
    if n < 1 or a <= 0 or b <= 0:
        raise ConfigError("beta_range: need count >= 1 and positive endpoints")
    return BetaRange(a, b, n, geom)


def validate(cfg: RunConfig) -> RunConfig:
    if cfg.mode not in MODES:
        raise ConfigError(f"mode: must be one of {', '.join(MODES)}")
    try:
        p0 = RationalP0.parse(cfg.p0)
    except DomainError as e:
        raise ConfigError(f"p0: {e}") from None
    if cfg.mode == "free-fermion" and p0.value != 2:
        raise ConfigError("p0: free-fermion mode requires p0 = 2")
    if cfg.mode in ("correlation", "sweep") and p0.value != 2:
        if not p0.is_integer or p0.numerator < 3:
            raise ConfigError("p0: correlation lengths need an integer p0 >= 3")
        if cfg.J <= 0:
            raise ConfigError("J: correlation lengths need J > 0")
    if cfg.mode == "correlation" and p0.value == 2:
        raise ConfigError("p0: correlation mode does not cover p0 = 2; use mode free-fermion")
    if cfg.mode in ("free-energy", "correlation") and p0.value == 2:
        raise ConfigError("p0: p0 = 2 is served by mode free-fermion")
    if cfg.J == 0 or not math.isfinite(cfg.J):
        raise ConfigError("J: must be finite and nonzero")
    if cfg.mode not in ("ts-check",):
        needs_beta = cfg.mode != "finite-check" or cfg.u is None
        if needs_beta and cfg.beta is None and cfg.beta_range is None:
            raise ConfigError("beta: required (or beta_range)")
        if cfg.beta is not None and not cfg.beta > 0:
            raise ConfigError("beta: must be positive")
    if cfg.mode == "sweep" and cfg.beta_range is None:
        raise ConfigError("beta_range: sweep mode needs a beta range")
    if any(k not in (1, 2, 3) for k in cfg.k) or not cfg.k:
        raise ConfigError("k: ranks must be drawn from 1, 2, 3")
    if cfg.mode in ("correlation", "sweep") and any(k == 1 for k in cfg.k):
        raise ConfigError("k: correlation lengths use ranks 2 and 3")
    if cfg.N < 2 or cfg.N % 2:
        raise ConfigError("N: must be a positive even integer")
    if cfg.grid_points is not None and (cfg.grid_points < 3 or cfg.grid_points % 2 == 0):
        raise ConfigError("grid_points: must be odd and >= 3")
    if not cfg.grid_extent > 0:
        raise ConfigError("grid_extent: must be positive")
    if cfg.tol is not None and not cfg.tol > 0:
        raise ConfigError("tol: must be positive")
    if cfg.workers < 1:
        raise ConfigError("workers: must be >= 1")
    return cfg


def _coerce(key, value):
    try:
        if key in ("J", "beta", "u", "grid_extent", "tol"):
            return None if value is None else float(value)
        if key in ("N", "grid_points", "workers"):
            if value is None and key == "grid_points":
                return None
            if isinstance(value, float) and not value.is_integer():
                raise ValueError
            return int(value)
        if key == "k":
            if isinstance(value, (int, str)) and not isinstance(value, bool):
                value = [int(x) for x in str(value).split(",")]
            return tuple(int(x) for x in value)
        if key == "beta_range":
            return None if value is None else parse_beta_range(value)
        if key in ("mode", "p0", "out"):
            return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: invalid value {value!r}") from None
    raise ConfigError(f"unknown key {key!r}")


def config_from_mapping(data: dict) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(sorted(unknown))}")
    if "mode" not in data:
        raise ConfigError("mode: required")
    kw = {k: _coerce(k, v) for k, v in data.items()}
    return validate(RunConfig(**kw))


def parse_config(text: str) -> RunConfig:
    """Validated RunConfig from a JSON document."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"JSON parse error at line {e.lineno} column {e.colno}: {e.msg}") from None
    return config_from_mapping(data)


# --- runners ----------------------------------------------------------------

def _grid(cfg):
    from .numerics import Grid, grid_for
    from .rational_ts import sequences_for

    if cfg.grid_points is None:
        return grid_for(sequences_for(cfg.p0), cfg.grid_extent)
    return Grid(cfg.grid_extent, cfg.grid_points)


def _write_rows(path, header, rows):
    with open(path, "w", newline="") as fh:
        fh.write("#schema=1\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _write_report(path, rep):
    rows = [[e.name, repr(e.max_residual), repr(e.tolerance), "pass" if e.passed else "fail"] for e in rep.entries]
    _write_rows(path, ["check", "max_residual", "tolerance", "status"], rows)


def run_ts_check(cfg):
    from .rational_ts import sequences_for, validate_sequences

    rep = validate_sequences(sequences_for(cfg.p0), raise_on_failure=False)
    _write_report(cfg.out, rep)
    print(rep.format())
    return EXIT_OK if rep.passed else EXIT_VERIFY


def run_finite_check(cfg):
    from .qtm import TrotterParams, solve_bae, verify_inversion, verify_periodicity, verify_t_system, verify_y_system
    from .report import CheckReport

    p0 = RationalP0.parse(cfg.p0)
    if p0.value == 2:
        from .free_fermion import ff_verify_identities

        u = cfg.u if cfg.u is not None else -cfg.betas()[0] * cfg.J / (math.pi / 2 * cfg.N)
        rep = ff_verify_identities(cfg.N, u, ranks=tuple(sorted(set(cfg.k) | {1})))
    else:
        if cfg.u is not None:
            tp = TrotterParams.from_p0(p0, cfg.N, cfg.u)
        else:
            tp = TrotterParams.from_physical(p0, cfg.betas()[0], cfg.J, cfg.N)
        rep = CheckReport()
        for k in cfg.k:
            bs = solve_bae(tp, rank=k)
            for part in (verify_t_system(bs), verify_y_system(bs), verify_inversion(bs), verify_periodicity(bs)):
                for e in part.entries:
                    e.name = f"k{k}:{e.name}"
                rep.extend(part)
    _write_report(cfg.out, rep)
    print(rep.format())
    return EXIT_OK if rep.passed else EXIT_VERIFY


def _free_energy_point(args):
    from .ground import ModelParams, free_energy, free_energy_row, solve_ground_nlie

    cfg, beta = args
    mp = ModelParams(cfg.p0, cfg.J, beta)
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    es = solve_ground_nlie(mp, grid=_grid(cfg), **kw)
    return free_energy_row(es, free_energy(es))


def _correlation_points(args):
    from .excited import correlation_length, correlation_row, solve_excited
    from .ground import ModelParams, free_energy, solve_ground_nlie

    cfg, beta = args
    mp = ModelParams(cfg.p0, cfg.J, beta)
    kw = {} if cfg.tol is None else {"tol": cfg.tol}
    grid = _grid(cfg)
    rows = []
    ground = None
    for k in cfg.k:
        es = solve_excited(mp, k, grid, **kw)
        if ground is None:
            ground = solve_ground_nlie(mp, es.system.ts, grid, system=es.system.ground)
        xi = correlation_length(es, ground)
        rows.append((k, free_energy(ground), correlation_row(es, xi)))
    return rows


def _map(cfg, fn, items):
    if cfg.workers > 1 and len(items) > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as ex:
            return list(ex.map(fn, items))
    return [fn(it) for it in items]


def run_free_energy(cfg):
    from .ground import FREE_ENERGY_COLUMNS

    rows = _map(cfg, _free_energy_point, [(cfg, b) for b in cfg.betas()])
    _write_rows(cfg.out, FREE_ENERGY_COLUMNS, rows)
    for r in rows:
        print(f"beta={r[0]} f={r[4]} iterations={r[6]} residual={r[7]}")
    return EXIT_OK


def run_correlation(cfg, with_f=False):
    from .excited import correlation_columns

    p0 = RationalP0.parse(cfg.p0)
    nz = p0.numerator - 2
    results = _map(cfg, _correlation_points, [(cfg, b) for b in cfg.betas()])
    header = correlation_columns(nz)
    rows = []
    for point in results:
        for k, f, row in point:
            rows.append(row[:4] + [repr(f)] + row[4:] if with_f else row)
    if with_f:
        header = header[:4] + ["f"] + header[4:]
    _write_rows(cfg.out, header, rows)
    for r in rows:
        print(" ".join(f"{h}={v}" for h, v in zip(header, r)))
    return EXIT_OK


def run_free_fermion(cfg):
    from .free_fermion import FF_COLUMNS, FreeFermionParams, ff_row

    rows = [ff_row(FreeFermionParams(cfg.J, b)) for b in cfg.betas()]
    _write_rows(cfg.out, FF_COLUMNS, rows)
    for r in rows:
        print(" ".join(f"{h}={v}" for h, v in zip(FF_COLUMNS, r)))
    return EXIT_OK


def run_sweep(cfg):
    if RationalP0.parse(cfg.p0).value == 2:
        return run_free_fermion(cfg)
    return run_correlation(cfg, with_f=True)


RUNNERS = {
    "ts-check": run_ts_check,
    "finite-check": run_finite_check,
    "free-energy": run_free_energy,
    "correlation": run_correlation,
    "free-fermion": run_free_fermion,
    "sweep": run_sweep,
}


def run(cfg: RunConfig) -> int:
    """Dispatch one validated config; returns the exit status."""
    try:
        return RUNNERS[cfg.mode](cfg)
    except (SolverError, PoleError, TruncationError, IncompleteSearchError) as e:
        print(f"solver failure: {e}", file=sys.stderr)
        res = getattr(e, "residuals", None)
        if res:
            print(f"  last residuals: {', '.join(f'{r:.3e}' for r in res[-5:])}", file=sys.stderr)
        return EXIT_SOLVER
    except DomainError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG


def build_parser():
    ap = argparse.ArgumentParser(prog="xxz-tba", description="XXZ chain thermodynamics from TBA/NLIE and finite-Trotter checks")
    ap.add_argument("config", nargs="?", help="JSON config file; flags override its keys")
    ap.add_argument("--mode", choices=MODES)
    ap.add_argument("--p0", help="anisotropy parameter as 'num/den'")
    ap.add_argument("--J", type=float)
    ap.add_argument("--beta", type=float)
    ap.add_argument("--beta-range", dest="beta_range", help="a:b:n[:geom]")
    ap.add_argument("--k", help="comma separated ranks, e.g. 2,3")
    ap.add_argument("--N", type=int, help="Trotter number for finite checks")
    ap.add_argument("--u", type=float, help="spectral parameter for finite checks (overrides beta)")
    ap.add_argument("--grid-extent", dest="grid_extent", type=float)
    ap.add_argument("--grid-points", dest="grid_points", type=int)
    ap.add_argument("--tol", type=float)
    ap.add_argument("--workers", type=int)
    ap.add_argument("--out")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        data = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    text = fh.read()
            except OSError as e:
                raise ConfigError(f"cannot read config: {e}") from None
            try:
                data = json.loads(text)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{args.config}: line {e.lineno} column {e.colno}: {e.msg}") from None
            if not isinstance(data, dict):
                raise ConfigError("config must be a JSON object")
        for key in _FIELDS:
            val = getattr(args, key, None)
            if val is not None:
                data[key] = val
        cfg = config_from_mapping(data)
    except ConfigError as e:
        print(f"configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return run(cfg)


if __name__ == "__main__":
    sys.exit(main())
