"""Command-line entry point: ``splatfield <subcommand> [options]``.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 numerical degeneracy.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__, _kernels
from .errors import (
    DimensionError,
    NumericalDegeneracyError,
    ParameterError,
    SizeError,
    UndefinedRatioError,
)
from .field import (
    DEFAULT_NODES,
    Domain,
    make_constant,
    make_fourier_random,
    make_lamb_oseen,
    make_taylor_green,
    midpoint_rule,
    sample_grid,
    smooth_grid,
)
from .io import write_container, write_grid_csv
from .sweep import STABILITY_THRESHOLD, default_ks, ls_sweep, optk_table, oracle_sweep, oracle_sweep_seeds

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_DEGENERATE = 0, 1, 2, 3
FIELD_KINDS = ("taylor-green", "lamb-oseen", "fourier-random", "constant")


class ConfigError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise ConfigError(f"{self.prog}: {message}")


class _HelpFormatter(argparse.ArgumentDefaultsHelpFormatter):
    # unset defaults are described in the help text itself
    def _get_help_string(self, action):
        if action.default is None or action.default is False:
            return action.help
        return super()._get_help_string(action)


def _int_list(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(";", ",").split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _point(text: str) -> tuple[float, ...]:
    return tuple(_float_list(text))


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, default=None, help="key=value config file")
    p.add_argument("--threads", type=int, default=None,
                   help="kernel thread cap (default: $SPLATFIELD_THREADS or 1)")


def _field_args(p: argparse.ArgumentParser, default_kind: str) -> None:
    g = p.add_argument_group("field")
    g.add_argument("--field", choices=FIELD_KINDS, default=default_kind, help="analytic field")
    g.add_argument("--d", type=int, default=2, choices=(2, 3), help="spatial dimension")
    g.add_argument("--s", type=float, default=1.0, help="fourier-random smoothness")
    g.add_argument("--modes", type=int, default=16, help="fourier-random modes per axis")
    g.add_argument("--field-seed", type=int, default=42, help="fourier-random coefficient seed")
    g.add_argument("--channels", type=int, default=1, help="fourier-random channels")
    g.add_argument("--core-radius", type=float, default=0.05, help="lamb-oseen core radius")
    g.add_argument("--center", type=_point, default=None, help="lamb-oseen center, e.g. 0.5,0.5")
    g.add_argument("--value", type=float, default=1.0, help="constant field value")
    g.add_argument("--lower", type=_point, default=None, help="domain lower corner")
    g.add_argument("--upper", type=_point, default=None, help="domain upper corner")


def build_parser() -> argparse.ArgumentParser:
    fmt = _HelpFormatter
    parser = _Parser(prog="splatfield", description="Gaussian-primitive reconstruction experiments.")
    parser.add_argument("--version", action="version", version=f"splatfield {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("oracle-sweep", formatter_class=fmt, help="oracle Shepard K-sweep")
    _common(p)
    _field_args(p, "taylor-green")
    p.add_argument("--ks", type=_int_list, default=None, help="explicit K list (overrides kmin/kmax)")
    p.add_argument("--kmin", type=int, default=16, help="smallest K of the doubling ladder")
    p.add_argument("--kmax", type=int, default=None, help="largest K (4096 in 2-D, 1024 in 3-D)")
    p.add_argument("--c-sigma", type=float, default=1.0, help="sigma = c_sigma * h_K")
    p.add_argument("--smooth-px", type=float, default=0.0, help="Gaussian blur in grid pixels")
    p.add_argument("--resolution", type=int, default=None, help="grid nodes per axis (128 / 48)")
    p.add_argument("--weight", type=float, default=0.5, help="primitive weight w")
    p.add_argument("--seeds", type=_int_list, default=None,
                   help="average fourier-random over these field seeds")
    p.add_argument("--out", type=Path, default=None, help="CSV output path (required)")
    p.add_argument("--json", type=Path, default=None, help="JSON summary (default: <out>.json)")

    p = sub.add_parser("ls-sweep", formatter_class=fmt, help="least-squares bias-variance K-sweep")
    _common(p)
    _field_args(p, "fourier-random")
    p.add_argument("--ks", type=_int_list, default=None, help="explicit K list")
    p.add_argument("--kmin", type=int, default=4, help="smallest K of the doubling ladder")
    p.add_argument("--kmax", type=int, default=64, help="largest K of the doubling ladder")
    p.add_argument("--n", type=int, default=64, help="number of sensors N")
    p.add_argument("--sigma-noise", type=float, default=0.1, help="sensor noise std")
    p.add_argument("--trials", type=int, default=200, help="Monte-Carlo trials T")
    p.add_argument("--seed", type=int, default=42, help="noise seed")
    p.add_argument("--c-sigma", type=float, default=1.0, help="sigma = c_sigma * h_K")
    p.add_argument("--boundary", action="store_true", help="restrict sensors to the boundary")
    p.add_argument("--quad-nodes", type=int, default=None, help="quadrature nodes per axis")
    p.add_argument("--ridge", type=float, default=None, help="fixed ridge (default: automatic)")
    p.add_argument("--out", type=Path, default=None, help="CSV output path (required)")
    p.add_argument("--json", type=Path, default=None, help="JSON summary (default: <out>.json)")

    p = sub.add_parser("optk", formatter_class=fmt, help="capacity-scale table")
    _common(p)
    p.add_argument("--d", type=int, default=2, choices=(2, 3), help="spatial dimension")
    p.add_argument("--s", type=_float_list, default=None, help="smoothness list (1,2,3)")
    p.add_argument("--n", type=_float_list, default=None,
                   help="sensor-count list (4,8,16,32 in 2-D; 4,8,32,128 in 3-D)")
    p.add_argument("--sigma", type=float, default=1.0, help="noise level")
    p.add_argument("--norm", type=float, default=1.0, help="field norm")
    p.add_argument("--csv", type=Path, default=None, help="optional CSV output")

    p = sub.add_parser("selftest", formatter_class=fmt, help="fast invariant suite")
    _common(p)

    p = sub.add_parser("field-dump", formatter_class=fmt, help="write a sampled field")
    _common(p)
    _field_args(p, "taylor-green")
    p.add_argument("--resolution", type=int, default=None, help="grid nodes per axis")
    p.add_argument("--smooth-px", type=float, default=0.0, help="Gaussian blur in grid pixels")
    p.add_argument("--out", type=Path, default=None, help="SPLF container path (required)")
    p.add_argument("--csv", type=Path, default=None, help="optional CSV for plotting")
    return parser


def _subparser(parser: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise ConfigError(f"unknown command {command!r}")


def read_config(path: Path, sub: argparse.ArgumentParser) -> dict:
    """Parse a key=value file into argparse defaults for ``sub``."""
    actions = {a.dest: a for a in sub._actions if a.dest not in ("help", "config")}
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc.strerror})")
    out = {}
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value")
        key, value = (t.strip() for t in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in actions:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        action = actions[dest]
        try:
            if isinstance(action, argparse._StoreTrueAction):
                parsed = value.lower() in ("1", "true", "yes", "on")
                if value.lower() not in ("0", "1", "true", "false", "yes", "no", "on", "off"):
                    raise ValueError(value)
            else:
                parsed = action.type(value) if action.type else value
            if action.choices is not None and parsed not in action.choices:
                raise ValueError(value)
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}")
        out[dest] = parsed
    return out


def parse(argv) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is not None:
        sub = _subparser(parser, args.command)
        sub.set_defaults(**read_config(args.config, sub))
        args = parser.parse_args(argv)
    return args


def _thread_count(args) -> int:
    n = args.threads
    if n is None:
        raw = os.environ.get("SPLATFIELD_THREADS")
        try:
            n = int(raw) if raw else 1
        except ValueError:
            raise ConfigError(f"SPLATFIELD_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigError("--threads must be at least 1")
    return n


def _domain(args) -> Domain:
    if args.lower is None and args.upper is None:
        return Domain.unit(args.d)
    lower = args.lower or (0.0,) * args.d
    upper = args.upper or (1.0,) * args.d
    if len(lower) != args.d or len(upper) != args.d:
        raise ConfigError("--lower/--upper must have d components")
    return Domain(lower, upper)


def make_field(args, seed: int | None = None):
    domain = _domain(args)
    kind = args.field
    if kind == "taylor-green":
        return make_taylor_green(domain)
    if kind == "lamb-oseen":
        return make_lamb_oseen(domain, args.core_radius, args.center)
    if kind == "fourier-random":
        return make_fourier_random(domain, args.s, args.modes,
                                   args.field_seed if seed is None else seed, args.channels)
    return make_constant(domain, args.value)


def _require_out(args) -> Path:
    if args.out is None:
        raise ConfigError("--out is required")
    return args.out


def _json_path(args) -> Path:
    return args.json or args.out.with_name(args.out.name + ".json")


def _ks(args, d: int) -> list[int]:
    if args.ks:
        return args.ks
    kmax = args.kmax if args.kmax is not None else default_ks(d)[-1]
    if args.kmin < 1 or kmax < args.kmin:
        raise ConfigError("need 1 <= kmin <= kmax")
    ks, k = [], args.kmin
    while k <= kmax:
        ks.append(k)
        k *= 2
    return ks


def cmd_oracle_sweep(args) -> int:
    out = _require_out(args)
    fld = make_field(args)
    ks = _ks(args, fld.domain.d)
    if args.seeds:
        if args.field != "fourier-random":
            raise ConfigError("--seeds applies to fourier-random only")
        res = oracle_sweep_seeds(lambda s: make_field(args, s), args.seeds, ks, args.c_sigma,
                                 args.smooth_px, args.resolution, args.weight)
    else:
        res = oracle_sweep(fld, ks, args.c_sigma, args.smooth_px, args.resolution, args.weight)
    res.to_csv(out)
    res.to_json(_json_path(args))
    if res.degenerate:
        print("rate fit skipped (degenerate errors)")
    else:
        print(f"exponent={res.exponent:.6f} r2={res.fit.r2:.6f}")
    return EXIT_OK


def cmd_ls_sweep(args) -> int:
    out = _require_out(args)
    fld = make_field(args)
    d = fld.domain.d
    q = midpoint_rule(fld.domain, args.quad_nodes or DEFAULT_NODES[d])
    res = ls_sweep(fld, _ks(args, d), args.n, args.sigma_noise, args.trials, args.seed, q,
                   args.c_sigma, args.boundary, ridge=args.ridge)
    res.to_csv(out)
    res.to_json(_json_path(args))
    for K in res.extras["unstable_K"]:
        row = res.rows[res.Ks.index(K)]
        print(f"warning: spectral stability fails at K={K} "
              f"(c_low={row[8]:.3e} < {STABILITY_THRESHOLD})", file=sys.stderr)
    print(f"argmin_K={res.extras['argmin_K']} optimal_K={res.extras['optimal_K']} "
          f"(K*={res.extras['optimal_K_real']:.4f})")
    if not res.degenerate:
        print(f"variance_exponent={res.exponent:.6f}")
    return EXIT_OK


def cmd_optk(args) -> int:
    s_values = args.s or [1.0, 2.0, 3.0]
    n_values = args.n
    if min(s_values) <= 0 or (n_values and min(n_values) <= 0) or args.sigma <= 0 or args.norm <= 0:
        raise ConfigError("optk arguments must be positive")
    table = optk_table(args.d, s_values, n_values, args.sigma, args.norm)
    print(table.to_text())
    if args.csv:
        table.to_csv(args.csv)
    return EXIT_OK


def cmd_field_dump(args) -> int:
    out = _require_out(args)
    fld = make_field(args)
    res = args.resolution or DEFAULT_NODES[fld.domain.d]
    grid = sample_grid(fld, res)
    if args.smooth_px > 0:
        grid = smooth_grid(grid, args.smooth_px)
    write_container(out, grid)
    if args.csv:
        write_grid_csv(args.csv, grid)
    print(f"wrote {out} ({'x'.join(map(str, grid.resolution))}, C={grid.channels})")
    return EXIT_OK


def cmd_selftest(args) -> int:
    from .selftest import run_selftest

    t0 = time.perf_counter()
    results = run_selftest()
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
    failed = [name for name, ok, _ in results if not ok]
    elapsed = time.perf_counter() - t0
    if failed:
        print(f"selftest failed: {', '.join(failed)}", file=sys.stderr)
        return EXIT_FAIL
    print(f"selftest passed ({len(results)} checks)", file=sys.stderr)
    if elapsed > 60:
        print(f"warning: selftest took {elapsed:.1f}s", file=sys.stderr)
    return EXIT_OK


COMMANDS = {
    "oracle-sweep": cmd_oracle_sweep,
    "ls-sweep": cmd_ls_sweep,
    "optk": cmd_optk,
    "selftest": cmd_selftest,
    "field-dump": cmd_field_dump,
}


def main(argv=None) -> int:
    try:
        args = parse(argv)
        threads = _thread_count(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_CONFIG
    _kernels.set_num_threads(threads)
    try:
        # BLAS stays single-threaded so reductions do not depend on the thread cap
        with threadpool_limits(limits=1), np.errstate(over="ignore", under="ignore"):
            return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DimensionError, SizeError, ParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalDegeneracyError, UndefinedRatioError) as exc:
        print(f"numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
