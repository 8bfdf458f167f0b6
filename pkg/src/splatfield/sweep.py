"""K-sweeps: oracle Shepard rates, least-squares risk curves, capacity tables."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from . import __version__
from .centers import farthest_point_order, make_center_set
from .errors import ParameterError, SizeError
from .estimator import Dictionary, bias_variance_mc, gram_matrix, optimal_k
from .field import (
    DEFAULT_NODES,
    AnalyticField,
    Domain,
    GridField,
    l2_norm_sq,
    midpoint_rule,
    rel_l2_error,
    sample_grid,
    smooth_grid,
)
from .io import fmt, write_json, write_table_csv
from .primitives import eval_scaffold, oracle_scaffold

__all__ = [
    "RateFit",
    "SweepResult",
    "rate_fit",
    "oracle_sweep",
    "oracle_sweep_seeds",
    "ls_sweep",
    "sensor_candidates",
    "OptKTable",
    "optk_table",
    "default_ks",
    "ORACLE_COLUMNS",
    "LS_COLUMNS",
    "DEGENERATE_ERROR",
    "STABILITY_THRESHOLD",
]

ORACLE_COLUMNS = ("K", "h", "q", "rho", "smooth_px", "rel_l2")
LS_COLUMNS = ("K", "h", "N", "sigma_noise", "trials", "bias2", "variance", "total",
              "c_low", "c_high")
LS_EXTRA_COLUMNS = ("approx_bias2", "residual2", "variance_exact", "total_se", "ridge")
DEGENERATE_ERROR = 1e-14
STABILITY_THRESHOLD = 0.01
# sensor candidate grids are offset from the center grid so sensors and
# centers do not coincide by construction
SENSOR_NODES = {2: 96, 3: 40}


def default_ks(d: int) -> list[int]:
    kmax = 4096 if d == 2 else 1024
    return [2**i for i in range(4, int(math.log2(kmax)) + 1)]


@dataclass(frozen=True)
class RateFit:
    """Least-squares line through ``(log K, log error)``."""

    exponent: float
    intercept: float
    r2: float


def rate_fit(Ks, errors) -> RateFit:
    """Slope of ``log(error)`` against ``log(K)``; intercept in natural log."""
    K = np.asarray(Ks, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    if K.shape != e.shape:
        raise SizeError("Ks and errors differ in length")
    if K.size < 3:
        raise SizeError("a rate fit needs at least three points")
    if np.any(np.diff(K) <= 0):
        raise ParameterError("Ks must be strictly increasing")
    if np.any(e <= 0) or np.any(K <= 0):
        raise ParameterError("rate fits need positive K and errors")
    lx, ly = np.log(K), np.log(e)
    if np.all(ly == ly[0]):
        return RateFit(0.0, float(ly[0]), 1.0)
    res = stats.linregress(lx, ly)
    return RateFit(float(res.slope), float(res.intercept), float(res.rvalue**2))


@dataclass
class SweepResult:
    """Rows of a K-sweep plus log-log fits and a configuration echo."""

    tag: str
    columns: tuple[str, ...]
    rows: list[tuple]
    fits: dict[str, RateFit] = field(default_factory=dict)
    primary: str = ""
    degenerate: bool = False
    config: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        j = self.columns.index(name)
        return np.array([r[j] for r in self.rows], dtype=np.float64)

    @property
    def Ks(self) -> list[int]:
        return [int(k) for k in self.column("K")]

    @property
    def fit(self) -> RateFit | None:
        return self.fits.get(self.primary)

    @property
    def exponent(self) -> float:
        return self.fit.exponent if self.fit else math.nan

    def footer(self) -> list[str]:
        lines = []
        for name, fit in self.fits.items():
            prefix = "" if name == self.primary else f"{name}_"
            lines += [f"{prefix}exponent={fmt(fit.exponent)}",
                      f"{prefix}intercept={fmt(fit.intercept)}",
                      f"{prefix}r2={fmt(fit.r2)}"]
        if self.degenerate:
            lines.append("rate_fit=skipped (degenerate errors)")
        for key in sorted(self.extras):
            lines.append(f"{key}={_fmt_value(self.extras[key])}")
        for key in sorted(self.config):
            lines.append(f"config.{key}={_fmt_value(self.config[key])}")
        lines.append(f"version=splatfield {__version__}")
        return lines

    def to_csv(self, path) -> None:
        write_table_csv(path, self.columns, self.rows, self.footer())

    def summary(self) -> dict:
        return {
            "tag": self.tag,
            "columns": list(self.columns),
            "rows": [list(map(_jsonable, r)) for r in self.rows],
            "fits": {k: vars(v) for k, v in self.fits.items()},
            "primary": self.primary,
            "degenerate": self.degenerate,
            "config": {k: _jsonable(v) for k, v in self.config.items()},
            "extras": {k: _jsonable(v) for k, v in self.extras.items()},
            "version": __version__,
        }

    def to_json(self, path) -> None:
        write_json(path, self.summary())


def _jsonable(v):
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        # JSON has no infinities or NaN; keep them readable as strings
        return float(v) if math.isfinite(v) else str(float(v))
    if isinstance(v, (list, tuple)):
        return [_jsonable(t) for t in v]
    return v


def _fmt_value(v) -> str:
    if isinstance(v, float):
        return fmt(v)
    if isinstance(v, (list, tuple)):
        return ";".join(_fmt_value(t) for t in v)
    return str(v)


def _as_grid(fld, resolution) -> GridField:
    if isinstance(fld, GridField):
        return fld
    if resolution is None:
        resolution = DEFAULT_NODES[fld.domain.d]
    return sample_grid(fld, resolution)


def _fit_or_flag(Ks, errors):
    errors = np.asarray(errors)
    if np.any(~np.isfinite(errors)) or np.any(errors < DEGENERATE_ERROR) or len(Ks) < 3:
        return None
    return rate_fit(Ks, errors)


def _oracle_errors(grid: GridField, Ks, c_sigma: float, weight: float):
    q = grid.quadrature()
    nodes = q.nodes
    values = grid.flat()
    order = farthest_point_order(nodes, max(Ks), grid.domain.centroid)
    geometry, errors = [], []
    for K in Ks:
        idx = order[:K]
        cs = make_center_set(grid.domain, nodes[idx], probe=q, indices=idx)
        ps = oracle_scaffold(None, cs, c_sigma, weight, amplitudes=values[idx])
        approx = eval_scaffold(ps, nodes).values
        geometry.append((cs.h, cs.q, cs.rho))
        errors.append(rel_l2_error(values, approx, q))
    return geometry, errors


def oracle_sweep(fld, Ks=None, c_sigma: float = 1.0, smooth_px: float = 0.0,
                 resolution=None, weight: float = 0.5) -> SweepResult:
    """Oracle Shepard error against K on nested farthest-point centers.

    The field is sampled on a cell-centered grid (optionally blurred by
    ``smooth_px`` pixels); grid cells are the center candidates, the
    amplitudes, and the quadrature for the relative L2 error.
    """
    domain = fld.domain
    Ks = sorted(int(k) for k in (Ks or default_ks(domain.d)))
    if Ks[0] < 1 or len(set(Ks)) != len(Ks):
        raise ParameterError("Ks must be distinct positive integers")
    grid = _as_grid(fld, resolution)
    if smooth_px > 0:
        grid = smooth_grid(grid, smooth_px)
    geometry, errors = _oracle_errors(grid, Ks, c_sigma, weight)
    rows = [(K, h, q, rho, float(smooth_px), e) for K, (h, q, rho), e in zip(Ks, geometry, errors)]
    fit = _fit_or_flag(Ks, errors)
    return SweepResult(
        tag="oracle",
        columns=ORACLE_COLUMNS,
        rows=rows,
        fits={"rel_l2": fit} if fit else {},
        primary="rel_l2",
        degenerate=fit is None,
        config=_field_config(fld) | {"c_sigma": float(c_sigma), "smooth_px": float(smooth_px),
                                     "resolution": list(grid.resolution), "weight": float(weight),
                                     "Ks": Ks},
    )


def oracle_sweep_seeds(make_field, seeds, Ks=None, c_sigma: float = 1.0, smooth_px: float = 0.0,
                       resolution=None, weight: float = 0.5) -> SweepResult:
    """Oracle sweep averaged over field seeds; adds a ``rel_l2_std`` column."""
    runs = [oracle_sweep(make_field(s), Ks, c_sigma, smooth_px, resolution, weight) for s in seeds]
    errs = np.array([r.column("rel_l2") for r in runs])
    mean = errs.mean(axis=0)
    std = errs.std(axis=0, ddof=1) if len(runs) > 1 else np.zeros_like(mean)
    base = runs[0]
    rows = [tuple(r[:5]) + (m, s) for r, m, s in zip(base.rows, mean, std)]
    fit = _fit_or_flag(base.Ks, mean)
    config = dict(base.config)
    config["seeds"] = [int(s) for s in seeds]
    config.pop("seed", None)
    return SweepResult("oracle", ORACLE_COLUMNS + ("rel_l2_std",), rows,
                       {"rel_l2": fit} if fit else {}, "rel_l2", fit is None, config)


def sensor_candidates(domain: Domain, boundary: bool = False, resolution=None) -> np.ndarray:
    """Cell-centered interior candidates, or candidates on the box boundary."""
    d = domain.d
    n = resolution or SENSOR_NODES[d]
    if not boundary:
        return midpoint_rule(domain, n).nodes
    pts = []
    lo, hi = np.asarray(domain.lower), np.asarray(domain.upper)
    face_rule = None
    for axis in range(d):
        others = [i for i in range(d) if i != axis]
        sub = Domain(tuple(lo[others]), tuple(hi[others])) if d == 3 else None
        if d == 2:
            t = lo[others[0]] + (np.arange(n) + 0.5) * (hi[others[0]] - lo[others[0]]) / n
            face_rule = t[:, None]
        else:
            face_rule = midpoint_rule(sub, n).nodes
        for side in (lo[axis], hi[axis]):
            face = np.empty((face_rule.shape[0], d))
            face[:, axis] = side
            face[:, others] = face_rule
            pts.append(face)
    return np.concatenate(pts, axis=0)


def ls_sweep(fld: AnalyticField, Ks, N: int, sigma_noise: float, trials: int = 200,
             seed: int = 42, q=None, c_sigma: float = 1.0, boundary: bool = False,
             sensor_resolution=None, ridge: float | None = None,
             field_norm: float | None = None) -> SweepResult:
    """Least-squares risk against K for a fixed sensor layout.

    Sensors are N farthest-point picks from interior (or boundary) candidates;
    dictionaries use nested farthest-point centers on the quadrature nodes
    with ``sigma = c_sigma * h_K``.
    """
    domain = fld.domain
    Ks = sorted(int(k) for k in Ks)
    if not Ks or Ks[0] < 1 or len(set(Ks)) != len(Ks):
        raise ParameterError("Ks must be distinct positive integers")
    if N < 1:
        raise SizeError("need at least one sensor")
    q = q or midpoint_rule(domain, DEFAULT_NODES[domain.d])
    cand = sensor_candidates(domain, boundary, sensor_resolution)
    sensors = cand[farthest_point_order(cand, N, domain.centroid)]
    order = farthest_point_order(q.nodes, max(Ks), domain.centroid)

    rows, reports, stability_flags = [], [], []
    for K in Ks:
        cs = make_center_set(domain, q.nodes[order[:K]], probe=q, indices=order[:K])
        dic = Dictionary.from_centers(cs, c_sigma)
        G = gram_matrix(dic, q)
        rep = bias_variance_mc(fld, dic, sensors, sigma_noise, trials, q, seed, ridge, G)
        reports.append(rep)
        rows.append((K, cs.h, N, float(sigma_noise), int(trials), rep.bias2, rep.variance,
                     rep.total, rep.c_low, rep.c_high, rep.approx_bias2, rep.residual2,
                     rep.variance_exact, rep.total_se, rep.ridge))
        if rep.c_low < STABILITY_THRESHOLD:
            stability_flags.append(K)

    totals = np.array([r.total for r in reports])
    argmin_k = Ks[int(np.argmin(totals))]
    if field_norm is None:
        field_norm = math.sqrt(l2_norm_sq(fld, q))
    kstar, kstar_int = optimal_k(N, sigma_noise, domain.d, fld.smoothness, field_norm) \
        if sigma_noise > 0 else (math.inf, 0)

    fits = {}
    var_fit = _fit_or_flag(Ks, [r.variance for r in reports])
    if var_fit:
        fits["variance"] = var_fit
    bias_fit = _fit_or_flag(Ks, [r.approx_bias2 for r in reports])
    if bias_fit:
        fits["approx_bias2"] = bias_fit
    return SweepResult(
        tag="ls",
        columns=LS_COLUMNS + LS_EXTRA_COLUMNS,
        rows=rows,
        fits=fits,
        primary="variance",
        degenerate=var_fit is None,
        config=_field_config(fld) | {"Ks": Ks, "N": int(N), "sigma_noise": float(sigma_noise),
                                     "trials": int(trials), "seed": int(seed),
                                     "c_sigma": float(c_sigma), "boundary": bool(boundary),
                                     "quadrature": list(q.shape)},
        extras={"argmin_K": argmin_k, "optimal_K": kstar_int, "optimal_K_real": float(kstar),
                "field_norm": float(field_norm),
                "unstable_K": stability_flags},
    )


def _field_config(fld) -> dict:
    if isinstance(fld, GridField):
        return {"field": "grid", "d": fld.domain.d}
    desc = fld.describe() if hasattr(fld, "describe") else {"kind": "custom"}
    rename = {"kind": "field", "seed": "field_seed"}
    out = {rename.get(k, k): v for k, v in desc.items()}
    out["lower"] = list(fld.domain.lower)
    out["upper"] = list(fld.domain.upper)
    return out


@dataclass(frozen=True)
class OptKTable:
    """Rounded capacity scales on an ``s`` by ``N`` grid plus symbolic rate columns."""

    d: int
    s_values: tuple[float, ...]
    N_values: tuple[float, ...]
    sigma: float
    norm: float
    K: np.ndarray
    K_real: np.ndarray

    @property
    def symbolic(self) -> dict:
        d = self.d
        return {
            "Fill distance": f"h ~ K^(-1/{d})",
            "Unnorm. rate": f"K^(-s/{d})",
            "Norm. rate": f"K^(-1/{d})",
            "Optimal K*": f"(N/sigma^2)^({d}/(2s+{d}))",
            "Optimized risk scale": f"(sigma^2/N)^(2s/(2s+{d}))",
        }

    def rate_rows(self) -> list[tuple]:
        d = self.d
        return [(s, -s / d, -1.0 / d, d / (2 * s + d), 2 * s / (2 * s + d)) for s in self.s_values]

    def to_text(self) -> str:
        head = f"d={self.d}  sigma={_short(self.sigma)}  norm={_short(self.norm)}  (constants set to 1)"
        ncols = [f"N={_short(n)}" for n in self.N_values]
        width = max(6, *(len(c) for c in ncols))
        lines = [head, "s".ljust(6) + "".join(c.rjust(width + 2) for c in ncols)]
        for s, row in zip(self.s_values, self.K):
            lines.append(f"s={_short(s)}".ljust(6) + "".join(str(int(k)).rjust(width + 2) for k in row))
        lines.append("")
        for name, expr in self.symbolic.items():
            lines.append(f"{name}: {expr}")
        lines.append("s, unnorm_exp, norm_exp, kstar_exp, risk_exp")
        for row in self.rate_rows():
            lines.append(", ".join(_short(v) for v in row))
        return "\n".join(lines)

    def to_csv(self, path) -> None:
        cols = ("d", "s", "N", "sigma", "norm", "K_star", "K_star_int",
                "unnorm_rate_exp", "norm_rate_exp", "risk_exp")
        rows = []
        for i, s in enumerate(self.s_values):
            for j, n in enumerate(self.N_values):
                rows.append((self.d, float(s), float(n), float(self.sigma), float(self.norm),
                             float(self.K_real[i, j]), int(self.K[i, j]),
                             -s / self.d, -1.0 / self.d, 2 * s / (2 * s + self.d)))
        footer = [f"{k}: {v}" for k, v in self.symbolic.items()] + [f"version=splatfield {__version__}"]
        write_table_csv(path, cols, rows, footer)


def _short(v) -> str:
    v = float(v)
    return str(int(v)) if v.is_integer() else format(v, "g")


DEFAULT_OPTK_N = {2: (4, 8, 16, 32), 3: (4, 8, 32, 128)}


def optk_table(d: int = 2, s_values=(1, 2, 3), N_values=None, sigma: float = 1.0,
               norm: float = 1.0) -> OptKTable:
    if d not in DEFAULT_OPTK_N:
        raise ParameterError("d must be 2 or 3")
    N_values = tuple(N_values or DEFAULT_OPTK_N[d])
    s_values = tuple(s_values)
    K = np.zeros((len(s_values), len(N_values)), dtype=np.int64)
    Kr = np.zeros(K.shape)
    for i, s in enumerate(s_values):
        for j, n in enumerate(N_values):
            Kr[i, j], K[i, j] = optimal_k(n, sigma, d, s, norm)
    return OptKTable(d, s_values, N_values, float(sigma), float(norm), K, Kr)
