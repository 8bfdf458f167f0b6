"""Fast invariant suite behind ``splatfield selftest``.

Each check returns ``(name, passed, detail)``; inputs are fixed so repeated
runs print identical reports.
"""

from __future__ import annotations

import math

import numpy as np

from .centers import farthest_point_order, make_center_set
from .errors import SplatfieldError
from .estimator import Dictionary, bias_variance_mc, design_matrix, fit_least_squares, gram_matrix
from .field import Domain, default_quadrature, make_constant, make_fourier_random, midpoint_rule
from .primitives import eval_scaffold, moment_sum, oracle_scaffold, partition_sums
from .rng import TAG_PROPERTY, CounterStream, stream_id

__all__ = ["run_selftest", "CHECKS"]

PU_TOL = 1e-12
CONSTANT_TOL = 1e-12
INTERP_TOL = 1e-8
GRAM_TOL = 0.01
MOMENT_BAND = 2.0


def _random_points(n: int, d: int = 2, index: int = 0) -> np.ndarray:
    return CounterStream(42, stream_id(TAG_PROPERTY, index)).uniform(n * d).reshape(n, d)


def _fps_centers(domain: Domain, K: int, q=None):
    q = q or default_quadrature(domain)
    idx = farthest_point_order(q.nodes, K, domain.centroid)
    return make_center_set(domain, q.nodes[idx], probe=q, indices=idx)


def check_partition_of_unity():
    D = Domain.unit(2)
    ps = oracle_scaffold(make_constant(D), _fps_centers(D, 256))
    total, _ = partition_sums(ps, _random_points(10_000))
    err = float(np.abs(total - 1.0).max())
    return err <= PU_TOL, f"max |sum psi - 1| = {err:.3e} (tol {PU_TOL:g})"


def check_constant_reproduction():
    D = Domain.unit(2)
    c = 2.5
    ps = oracle_scaffold(make_constant(D, c), _fps_centers(D, 256))
    vals = eval_scaffold(ps, _random_points(10_000, index=1)).values
    err = float(np.abs(vals - c).max() / c)
    return err <= CONSTANT_TOL, f"max relative deviation {err:.3e} (tol {CONSTANT_TOL:g})"


def check_moment_localization():
    D = Domain.unit(2)
    q = default_quadrature(D)
    x = _random_points(10_000, index=2)
    order = farthest_point_order(q.nodes, 4096, D.centroid)
    ratios = []
    for K in (64, 256, 1024, 4096):
        cs = make_center_set(D, q.nodes[order[:K]], probe=q)
        ps = oracle_scaffold(make_constant(D), cs)
        ratios.append(float(np.max(moment_sum(ps, x, 1.0))) / cs.h)
    band = max(ratios) / min(ratios)
    text = ", ".join(f"{r:.3f}" for r in ratios)
    return band <= MOMENT_BAND, f"max first moment / h = [{text}], band {band:.3f} (tol {MOMENT_BAND:g})"


def check_interpolation_recovery():
    D = Domain.unit(2)
    cs = _fps_centers(D, 64)
    fld = make_fourier_random(D, s=2.0, modes=8, seed=7)
    # narrow Gaussians keep the square kernel matrix well conditioned
    dic = Dictionary(D, cs.centers, cs.q / 3.0, None)
    y = fld(cs.centers)
    fit = fit_least_squares(design_matrix(dic, cs.centers), y, ridge=0.0)
    resid = float(fit.residual_norm.max() / np.linalg.norm(y))
    return resid <= INTERP_TOL, f"relative sensor residual {resid:.3e} (tol {INTERP_TOL:g})"


def check_pythagorean():
    D = Domain.unit(2)
    q = midpoint_rule(D, 64)
    fld = make_fourier_random(D, s=1.0, seed=7)
    cs = _fps_centers(D, 16, q)
    sensors = _fps_centers(D, 64, midpoint_rule(D, 48)).centers
    rep = bias_variance_mc(fld, Dictionary.from_centers(cs), sensors, 0.1, trials=50, q=q)
    gap = abs(rep.decomposition_gap)
    ok = gap <= 3.0 * rep.total_se
    return ok, f"|total - bias2 - variance| = {gap:.3e}, 3 se = {3 * rep.total_se:.3e}"


def check_gram_closed_form():
    D = Domain.unit(2)
    sigma = 0.05
    mu = np.array([[0.45, 0.5], [0.5, 0.5], [0.55, 0.52], [0.5, 0.6]])
    G = gram_matrix(Dictionary(D, mu, sigma, None), midpoint_rule(D, 256))
    diff = mu[:, None, :] - mu[None, :, :]
    exact = math.pi * sigma**2 * np.exp(-np.sum(diff**2, axis=2) / (4 * sigma**2))
    err = float(np.max(np.abs(G - exact) / exact))
    return err <= GRAM_TOL, f"max relative deviation {err:.3e} (tol {GRAM_TOL:g})"


CHECKS = [
    ("partition-of-unity", check_partition_of_unity),
    ("constant-reproduction", check_constant_reproduction),
    ("moment-localization", check_moment_localization),
    ("interpolation-recovery", check_interpolation_recovery),
    ("pythagorean-decomposition", check_pythagorean),
    ("gram-closed-form", check_gram_closed_form),
]


def run_selftest() -> list[tuple[str, bool, str]]:
    results = []
    for name, check in CHECKS:
        try:
            ok, detail = check()
        except (SplatfieldError, ArithmeticError, ValueError) as exc:
            ok, detail = False, f"raised {type(exc).__name__}: {exc}"
        results.append((name, bool(ok), detail))
    return results
