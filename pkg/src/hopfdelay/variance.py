"""How the feedback strength p responds to delay variance at fixed mean.

p_mu is p evaluated on the fixed-mean family h_mu; mu = 0 is the discrete
delay at the mean, which is a local extremum of p_mu and, for symmetric
distributions, a global one.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .averaging import p_from_structure
from .exceptions import NotSymmetric
from .measures import (
    dirac,
    is_symmetric,
    moments,
    scale_about_mean,
    scale_family,
    stieltjes_integral,
)


@dataclass(frozen=True)
class MuScan:
    mu_grid: tuple
    p_values: tuple
    sign_changes: tuple  # (mu_lo, mu_hi, refined root)
    p0: float


@dataclass(frozen=True)
class SymmetricBoundReport:
    p0: float
    rows: tuple  # (mu, p_mu, attenuation factor)
    max_identity_error: float
    bound_holds: bool


def _check_mean(h_ref, tau_bar):
    _, mean, _ = moments(h_ref)
    if abs(mean - tau_bar) > 1e-9 * max(1.0, abs(tau_bar)):
        raise ValueError(
            f"reference distribution mean {mean} differs from tau_bar {tau_bar}"
        )


def p_mu(C, h_ref, tau_bar, mu, H):
    """p for the variance-scaled distribution; mu = 0 is the discrete delay."""
    _check_mean(h_ref, tau_bar)
    if mu < 0:
        raise ValueError("mu must be nonnegative")
    dist = dirac(tau_bar) if mu == 0 else scale_family(h_ref, mu)
    return p_from_structure(C, dist, H).p


def _p_mu_signed(C, h_ref, tau_bar, mu, H):
    """Smooth extension of p_mu to mu in R, used by finite differences."""
    if mu == 0:
        dist = dirac(tau_bar)
    else:
        dist = scale_about_mean(h_ref, mu)
    return p_from_structure(C, dist, H).p


def _sweep_workers():
    raw = os.environ.get("HOPFDELAY_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def scan_mu(C, h_ref, tau_bar, grid, H):
    """Evaluate p_mu on a grid and refine every sign change by bisection."""
    _check_mean(h_ref, tau_bar)
    grid = [float(m) for m in grid]
    if any(b <= a for a, b in zip(grid[:-1], grid[1:])):
        raise ValueError("mu grid must be strictly increasing")

    workers = _sweep_workers()
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            values = list(
                pool.map(lambda m: p_mu(C, h_ref, tau_bar, m, H), grid)
            )
    else:
        values = [p_mu(C, h_ref, tau_bar, m, H) for m in grid]

    changes = []
    for (a, pa), (b, pb) in zip(zip(grid, values), zip(grid[1:], values[1:])):
        if pa == 0.0 or pa * pb >= 0.0:
            continue
        lo, hi, plo = a, b, pa
        root = None
        while hi - lo > 1e-14:
            mid = 0.5 * (lo + hi)
            pm = p_mu(C, h_ref, tau_bar, mid, H)
            if abs(pm) <= 1e-10:
                root = mid
                break
            if plo * pm < 0:
                hi = mid
            else:
                lo, plo = mid, pm
        if root is None:
            root = 0.5 * (lo + hi)
        changes.append((a, b, root))

    p0 = p_mu(C, h_ref, tau_bar, 0.0, H)
    return MuScan(
        mu_grid=tuple(grid),
        p_values=tuple(values),
        sign_changes=tuple(changes),
        p0=p0,
    )


def local_derivatives(C, h_ref, tau_bar, H):
    """Analytic derivatives of p_mu at mu = 0: always (0, -sigma^2 * p0)."""
    _check_mean(h_ref, tau_bar)
    _, _, var = moments(h_ref)
    if var <= 0:
        raise ValueError("reference distribution must have positive variance")
    p0 = p_mu(C, h_ref, tau_bar, 0.0, H)
    return 0.0, -var * p0


def finite_difference_derivatives(C, h_ref, tau_bar, H, step):
    """Central differences of p_mu about mu = 0 (uses the signed extension)."""
    p0 = _p_mu_signed(C, h_ref, tau_bar, 0.0, H)
    pp = _p_mu_signed(C, h_ref, tau_bar, step, H)
    pm = _p_mu_signed(C, h_ref, tau_bar, -step, H)
    d1 = (pp - pm) / (2.0 * step)
    d2 = (pp - 2.0 * p0 + pm) / (step * step)
    return d1, d2


def global_bound_check(C, h_ref, tau_bar, mu_samples, H, tol=1e-10):
    """For symmetric references, verify p_mu = p0 * int cos(mu (s - tau_bar)) dh.

    Also reports the attenuation factor per mu and whether |p_mu| <= |p0|
    holds on the samples.
    """
    _check_mean(h_ref, tau_bar)
    if not is_symmetric(h_ref, tol=1e-9):
        raise NotSymmetric("reference distribution is not symmetric about its mean")
    p0 = p_mu(C, h_ref, tau_bar, 0.0, H)
    rows = []
    max_err = 0.0
    bound = True
    for mu in mu_samples:
        mu = float(mu)
        att = float(
            stieltjes_integral(
                h_ref,
                lambda s: np.cos(mu * (s - tau_bar)),
                max_span=1.0 / max(1.0, mu),
            )
        )
        pm = p_mu(C, h_ref, tau_bar, mu, H)
        max_err = max(max_err, abs(pm - p0 * att))
        if abs(pm) > abs(p0) + 1e-12:
            bound = False
        rows.append((mu, pm, att))
    if max_err > tol:
        bound = False
    return SymmetricBoundReport(
        p0=p0,
        rows=tuple(rows),
        max_identity_error=max_err,
        bound_holds=bound,
    )
