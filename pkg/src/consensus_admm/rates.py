"""Convergence-rate certificates and empirical rate statistics.

The Q-linear contraction constant delta depends on a free parameter
mu > 1, the penalty c, the graph spectra, and the objective curvature.
Closed forms below give the penalty c_t and the mu that jointly maximize
delta, and the resulting guaranteed rate rho_t = sqrt(1/(1+delta_t)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .objectives import ObjectiveProfile
from .spectral import GraphSpectra


@dataclass(frozen=True)
class RateBundle:
    """Best certified penalty and the contraction it guarantees."""

    c_t: float
    mu_star: float
    delta_t: float
    rho_t: float


@dataclass(frozen=True)
class RateReport:
    """Empirical per-step and running geometric-average rates of a run."""

    rho: np.ndarray       # rho[k] = err_k / err_{k-1}; rho[0] is NaN
    rho_bar: np.ndarray   # rho_bar[k] = (err_k / err_0)^(1/k); rho_bar[0] is NaN
    rho_bar_terminal: float
    iterations: int
    terminal_error: float


def delta(mu: float, c: float, spectra: GraphSpectra, profile: ObjectiveProfile) -> float:
    """Guaranteed contraction constant for given mu and penalty.

    Evaluated symbol-for-symbol in the incidence singular values: the
    minimum of a mu-term that ignores c and a curvature term whose
    denominator balances c against mu/c.
    """
    if mu <= 1.0:
        raise ValueError(f"free parameter must exceed 1, got {mu}")
    if c <= 0.0:
        raise ValueError(f"penalty must be positive, got {c}")
    smax2 = spectra.sigma_max_Mplus**2
    stmin2 = spectra.sigma_tmin_Mminus**2
    term1 = (mu - 1.0) * stmin2 / (mu * smax2)
    term2 = profile.m_f / (c / 4.0 * smax2 + mu / c * profile.M_f**2 / stmin2)
    return min(term1, term2)


def mu_star(kappa_f: float, kappa_G: float) -> float:
    """The mu > 1 at which the two contraction terms coincide under c_t.

    With t = kappa_G / (2 kappa_f) this is (t + sqrt(t^2 + 1))^2, which
    equals the reciprocal form 1 / (1 + t^2*2 ... ) algebraically but has
    no cancellation when kappa_G >> kappa_f.
    """
    if kappa_f < 1.0:
        raise ValueError(f"kappa_f must be >= 1, got {kappa_f}")
    if kappa_G <= 0.0:
        raise ValueError(f"kappa_G must be positive, got {kappa_G}")
    t = kappa_G / (2.0 * kappa_f)
    return (t + math.hypot(t, 1.0)) ** 2


def c_t(spectra: GraphSpectra, profile: ObjectiveProfile, mu: float | None = None) -> float:
    """Penalty maximizing the curvature term of the contraction constant.

    For any fixed mu this balances the two halves of the term's
    denominator; mu defaults to the overall optimum mu_star.
    """
    if profile.M_f <= 0.0:
        raise ValueError("Lipschitz constant must be positive")
    if mu is None:
        mu = mu_star(profile.kappa_f, spectra.kappa_G)
    if mu <= 1.0:
        raise ValueError(f"free parameter must exceed 1, got {mu}")
    return 2.0 * math.sqrt(mu) * profile.M_f / (
        spectra.sigma_max_Mplus * spectra.sigma_tmin_Mminus
    )


def delta_t(kappa_f: float, kappa_G: float) -> float:
    """Maximal guaranteed contraction constant over (mu, c).

    Stable rearrangement of the closed form
    sqrt(1/kappa_f^2 + 4/kappa_G^2) / (2 kappa_f) - 1/(2 kappa_f^2).
    """
    if kappa_f < 1.0:
        raise ValueError(f"kappa_f must be >= 1, got {kappa_f}")
    if kappa_G <= 0.0:
        raise ValueError(f"kappa_G must be positive, got {kappa_G}")
    s = 2.0 * kappa_f / kappa_G
    return (2.0 / kappa_G**2) / (1.0 + math.hypot(1.0, s))


def rho_from_delta(d: float) -> float:
    """Rate upper bound sqrt(1/(1+delta))."""
    return math.sqrt(1.0 / (1.0 + d))


def rate_bundle(spectra: GraphSpectra, profile: ObjectiveProfile) -> RateBundle:
    mu = mu_star(profile.kappa_f, spectra.kappa_G)
    dt = delta_t(profile.kappa_f, spectra.kappa_G)
    return RateBundle(
        c_t=c_t(spectra, profile, mu=mu),
        mu_star=mu,
        delta_t=dt,
        rho_t=rho_from_delta(dt),
    )


def empirical_rates(err: np.ndarray) -> RateReport:
    """Per-step ratios and the running geometric-average rate of an error
    series err[0..K] (err[0] is the initial distance and must be positive).

    rho[k] stops being emitted (NaN) once a preceding error is exactly
    zero; rho_bar[k] is computed directly from (err_k/err_0)^(1/k), which
    equals the cumulative product of the rho up to round-off.
    """
    err = np.asarray(err, dtype=float)
    if err.size == 0:
        raise ValueError("empty error series")
    if err[0] <= 0.0:
        raise ValueError("initial error must be positive")
    K = err.size - 1
    rho = np.full(K + 1, np.nan)
    rho_bar = np.full(K + 1, np.nan)
    dead = False
    for k in range(1, K + 1):
        if not dead and err[k - 1] > 0.0:
            rho[k] = err[k] / err[k - 1]
        else:
            dead = True
        rho_bar[k] = (err[k] / err[0]) ** (1.0 / k)
    return RateReport(
        rho=rho,
        rho_bar=rho_bar,
        rho_bar_terminal=float(rho_bar[K]) if K >= 1 else float("nan"),
        iterations=K,
        terminal_error=float(err[-1]),
    )
