"""Quasi-likelihood-ratio goodness-of-fit test.

The statistic compares the fitted structured covariance against the
saturated alternative, whose maximum is attained at the filtered realized
covariance itself:

    T = N * [log det Sigma(theta-hat) - log det Sigma~
             + tr(Sigma(theta-hat)^-1 Sigma~) - p],

with Sigma~ equal to the realized covariance when it is positive definite
and the identity otherwise. Under a correct model T is asymptotically
chi-squared with p(p+1)/2 - q degrees of freedom.

The chi-squared distribution functions are implemented here (regularized
incomplete gamma, series plus continued fraction) so results are identical
across platforms to the stated tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import model as sem
from .errors import DfNonPositive
from .matrices import chol_logdet_inv
from .threshold import CovEstimate

_GAMMA_EPS = 1e-15
_GAMMA_MAX_ITER = 500
_TINY = 1e-300


@dataclass
class TestResult:
    T_n: float
    df: int
    alpha: float
    critical: float
    p_value: float
    reject: bool
    used_identity_fallback: bool


def _gammp_series(a: float, x: float) -> float:
    # lower regularized gamma by power series, for x < a + 1
    ap = a
    total = term = 1.0 / a
    for _ in range(_GAMMA_MAX_ITER):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _GAMMA_EPS:
            break
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))

def _gammq_cf(a: float, x: float) -> float:
    # upper regularized gamma by continued fraction (modified Lentz), x >= a + 1
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    frac = d
    for i in range(1, _GAMMA_MAX_ITER + 1):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        frac *= delta
        if abs(delta - 1.0) < _GAMMA_EPS:
            break
    return frac * math.exp(-x + a * math.log(x) - math.lgamma(a))


def chi2_cdf(x: float, df: int) -> float:
    """P(chi2_df <= x) via the regularized lower incomplete gamma."""
    if df < 1:
        raise ValueError(f"df must be a positive integer, got {df}")
    if x < 0:
        raise ValueError(f"x must be >= 0, got {x}")
    if x == 0.0:
        return 0.0
    a, y = 0.5 * df, 0.5 * x
    if y < a + 1.0:
        return min(1.0, _gammp_series(a, y))
    return max(0.0, 1.0 - _gammq_cf(a, y))


def chi2_pdf(x: float, df: int) -> float:
    if x <= 0.0:
        return 0.0
    a = 0.5 * df
    return math.exp((a - 1.0) * math.log(x) - 0.5 * x - math.lgamma(a) - a * math.log(2.0))


def chi2_quantile(alpha_upper: float, df: int) -> float:
    """x with P(chi2_df > x) = alpha_upper, by safeguarded Newton iteration."""
    if not 0.0 < alpha_upper < 1.0:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha_upper}")
    if df < 1:
        raise ValueError(f"df must be a positive integer, got {df}")
    target = 1.0 - alpha_upper
    lo, hi = 0.0, df + 20.0 * math.sqrt(2.0 * df) + 20.0
    while chi2_cdf(hi, df) < target:
        lo, hi = hi, hi * 2.0
    x = df * (1.0 - alpha_upper) + 1e-3  # crude start inside the bracket
    x = min(max(x, lo + 1e-12), hi)
    for _ in range(200):
        err = chi2_cdf(x, df) - target
        if err > 0:
            hi = x
        else:
            lo = x
        deriv = chi2_pdf(x, df)
        step_ok = deriv > 0.0
        if step_ok:
            x_new = x - err / deriv
            step_ok = lo < x_new < hi
        if not step_ok:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 1e-12 * max(1.0, x):
            return x_new
        x = x_new
    return x


def lr_statistic(
    spec: sem.ModelSpec, theta_hat: np.ndarray, est: CovEstimate
) -> tuple[float, bool]:
    """Quasi-likelihood-ratio statistic and the identity-fallback flag.

    Raises NotPositiveDefinite when the fitted covariance is degenerate.
    """
    sigma_model = sem.implied_covariance(spec, theta_hat)
    logdet_model, inv_model = chol_logdet_inv(sigma_model)
    if est.pd_flag:
        sigma_tilde = est.sigma_hat
        logdet_tilde, _ = chol_logdet_inv(sigma_tilde)
        fallback = False
    else:
        sigma_tilde = np.eye(spec.p)
        logdet_tilde = 0.0
        fallback = True
    trace = float(np.sum(inv_model * sigma_tilde))
    t = est.N_n * (logdet_model - logdet_tilde + trace - spec.p)
    return t, fallback


def decide(
    spec: sem.ModelSpec, theta_hat: np.ndarray, est: CovEstimate, alpha: float
) -> TestResult:
    """Run the test at level alpha; rejection region {T > chi2_df(alpha)}."""
    df = spec.p_bar - spec.q
    if df <= 0:
        raise DfNonPositive(
            f"model with q={spec.q} free parameters and p_bar={spec.p_bar} "
            "distinct covariance entries is untestable"
        )
    t, fallback = lr_statistic(spec, theta_hat, est)
    critical = chi2_quantile(alpha, df)
    p_value = 1.0 - chi2_cdf(max(t, 0.0), df)
    return TestResult(
        T_n=t,
        df=df,
        alpha=alpha,
        critical=critical,
        p_value=p_value,
        reject=t > critical,
        used_identity_fallback=fallback,
    )
