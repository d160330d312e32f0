"""Quasi-maximum likelihood estimation of the covariance-structure parameters.

The quasi-log-likelihood in sufficient-statistic form is

    H(theta) = -(N/2) log det Sigma(theta) - (N~/2) tr(Sigma(theta)^-1 S-hat),

which equals the filtered-increment sum exactly whenever at least one
increment is retained, so optimization cost does not grow with n. The
maximizer is found by BFGS with a backtracking Armijo line search and
projection onto the box given by the entry bounds; infeasible trial points
(non-positive-definite implied covariance) evaluate to -inf and shrink the
step instead of raising.

Asymptotic standard errors use the plug-in covariance
(J' W^-1 J)^-1 with J the vech-Jacobian of Sigma(theta) and
W = 2 D+ (Sigma kron Sigma) D+' evaluated at the estimate.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import model as sem
from .errors import (
    NoFeasibleStart,
    NotPositiveDefinite,
    RankDeficient,
    SingularPsi,
)
from .matrices import chol_logdet_inv, sandwich_cov
from .threshold import CovEstimate


@dataclass(frozen=True)
class FitOptions:
    """Optimizer controls; defaults match the documented convergence rule."""

    max_iter: int = 500
    gtol: float = 1e-6  # stop when ||grad||_inf <= gtol * max(1, |H|)
    step_tol: float = 1e-10
    armijo_c1: float = 1e-4
    max_backtracks: int = 80


@dataclass
class QmleResult:
    theta_hat: np.ndarray
    H_value: float
    gradient_norm: float
    iterations: int
    converged: bool
    acov: np.ndarray | None
    se: np.ndarray | None
    warning: str | None = None


def quasi_loglik(spec: sem.ModelSpec, theta: np.ndarray, est: CovEstimate) -> float:
    """H(theta); -inf at parameter values with no positive definite Sigma."""
    try:
        sigma = sem.implied_covariance(spec, theta)
        logdet, inv = chol_logdet_inv(sigma)
    except (NotPositiveDefinite, SingularPsi):
        return -np.inf
    return -0.5 * est.N_n * logdet - 0.5 * est.N_tilde * float(
        np.sum(inv * est.sigma_hat)
    )


def gradient(spec: sem.ModelSpec, theta: np.ndarray, est: CovEstimate) -> np.ndarray:
    """Analytic gradient of H: per coordinate j,

    -(N/2) tr(Sigma^-1 dSigma_j) + (N~/2) tr(Sigma^-1 dSigma_j Sigma^-1 S-hat).

    Raises NotPositiveDefinite / SingularPsi at infeasible theta; callers in
    a line search backtrack instead of evaluating gradients there.
    """
    sigma = sem.implied_covariance(spec, theta)
    _, inv = chol_logdet_inv(sigma)
    derivs = sem.sigma_derivatives(spec, theta)
    b = inv @ est.sigma_hat @ inv
    # all matrices symmetric: tr(AB) = sum(A * B)
    t1 = np.einsum("ij,qij->q", inv, derivs)
    t2 = np.einsum("ij,qij->q", b, derivs)
    return -0.5 * est.N_n * t1 + 0.5 * est.N_tilde * t2


def _bfgs_update(hinv: np.ndarray, s: np.ndarray, y: np.ndarray) -> np.ndarray | None:
    sy = float(s @ y)
    if sy <= 1e-10 * np.linalg.norm(s) * np.linalg.norm(y):
        return None
    rho = 1.0 / sy
    q = s.size
    v = np.eye(q) - rho * np.outer(s, y)
    return v @ hinv @ v.T + rho * np.outer(s, s)


def fit(
    spec: sem.ModelSpec,
    theta_init: np.ndarray,
    est: CovEstimate,
    opts: FitOptions = FitOptions(),
) -> QmleResult:
    """Maximize the quasi-log-likelihood from theta_init.

    The starting point is projected onto the parameter box first; if the
    implied covariance is still not positive definite there, NoFeasibleStart
    is raised. Non-convergence is reported in the result, not raised.
    """
    x = spec.clip_to_bounds(theta_init)
    warning = None
    if est.N_n == 0:
        warning = "no increments survived the jump filter; fit uses N~ = n"
    f = quasi_loglik(spec, x, est)
    if not np.isfinite(f):
        raise NoFeasibleStart(
            "implied covariance not positive definite at the initial value"
        )
    g = -gradient(spec, x, est)  # minimize -H
    fmin = -f
    hinv = np.eye(spec.q)
    first_step = True
    converged = False
    iterations = 0

    for iterations in range(1, opts.max_iter + 1):
        if np.linalg.norm(g, np.inf) <= opts.gtol * max(1.0, abs(fmin)):
            converged = True
            break
        d = -hinv @ g
        if float(g @ d) >= 0.0:
            hinv = np.eye(spec.q)
            d = -g
        alpha = 1.0
        x_new = None
        for _ in range(opts.max_backtracks):
            trial = spec.clip_to_bounds(x + alpha * d)
            step = trial - x
            if np.linalg.norm(step, np.inf) < opts.step_tol:
                break
            slope = float(g @ step)
            if slope < 0.0:
                f_trial = quasi_loglik(spec, trial, est)
                if np.isfinite(f_trial) and -f_trial <= fmin + opts.armijo_c1 * slope:
                    x_new = trial
                    f_new = -f_trial
                    break
            alpha *= 0.5
        if x_new is None:
            break  # no acceptable step left
        g_new = -gradient(spec, x_new, est)
        s, y = x_new - x, g_new - g
        if first_step:
            # rescale the seed matrix to the local curvature before the first
            # update; cures the grossly misscaled unit initial step
            sy, yy = float(s @ y), float(y @ y)
            if sy > 0 and yy > 0:
                hinv = (sy / yy) * np.eye(spec.q)
            first_step = False
        upd = _bfgs_update(hinv, s, y)
        hinv = upd if upd is not None else np.eye(spec.q)
        x, fmin, g = x_new, f_new, g_new
        if np.linalg.norm(g, np.inf) <= opts.gtol * max(1.0, abs(fmin)):
            converged = True
            break

    acov = se_vec = None
    try:
        acov = _acov(spec, x)
        se_vec = np.sqrt(np.diag(acov) / est.n)
    except (RankDeficient, NotPositiveDefinite, SingularPsi) as exc:
        warning = (warning + "; " if warning else "") + f"no asymptotic covariance: {exc}"
    return QmleResult(
        theta_hat=x,
        H_value=-fmin,
        gradient_norm=float(np.linalg.norm(g, np.inf)),
        iterations=iterations,
        converged=converged,
        acov=acov,
        se=se_vec,
        warning=warning,
    )


def _acov(spec: sem.ModelSpec, theta_hat: np.ndarray) -> np.ndarray:
    jac = sem.jacobian(spec, theta_hat)
    if spec.q == 0:
        return np.zeros((0, 0))
    sv = np.linalg.svd(jac, compute_uv=False)
    if sv[0] <= 0 or np.sum(sv > 1e-8 * sv[0]) < spec.q:
        raise RankDeficient("covariance-structure Jacobian is rank deficient")
    w = sandwich_cov(sem.implied_covariance(spec, theta_hat))
    _, w_inv = chol_logdet_inv(w)
    a = jac.T @ w_inv @ jac
    _, acov = chol_logdet_inv(0.5 * (a + a.T))
    return acov


def theta_se(
    spec: sem.ModelSpec, theta_hat: np.ndarray, est: CovEstimate, n: int
) -> np.ndarray:
    """Plug-in asymptotic standard errors sqrt(diag((J' W^-1 J)^-1) / n)."""
    return np.sqrt(np.diag(_acov(spec, theta_hat)) / n)
