"""Replication engine for the simulation study.

Each replication simulates a fresh panel from the data-generating system,
runs the threshold covariance estimate, maximizes the quasi-likelihood of
the candidate model, and applies the goodness-of-fit decision. Replication
seeds derive from (master_seed, rep), so results are identical for any
worker count. Per-replication failures become data rows (converged=False),
never abort the whole run.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from multiprocessing import get_context

import numpy as np
from threadpoolctl import threadpool_limits

from . import gof, model as sem, qmle
from .errors import ConfigError, JumpsemError
from .matrices import vech
from .simulate import LatentSystemSpec, simulate_panel
from .threshold import ThresholdConfig, estimate


@dataclass
class McConfig:
    system: LatentSystemSpec
    model: sem.ModelSpec
    threshold: ThresholdConfig
    n: int
    h: float
    R: int
    alpha: float
    master_seed: int
    theta_init: np.ndarray
    workers: int = 1

    def __post_init__(self):
        if self.R < 1:
            raise ConfigError("R must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.n < 1 or not (self.h > 0 and math.isfinite(self.n * self.h)):
            raise ConfigError("need n >= 1 and finite n*h")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if (self.system.p1, self.system.p2) != (self.model.p1, self.model.p2):
            raise ConfigError(
                "system and model disagree on observed dimensions: "
                f"system ({self.system.p1}, {self.system.p2}) vs "
                f"model ({self.model.p1}, {self.model.p2})"
            )
        self.theta_init = self.model.check_theta(self.theta_init)


@dataclass
class RepRecord:
    rep: int
    N_n: int
    sigma_vech: np.ndarray
    theta: np.ndarray
    converged: bool
    T_n: float
    reject: bool
    jump_events: int = 0
    jump_detectable: int = 0


@dataclass
class McSummary:
    per_rep: list[RepRecord]
    R: int
    df: int
    sigma_mean: np.ndarray
    sigma_sd: np.ndarray
    theta_mean: np.ndarray
    theta_sd: np.ndarray
    reject_count: int
    ks_sigma11: float
    ks_T: float
    config_echo: dict = field(default_factory=dict)


def _run_rep(cfg: McConfig, rep: int) -> RepRecord:
    obs, jump_log = simulate_panel(cfg.system, cfg.n, cfg.h, cfg.master_seed, rep)
    est = estimate(obs, cfg.threshold)
    tau = cfg.threshold.tau(cfg.h)
    detectable = jump_log.detectable_count(tau)
    try:
        res = qmle.fit(cfg.model, cfg.theta_init, est)
        decision = gof.decide(cfg.model, res.theta_hat, est, cfg.alpha)
        return RepRecord(
            rep=rep,
            N_n=est.N_n,
            sigma_vech=vech(est.sigma_hat),
            theta=res.theta_hat,
            converged=res.converged,
            T_n=decision.T_n,
            reject=decision.reject,
            jump_events=jump_log.total_events,
            jump_detectable=detectable,
        )
    except JumpsemError:
        return RepRecord(
            rep=rep,
            N_n=est.N_n,
            sigma_vech=vech(est.sigma_hat),
            theta=np.full(cfg.model.q, np.nan),
            converged=False,
            T_n=np.nan,
            reject=False,
            jump_events=jump_log.total_events,
            jump_detectable=detectable,
        )


def _run_rep_star(args) -> RepRecord:
    # replication matrices are tiny; BLAS thread pools only add sync overhead
    with threadpool_limits(limits=1):
        return _run_rep(*args)


def run(cfg: McConfig) -> McSummary:
    """Execute R replications (in parallel when workers > 1) and aggregate."""
    df = cfg.model.p_bar - cfg.model.q
    reps = range(cfg.R)
    if cfg.workers > 1 and cfg.R > 1:
        with get_context("fork").Pool(processes=cfg.workers) as pool:
            rows = pool.map(_run_rep_star, [(cfg, r) for r in reps], chunksize=1)
    else:
        with threadpool_limits(limits=1):
            rows = [_run_rep(cfg, r) for r in reps]
    rows.sort(key=lambda r: r.rep)
    return summarize(cfg, rows, df)


def summarize(cfg: McConfig, rows: list[RepRecord], df: int) -> McSummary:
    sig = np.array([r.sigma_vech for r in rows])
    th = np.array([r.theta for r in rows])
    t_vals = np.array([r.T_n for r in rows])
    ddof = 1 if len(rows) > 1 else 0
    sigma_sd = sig.std(axis=0, ddof=ddof)
    summary = McSummary(
        per_rep=rows,
        R=len(rows),
        df=df,
        sigma_mean=sig.mean(axis=0),
        sigma_sd=sigma_sd,
        theta_mean=np.nanmean(th, axis=0) if th.size else th.mean(axis=0),
        theta_sd=np.nanstd(th, axis=0, ddof=ddof) if th.size else th.std(axis=0),
        reject_count=int(sum(r.reject for r in rows)),
        ks_sigma11=_ks_sigma11(sig[:, 0], sigma_sd[0]),
        ks_T=_ks_T(t_vals, df),
        config_echo=_config_echo(cfg, df),
    )
    return summary


def _ks_sigma11(s11: np.ndarray, sd: float) -> float:
    if s11.size < 2 or not sd > 0:
        return float("nan")
    standardized = (s11 - s11.mean()) / sd
    return ks_distance(standardized, "normal")


def _ks_T(t_vals: np.ndarray, df: int) -> float:
    finite = t_vals[np.isfinite(t_vals)]
    if finite.size == 0:
        return float("nan")
    return ks_distance(finite, "chi2", df=df)


def _config_echo(cfg: McConfig, df: int) -> dict:
    return {
        "n": cfg.n,
        "h": cfg.h,
        "R": cfg.R,
        "alpha": cfg.alpha,
        "master_seed": cfg.master_seed,
        "workers": cfg.workers,
        "D": cfg.threshold.D,
        "rho": cfg.threshold.rho,
        "p1": cfg.model.p1,
        "p2": cfg.model.p2,
        "k1": cfg.model.k1,
        "k2": cfg.model.k2,
        "q": cfg.model.q,
        "p_bar": cfg.model.p_bar,
        "df": df,
        "theta_init": [float(v) for v in cfg.theta_init],
    }


def ks_distance(sample: np.ndarray, dist: str, df: int | None = None) -> float:
    """Sup distance between the sample's empirical CDF and a reference CDF.

    dist is "normal" (standard normal) or "chi2" (needs df).
    """
    sample = np.asarray(sample, dtype=float)
    if sample.size == 0:
        raise ValueError("empty sample")
    x = np.sort(sample)
    if dist == "normal":
        cdf = np.array([0.5 * (1.0 + math.erf(v / math.sqrt(2.0))) for v in x])
    elif dist == "chi2":
        if df is None:
            raise ValueError("chi2 reference needs df")
        cdf = np.array([gof.chi2_cdf(max(v, 0.0), df) for v in x])
    else:
        raise ValueError(f"unknown reference distribution {dist!r}")
    m = x.size
    upper = np.arange(1, m + 1) / m - cdf
    lower = cdf - np.arange(0, m) / m
    return float(max(upper.max(), lower.max()))


# ---------------------------------------------------------------------------
# Result files: one CSV row per replication plus an aggregate JSON document.
# ---------------------------------------------------------------------------


def per_rep_header(p_bar: int, q: int) -> str:
    cols = (
        ["rep", "N_n"]
        + [f"sigma_{i}" for i in range(1, p_bar + 1)]
        + [f"theta_{i}" for i in range(1, q + 1)]
        + ["converged", "T_n", "reject"]
    )
    return ",".join(cols)


def write_per_rep_csv(summary: McSummary, path) -> None:
    p_bar = summary.sigma_mean.size
    q = summary.theta_mean.size
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(per_rep_header(p_bar, q) + "\n")
        for r in summary.per_rep:
            parts = [str(r.rep), str(r.N_n)]
            parts += [f"{v:.17g}" for v in r.sigma_vech]
            parts += [f"{v:.17g}" for v in r.theta]
            parts += [str(int(r.converged)), f"{r.T_n:.17g}", str(int(r.reject))]
            fh.write(",".join(parts) + "\n")


def read_per_rep_csv(path) -> list[RepRecord]:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        p_bar = sum(1 for c in header if c.startswith("sigma_"))
        q = sum(1 for c in header if c.startswith("theta_"))
        expected = 5 + p_bar + q
        if len(header) != expected or header[:2] != ["rep", "N_n"]:
            raise ValueError(f"{path}: unexpected per-rep header")
        rows = []
        for line in fh:
            parts = line.strip().split(",")
            if len(parts) != expected:
                raise ValueError(f"{path}: bad row width {len(parts)}")
            rows.append(
                RepRecord(
                    rep=int(parts[0]),
                    N_n=int(parts[1]),
                    sigma_vech=np.array([float(v) for v in parts[2 : 2 + p_bar]]),
                    theta=np.array(
                        [float(v) for v in parts[2 + p_bar : 2 + p_bar + q]]
                    ),
                    converged=bool(int(parts[2 + p_bar + q])),
                    T_n=float(parts[3 + p_bar + q]),
                    reject=bool(int(parts[4 + p_bar + q])),
                )
            )
    return rows


def write_summary(summary: McSummary, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    doc = {
        "config_echo": summary.config_echo,
        "agg": {
            "sigma_mean": [float(v) for v in summary.sigma_mean],
            "sigma_sd": [float(v) for v in summary.sigma_sd],
            "theta_mean": [float(v) for v in summary.theta_mean],
            "theta_sd": [float(v) for v in summary.theta_sd],
        },
        "reject_count": summary.reject_count,
        "R": summary.R,
        "ks": {"sigma11": summary.ks_sigma11, "T": summary.ks_T},
    }
    with open(os.path.join(out_dir, "summary.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2)
        fh.write("\n")
