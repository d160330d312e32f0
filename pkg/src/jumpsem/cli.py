"""Command-line front end.

One JSON configuration document drives every subcommand; each command only
requires the sections it uses:

    system     data-generating system (latent blocks + numeric loadings)
    model      candidate model (fixed/free entry grids)
    threshold  {"D": ..., "rho": ...}
    sampling   {"n": ..., "h": ...}
    mc         {"R", "alpha", "master_seed", "workers"?, "theta_init"?}

Exit codes: 0 success, 2 configuration/validation error, 3 I/O error,
4 numerical failure. With --json, a single machine-readable document goes
to stdout and human-readable text to stderr.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import gof, model as sem, montecarlo, qmle
from .errors import (
    ConfigError,
    DataFormatError,
    DfNonPositive,
    JumpsemError,
    NoFeasibleStart,
    NotPositiveDefinite,
    RankDeficient,
    SingularPsi,
)
from .simulate import (
    GaussianJumps,
    JumpChannel,
    LatentSystemSpec,
    OUJumpSpec,
    read_observations,
    simulate_panel,
    write_observations,
)
from .threshold import ThresholdConfig, estimate

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_NUMERIC = 4

_TOP_KEYS = {"system", "model", "threshold", "sampling", "mc"}
_SYSTEM_KEYS = {"xi", "delta", "eps", "zeta", "loadings"}
_BLOCK_KEYS = {"dim", "drift_rate", "drift_level", "diffusion", "jumps", "x0"}
_LOADING_KEYS = {"Lambda1", "Lambda2", "Gamma", "B0"}
_MC_KEYS = {"R", "alpha", "master_seed", "workers", "theta_init"}


# ---------------------------------------------------------------------------
# configuration parsing
# ---------------------------------------------------------------------------


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")


def _as_matrix(raw, rows: int, cols: int, where: str) -> np.ndarray:
    arr = np.asarray(raw, dtype=float)
    if arr.ndim == 1 and rows == cols and arr.shape == (rows,):
        arr = np.diag(arr)  # concise diagonal form
    if arr.shape != (rows, cols):
        raise ConfigError(f"{where}: expected {rows}x{cols} matrix")
    return arr


def _parse_block(raw: dict, where: str) -> OUJumpSpec:
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: must be an object")
    _reject_unknown(raw, _BLOCK_KEYS, where)
    if "dim" not in raw or not isinstance(raw["dim"], int) or raw["dim"] < 1:
        raise ConfigError(f"{where}: needs positive integer dim")
    d = raw["dim"]
    drift_rate = _as_matrix(raw.get("drift_rate", np.zeros((d, d))), d, d, f"{where}.drift_rate")
    drift_level = np.asarray(raw.get("drift_level", np.zeros(d)), dtype=float)
    diffusion_raw = raw.get("diffusion", np.zeros((d, d)))
    diffusion = np.asarray(diffusion_raw, dtype=float)
    if diffusion.ndim == 1:
        if diffusion.shape != (d,):
            raise ConfigError(f"{where}.diffusion: diagonal form needs {d} values")
        diffusion = np.diag(diffusion)
    jumps: list[JumpChannel] = []
    if "jumps" in raw:
        if not isinstance(raw["jumps"], list) or len(raw["jumps"]) != d:
            raise ConfigError(f"{where}.jumps: need one entry per coordinate ({d})")
        for c, entry in enumerate(raw["jumps"]):
            if entry is None:
                jumps.append(JumpChannel(rate=0.0))
                continue
            if not isinstance(entry, dict):
                raise ConfigError(f"{where}.jumps[{c}]: must be an object or null")
            _reject_unknown(entry, {"lambda", "normal"}, f"{where}.jumps[{c}]")
            rate = float(entry.get("lambda", 0.0))
            normal = entry.get("normal", [0.0, 1.0])
            if not (isinstance(normal, list) and len(normal) == 2):
                raise ConfigError(f"{where}.jumps[{c}].normal: expected [mean, var]")
            jumps.append(
                JumpChannel(rate=rate, size=GaussianJumps(float(normal[0]), float(normal[1])))
            )
    try:
        return OUJumpSpec(
            dim=d,
            drift_rate=drift_rate,
            drift_level=drift_level,
            diffusion=diffusion,
            jumps=jumps,
            x0=np.asarray(raw.get("x0", np.zeros(d)), dtype=float),
        )
    except ConfigError as exc:
        raise ConfigError(f"{where}: {exc}") from exc


def parse_system(raw: dict) -> LatentSystemSpec:
    if not isinstance(raw, dict):
        raise ConfigError("system: must be an object")
    _reject_unknown(raw, _SYSTEM_KEYS, "system")
    for key in _SYSTEM_KEYS:
        if key not in raw:
            raise ConfigError(f"system: missing section {key!r}")
    loadings = raw["loadings"]
    _reject_unknown(loadings, _LOADING_KEYS, "system.loadings")
    xi = _parse_block(raw["xi"], "system.xi")
    delta = _parse_block(raw["delta"], "system.delta")
    eps = _parse_block(raw["eps"], "system.eps")
    zeta = _parse_block(raw["zeta"], "system.zeta")
    k1, p1, p2, k2 = xi.dim, delta.dim, eps.dim, zeta.dim
    return LatentSystemSpec(
        xi=xi,
        delta=delta,
        eps=eps,
        zeta=zeta,
        lambda1=_as_matrix(loadings["Lambda1"], p1, k1, "system.loadings.Lambda1"),
        lambda2=_as_matrix(loadings["Lambda2"], p2, k2, "system.loadings.Lambda2"),
        gamma=_as_matrix(loadings["Gamma"], k2, k1, "system.loadings.Gamma"),
        b0=_as_matrix(loadings.get("B0", np.zeros((k2, k2))), k2, k2, "system.loadings.B0"),
    )


def parse_threshold(raw: dict) -> ThresholdConfig:
    if not isinstance(raw, dict):
        raise ConfigError("threshold: must be an object")
    _reject_unknown(raw, {"D", "rho"}, "threshold")
    return ThresholdConfig(
        D=float(raw.get("D", 10.0)), rho=float(raw.get("rho", 0.4))
    )


def parse_sampling(raw: dict) -> tuple[int, float]:
    if not isinstance(raw, dict):
        raise ConfigError("sampling: must be an object")
    _reject_unknown(raw, {"n", "h"}, "sampling")
    if "n" not in raw or "h" not in raw:
        raise ConfigError("sampling: needs n and h")
    n = raw["n"]
    if not isinstance(n, int) or n < 1:
        raise ConfigError("sampling.n must be a positive integer")
    h = float(raw["h"])
    if not h > 0:
        raise ConfigError("sampling.h must be > 0")
    return n, h


def load_config(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise _IOFailure(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    _reject_unknown(doc, _TOP_KEYS, path if isinstance(path, str) else "config")
    return doc


def _require(doc: dict, section: str):
    if section not in doc:
        raise ConfigError(f"config is missing the {section!r} section")
    return doc[section]


class _IOFailure(JumpsemError):
    pass


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


class _Out:
    """Routes human text to stderr when machine output owns stdout."""

    def __init__(self, json_mode: bool):
        self.json_mode = json_mode

    def text(self, msg: str = "") -> None:
        print(msg, file=sys.stderr if self.json_mode else sys.stdout)

    def payload(self, doc: dict) -> None:
        if self.json_mode:
            json.dump(doc, sys.stdout)
            sys.stdout.write("\n")


def _fmt(x: float) -> str:
    return f"{x:.4g}"


def _sigma_text(out: _Out, sigma: np.ndarray) -> None:
    p = sigma.shape[0]
    out.text("filtered realized covariance (diagonal, 4 s.d.):")
    out.text("  " + "  ".join(_fmt(sigma[i, i]) for i in range(p)))


def _theta_table(out: _Out, theta: np.ndarray, se) -> None:
    out.text("  param      estimate      std.err")
    for i, v in enumerate(theta):
        se_txt = _fmt(se[i]) if se is not None else "n/a"
        out.text(f"  theta{i:<4d} {_fmt(v):>12} {se_txt:>12}")


def _parse_theta_init(arg: str, q: int) -> np.ndarray:
    if os.path.exists(arg):
        with open(arg, "r", encoding="utf-8") as fh:
            text = fh.read()
    else:
        text = arg
    try:
        vals = [float(v) for v in text.replace("\n", ",").split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--theta-init: {exc}") from exc
    if len(vals) != q:
        raise ConfigError(f"--theta-init: expected {q} values, got {len(vals)}")
    return np.array(vals)


def _default_theta_init(doc: dict, spec: sem.ModelSpec) -> np.ndarray:
    mc = doc.get("mc", {})
    if isinstance(mc, dict) and "theta_init" in mc:
        init = np.asarray(mc["theta_init"], dtype=float)
        return spec.check_theta(init)
    # neutral fallback: unit variances, unit loadings (clipped into bounds)
    return spec.clip_to_bounds(np.ones(spec.q))


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args) -> int:
    doc = load_config(args.config)
    system = parse_system(_require(doc, "system"))
    n, h = parse_sampling(_require(doc, "sampling"))
    out = _Out(False)
    obs, log = simulate_panel(system, n, h, args.seed)
    try:
        write_observations(obs, args.out)
    except OSError as exc:
        raise _IOFailure(f"cannot write {args.out}: {exc}") from exc
    out.text(f"wrote {args.out}: n={obs.n} h={obs.h:g} p={obs.p}")
    out.text(
        "jump events per block: "
        + "  ".join(f"{k}={v}" for k, v in log.events_by_block.items())
    )
    return EXIT_OK


def _load_data(args, spec: sem.ModelSpec | None):
    try:
        obs = read_observations(args.data)
    except OSError as exc:
        raise _IOFailure(f"cannot read {args.data}: {exc}") from exc
    if spec is not None and (obs.p1, obs.p2) != (spec.p1, spec.p2):
        raise ConfigError(
            f"data dimensions (p1={obs.p1}, p2={obs.p2}) do not match the model "
            f"(p1={spec.p1}, p2={spec.p2})"
        )
    return obs


def cmd_estimate_cov(args) -> int:
    doc = load_config(args.config)
    threshold = parse_threshold(doc.get("threshold", {}))
    obs = _load_data(args, None)
    est = estimate(obs, threshold)
    out = _Out(args.json)
    _sigma_text(out, est.sigma_hat)
    out.text(f"N_n = {est.N_n} of n = {est.n} increments retained")
    out.payload(
        {
            "sigma_hat": est.sigma_hat.tolist(),
            "se_vech": est.se.tolist(),
            "N_n": est.N_n,
            "n": est.n,
            "pd": est.pd_flag,
        }
    )
    return EXIT_OK


def cmd_estimate(args) -> int:
    doc = load_config(args.config)
    spec = sem.model_spec_from_obj(_require(doc, "model"))
    threshold = parse_threshold(doc.get("threshold", {}))
    obs = _load_data(args, spec)
    est = estimate(obs, threshold)
    theta_init = (
        _parse_theta_init(args.theta_init, spec.q)
        if args.theta_init
        else _default_theta_init(doc, spec)
    )
    res = qmle.fit(spec, theta_init, est)
    out = _Out(args.json)
    _sigma_text(out, est.sigma_hat)
    out.text(f"N_n = {est.N_n} of n = {est.n} increments retained")
    out.text(f"H = {res.H_value:.6g}  converged = {res.converged}  iters = {res.iterations}")
    _theta_table(out, res.theta_hat, res.se)
    if res.warning:
        out.text(f"warning: {res.warning}")
    out.payload(
        {
            "theta_hat": res.theta_hat.tolist(),
            "se": None if res.se is None else res.se.tolist(),
            "H": res.H_value,
            "converged": res.converged,
            "iterations": res.iterations,
            "N_n": est.N_n,
            "sigma_hat": est.sigma_hat.tolist(),
            "warning": res.warning,
        }
    )
    if not res.converged and not args.allow_nonconverged:
        out.text("fit did not converge (use --allow-nonconverged to accept)")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_test(args) -> int:
    doc = load_config(args.config)
    spec = sem.model_spec_from_obj(_require(doc, "model"))
    threshold = parse_threshold(doc.get("threshold", {}))
    obs = _load_data(args, spec)
    est = estimate(obs, threshold)
    theta_init = (
        _parse_theta_init(args.theta_init, spec.q)
        if args.theta_init
        else _default_theta_init(doc, spec)
    )
    res = qmle.fit(spec, theta_init, est)
    if not res.converged and not args.allow_nonconverged:
        _Out(args.json).text("fit did not converge (use --allow-nonconverged to accept)")
        return EXIT_NUMERIC
    decision = gof.decide(spec, res.theta_hat, est, args.alpha)
    out = _Out(args.json)
    out.text(f"T_n      = {decision.T_n:.6g}")
    out.text(f"df       = {decision.df}")
    out.text(f"critical = {decision.critical:.6g} (alpha = {decision.alpha:g})")
    out.text(f"p-value  = {decision.p_value:.6g}")
    out.text("decision = " + ("reject" if decision.reject else "do not reject"))
    if decision.used_identity_fallback:
        out.text("note: realized covariance not positive definite; identity fallback used")
    out.payload(
        {
            "T_n": decision.T_n,
            "df": decision.df,
            "alpha": decision.alpha,
            "critical": decision.critical,
            "p_value": decision.p_value,
            "reject": decision.reject,
            "used_identity_fallback": decision.used_identity_fallback,
            "converged": res.converged,
        }
    )
    return EXIT_OK


def cmd_montecarlo(args) -> int:
    doc = load_config(args.config)
    system = parse_system(_require(doc, "system"))
    spec = sem.model_spec_from_obj(_require(doc, "model"))
    threshold = parse_threshold(doc.get("threshold", {}))
    n, h = parse_sampling(_require(doc, "sampling"))
    mc_raw = _require(doc, "mc")
    _reject_unknown(mc_raw, _MC_KEYS, "mc")
    for key in ("R", "alpha", "master_seed"):
        if key not in mc_raw:
            raise ConfigError(f"mc: missing {key!r}")
    workers = args.workers or mc_raw.get("workers") or _env_workers() or 1
    if "theta_init" in mc_raw:
        theta_init = np.asarray(mc_raw["theta_init"], dtype=float)
    else:
        theta_init = _default_theta_init(doc, spec)
    cfg = montecarlo.McConfig(
        system=system,
        model=spec,
        threshold=threshold,
        n=n,
        h=h,
        R=mc_raw["R"],
        alpha=float(mc_raw["alpha"]),
        master_seed=mc_raw["master_seed"],
        theta_init=theta_init,
        workers=int(workers),
    )
    summary = montecarlo.run(cfg)
    try:
        os.makedirs(args.out, exist_ok=True)
        montecarlo.write_per_rep_csv(summary, os.path.join(args.out, "per_rep.csv"))
        montecarlo.write_summary(summary, args.out)
    except OSError as exc:
        raise _IOFailure(f"cannot write results under {args.out}: {exc}") from exc
    out = _Out(args.json)
    out.text(f"replications: {summary.R}   workers: {cfg.workers}")
    out.text(
        f"sigma_11: mean {_fmt(summary.sigma_mean[0])}  sd {_fmt(summary.sigma_sd[0])}"
    )
    if spec.q > 0:
        out.text(
            f"theta_1 : mean {_fmt(summary.theta_mean[0])}  sd {_fmt(summary.theta_sd[0])}"
        )
    out.text(
        f"rejections: {summary.reject_count}/{summary.R} at alpha={cfg.alpha:g} "
        f"(rate {summary.reject_count / summary.R:.4g})"
    )
    out.text(f"KS(sigma11 vs normal) = {summary.ks_sigma11:.4g}")
    out.text(f"KS(T vs chi2_{summary.df}) = {summary.ks_T:.4g}")
    out.payload(
        {
            "R": summary.R,
            "reject_count": summary.reject_count,
            "sigma_mean": summary.sigma_mean.tolist(),
            "sigma_sd": summary.sigma_sd.tolist(),
            "theta_mean": summary.theta_mean.tolist(),
            "theta_sd": summary.theta_sd.tolist(),
            "ks": {"sigma11": summary.ks_sigma11, "T": summary.ks_T},
            "out_dir": args.out,
        }
    )
    return EXIT_OK


def _env_workers() -> int | None:
    raw = os.environ.get("JUMPSEM_WORKERS")
    if raw is None:
        return None
    try:
        return max(1, int(raw))
    except ValueError:
        return None


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpsem",
        description="simulate, estimate and test covariance-structure models "
        "for jump diffusions observed at high frequency",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate an observation panel")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate-cov", help="threshold covariance estimate only")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_estimate_cov)

    p = sub.add_parser("estimate", help="covariance estimate plus model fit")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--theta-init", default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--allow-nonconverged", action="store_true")
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("test", help="goodness-of-fit test of the model")
    p.add_argument("--config", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--theta-init", default=None)
    p.add_argument("--json", action="store_true")
    p.add_argument("--allow-nonconverged", action="store_true")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("montecarlo", help="replication study")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_montecarlo)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, DfNonPositive) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (_IOFailure, DataFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NoFeasibleStart, NotPositiveDefinite, SingularPsi, RankDeficient) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
