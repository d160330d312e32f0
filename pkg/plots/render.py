#!/usr/bin/env python3
"""Render distribution diagnostics from a replication study's result files.

Reads the per-replication CSV and aggregate summary JSON produced by the
`jumpsem montecarlo` command (this script knows only those file contracts)
and draws a three-panel figure for one target statistic:

    histogram with the theoretical density overlaid,
    Q-Q plot against the reference distribution,
    empirical CDF against the theoretical CDF.

Targets:
    sigma11  root-n centered first covariance entry, reference N(0, v) with
             v defaulting to 2 * mean^2 read from the summary
    theta1   root-n centered first parameter estimate, reference N(0, v)
             with v defaulting to n * sd^2 read from the summary
    T        test statistic, reference chi-squared with the summary's df

Usage:
    python render.py --csv per_rep.csv --summary summary.json \
        --target sigma11 --out sigma11.png
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np
from scipy import stats

MIN_ROWS = 30
TARGETS = ("sigma11", "theta1", "T")


class RenderError(Exception):
    pass


def read_column(csv_path: str, column: str) -> np.ndarray:
    try:
        fh = open(csv_path, "r", encoding="utf-8", newline="")
    except OSError as exc:
        raise RenderError(f"cannot read {csv_path}: {exc}") from exc
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or column not in reader.fieldnames:
            raise RenderError(f"{csv_path}: missing column {column!r}")
        values = []
        for row in reader:
            v = float(row[column])
            if math.isfinite(v):
                values.append(v)
    if len(values) < MIN_ROWS:
        raise RenderError(
            f"{csv_path}: need at least {MIN_ROWS} finite rows of {column!r}, "
            f"got {len(values)}"
        )
    return np.array(values)


def read_summary(path: str) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except OSError as exc:
        raise RenderError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise RenderError(f"{path}: invalid JSON ({exc})") from exc


def build_job(target: str, summary: dict, center, ref_var, df):
    """Resolve the plotted sample transform and the reference distribution."""
    echo = summary.get("config_echo", {})
    agg = summary.get("agg", {})
    n = echo.get("n")
    if target == "sigma11":
        col = "sigma_1"
        if center is None:
            center = agg["sigma_mean"][0]
        if ref_var is None:
            ref_var = 2.0 * agg["sigma_mean"][0] ** 2
        transform = lambda x: math.sqrt(n) * (x - center)  # noqa: E731
        ref = stats.norm(0.0, math.sqrt(ref_var))
        label = "sqrt(n) centered sigma11"
    elif target == "theta1":
        col = "theta_1"
        if center is None:
            center = agg["theta_mean"][0]
        if ref_var is None:
            ref_var = n * agg["theta_sd"][0] ** 2
        transform = lambda x: math.sqrt(n) * (x - center)  # noqa: E731
        ref = stats.norm(0.0, math.sqrt(ref_var))
        label = "sqrt(n) centered theta1"
    elif target == "T":
        col = "T_n"
        if df is None:
            df = echo.get("df")
        if df is None:
            raise RenderError("chi-squared reference needs --df or summary df")
        transform = lambda x: x  # noqa: E731
        ref = stats.chi2(df)
        label = f"test statistic (chi2 df={df})"
    else:
        raise RenderError(f"unknown target {target!r}")
    if target != "T" and n is None:
        raise RenderError("summary config_echo lacks n; cannot scale by sqrt(n)")
    return col, transform, ref, label


def freedman_diaconis_bins(x: np.ndarray) -> np.ndarray:
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    if iqr <= 0:
        return np.linspace(x.min() - 0.5, x.max() + 0.5, 11)
    width = 2.0 * iqr / len(x) ** (1.0 / 3.0)
    nbins = max(5, int(math.ceil((x.max() - x.min()) / width)))
    return np.linspace(x.min(), x.max(), nbins + 1)


def render(csv_path, summary_path, target, out_path, center=None, ref_var=None, df=None):
    summary = read_summary(summary_path)
    col, transform, ref, label = build_job(target, summary, center, ref_var, df)
    raw = read_column(csv_path, col)
    x = np.array([transform(v) for v in raw])

    fig, axes = plt.subplots(1, 3, figsize=(12.0, 4.0))

    bins = freedman_diaconis_bins(x)
    axes[0].hist(x, bins=bins, density=True, color="#9dbcd4", edgecolor="white")
    grid = np.linspace(min(x.min(), ref.ppf(0.001)), max(x.max(), ref.ppf(0.999)), 400)
    axes[0].plot(grid, ref.pdf(grid), color="red", lw=1.5)
    axes[0].set_title("histogram")
    axes[0].set_xlabel(label)

    probs = (np.arange(1, x.size + 1) - 0.5) / x.size
    theo_q = ref.ppf(probs)
    axes[1].scatter(theo_q, np.sort(x), s=8, color="#44678d")
    lims = [min(theo_q[0], x.min()), max(theo_q[-1], x.max())]
    axes[1].plot(lims, lims, color="red", lw=1.2)
    axes[1].set_title("Q-Q plot")
    axes[1].set_xlabel("theoretical quantiles")
    axes[1].set_ylabel("sample quantiles")

    xs = np.sort(x)
    ecdf = np.arange(1, xs.size + 1) / xs.size
    axes[2].step(xs, ecdf, where="post", color="#44678d", lw=1.2)
    axes[2].plot(grid, ref.cdf(grid), color="red", lw=1.5)
    axes[2].set_title("empirical distribution")
    axes[2].set_xlabel(label)
    axes[2].set_ylim(-0.02, 1.02)

    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--csv", required=True, help="per-replication CSV")
    parser.add_argument("--summary", required=True, help="summary JSON")
    parser.add_argument("--target", required=True, choices=TARGETS)
    parser.add_argument("--out", required=True, help="output PNG path")
    parser.add_argument("--center", type=float, default=None,
                        help="centering value (default: summary mean)")
    parser.add_argument("--ref-var", type=float, default=None,
                        help="reference normal variance (default from summary)")
    parser.add_argument("--df", type=int, default=None,
                        help="chi-squared degrees of freedom for --target T")
    args = parser.parse_args(argv)
    try:
        render(args.csv, args.summary, args.target, args.out,
               center=args.center, ref_var=args.ref_var, df=args.df)
    except RenderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
