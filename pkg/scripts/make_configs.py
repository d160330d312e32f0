#!/usr/bin/env python3
"""Regenerate the shipped example configuration files in configs/.

The three documents describe the same data-generating system; they differ in
the candidate model fitted to it (two-factor vs collapsed single-factor) and
in the replication settings.
"""

import json
from pathlib import Path

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# data-generating system: four latent blocks with per-coordinate jump channels
SYSTEM = {
    "xi": {
        "dim": 1,
        "drift_rate": [2.0],
        "drift_level": [1.0],
        "diffusion": [1.2],
        "x0": [1.0],
        "jumps": [{"lambda": 3.0, "normal": [0.0, 5.0]}],
    },
    "delta": {
        "dim": 4,
        "drift_rate": [0.8, 0.5, 0.9, 0.7],
        "drift_level": [0.0, 0.0, 0.0, 0.0],
        "diffusion": [1.6, 0.7, 1.2, 0.9],
        "x0": [0.0, 0.0, 0.0, 0.0],
        "jumps": [
            {"lambda": 2.0, "normal": [0.0, 3.0]},
            {"lambda": 1.0, "normal": [0.0, 2.0]},
            {"lambda": 1.0, "normal": [0.0, 3.0]},
            {"lambda": 2.0, "normal": [0.0, 2.0]},
        ],
    },
    "eps": {
        "dim": 8,
        "drift_rate": [0.8, 1.5, 0.9, 0.7, 1.2, 0.5, 1.3, 0.6],
        "drift_level": [0.0] * 8,
        "diffusion": [0.9, 1.2, 0.8, 1.1, 1.5, 1.3, 0.7, 1.4],
        "x0": [0.0] * 8,
        "jumps": [
            {"lambda": 2.0, "normal": [0.0, 2.0]},
            {"lambda": 1.0, "normal": [0.0, 3.0]},
            {"lambda": 1.0, "normal": [0.0, 2.0]},
            {"lambda": 2.0, "normal": [0.0, 3.0]},
            {"lambda": 2.0, "normal": [0.0, 3.0]},
            {"lambda": 1.0, "normal": [0.0, 3.0]},
            {"lambda": 1.0, "normal": [0.0, 2.0]},
            {"lambda": 2.0, "normal": [0.0, 3.0]},
        ],
    },
    "zeta": {
        "dim": 2,
        "drift_rate": [0.8, 1.4],
        "drift_level": [0.0, 0.0],
        "diffusion": [0.9, 1.1],
        "x0": [0.0, 0.0],
        "jumps": [
            {"lambda": 2.0, "normal": [0.0, 2.0]},
            {"lambda": 1.0, "normal": [0.0, 3.0]},
        ],
    },
    "loadings": {
        "Lambda1": [[1.0], [0.7], [1.3], [0.9]],
        "Lambda2": [
            [1.0, 0.0],
            [0.8, 0.0],
            [1.4, 0.0],
            [1.2, 0.0],
            [0.0, 1.0],
            [0.0, 0.6],
            [0.0, 1.3],
            [0.0, 0.9],
        ],
        "Gamma": [[0.7], [-0.8]],
        "B0": [[0.0, 0.0], [0.0, 0.0]],
    },
}

# two-factor candidate model: matches the generating system, q = 26
CORRECT_MODEL = {
    "dims": {"p1": 4, "p2": 8, "k1": 1, "k2": 2},
    "Lambda1": [[1.0], ["theta0"], ["theta1"], ["theta2"]],
    "Lambda2": [
        [1.0, 0.0],
        ["theta3", 0.0],
        ["theta4", 0.0],
        ["theta5", 0.0],
        [0.0, 1.0],
        [0.0, "theta6"],
        [0.0, "theta7"],
        [0.0, "theta8"],
    ],
    "B0": [[0.0, 0.0], [0.0, 0.0]],
    "Gamma": [["theta9"], ["theta10"]],
    "SigXiXi": [["theta11"]],
    "SigDelDel": [
        ["theta12", 0.0, 0.0, 0.0],
        [0.0, "theta13", 0.0, 0.0],
        [0.0, 0.0, "theta14", 0.0],
        [0.0, 0.0, 0.0, "theta15"],
    ],
    "SigEpsEps": [
        ["theta16" if i == j else 0.0 for j in range(8)] for i in range(8)
    ],
    "SigZetZet": [["theta24", 0.0], [0.0, "theta25"]],
}
# fill the eps diagonal with distinct parameter names
for i in range(8):
    CORRECT_MODEL["SigEpsEps"][i][i] = f"theta{16 + i}"

THETA0 = [
    0.7, 1.3, 0.9, 0.8, 1.4, 1.2, 0.6, 1.3, 0.9, 0.7, -0.8, 1.44, 2.56, 0.49,
    1.44, 0.81, 0.81, 1.44, 0.64, 1.21, 2.25, 1.69, 0.49, 1.96, 0.81, 1.21,
]

# collapsed candidate model: one second-level factor, q = 25
MISSPEC_MODEL = {
    "dims": {"p1": 4, "p2": 8, "k1": 1, "k2": 1},
    "Lambda1": [[1.0], ["theta0"], ["theta1"], ["theta2"]],
    "Lambda2": [
        [1.0],
        ["theta3"],
        ["theta4"],
        ["theta5"],
        ["theta6"],
        ["theta7"],
        ["theta8"],
        ["theta9"],
    ],
    "B0": [[0.0]],
    "Gamma": [["theta10"]],
    "SigXiXi": [["theta11"]],
    "SigDelDel": [
        ["theta12", 0.0, 0.0, 0.0],
        [0.0, "theta13", 0.0, 0.0],
        [0.0, 0.0, "theta14", 0.0],
        [0.0, 0.0, 0.0, "theta15"],
    ],
    "SigEpsEps": [
        [f"theta{16 + i}" if i == j else 0.0 for j in range(8)] for i in range(8)
    ],
    "SigZetZet": [["theta24"]],
}

# starting point for fitting the collapsed model: the population-level
# optimum of the collapsed family against the generating covariance,
# rounded; per-replication fits refine it on each simulated dataset
MISSPEC_INIT = [
    0.700, 1.300, 0.900, 0.805, 1.367, 1.200, -0.751, -0.458, -0.929,
    -0.677, 0.756, 1.440, 2.560, 0.490, 1.440, 0.810, 0.879, 1.472,
    0.909, 1.307, 3.566, 2.154, 2.843, 3.024, 0.623,
]


def main():
    CONFIG_DIR.mkdir(exist_ok=True)
    docs = {
        "true_system.json": {
            "system": SYSTEM,
            "threshold": {"D": 10.0, "rho": 0.4},
            "sampling": {"n": 100000, "h": 1e-05},
        },
        "correct_model.json": {
            "system": SYSTEM,
            "model": CORRECT_MODEL,
            "threshold": {"D": 10.0, "rho": 0.4},
            "sampling": {"n": 100000, "h": 1e-05},
            "mc": {
                "R": 100,
                "alpha": 0.05,
                "master_seed": 20240901,
                "workers": 1,
                "theta_init": THETA0,
            },
        },
        "misspec_model.json": {
            "system": SYSTEM,
            "model": MISSPEC_MODEL,
            "threshold": {"D": 10.0, "rho": 0.4},
            "sampling": {"n": 100000, "h": 1e-05},
            "mc": {
                "R": 100,
                "alpha": 0.05,
                "master_seed": 20240901,
                "workers": 1,
                "theta_init": MISSPEC_INIT,
            },
        },
    }
    for name, doc in docs.items():
        path = CONFIG_DIR / name
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh, indent=2)
            fh.write("\n")
        print(f"wrote {path}")


if __name__ == "__main__":
    main()
