"""Shared fixtures: the study system/models from the shipped configs."""

import json
from pathlib import Path

import numpy as np
import pytest

import jumpsem as js
from jumpsem.cli import parse_system
from jumpsem.matrices import is_positive_definite

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

# true parameter vector of the two-factor study model
THETA0 = np.array([
    0.7, 1.3, 0.9, 0.8, 1.4, 1.2, 0.6, 1.3, 0.9, 0.7, -0.8, 1.44, 2.56, 0.49,
    1.44, 0.81, 0.81, 1.44, 0.64, 1.21, 2.25, 1.69, 0.49, 1.96, 0.81, 1.21,
])

# reference values (3 decimals) for every distinct entry of the generating
# covariance, keyed by 1-based (row, col) with row <= col
TABLE1_TRUE = {
    (1, 1): 4.000, (1, 2): 1.008, (1, 3): 1.872, (1, 4): 1.296, (1, 5): 1.008,
    (1, 6): 0.806, (1, 7): 1.411, (1, 8): 1.210, (1, 9): -1.152, (1, 10): -0.691,
    (1, 11): -1.498, (1, 12): -1.037, (2, 2): 1.196, (2, 3): 1.310, (2, 4): 0.907,
    (2, 5): 0.706, (2, 6): 0.564, (2, 7): 0.988, (2, 8): 0.847, (2, 9): -0.806,
    (2, 10): -0.484, (2, 11): -1.048, (2, 12): -0.726, (3, 3): 3.874, (3, 4): 1.685,
    (3, 5): 1.310, (3, 6): 1.048, (3, 7): 1.835, (3, 8): 1.572, (3, 9): -1.498,
    (3, 10): -0.899, (3, 11): -1.947, (3, 12): -1.348, (4, 4): 1.976, (4, 5): 0.907,
    (4, 6): 0.726, (4, 7): 1.270, (4, 8): 1.089, (4, 9): -1.037, (4, 10): -0.622,
    (4, 11): -1.348, (4, 12): -0.933, (5, 5): 2.326, (5, 6): 1.212, (5, 7): 2.122,
    (5, 8): 1.819, (5, 9): -0.806, (5, 10): -0.484, (5, 11): -1.048, (5, 12): -0.726,
    (6, 6): 2.410, (6, 7): 1.697, (6, 8): 1.455, (6, 9): -0.645, (6, 10): -0.387,
    (6, 11): -0.839, (6, 12): -0.581, (7, 7): 3.611, (7, 8): 2.546, (7, 9): -1.129,
    (7, 10): -0.677, (7, 11): -1.468, (7, 12): -1.016, (8, 8): 3.392, (8, 9): -0.968,
    (8, 10): -0.581, (8, 11): -1.258, (8, 12): -0.871, (9, 9): 4.382, (9, 10): 1.279,
    (9, 11): 2.771, (9, 12): 1.918, (10, 10): 2.457, (10, 11): 1.663, (10, 12): 1.151,
    (11, 11): 4.092, (11, 12): 2.494, (12, 12): 3.687,
}


def load_doc(name: str) -> dict:
    with open(CONFIG_DIR / name, "r", encoding="utf-8") as fh:
        return json.load(fh)


@pytest.fixture(scope="session")
def study_system():
    return parse_system(load_doc("correct_model.json")["system"])


@pytest.fixture(scope="session")
def correct_model():
    return js.model_spec_from_obj(load_doc("correct_model.json")["model"])


@pytest.fixture(scope="session")
def misspec_model():
    return js.model_spec_from_obj(load_doc("misspec_model.json")["model"])


@pytest.fixture(scope="session")
def misspec_init():
    return np.asarray(load_doc("misspec_model.json")["mc"]["theta_init"], dtype=float)


@pytest.fixture(scope="session")
def theta0():
    return THETA0.copy()


def diag_2d_model():
    """p=2 model with Sigma(theta) = diag(theta0, theta1)."""
    return js.model_spec_from_obj(
        {
            "dims": {"p1": 1, "p2": 1, "k1": 1, "k2": 1},
            "Lambda1": [[1.0]],
            "Lambda2": [[1.0]],
            "B0": [[0.0]],
            "Gamma": [[0.0]],
            "SigXiXi": [["theta0"]],
            "SigDelDel": [[0.0]],
            "SigEpsEps": [[0.0]],
            "SigZetZet": [["theta1"]],
        }
    )


def saturated_2d_model():
    """Bijective saturated p=2 model.

    Sigma(theta) = [[t0, t0 t1], [t0 t1, t1^2 t0 + t2]] ranges over every
    positive definite 2x2 matrix: t0 = s11, t1 = s12/s11, t2 is the Schur
    complement.
    """
    return js.model_spec_from_obj(
        {
            "dims": {"p1": 1, "p2": 1, "k1": 1, "k2": 1},
            "Lambda1": [[1.0]],
            "Lambda2": [[1.0]],
            "B0": [[0.0]],
            "Gamma": [["theta1"]],
            "SigXiXi": [["theta0"]],
            "SigDelDel": [[0.0]],
            "SigEpsEps": [[0.0]],
            "SigZetZet": [["theta2"]],
        }
    )


def synthetic_estimate(sigma, n=1000, N_n=None):
    """CovEstimate wrapper around a given matrix, for optimizer-level tests."""
    sigma = np.asarray(sigma, dtype=float)
    if N_n is None:
        N_n = n
    return js.CovEstimate(
        sigma_hat=sigma,
        n=n,
        N_n=N_n,
        N_tilde=N_n if N_n > 0 else n,
        se=np.sqrt(np.diag(js.sandwich_cov(sigma)) / n),
        pd_flag=is_positive_definite(sigma),
    )
