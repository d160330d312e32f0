"""Declarative covariance-structure model.

A model assigns every entry of the loading and volatility matrices
(Lambda1, Lambda2, B0, Gamma, SigXiXi, SigDelDel, SigEpsEps, SigZetZet)
either a fixed constant or a free parameter index, and exposes the implied
covariance map

    Sigma(theta) = [[S11, S12], [S12', S22]],
    S11 = L1 Sxx L1' + Sdd,
    S12 = L1 Sxx G' psi^-T L2',
    S22 = L2 psi^-1 (G Sxx G' + Szz) psi^-T L2' + See,

with psi = I - B0, together with its analytic Jacobian
d vech Sigma / d theta' and a numerical rank diagnostic.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError, SingularPsi
from .matrices import half_vec_len, vech

LOADING_BOUNDS = (-1e6, 1e6)
VARIANCE_BOUNDS = (1e-8, 1e6)

_PSI_SINGULARITY_RTOL = 1e-12


@dataclass(frozen=True)
class Fixed:
    """Entry pinned to a constant."""

    value: float


@dataclass(frozen=True)
class Free:
    """Entry read from theta[index]; bounds default by position when None."""

    index: int
    lower: float | None = None
    upper: float | None = None


Entry = Union[Fixed, Free]

# (name, row-dim attr, col-dim attr, symmetric, variance-style diagonal)
_MATRIX_LAYOUT = (
    ("lambda1", "p1", "k1", False, False),
    ("lambda2", "p2", "k2", False, False),
    ("b0", "k2", "k2", False, False),
    ("gamma", "k2", "k1", False, False),
    ("sig_xixi", "k1", "k1", True, True),
    ("sig_deldel", "p1", "p1", True, True),
    ("sig_epseps", "p2", "p2", True, True),
    ("sig_zetzet", "k2", "k2", True, True),
)


@dataclass
class Materialized:
    """Numeric matrices obtained by substituting theta into a ModelSpec."""

    lambda1: np.ndarray
    lambda2: np.ndarray
    b0: np.ndarray
    gamma: np.ndarray
    sig_xixi: np.ndarray
    sig_deldel: np.ndarray
    sig_epseps: np.ndarray
    sig_zetzet: np.ndarray
    psi: np.ndarray


@dataclass
class RankReport:
    """Numerical rank diagnostics for the model at one parameter value."""

    jacobian_rank: int
    q: int
    jacobian_full_rank: bool
    lambda1_full_rank: bool
    lambda2_full_rank: bool
    singular_values: np.ndarray


class ModelSpec:
    """Fixed/free entry grids plus the induced parameter layout.

    Grids are nested sequences of Fixed/Free entries. Symmetric grids must
    reference the same parameter index (or equal constants) at (i, j) and
    (j, i). Free indices must cover 0..q-1 without gaps.
    """

    def __init__(
        self,
        p1: int,
        p2: int,
        k1: int,
        k2: int,
        lambda1: Sequence[Sequence[Entry]],
        lambda2: Sequence[Sequence[Entry]],
        b0: Sequence[Sequence[Entry]],
        gamma: Sequence[Sequence[Entry]],
        sig_xixi: Sequence[Sequence[Entry]],
        sig_deldel: Sequence[Sequence[Entry]],
        sig_epseps: Sequence[Sequence[Entry]],
        sig_zetzet: Sequence[Sequence[Entry]],
    ):
        for name, val in (("p1", p1), ("p2", p2), ("k1", k1), ("k2", k2)):
            if not isinstance(val, int) or val < 1:
                raise ConfigError(f"{name} must be a positive integer, got {val!r}")
        if k1 > p1:
            raise ConfigError(f"k1 <= p1 required, got k1={k1} > p1={p1}")
        if k2 > p2:
            raise ConfigError(f"k2 <= p2 required, got k2={k2} > p2={p2}")
        self.p1, self.p2, self.k1, self.k2 = p1, p2, k1, k2

        grids = {
            "lambda1": lambda1,
            "lambda2": lambda2,
            "b0": b0,
            "gamma": gamma,
            "sig_xixi": sig_xixi,
            "sig_deldel": sig_deldel,
            "sig_epseps": sig_epseps,
            "sig_zetzet": sig_zetzet,
        }
        self._base: dict[str, np.ndarray] = {}
        # per matrix: list of (i, j, param index); symmetric grids keep i >= j only
        self._placements: dict[str, list[tuple[int, int, int]]] = {}
        bounds_seen: dict[int, tuple[float, float]] = {}

        for name, rattr, cattr, symmetric, variance_diag in _MATRIX_LAYOUT:
            rows, cols = getattr(self, rattr), getattr(self, cattr)
            grid = grids[name]
            if len(grid) != rows or any(len(r) != cols for r in grid):
                raise ConfigError(f"{name} grid must be {rows}x{cols}")
            base = np.zeros((rows, cols))
            placed: list[tuple[int, int, int]] = []
            for i in range(rows):
                for j in range(cols):
                    e = grid[i][j]
                    if symmetric and i < j:
                        if not _entries_match(e, grid[j][i]):
                            raise ConfigError(
                                f"{name}[{i}][{j}] must mirror [{j}][{i}] "
                                "(symmetric grid)"
                            )
                        continue
                    if isinstance(e, Fixed):
                        if not math.isfinite(e.value):
                            raise ConfigError(f"{name}[{i}][{j}]: fixed value not finite")
                        base[i, j] = e.value
                        if symmetric:
                            base[j, i] = e.value
                    elif isinstance(e, Free):
                        lo, hi = _resolve_bounds(e, variance_diag and i == j)
                        if not lo < hi:
                            raise ConfigError(
                                f"{name}[{i}][{j}]: bounds must satisfy lower < upper"
                            )
                        prev = bounds_seen.setdefault(e.index, (lo, hi))
                        if prev != (lo, hi):
                            raise ConfigError(
                                f"parameter theta{e.index} declared with "
                                "conflicting bounds"
                            )
                        placed.append((i, j, e.index))
                    else:
                        raise ConfigError(f"{name}[{i}][{j}]: not a Fixed/Free entry")
            self._base[name] = base
            self._placements[name] = placed

        if name_diag_violation := _b0_diag_violation(grids["b0"], k2):
            raise ConfigError(name_diag_violation)

        indices = sorted(bounds_seen)
        self.q = len(indices)
        if indices != list(range(self.q)):
            raise ConfigError(
                f"free parameter indices must be exactly 0..q-1, got {indices}"
            )
        self.lower = np.array([bounds_seen[i][0] for i in range(self.q)])
        self.upper = np.array([bounds_seen[i][1] for i in range(self.q)])

        # param index -> list of (matrix name, i, j) for the Jacobian
        self._by_param: list[list[tuple[str, int, int]]] = [[] for _ in range(self.q)]
        for name, placed in self._placements.items():
            for i, j, idx in placed:
                self._by_param[idx].append((name, i, j))
        self._stacks: dict[str, np.ndarray | None] | None = None

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    @property
    def p_bar(self) -> int:
        return half_vec_len(self.p)

    @property
    def df(self) -> int:
        """Degrees of freedom of the goodness-of-fit test, p_bar - q."""
        return self.p_bar - self.q

    def check_theta(self, theta: np.ndarray) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.q,):
            raise ValueError(f"theta must have length {self.q}, got shape {theta.shape}")
        return theta

    def clip_to_bounds(self, theta: np.ndarray) -> np.ndarray:
        """Project a parameter vector onto the box defined by the entry bounds."""
        return np.clip(self.check_theta(theta), self.lower, self.upper)

    def in_bounds(self, theta: np.ndarray) -> bool:
        theta = self.check_theta(theta)
        return bool(np.all(theta >= self.lower) and np.all(theta <= self.upper))


def _entries_match(a: Entry, b: Entry) -> bool:
    if isinstance(a, Fixed) and isinstance(b, Fixed):
        return a.value == b.value
    if isinstance(a, Free) and isinstance(b, Free):
        return a.index == b.index and a.lower == b.lower and a.upper == b.upper
    return False


def _resolve_bounds(e: Free, variance_diagonal: bool) -> tuple[float, float]:
    default = VARIANCE_BOUNDS if variance_diagonal else LOADING_BOUNDS
    lo = default[0] if e.lower is None else float(e.lower)
    hi = default[1] if e.upper is None else float(e.upper)
    return lo, hi


def _b0_diag_violation(b0_grid, k2: int) -> str | None:
    for i in range(k2):
        e = b0_grid[i][i]
        if not (isinstance(e, Fixed) and e.value == 0.0):
            return f"B0 diagonal entry ({i},{i}) must be Fixed(0)"
    return None


def materialize(spec: ModelSpec, theta: np.ndarray) -> Materialized:
    """Substitute theta into the grids and return numeric matrices plus psi."""
    theta = spec.check_theta(theta)
    mats: dict[str, np.ndarray] = {}
    for name, _, _, symmetric, _ in _MATRIX_LAYOUT:
        m = spec._base[name].copy()
        for i, j, idx in spec._placements[name]:
            m[i, j] = theta[idx]
            if symmetric:
                m[j, i] = theta[idx]
        mats[name] = m
    psi = np.eye(spec.k2) - mats["b0"]
    return Materialized(psi=psi, **mats)


def _psi_inv(psi: np.ndarray, k2: int) -> np.ndarray:
    scale = max(1.0, float(np.linalg.norm(psi, np.inf)))
    if abs(np.linalg.det(psi)) <= _PSI_SINGULARITY_RTOL * scale**k2:
        raise SingularPsi("I - B0 is numerically singular")
    return np.linalg.inv(psi)


def implied_covariance(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    """Covariance matrix implied by the model at theta (p x p, symmetric)."""
    m = materialize(spec, theta)
    return _sigma_of(spec, m, _psi_inv(m.psi, spec.k2))


def _sigma_of(spec: ModelSpec, m: Materialized, psi_inv: np.ndarray) -> np.ndarray:
    l2p = m.lambda2 @ psi_inv
    s11 = m.lambda1 @ m.sig_xixi @ m.lambda1.T + m.sig_deldel
    s12 = m.lambda1 @ m.sig_xixi @ m.gamma.T @ l2p.T
    core = m.gamma @ m.sig_xixi @ m.gamma.T + m.sig_zetzet
    s22 = l2p @ core @ l2p.T + m.sig_epseps
    p = spec.p
    sigma = np.empty((p, p))
    sigma[: spec.p1, : spec.p1] = 0.5 * (s11 + s11.T)
    sigma[: spec.p1, spec.p1 :] = s12
    sigma[spec.p1 :, : spec.p1] = s12.T
    sigma[spec.p1 :, spec.p1 :] = 0.5 * (s22 + s22.T)
    return sigma


def _indicator_stacks(spec: ModelSpec) -> dict[str, np.ndarray | None]:
    """Per-matrix stacks of 0/1 derivative patterns, shape (q, rows, cols).

    Entry [j] of a stack marks where parameter j sits in that matrix
    (mirrored for symmetric grids); None when the matrix holds no free
    entries. Theta-independent, built once per spec.
    """
    if spec._stacks is None:
        stacks: dict[str, np.ndarray | None] = {}
        for name, _, _, symmetric, _ in _MATRIX_LAYOUT:
            placed = spec._placements[name]
            if not placed:
                stacks[name] = None
                continue
            st = np.zeros((spec.q,) + spec._base[name].shape)
            for i, j, idx in placed:
                st[idx, i, j] = 1.0
                if symmetric and i != j:
                    st[idx, j, i] = 1.0
            st.flags.writeable = False
            stacks[name] = st
        spec._stacks = stacks
    return spec._stacks


def sigma_derivatives(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    """Stack of partial derivatives dSigma/dtheta_j, shape (q, p, p).

    Analytic product-rule differentiation, batched over parameters;
    psi^-1 differentiates as -psi^-1 (dpsi) psi^-1 with dpsi = -dB0.
    """
    m = materialize(spec, theta)
    psi_inv = _psi_inv(m.psi, spec.k2)
    l1, sxx, g = m.lambda1, m.sig_xixi, m.gamma
    l2p = m.lambda2 @ psi_inv
    core = g @ sxx @ g.T + m.sig_zetzet
    q, p, p1 = spec.q, spec.p, spec.p1
    z = _indicator_stacks(spec)
    dl1, dl2, db0 = z["lambda1"], z["lambda2"], z["b0"]
    dg, dsxx = z["gamma"], z["sig_xixi"]
    dsdd, dsee, dszz = z["sig_deldel"], z["sig_epseps"], z["sig_zetzet"]

    d_l2p = None
    if dl2 is not None:
        d_l2p = dl2 @ psi_inv
    if db0 is not None:
        extra = np.matmul(l2p, db0 @ psi_inv)
        d_l2p = extra if d_l2p is None else d_l2p + extra

    ds11 = np.zeros((q, p1, p1))
    if dl1 is not None:
        t = dl1 @ (sxx @ l1.T)
        ds11 += t + t.transpose(0, 2, 1)
    if dsxx is not None:
        ds11 += np.matmul(l1, dsxx) @ l1.T
    if dsdd is not None:
        ds11 += dsdd

    b = sxx @ g.T @ l2p.T  # k1 x p2, so S12 = Lambda1 @ b
    ds12 = np.zeros((q, p1, spec.p2))
    db = np.zeros((q,) + b.shape)
    if dsxx is not None:
        db += dsxx @ (g.T @ l2p.T)
    if dg is not None:
        db += np.matmul(sxx, dg.transpose(0, 2, 1)) @ l2p.T
    if d_l2p is not None:
        db += np.matmul(sxx @ g.T, d_l2p.transpose(0, 2, 1))
    ds12 += np.matmul(l1, db)
    if dl1 is not None:
        ds12 += dl1 @ b

    dcore = np.zeros((q,) + core.shape)
    if dg is not None:
        u = dg @ (sxx @ g.T)
        dcore += u + u.transpose(0, 2, 1)
    if dsxx is not None:
        dcore += np.matmul(g, dsxx) @ g.T
    if dszz is not None:
        dcore += dszz

    ds22 = np.matmul(l2p, dcore) @ l2p.T
    if d_l2p is not None:
        t = d_l2p @ (core @ l2p.T)
        ds22 += t + t.transpose(0, 2, 1)
    if dsee is not None:
        ds22 += dsee

    out = np.empty((q, p, p))
    out[:, :p1, :p1] = 0.5 * (ds11 + ds11.transpose(0, 2, 1))
    out[:, :p1, p1:] = ds12
    out[:, p1:, :p1] = ds12.transpose(0, 2, 1)
    out[:, p1:, p1:] = 0.5 * (ds22 + ds22.transpose(0, 2, 1))
    return out


def jacobian(spec: ModelSpec, theta: np.ndarray) -> np.ndarray:
    """d vech Sigma(theta) / d theta', shape (p_bar, q)."""
    derivs = sigma_derivatives(spec, theta)
    out = np.empty((spec.p_bar, spec.q))
    for j in range(spec.q):
        out[:, j] = vech(derivs[j])
    return out


def rank_check(spec: ModelSpec, theta: np.ndarray) -> RankReport:
    """Numerical column rank of the Jacobian and of the loading matrices.

    Rank is counted against the tolerance 1e-8 times the largest singular
    value; diagnostic only, never raises for deficiency.
    """
    jac = jacobian(spec, theta)
    if spec.q == 0:
        sv = np.zeros(0)
        jrank = 0
    else:
        sv = np.linalg.svd(jac, compute_uv=False)
        jrank = int(np.sum(sv > 1e-8 * sv[0])) if sv.size and sv[0] > 0 else 0
    m = materialize(spec, theta)
    l1_rank = np.linalg.matrix_rank(m.lambda1)
    l2_rank = np.linalg.matrix_rank(m.lambda2)
    return RankReport(
        jacobian_rank=jrank,
        q=spec.q,
        jacobian_full_rank=jrank == spec.q,
        lambda1_full_rank=l1_rank == spec.k1,
        lambda2_full_rank=l2_rank == spec.k2,
        singular_values=sv,
    )


# ---------------------------------------------------------------------------
# Model-spec document format: {"dims": {...}, "Lambda1": [[...]], ...} where
# each entry is a number (fixed), a string "theta<k>" (free), or an object
# {"theta": k, "bounds": [lo, hi]}.
# ---------------------------------------------------------------------------

_DOC_KEYS = {
    "Lambda1": "lambda1",
    "Lambda2": "lambda2",
    "B0": "b0",
    "Gamma": "gamma",
    "SigXiXi": "sig_xixi",
    "SigDelDel": "sig_deldel",
    "SigEpsEps": "sig_epseps",
    "SigZetZet": "sig_zetzet",
}
_THETA_RE = re.compile(r"^theta(\d+)$")


def _parse_entry(raw, where: str) -> Entry:
    if isinstance(raw, bool):
        raise ConfigError(f"{where}: entry must be a number or 'theta<k>'")
    if isinstance(raw, (int, float)):
        return Fixed(float(raw))
    if isinstance(raw, str):
        m = _THETA_RE.match(raw)
        if not m:
            raise ConfigError(f"{where}: bad entry string {raw!r}")
        return Free(int(m.group(1)))
    if isinstance(raw, dict):
        unknown = set(raw) - {"theta", "bounds"}
        if unknown:
            raise ConfigError(f"{where}: unknown entry keys {sorted(unknown)}")
        if "theta" not in raw or not isinstance(raw["theta"], int):
            raise ConfigError(f"{where}: entry object needs integer 'theta'")
        lo, hi = (None, None)
        if "bounds" in raw:
            b = raw["bounds"]
            if not (isinstance(b, list) and len(b) == 2):
                raise ConfigError(f"{where}: 'bounds' must be [lo, hi]")
            lo, hi = float(b[0]), float(b[1])
        return Free(raw["theta"], lo, hi)
    raise ConfigError(f"{where}: entry must be a number, 'theta<k>' or object")


def model_spec_from_obj(doc: dict) -> ModelSpec:
    """Build a ModelSpec from its parsed document form; unknown keys rejected."""
    if not isinstance(doc, dict):
        raise ConfigError("model document must be an object")
    unknown = set(doc) - (set(_DOC_KEYS) | {"dims"})
    if unknown:
        raise ConfigError(f"model document: unknown keys {sorted(unknown)}")
    dims = doc.get("dims")
    if not isinstance(dims, dict) or set(dims) != {"p1", "p2", "k1", "k2"}:
        raise ConfigError("model document needs dims {p1, p2, k1, k2}")
    grids = {}
    for key, attr in _DOC_KEYS.items():
        if key not in doc:
            raise ConfigError(f"model document: missing matrix {key}")
        raw = doc[key]
        if not isinstance(raw, list) or not all(isinstance(r, list) for r in raw):
            raise ConfigError(f"{key} must be a list of rows")
        grids[attr] = [
            [_parse_entry(e, f"{key}[{i}][{j}]") for j, e in enumerate(row)]
            for i, row in enumerate(raw)
        ]
    return ModelSpec(
        p1=dims["p1"], p2=dims["p2"], k1=dims["k1"], k2=dims["k2"], **grids
    )


def model_spec_from_json(path) -> ModelSpec:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    return model_spec_from_obj(doc)
