"""Simulation of the latent jump-diffusion system and the observed panel.

Each latent block (common factors xi, measurement errors delta and eps,
structural disturbances zeta) is a mean-reverting diffusion with additive
compound-Poisson jumps,

    dY_t = -A (Y_t - mu) dt + S dW_t + dJ_t,

discretized by an Euler scheme with per-step jump aggregation: jump counts
are Poisson(rate * h) per coordinate and sizes are drawn from the
coordinate's jump-size law. Jump positions inside a step are not resolved;
only increments feed the downstream estimators.

The observed panel stacks X1 = Lambda1 xi + delta over
X2 = Lambda2 psi^-1 (Gamma xi + zeta) + eps on the grid t_i = i h.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Protocol

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DataFormatError, SingularPsi

# substream tags: streams are derived from (master_seed, tag, replication)
# so results never depend on worker scheduling
_TAG_XI, _TAG_DELTA, _TAG_EPS, _TAG_ZETA = 1, 2, 3, 4


class JumpSizeSampler(Protocol):
    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray: ...


@dataclass(frozen=True)
class GaussianJumps:
    """Normal jump-size law with the given mean and variance."""

    mean: float = 0.0
    var: float = 1.0

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, math.sqrt(self.var), size)


@dataclass(frozen=True)
class JumpChannel:
    """Compound-Poisson jump channel: arrival rate per unit time plus size law."""

    rate: float
    size: JumpSizeSampler = GaussianJumps()


@dataclass
class OUJumpSpec:
    """One latent block: drift -A(x - mu), diffusion S, per-coordinate jumps.

    `jumps` holds one channel per coordinate (empty list for a jump-free
    block). The size law is pluggable; anything with a
    ``sample(rng, size)`` method works.
    """

    dim: int
    drift_rate: np.ndarray
    drift_level: np.ndarray
    diffusion: np.ndarray
    jumps: list[JumpChannel] = field(default_factory=list)
    x0: np.ndarray | None = None

    def __post_init__(self):
        d = self.dim
        if d < 1:
            raise ConfigError("OUJumpSpec dim must be >= 1")
        self.drift_rate = np.atleast_2d(np.asarray(self.drift_rate, dtype=float))
        self.drift_level = np.asarray(self.drift_level, dtype=float).reshape(-1)
        self.diffusion = np.atleast_2d(np.asarray(self.diffusion, dtype=float))
        if self.drift_rate.shape != (d, d):
            raise ConfigError(f"drift_rate must be {d}x{d}")
        if self.drift_level.shape != (d,):
            raise ConfigError(f"drift_level must have length {d}")
        if self.diffusion.shape[0] != d:
            raise ConfigError(f"diffusion must have {d} rows")
        self.x0 = (
            np.zeros(d) if self.x0 is None else np.asarray(self.x0, dtype=float).reshape(-1)
        )
        if self.x0.shape != (d,):
            raise ConfigError(f"x0 must have length {d}")
        if self.jumps and len(self.jumps) != d:
            raise ConfigError(f"jumps must list one channel per coordinate ({d})")
        for c in self.jumps:
            if not (c.rate >= 0 and math.isfinite(c.rate)):
                raise ConfigError("jump rates must be finite and >= 0")
        for arr in (self.drift_rate, self.drift_level, self.diffusion, self.x0):
            if not np.all(np.isfinite(arr)):
                raise ConfigError("OUJumpSpec parameters must be finite")

    @property
    def rates(self) -> np.ndarray:
        if not self.jumps:
            return np.zeros(self.dim)
        return np.array([c.rate for c in self.jumps])


@dataclass
class LatentSystemSpec:
    """Data-generating system: four latent blocks plus numeric loadings."""

    xi: OUJumpSpec
    delta: OUJumpSpec
    eps: OUJumpSpec
    zeta: OUJumpSpec
    lambda1: np.ndarray
    lambda2: np.ndarray
    gamma: np.ndarray
    b0: np.ndarray

    def __post_init__(self):
        self.lambda1 = np.atleast_2d(np.asarray(self.lambda1, dtype=float))
        self.lambda2 = np.atleast_2d(np.asarray(self.lambda2, dtype=float))
        self.gamma = np.atleast_2d(np.asarray(self.gamma, dtype=float))
        self.b0 = np.atleast_2d(np.asarray(self.b0, dtype=float))
        k1, p1, p2, k2 = self.xi.dim, self.delta.dim, self.eps.dim, self.zeta.dim
        if self.lambda1.shape != (p1, k1):
            raise ConfigError(f"Lambda1 must be {p1}x{k1}, got {self.lambda1.shape}")
        if self.lambda2.shape != (p2, k2):
            raise ConfigError(f"Lambda2 must be {p2}x{k2}, got {self.lambda2.shape}")
        if self.gamma.shape != (k2, k1):
            raise ConfigError(f"Gamma must be {k2}x{k1}, got {self.gamma.shape}")
        if self.b0.shape != (k2, k2):
            raise ConfigError(f"B0 must be {k2}x{k2}, got {self.b0.shape}")
        psi = np.eye(k2) - self.b0
        if abs(np.linalg.det(psi)) <= 1e-12 * max(1.0, np.linalg.norm(psi, np.inf)) ** k2:
            raise SingularPsi("I - B0 is numerically singular")

    @property
    def p1(self) -> int:
        return self.delta.dim

    @property
    def p2(self) -> int:
        return self.eps.dim

    @property
    def p(self) -> int:
        return self.p1 + self.p2


@dataclass
class ObservationSet:
    """Discrete observations X_{t_0..t_n} on the grid t_i = i h."""

    n: int
    h: float
    p1: int
    p2: int
    X: np.ndarray
    seed: int = 0

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=float)
        if self.X.shape != (self.n + 1, self.p1 + self.p2):
            raise DataFormatError(
                f"observations must be {(self.n + 1, self.p1 + self.p2)}, "
                f"got {self.X.shape}"
            )

    @property
    def T(self) -> float:
        return self.n * self.h

    @property
    def p(self) -> int:
        return self.p1 + self.p2

    def increments(self) -> np.ndarray:
        return np.diff(self.X, axis=0)


@dataclass
class JumpLog:
    """Record of the jumps a simulated panel actually contains.

    `increment_indices` lists the increments hit by at least one jump and
    `displacement_norms` the norm of the total jump-induced displacement of
    the observation vector in that increment.
    """

    events_by_block: dict[str, int]
    increment_indices: np.ndarray
    displacement_norms: np.ndarray

    @property
    def total_events(self) -> int:
        return sum(self.events_by_block.values())

    @property
    def jumpy_increment_count(self) -> int:
        return int(self.increment_indices.size)

    def detectable_count(self, threshold: float) -> int:
        """Increments whose jump displacement alone exceeds the threshold."""
        return int(np.sum(self.displacement_norms > threshold))


def _simulate_block(
    spec: OUJumpSpec, n: int, h: float, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray, int]:
    """One Euler path (n+1, d), per-increment jump sums (n, d), event count."""
    d = spec.dim
    r = spec.diffusion.shape[1]
    noise = np.zeros((n, d))
    if r > 0 and np.any(spec.diffusion != 0.0):
        z = rng.standard_normal((n, r))
        noise += math.sqrt(h) * (z @ spec.diffusion.T)
    jump_sums = np.zeros((n, d))
    events = 0
    rates = spec.rates
    if np.any(rates > 0):
        counts = rng.poisson(rates * h, size=(n, d))
        events = int(counts.sum())
        steps, coords = np.nonzero(counts)
        for s, c in zip(steps.tolist(), coords.tolist()):
            jump_sums[s, c] = spec.jumps[c].size.sample(rng, counts[s, c]).sum()

    a, mu = spec.drift_rate, spec.drift_level
    path = np.empty((n + 1, d))
    path[0] = spec.x0
    if np.count_nonzero(a - np.diag(np.diag(a))) == 0:
        # diagonal drift: the recursion x_{i+1} = phi x_i + u_i is a linear
        # filter per coordinate, solved in C by lfilter
        phi = 1.0 - h * np.diag(a)
        u = noise + jump_sums + h * (np.diag(a) * mu)[None, :]
        for c in range(d):
            y = lfilter([1.0], [1.0, -phi[c]], u[:, c])
            powers = np.cumprod(np.full(n, phi[c]))
            path[1:, c] = y + spec.x0[c] * powers
    else:
        incr = noise + jump_sums
        x = spec.x0.copy()
        for i in range(n):
            x = x - h * (a @ (x - mu)) + incr[i]
            path[i + 1] = x
    return path, jump_sums, events


def simulate_latent(
    spec: OUJumpSpec, n: int, h: float, rng: np.random.Generator
) -> np.ndarray:
    """Simulate one latent block on the grid t_i = i h, returning (n+1, d)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if not (h > 0 and math.isfinite(h)):
        raise ConfigError("h must be positive and finite")
    path, _, _ = _simulate_block(spec, n, h, rng)
    return path


def _stream(master_seed: int, tag: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((master_seed, tag, rep)))


def simulate_panel(
    sys: LatentSystemSpec, n: int, h: float, master_seed: int, rep: int = 0
) -> tuple[ObservationSet, JumpLog]:
    """Simulate the observed panel and log the jumps that produced it.

    The four blocks run on independent substreams derived from
    (master_seed, block tag, rep), so panels are reproducible and
    independent of scheduling.
    """
    if n < 1:
        raise ConfigError("n must be >= 1")
    if not (h > 0 and math.isfinite(h)):
        raise ConfigError("h must be positive and finite")
    xi, j_xi, e_xi = _simulate_block(sys.xi, n, h, _stream(master_seed, _TAG_XI, rep))
    delta, j_delta, e_delta = _simulate_block(
        sys.delta, n, h, _stream(master_seed, _TAG_DELTA, rep)
    )
    eps, j_eps, e_eps = _simulate_block(sys.eps, n, h, _stream(master_seed, _TAG_EPS, rep))
    zeta, j_zeta, e_zeta = _simulate_block(
        sys.zeta, n, h, _stream(master_seed, _TAG_ZETA, rep)
    )

    psi_inv = np.linalg.inv(np.eye(sys.zeta.dim) - sys.b0)
    x1 = xi @ sys.lambda1.T + delta
    eta = (xi @ sys.gamma.T + zeta) @ psi_inv.T
    x2 = eta @ sys.lambda2.T + eps
    obs = ObservationSet(
        n=n, h=h, p1=sys.p1, p2=sys.p2, X=np.hstack([x1, x2]), seed=master_seed
    )

    d1 = j_xi @ sys.lambda1.T + j_delta
    d2 = (j_xi @ sys.gamma.T + j_zeta) @ psi_inv.T @ sys.lambda2.T + j_eps
    disp = np.hstack([d1, d2])
    hit = np.nonzero(np.any(disp != 0.0, axis=1))[0]
    log = JumpLog(
        events_by_block={"xi": e_xi, "delta": e_delta, "eps": e_eps, "zeta": e_zeta},
        increment_indices=hit,
        displacement_norms=np.linalg.norm(disp[hit], axis=1),
    )
    return obs, log


def assemble_observations(
    sys: LatentSystemSpec, n: int, h: float, master_seed: int, rep: int = 0
) -> ObservationSet:
    """Simulate the observed panel; see simulate_panel for the jump log too."""
    obs, _ = simulate_panel(sys, n, h, master_seed, rep)
    return obs


# ---------------------------------------------------------------------------
# Observation file format: a `# n=... h=... T=... p1=... p2=...` header line,
# then one row of p comma-separated values per time point. %.17g formatting
# keeps the round trip lossless.
# ---------------------------------------------------------------------------

_HEADER_RE = re.compile(
    r"^#\s*n=(?P<n>\d+)\s+h=(?P<h>[^\s]+)(?:\s+T=(?P<T>[^\s]+))?"
    r"\s+p1=(?P<p1>\d+)\s+p2=(?P<p2>\d+)\s*$"
)


def write_observations(obs: ObservationSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"# n={obs.n} h={obs.h:.17g} T={obs.T:.17g} p1={obs.p1} p2={obs.p2}\n"
        )
        for row in obs.X:
            fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def read_observations(path) -> ObservationSet:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline()
        m = _HEADER_RE.match(header.strip())
        if not m:
            raise DataFormatError(f"{path}: bad or missing header line")
        n, p1, p2 = int(m["n"]), int(m["p1"]), int(m["p2"])
        h = float(m["h"])
        if m["T"] is not None:
            t = float(m["T"])
            if not math.isclose(t, n * h, rel_tol=1e-9, abs_tol=0.0):
                raise DataFormatError(
                    f"{path}: header T={t} does not equal n*h={n * h}"
                )
        p = p1 + p2
        rows = np.empty((n + 1, p))
        i = 0
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != p:
                raise DataFormatError(
                    f"{path}: row {lineno}: expected {p} values, got {len(parts)}"
                )
            if i > n:
                raise DataFormatError(f"{path}: more than n+1={n + 1} data rows")
            try:
                rows[i] = [float(x) for x in parts]
            except ValueError as exc:
                raise DataFormatError(f"{path}: row {lineno}: {exc}") from exc
            i += 1
        if i != n + 1:
            raise DataFormatError(f"{path}: expected {n + 1} data rows, found {i}")
    return ObservationSet(n=n, h=h, p1=p1, p2=p2, X=rows, seed=0)
