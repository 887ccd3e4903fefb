"""Torus geometry, phase points, sampling and tolerance-aware linear algebra.

Lengths are in units of the torus side, so the torus is the unit cube with
opposite faces identified. All masses are equal to one.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .errors import InvalidMatrix, InvalidParams, PackingError

__all__ = [
    "Tolerances",
    "SystemParams",
    "PhasePoint",
    "KernelResult",
    "wrap",
    "minimal_image",
    "dot",
    "kernel",
    "center_of_mass_basis",
    "sample_phase_point",
]


@dataclass(frozen=True)
class Tolerances:
    rank_rel: float = 1e-8
    tangency_eps: float = 1e-10
    coincidence_eps: float = 1e-9
    bisection_res: float = 1e-12
    fd_step: float = 1e-6
    # Closest-approach margins below this are indistinguishable from tangency
    # in double precision; such contacts are resolved as grazing.
    graze_margin: float = 1e-13

    def __post_init__(self):
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidParams(f"tolerance {field.name} must be positive, got {value!r}")
        if self.rank_rel >= 1:
            raise InvalidParams(f"rank_rel must be < 1, got {self.rank_rel!r}")

    def replace(self, **changes) -> "Tolerances":
        return dataclasses.replace(self, **changes)


@dataclass(frozen=True)
class SystemParams:
    N: int
    nu: int
    r: float
    tolerances: Tolerances = Tolerances()

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 2:
            raise InvalidParams(f"N must be an integer >= 2, got {self.N!r}")
        if int(self.nu) != self.nu or self.nu < 2:
            raise InvalidParams(f"nu must be an integer >= 2, got {self.nu!r}")
        if not (np.isfinite(self.r) and 0 < self.r < 0.25):
            raise InvalidParams(f"r must lie in (0, 1/4), got {self.r!r}")

    @property
    def d(self) -> int:
        """Dimension of the reduced configuration space."""
        return self.nu * (self.N - 1)

    @property
    def tol(self) -> Tolerances:
        return self.tolerances

    @property
    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.N) for j in range(i + 1, self.N)]


def wrap(x):
    """Map coordinates into [0, 1). Idempotent."""
    x = np.asarray(x, dtype=float)
    y = x - np.floor(x)
    # x slightly below an integer rounds up to exactly 1.0
    return np.where(y >= 1.0, 0.0, y)


def minimal_image(a, b):
    """Representative of ``b - a`` modulo 1 with coordinates in [-1/2, 1/2)."""
    d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
    return d - np.floor(d + 0.5)


def dot(x, y):
    """Dot product over the last axis with a fixed summation order.

    Unlike ``(x * y).sum(-1)`` the result for one row never depends on the
    shape of the surrounding array, which keeps event times bit-identical
    between full and phantom flows.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    return reduce(np.add, (x[..., k] * y[..., k] for k in range(x.shape[-1])))


@dataclass(frozen=True)
class PhasePoint:
    positions: np.ndarray
    velocities: np.ndarray

    def __post_init__(self):
        q = wrap(np.array(self.positions, dtype=float))
        v = np.array(self.velocities, dtype=float)
        if q.ndim != 2 or q.shape != v.shape:
            raise InvalidParams(f"positions {q.shape} and velocities {v.shape} must both be (N, nu)")
        q.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "positions", q)
        object.__setattr__(self, "velocities", v)

    @property
    def N(self) -> int:
        return self.positions.shape[0]

    @property
    def nu(self) -> int:
        return self.positions.shape[1]

    def momentum(self) -> np.ndarray:
        return self.velocities.sum(axis=0)

    def energy(self) -> float:
        return float(np.sum(self.velocities**2))

    def pair_distances(self) -> np.ndarray:
        """Torus distances for all pairs i < j, in ``SystemParams.pairs`` order."""
        i, j = np.triu_indices(self.N, 1)
        d = minimal_image(self.positions[j], self.positions[i])
        return np.sqrt(dot(d, d))

    def invariant_violations(self, params: SystemParams, atol: float = 1e-12) -> list[str]:
        problems = []
        if (self.N, self.nu) != (params.N, params.nu):
            problems.append(f"shape {(self.N, self.nu)} != {(params.N, params.nu)}")
            return problems
        if np.linalg.norm(self.momentum()) > atol:
            problems.append(f"total momentum {np.linalg.norm(self.momentum()):.3e}")
        if abs(self.energy() - 1.0) > atol:
            problems.append(f"energy deviation {abs(self.energy() - 1.0):.3e}")
        dist = self.pair_distances()
        if dist.size and dist.min() < 2 * params.r - atol:
            problems.append(f"overlap: min distance {dist.min():.15g} < 2r")
        return problems

    def reversed(self) -> "PhasePoint":
        return PhasePoint(self.positions, -self.velocities)

    def relabeled(self, perm) -> "PhasePoint":
        """Ball ``k`` of the result is ball ``perm[k]`` of this point."""
        perm = list(perm)
        return PhasePoint(self.positions[perm], self.velocities[perm])

    def to_dict(self) -> dict:
        return {"positions": self.positions.tolist(), "velocities": self.velocities.tolist()}

    @classmethod
    def from_dict(cls, data) -> "PhasePoint":
        return cls(np.asarray(data["positions"], float), np.asarray(data["velocities"], float))

    def __eq__(self, other):
        if not isinstance(other, PhasePoint):
            return NotImplemented
        return np.array_equal(self.positions, other.positions) and np.array_equal(
            self.velocities, other.velocities
        )

    __hash__ = None


@dataclass(frozen=True)
class KernelResult:
    dimension: int
    basis: np.ndarray  # (dimension, cols), orthonormal rows
    sigma_min_nonkernel: float
    singular_values: np.ndarray  # ascending, padded with zeros to length cols
    cutoff: float


def kernel(matrix, tol: Tolerances | None = None, cutoff: float | None = None) -> KernelResult:
    """Numerical kernel of a dense matrix from its SVD.

    A singular value counts as zero when it is below ``rank_rel * sigma_max``
    (or below an explicit absolute ``cutoff``). An all-zero matrix has the
    whole column space as kernel.
    """
    tol = tol or Tolerances()
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[1] < 1:
        raise InvalidMatrix(f"expected a 2-d matrix with at least one column, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise InvalidMatrix("matrix has non-finite entries")
    rows, cols = a.shape
    if rows == 0:
        s = np.zeros(0)
        vt = np.eye(cols)
    else:
        _, s, vt = np.linalg.svd(a, full_matrices=True)
    smax = s[0] if s.size else 0.0
    if cutoff is None:
        cutoff = tol.rank_rel * smax
    if smax == 0.0:
        rank = 0
    else:
        rank = int(np.count_nonzero(s >= cutoff))
    basis = vt[rank:].copy()
    retained = s[:rank]
    sigma_min = float(retained[-1]) if rank else float("nan")
    padded = np.concatenate([np.zeros(cols - s.size), s[::-1]])
    return KernelResult(cols - rank, basis, sigma_min, padded, float(cutoff))


def center_of_mass_basis(N: int, nu: int) -> np.ndarray:
    """Orthonormal basis (rows) of {dq in R^(nu N) : sum_i dq_i = 0}."""
    # Helmert contrasts per coordinate
    h = np.zeros((N - 1, N))
    for k in range(1, N):
        h[k - 1, :k] = 1.0
        h[k - 1, k] = -k
        h[k - 1] /= np.sqrt(k * (k + 1))
    return np.kron(h, np.eye(nu))


def sample_phase_point(params: SystemParams, seed, max_attempts: int = 10**6) -> PhasePoint:
    """Uniform non-overlapping positions and normalized Gaussian velocities."""
    rng = np.random.default_rng(seed)
    N, nu, r = params.N, params.nu, params.r
    i, j = np.triu_indices(N, 1)
    attempts = 0
    positions = None
    while attempts < max_attempts:
        batch = min(4096, max_attempts - attempts)
        q = rng.random((batch, N, nu))
        attempts += batch
        d = minimal_image(q[:, i], q[:, j])
        ok = np.all(dot(d, d) >= (2 * r) ** 2, axis=1)
        if ok.any():
            positions = q[np.argmax(ok)]
            break
    if positions is None:
        raise PackingError(f"no admissible configuration after {max_attempts} attempts (N={N}, r={r})")
    v = rng.standard_normal((N, nu))
    v -= v.mean(axis=0)
    v /= np.sqrt(np.sum(v**2))
    return PhasePoint(positions, v)
