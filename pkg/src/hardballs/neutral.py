"""Neutral spaces of trajectory segments.

A neutral perturbation shifts the initial positions by ``dq`` (with
``sum_i dq_i = 0``) and every collision time by ``-alpha_k`` while leaving all
velocities unchanged. Collision k forces the relative displacement of its two
balls, taken just before the collision, to be parallel to their incoming
relative velocity::

    dq_i(k) - dq_j(k) = alpha_k (v_i^- - v_j^-)

and afterwards the displacement of each participant moves by
``alpha_k (v^+ - v^-)``. Folding that transport into later rows gives a linear
system in ``(dq, alpha)`` whose kernel is the neutral space.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PhasePoint, SystemParams, Tolerances, center_of_mass_basis, kernel
from .dynamics import REGULAR, TrajectorySegment, advance_flow
from .errors import (
    BilliardError,
    EmbeddingViolation,
    FragileSegment,
    NoRelation,
    NotConnected,
    SingularSegment,
)
from .symbolic import component_profile


@dataclass(frozen=True)
class NeutralitySystem:
    N: int
    nu: int
    pairs: tuple[tuple[int, int], ...]
    dv_pre: np.ndarray  # (n, nu) incoming relative velocities v_i - v_j
    dv_post: np.ndarray  # (n, nu) outgoing relative velocities
    v0: np.ndarray  # (N, nu) initial velocities
    matrix: np.ndarray

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def n_q(self) -> int:
        return self.N * self.nu

    def updates(self) -> np.ndarray:
        """Displacement jump per unit advance at each collision, shape (n, N, nu)."""
        u = np.zeros((self.n, self.N, self.nu))
        for k, (i, j) in enumerate(self.pairs):
            w = 0.5 * (self.dv_post[k] - self.dv_pre[k])
            u[k, i] = w
            u[k, j] = -w
        return u

    def prefix(self, m: int) -> "NeutralitySystem":
        return assemble(self.N, self.nu, self.pairs[:m], self.dv_pre[:m], self.dv_post[:m], self.v0)

    def flow_vector(self) -> np.ndarray:
        """(dq = V0, alpha = 1): a uniform time shift."""
        return np.concatenate([self.v0.ravel(), np.ones(self.n)])


def assemble(N, nu, pairs, dv_pre, dv_post, v0) -> NeutralitySystem:
    pairs = tuple((int(i), int(j)) for i, j in pairs)
    n = len(pairs)
    dv_pre = np.asarray(dv_pre, dtype=float).reshape(n, nu)
    dv_post = np.asarray(dv_post, dtype=float).reshape(n, nu)
    a = np.zeros((nu * (n + 1), nu * N + n))
    eye = np.eye(nu)
    for i in range(N):
        a[:nu, i * nu:(i + 1) * nu] = eye
    half_jump = 0.5 * (dv_post - dv_pre)
    for k, (i, j) in enumerate(pairs):
        rows = slice(nu * (k + 1), nu * (k + 2))
        a[rows, i * nu:(i + 1) * nu] = eye
        a[rows, j * nu:(j + 1) * nu] = -eye
        for l, (il, jl) in enumerate(pairs[:k]):
            # R_k applied to the transport vector of collision l
            coef = (i == il) - (i == jl) - (j == il) + (j == jl)
            if coef:
                a[rows, nu * N + l] = coef * half_jump[l]
        a[rows, nu * N + k] = -dv_pre[k]
    return NeutralitySystem(N, nu, pairs, dv_pre, dv_post, np.asarray(v0, dtype=float), a)


def build_neutrality_system(segment: TrajectorySegment) -> NeutralitySystem:
    bad = [e for e in segment.events if e.classification != REGULAR]
    if bad:
        raise SingularSegment(f"segment has {len(bad)} singular event(s), first at t={bad[0].time}")
    x = segment.initial
    n = len(segment.events)
    pre = np.array([e.v_rel_pre for e in segment.events]).reshape(n, x.nu)
    post = np.array([e.v_rel_post for e in segment.events]).reshape(n, x.nu)
    return assemble(x.N, x.nu, segment.pairs, pre, post, x.velocities)


@dataclass(frozen=True)
class NeutralSpaceResult:
    dimension: int
    basis: np.ndarray  # (dimension, nu N + n) orthonormal kernel rows
    n_q: int
    sigma_min: float
    singular_values: np.ndarray  # ascending, padded to the column count
    cutoff: float

    @property
    def basis_q(self) -> np.ndarray:
        return self.basis[:, :self.n_q]

    @property
    def advance_matrix(self) -> np.ndarray:
        """Advances of each basis vector (rows = basis vectors, cols = collisions)."""
        return self.basis[:, self.n_q:]

    def signal(self, generic_dimension: int) -> float:
        """Smallest singular value beyond ``generic_dimension`` zeros; dips to 0 on degeneracy."""
        return float(self.singular_values[generic_dimension])

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "sigma_min": None if np.isnan(self.sigma_min) else self.sigma_min,
            "advance_matrix": self.advance_matrix.tolist(),
            "basis": {"dq": self.basis_q.tolist(), "alpha": self.advance_matrix.tolist()},
        }


def _system(obj) -> NeutralitySystem:
    return obj if isinstance(obj, NeutralitySystem) else build_neutrality_system(obj)


def neutral_space(segment, tol: Tolerances | None = None) -> NeutralSpaceResult:
    """Kernel of the neutrality system of a segment (or of an assembled system)."""
    system = _system(segment)
    k = kernel(system.matrix, tol or Tolerances())
    return NeutralSpaceResult(k.dimension, k.basis, system.n_q, k.sigma_min_nonkernel,
                              k.singular_values, k.cutoff)


def is_sufficient(segment, tol: Tolerances | None = None) -> bool:
    system = _system(segment)
    components = component_profile(system.N, system.pairs)[-1]
    if components != 1:
        raise NotConnected(components)
    return neutral_space(system, tol).dimension == 1


@dataclass(frozen=True)
class EmbeddingCertificate:
    rank: int
    dimension: int
    sigma_min: float

    @property
    def holds(self) -> bool:
        return self.rank == self.dimension


def advance_vectors(result: NeutralSpaceResult, tol: Tolerances | None = None):
    """Advance map on the kernel basis plus a certificate that it is injective."""
    tol = tol or Tolerances()
    adv = result.advance_matrix
    if result.dimension == 0:
        return adv, EmbeddingCertificate(0, 0, float("nan"))
    if adv.shape[1] == 0:
        raise EmbeddingViolation("no collisions: the advance map is zero")
    k = kernel(adv.T, tol)
    rank = result.dimension - k.dimension
    cert = EmbeddingCertificate(rank, result.dimension, k.sigma_min_nonkernel)
    if not cert.holds:
        raise EmbeddingViolation(f"advance map has rank {rank} on a {result.dimension}-dim neutral space")
    return adv, cert


@dataclass(frozen=True)
class EliminatedRelation:
    """``alpha_m dv_pre[m] = sum_k alpha_k gamma[k]`` on the neutral space."""

    m: int
    gamma: np.ndarray  # (m, nu)
    coefficients: np.ndarray  # (m, 2): gamma[k] = c0 dv_pre[k] + c1 dv_post[k]
    target: np.ndarray  # dv_pre[m]
    elimination_residual: float
    decomposition_residual: float

    def residual(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        lhs = alpha[self.m] * self.target
        rhs = alpha[:self.m] @ self.gamma
        return float(np.linalg.norm(lhs - rhs))


def _tree_rows(system: NeutralitySystem, m: int) -> list[int]:
    """Rows of the centre-of-mass block and of the edges among the first m that merge components."""
    nu = system.nu
    profile = component_profile(system.N, system.pairs[:m])
    rows = list(range(nu))
    for k in range(m):
        if profile[k + 1] < profile[k]:
            rows.extend(range(nu * (k + 1), nu * (k + 2)))
    return rows


def cpf_eliminate(system: NeutralitySystem, m: int) -> EliminatedRelation:
    """Eliminate the displacement unknowns to relate advance ``m`` to earlier ones.

    ``m`` is a 0-based collision index; its pair must already be connected by
    the earlier collisions (a non-essential edge).
    """
    system = _system(system)
    if not 0 <= m < system.n:
        raise IndexError(f"collision index {m} outside [0, {system.n})")
    profile = component_profile(system.N, system.pairs[:m + 1])
    if profile[m + 1] < profile[m]:
        raise NoRelation(f"collision {m} is essential: it constrains no earlier advances")
    nu, nq = system.nu, system.n_q
    rows = _tree_rows(system, m)
    c = system.matrix[rows][:, :nq + m]
    # R_m applied to the displacement just before collision m, as a row block in (dq, alpha_<m)
    i, j = system.pairs[m]
    target = np.zeros((nu, nq + m))
    target[:, i * nu:(i + 1) * nu] = np.eye(nu)
    target[:, j * nu:(j + 1) * nu] = -np.eye(nu)
    jumps = system.updates()
    for l in range(m):
        target[:, nq + l] = jumps[l, i] - jumps[l, j]
    lam, *_ = np.linalg.lstsq(c[:, :nq].T, target[:, :nq].T, rcond=None)
    elim_res = float(np.linalg.norm(c[:, :nq].T @ lam - target[:, :nq].T))
    gamma = (target[:, nq:] - lam.T @ c[:, nq:]).T
    coeffs = np.zeros((m, 2))
    dec_res = 0.0
    for k in range(m):
        basis = np.column_stack([system.dv_pre[k], system.dv_post[k]])
        sol, *_ = np.linalg.lstsq(basis, gamma[k], rcond=None)
        coeffs[k] = sol
        dec_res = max(dec_res, float(np.linalg.norm(basis @ sol - gamma[k])))
    return EliminatedRelation(m, gamma, coeffs, system.dv_pre[m].copy(), elim_res, dec_res)


def displacement_coefficients(system: NeutralitySystem, m: int, after: int) -> np.ndarray:
    """Displacements on a tree prefix as linear functions of the advances.

    For the first ``m`` collisions forming a spanning tree, the neutral
    displacement observed after ``after`` collisions is
    ``dq_i = sum_k alpha_k (c[i,k,0] dv_pre[k] + c[i,k,1] dv_post[k])``.
    Returns ``c`` with shape (N, m, 2).
    """
    system = _system(system).prefix(m)
    N, nu, nq = system.N, system.nu, system.n_q
    if m != N - 1 or component_profile(N, system.pairs)[-1] != 1:
        raise NotConnected(component_profile(N, system.pairs)[-1])
    a = system.matrix
    dq = -np.linalg.solve(a[:, :nq], a[:, nq:])  # (nq, m): dq0 per unit alpha_k
    jumps = system.updates()
    dq = dq.reshape(N, nu, m).transpose(0, 2, 1).copy()  # (N, m, nu)
    for l in range(after):
        dq[:, l, :] += jumps[l]
    out = np.zeros((N, m, 2))
    for k in range(m):
        basis = np.column_stack([system.dv_pre[k], system.dv_post[k]])
        for i in range(N):
            out[i, k], *_ = np.linalg.lstsq(basis, dq[i, k], rcond=None)
    return out


@dataclass(frozen=True)
class FDKernelResult:
    dimension: int
    basis: np.ndarray  # (dimension, nu N) position perturbations
    jacobian: np.ndarray  # (nu N, d) in the centre-of-mass basis
    cutoff: float
    error_estimate: float
    singular_values: np.ndarray


def _final_velocities(params, x, n, pairs):
    try:
        seg = advance_flow(params, x, n=n)
    except BilliardError as exc:
        raise FragileSegment(f"probe run failed: {exc}") from exc
    if seg.pairs != pairs:
        raise FragileSegment(f"symbolic sequence changed under probing: {seg.pairs} != {pairs}")
    return seg.final.velocities.ravel()


def fd_jacobian(params: SystemParams, x: PhasePoint, n: int, step: float, pairs=None) -> np.ndarray:
    """Central-difference Jacobian of the velocities after ``n`` collisions
    with respect to initial positions in the centre-of-mass-free subspace."""
    if pairs is None:
        pairs = advance_flow(params, x, n=n).pairs
    basis = center_of_mass_basis(params.N, params.nu)
    cols = []
    for e in basis:
        shift = step * e.reshape(params.N, params.nu)
        plus = _final_velocities(params, PhasePoint(x.positions + shift, x.velocities), n, pairs)
        minus = _final_velocities(params, PhasePoint(x.positions - shift, x.velocities), n, pairs)
        cols.append((plus - minus) / (2 * step))
    return np.column_stack(cols)


def fd_jacobian_kernel(params: SystemParams, x: PhasePoint, n: int, tol: Tolerances | None = None):
    """Finite-difference oracle for the neutral space dimension.

    Jacobians at steps h, h/2 and h/4 give two Richardson extrapolations; their
    difference estimates the remaining error. The kernel cutoff is the larger
    of the relative rank cutoff and ten times that estimate. The result is
    refused (:class:`FragileSegment`) when the step is too large for the local
    expansion rate or when a singular value lies within a factor 100 below or
    10 above the cutoff, or when a value below the cutoff is stable across the
    two extrapolations, i.e. when the rank cannot be read off reliably.
    """
    tol = tol or params.tol
    if n == 0:
        d = params.d
        return FDKernelResult(d, center_of_mass_basis(params.N, params.nu),
                              np.zeros((params.N * params.nu, d)), 0.0, 0.0, np.zeros(d))
    seg = advance_flow(params, x, n=n)
    for e in seg.events:
        if abs(e.normal_speed) <= 10 * tol.tangency_eps:
            raise FragileSegment(f"near-tangential collision at t={e.time}")
    if n > 1 and np.diff(seg.times).min() <= 10 * tol.coincidence_eps:
        raise FragileSegment("nearly coincident collisions")
    h = tol.fd_step
    j = [fd_jacobian(params, x, n, h / 2**k, seg.pairs) for k in range(3)]
    coarse = (4 * j[1] - j[0]) / 3
    jac = (4 * j[2] - j[1]) / 3
    err = float(np.linalg.norm(coarse - jac, 2))
    s = np.linalg.svd(jac, compute_uv=False)
    smax = float(s[0])
    if h * smax > 1e-2:
        raise FragileSegment(f"step {h:g} too large for Jacobian norm {smax:.3g}; shrink fd_step")
    cutoff = max(tol.rank_rel * smax, 10 * err)
    if np.any((s >= cutoff / 100) & (s < 10 * cutoff)):
        raise FragileSegment(f"no clear spectral gap around cutoff {cutoff:.3g}")
    # Noise and truncation floors move between the two extrapolations; a
    # small singular value that has converged is real and the cutoff hides it.
    s_coarse = np.linalg.svd(coarse, compute_uv=False)
    hidden = (s < cutoff) & (s > 0) & (np.abs(s - s_coarse) < 1e-2 * s)
    if np.any(hidden):
        raise FragileSegment(f"converged singular value {s[hidden].max():.3g} below cutoff {cutoff:.3g}")
    k = kernel(jac, tol, cutoff=cutoff)
    basis = k.basis @ center_of_mass_basis(params.N, params.nu)
    return FDKernelResult(k.dimension, basis, jac, k.cutoff, err, k.singular_values)
