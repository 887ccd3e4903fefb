"""Locating singular and non-hyperbolic points along one-parameter curves.

Two codimension-one sets are probed:

* K, points whose first reflection in the past is tangential. Along a curve
  the first past collision partner changes exactly where some pair starts (or
  stops) grazing. The signal is that pair's signed closest-approach margin
  ``|dq(t_c)| - 2r`` in the past, computed from unwrapped positions with the
  periodic image held fixed, so it is continuous across the crossing.
* J, points whose forward segment has a neutral space larger than generic.
  The signal is the singular value of the neutrality system just above the
  generic kernel; it has a V-shaped zero at a crossing.
"""
from __future__ import annotations

import logging
from collections import Counter
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .core import PhasePoint, SystemParams, Tolerances, dot, sample_phase_point
from .dynamics import TANGENTIAL, CollisionEvent, advance_flow, backward_first_reflection, phantom_flow
from .errors import (
    BilliardError,
    NoPastReflection,
    NotEnoughSamples,
    SequenceUnrealizable,
    SequenceUnstable,
)
from .neutral import build_neutrality_system, neutral_space
from .symbolic import SymbolicSequence, component_profile

log = logging.getLogger(__name__)

WORKED_EXAMPLE = SymbolicSequence(((0, 1), (0, 2), (1, 2)))


@dataclass(frozen=True)
class CurveSpec:
    """Straight phase-space curve ``u -> (q + u dq, normalize(v + u dv))``."""

    base: PhasePoint
    dq: np.ndarray
    dv: np.ndarray
    u_min: float = -1.0
    u_max: float = 1.0
    samples: int = 33

    def __post_init__(self):
        N, nu = self.base.N, self.base.nu
        dq = np.array(self.dq, dtype=float).reshape(N, nu)
        dv = np.array(self.dv, dtype=float).reshape(N, nu)
        # keep the centre of mass and total momentum fixed
        dq -= dq.mean(axis=0)
        dv -= dv.mean(axis=0)
        object.__setattr__(self, "dq", dq)
        object.__setattr__(self, "dv", dv)
        if not self.u_min < self.u_max:
            raise ValueError(f"empty range [{self.u_min}, {self.u_max}]")
        if self.samples < 3:
            raise ValueError("need at least 3 grid samples")

    def raw_positions(self, u: float) -> np.ndarray:
        """Unwrapped positions, continuous in ``u``."""
        return self.base.positions + u * self.dq

    def velocities(self, u: float) -> np.ndarray:
        v = self.base.velocities + u * self.dv
        return v / np.sqrt(np.sum(v**2))

    def point(self, u: float) -> PhasePoint:
        return PhasePoint(self.raw_positions(u), self.velocities(u))

    def grid(self) -> np.ndarray:
        return np.linspace(self.u_min, self.u_max, self.samples)

    def admissible(self, params: SystemParams) -> "CurveSpec":
        """Shrink the range to the longest run of grid points without overlaps."""
        ok = [self.point(u).pair_distances().min() >= 2 * params.r for u in self.grid()]
        best, start = (0, 0), None
        for k, good in enumerate(ok + [False]):
            if good and start is None:
                start = k
            elif not good and start is not None:
                if k - start > best[1] - best[0]:
                    best = (start, k)
                start = None
        lo, hi = best
        if hi - lo < 3:
            raise ValueError("curve overlaps almost everywhere on its range")
        if (lo, hi) == (0, self.samples):
            return self
        grid = self.grid()
        return CurveSpec(self.base, self.dq, self.dv, float(grid[lo]), float(grid[hi - 1]), hi - lo)

    def to_dict(self) -> dict:
        return {
            "base": self.base.to_dict(),
            "dq": self.dq.tolist(),
            "dv": self.dv.tolist(),
            "u_min": self.u_min,
            "u_max": self.u_max,
            "samples": self.samples,
        }


def random_curve(params: SystemParams, seed, half_width: float = 0.02, samples: int = 33) -> CurveSpec:
    """Random base point and random unit tangent direction, admissible range."""
    rng = np.random.default_rng(seed)
    base = sample_phase_point(params, rng)
    dq = rng.standard_normal((params.N, params.nu))
    dv = rng.standard_normal((params.N, params.nu))
    scale = np.sqrt(np.sum(dq**2) + np.sum(dv**2))
    curve = CurveSpec(base, dq / scale, dv / scale, -half_width, half_width, samples)
    return curve.admissible(params)


@dataclass(frozen=True)
class CrossingReport:
    kind: str  # "J" or "K"
    u_star: float
    residual: float
    pair: tuple[int, int] | None
    bracket_pair_stable: bool
    accepted: bool
    dim_left: int | None = None
    dim_at: int | None = None
    dim_right: int | None = None
    witness: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "u_star": self.u_star,
            "residual": self.residual,
            "pair": None if self.pair is None else list(self.pair),
            "bracket_pair_stable": self.bracket_pair_stable,
            "accepted": self.accepted,
            "dim_left": self.dim_left,
            "dim_at": self.dim_at,
            "dim_right": self.dim_right,
            "witness": self.witness,
        }

    def csv_row(self) -> list:
        i, j = (None, None) if self.pair is None else (self.pair[0] + 1, self.pair[1] + 1)
        return [self.kind, repr(self.u_star), repr(self.residual), self.dim_left, self.dim_at,
                self.dim_right, i, j]


CSV_HEADER = ["kind", "u_star", "residual", "dim_left", "dim_at", "dim_right", "pair_i", "pair_j"]


# ---------------------------------------------------------------- K crossings

class _MarginSignal:
    def __init__(self, params, curve, pair, shift):
        self.r = params.r
        self.curve, self.pair, self.shift = curve, pair, shift

    def __call__(self, u):
        i, j = self.pair
        q = self.curve.raw_positions(u)
        v = self.curve.velocities(u)
        d = q[i] - q[j] + self.shift
        dv = -(v[i] - v[j])
        a = dot(dv, dv)
        tc = max(-dot(d, dv) / a, 0.0)
        perp = d + tc * dv
        return float(np.sqrt(dot(perp, perp)) - 2 * self.r), float(tc)


def _image_shift(curve: CurveSpec, u: float, event: CollisionEvent, r: float) -> np.ndarray:
    """Lattice vector turning raw q_i - q_j into the image that collides."""
    i, j = event.pair
    q = curve.raw_positions(u)
    v = curve.velocities(u)
    raw_contact = q[i] - q[j] - event.time * (v[i] - v[j])
    return np.round(2 * r * event.normal - raw_contact)


def _bisect(f, lo: float, hi: float, f_lo: float, res: float, max_iter: int = 200):
    """Bisection to the limit of double precision; returns (u, |f(u)|)."""
    best = (lo, abs(f_lo))
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        fm = f(mid)
        if abs(fm) < best[1]:
            best = (mid, abs(fm))
        if fm == 0.0:
            break
        if (fm < 0) == (f_lo < 0):
            lo, f_lo = mid, fm
        else:
            hi = mid
    return best


def scan_K(params: SystemParams, curve: CurveSpec, time_cap: float = 1e3) -> list[CrossingReport]:
    """Crossings of the past-singularity set along ``curve``."""
    tol = params.tol
    grid = curve.grid()
    firsts = []
    for u in grid:
        try:
            firsts.append(backward_first_reflection(params, curve.point(u), time_cap))
        except NoPastReflection as exc:
            raise NoPastReflection(f"{exc} at u={u!r}") from exc
    # the first past collision is identified by its pair and periodic image
    keys = [(e.pair, tuple(_image_shift(curve, u, e, params.r))) for u, (_, e) in zip(grid, firsts)]
    reports = []
    for k in range(len(grid) - 1):
        if keys[k] == keys[k + 1]:
            continue
        e_a, e_b = firsts[k][1], firsts[k + 1][1]
        reports.append(_resolve_k(params, curve, grid[k], grid[k + 1], e_a, e_b, tol, time_cap))
    return reports


def _resolve_k(params, curve, u_a, u_b, e_a, e_b, tol: Tolerances, time_cap):
    # The pair that grazes is the one hitting on one side and missing on the other.
    for u_hit, e_hit, u_other, e_other in ((u_a, e_a, u_b, e_b), (u_b, e_b, u_a, e_a)):
        shift = _image_shift(curve, u_hit, e_hit, params.r)
        signal = _MarginSignal(params, curve, e_hit.pair, shift)
        m_hit, _ = signal(u_hit)
        m_other, tc_other = signal(u_other)
        if m_hit < 0 < m_other:
            break
    else:
        log.debug("first past pair changes %s -> %s without a grazing pair", e_a.pair, e_b.pair)
        return CrossingReport("K", 0.5 * (u_a + u_b), float("nan"), None, False, False,
                              witness={"pairs": [list(e_a.pair), list(e_b.pair)]})
    u_star, residual = _bisect(lambda u: signal(u)[0], u_hit, u_other, m_hit, tol.bisection_res)
    witness = {"margin": residual}
    accepted = residual < tol.bisection_res
    try:
        _, event = backward_first_reflection(params, curve.point(u_star), time_cap)
        witness["event"] = event.to_dict()
        revalidated = (event.pair == e_hit.pair and event.classification == TANGENTIAL
                       and abs(event.normal_speed) < tol.tangency_eps)
    except NoPastReflection:
        revalidated = False
    witness["revalidated"] = revalidated
    return CrossingReport("K", float(u_star), float(residual), e_hit.pair, True,
                          bool(accepted and revalidated), witness=witness)


# ---------------------------------------------------------------- J crossings

def _sequence_at(params, x, n):
    try:
        return advance_flow(params, x, n=n)
    except BilliardError:
        return None


def _runs(keys):
    """Maximal runs of equal, non-None keys as (start, stop) index pairs."""
    runs, start = [], 0
    for k in range(1, len(keys) + 1):
        if k == len(keys) or keys[k] != keys[start]:
            if keys[start] is not None:
                runs.append((start, k))
            start = k
    return runs


def j_signal(params: SystemParams, curve: CurveSpec, n: int, generic_dim: int, pairs=None):
    """(sigma, relative sigma, dimension, segment) at parameter ``u``, as a closure."""

    def evaluate(u):
        seg = advance_flow(params, curve.point(u), n=n)
        if pairs is not None and seg.pairs != pairs:
            raise SequenceUnstable(f"sequence changed at u={u!r}")
        res = neutral_space(seg, params.tol)
        smax = float(res.singular_values[-1])
        sigma = res.signal(generic_dim)
        return sigma, sigma / smax if smax else 0.0, res.dimension, seg

    return evaluate


def scan_J(params: SystemParams, curve: CurveSpec, n: int) -> list[CrossingReport]:
    """Crossings of the non-hyperbolicity set for segments of ``n`` collisions."""
    tol = params.tol
    grid = curve.grid()
    segs = [_sequence_at(params, curve.point(u), n) for u in grid]
    keys = [None if s is None else s.pairs for s in segs]
    runs = [r for r in _runs(keys) if r[1] - r[0] >= 3]
    if not runs:
        raise SequenceUnstable("no stretch of three grid points shares one symbolic sequence")
    reports = []
    for lo, hi in runs:
        pairs = keys[lo]
        results = [neutral_space(segs[k], tol) for k in range(lo, hi)]
        generic = min(r.dimension for r in results)
        signal = j_signal(params, curve, n, generic, pairs)
        sig = [r.signal(generic) for r in results]
        for k in range(1, len(sig) - 1):
            if not (sig[k] <= sig[k - 1] and sig[k] <= sig[k + 1]):
                continue
            a, b, c = grid[lo + k - 1], grid[lo + k], grid[lo + k + 1]
            try:
                report = _refine_j(params, signal, a, b, c, generic, tol)
            except SequenceUnstable:
                continue
            if report is not None:
                reports.append(report)
    return reports


def _golden_min(f, a, b, c):
    """Golden-section minimum of ``f`` bracketed by a < b < c."""
    out = minimize_scalar(f, bracket=(a, b, c), method="golden",
                          options={"xtol": 1e-15, "maxiter": 400})
    return float(out.x)


def _refine_j(params, signal, a, b, c, generic, tol):
    u_star = _golden_min(lambda u: signal(u)[0], a, b, c)
    sigma, rel, dim, seg = signal(u_star)
    if rel >= tol.rank_rel:
        return None
    dim_left = signal(a)[2]
    dim_right = signal(c)[2]
    accepted = dim >= max(dim_left, dim_right) + 1 and dim_left == dim_right == generic
    witness = {"sigma": sigma, "relative_sigma": rel}
    if seg.pairs[:3] == WORKED_EXAMPLE.entries and len(seg.pairs) >= 3:
        witness["parallelity_determinant"] = parallelity_determinant(seg)
    return CrossingReport("J", u_star, float(sigma), None, True, bool(accepted),
                          dim_left, dim, dim_right, witness)


def parallelity_determinant(segment) -> float:
    """Independent degeneracy detector for the sequence (0,1),(0,2),(1,2).

    The neutral space of the full sequence exceeds the flow direction exactly
    when the relative velocity of balls 0 and 1 between the first two
    collisions is parallel to the sum of the incoming and outgoing relative
    velocities of balls 0 and 2 at the second collision.
    """
    e0, e1 = segment.events[0], segment.events[1]
    a = e0.v_rel_post
    b = e1.v_rel_pre + e1.v_rel_post
    return float(a[0] * b[1] - a[1] * b[0])


def _worked_example_det(params, curve, u):
    seg = advance_flow(params, curve.point(u), n=3)
    if seg.pairs != WORKED_EXAMPLE.entries:
        raise SequenceUnstable(f"sequence changed at u={u!r}")
    return parallelity_determinant(seg)


def determinant_root(params: SystemParams, curve: CurveSpec) -> float:
    """Zero of the parallelity determinant on the curve range (brentq)."""
    f = lambda u: _worked_example_det(params, curve, u)  # noqa: E731
    return float(brentq(f, curve.u_min, curve.u_max, xtol=1e-15, rtol=4 * np.finfo(float).eps))


def plant_j_curve(params: SystemParams, seed, half_width: float = 1e-3, samples: int = 21,
                  max_attempts: int = 200) -> CurveSpec:
    """Curve centred on a point of the worked example's parallelity locus.

    Realizes the worked-example sequence, walks along a random direction to a
    zero of the determinant (secant steps), then returns a short curve through
    that zero in a second random direction on which the determinant changes
    sign and the symbolic sequence is constant.
    """
    if (params.N, params.nu) != (3, 2):
        raise ValueError("the parallelity locus is implemented for N=3, nu=2")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        try:
            x0, _, _ = realize_sequence(params, WORKED_EXAMPLE, rng, max_attempts=20000)
        except SequenceUnrealizable:
            continue
        line = _random_direction(params, rng)
        probe = CurveSpec(x0, line[0], line[1], -0.05, 0.05, 41)
        root = _secant_root(params, probe)
        if root is None:
            continue
        x_j = probe.point(root)
        for _ in range(5):
            dq, dv = _random_direction(params, rng)
            # unwrapped base so the new curve agrees with the old one at u = 0
            curve = CurveSpec(x_j, dq, dv, -half_width, half_width, samples)
            try:
                ends = [_worked_example_det(params, curve, u) for u in curve.grid()]
            except (SequenceUnstable, BilliardError):
                continue
            if ends[0] * ends[-1] < 0 and all(
                    curve.point(u).pair_distances().min() >= 2 * params.r for u in curve.grid()):
                return curve
    raise SequenceUnrealizable("could not plant a curve across the parallelity locus")


def _random_direction(params, rng):
    dq = rng.standard_normal((params.N, params.nu))
    dv = rng.standard_normal((params.N, params.nu))
    dq -= dq.mean(axis=0)
    dv -= dv.mean(axis=0)
    s = np.sqrt(np.sum(dq**2) + np.sum(dv**2))
    return dq / s, dv / s


def _secant_root(params, curve):
    """Root of the determinant on the curve grid bracketed closest to u = 0."""
    grid = curve.grid()
    vals = []
    for u in grid:
        try:
            vals.append(_worked_example_det(params, curve, u))
        except (SequenceUnstable, BilliardError):
            vals.append(None)
    best = None
    for k in range(len(grid) - 1):
        a, b = vals[k], vals[k + 1]
        if a is None or b is None or a * b >= 0:
            continue
        try:
            root = brentq(lambda u: _worked_example_det(params, curve, u), grid[k], grid[k + 1],
                          xtol=1e-15)
        except (SequenceUnstable, BilliardError, ValueError):
            continue
        if best is None or abs(root) < abs(best):
            best = root
    return best


# ------------------------------------------------------- sequence realization

def _relabeling(N, realized, target):
    """Permutation p with p[a] the new label of old ball a, or None."""
    realized, target = list(realized), list(target)

    def extend(k, forward, backward):
        if k == len(realized):
            return forward
        (a, b), (c, d) = realized[k], target[k]
        for options in (((a, c), (b, d)), ((a, d), (b, c))):
            f, g = dict(forward), dict(backward)
            if all(f.setdefault(old, new) == new and g.setdefault(new, old) == old
                   for old, new in options):
                found = extend(k + 1, f, g)
                if found is not None:
                    return found
        return None

    forward = extend(0, {}, {})
    if forward is None:
        return None
    free_new = [k for k in range(N) if k not in forward.values()]
    return [forward[a] if a in forward else free_new.pop(0) for a in range(N)]


def realize_sequence(params: SystemParams, sequence, rng, max_attempts: int = 10000,
                     allow_phantom: bool = False):
    """Phase point whose forward flow starts with ``sequence``.

    Rejection sampling accepts a point when its collision sequence matches
    ``sequence`` up to relabeling the (identical) balls. With
    ``allow_phantom`` the prescription is instead imposed by phantom flow once
    rejection fails. Returns ``(point, segment, mode)``.
    """
    seq = sequence if isinstance(sequence, SymbolicSequence) else SymbolicSequence(tuple(sequence))
    seq.validate(params.N)
    n = len(seq)
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    if n == 0:
        x = sample_phase_point(params, rng)
        return x, advance_flow(params, x, n=0), "rejection"
    for _ in range(max_attempts):
        x = sample_phase_point(params, rng)
        seg = _sequence_at(params, x, n)
        if seg is None:
            continue
        perm = _relabeling(params.N, seg.pairs, seq.entries)
        if perm is None:
            continue
        inverse = np.argsort(perm)
        y = x.relabeled(inverse)
        seg = _sequence_at(params, y, n)
        if seg is not None and seg.pairs == seq.entries:
            return y, seg, "rejection"
    if allow_phantom:
        for _ in range(max_attempts):
            x = sample_phase_point(params, rng)
            try:
                seg = phantom_flow(params, x, seq.entries)
            except BilliardError:
                continue
            return x, seg, "phantom"
    raise SequenceUnrealizable(f"sequence {seq.to_literal()} not realized in {max_attempts} attempts")


# ------------------------------------------------------- dimension statistics

@dataclass(frozen=True)
class DimensionStats:
    sequence: SymbolicSequence
    samples: int
    histograms: tuple[dict[int, int], ...]  # one per prefix length 0..n
    delta: tuple[int, ...]
    delta_J: int | None
    mode: str
    j_points: int = 0

    def to_dict(self) -> dict:
        return {
            "sequence": self.sequence.to_literal(),
            "samples": self.samples,
            "histograms": [{str(k): v for k, v in sorted(h.items())} for h in self.histograms],
            "delta": list(self.delta),
            "delta_J": self.delta_J,
            "mode": self.mode,
            "j_points": self.j_points,
        }


def prefix_dimensions(params: SystemParams, segment) -> list[int]:
    system = build_neutrality_system(segment)
    dims = [params.d]
    for m in range(1, system.n + 1):
        dims.append(neutral_space(system.prefix(m), params.tol).dimension)
    return dims


def dimension_sample(params: SystemParams, sequence, seed, max_attempts: int = 10000,
                     allow_phantom: bool = True):
    """One realized sample: (prefix dimensions, mode). Seeded work item."""
    _, seg, mode = realize_sequence(params, sequence, np.random.default_rng(seed), max_attempts,
                                    allow_phantom)
    return prefix_dimensions(params, seg), mode


def merge_dimension_samples(params, sequence, samples, j_dims=()) -> DimensionStats:
    """Combine per-sample prefix dimensions into a :class:`DimensionStats`."""
    seq = sequence if isinstance(sequence, SymbolicSequence) else SymbolicSequence(tuple(sequence))
    if not samples:
        raise NotEnoughSamples("no samples to summarize")
    n = len(seq)
    hist = [Counter() for _ in range(n + 1)]
    modes = set()
    for dims, mode in samples:
        modes.add(mode)
        for m, d in enumerate(dims):
            hist[m][d] += 1
    delta = tuple(min(h) for h in hist)
    if any(b > a for a, b in zip(delta, delta[1:])):
        raise AssertionError(f"generic dimension increased along prefixes: {delta}")
    mode = "+".join(sorted(modes))
    delta_j = min(j_dims) if j_dims else None
    return DimensionStats(seq, len(samples), tuple(dict(h) for h in hist), delta, delta_j, mode,
                          len(j_dims))


def dimension_statistics(params: SystemParams, sequence, samples: int, seed,
                         j_curves: int = 0, max_attempts: int = 10000) -> DimensionStats:
    """Histogram of neutral-space dimensions over realizations of ``sequence``.

    ``delta`` is the minimum (generic) dimension per prefix. With ``j_curves``
    > 0 and the worked-example sequence, that many curves are planted across
    the parallelity locus and ``delta_J`` is the smallest dimension found at
    the located J-points.
    """
    if samples <= 0:
        raise NotEnoughSamples("dimension statistics need at least one sample")
    seeds = np.random.SeedSequence(seed).spawn(samples + j_curves)
    rows = [dimension_sample(params, sequence, s, max_attempts) for s in seeds[:samples]]
    j_dims = []
    for s in seeds[samples:]:
        j_dims.extend(located_j_dimensions(params, sequence, s))
    return merge_dimension_samples(params, sequence, rows, j_dims)


def located_j_dimensions(params, sequence, seed) -> list[int]:
    """Dimensions at accepted J-crossings of one planted curve (worked example only)."""
    seq = sequence if isinstance(sequence, SymbolicSequence) else SymbolicSequence(tuple(sequence))
    if seq.entries != WORKED_EXAMPLE.entries or (params.N, params.nu) != (3, 2):
        return []
    curve = plant_j_curve(params, seed)
    return [r.dim_at for r in scan_J(params, curve, 3) if r.accepted]


# ------------------------------------------------------ non-coincidence of J, K

@dataclass(frozen=True)
class KPointOutcome:
    curve_index: int
    u_star: float
    pair: tuple[int, int]
    connected: bool
    dimension: int | None
    sufficient: bool | None
    forward_pairs: tuple[tuple[int, int], ...] = ()

    def to_dict(self) -> dict:
        return {
            "curve_index": self.curve_index,
            "u_star": self.u_star,
            "pair": list(self.pair),
            "connected": self.connected,
            "dimension": self.dimension,
            "sufficient": self.sufficient,
            "forward_sequence": SymbolicSequence(self.forward_pairs).to_literal(),
        }


def k_points_on_curve(params: SystemParams, index: int, seed, n: int, half_width: float = 0.2,
                      samples: int = 129):
    """Seeded work item: accepted K-points of one random curve and their forward sufficiency.

    Returns ``(outcomes, reports)``.
    """
    try:
        curve = random_curve(params, seed, half_width, samples)
        reports = scan_K(params, curve)
    except (NoPastReflection, ValueError) as exc:
        log.debug("curve %d skipped: %s", index, exc)
        return [], []
    outcomes = []
    for rep in reports:
        if not rep.accepted:
            continue
        x_star = curve.point(rep.u_star)
        try:
            seg = advance_flow(params, x_star, n=n)
        except BilliardError as exc:
            log.debug("forward flow from K-point failed: %s", exc)
            continue
        connected = component_profile(params.N, seg.pairs)[-1] == 1
        dim = suff = None
        if connected:
            dim = neutral_space(seg, params.tol).dimension
            suff = dim == 1
        outcomes.append(KPointOutcome(index, rep.u_star, rep.pair, connected, dim, suff, seg.pairs))
    return outcomes, reports


@dataclass(frozen=True)
class NoncoincidenceReport:
    curves: int
    accepted: int
    sufficient: int
    non_sufficient: int
    disconnected: int
    excluded_crossings: int
    witnesses: tuple[KPointOutcome, ...]

    @property
    def passed(self) -> bool:
        return self.sufficient >= 1

    @property
    def sufficient_fraction(self) -> float:
        total = self.sufficient + self.non_sufficient
        return self.sufficient / total if total else float("nan")

    def to_dict(self) -> dict:
        return {
            "curves": self.curves,
            "accepted_k_points": self.accepted,
            "k_and_sufficient": self.sufficient,
            "k_and_non_sufficient": self.non_sufficient,
            "disconnected": self.disconnected,
            "excluded_crossings": self.excluded_crossings,
            "sufficient_fraction": self.sufficient_fraction,
            "passed": self.passed,
            "witnesses": [w.to_dict() for w in self.witnesses],
        }


def merge_k_points(curves: int, items, required: int) -> NoncoincidenceReport:
    """Order-independent merge of per-curve results ``[(outcomes, reports), ...]``."""
    outcomes = sorted((o for out, _ in items for o in out), key=lambda o: (o.curve_index, o.u_star))
    excluded = sum(1 for _, reps in items for r in reps if not r.accepted)
    connected = [o for o in outcomes if o.connected]
    if len(connected) < max(required, 1):
        raise NotEnoughSamples(f"only {len(connected)} accepted K-points with connected forward "
                               f"graphs, {required} required")
    suff = sum(1 for o in connected if o.sufficient)
    return NoncoincidenceReport(curves, len(connected), suff, len(connected) - suff,
                                len(outcomes) - len(connected), excluded, tuple(outcomes))


def curve_seeds(master_seed: int, count: int) -> list[np.random.SeedSequence]:
    """Per-item seeds from (master seed, item index); independent of scheduling."""
    return [np.random.SeedSequence([int(master_seed), k]) for k in range(count)]


def noncoincidence_experiment(params: SystemParams, curves: int, n: int, seed: int,
                              required: int = 50, half_width: float = 0.2,
                              samples: int = 129) -> NoncoincidenceReport:
    """Look for K-points whose forward segment is sufficient (so K is not inside J)."""
    if curves <= 0:
        raise NotEnoughSamples("empty ensemble")
    items = [k_points_on_curve(params, k, s, n, half_width, samples)
             for k, s in enumerate(curve_seeds(seed, curves))]
    return merge_k_points(curves, items, required)


__all__ = [
    "WORKED_EXAMPLE",
    "CurveSpec",
    "CrossingReport",
    "CSV_HEADER",
    "DimensionStats",
    "KPointOutcome",
    "NoncoincidenceReport",
    "random_curve",
    "scan_K",
    "scan_J",
    "j_signal",
    "parallelity_determinant",
    "determinant_root",
    "plant_j_curve",
    "realize_sequence",
    "prefix_dimensions",
    "dimension_sample",
    "merge_dimension_samples",
    "dimension_statistics",
    "located_j_dimensions",
    "k_points_on_curve",
    "merge_k_points",
    "curve_seeds",
    "noncoincidence_experiment",
]
