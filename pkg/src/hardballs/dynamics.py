"""Event-driven flow of N equal hard balls on the unit torus.

Impact times are recomputed for all pairs after every collision. Free flight
is searched window by window: within a window of length ``2 / |dv|`` the
relative displacement moves by at most two cells, and the 3**nu lattice
images around the window midpoint contain every image that can be hit. This
keeps long free flights correct without a fixed image budget.

Tangential (grazing) and multiple collisions are singular; regular flow
refuses to cross them and raises :class:`SingularEvent` instead.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .core import PhasePoint, SystemParams, dot, minimal_image, wrap
from .errors import (
    InvalidPair,
    NoCollision,
    NoPastReflection,
    NotAtContact,
    PrescriptionStalled,
    SingularEvent,
)

DEFAULT_TIME_CAP = 1e3
REGULAR, TANGENTIAL, MULTIPLE = "regular", "tangential", "multiple"

# roundoff allowance for pairs that start exactly at contact and approach
_CONTACT_SLACK = 1e-12


@dataclass(frozen=True)
class CollisionEvent:
    time: float
    pair: tuple[int, int]
    normal: np.ndarray
    v_rel_pre: np.ndarray
    v_rel_post: np.ndarray
    classification: str = REGULAR

    @property
    def normal_speed(self) -> float:
        """Signed normal component of the incoming relative velocity (< 0 when approaching)."""
        return float(dot(self.v_rel_pre, self.normal))

    def to_dict(self) -> dict:
        return {
            "time": self.time,
            "pair": list(self.pair),
            "normal": self.normal.tolist(),
            "v_rel_pre": self.v_rel_pre.tolist(),
            "v_rel_post": self.v_rel_post.tolist(),
            "classification": self.classification,
        }


@dataclass(frozen=True)
class TrajectorySegment:
    initial: PhasePoint
    horizon: float
    events: tuple[CollisionEvent, ...]
    final: PhasePoint
    per_event_states: tuple[PhasePoint, ...]
    mode: str = "regular"

    @property
    def pairs(self) -> tuple[tuple[int, int], ...]:
        return tuple(e.pair for e in self.events)

    @property
    def times(self) -> tuple[float, ...]:
        return tuple(e.time for e in self.events)

    def state_at(self, t: float) -> PhasePoint:
        """Phase point at elapsed time ``t`` (post-collision at event instants)."""
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.times, t, side="right"))
        if k == 0:
            start, t0 = self.initial, 0.0
        else:
            start, t0 = self.per_event_states[k - 1], self.events[k - 1].time
        return PhasePoint(start.positions + (t - t0) * start.velocities, start.velocities)

    def replay(self) -> PhasePoint:
        """Rebuild the final point from the initial one using only the event log."""
        q = self.initial.positions.copy()
        v = self.initial.velocities.copy()
        t0 = 0.0
        for e in self.events:
            q = wrap(q + (e.time - t0) * v)
            i, j = e.pair
            c = dot(v[i] - v[j], e.normal)
            v[i] -= c * e.normal
            v[j] += c * e.normal
            t0 = e.time
        q = wrap(q + (self.horizon - t0) * v)
        return PhasePoint(q, v)

    def to_dict(self) -> dict:
        return {
            "initial": self.initial.to_dict(),
            "horizon": self.horizon,
            "events": [e.to_dict() for e in self.events],
            "final": self.final.to_dict(),
            "mode": self.mode,
        }


# Window length in units of 1/|dv|. Inside one window the relative
# displacement stays within distance 1 of the window midpoint, so a lattice
# point it can touch is closer than 2r + 1 + 1/2 < 2 (sup norm) to the
# midpoint's nearest lattice point, i.e. one of its 3**nu neighbours.
_WINDOW = 2.0


@lru_cache(maxsize=None)
def _offsets(nu: int) -> np.ndarray:
    return np.array(list(itertools.product((-1.0, 0.0, 1.0), repeat=nu)))


def _image_hits(d, dv, a, r, graze):
    """Earliest contact time of ``d + t dv`` with the sphere |x| = 2r.

    ``d`` has shape (P, M, nu), ``dv`` (P, 1, nu) and ``a = |dv|^2`` (P, 1).
    Returns times with ``inf`` where there is no future contact.
    """
    b = dot(d, dv)
    tc = -b / a
    perp = d + tc[..., None] * dv
    rho = np.sqrt(dot(perp, perp))
    margin = 2 * r - rho
    hit = margin > graze
    grazing = np.abs(margin) <= graze
    depth = np.sqrt(np.where(hit, (2 * r - rho) * (2 * r + rho), 0.0) / a)
    t = tc - depth
    ok = (hit | grazing) & (t >= -_CONTACT_SLACK)
    return np.where(ok, np.maximum(t, 0.0), np.inf)


def _impact_times(dq0, dv, r, graze, t_cap, settle=0.0):
    """First contact time per pair over all periodic images, up to ``t_cap``.

    ``dq0`` is the minimal-image relative position q_i - q_j, shape (P, nu).
    Windows are scanned in lockstep until the earliest time found, plus
    ``settle``, is covered for every pair.
    """
    P, nu = dq0.shape
    times = np.full(P, np.inf)
    a = dot(dv, dv)
    moving = a > 0
    if not moving.any():
        return times
    h = _WINDOW / np.sqrt(a[moving].max())
    dq0m, dvm, am = dq0[moving], dv[moving][:, None, :], a[moving][:, None]
    best = np.full(dq0m.shape[0], np.inf)
    offsets = _offsets(nu)[None]
    w = 0
    while w * h <= t_cap:
        mid = dq0m + ((w + 0.5) * h) * dvm[:, 0, :]
        lattice = np.floor(mid + 0.5)[:, None, :] + offsets
        t = _image_hits(dq0m[:, None, :] - lattice, dvm, am, r, graze).min(axis=1)
        best = np.minimum(best, t)
        w += 1
        if best.min() + settle <= w * h:
            break
    best[best > t_cap] = np.inf
    times[moving] = best
    return times


def _relative(q, v, pairs):
    i = np.array([p[0] for p in pairs], dtype=int)
    j = np.array([p[1] for p in pairs], dtype=int)
    return minimal_image(q[j], q[i]), v[i] - v[j]


def _check_pair(params: SystemParams, pair):
    i, j = pair
    if not (0 <= i < params.N and 0 <= j < params.N) or i == j:
        raise InvalidPair(f"pair {pair} invalid for N={params.N}")
    return (min(i, j), max(i, j))


def time_of_impact(params: SystemParams, state: PhasePoint, pair, time_cap=DEFAULT_TIME_CAP):
    """Smallest t >= 0 at which the pair touches, with the contact normal (j -> i).

    Returns ``None`` if the pair does not meet before ``time_cap``.
    """
    i, j = _check_pair(params, pair)
    dq, dv = _relative(state.positions, state.velocities, [(i, j)])
    t = _impact_times(dq, dv, params.r, params.tol.graze_margin, time_cap)[0]
    if not np.isfinite(t):
        return None
    q = wrap(state.positions + t * state.velocities)
    d = minimal_image(q[j], q[i])
    return float(t), d / np.sqrt(dot(d, d))


def apply_collision(params: SystemParams, state: PhasePoint, pair, normal) -> PhasePoint:
    """Equal-mass elastic reflection: exchange of normal velocity components."""
    i, j = _check_pair(params, pair)
    normal = np.asarray(normal, dtype=float)
    d = minimal_image(state.positions[j], state.positions[i])
    if np.linalg.norm(d - 2 * params.r * normal) > 1e-9:
        raise NotAtContact(f"pair {pair} separation {d} is not 2r along {normal}")
    v = state.velocities.copy()
    c = dot(v[i] - v[j], normal)
    v[i] -= c * normal
    v[j] += c * normal
    return PhasePoint(state.positions, v)


def _resolve(params, q, v, pair, t, time):
    """Advance free flight by ``t``, put the pair at exact contact and build the event."""
    i, j = pair
    q = wrap(q + t * v)
    d = minimal_image(q[j], q[i])
    length = np.sqrt(dot(d, d))
    n = d / length
    dvel = v[i] - v[j]
    s = dot(dvel, n)
    kind = TANGENTIAL if abs(s) < params.tol.tangency_eps else REGULAR
    event = CollisionEvent(time, pair, n, dvel, dvel - 2 * s * n, kind)
    return q, n, event, length


def _reflect(params, q, v, pair, n, length):
    i, j = pair
    shift = 0.5 * (2 * params.r - length) * n
    q = q.copy()
    q[i] += shift
    q[j] -= shift
    q = wrap(q)
    v = v.copy()
    c = dot(v[i] - v[j], n)
    v[i] -= c * n
    v[j] += c * n
    return q, v


def _earliest(params, q, v, candidates, t_cap):
    dq, dv = _relative(q, v, candidates)
    times = _impact_times(dq, dv, params.r, params.tol.graze_margin, t_cap,
                          settle=params.tol.coincidence_eps)
    order = np.argsort(times, kind="stable")
    return times, order


def _run(params, x, candidates_for, stop_time, max_events, time_cap, mode, stall):
    q = x.positions.copy()
    v = x.velocities.copy()
    now = 0.0
    events, states = [], []
    while max_events is None or len(events) < max_events:
        candidates = candidates_for(len(events))
        if candidates is None:
            break
        remaining = (stop_time - now) if stop_time is not None else time_cap
        times, order = _earliest(params, q, v, candidates, remaining)
        t1 = times[order[0]]
        if not np.isfinite(t1):
            if stop_time is None:
                stall(len(events), candidates)
            break
        if len(order) > 1 and times[order[1]] - t1 < params.tol.coincidence_eps:
            clash = []
            for k in order[:2]:
                _, _, e, _ = _resolve(params, q, v, candidates[k], times[k], now + times[k])
                clash.append(CollisionEvent(e.time, e.pair, e.normal, e.v_rel_pre, e.v_rel_post, MULTIPLE))
            state = PhasePoint(wrap(q + t1 * v), v)
            raise SingularEvent(MULTIPLE, clash, state, events, now + t1)
        pair = candidates[order[0]]
        qc, n, event, length = _resolve(params, q, v, pair, t1, now + t1)
        if event.classification == TANGENTIAL:
            raise SingularEvent(TANGENTIAL, [event], PhasePoint(qc, v), events, now + t1)
        q, v = _reflect(params, qc, v, pair, n, length)
        now += t1
        events.append(event)
        states.append(PhasePoint(q, v))
    if stop_time is not None:
        q = wrap(q + (stop_time - now) * v)
        now = stop_time
    elif max_events is None:
        q = wrap(q + time_cap * v)
        now = time_cap
    return TrajectorySegment(x, float(now), tuple(events), PhasePoint(q, v), tuple(states), mode)


def advance_flow(params: SystemParams, x: PhasePoint, T=None, n=None, time_cap=DEFAULT_TIME_CAP):
    """Flow ``x`` for elapsed time ``T`` or until ``n`` collisions have occurred.

    With ``n`` the final point is the post-collision state of the n-th event.
    Raises :class:`SingularEvent` at tangential or coincident collisions and
    :class:`NoCollision` if a count stop cannot be reached within ``time_cap``.
    """
    if (T is None) == (n is None):
        raise ValueError("give exactly one of T or n")
    if T is not None and not T > 0:
        raise ValueError(f"T must be positive, got {T}")
    pairs = params.pairs

    def stall(count, _):
        raise NoCollision(f"no collision within {time_cap} after {count} events")

    return _run(params, x, lambda k: pairs, T, n, time_cap, "regular", stall)


def phantom_flow(params: SystemParams, x: PhasePoint, prescribed, time_cap=DEFAULT_TIME_CAP):
    """Flow in which only the next prescribed pair interacts; all others pass through.

    Each prescribed collision must occur within ``time_cap`` of the previous
    one. An empty prescription yields free flight for ``time_cap``.
    """
    prescribed = [_check_pair(params, p) for p in prescribed]
    if not prescribed:
        return _run(params, x, lambda k: None, None, None, time_cap, "phantom", None)

    def candidates_for(k):
        return [prescribed[k]] if k < len(prescribed) else None

    def stall(count, candidates):
        raise PrescriptionStalled(candidates[0], count)

    return _run(params, x, candidates_for, None, len(prescribed), time_cap, "phantom", stall)


def backward_first_reflection(params: SystemParams, x: PhasePoint, time_cap=DEFAULT_TIME_CAP):
    """First reflection in the past of ``x``.

    Returns ``(tau, event)`` with ``tau < 0``. The event is expressed in the
    time-reversed flow (velocities negated, ``event.time = -tau``); its
    classification is reported rather than raised.
    """
    back = x.reversed()
    q, v = back.positions, back.velocities
    pairs = params.pairs
    times, order = _earliest(params, q, v, pairs, time_cap)
    t1 = times[order[0]]
    if not np.isfinite(t1):
        raise NoPastReflection(f"no collision within {time_cap} in the past")
    _, _, event, _ = _resolve(params, q, v, pairs[order[0]], t1, t1)
    if len(order) > 1 and times[order[1]] - t1 < params.tol.coincidence_eps:
        event = CollisionEvent(event.time, event.pair, event.normal, event.v_rel_pre,
                               event.v_rel_post, MULTIPLE)
    return -float(t1), event


def flow_state(x: PhasePoint, t: float) -> PhasePoint:
    """Free flight by ``t`` (no collision handling)."""
    return PhasePoint(x.positions + t * x.velocities, x.velocities)
