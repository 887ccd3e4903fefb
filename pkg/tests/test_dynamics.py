import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from hardballs.core import PhasePoint, SystemParams, sample_phase_point
from hardballs.dynamics import (
    MULTIPLE,
    TANGENTIAL,
    advance_flow,
    apply_collision,
    backward_first_reflection,
    flow_state,
    phantom_flow,
    time_of_impact,
)
from hardballs.errors import (
    InvalidPair,
    NoCollision,
    NoPastReflection,
    NotAtContact,
    PrescriptionStalled,
    SingularEvent,
)

from conftest import normalized

C = 1 / np.sqrt(2)


def brute_force_impact(dq, dv, r, reach=6):
    """Earliest contact time over a (2*reach+1)**nu block of lattice images."""
    best = np.inf
    a = dv @ dv
    for k in itertools.product(range(-reach, reach + 1), repeat=len(dq)):
        d = dq + np.array(k)
        b = d @ dv
        disc = b * b - a * (d @ d - 4 * r * r)
        if b < 0 and disc > 0:
            best = min(best, (-b - np.sqrt(disc)) / a)
    return best


class TestTimeOfImpact:
    def test_head_on(self):
        params = SystemParams(2, 2, 0.05)
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5]], [[C, 0], [-C, 0]])
        t, n = time_of_impact(params, x, (0, 1))
        assert t == pytest.approx(0.3 / (2 * C), abs=1e-14)
        np.testing.assert_allclose(n, [-1, 0], atol=1e-14)

    def test_across_the_boundary(self):
        params = SystemParams(2, 2, 0.03)
        x = PhasePoint([[0.05, 0.5], [0.95, 0.5]], [[-C, 0], [C, 0]])
        t, n = time_of_impact(params, x, (0, 1))
        assert t == pytest.approx(0.04 / (2 * C), abs=1e-14)
        np.testing.assert_allclose(n, [1, 0], atol=1e-12)

    def test_parallel_velocities_never_meet(self):
        params = SystemParams(2, 2, 0.05)
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5]], [[C, 0], [C, 0]])
        assert time_of_impact(params, x, (0, 1)) is None

    def test_invalid_pair(self, p3):
        x = sample_phase_point(p3, 0)
        for pair in [(0, 0), (0, 3), (-1, 1)]:
            with pytest.raises(InvalidPair):
                time_of_impact(p3, x, pair)

    @given(st.integers(0, 10**6))
    def test_matches_brute_force_images(self, seed):
        params = SystemParams(2, 2, 0.1)
        x = sample_phase_point(params, seed)
        dq = x.positions[1] - x.positions[0]
        dv = x.velocities[1] - x.velocities[0]
        expected = brute_force_impact(dq, dv, params.r)
        got = time_of_impact(params, x, (0, 1), time_cap=3.0)
        if expected > 3.0:
            assert got is None or got[0] >= 3.0 - 1e-9
        else:
            assert got[0] == pytest.approx(expected, rel=1e-10, abs=1e-12)

    def test_slow_long_flight_across_many_cells(self):
        params = SystemParams(2, 2, 0.02)
        # slope 1/7: the relative path winds seven times before closing in
        v = np.array([1.0, 1 / 7]) * 0.01
        x = PhasePoint([[0.0, 0.0], [0.5, 0.5]], [v / 2, -v / 2])
        dq = x.positions[1] - x.positions[0]
        expected = brute_force_impact(dq, -v, params.r, reach=12)
        got = time_of_impact(params, x, (0, 1), time_cap=1e4)
        assert got[0] == pytest.approx(expected, rel=1e-10)


class TestCollision:
    def test_two_ball_bounce(self):
        r = 0.05
        params = SystemParams(2, 2, r)
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5]], [[C, 0], [-C, 0]])
        seg = advance_flow(params, x, n=3)
        gaps = np.diff((0.0,) + seg.times)
        np.testing.assert_allclose(gaps[1:], (1 - 4 * r) / (2 * C), rtol=1e-12)
        assert seg.pairs == ((0, 1),) * 3

    def test_exchange_of_normal_components(self):
        params = SystemParams(2, 2, 0.1)
        x = PhasePoint([[0.3, 0.5], [0.5, 0.5]], [[0.6, 0.1], [-0.6, -0.1]])
        y = apply_collision(params, x, (0, 1), [-1.0, 0.0])
        np.testing.assert_allclose(y.velocities, [[-0.6, 0.1], [0.6, -0.1]], atol=1e-15)

    def test_not_at_contact(self):
        params = SystemParams(2, 2, 0.1)
        x = PhasePoint([[0.3, 0.5], [0.6, 0.5]], [[C, 0], [-C, 0]])
        with pytest.raises(NotAtContact):
            apply_collision(params, x, (0, 1), [-1.0, 0.0])

    def test_tangential_is_singular(self):
        r = 0.05
        params = SystemParams(2, 2, r)
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5 + 2 * r]], [[C, 0], [-C, 0]])
        with pytest.raises(SingularEvent) as info:
            advance_flow(params, x, n=1)
        assert info.value.kind == TANGENTIAL

    def test_multiple_is_singular(self):
        params = SystemParams(3, 2, 0.05)
        v = normalized([[C, 0], [0, 0], [0, -C]])
        x = PhasePoint([[0.2, 0.5], [0.5, 0.5], [0.5, 0.8]], v)
        with pytest.raises(SingularEvent) as info:
            advance_flow(params, x, n=1)
        err = info.value
        assert err.kind == MULTIPLE
        assert {e.pair for e in err.events} == {(0, 1), (1, 2)}
        assert len(err.history) == 0


class TestAdvanceFlow:
    def test_needs_exactly_one_stop(self, p3):
        x = sample_phase_point(p3, 0)
        with pytest.raises(ValueError):
            advance_flow(p3, x)
        with pytest.raises(ValueError):
            advance_flow(p3, x, T=1.0, n=2)
        with pytest.raises(ValueError):
            advance_flow(p3, x, T=-1.0)

    def test_conservation(self, p3):
        x = sample_phase_point(p3, 7)
        seg = advance_flow(p3, x, n=2000)
        y = seg.final
        assert abs(y.energy() - x.energy()) < 1e-12
        assert np.abs(y.momentum() - x.momentum()).max() < 1e-12
        assert y.invariant_violations(p3) == []
        assert all(e.normal_speed < 0 for e in seg.events)

    def test_time_stop_lands_between_events(self, p3):
        x = sample_phase_point(p3, 3)
        seg = advance_flow(p3, x, T=2.5)
        assert seg.horizon == 2.5
        assert all(t <= 2.5 for t in seg.times)

    def test_composition(self, p3):
        x = sample_phase_point(p3, 11)
        whole = advance_flow(p3, x, T=3.0)
        first = advance_flow(p3, x, T=1.3)
        second = advance_flow(p3, first.final, T=1.7)
        assert first.pairs + second.pairs == whole.pairs
        np.testing.assert_allclose(second.final.positions, whole.final.positions, atol=1e-10)

    def test_replay_and_state_at(self, p3):
        x = sample_phase_point(p3, 5)
        seg = advance_flow(p3, x, n=20)
        y = seg.replay()
        np.testing.assert_allclose(y.velocities, seg.final.velocities, atol=1e-12)
        np.testing.assert_allclose(y.positions, seg.final.positions, atol=1e-10)
        mid = 0.5 * (seg.times[3] + seg.times[4])
        s = seg.state_at(mid)
        assert np.array_equal(s.velocities, seg.per_event_states[3].velocities)
        with pytest.raises(ValueError):
            seg.state_at(seg.horizon + 1)

    def test_short_reversibility(self):
        params = SystemParams(3, 2, 0.1)
        for seed in range(10):
            x = sample_phase_point(params, seed)
            seg = advance_flow(params, x, n=8)
            T = seg.horizon + 0.01
            there = advance_flow(params, x, T=T).final
            back = advance_flow(params, there.reversed(), T=T).final.reversed()
            err = np.abs((back.positions - x.positions + 0.5) % 1 - 0.5).max()
            assert err <= 3e-9
            assert np.abs(back.velocities - x.velocities).max() <= 3e-9

    def test_no_collision_within_cap(self):
        params = SystemParams(2, 2, 0.05)
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5]], [[C, 0], [C, 0]])
        with pytest.raises(NoCollision):
            advance_flow(params, x, n=1, time_cap=10.0)
        seg = advance_flow(params, x, T=10.0)
        assert seg.events == ()

    def test_three_dimensions(self):
        params = SystemParams(4, 3, 0.1)
        x = sample_phase_point(params, 2)
        seg = advance_flow(params, x, n=200)
        assert abs(seg.final.energy() - x.energy()) < 1e-12
        assert seg.final.invariant_violations(params) == []


class TestPhantom:
    def test_matches_regular_flow(self, p3):
        for seed in range(10):
            x = sample_phase_point(p3, seed)
            seg = advance_flow(p3, x, n=6)
            ghost = phantom_flow(p3, x, seg.pairs)
            assert ghost.pairs == seg.pairs
            assert np.array_equal(ghost.final.positions, seg.final.positions)
            assert np.array_equal(ghost.final.velocities, seg.final.velocities)
            assert ghost.mode == "phantom"

    def test_passes_through_other_pairs(self, p3):
        x = sample_phase_point(p3, 1)
        seg = phantom_flow(p3, x, [(0, 1), (0, 1), (0, 1)])
        assert seg.pairs == ((0, 1),) * 3

    def test_empty_prescription_is_free_flight(self, p3):
        x = sample_phase_point(p3, 1)
        seg = phantom_flow(p3, x, [], time_cap=2.0)
        assert seg.events == ()
        np.testing.assert_allclose(seg.final.positions, flow_state(x, 2.0).positions, atol=1e-15)

    def test_stalled(self):
        params = SystemParams(3, 2, 0.05)
        v = normalized([[C, 0], [C, 0], [-C, 0]])
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5], [0.5, 0.1]], v)
        with pytest.raises(PrescriptionStalled) as info:
            phantom_flow(params, x, [(0, 1)], time_cap=5.0)
        assert info.value.pair == (0, 1)
        assert info.value.consumed == 0


class TestBackwardReflection:
    def test_finds_previous_event(self, p3):
        x = sample_phase_point(p3, 9)
        seg = advance_flow(p3, x, n=4)
        mid = 0.5 * (seg.times[2] + seg.times[3])
        tau, event = backward_first_reflection(p3, seg.state_at(mid))
        assert tau == pytest.approx(seg.times[2] - mid, abs=1e-12)
        assert event.pair == seg.pairs[2]

    def test_none_in_the_past(self):
        params = SystemParams(2, 2, 0.05)
        x = PhasePoint([[0.3, 0.5], [0.7, 0.5]], [[C, 0], [C, 0]])
        with pytest.raises(NoPastReflection):
            backward_first_reflection(params, x, time_cap=5.0)
