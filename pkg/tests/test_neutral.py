import numpy as np
import pytest

from hardballs.core import PhasePoint, SystemParams, sample_phase_point
from hardballs.dynamics import TANGENTIAL, CollisionEvent, TrajectorySegment, advance_flow
from hardballs.errors import FragileSegment, NoRelation, NotConnected, SingularSegment
from hardballs.neutral import (
    advance_vectors,
    assemble,
    build_neutrality_system,
    cpf_eliminate,
    displacement_coefficients,
    fd_jacobian_kernel,
    is_sufficient,
    neutral_space,
)
from hardballs.probe import WORKED_EXAMPLE, realize_sequence

C = 1 / np.sqrt(2)


def worked_system(seed=0):
    params = SystemParams(3, 2, 0.1)
    _, seg, _ = realize_sequence(params, WORKED_EXAMPLE, np.random.default_rng(seed))
    return build_neutrality_system(seg)


def perturbation_defect(params, x, n, dq, alpha, eps=1e-7):
    """Largest first-order mismatch when the initial positions move by eps*dq.

    Along a neutral direction collision k is advanced by eps*alpha_k and the
    outgoing velocities do not move at first order.
    """
    base = advance_flow(params, x, n=n)
    moved = advance_flow(params, PhasePoint(x.positions + eps * dq, x.velocities), n=n)
    assert moved.pairs == base.pairs
    shift = (np.array(moved.times) - np.array(base.times)) / eps
    dv = (moved.final.velocities - base.final.velocities) / eps
    return max(np.abs(shift + alpha).max(), np.abs(dv).max())


class TestSystem:
    def test_single_collision_by_hand(self):
        dv_pre = np.array([[2 * C, 0.0]])
        dv_post = -dv_pre
        v0 = np.array([[C, 0.0], [-C, 0.0]])
        system = assemble(2, 2, [(0, 1)], dv_pre, dv_post, v0)
        expected = np.array([
            [1, 0, 1, 0, 0],
            [0, 1, 0, 1, 0],
            [1, 0, -1, 0, -2 * C],
            [0, 1, 0, -1, 0],
        ])
        np.testing.assert_allclose(system.matrix, expected, atol=1e-15)
        res = neutral_space(system)
        assert res.dimension == 1
        w = res.basis[0] / res.basis[0][-1]
        np.testing.assert_allclose(w, system.flow_vector(), atol=1e-14)

    def test_flow_vector_in_kernel(self, p3):
        for seed in range(10):
            seg = advance_flow(p3, sample_phase_point(p3, seed), n=12)
            system = build_neutrality_system(seg)
            assert np.abs(system.matrix @ system.flow_vector()).max() < 1e-12

    def test_singular_segment_refused(self, p3):
        x = sample_phase_point(p3, 0)
        seg = advance_flow(p3, x, n=1)
        e = seg.events[0]
        bad = CollisionEvent(e.time, e.pair, e.normal, e.v_rel_pre, e.v_rel_post, TANGENTIAL)
        broken = TrajectorySegment(x, seg.horizon, (bad,), seg.final, seg.per_event_states)
        with pytest.raises(SingularSegment):
            build_neutrality_system(broken)

    def test_empty_segment_has_full_dimension(self, p3):
        x = sample_phase_point(p3, 0)
        seg = advance_flow(p3, x, T=1e-6)
        assert seg.events == ()
        assert neutral_space(seg).dimension == p3.d


class TestNeutralSpace:
    @pytest.mark.parametrize("seed", range(8))
    def test_basis_is_neutral_under_perturbation(self, seed):
        params = SystemParams(3, 2, 0.1)
        x = sample_phase_point(params, seed)
        for n in (1, 2, 6):
            seg = advance_flow(params, x, n=n)
            res = neutral_space(seg)
            for w in res.basis:
                dq = w[:params.N * params.nu].reshape(params.N, params.nu)
                alpha = w[params.N * params.nu:]
                assert perturbation_defect(params, x, n, dq, alpha) < 1e-4

    def test_dimension_non_increasing_in_prefix(self, p3):
        seg = advance_flow(p3, sample_phase_point(p3, 4), n=10)
        system = build_neutrality_system(seg)
        dims = [neutral_space(system.prefix(m)).dimension for m in range(11)]
        assert dims[0] == p3.d
        assert all(b <= a for a, b in zip(dims, dims[1:]))
        assert dims[-1] >= 1

    def test_sufficiency_and_connectivity(self, p3):
        seg = advance_flow(p3, sample_phase_point(p3, 2), n=12)
        assert is_sufficient(seg)
        system = build_neutrality_system(seg)
        with pytest.raises(NotConnected):
            is_sufficient(system.prefix(1))

    def test_advance_map_is_injective(self, p3):
        seg = advance_flow(p3, sample_phase_point(p3, 6), n=4)
        res = neutral_space(seg)
        adv, cert = advance_vectors(res)
        assert cert.holds and cert.rank == res.dimension
        assert adv.shape == (res.dimension, 4)


class TestWorkedExample:
    def test_dimension_profile(self):
        system = worked_system()
        assert [neutral_space(system.prefix(m)).dimension for m in range(4)] == [4, 3, 2, 1]

    def test_relation_coefficients(self):
        for seed in range(5):
            system = worked_system(seed)
            rel = cpf_eliminate(system, 2)
            np.testing.assert_allclose(rel.coefficients, [[0, -1], [0.5, 0.5]], atol=1e-10)
            assert rel.elimination_residual < 1e-12
            assert rel.decomposition_residual < 1e-12
            for w in neutral_space(system).advance_matrix:
                assert rel.residual(w) < 1e-12

    def test_essential_edges_have_no_relation(self):
        with pytest.raises(NoRelation):
            cpf_eliminate(worked_system(), 1)

    def test_displacements_after_first_collision(self):
        c = displacement_coefficients(worked_system(), 2, 1)
        third = 1 / 3
        expected = [[[0, third], [third, 0]], [[0, -2 * third], [third, 0]], [[0, third], [-2 * third, 0]]]
        np.testing.assert_allclose(c, expected, atol=1e-12)


class TestFiniteDifferenceOracle:
    def test_no_collisions(self, p3):
        assert fd_jacobian_kernel(p3, sample_phase_point(p3, 0), 0).dimension == p3.d

    def test_agrees_with_neutral_space(self):
        params = SystemParams(3, 2, 0.2)
        checked = 0
        for seed in range(40):
            x = sample_phase_point(params, seed)
            n = 1 + seed % 5
            try:
                fd = fd_jacobian_kernel(params, x, n)
            except FragileSegment:
                continue
            checked += 1
            assert fd.dimension == neutral_space(advance_flow(params, x, n=n)).dimension
        assert checked >= 20

    def test_fd_kernel_contains_neutral_directions(self):
        params = SystemParams(2, 2, 0.2)
        x = sample_phase_point(params, 1)
        fd = fd_jacobian_kernel(params, x, 1)
        res = neutral_space(advance_flow(params, x, n=1))
        # both subspaces are one-dimensional and spanned by the same dq
        a = fd.basis[0] / np.linalg.norm(fd.basis[0])
        b = res.basis_q[0] / np.linalg.norm(res.basis_q[0])
        assert abs(abs(a @ b) - 1) < 1e-6


class TestInvariants:
    def test_updates_conserve_momentum(self, p3):
        system = build_neutrality_system(advance_flow(p3, sample_phase_point(p3, 1), n=10))
        assert np.abs(system.updates().sum(axis=1)).max() < 1e-12

    @pytest.mark.parametrize("seed", range(5))
    def test_dimension_survives_time_reversal(self, p3, seed):
        x = sample_phase_point(p3, seed)
        n = 2 + seed % 3
        ref = advance_flow(p3, x, n=n + 1)
        T = 0.5 * (ref.times[n - 1] + ref.times[n])
        forward = advance_flow(p3, x, T=T)
        backward = advance_flow(p3, forward.final.reversed(), T=T)
        assert backward.pairs == forward.pairs[::-1]
        assert neutral_space(backward).dimension == neutral_space(forward).dimension

    def test_step_halving_is_second_order(self):
        from hardballs.neutral import fd_jacobian

        params = SystemParams(3, 2, 0.2)
        x = sample_phase_point(params, 2)
        j1 = fd_jacobian(params, x, 2, 1e-5)
        j2 = fd_jacobian(params, x, 2, 5e-6)
        j4 = fd_jacobian(params, x, 2, 2.5e-6)
        # successive differences shrink by about 4 when the step halves
        ratio = np.abs(j1 - j2).max() / np.abs(j2 - j4).max()
        assert 2.5 < ratio < 6
