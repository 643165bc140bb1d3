import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from imsmc.plant import (
    DisturbanceSchedule,
    Plant,
    PlantPartitionError,
    step,
    to_regular_form,
)

from conftest import REF_A, REF_B, REF_D, REF_E


def ref_plant(delta=0.8, disturbance=DisturbanceSchedule()):
    return Plant(a_tilde=REF_A, b_tilde=REF_B, d=REF_D, e=REF_E,
                 delta=np.array([[delta]]), disturbance=disturbance)


class TestRegularForm:
    def test_ref_plant_already_regular(self):
        rf = to_regular_form(ref_plant())
        # B~1 = 0, so T_c = I and the matrices pass through unchanged
        assert np.allclose(rf.t_c, np.eye(3))
        assert np.allclose(rf.a11, [[0.1012, 0.8075], [-0.0529, 0.0944]])
        assert np.allclose(rf.a12, [[1.7837], [-0.0396]])
        assert np.allclose(rf.b1, [[0.1]])

    def test_zero_block_exact(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            a = rng.standard_normal((4, 4))
            b = rng.standard_normal((4, 2))
            plant = Plant(a_tilde=a, b_tilde=b, d=np.zeros((4, 1)),
                          e=np.zeros((1, 4)), delta=np.zeros((1, 1)))
            try:
                rf = to_regular_form(plant)
            except PlantPartitionError:
                continue
            assert np.all(rf.b[:2, :] == 0.0)
            # closed form T_c
            b2 = b[2:, :]
            t_expect = np.eye(4)
            t_expect[:2, 2:] = -b[:2, :] @ np.linalg.inv(b2)
            assert np.allclose(rf.t_c, t_expect)

    def test_square_input_matrix_degenerate(self):
        plant = Plant(a_tilde=np.diag([0.5, 0.3]), b_tilde=np.eye(2),
                      d=np.zeros((2, 1)), e=np.zeros((1, 2)),
                      delta=np.zeros((1, 1)))
        rf = to_regular_form(plant)
        assert rf.n_red == 0
        assert rf.a11.shape == (0, 0)
        assert np.allclose(rf.t_c, np.eye(2))

    def test_round_trip_tight(self):
        rf = to_regular_form(ref_plant())
        assert np.abs(np.linalg.inv(rf.t_c) @ rf.t_c - np.eye(3)).max() < 1e-12

    def test_singular_bottom_block_rejected(self):
        plant = Plant(a_tilde=REF_A, b_tilde=np.array([[0.1], [0.0], [0.0]]),
                      d=REF_D, e=REF_E, delta=np.array([[0.0]]))
        with pytest.raises(PlantPartitionError, match="not partitionable"):
            to_regular_form(plant)

    def test_rank_deficient_input_rejected(self):
        plant = Plant(a_tilde=np.eye(3), b_tilde=np.zeros((3, 1)),
                      d=REF_D, e=REF_E, delta=np.array([[0.0]]))
        with pytest.raises(PlantPartitionError):
            to_regular_form(plant)

    def test_uncertainty_partition_reassembles(self):
        rf = to_regular_form(ref_plant(0.8))
        da = rf.delta_a(np.array([[0.8]]))
        m = rf.n_red
        reassembled = np.block([
            [rf.d_bar1 @ np.array([[0.8]]) @ rf.e_bar1, rf.d_bar1 @ np.array([[0.8]]) @ rf.e_bar2],
            [rf.d_bar2 @ np.array([[0.8]]) @ rf.e_bar1, rf.d_bar2 @ np.array([[0.8]]) @ rf.e_bar2],
        ])
        assert np.allclose(da, reassembled)


class TestStep:
    def test_zero_fixed_point(self):
        plant = ref_plant()
        rf = to_regular_form(plant)
        assert np.all(step(rf, plant, np.zeros(3), np.zeros(1), 0) == 0.0)

    def test_matches_direct_arithmetic(self):
        plant = ref_plant(0.8)
        rf = to_regular_form(plant)
        x = np.array([-1.0, 1.0, -5.0])
        expected = (REF_A + REF_D @ np.array([[0.8]]) @ REF_E) @ x
        got = step(rf, plant, x, np.zeros(1), 0)
        assert np.allclose(got, expected, atol=1e-12)

    def test_disturbance_window(self):
        sched = DisturbanceSchedule(k_on=50, k_off=95, vector=np.array([0.0, 0.0, 1.0]))
        plant = ref_plant(0.8, sched)
        rf = to_regular_form(plant)
        x = np.array([0.5, -0.2, 1.0])
        u = np.array([0.3])
        inside = step(rf, plant, x, u, 50)
        outside = step(rf, plant, x, u, 49)
        assert np.allclose(inside - outside, rf.t_c @ [0.0, 0.0, 1.0])
        assert np.allclose(step(rf, plant, x, u, 96), outside)

    def test_disturbance_table(self):
        sched = DisturbanceSchedule(table={3: np.array([1.0, 0.0, 0.0])})
        plant = ref_plant(0.0, sched)
        rf = to_regular_form(plant)
        base = step(rf, plant, np.zeros(3), np.zeros(1), 0)
        hit = step(rf, plant, np.zeros(3), np.zeros(1), 3)
        assert np.allclose(hit - base, rf.t_c @ [1.0, 0.0, 0.0])

    @given(st.integers(0, 2 ** 31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_superposition(self, seed):
        rng = np.random.default_rng(seed)
        plant = ref_plant(rng.uniform(-1, 1))
        rf = to_regular_form(plant)
        x1, x2 = rng.standard_normal((2, 3))
        u1, u2 = rng.standard_normal((2, 1))
        a, b = rng.standard_normal(2)
        lhs = step(rf, plant, a * x1 + b * x2, a * u1 + b * u2, 0)
        rhs = a * step(rf, plant, x1, u1, 0) + b * step(rf, plant, x2, u2, 0)
        assert np.abs(lhs - rhs).max() < 1e-10


def test_in_spec_flag():
    assert ref_plant(0.8).in_spec
    assert ref_plant(1.0).in_spec
    assert not ref_plant(2.0).in_spec
