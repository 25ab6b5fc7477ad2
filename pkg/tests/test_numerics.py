"""Direction sampling, projections, and RNG stream determinism."""

import numpy as np
import pytest

from lazo.errors import DimensionError
from lazo.numerics import (
    Ball,
    Box,
    Stream,
    Unconstrained,
    project,
    random_projection_matrix,
    rng_stream,
    sample_unit_sphere,
    sample_unit_spheres,
)


class TestSampleUnitSphere:
    def test_dimension_one_is_sign(self):
        rng = rng_stream(7, 0, Stream.DIRECTIONS)
        values = {float(sample_unit_sphere(rng, 1)[0]) for _ in range(50)}
        assert values <= {1.0, -1.0}
        assert len(values) == 2  # both signs show up over 50 draws

    @pytest.mark.parametrize("d", [2, 3, 7, 36])
    def test_unit_norm(self, d):
        rng = rng_stream(11, 0, Stream.DIRECTIONS)
        for _ in range(200):
            u = sample_unit_sphere(rng, d)
            assert abs(np.linalg.norm(u) - 1.0) <= 1e-12

    def test_zero_dimension_rejected(self):
        rng = rng_stream(0, 0, Stream.DIRECTIONS)
        with pytest.raises(DimensionError):
            sample_unit_sphere(rng, 0)

    def test_coordinate_means_vanish(self):
        # symmetry of the uniform sphere measure: per-coordinate mean -> 0
        rng = np.random.default_rng(2024)
        U = sample_unit_spheres(rng, 100_000, 3)
        assert np.all(np.abs(U.mean(axis=0)) < 0.02)

    def test_squared_projection_moment(self):
        # E[(u . e1)^2] = 1/d on the unit sphere
        d = 5
        rng = np.random.default_rng(99)
        U = sample_unit_spheres(rng, 100_000, d)
        moment = float((U[:, 0] ** 2).mean())
        assert abs(moment - 1.0 / d) < 0.05 / d

    def test_batch_shape_and_norms(self):
        rng = np.random.default_rng(5)
        U = sample_unit_spheres(rng, 64, 9)
        assert U.shape == (64, 9)
        assert np.allclose(np.linalg.norm(U, axis=1), 1.0, atol=1e-12)

    def test_determinism_across_generators(self):
        a = [sample_unit_sphere(rng_stream(42, 3, Stream.DIRECTIONS), 6) for _ in range(1)]
        b = [sample_unit_sphere(rng_stream(42, 3, Stream.DIRECTIONS), 6) for _ in range(1)]
        assert np.array_equal(a[0], b[0])


class TestRngStreams:
    def test_equal_keys_bitwise_equal_sequences(self):
        g1 = rng_stream(123, 4, Stream.ORACLE)
        g2 = rng_stream(123, 4, Stream.ORACLE)
        assert np.array_equal(g1.standard_normal(100), g2.standard_normal(100))

    def test_distinct_purposes_are_distinct(self):
        g1 = rng_stream(123, 4, Stream.ORACLE)
        g2 = rng_stream(123, 4, Stream.DIRECTIONS)
        assert not np.array_equal(g1.standard_normal(16), g2.standard_normal(16))


class TestProjection:
    def test_ball_radial_scaling(self):
        got = project(np.array([3.0, 4.0]), Ball(1.0))
        assert np.allclose(got, [0.6, 0.8], atol=1e-15)

    def test_ball_interior_unchanged(self):
        x = np.array([0.5, 0.5])
        assert np.array_equal(project(x, Ball(10.0)), x)

    def test_box_clamp(self):
        got = project(np.array([2.0, -3.0]), Box(np.zeros(2), np.ones(2)))
        assert np.array_equal(got, [1.0, 0.0])

    def test_zero_vector_onto_ball(self):
        z = np.zeros(3)
        assert np.array_equal(project(z, Ball(2.0)), z)

    def test_unconstrained_identity(self):
        x = np.array([5.0, -7.0, 1e9])
        assert np.array_equal(project(x, Unconstrained()), x)

    @pytest.mark.parametrize("fset", [
        Ball(1.0),
        Ball(3.7),
        Box(-np.ones(4), np.ones(4)),
    ])
    def test_idempotent_exactly(self, fset, rng):
        d = 2 if isinstance(fset, Ball) else 4
        for _ in range(500):
            x = rng.standard_normal(d) * rng.uniform(0.1, 10.0)
            once = project(x, fset)
            twice = project(once, fset)
            assert np.array_equal(once, twice)

    @pytest.mark.parametrize("fset", [Ball(1.0), Box(-np.ones(3), np.ones(3))])
    def test_non_expansive(self, fset, rng):
        d = 2 if isinstance(fset, Ball) else 3
        for _ in range(1000):
            x = rng.standard_normal(d) * 3.0
            y = rng.standard_normal(d) * 3.0
            lhs = np.linalg.norm(project(x, fset) - project(y, fset))
            rhs = np.linalg.norm(x - y)
            assert lhs <= rhs * (1.0 + 1e-12) + 1e-15

    def test_bad_sets_rejected(self):
        with pytest.raises(DimensionError):
            Ball(0.0)
        with pytest.raises(DimensionError):
            Box(np.array([1.0]), np.array([0.0]))


class TestRandomProjectionMatrix:
    def test_shape(self):
        rng = np.random.default_rng(1)
        assert random_projection_matrix(rng, 6, 2).shape == (2, 6)

    def test_fresh_streams_distinct(self):
        m1 = random_projection_matrix(rng_stream(9, 0, Stream.PROJECTIONS, 0), 4, 2)
        m2 = random_projection_matrix(rng_stream(9, 0, Stream.PROJECTIONS, 1), 4, 2)
        assert not np.array_equal(m1, m2)

    def test_entry_moments(self):
        rng = np.random.default_rng(77)
        entries = np.concatenate(
            [random_projection_matrix(rng, 2, 2).ravel() for _ in range(100_000)]
        )
        assert abs(entries.mean()) < 0.02
        assert abs(entries.var() - 1.0) < 0.05

    def test_k_exceeding_d_rejected(self):
        rng = np.random.default_rng(0)
        with pytest.raises(DimensionError):
            random_projection_matrix(rng, 3, 4)
