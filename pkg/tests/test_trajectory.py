import math

import numpy as np
import pytest

from tvae.trajectory import TrajectoryParams, eval_circular, eval_rot, eval_spiral, evaluate

TOL = 1e-9


def scalar_circular(t, f, omega, b):
    """Independent scalar oracle for the circular form."""
    phase = 2.0 * math.pi * f * t - omega
    out = list(b)
    out[0] += math.cos(phase)
    out[1] += math.sin(phase)
    return out


def scalar_rot(t, f, omega, b):
    phase = 2.0 * math.pi * f * t - omega
    c, s = math.cos(phase), math.sin(phase)
    return [c - s + b[0]] + [c + s + bi for bi in b[1:]]


def scalar_spiral(t, f, omega, b, v):
    return [x + t * v for x in scalar_rot(t, f, omega, b)]


def random_params(rng, d=None, v=0.0):
    d = d if d is not None else int(rng.integers(2, 9))
    return TrajectoryParams(
        f=float(rng.uniform(0.2, 4.0)),
        omega=float(rng.uniform(-10.0, 10.0)),
        b=rng.normal(size=d),
        v=v,
    )


class TestParams:
    def test_rejects_nonpositive_frequency(self):
        with pytest.raises(ValueError):
            TrajectoryParams(f=0.0, omega=0.0, b=np.zeros(3))
        with pytest.raises(ValueError):
            TrajectoryParams(f=-1.0, omega=0.0, b=np.zeros(3))

    def test_phase_reduced_to_canonical_interval(self):
        p = TrajectoryParams(f=1.0, omega=2.0 * math.pi + 0.5, b=np.zeros(2))
        assert abs(p.omega - 0.5) < 1e-12
        p = TrajectoryParams(f=1.0, omega=-0.5, b=np.zeros(2))
        assert abs(p.omega - (2.0 * math.pi - 0.5)) < 1e-12
        assert TrajectoryParams(f=1.0, omega=2.0 * math.pi, b=np.zeros(2)).omega == 0.0

    def test_phase_reduction_preserves_value(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            omega = float(rng.uniform(-50, 50))
            b = rng.normal(size=3)
            p1 = TrajectoryParams(f=1.3, omega=omega, b=b)
            p2 = TrajectoryParams(f=1.3, omega=omega + 6.0 * math.pi, b=b)
            t = rng.uniform(0, 5, size=4)
            assert np.allclose(eval_rot(t, p1), eval_rot(t, p2), atol=1e-9)

    def test_rejects_bad_b(self):
        with pytest.raises(ValueError):
            TrajectoryParams(f=1.0, omega=0.0, b=np.zeros((2, 2)))
        with pytest.raises(ValueError):
            TrajectoryParams(f=1.0, omega=0.0, b=np.array([]))
        with pytest.raises(ValueError):
            TrajectoryParams(f=1.0, omega=0.0, b=np.array([np.nan, 0.0]))

    def test_circular_needs_two_dims(self):
        p = TrajectoryParams(f=1.0, omega=0.0, b=np.zeros(1))
        with pytest.raises(ValueError):
            eval_circular(0.0, p)
        # Rotated and spiral work in one dimension.
        assert eval_rot(0.0, p).shape == (1,)


class TestClosedForms:
    def test_circular_at_origin(self):
        p = TrajectoryParams(f=1.0, omega=0.0, b=np.zeros(3))
        assert np.allclose(eval_circular(0.0, p), [1.0, 0.0, 0.0], atol=1e-12)
        assert np.allclose(eval_circular(0.25, p), [0.0, 1.0, 0.0], atol=1e-12)

    def test_circular_derived_point(self):
        p = TrajectoryParams(f=2.5, omega=1.0, b=np.array([0.5, -0.5, 2.0]))
        expected = scalar_circular(0.1, 2.5, 1.0, [0.5, -0.5, 2.0])
        assert np.allclose(eval_circular(0.1, p), expected, atol=1e-12)
        assert np.allclose(
            expected[:2],
            [math.cos(0.5 * math.pi - 1.0) + 0.5, math.sin(0.5 * math.pi - 1.0) - 0.5],
            atol=1e-15,
        )

    def test_rot_trivial_points(self):
        p = TrajectoryParams(f=1.0, omega=0.0, b=np.zeros(4))
        assert np.allclose(eval_rot(0.0, p), [1.0, 1.0, 1.0, 1.0], atol=1e-12)
        assert np.allclose(eval_rot(0.25, p), [-1.0, 1.0, 1.0, 1.0], atol=1e-12)

    def test_rot_derived_point(self):
        b = np.ones(5)
        p = TrajectoryParams(f=1.5, omega=math.pi / 2.0, b=b)
        assert np.allclose(eval_rot(1.0 / 3.0, p), scalar_rot(1.0 / 3.0, 1.5, math.pi / 2.0, b), atol=1e-12)

    def test_spiral_derived_point(self):
        p = TrajectoryParams(f=1.0, omega=0.0, b=np.zeros(2), v=0.3)
        assert np.allclose(eval_spiral(2.0, p), [1.6, 1.6], atol=1e-12)

    def test_spiral_degenerates(self):
        rng = np.random.default_rng(3)
        p0 = random_params(rng, v=0.0)
        t = rng.uniform(0, 4, size=7)
        assert np.allclose(eval_spiral(t, p0), eval_rot(t, p0), atol=1e-12)
        p1 = random_params(rng, v=1.7)
        assert np.allclose(eval_spiral(0.0, p1), eval_rot(0.0, p1), atol=1e-12)

    def test_matches_scalar_oracle_on_random_draws(self):
        rng = np.random.default_rng(42)
        for _ in range(200):
            v = float(rng.normal())
            p = random_params(rng, v=v)
            t = float(rng.uniform(-3, 8))
            assert np.allclose(eval_circular(t, p), scalar_circular(t, p.f, p.omega, p.b), atol=1e-9)
            assert np.allclose(eval_rot(t, p), scalar_rot(t, p.f, p.omega, p.b), atol=1e-9)
            assert np.allclose(eval_spiral(t, p), scalar_spiral(t, p.f, p.omega, p.b, v), atol=1e-9)

    def test_vectorized_over_time_shapes(self):
        p = random_params(np.random.default_rng(0), d=6, v=0.2)
        for shape in [(), (5,), (2, 3)]:
            t = np.random.default_rng(1).uniform(0, 2, size=shape)
            for fn in (eval_circular, eval_rot, eval_spiral):
                assert fn(t, p).shape == shape + (6,)

    def test_dispatch(self):
        p = random_params(np.random.default_rng(5), v=0.4)
        t = np.linspace(0, 1, 4)
        assert np.array_equal(evaluate("circular", t, p), eval_circular(t, p))
        assert np.array_equal(evaluate("rotated", t, p), eval_rot(t, p))
        assert np.array_equal(evaluate("spiral", t, p), eval_spiral(t, p))
        with pytest.raises(ValueError):
            evaluate("elliptical", t, p)


class TestInvariants:
    """Structural properties; the acceptance suite re-runs these at scale."""

    def test_periodicity(self):
        rng = np.random.default_rng(10)
        for _ in range(100):
            p = random_params(rng)
            t = rng.uniform(0, 10, size=8)
            for fn in (eval_circular, eval_rot):
                assert np.allclose(fn(t, p), fn(t + 1.0 / p.f, p), atol=TOL)

    def test_spiral_shift_identity(self):
        # One period advances the spiral by exactly (v / f) in every coordinate.
        rng = np.random.default_rng(11)
        for _ in range(100):
            p = random_params(rng, v=float(rng.normal()))
            t = rng.uniform(0, 10, size=8)
            shifted = eval_spiral(t + 1.0 / p.f, p)
            assert np.allclose(shifted, eval_spiral(t, p) + p.v / p.f, atol=TOL)

    def test_phase_equivariance(self):
        # Shifting omega by delta equals shifting time by delta / (2 pi f).
        rng = np.random.default_rng(12)
        for _ in range(100):
            p = random_params(rng)
            delta = float(rng.uniform(0, 2.0 * math.pi))
            shifted = TrajectoryParams(f=p.f, omega=p.omega + delta, b=p.b, v=p.v)
            t = rng.uniform(0, 10, size=8)
            for fn in (eval_circular, eval_rot):
                assert np.allclose(fn(t, shifted), fn(t - delta / (2.0 * math.pi * p.f), p), atol=TOL)

    def test_b_translation(self):
        rng = np.random.default_rng(13)
        for _ in range(100):
            p = random_params(rng)
            shift = rng.normal(size=p.dim)
            moved = TrajectoryParams(f=p.f, omega=p.omega, b=p.b + shift, v=p.v)
            t = rng.uniform(0, 10, size=8)
            for fn in (eval_circular, eval_rot):
                assert np.allclose(fn(t, moved), fn(t, p) + shift, atol=TOL)

    def test_boundedness(self):
        rng = np.random.default_rng(14)
        for _ in range(100):
            p = random_params(rng)
            t = rng.uniform(0, 50, size=64)
            assert np.all(np.abs(eval_circular(t, p) - p.b) <= 1.0 + TOL)
            assert np.all(np.abs(eval_rot(t, p) - p.b) <= math.sqrt(2.0) + TOL)
