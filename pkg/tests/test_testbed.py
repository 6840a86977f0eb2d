import numpy as np
import pytest

from saacmes.testbed import REGISTRY, ellipsoid, make_problem


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_optimum_value(name):
    p = make_problem(name, 6, seed=3)
    assert abs(p(p.x_opt) - p.f_opt) <= 1e-9
    assert p.target == p.f_opt + 1e-8


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_lower_bound_on_random_points(name):
    p = make_problem(name, 5, seed=1)
    X = np.random.default_rng(0).uniform(-5, 5, (100_000, 5))
    values = np.array([p(x) for x in X])
    assert values.min() >= p.f_opt


@pytest.mark.parametrize("name", sorted(REGISTRY))
def test_rotation_is_orthogonal(name):
    p = make_problem(name, 7, seed=11)
    R = p.rotation
    assert np.linalg.norm(R.T @ R - np.eye(7)) < 1e-10


def test_sphere_at_optimum():
    p = make_problem("sphere", 4, seed=8)
    assert p(p.x_opt) == p.f_opt


def test_rosenbrock_unshifted_optimum():
    p = make_problem("rosenbrock", 5, shift=False)
    assert p(np.ones(5)) == 0.0


def test_ellipsoid_d2_by_hand():
    p = make_problem("ellipsoid", 2, shift=False)
    assert p(np.array([1.0, 1.0])) == 1 + 1e6


@pytest.mark.parametrize("name", ["rotated_ellipsoid", "rotated_rastrigin", "rotated_rosenbrock"])
def test_rotated_equals_unrotated_at_rotated_point(name):
    rotated = make_problem(name, 6, seed=4, shift=False)
    plain = make_problem(name, 6, seed=4, shift=False, rotate=False)
    R = rotated.rotation
    for x in np.random.default_rng(1).uniform(-3, 3, (50, 6)):
        # rotated f at x_opt + R^T u equals plain f at x_opt + u
        u = x - plain.x_opt
        expected = plain(plain.x_opt + u)
        assert rotated(rotated.x_opt + R.T @ u) == pytest.approx(expected, rel=1e-9)


def test_pure_and_deterministic():
    a = make_problem("attractive_sector", 5, seed=2)
    b = make_problem("attractive_sector", 5, seed=2)
    x = np.linspace(-1, 1, 5)
    assert a(x) == a(x) == b(x)
    np.testing.assert_array_equal(a.rotation, b.rotation)
    c = make_problem("attractive_sector", 5, seed=3)
    assert not np.array_equal(a.rotation, c.rotation)


def test_shift_within_box():
    p = make_problem("rotated_ellipsoid", 10, seed=5)
    assert np.all(np.abs(p.x_opt) <= 4)


def test_ellipsoid_weights():
    z = np.zeros(3)
    z[1] = 1
    assert ellipsoid(z) == pytest.approx(1e3)


@pytest.mark.parametrize("bad", [("nope", 3), ("sphere", 1)])
def test_invalid_problem(bad):
    with pytest.raises(ValueError):
        make_problem(*bad)
