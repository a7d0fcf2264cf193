import numpy as np
import pytest
from hypothesis import given, strategies as st

from tomoprior import (AngleSet, CoefVector, Image, InvalidArgument, Sinogram,
                       image_linf_diff, make_uniform_angles)


def test_uniform_angles_four():
    assert make_uniform_angles(4).degrees.tolist() == [0.0, 45.0, 90.0, 135.0]


def test_single_angle():
    assert make_uniform_angles(1).degrees.tolist() == [0.0]


def test_twelve_angles_spacing():
    a = make_uniform_angles(12).degrees
    assert len(a) == 12
    np.testing.assert_allclose(np.diff(a), 15.0)


@pytest.mark.parametrize("bad", [0, -3, 2.5])
def test_uniform_angles_rejects(bad):
    with pytest.raises(InvalidArgument):
        make_uniform_angles(bad)


@given(st.integers(min_value=1, max_value=720))
def test_uniform_gap_and_range(n):
    a = make_uniform_angles(n).degrees
    assert a.max() < 180
    assert a.min() == 0
    if n > 1:
        assert np.min(np.diff(a)) == pytest.approx(180.0 / n, rel=1e-12)


def test_linf_diff_cases():
    x = Image(np.arange(6.0).reshape(2, 3))
    assert image_linf_diff(x, x) == 0.0
    assert image_linf_diff(Image.zeros(2, 2), Image(np.ones((2, 2)))) == 1.0
    bumped = x.data.copy()
    bumped[0, 0] += 1e-6
    assert image_linf_diff(x, Image(bumped)) == pytest.approx(1e-6, rel=1e-9)


def test_linf_diff_shape_mismatch():
    with pytest.raises(InvalidArgument):
        image_linf_diff(Image.zeros(2, 2), Image.zeros(3, 2))


@pytest.mark.parametrize("value", [np.nan, np.inf, -np.inf])
def test_non_finite_rejected(value):
    arr = np.ones((3, 3))
    arr[1, 1] = value
    with pytest.raises(InvalidArgument):
        Image(arr)
    with pytest.raises(InvalidArgument):
        Sinogram((0.0, 60.0, 120.0), arr)
    with pytest.raises(InvalidArgument):
        CoefVector(arr)


def test_image_shape_rules():
    with pytest.raises(InvalidArgument):
        Image(np.ones((1, 5)))
    with pytest.raises(InvalidArgument):
        Image(np.ones(9))
    im = Image(np.ones((3, 5)))
    assert (im.width, im.height) == (5, 3)


def test_values_are_read_only():
    src = np.ones((2, 2))
    im = Image(src)
    src[0, 0] = 7.0
    assert im.data[0, 0] == 1.0
    with pytest.raises(ValueError):
        im.data[0, 0] = 2.0


@pytest.mark.parametrize("angles", [(10.0, 10.0), (20.0, 10.0), (0.0, 180.0), (-1.0, 5.0), ()])
def test_sinogram_angle_rules(angles):
    with pytest.raises(InvalidArgument):
        Sinogram(angles, np.zeros((len(angles), 4)))


def test_sinogram_row_count_must_match():
    with pytest.raises(InvalidArgument):
        Sinogram((0.0, 90.0), np.zeros((3, 4)))


def test_explicit_angle_set():
    a = AngleSet(0, (0.0, 30.0, 95.5))
    assert len(a) == 3
    np.testing.assert_allclose(a.radians, np.deg2rad([0.0, 30.0, 95.5]))
    with pytest.raises(InvalidArgument):
        AngleSet(2, (30.0, 10.0))
