import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tomoprior import CoefVector, DctBasis, Image, InvalidArgument, analyze, synthesize


def cosine_matrix(n):
    """Orthonormal DCT-II matrix, rows are basis functions."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    c = np.cos(np.pi * (2 * j + 1) * k / (2 * n))
    c[0] *= np.sqrt(1.0 / n)
    c[1:] *= np.sqrt(2.0 / n)
    return c


@pytest.mark.parametrize("h,w", [(4, 4), (5, 7), (8, 3)])
def test_matches_explicit_basis(h, w, rng):
    basis = DctBasis(w, h)
    ch, cw = cosine_matrix(h), cosine_matrix(w)
    x = rng.standard_normal((h, w))
    theta = rng.standard_normal((h, w))
    np.testing.assert_allclose(basis.anal(x).reshape(h, w), ch @ x @ cw.T, atol=1e-12)
    np.testing.assert_allclose(basis.synth(theta.ravel()), ch.T @ theta @ cw, atol=1e-12)


def test_cosine_mode_maps_to_one_coefficient():
    c = cosine_matrix(4)
    img = np.outer(c[1], c[0])
    coef = DctBasis(4, 4).anal(img).reshape(4, 4)
    expected = np.zeros((4, 4))
    expected[1, 0] = 1.0
    np.testing.assert_allclose(coef, expected, atol=1e-12)


def test_dc_only_gives_constant_image():
    n, c = 6, 2.5
    theta = np.zeros(n * n)
    theta[0] = c
    img = synthesize(DctBasis(n, n), CoefVector(theta))
    np.testing.assert_allclose(img.data, c / n, atol=1e-14)


def test_constant_image_gives_dc_only():
    n, v = 5, 0.7
    coef = analyze(DctBasis(n, n), Image(np.full((n, n), v))).data
    assert coef[0] == pytest.approx(v * n, abs=1e-13)
    assert np.max(np.abs(coef[1:])) <= 1e-13


def test_zero_maps_to_zero():
    assert not DctBasis(4, 3).synth(np.zeros(12)).any()


def test_round_trip_and_parseval_32(rng):
    basis = DctBasis(32, 32)
    theta = rng.standard_normal(1024)
    x = basis.synth(theta)
    assert np.max(np.abs(basis.anal(x) - theta)) <= 1e-12
    assert abs(np.linalg.norm(x) - np.linalg.norm(theta)) <= 1e-12 * np.linalg.norm(theta)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_adjoint_pair(h, w, seed):
    basis = DctBasis(w, h)
    rng = np.random.default_rng(seed)
    theta = rng.standard_normal(h * w)
    x = rng.standard_normal((h, w))
    assert np.vdot(basis.synth(theta), x) == pytest.approx(np.vdot(theta, basis.anal(x)),
                                                          abs=1e-12 * h * w)


@settings(max_examples=30, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 2**31 - 1))
def test_linearity(a, seed):
    basis = DctBasis(6, 5)
    rng = np.random.default_rng(seed)
    u, v = rng.standard_normal((2, 5, 6))
    np.testing.assert_allclose(basis.anal(a * u + v), a * basis.anal(u) + basis.anal(v), atol=1e-12)


def test_shape_errors():
    basis = DctBasis(4, 4)
    with pytest.raises(InvalidArgument):
        basis.synthesize(CoefVector(np.zeros(15)))
    with pytest.raises(InvalidArgument):
        basis.analyze(Image.zeros(4, 5))
    with pytest.raises(InvalidArgument):
        DctBasis(4, 4, normalization="none")
