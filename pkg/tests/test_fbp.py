import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tomoprior import (AngleSet, FbpConfig, Image, InvalidArgument, RadonOperator, Sinogram,
                       apply_projection_filter, fbp_reconstruct, relative_mse)
from tomoprior.fbp import FILTERS, filter_response
from tomoprior.phantoms import disk

RAMP_FAMILY = ["ramlak", "shepp-logan", "cosine"]


def error_ratio(recon, truth):
    return float(np.sum((recon.data - truth.data) ** 2) / np.sum(truth.data ** 2))


@pytest.mark.parametrize("name", RAMP_FAMILY)
@pytest.mark.parametrize("n", [16, 64, 256])
def test_response_real_even_zero_dc(name, n):
    h = filter_response(name, n)
    assert h.dtype.kind == "f"
    assert h[0] == 0.0
    np.testing.assert_allclose(h[1:], h[1:][::-1], atol=1e-15)
    assert np.all(h >= 0)


def test_cosine_window_shape():
    h = filter_response("cosine", 256)
    w = 2 * np.fft.fftfreq(256)
    np.testing.assert_allclose(h, np.abs(w) * np.cos(np.pi * w / 2), atol=1e-15)
    assert filter_response("ramlak", 256).max() == pytest.approx(1.0)


@pytest.mark.parametrize("name", RAMP_FAMILY)
def test_constant_row_is_annihilated(name):
    row = np.full(37, 4.2)
    assert np.max(np.abs(apply_projection_filter(row, name))) <= 1e-8 * 4.2


@pytest.mark.parametrize("name", FILTERS)
def test_impulse_response_symmetric(name):
    row = np.zeros(41)
    row[20] = 1.0
    out = apply_projection_filter(row, name)
    np.testing.assert_allclose(out, out[::-1], atol=1e-10)


def test_none_is_identity(rng):
    row = rng.standard_normal(23)
    np.testing.assert_array_equal(apply_projection_filter(row, "none"), row)


def test_ramlak_kernel_matches_discrete_ramp():
    # band-limited ramp with Nyquist normalized to 1: 1/2 at 0, -2/(pi k)^2 at odd k, 0 at even k
    row = np.zeros(65)
    row[32] = 1.0
    out = apply_projection_filter(row, "ramlak")
    k = np.arange(-32, 33)
    expect = np.zeros(65)
    odd = k % 2 == 1
    expect[odd] = -2.0 / (np.pi * k[odd]) ** 2
    expect[32] = 0.5
    # finite zero padding truncates the kernel's 1/k^2 tail slightly
    assert np.max(np.abs(out - expect)) < 5e-4
    assert abs(out[32] - 0.5) < 5e-4


def test_filter_rows_independently(rng):
    rows = rng.standard_normal((3, 20))
    batch = apply_projection_filter(rows, "shepp-logan")
    for r, b in zip(rows, batch):
        np.testing.assert_allclose(apply_projection_filter(r, "shepp-logan"), b, atol=1e-14)


def test_filter_errors():
    with pytest.raises(InvalidArgument):
        apply_projection_filter(np.ones(8), "hann")
    with pytest.raises(InvalidArgument):
        apply_projection_filter(np.ones(1), "cosine")
    with pytest.raises(InvalidArgument):
        FbpConfig((8, 8), filter="hann")


@settings(max_examples=20, deadline=None)
@given(st.floats(-4, 4), st.integers(0, 2**31 - 1))
def test_linearity(a, seed):
    rng = np.random.default_rng(seed)
    s1, s2 = (Sinogram((0.0, 45.0, 90.0, 135.0), rng.standard_normal((4, 15))) for _ in range(2))
    s12 = Sinogram(s1.angles, a * s1.data + s2.data)
    cfg = FbpConfig((10, 10))
    lhs = fbp_reconstruct(s12, cfg).data
    rhs = a * fbp_reconstruct(s1, cfg).data + fbp_reconstruct(s2, cfg).data
    np.testing.assert_allclose(lhs, rhs, atol=1e-12)


def test_zero_sinogram():
    sino = Sinogram((0.0, 90.0), np.zeros((2, 13)))
    assert not fbp_reconstruct(sino, FbpConfig((9, 9))).data.any()


def test_dense_angle_disk():
    truth = disk(64, 20.0)
    op = RadonOperator((64, 64), AngleSet(180))
    recon = fbp_reconstruct(op.forward(truth), FbpConfig((64, 64), "cosine"))
    assert relative_mse(recon, truth) <= 0.01
    # stricter: without the 1/n factor, error energy is under 2% of the disk's
    assert error_ratio(recon, truth) <= 0.02


def test_more_angles_never_hurts():
    truth = disk(64, 20.0)
    errs = []
    for k in (8, 16, 32, 64, 128):
        op = RadonOperator((64, 64), AngleSet(k))
        errs.append(error_ratio(fbp_reconstruct(op.forward(truth), FbpConfig((64, 64))), truth))
    assert all(b <= a + 1e-3 for a, b in zip(errs, errs[1:])), errs


def test_unfiltered_matches_scaled_adjoint(rng):
    op = RadonOperator((48, 48), AngleSet(30))
    y = rng.random(op.sino_shape)
    adj = op.apply_adjoint(y) * np.pi / (2 * 30)
    fbp = fbp_reconstruct(Sinogram(tuple(op.angles.degrees), y), FbpConfig((48, 48), "none")).data
    assert np.linalg.norm(fbp - adj) <= 1e-2 * np.linalg.norm(adj)
