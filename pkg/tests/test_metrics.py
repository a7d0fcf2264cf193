import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tomoprior import Image, InvalidArgument, MetricReport, relative_mse, ssim
from tomoprior.metrics import evaluate, gaussian_window

skimage_metrics = pytest.importorskip("skimage.metrics")

finite = st.floats(-10, 10, allow_nan=False, width=64)


def rel_mse_loop(recon, truth):
    num = den = 0.0
    n = 0
    for r, t in zip(recon.data.ravel().tolist(), truth.data.ravel().tolist()):
        num += (r - t) ** 2
        den += t * t
        n += 1
    return num / den / n


def test_relative_mse_identity_and_ones():
    x = Image(np.ones((8, 8)))
    assert relative_mse(x, x) == 0.0
    assert relative_mse(Image.zeros(8, 8), x) == pytest.approx(1 / 64, rel=1e-15)


def test_relative_mse_dual_implementation(rng):
    a, b = Image(rng.random((8, 8))), Image(rng.random((8, 8)))
    assert relative_mse(a, b) == pytest.approx(rel_mse_loop(a, b), rel=1e-14)


def test_relative_mse_not_symmetric(rng):
    a = Image(rng.random((6, 6)))
    b = Image(2.0 * a.data + 0.1)
    assert relative_mse(a, b) != pytest.approx(relative_mse(b, a))


# error entries and scales kept away from zero so x + s*e does not cancel
error_entry = st.one_of(st.floats(0.1, 10), st.floats(-10, -0.1))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (5, 4), elements=finite), arrays(np.float64, (5, 4), elements=error_entry),
       st.one_of(st.floats(0.1, 20), st.floats(-20, -0.1)))
def test_relative_mse_quadratic_in_error(x, e, s):
    if np.sum(x * x) < 1e-6:
        return
    base = relative_mse(Image(x + e), Image(x))
    scaled = relative_mse(Image(x + s * e), Image(x))
    assert scaled == pytest.approx(s * s * base, rel=1e-12)


def test_relative_mse_errors():
    with pytest.raises(InvalidArgument):
        relative_mse(Image.zeros(3, 3), Image.zeros(3, 3))
    with pytest.raises(InvalidArgument):
        relative_mse(Image.zeros(3, 3), Image(np.ones((3, 4))))


def test_gaussian_window_normalized():
    g = gaussian_window(11, 1.5)
    assert g.sum() == pytest.approx(1.0)
    assert np.argmax(g) == 5
    np.testing.assert_allclose(g, g[::-1])


@pytest.mark.parametrize("shape", [(32, 32), (40, 23), (11, 11)])
def test_ssim_matches_reference_implementation(shape, rng):
    truth = rng.random(shape)
    recon = truth + 0.2 * rng.standard_normal(shape)
    ref = skimage_metrics.structural_similarity(
        recon, truth, win_size=11, gaussian_weights=True, sigma=1.5,
        use_sample_covariance=False, data_range=truth.max() - truth.min())
    assert ssim(Image(recon), Image(truth)) == pytest.approx(ref, abs=1e-12)


def test_ssim_identity_and_shift(rng):
    x = rng.random((20, 20))
    assert ssim(Image(x), Image(x)) == 1.0
    assert ssim(Image(x + 3.0), Image(x + 3.0)) == 1.0


def test_offset_beats_noise_at_equal_mse(rng):
    truth = rng.random((64, 64))
    c = 0.02
    shifted = Image(truth + c)
    noise = rng.standard_normal(truth.shape)
    noise *= c * np.sqrt(noise.size) / np.linalg.norm(noise)
    noisy = Image(truth + noise)
    t = Image(truth)
    assert relative_mse(shifted, t) == pytest.approx(relative_mse(noisy, t), rel=1e-10)
    s_shift = ssim(shifted, t)
    assert s_shift < 1.0
    assert s_shift > ssim(noisy, t)


def test_independent_noise_decorrelated():
    vals = []
    for seed in range(10):
        rng = np.random.default_rng(seed)
        a, b = rng.standard_normal((2, 128, 128))
        vals.append(ssim(Image(a), Image(b)))
    assert abs(np.mean(vals)) <= 0.05


@settings(max_examples=30, deadline=None)
@given(arrays(np.float64, (12, 12), elements=finite), arrays(np.float64, (12, 12), elements=finite))
def test_ssim_bounded(a, b):
    v = ssim(Image(a), Image(b))
    assert -1.0 - 1e-12 <= v <= 1.0 + 1e-12


def test_ssim_errors():
    with pytest.raises(InvalidArgument):
        ssim(Image.zeros(12, 12), Image.zeros(12, 13))
    with pytest.raises(InvalidArgument):
        ssim(Image.zeros(8, 8), Image.zeros(8, 8), window=11)


def test_report_validation():
    r = evaluate(Image(np.ones((12, 12))), Image(np.ones((12, 12))))
    assert r == MetricReport(0.0, 1.0)
    with pytest.raises(InvalidArgument):
        MetricReport(-1.0, 0.5)
    with pytest.raises(InvalidArgument):
        MetricReport(0.1, 1.5)
