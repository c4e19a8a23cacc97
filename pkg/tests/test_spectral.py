import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from freqbias.spectral import (
    LOG_FLOOR,
    AveragePowerSpectrum,
    PowerSpectrum,
    average_power_spectrum,
    centered_frequencies,
    dft2,
    display_normalize,
    hann_window,
    idft2,
    power_spectrum,
    read_spectrum_csv,
    write_heatmap_png,
    write_spectrum_csv,
)
from oracles import direct_dft


def cosine(m, n, u0, v0, amp=1.0):
    x = np.arange(m)[:, None]
    y = np.arange(n)[None, :]
    return amp * np.cos(2 * np.pi * (u0 * x / m + v0 * y / n))


def test_impulse_has_flat_spectrum():
    im = np.zeros((8, 8))
    im[0, 0] = 1.0
    np.testing.assert_allclose(dft2(im), np.ones((8, 8)), atol=1e-15)


def test_constant_concentrates_at_dc():
    c = dft2(np.full((6, 10), 2.5))
    assert c[0, 0] == pytest.approx(2.5 * 60)
    rest = c.copy()
    rest[0, 0] = 0
    assert np.abs(rest).max() < 1e-12


@pytest.mark.parametrize("m,n,u0,v0", [(16, 16, 3, 5), (12, 20, 1, 0), (9, 7, 4, 2)])
def test_cosine_two_bins(m, n, u0, v0):
    amp = 1.7
    im = cosine(m, n, u0, v0, amp)
    c = dft2(im)
    np.testing.assert_allclose(c, direct_dft(im), atol=1e-9)
    mag = np.abs(c)
    assert mag[u0, v0] == pytest.approx(amp * m * n / 2)
    assert mag[(m - u0) % m, (n - v0) % n] == pytest.approx(amp * m * n / 2)
    mag[u0, v0] = mag[(m - u0) % m, (n - v0) % n] = 0
    assert mag.max() < 1e-9 * amp * m * n


def test_dft_matches_direct_sum_random(rng):
    im = rng.standard_normal((11, 6))
    np.testing.assert_allclose(dft2(im), direct_dft(im), rtol=1e-10, atol=1e-10)


def test_dft_rejects_nonfinite():
    im = np.zeros((4, 4))
    im[1, 2] = np.nan
    with pytest.raises(ValueError):
        dft2(im)


def test_idft_examples():
    assert np.all(idft2(np.zeros((5, 5))) == 0)
    c = np.zeros((6, 4), dtype=complex)
    c[0, 0] = 24
    np.testing.assert_allclose(idft2(c), np.ones((6, 4)), rtol=1e-15)


def test_idft_round_trip(rng):
    im = rng.standard_normal((16, 16))
    np.testing.assert_allclose(idft2(dft2(im)), im, rtol=0, atol=1e-9 * np.abs(im).max())


def test_idft_warns_on_non_hermitian():
    c = np.zeros((4, 4), dtype=complex)
    c[1, 0] = 1.0
    with pytest.warns(RuntimeWarning, match="imaginary"):
        idft2(c)


def test_centered_frequencies():
    np.testing.assert_array_equal(centered_frequencies(4), [0, 0.25, -0.5, -0.25])
    f = centered_frequencies(7)
    assert f.min() >= -0.5 and f.max() < 0.5


def test_hann_small_cases():
    assert np.all(hann_window(2, 2) == 0)
    w = hann_window(3, 3)
    assert w[1, 1] == pytest.approx(1.0)
    assert np.all(w[[0, 0, 2, 2], [0, 2, 0, 2]] == 0)
    assert w[0, 1] == pytest.approx(0.0, abs=1e-15)


def test_hann_64_symmetric_and_bounded():
    w = hann_window(64, 64)
    np.testing.assert_allclose(w, w[::-1, :], atol=1e-15)
    np.testing.assert_allclose(w, w[:, ::-1], atol=1e-15)
    assert w.min() >= 0 and w.max() <= 1
    assert w[0, 0] == 0


def test_power_spectrum_constant_and_cosine():
    p = power_spectrum(np.full((8, 8), 3.0)).power
    assert p[0, 0] == pytest.approx((3.0 * 64) ** 2)
    assert p.sum() == pytest.approx(p[0, 0])
    im = cosine(16, 16, 2, 3, 0.5)
    p = power_spectrum(im)
    assert p.mode == "raw"
    assert p.power[2, 3] == pytest.approx((0.5 * 256 / 2) ** 2)
    assert p.power[14, 13] == pytest.approx((0.5 * 256 / 2) ** 2)


def test_windowed_power_obeys_parseval():
    im = cosine(32, 32, 4, 7)
    p = power_spectrum(im, windowed=True).power
    windowed = im * hann_window(32, 32)
    assert p.sum() == pytest.approx(32 * 32 * np.sum(windowed**2), rel=1e-12)
    assert np.argmax(p) in (np.ravel_multi_index((4, 7), p.shape), np.ravel_multi_index((28, 25), p.shape))
    # sidelobes spread power into neighbours
    assert p[5, 7] > 0


def test_color_uses_luminance(rng):
    rgb = rng.random((8, 8, 3))
    lum = 0.299 * rgb[..., 0] + 0.587 * rgb[..., 1] + 0.114 * rgb[..., 2]
    np.testing.assert_allclose(power_spectrum(rgb).power, power_spectrum(lum).power)
    assert power_spectrum(rgb, per_channel=True).power.shape == (8, 8, 3)


def test_average_examples(rng):
    im = rng.standard_normal((8, 8))
    np.testing.assert_allclose(average_power_spectrum([im]).power, power_spectrum(im).power)
    np.testing.assert_allclose(average_power_spectrum([im, -im]).power, power_spectrum(im).power)


def test_average_dimension_mismatch():
    with pytest.raises(ValueError):
        average_power_spectrum([np.zeros((4, 4)), np.zeros((4, 5))])


def test_average_of_gaussian_amplitude_waves(rng):
    m = n = 16
    amps = rng.normal(0.0, 2.0, 100)
    carrier = cosine(m, n, 3, 1)
    avg = average_power_spectrum(amps[:, None, None] * carrier).power
    expected = np.mean(amps**2) * (m * n / 2) ** 2
    assert avg[3, 1] == pytest.approx(expected, rel=1e-10)
    assert avg[13, 15] == pytest.approx(expected, rel=1e-10)
    rest = avg.copy()
    rest[3, 1] = rest[13, 15] = 0
    assert rest.max() < 1e-18 * expected


def test_average_independent_of_threads(rng):
    stack = rng.standard_normal((7, 16, 16))
    a = average_power_spectrum(stack, n_jobs=1).power
    b = average_power_spectrum(stack, n_jobs=4).power
    assert np.array_equal(a, b)


def test_display_single_bin():
    p = np.zeros((8, 8))
    p[0, 0] = 100.0
    p[2, 1] = 5.0
    d = display_normalize(PowerSpectrum(p))
    bins = d.in_bin_order()
    assert d.mode == "display"
    assert bins[2, 1] == 0.0
    assert np.isnan(bins[0, 0])
    others = np.ones_like(p, dtype=bool)
    others[2, 1] = others[0, 0] = False
    assert np.all(bins[others] == LOG_FLOOR)
    # zero frequency moves to the grid center
    assert np.isnan(d.power[4, 4])


def test_display_uniform_and_errors():
    d = display_normalize(PowerSpectrum(np.full((4, 6), 7.0)))
    assert np.nanmax(d.power) == 0.0
    assert np.all(d.power[~np.isnan(d.power)] == 0.0)
    only_dc = np.zeros((4, 4))
    only_dc[0, 0] = 1
    with pytest.raises(ValueError):
        display_normalize(PowerSpectrum(only_dc))
    with pytest.raises(ValueError):
        display_normalize(d)


def test_csv_round_trip(tmp_path, rng):
    ps = power_spectrum(rng.standard_normal((6, 4)))
    path = tmp_path / "s.csv"
    write_spectrum_csv(ps, path)
    lines = path.read_text().splitlines()
    assert lines[:3] == ["m,n,mode", "6,4,raw", "u,v,value"]
    assert lines[3].startswith("0,0,")
    back = read_spectrum_csv(path)
    assert np.array_equal(back.power, ps.power)
    shown = display_normalize(ps)
    write_spectrum_csv(shown, path)
    again = read_spectrum_csv(path)
    np.testing.assert_array_equal(again.power, shown.power)


def test_heatmap_png(tmp_path, rng):
    from PIL import Image

    ps = power_spectrum(rng.standard_normal((16, 8)))
    path = tmp_path / "h.png"
    write_heatmap_png(ps, path)
    with Image.open(path) as im:
        assert im.mode == "L"
        assert im.size == (16, 8)  # width follows the x frequency axis
        px = np.asarray(im)
    assert px.max() == 255


def test_estimator_wrapper(rng):
    stack = rng.standard_normal((5, 8, 8))
    est = AveragePowerSpectrum(windowed=True).fit(stack)
    np.testing.assert_allclose(est.spectrum_.power,
                               average_power_spectrum(stack, windowed=True).power)
    assert est.transform(stack).shape == (5, 8, 8)
    assert est.get_params() == {"windowed": True, "per_channel": False, "n_jobs": None}
    assert np.nanmax(est.display().power) == 0.0


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 24), st.integers(2, 24), st.integers(0, 2**32 - 1))
def test_dft_properties(m, n, seed):
    im = np.random.default_rng(seed).standard_normal((m, n))
    c = dft2(im)
    # Parseval
    assert np.sum(np.abs(c) ** 2) == pytest.approx(m * n * np.sum(im**2), rel=1e-9)
    # Hermitian symmetry
    flipped = c[(-np.arange(m)) % m][:, (-np.arange(n)) % n]
    np.testing.assert_allclose(flipped, np.conj(c), rtol=0, atol=1e-9 * np.abs(c).max())
    # Round trip
    np.testing.assert_allclose(idft2(c), im, rtol=0, atol=1e-9 * np.abs(im).max())
