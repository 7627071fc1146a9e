import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isac_lab.numerics import (RandomStream, SizeError, add_cp, dft, direct_dft, get_fft_backend,
                               idft, periodogram, remove_cp, set_fft_backend)

SIZES = [2 ** p for p in range(1, 11)]


@pytest.fixture(params=["numpy", "radix2"])
def backend(request):
    old = get_fft_backend()
    set_fft_backend(request.param)
    yield request.param
    set_fft_backend(old)


def _rand(n, seed=0):
    rng = np.random.default_rng(seed)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_impulse_and_tone(backend):
    assert np.allclose(dft([1, 0, 0, 0]), [1, 1, 1, 1])
    tone = np.exp(2j * np.pi * np.arange(4) / 4)
    assert np.allclose(dft(tone), [0, 4, 0, 0], atol=1e-12)
    assert np.allclose(idft([1, 1, 1, 1]), [4, 0, 0, 0])


@pytest.mark.parametrize("n", SIZES)
def test_dft_matches_direct_sum(backend, n):
    x = _rand(n, n)
    ref = direct_dft(x)
    assert np.max(np.abs(dft(x) - ref)) <= 1e-10 * np.max(np.abs(ref))
    ref_inv = direct_dft(x, inverse=True)
    assert np.max(np.abs(idft(x) - ref_inv)) <= 1e-10 * np.max(np.abs(ref_inv))


@pytest.mark.parametrize("n", SIZES)
def test_parseval(backend, n):
    x = _rand(n, 7 * n)
    lhs = np.sum(np.abs(x) ** 2)
    rhs = np.sum(np.abs(dft(x)) ** 2) / n
    assert abs(lhs - rhs) <= 1e-10 * lhs


def test_round_trip_and_linearity(backend):
    x, y = _rand(256, 1), _rand(256, 2)
    assert np.max(np.abs(idft(dft(x)) / 256 - x)) < 1e-12
    a, b = 0.3 - 2j, 1.7 + 0.5j
    assert np.allclose(idft(a * x + b * y), a * idft(x) + b * idft(y), atol=1e-10)


def test_axis_argument(backend):
    g = _rand(64, 3).reshape(16, 4)
    cols = np.stack([dft(g[:, j]) for j in range(4)], axis=1)
    assert np.allclose(dft(g, axis=0), cols)


@pytest.mark.parametrize("n", [0, 3, 6, 12, 100])
def test_non_power_of_two_rejected(n):
    with pytest.raises(SizeError):
        dft(np.ones(n))


def test_unknown_backend():
    with pytest.raises(ValueError):
        set_fft_backend("fftw")


@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
@settings(max_examples=40, deadline=None)
def test_round_trip_property(p, seed):
    n = 2 ** p
    x = _rand(n, seed)
    assert np.allclose(idft(dft(x)) / n, x, atol=1e-12)


def test_cp_examples():
    x = np.array(list("abcd"), dtype=object)
    assert list(add_cp(x, 2)) == list("cdabcd")
    assert list(add_cp(x, 0)) == list("abcd")
    z = _rand(256)
    assert np.array_equal(remove_cp(add_cp(z, 8), 8), z)
    with pytest.raises(SizeError):
        add_cp(z, 256)
    with pytest.raises(SizeError):
        remove_cp(z, 300)


@given(st.integers(2, 64), st.data())
@settings(max_examples=40, deadline=None)
def test_cp_round_trip_property(n, data):
    n_cp = data.draw(st.integers(0, n - 1))
    x = _rand(n, n_cp)
    y = add_cp(x, n_cp)
    assert len(y) == n + n_cp
    assert np.array_equal(y[:n_cp], x[n - n_cp:])
    assert np.array_equal(remove_cp(y, n_cp), x)


def test_periodogram_constant_peaks_at_dc():
    f, p = periodogram(np.ones(32), oversample=4)
    assert f[np.argmax(p)] == 0.0
    assert p.max() == 0.0
    assert np.all(p <= 0.0)


def test_periodogram_errors():
    with pytest.raises(SizeError):
        periodogram(np.array([]))
    with pytest.raises(SizeError):
        periodogram(np.ones(8), oversample=3)


def test_periodogram_reference_scale():
    x = np.ones((16, 3))
    _, p = periodogram(x, 2, reference=1.0)
    # a constant of length 16 puts 16^2 / 16 = 16 at DC
    assert np.isclose(p.max(), 10 * np.log10(16))


def test_random_stream_reproducible_and_lanes_independent():
    a = RandomStream(12345, (0, "noise", 1)).complex_normal(64)
    b = RandomStream(12345, (0, "noise", 1)).complex_normal(64)
    assert np.array_equal(a, b)
    for lane in [(1, "noise", 1), (0, "taps", 1), (0, "noise", 2)]:
        assert not np.array_equal(a, RandomStream(12345, lane).complex_normal(64))
    assert not np.array_equal(a, RandomStream(54321, (0, "noise", 1)).complex_normal(64))
    x = RandomStream(1, ("a",)).normal(size=20000)
    y = RandomStream(1, ("b",)).normal(size=20000)
    assert abs(np.corrcoef(x, y)[0, 1]) < 0.03


def test_child_lane_equals_explicit_lane():
    s = RandomStream(9, ("exp", 3)).child("gains")
    assert np.array_equal(s.normal(size=5), RandomStream(9, ("exp", 3, "gains")).normal(size=5))


def test_qpsk_and_complex_normal():
    s = RandomStream(5, ("q",))
    q = s.qpsk((256, 64))
    assert np.allclose(np.abs(q), 1.0, atol=1e-12)
    assert abs(q.mean()) < 0.05
    w = RandomStream(5, ("w",)).complex_normal(200_000, variance=0.5)
    assert abs(np.mean(np.abs(w) ** 2) - 0.5) < 0.01
