"""Complex-valued numerical primitives shared by the simulator.

Transforms here are *unnormalized*: ``dft`` computes
``X[k] = sum_n x[n] exp(-2j*pi*k*n/N)`` and ``idft`` the conjugate-exponent
sum without the ``1/N`` factor. Every caller applies its own scaling.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from functools import lru_cache

import numpy as np


class SizeError(ValueError):
    """Raised when an array length violates a transform or CP constraint."""


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


@lru_cache(maxsize=64)
def _bit_reverse_permutation(n: int) -> np.ndarray:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


@lru_cache(maxsize=64)
def _twiddles(half: int) -> np.ndarray:
    return np.exp(-1j * np.pi * np.arange(half) / half)


def _fft_last_axis(x: np.ndarray) -> np.ndarray:
    """Iterative radix-2 decimation-in-time FFT along the last axis."""
    n = x.shape[-1]
    batch = x.shape[:-1]
    y = np.ascontiguousarray(x[..., _bit_reverse_permutation(n)], dtype=np.complex128)
    half = 1
    while half < n:
        blocks = y.reshape(batch + (n // (2 * half), 2, half))
        even = blocks[..., 0, :]
        odd = blocks[..., 1, :] * _twiddles(half)
        out = np.empty_like(blocks)
        np.add(even, odd, out=out[..., 0, :])
        np.subtract(even, odd, out=out[..., 1, :])
        y = out.reshape(batch + (n,))
        half *= 2
    return y


_BACKENDS = ("numpy", "radix2")
_backend = "numpy"


def set_fft_backend(name: str) -> None:
    """Select the transform kernel: ``"numpy"`` (pocketfft) or ``"radix2"``.

    Both enforce the power-of-two contract and agree to ~1e-13.
    """
    global _backend
    if name not in _BACKENDS:
        raise ValueError(f"unknown FFT backend {name!r}; choose from {_BACKENDS}")
    _backend = name


def get_fft_backend() -> str:
    return _backend


def dft(x, axis: int = -1) -> np.ndarray:
    """Unnormalized forward DFT along ``axis``.

    Raises
    ------
    SizeError
        If the transform length is not a power of two.
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.ndim == 0:
        raise SizeError("dft needs at least one dimension")
    n = x.shape[axis]
    if not is_power_of_two(n):
        raise SizeError(f"transform length must be a power of two, got {n}")
    if _backend == "numpy":
        return np.fft.fft(x, axis=axis)
    moved = np.moveaxis(x, axis, -1)
    return np.moveaxis(_fft_last_axis(moved), -1, axis)


def idft(X, axis: int = -1) -> np.ndarray:
    """Unnormalized inverse DFT (positive exponent, no 1/N)."""
    X = np.asarray(X, dtype=np.complex128)
    return np.conj(dft(np.conj(X), axis=axis))


def direct_dft(x, inverse: bool = False) -> np.ndarray:
    """O(N^2) summation reference for a 1-D sequence of any length."""
    x = np.asarray(x, dtype=np.complex128)
    n = x.shape[0]
    sign = 1.0 if inverse else -1.0
    k = np.arange(n)
    return np.exp(sign * 2j * np.pi * np.outer(k, k) / n) @ x


def add_cp(x, n_cp: int, axis: int = 0) -> np.ndarray:
    """Prepend the last ``n_cp`` samples along ``axis``."""
    x = np.asarray(x)
    n = x.shape[axis]
    if not 0 <= n_cp < n:
        raise SizeError(f"cp length {n_cp} must lie in [0, {n})")
    if n_cp == 0:
        return x.copy()
    tail = np.take(x, np.arange(n - n_cp, n), axis=axis)
    return np.concatenate([tail, x], axis=axis)


def remove_cp(y, n_cp: int, axis: int = 0) -> np.ndarray:
    y = np.asarray(y)
    n = y.shape[axis]
    if not 0 <= n_cp < n:
        raise SizeError(f"cp length {n_cp} must lie in [0, {n})")
    return np.take(y, np.arange(n_cp, n), axis=axis)


def next_power_of_two(n: int) -> int:
    return 1 << max(0, (n - 1).bit_length())


def periodogram(x, oversample: int = 1, reference: float | None = None):
    """Averaged periodogram of time-domain symbol columns.

    Each column of ``x`` (samples along axis 0) is zero-padded to
    ``oversample * next_power_of_two(len)`` points and transformed; the
    squared magnitudes are averaged over columns. Frequencies are returned
    in cycles/sample, centred on DC and increasing.

    Parameters
    ----------
    x : array_like
        1-D sequence or ``(n_samples, n_columns)`` array.
    oversample : int
        Zero-padding factor, a power of two.
    reference : float, optional
        Linear power mapped to 0 dB. Defaults to the spectrum maximum, which
        normalizes the peak to 0 dB. Pass a common reference to compare
        spectra on an absolute scale.

    Returns
    -------
    freqs : ndarray
    power_db : ndarray
    """
    x = np.asarray(x, dtype=np.complex128)
    if x.size == 0:
        raise SizeError("periodogram of an empty signal")
    if x.ndim == 1:
        x = x[:, None]
    if oversample < 1 or not is_power_of_two(oversample):
        raise SizeError(f"oversample must be a power of two >= 1, got {oversample}")
    n = x.shape[0]
    nfft = oversample * next_power_of_two(n)
    padded = np.zeros((nfft, x.shape[1]), dtype=np.complex128)
    padded[:n] = x
    power = np.mean(np.abs(dft(padded, axis=0)) ** 2, axis=1) / n
    power = np.fft.fftshift(power)
    freqs = (np.arange(nfft) - nfft // 2) / nfft
    ref = float(np.max(power)) if reference is None else float(reference)
    with np.errstate(divide="ignore"):
        power_db = 10.0 * np.log10(power / ref)
    return freqs, power_db


def _tag_key(tag) -> int:
    if isinstance(tag, int):
        return tag
    return zlib.crc32(str(tag).encode("utf-8"))


@dataclass(frozen=True)
class RandomStream:
    """Seeded random stream addressed by ``(master_seed, lane)``.

    The lane is hashed together with the seed into the generator state
    (``numpy.random.SeedSequence`` spawn key), so any trial can be replayed
    on its own without drawing the trials before it.
    """

    master_seed: int
    lane: tuple = ()

    def __post_init__(self):
        key = tuple(_tag_key(t) for t in self.lane)
        ss = np.random.SeedSequence(entropy=self.master_seed & (2**64 - 1), spawn_key=key)
        object.__setattr__(self, "_rng", np.random.Generator(np.random.PCG64(ss)))

    def child(self, *tags) -> "RandomStream":
        """Stream on a sub-lane (appends ``tags`` to this lane)."""
        return RandomStream(self.master_seed, self.lane + tuple(tags))

    @property
    def generator(self) -> np.random.Generator:
        return self._rng

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self._rng.normal(loc, scale, size)

    def gamma(self, shape, scale=1.0, size=None):
        return self._rng.gamma(shape, scale, size)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self._rng.uniform(low, high, size)

    def integers(self, low, high=None, size=None):
        return self._rng.integers(low, high, size)

    def complex_normal(self, size=None, variance: float = 1.0):
        """Circularly-symmetric complex Gaussian draws, CN(0, variance)."""
        s = np.sqrt(variance / 2.0)
        return s * (self._rng.standard_normal(size) + 1j * self._rng.standard_normal(size))

    def qpsk(self, size=None):
        """Unit-modulus QPSK symbols (+-1 +-1j)/sqrt(2)."""
        shape = () if size is None else tuple(np.atleast_1d(size))
        bits = self._rng.integers(0, 2, size=(2,) + shape)
        return ((1 - 2 * bits[0]) + 1j * (1 - 2 * bits[1])) / np.sqrt(2.0)
