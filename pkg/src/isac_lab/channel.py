"""Uplink communication channels, radar scenes and the frequency-domain link."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .numerics import RandomStream, dft
from .pilots import SystemParams


@dataclass(frozen=True)
class TapCountDistribution:
    """Distribution of per-UE channel tap counts, supported on ``[1, cp_len-1]``.

    ``kind`` is one of ``truncated_normal`` (``mean``, ``std``), ``gamma``
    (``shape``, ``scale``), ``mirrored_gamma`` (``shape``, ``scale``) or
    ``fixed`` (``value``). Continuous draws are rounded to the nearest
    integer and then truncated to the support by rejection. The mirrored
    gamma draws ``g`` from the gamma law truncated to ``[0, cp_len]``,
    returns ``cp_len - g`` and clamps the rounded value into the support.
    """

    kind: str
    cp_len: int
    mean: float | None = None
    std: float | None = None
    shape: float = 2.0
    scale: float = 2.0
    value: int = 1

    KINDS = ("truncated_normal", "gamma", "mirrored_gamma", "fixed")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown tap distribution {self.kind!r}; choose from {self.KINDS}")
        if self.cp_len < 2:
            raise ValueError(f"empty tap-count support [1, {self.cp_len - 1}]")
        if self.kind == "truncated_normal":
            if self.mean is None:
                object.__setattr__(self, "mean", self.cp_len / 2)
            if self.std is None:
                object.__setattr__(self, "std", self.cp_len / 4)
            if self.std <= 0:
                raise ValueError("truncated_normal std must be positive")
        if self.kind in ("gamma", "mirrored_gamma") and (self.shape <= 0 or self.scale <= 0):
            raise ValueError("gamma shape and scale must be positive")
        if self.kind == "fixed" and not 1 <= self.value <= self.cp_len - 1:
            raise ValueError(f"fixed tap count {self.value} outside [1, {self.cp_len - 1}]")

    @property
    def support(self) -> tuple[int, int]:
        return 1, self.cp_len - 1

    @property
    def is_symmetric(self) -> bool:
        """True for a truncated normal centred on the support midpoint."""
        return self.kind == "truncated_normal" and self.mean == self.cp_len / 2

    def sample(self, stream: RandomStream, size: int) -> np.ndarray:
        lo, hi = self.support
        if self.kind == "fixed":
            return np.full(size, self.value, dtype=np.int64)
        if self.kind == "mirrored_gamma":
            g = _rejection(lambda n: stream.gamma(self.shape, self.scale, n),
                           lambda x: x <= self.cp_len, size)
            return np.clip(np.rint(self.cp_len - g), lo, hi).astype(np.int64)
        if self.kind == "gamma":
            draw = lambda n: np.rint(stream.gamma(self.shape, self.scale, n))
        else:
            draw = lambda n: np.rint(stream.normal(self.mean, self.std, n))
        out = _rejection(draw, lambda x: (x >= lo) & (x <= hi), size)
        return out.astype(np.int64)


def _rejection(draw, accept, size: int, max_rounds: int = 10_000) -> np.ndarray:
    out = np.empty(0)
    for _ in range(max_rounds):
        if out.size >= size:
            return out[:size]
        x = draw(max(2 * (size - out.size), 16))
        out = np.concatenate([out, x[accept(x)]])
    raise RuntimeError("rejection sampler accepted too few draws; check the support")


def sample_tap_count(dist: TapCountDistribution, stream: RandomStream) -> int:
    return int(dist.sample(stream, 1)[0])


@dataclass(frozen=True)
class CommChannel:
    """Sample-spaced multipath channel, one CN(0,1) gain per tap."""

    gains: np.ndarray

    @property
    def tap_count(self) -> int:
        return len(self.gains)

    def delays(self, params: SystemParams) -> np.ndarray:
        return np.arange(self.tap_count) / params.sampling_freq


def realize_comm_channel(tap_count: int, stream: RandomStream) -> CommChannel:
    if tap_count < 1:
        raise ValueError(f"tap count must be >= 1, got {tap_count}")
    return CommChannel(stream.complex_normal(tap_count))


def comm_cfr(ch: CommChannel, params: SystemParams) -> np.ndarray:
    """Length-N frequency response, the DFT of the zero-padded taps."""
    n = params.n_subcarriers
    if ch.tap_count > n:
        raise ValueError(f"{ch.tap_count} taps do not fit in {n} subcarriers")
    h = np.zeros(n, dtype=np.complex128)
    h[: ch.tap_count] = ch.gains
    return dft(h)


def comm_cfr_batch(gains: np.ndarray, n_subcarriers: int) -> np.ndarray:
    """CFRs of several channels at once; ``gains`` is ``(U, L_max)`` zero padded."""
    h = np.zeros((gains.shape[0], n_subcarriers), dtype=np.complex128)
    h[:, : gains.shape[1]] = gains
    return dft(h, axis=1)


@dataclass(frozen=True)
class RadarTarget:
    range_m: float
    velocity_mps: float = 0.0
    reflection: complex = 1.0 + 0.0j

    def delay(self, params: SystemParams) -> float:
        return 2.0 * self.range_m / params.light_speed

    def doppler(self, params: SystemParams) -> float:
        return 2.0 * self.velocity_mps * params.carrier_freq / params.light_speed


@dataclass(frozen=True)
class RadarScene:
    targets: tuple[RadarTarget, ...]
    known_target_count: bool = True

    @property
    def n_targets(self) -> int:
        return len(self.targets)

    def validate(self, params: SystemParams) -> None:
        if not self.targets:
            raise ValueError("a sensing scene needs at least one target")
        t_sym = params.symbol_duration
        for i, tgt in enumerate(self.targets):
            tau = tgt.delay(params)
            if not 0 <= tau < t_sym:
                raise ValueError(f"target {i}: delay {tau:.3e}s outside [0, {t_sym:.3e})")
            if abs(tgt.doppler(params)) >= 0.5 / t_sym:
                raise ValueError(f"target {i}: Doppler exceeds the unambiguous span")

    def with_reflections(self, reflections) -> "RadarScene":
        return RadarScene(
            tuple(RadarTarget(t.range_m, t.velocity_mps, complex(a))
                  for t, a in zip(self.targets, reflections)),
            self.known_target_count,
        )


def draw_reflections(scene: RadarScene, stream: RandomStream) -> RadarScene:
    """Replace every reflection coefficient with a CN(0,1) draw."""
    return scene.with_reflections(stream.complex_normal(scene.n_targets))


def radar_cfr(scene: RadarScene, params: SystemParams) -> np.ndarray:
    """N x M radar response: sum of per-target delay and Doppler phase ramps."""
    scene.validate(params)
    k = np.arange(params.n_subcarriers)
    m = np.arange(params.n_symbols)
    g = np.zeros((params.n_subcarriers, params.n_symbols), dtype=np.complex128)
    for tgt in scene.targets:
        delay_ramp = np.exp(-2j * np.pi * k * params.subcarrier_spacing * tgt.delay(params))
        doppler_ramp = np.exp(2j * np.pi * m * params.symbol_duration * tgt.doppler(params))
        g += tgt.reflection * np.outer(delay_ramp, doppler_ramp)
    return g


@dataclass(frozen=True)
class NoiseParams:
    """AWGN level. ``snr_db`` is referenced to unit pilot power per sample."""

    variance: float

    @classmethod
    def from_snr_db(cls, snr_db: float) -> "NoiseParams":
        return cls(10.0 ** (-snr_db / 10.0))

    @property
    def snr_db(self) -> float:
        return -10.0 * np.log10(self.variance)

    def draw(self, shape, stream: RandomStream) -> np.ndarray:
        if self.variance == 0:
            return np.zeros(shape, dtype=np.complex128)
        return stream.complex_normal(shape, self.variance)


NOISELESS = NoiseParams(0.0)


def apply_uplink(tx_grids, cfrs, noise: NoiseParams, stream: RandomStream) -> np.ndarray:
    """Received BS grid ``sum_u H_u(k) * X_u(k, m) + W(k, m)``.

    ``tx_grids`` is a sequence (or ``(U, N, M)`` array) of per-UE pilot grids
    and ``cfrs`` the matching ``(U, N)`` frequency responses.
    """
    x = np.asarray(tx_grids, dtype=np.complex128)
    h = np.asarray(cfrs, dtype=np.complex128)
    if x.ndim != 3 or h.ndim != 2:
        raise ValueError("expected (U, N, M) pilot grids and (U, N) channels")
    if x.shape[0] != h.shape[0]:
        raise ValueError(f"{x.shape[0]} pilot grids but {h.shape[0]} channels")
    if x.shape[0] == 0:
        raise ValueError("uplink needs at least one UE")
    y = np.einsum("un,unm->nm", h, x)
    return y + noise.draw(y.shape, stream)


def radar_echo(tx_grid, scene: RadarScene, params: SystemParams,
               noise: NoiseParams, stream: RandomStream) -> np.ndarray:
    """Monostatic echo of a UE's own pilot grid."""
    x = np.asarray(tx_grid, dtype=np.complex128)
    return radar_cfr(scene, params) * x + noise.draw(x.shape, stream)
