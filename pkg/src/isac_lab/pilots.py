"""Pilot schemes, UE admission and transmit-side phase-shift mapping.

Four schemes share one OFDM numerology:

* ``APS`` - full-band pilots, UE offsets packed back to back by tap count.
* ``PS``  - full-band pilots, UE offsets fixed at multiples of the CP length.
* ``CI``  - interleaved (comb) pilots, one comb per UE.
* ``CB``  - contiguous pilot blocks, one block per UE.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .numerics import RandomStream, is_power_of_two

SPEED_OF_LIGHT = 299_792_458.0


class Scheme(str, enum.Enum):
    APS = "APS"
    PS = "PS"
    CI = "CI"
    CB = "CB"


class PowerMode(str, enum.Enum):
    PC = "PC"
    NON_PC = "NonPC"


def as_fraction(value) -> Fraction:
    """Parse ``1/4``, ``0.25``, ``Fraction(1, 4)`` or ``1`` into a Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        return Fraction(value).limit_denominator(1 << 20)
    return Fraction(value)


@dataclass(frozen=True)
class SystemParams:
    """OFDM numerology.

    ``sampling_freq`` is always ``n_subcarriers * subcarrier_spacing``.
    """

    n_subcarriers: int = 256
    n_symbols: int = 1
    subcarrier_spacing: float = 60e3
    cp_len: int = 64
    carrier_freq: float = 24e9
    light_speed: float = SPEED_OF_LIGHT

    def __post_init__(self):
        n, m = self.n_subcarriers, self.n_symbols
        if not is_power_of_two(n):
            raise ValueError(f"n_subcarriers must be a power of two, got {n}")
        if not is_power_of_two(m):
            raise ValueError(f"n_symbols must be a power of two, got {m}")
        if not 0 < self.cp_len < n:
            raise ValueError(f"cp_len must lie in (0, {n}), got {self.cp_len}")
        if self.subcarrier_spacing <= 0:
            raise ValueError("subcarrier_spacing must be positive")

    @property
    def sampling_freq(self) -> float:
        return self.n_subcarriers * self.subcarrier_spacing

    @property
    def symbol_duration(self) -> float:
        return 1.0 / self.subcarrier_spacing

    @property
    def cp_duration(self) -> float:
        return self.cp_len / self.sampling_freq

    @property
    def cp_ratio(self) -> Fraction:
        return Fraction(self.cp_len, self.n_subcarriers)


@dataclass(frozen=True)
class SchemeParams:
    kind: Scheme
    pilot_ratio: Fraction = Fraction(1)
    cp_ratio: Fraction = Fraction(1, 4)
    block_ratio: Fraction = Fraction(1)
    power_mode: PowerMode = PowerMode.PC
    # variant with the symbol index inside the phase term, for comparison only
    literal_symbol_phase: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", Scheme(self.kind))
        object.__setattr__(self, "power_mode", PowerMode(self.power_mode))
        for name in ("pilot_ratio", "cp_ratio", "block_ratio"):
            r = as_fraction(getattr(self, name))
            if not 0 < r <= 1:
                raise ValueError(f"{name} must lie in (0, 1], got {r}")
            object.__setattr__(self, name, r)
        if self.kind is Scheme.CI and self.pilot_ratio.numerator != 1:
            raise ValueError(f"CI needs pilot_ratio = 1/integer, got {self.pilot_ratio}")
        if self.kind is Scheme.CB and self.block_ratio.numerator != 1:
            raise ValueError(f"CB needs block_ratio = 1/integer, got {self.block_ratio}")
        if self.kind is Scheme.PS and self.cp_ratio.numerator != 1:
            raise ValueError(f"PS needs cp_ratio = 1/integer, got {self.cp_ratio}")
        if self.kind in (Scheme.APS, Scheme.PS) and self.pilot_ratio != 1:
            raise ValueError(f"{self.kind.value} uses full-band pilots (pilot_ratio = 1)")

    @property
    def occupied_fraction(self) -> Fraction:
        if self.kind is Scheme.CI:
            return self.pilot_ratio
        if self.kind is Scheme.CB:
            return self.block_ratio
        return Fraction(1)

    @property
    def capacity(self) -> int | None:
        """Fixed UE count of the orthogonal baselines; ``None`` for APS."""
        if self.kind is Scheme.CI:
            return self.pilot_ratio.denominator
        if self.kind is Scheme.CB:
            return self.block_ratio.denominator
        if self.kind is Scheme.PS:
            return self.cp_ratio.denominator
        return None

    def label(self) -> str:
        if self.kind is Scheme.CI:
            return f"CI({self.pilot_ratio})"
        if self.kind is Scheme.CB:
            return f"CB({self.block_ratio})"
        if self.kind is Scheme.PS:
            return f"PS({self.cp_ratio})"
        return "APS"


@dataclass(frozen=True)
class AdmissionResult:
    supported_ue_count: int
    admitted: tuple[int, ...]
    rejected_count: int
    shortfall: int = 0


@dataclass(frozen=True)
class UePilot:
    index: int
    subcarriers: np.ndarray
    offset: int
    tap_count: int
    amplitude: float


@dataclass(frozen=True)
class PilotPlan:
    scheme: SchemeParams
    params: SystemParams
    ues: tuple[UePilot, ...] = field(default_factory=tuple)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def offsets(self) -> list[int]:
        return [u.offset for u in self.ues]

    @property
    def tap_counts(self) -> list[int]:
        return [u.tap_count for u in self.ues]


def generate_pilot_grid(params: SystemParams, stream: RandomStream) -> np.ndarray:
    """N x M grid of unit-modulus QPSK pilots."""
    return stream.qpsk((params.n_subcarriers, params.n_symbols))


def _validate_taps(tap_counts, params: SystemParams) -> list[int]:
    taps = [int(t) for t in tap_counts]
    hi = params.cp_len - 1
    for i, t in enumerate(taps):
        if not 1 <= t <= hi:
            raise ValueError(f"tap count #{i} = {t} outside [1, {hi}]")
    return taps


def admit_ues(scheme: SchemeParams, params: SystemParams, tap_counts) -> AdmissionResult:
    """Admit candidate UEs in order.

    APS keeps the longest prefix whose tap counts sum to at most N. The
    baselines take exactly their fixed capacity, reporting a shortfall when
    fewer candidates are offered.
    """
    taps = _validate_taps(tap_counts, params)
    if scheme.kind is Scheme.APS:
        csum = np.cumsum(taps)
        u = int(np.searchsorted(csum, params.n_subcarriers, side="right"))
        return AdmissionResult(u, tuple(taps[:u]), len(taps) - u)
    cap = scheme.capacity
    admitted = tuple(taps[:cap])
    return AdmissionResult(cap, admitted, len(taps) - len(admitted), cap - len(admitted))


def compute_offsets(tap_counts) -> list[int]:
    """Exclusive prefix sum of the admitted tap counts (first UE at 0)."""
    offsets, acc = [], 0
    for t in tap_counts:
        offsets.append(acc)
        acc += int(t)
    return offsets


def phase_shift_vector(n_subcarriers: int, offset: int) -> np.ndarray:
    k = np.arange(n_subcarriers)
    return np.exp(-2j * np.pi * k * offset / n_subcarriers)


def apply_phase_shift(grid, offset: int, literal_symbol_phase: bool = False) -> np.ndarray:
    """Rotate each subcarrier by ``exp(-2j*pi*k*offset/N)``.

    With ``literal_symbol_phase`` the rotation also scales with the symbol
    index m, i.e. ``exp(-2j*pi*m*k*offset/N)``. That variant is kept only for
    comparison: the receiver's extraction window is symbol independent.
    """
    grid = np.asarray(grid, dtype=np.complex128)
    n = grid.shape[0]
    if not 0 <= offset < n:
        raise ValueError(f"offset {offset} outside [0, {n})")
    if not literal_symbol_phase:
        return grid * phase_shift_vector(n, offset)[:, None]
    k = np.arange(n)[:, None]
    m = np.arange(grid.shape[1])[None, :]
    return grid * np.exp(-2j * np.pi * ((m * k * offset) % n) / n)


def allocate_subcarriers(scheme: SchemeParams, params: SystemParams, ue_index: int) -> np.ndarray:
    n = params.n_subcarriers
    if scheme.kind in (Scheme.APS, Scheme.PS):
        if scheme.capacity is not None and not 0 <= ue_index < scheme.capacity:
            raise IndexError(f"UE index {ue_index} outside [0, {scheme.capacity})")
        if ue_index < 0:
            raise IndexError(f"negative UE index {ue_index}")
        return np.arange(n)
    cap = scheme.capacity
    if not 0 <= ue_index < cap:
        raise IndexError(f"UE index {ue_index} outside [0, {cap})")
    if scheme.kind is Scheme.CI:
        return np.arange(ue_index, n, cap)
    size = n * scheme.block_ratio
    if size.denominator != 1:
        raise ValueError(f"N * block_ratio = {size} is not an integer block size")
    size = int(size)
    return np.arange(ue_index * size, (ue_index + 1) * size)


def cp_length_requirement(max_taps: int, max_range: float, params: SystemParams) -> int:
    """Smallest CP covering both the longest channel and the farthest echo."""
    if max_taps < 1 or max_range < 0:
        raise ValueError("need max_taps >= 1 and max_range >= 0")
    ratio = 2.0 * params.sampling_freq * max_range / params.light_speed
    # guard against ceil(30.0000000001) from binary rounding
    echo = math.ceil(round(ratio, 9))
    return max(int(max_taps), echo)


def power_scaling(scheme: SchemeParams) -> float:
    """Per-subcarrier pilot amplitude.

    PC keeps unit power on every occupied subcarrier; NonPC raises it by
    ``sqrt(1/occupied_fraction)`` so every scheme radiates the same total
    power per OFDM symbol.
    """
    if scheme.power_mode is PowerMode.PC:
        return 1.0
    return math.sqrt(1.0 / float(scheme.occupied_fraction))


def build_pilot_plan(scheme: SchemeParams, params: SystemParams, tap_counts) -> PilotPlan:
    """Admit UEs and assign subcarriers, offsets and amplitudes."""
    if scheme.kind is Scheme.PS and scheme.cp_ratio != params.cp_ratio:
        raise ValueError(
            f"PS cp_ratio {scheme.cp_ratio} disagrees with cp_len/N = {params.cp_ratio}"
        )
    result = admit_ues(scheme, params, tap_counts)
    taps = result.admitted
    if scheme.kind is Scheme.APS:
        offsets = compute_offsets(taps)
    elif scheme.kind is Scheme.PS:
        offsets = [u * params.cp_len for u in range(len(taps))]
    else:
        offsets = [0] * len(taps)
    amp = power_scaling(scheme)
    ues = tuple(
        UePilot(u, allocate_subcarriers(scheme, params, u), offsets[u], taps[u], amp)
        for u in range(len(taps))
    )
    return PilotPlan(scheme, params, ues)


def transmit_grid(ue: UePilot, base_grid, scheme: SchemeParams) -> np.ndarray:
    """Frequency-domain pilot grid radiated by one UE.

    Unoccupied subcarriers are zero; occupied ones carry the scaled base
    pilot, phase-shifted by the UE offset for the full-band schemes.
    """
    base = np.asarray(base_grid, dtype=np.complex128)
    out = np.zeros_like(base)
    out[ue.subcarriers] = ue.amplitude * base[ue.subcarriers]
    if ue.offset:
        out = apply_phase_shift(out, ue.offset, scheme.literal_symbol_phase)
    return out
