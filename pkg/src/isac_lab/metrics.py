"""Closed-form analysis: ambiguity, resolution, UE counts, complexity, signaling, masks."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .channel import TapCountDistribution
from .numerics import RandomStream, is_power_of_two
from .pilots import Scheme, SchemeParams, SystemParams, as_fraction


def ambiguity(delta_tau, pilot_ratio, n_pilots: int, subcarrier_spacing: float):
    """Delay ambiguity magnitude ``|sin(N_p x) / (N_p sin x)|``, ``x = pi*df*dtau/rho``.

    The argument is reduced modulo pi first, so grating lobes (``sin x = 0``)
    evaluate to their limit value 1 instead of 0/0.
    """
    if n_pilots < 1:
        raise ValueError("n_pilots must be >= 1")
    rho = float(as_fraction(pilot_ratio))
    x = np.pi * subcarrier_spacing * np.asarray(delta_tau, dtype=float) / rho
    xr = x - np.pi * np.round(x / np.pi)
    num = np.sin(n_pilots * xr)
    den = n_pilots * np.sin(xr)
    small = np.abs(xr) < 1e-12
    safe = np.where(small, 1.0, den)
    out = np.where(small, 1.0, np.abs(num / safe))
    return float(out) if out.ndim == 0 else out


def pilot_count(scheme: SchemeParams, params: SystemParams) -> int:
    return int(params.n_subcarriers * scheme.occupied_fraction)


def effective_pilot_ratio(scheme: SchemeParams) -> Fraction:
    """Pilot spacing ratio entering the resolution formulas (1 except for CI)."""
    return scheme.pilot_ratio if scheme.kind is Scheme.CI else Fraction(1)


@dataclass(frozen=True)
class ResolutionReport:
    scheme: str
    n_pilots: int
    delay_resolution: float
    range_resolution: float
    unambiguous_delay: float
    unambiguous_range: float
    delay_sampling_interval: float


def resolution_report(scheme: SchemeParams, params: SystemParams) -> ResolutionReport:
    """Delay/range resolution and unambiguous span for one scheme."""
    rho = float(effective_pilot_ratio(scheme))
    n_p = pilot_count(scheme, params)
    df, c = params.subcarrier_spacing, params.light_speed
    tau_res = rho / (n_p * df)
    tau_ua = rho / df
    return ResolutionReport(scheme.label(), n_p, tau_res, c * tau_res / 2,
                            tau_ua, c * tau_ua / 2, 1.0 / params.sampling_freq)


def expected_ue_count(dist: TapCountDistribution, params: SystemParams, scheme: SchemeParams,
                      n_draws: int = 10**6, stream: RandomStream | None = None) -> float:
    """``N / E[L]`` for APS, the fixed capacity for the baselines.

    ``E[L]`` is ``cp_len / 2`` for a symmetric truncated normal and the
    fixed value for ``fixed``; anything else is estimated from draws.
    """
    if scheme.kind is not Scheme.APS:
        return float(scheme.capacity)
    if dist.kind == "fixed":
        mean = float(dist.value)
    elif dist.is_symmetric:
        mean = dist.cp_len / 2
    else:
        stream = stream or RandomStream(0, ("expected_ue_count",))
        mean = float(np.mean(dist.sample(stream, n_draws)))
    return params.n_subcarriers / mean


def fft_additions(n: int) -> int:
    return 3 * n * int(math.log2(n)) - 3 * n + 4


def fft_multiplications(n: int) -> int:
    return n * int(math.log2(n)) - 3 * n + 4


@dataclass(frozen=True)
class ComplexityReport:
    """Real-operation counts per OFDM symbol.

    ``*_per_ue`` values are the totals divided by the UE count and rounded
    up, which is how the published per-UE figures are reported.
    """

    scheme: str
    n_subcarriers: int
    n_ues: int
    ue_additions: int
    ue_multiplications: int
    bs_additions: int
    bs_multiplications: int
    convention: str = "tabulated"

    @staticmethod
    def _per_ue(total: int, u: int) -> int:
        return -(-total // u)

    @property
    def ue_additions_per_ue(self) -> int:
        return self._per_ue(self.ue_additions, self.n_ues)

    @property
    def ue_multiplications_per_ue(self) -> int:
        return self._per_ue(self.ue_multiplications, self.n_ues)

    @property
    def bs_additions_per_ue(self) -> int:
        return self._per_ue(self.bs_additions, self.n_ues)

    @property
    def bs_multiplications_per_ue(self) -> int:
        return self._per_ue(self.bs_multiplications, self.n_ues)


def bs_fft_count(kind: Scheme, n_ues: int) -> int:
    """Transforms at the BS: one common FFT, the CIR IFFT(s), one FFT per UE."""
    if kind in (Scheme.APS, Scheme.PS):
        return n_ues + 2
    if kind is Scheme.CI:
        return 2 * n_ues + 1
    raise ValueError(f"no complexity model for scheme {kind.value}")


def complexity_report(kind, n_subcarriers: int, n_ues: int,
                      convention: str = "tabulated") -> ComplexityReport:
    """Operation counts for APS, PS or CI.

    ``convention="tabulated"`` reproduces the tabulated figures: BS additions
    are ``K * fft_additions`` with no ``2N`` term. ``convention="formula"``
    uses the general formulas literally, where the BS addition count
    reuses the multiplication kernel plus ``2N``.
    """
    kind = Scheme(kind)
    n, u = n_subcarriers, n_ues
    if not is_power_of_two(n) or n < 2:
        raise ValueError(f"N must be a power of two >= 2, got {n}")
    if u < 1:
        raise ValueError("need at least one UE")
    if convention not in ("formula", "tabulated"):
        raise ValueError(f"unknown convention {convention!r}")
    k = bs_fft_count(kind, u)
    a, m = fft_additions(n), fft_multiplications(n)
    ue_add = u * a
    # phase-shift mapping costs 2N real multiplications per UE symbol
    ue_mul = u * (m + 2 * n) if kind in (Scheme.APS, Scheme.PS) else u * m
    bs_mul = k * m + 2 * n
    bs_add = k * a if convention == "tabulated" else k * m + 2 * n
    return ComplexityReport(kind.value, n, u, ue_add, ue_mul, bs_add, bs_mul, convention)


@dataclass(frozen=True)
class SignalingReport:
    scheme: str
    n_ues: int
    total_bits: float

    @property
    def bits_per_ue(self) -> float:
        return self.total_bits / self.n_ues


def signaling_report(kind, n_subcarriers: int, n_ues: int, ratio=1) -> SignalingReport:
    """Control bits: ``U log2 N`` (APS), ``U log2(1/ratio)`` (PS: CP ratio, CI: pilot ratio)."""
    kind = Scheme(kind)
    if kind is Scheme.APS:
        bits = n_ues * math.log2(n_subcarriers)
    elif kind in (Scheme.PS, Scheme.CI):
        bits = n_ues * math.log2(1 / as_fraction(ratio))
    else:
        raise ValueError(f"no signaling model for scheme {kind.value}")
    if float(bits).is_integer():
        bits = int(bits)
    return SignalingReport(kind.value, n_ues, bits)


REFERENCE_RATIOS = (Fraction(1, 4), Fraction(1, 8), Fraction(1, 16))


@dataclass(frozen=True)
class ReferenceRow:
    scheme: str
    pilot_ratio: Fraction
    cp_ratio: Fraction
    signaling: SignalingReport
    complexity: ComplexityReport


def reference_table(n_subcarriers: int = 256,
                    convention: str = "tabulated") -> list[ReferenceRow]:
    """The nine scheme/ratio rows; APS carries ``2/rho_cp`` UEs (twice the baselines)."""
    rows = []
    for kind in (Scheme.APS, Scheme.PS, Scheme.CI):
        for r in REFERENCE_RATIOS:
            if kind is Scheme.APS:
                u, rho_p, sig_ratio = 2 * r.denominator, Fraction(1), 1
            elif kind is Scheme.PS:
                u, rho_p, sig_ratio = r.denominator, Fraction(1), r
            else:
                u, rho_p, sig_ratio = r.denominator, r, r
            rows.append(ReferenceRow(
                kind.value, rho_p, r,
                signaling_report(kind, n_subcarriers, u, sig_ratio),
                complexity_report(kind, n_subcarriers, u, convention),
            ))
    return rows


def formula_discrepancy(n_subcarriers: int = 256) -> list[str]:
    """Human-readable notes where the literal general formulas miss the tabulated BS additions."""
    notes = []
    pairs = zip(reference_table(n_subcarriers, "formula"),
                reference_table(n_subcarriers, "tabulated"))
    for lit, tab in pairs:
        a1, a2 = lit.complexity.bs_additions, tab.complexity.bs_additions
        if a1 != a2:
            notes.append(
                f"{tab.scheme} rho_cp={tab.cp_ratio}: BS additions {a2} (tabulated convention) "
                f"vs {a1} (general formula with multiplication kernel + 2N)"
            )
    return notes


@dataclass(frozen=True)
class EmissionMask:
    """Piecewise-linear dB limit over normalized frequency."""

    freqs: np.ndarray
    limits_db: np.ndarray

    def __post_init__(self):
        f = np.asarray(self.freqs, dtype=float)
        if f.ndim != 1 or len(f) < 2:
            raise ValueError("a mask needs at least two breakpoints")
        if np.any(np.diff(f) < 0):
            raise ValueError("mask frequencies must be non-decreasing")
        object.__setattr__(self, "freqs", f)
        object.__setattr__(self, "limits_db", np.asarray(self.limits_db, dtype=float))

    def __call__(self, f) -> np.ndarray:
        f = np.asarray(f, dtype=float)
        if np.any(f < self.freqs[0]) or np.any(f > self.freqs[-1]):
            raise ValueError(
                f"mask covers [{self.freqs[0]}, {self.freqs[-1]}] only; "
                f"spectrum spans [{f.min()}, {f.max()}]"
            )
        return np.interp(f, self.freqs, self.limits_db)


def load_mask(path) -> EmissionMask:
    """Read ``freq_normalized dB_limit`` pairs, one per line; ``#`` starts a comment."""
    freqs, limits = [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.replace(",", " ").split()
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'freq dB', got {line!r}")
            freqs.append(float(parts[0]))
            limits.append(float(parts[1]))
    return EmissionMask(np.array(freqs), np.array(limits))


@dataclass(frozen=True)
class MaskReport:
    min_margin_db: float
    worst_freq: float
    violations: list[tuple[float, float]] = field(default_factory=list)

    @property
    def compliant(self) -> bool:
        return not self.violations


def psd_mask_check(freqs, spectrum_db, mask: EmissionMask) -> MaskReport:
    """Margin ``mask - spectrum`` per bin; negative margins are violations."""
    freqs = np.asarray(freqs, dtype=float)
    margin = mask(freqs) - np.asarray(spectrum_db, dtype=float)
    i = int(np.argmin(margin))
    bad = [(float(f), float(mg)) for f, mg in zip(freqs, margin) if mg < 0]
    return MaskReport(float(margin[i]), float(freqs[i]), bad)
