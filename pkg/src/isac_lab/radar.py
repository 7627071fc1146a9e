"""UE-side monostatic radar processing: ZF response, delay-Doppler map, peaks."""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import RadarScene
from .numerics import dft, idft, is_power_of_two
from .pilots import SchemeParams, Scheme, SystemParams


def zf_radar_response(echo, tx_grid, occupied) -> np.ndarray:
    """Divide the echo by the transmitted grid on occupied subcarriers, zero elsewhere."""
    echo = np.asarray(echo, dtype=np.complex128)
    tx = np.asarray(tx_grid, dtype=np.complex128)
    out = np.zeros_like(echo)
    occ = np.asarray(occupied)
    out[occ] = echo[occ] / tx[occ]
    return out


def sensing_band(scheme: SchemeParams, params: SystemParams, ue_index: int) -> tuple[int, int]:
    """``(first_subcarrier, length)`` of the band a UE's map is formed over.

    A block scheme resolves delay only across its own block; every other
    scheme spans the full band (combs are zero-filled in between).
    """
    n = params.n_subcarriers
    if scheme.kind is Scheme.CB:
        size = int(n * scheme.block_ratio)
        return ue_index * size, size
    return 0, n


def comb_spacing(scheme: SchemeParams) -> int:
    return scheme.pilot_ratio.denominator if scheme.kind is Scheme.CI else 1


@dataclass
class DelayDopplerMap:
    """Delay-Doppler power map; Doppler bins re-centred to ``[-M_d/2, M_d/2)``.

    Attributes
    ----------
    power : ndarray
        ``(n_delay_bins, n_doppler_bins)`` non-negative power.
    delay_bin : float
        Width of one delay bin in seconds.
    doppler_bin : float
        Width of one Doppler bin in Hz.
    unambiguous_delay_bins : int
        Delay bins before the first grating image / wrap.
    """

    power: np.ndarray
    delay_bin: float
    doppler_bin: float
    unambiguous_delay_bins: int
    params: SystemParams
    delay_oversample: int = 1
    doppler_oversample: int = 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.power.shape

    def doppler_index(self, col: int) -> int:
        """Signed Doppler bin of array column ``col``."""
        return col - self.power.shape[1] // 2

    def range_axis(self) -> np.ndarray:
        c = self.params.light_speed
        return np.arange(self.power.shape[0]) * self.delay_bin * c / 2

    def velocity_axis(self) -> np.ndarray:
        p = self.params
        idx = np.arange(self.power.shape[1]) - self.power.shape[1] // 2
        return idx * self.doppler_bin * p.light_speed / (2 * p.carrier_freq)

    def to_db(self) -> np.ndarray:
        peak = self.power.max()
        with np.errstate(divide="ignore"):
            return 10 * np.log10(self.power / peak)

    def to_csv(self, path) -> None:
        """Rows are delay bins, columns Doppler bins, values dB re. peak."""
        db = self.to_db()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delay_bin"] + [str(self.doppler_index(c)) for c in range(db.shape[1])])
            for d, row in enumerate(db):
                w.writerow([d] + [f"{v:.4f}" for v in row])


def delay_doppler_map(G, params: SystemParams, band: tuple[int, int] | None = None,
                      comb: int = 1, delay_oversample: int = 1,
                      doppler_oversample: int = 1) -> DelayDopplerMap:
    """2-D transform of a radar response into delay-Doppler power.

    Subcarriers outside ``band`` are ignored; inside it, unoccupied entries
    of ``G`` are expected to be zero. The map is normalized by
    ``1 / (n_band * M)`` and zero-padded by the oversampling factors.
    """
    G = np.asarray(G, dtype=np.complex128)
    n_all, m = G.shape
    start, n_band = band if band is not None else (0, n_all)
    if not is_power_of_two(n_band) or start < 0 or start + n_band > n_all:
        raise ValueError(f"invalid sensing band ({start}, {n_band})")
    for f in (delay_oversample, doppler_oversample):
        if not is_power_of_two(f):
            raise ValueError(f"oversampling factors must be powers of two, got {f}")
    nd, md = n_band * delay_oversample, m * doppler_oversample
    padded = np.zeros((nd, md), dtype=np.complex128)
    padded[:n_band, :m] = G[start: start + n_band]
    # kernels conjugate to the channel's phase ramps: a target at delay tau and
    # Doppler nu peaks at (+tau*n_band*df, +nu*M*T)
    grid = dft(idft(padded, axis=0), axis=1)
    power = np.abs(grid) ** 2 / (n_band * m)
    power = np.fft.fftshift(power, axes=1)
    t_sym = params.symbol_duration
    delay_bin = 1.0 / (n_band * params.subcarrier_spacing * delay_oversample)
    doppler_bin = 1.0 / (m * t_sym * doppler_oversample)
    return DelayDopplerMap(power, delay_bin, doppler_bin, nd // comb, params,
                           delay_oversample, doppler_oversample)


@dataclass(frozen=True)
class PeakDetection:
    bins: list[tuple[int, int]]
    powers: list[float]
    shortfall: bool = False


def local_maxima(power: np.ndarray) -> np.ndarray:
    """Boolean mask of 8-neighbourhood maxima on a circular grid.

    A cell must beat neighbours that come earlier in raster order strictly
    and those after it weakly, so a two-cell plateau yields one maximum.
    """
    mask = np.ones(power.shape, dtype=bool)
    for dd in (-1, 0, 1):
        for dl in (-1, 0, 1):
            if dd == 0 and dl == 0:
                continue
            nb = np.roll(power, shift=(dd, dl), axis=(0, 1))
            # np.roll by +1 brings the earlier neighbour into place
            earlier = dd > 0 or (dd == 0 and dl > 0)
            mask &= power > nb if earlier else power >= nb
    return mask & (power > 0)


def detect_peaks(ddm: DelayDopplerMap, top_p: int | None = None,
                 threshold_fraction: float | None = None,
                 restrict_unambiguous: bool = True) -> PeakDetection:
    """Pick target peaks by count (``top_p``) or fixed fraction of the maximum.

    Ties are broken by lower delay bin, then lower ``|Doppler|`` bin.
    """
    if (top_p is None) == (threshold_fraction is None):
        raise ValueError("give exactly one of top_p or threshold_fraction")
    if top_p is not None and top_p < 1:
        raise ValueError("top_p must be >= 1")
    if threshold_fraction is not None and not 0 < threshold_fraction < 1:
        raise ValueError("threshold_fraction must lie in (0, 1)")
    power = ddm.power
    mask = local_maxima(power)
    if restrict_unambiguous:
        mask[ddm.unambiguous_delay_bins:] = False
    d_idx, c_idx = np.nonzero(mask)
    vals = power[d_idx, c_idx]
    half = power.shape[1] // 2
    order = sorted(range(len(vals)), key=lambda i: (-vals[i], d_idx[i], abs(c_idx[i] - half)))
    if threshold_fraction is not None:
        floor = threshold_fraction * power.max()
        order = [i for i in order if vals[i] >= floor]
        shortfall = False
    else:
        shortfall = len(order) < top_p
        order = order[:top_p]
    return PeakDetection([(int(d_idx[i]), int(c_idx[i])) for i in order],
                         [float(vals[i]) for i in order], shortfall)


@dataclass(frozen=True)
class TargetEstimate:
    range_m: float
    velocity_mps: float
    power: float
    delay_bin: int
    doppler_bin: int


def bins_to_range_velocity(ddm: DelayDopplerMap, delay_idx: int, col: int) -> TargetEstimate:
    """Convert a map cell (array indices) to range and radial velocity."""
    nd, md = ddm.shape
    if not (0 <= delay_idx < nd and 0 <= col < md):
        raise IndexError(f"cell ({delay_idx}, {col}) outside map {ddm.shape}")
    p = ddm.params
    ell = ddm.doppler_index(col)
    rng = delay_idx * ddm.delay_bin * p.light_speed / 2
    vel = ell * ddm.doppler_bin * p.light_speed / (2 * p.carrier_freq)
    return TargetEstimate(rng, vel, float(ddm.power[delay_idx, col]), delay_idx, ell)


@dataclass(frozen=True)
class RangeMse:
    """Range MSE over matched targets.

    ``misses`` counts true targets left unmatched and ``false_alarms``
    estimates that matched nothing; both are excluded from ``mse``.
    """

    mse: float
    pairs: list[tuple[int, int]]
    misses: int
    false_alarms: int = 0

    @property
    def partial(self) -> bool:
        return self.misses > 0


def range_mse(scene: RadarScene, estimates, gate: float | None = None) -> RangeMse:
    """Mean squared range error after greedy nearest-target matching.

    Estimates are visited in decreasing peak power; each claims the nearest
    still-unmatched true target. With a ``gate`` (metres), an estimate whose
    nearest free target is farther than the gate claims nothing and counts
    as a false alarm. Unmatched targets are misses and are left out of the
    mean.
    """
    truth = [t.range_m for t in scene.targets]
    free = set(range(len(truth)))
    pairs, sq = [], []
    false_alarms = 0
    for j in sorted(range(len(estimates)), key=lambda j: -estimates[j].power):
        if not free:
            false_alarms += 1
            continue
        r = estimates[j].range_m
        p = min(free, key=lambda i: (abs(truth[i] - r), i))
        if gate is not None and abs(truth[p] - r) > gate:
            false_alarms += 1
            continue
        free.discard(p)
        pairs.append((p, j))
        sq.append((truth[p] - r) ** 2)
    mse = float(np.mean(sq)) if sq else float("nan")
    return RangeMse(mse, pairs, len(free), false_alarms)
