"""Single-trial link simulations used by the Monte Carlo harness.

Every function takes a ``RandomStream`` for one trial and draws all of its
randomness from named sub-lanes, so trials replay independently.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import (NoiseParams, RadarScene, TapCountDistribution, apply_uplink,
                      comm_cfr_batch, draw_reflections, radar_echo)
from .estimation import ci_segments, full_band_segments, separate
from .metrics import resolution_report
from .numerics import RandomStream, add_cp, dft, idft, next_power_of_two, periodogram
from .pilots import (PilotPlan, Scheme, SchemeParams, SystemParams, UePilot,
                     allocate_subcarriers, build_pilot_plan, generate_pilot_grid,
                     power_scaling, transmit_grid)
from .radar import (RangeMse, DelayDopplerMap, bins_to_range_velocity, comb_spacing,
                    delay_doppler_map, detect_peaks, range_mse, sensing_band,
                    zf_radar_response)


def candidate_taps(dist: TapCountDistribution, n_subcarriers: int, scheme: SchemeParams,
                   stream: RandomStream) -> np.ndarray:
    """Tap counts of the candidate UEs offered for admission.

    APS is offered enough candidates (at most N fit since every L >= 1);
    the baselines exactly their capacity.
    """
    count = n_subcarriers + 1 if scheme.kind is Scheme.APS else scheme.capacity
    return dist.sample(stream, count)


def supported_aps_ues(dist: TapCountDistribution, n_subcarriers: int,
                      stream: RandomStream) -> int:
    """Number of UEs APS admits for one tap-count realization."""
    taps = dist.sample(stream, n_subcarriers + 1)
    return int(np.searchsorted(np.cumsum(taps), n_subcarriers, side="right"))


def ue_grids(plan: PilotPlan, base) -> np.ndarray:
    return np.stack([transmit_grid(ue, base, plan.scheme) for ue in plan.ues])


def noiseless_uplink(plan: PilotPlan, base, gains) -> np.ndarray:
    """Superimposed noiseless BS grid for a whole pilot plan.

    ``gains`` is ``(U, L_max)``, zero padded. Full-band schemes share one
    base grid, so the phase-shifted sum over UEs is the transform of a
    single composite impulse response with UE ``u`` starting at ``n_u``.
    """
    n = plan.params.n_subcarriers
    if plan.scheme.kind in (Scheme.APS, Scheme.PS) and not plan.scheme.literal_symbol_phase:
        lmax = gains.shape[1]
        pos = (np.asarray(plan.offsets)[:, None] + np.arange(lmax)[None, :]) % n
        composite = np.zeros(n, dtype=np.complex128)
        np.add.at(composite, pos.ravel(), gains.ravel())
        amp = plan.ues[0].amplitude
        return amp * np.asarray(base) * dft(composite)[:, None]
    cfrs = comm_cfr_batch(gains, n)
    return apply_uplink(ue_grids(plan, base), cfrs, NoiseParams(0.0), None)


def estimation_trial(scheme: SchemeParams, params: SystemParams, dist: TapCountDistribution,
                     snr_dbs, stream: RandomStream, delay_domain: bool = True) -> np.ndarray:
    """UE-averaged channel-estimation MSE at each SNR for one realization.

    The pilots, tap counts and channels are shared by all SNR points; each
    SNR point scales the same unit-variance noise draw, and all of them are
    processed in one call as extra columns.

    With ``delay_domain`` the APS, PS and CI errors are summed over the
    estimated taps instead of over all N subcarriers. The two are equal by
    Parseval (the reconstruction is a DFT of the zero-padded taps) and the
    tap sum skips the per-UE N-point transforms.
    """
    taps = candidate_taps(dist, params.n_subcarriers, scheme, stream.child("taps"))
    plan = build_pilot_plan(scheme, params, taps)
    base = generate_pilot_grid(params, stream.child("pilots"))
    lmax = max(plan.tap_counts)
    gains = stream.child("gains").complex_normal((plan.n_ues, lmax))
    gains[np.arange(lmax)[None, :] >= np.array(plan.tap_counts)[:, None]] = 0
    clean = noiseless_uplink(plan, base, gains)
    snr_dbs = np.atleast_1d(np.asarray(snr_dbs, dtype=float))
    n, m, s = clean.shape + (len(snr_dbs),)
    sigma = np.sqrt(10.0 ** (-snr_dbs / 10.0))
    w = stream.child("noise").complex_normal((n, m, s)) * sigma
    y = (clean[:, :, None] + w).reshape(n, m * s)
    pilots = np.repeat(base, s, axis=1)
    kind = scheme.kind
    if delay_domain and kind is not Scheme.CB:
        if kind is Scheme.CI:
            amp = plan.ues[0].amplitude
            est = ci_segments(y, pilots, [ue.subcarriers for ue in plan.ues],
                              plan.tap_counts, amp)
            d = est.reshape(plan.n_ues, lmax, m, s) - gains[:, :, None, None]
            scale = 1.0
        else:
            # unitary scaling: the true segment is sqrt(N) times the gains
            est = full_band_segments(y, pilots, plan)
            d = est.reshape(plan.n_ues, lmax, m, s) - np.sqrt(n) * gains[:, :, None, None]
            scale = 1.0 / n
        return _sum_sq(d, s) * scale / (plan.n_ues * m)
    cfrs = comm_cfr_batch(gains, params.n_subcarriers)
    est = separate(y, pilots, plan)
    if kind is Scheme.CB:
        # CB is scored on its own block only
        err = np.stack([
            (np.abs(cfrs[u][ue.subcarriers, None, None] - est[u].reshape(-1, m, s)) ** 2)
            .reshape(-1, s).mean(axis=0)
            for u, ue in enumerate(plan.ues)])
        return err.mean(axis=0)
    # every UE is scored on the same N x M entries, so the UE average is the grand mean
    d = est.reshape(plan.n_ues, n, m, s) - cfrs[:, :, None, None]
    return _sum_sq(d, s) / (plan.n_ues * n * m)


def _sum_sq(d: np.ndarray, s: int) -> np.ndarray:
    """Sum of ``|d|^2`` over all axes but the last (length ``s``)."""
    f = np.ascontiguousarray(d).view(np.float64).reshape(-1, 2 * s)
    return np.einsum("ij,ij->j", f, f).reshape(s, 2).sum(axis=1)


def sensing_ue(scheme: SchemeParams, params: SystemParams) -> UePilot:
    """The last UE of the scheme, the one that performs radar sensing."""
    u = (scheme.capacity or 1) - 1
    if scheme.kind is Scheme.PS:
        offset = u * params.cp_len
    else:
        offset = 0
    return UePilot(u, allocate_subcarriers(scheme, params, u), offset, 1, power_scaling(scheme))


def sensing_map(scheme: SchemeParams, params: SystemParams, scene: RadarScene,
                noise: NoiseParams, stream: RandomStream, delay_oversample: int = 1,
                doppler_oversample: int = 1) -> DelayDopplerMap:
    ue = sensing_ue(scheme, params)
    base = generate_pilot_grid(params, stream.child("pilots"))
    tx = transmit_grid(ue, base, scheme)
    echo = radar_echo(tx, scene, params, noise, stream.child("noise"))
    g = zf_radar_response(echo, tx, ue.subcarriers)
    return delay_doppler_map(g, params, sensing_band(scheme, params, ue.index),
                             comb_spacing(scheme), delay_oversample, doppler_oversample)


@dataclass
class RadarTrial:
    mse: RangeMse
    ungated: RangeMse
    estimates: list
    ddmap: DelayDopplerMap


def radar_trial(scheme: SchemeParams, params: SystemParams, scene: RadarScene,
                snr_db: float, stream: RandomStream, random_reflections: bool = True,
                delay_oversample: int = 1, doppler_oversample: int = 1,
                gate_cells: float | None = 1.0) -> RadarTrial:
    """One sensing snapshot: echo, map, top-P peaks, range MSE.

    ``mse`` associates an estimate with a target only inside a gate of
    ``gate_cells`` range-resolution cells of the scheme (``None`` turns the
    gate off); ``ungated`` always uses plain nearest-target matching.
    """
    if random_reflections:
        scene = draw_reflections(scene, stream.child("reflections"))
    ddm = sensing_map(scheme, params, scene, NoiseParams.from_snr_db(snr_db), stream,
                      delay_oversample, doppler_oversample)
    det = detect_peaks(ddm, top_p=scene.n_targets)
    est = [bins_to_range_velocity(ddm, d, c) for d, c in det.bins]
    gate = None
    if gate_cells is not None:
        gate = gate_cells * resolution_report(scheme, params).range_resolution
    return RadarTrial(range_mse(scene, est, gate), range_mse(scene, est), est, ddm)


def time_domain_symbols(scheme: SchemeParams, params: SystemParams, stream: RandomStream,
                        time_oversample: int = 4, with_cp: bool = True) -> np.ndarray:
    """Oversampled time-domain pilot symbols of the sensing UE, one per column.

    The N subcarriers are centred in an ``time_oversample * N`` point inverse
    transform (``1/sqrt(N)`` scaling), so out-of-band emission is visible.
    """
    n = params.n_subcarriers
    ue = sensing_ue(scheme, params)
    base = generate_pilot_grid(params, stream.child("pilots"))
    grid = transmit_grid(ue, base, scheme)
    big = np.zeros((time_oversample * n, params.n_symbols), dtype=np.complex128)
    # subcarrier k sits at baseband frequency (k - N/2) * df
    centred = np.fft.ifftshift(grid, axes=0)
    big[: n // 2] = centred[: n // 2]
    big[-(n // 2):] = centred[n // 2:]
    x = idft(big, axis=0) / np.sqrt(n)
    if with_cp:
        x = add_cp(x, time_oversample * params.cp_len, axis=0)
    return x


def pilot_spectrum(scheme: SchemeParams, params: SystemParams, stream: RandomStream,
                   time_oversample: int = 4, oversample: int = 2,
                   reference: float | None = None):
    """Periodogram of the sensing UE's pilots on a bandwidth-normalized axis.

    Returns ``(freq, power_db)`` with ``freq`` in units of the occupied
    bandwidth ``N * df`` (the band edges sit at +-0.5).
    """
    x = time_domain_symbols(scheme, params, stream, time_oversample)
    f, p = periodogram(x, oversample, reference)
    return f * time_oversample, p


def spectrum_axis(params: SystemParams, time_oversample: int = 4, oversample: int = 2,
                  with_cp: bool = True) -> np.ndarray:
    """Frequency axis returned by ``pilot_spectrum`` (bandwidth units)."""
    n = time_oversample * (params.n_subcarriers + (params.cp_len if with_cp else 0))
    nfft = oversample * next_power_of_two(n)
    return (np.arange(nfft) - nfft // 2) / nfft * time_oversample


def total_pilot_power(scheme: SchemeParams, params: SystemParams, stream: RandomStream) -> float:
    """Frequency-domain pilot energy per OFDM symbol of the sensing UE."""
    ue = sensing_ue(scheme, params)
    grid = transmit_grid(ue, generate_pilot_grid(params, stream.child("pilots")), scheme)
    return float(np.sum(np.abs(grid) ** 2) / params.n_symbols)
