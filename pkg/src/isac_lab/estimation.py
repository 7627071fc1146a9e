"""BS-side channel estimation and per-UE CFR separation for every scheme.

Scaling conventions: the composite CIR is ``idft(H) / sqrt(N)`` per column,
and each extracted segment is brought back with ``dft(.) / sqrt(N)`` so the
pair is an exact round trip.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .numerics import dft, idft
from .pilots import PilotPlan, Scheme, phase_shift_vector


_SHORT_SEGMENT = 4


class AmbiguityError(ValueError):
    """A CIR is longer than the unambiguous window of its pilot comb."""


def estimate_composite_cfr(received, pilots) -> np.ndarray:
    """Zero-forcing estimate ``Y / X`` of the superimposed frequency response."""
    pilots = np.asarray(pilots, dtype=np.complex128)
    if np.any(pilots == 0):
        raise ZeroDivisionError("pilot grid has zero entries")
    return np.asarray(received, dtype=np.complex128) / pilots


def composite_cir(cfr) -> np.ndarray:
    """Per-column delay-domain response of ``cfr`` (delay along axis 0)."""
    cfr = np.asarray(cfr, dtype=np.complex128)
    return idft(cfr, axis=0) / np.sqrt(cfr.shape[0])


def extract_ue_cfr(cir, offset: int, tap_count: int) -> np.ndarray:
    """Rebuild one UE's physical CFR from its delay segment.

    Keeps delay bins ``[offset, offset + tap_count)``, transforms back and
    removes the UE's own phase ramp ``exp(-2j*pi*k*offset/N)``.
    """
    cir = np.asarray(cir, dtype=np.complex128)
    n = cir.shape[0]
    if offset < 0 or tap_count < 1 or offset + tap_count > n:
        raise ValueError(f"segment [{offset}, {offset + tap_count}) outside [0, {n})")
    seg = np.zeros_like(cir)
    seg[offset: offset + tap_count] = cir[offset: offset + tap_count]
    cfr = dft(seg, axis=0) / np.sqrt(n)
    ramp = np.conj(phase_shift_vector(n, offset))
    return cfr * ramp.reshape((n,) + (1,) * (cir.ndim - 1))


def _gather(cir, offsets, tap_counts):
    n = cir.shape[0]
    offsets = np.asarray(offsets, dtype=np.int64)
    taps = np.asarray(tap_counts, dtype=np.int64)
    if np.any(offsets < 0) or np.any(taps < 1) or np.any(offsets + taps > n):
        raise ValueError("a UE segment falls outside the delay axis")
    lmax = int(taps.max())
    idx = offsets[:, None] + np.arange(lmax)[None, :]
    keep = np.arange(lmax)[None, :] < taps[:, None]
    idx = np.where(keep, idx, 0)
    mask = keep.reshape(keep.shape + (1,) * (cir.ndim - 1))
    return np.where(mask, cir[idx], 0)


def extract_all(cir, offsets, tap_counts) -> np.ndarray:
    """Vectorized ``extract_ue_cfr`` over UEs; returns ``(U,) + cir.shape``.

    Each segment is circularly moved to delay 0 before the transform, which
    is the same as transforming in place and removing the phase ramp.
    """
    cir = np.asarray(cir, dtype=np.complex128)
    n = cir.shape[0]
    short = _gather(cir, offsets, tap_counts)
    u, lmax = short.shape[:2]
    if lmax <= _SHORT_SEGMENT:
        # a handful of taps: the partial DFT matrix beats a full transform
        k = np.arange(n)
        w = np.exp(-2j * np.pi * np.outer(k, np.arange(lmax)) / n) / np.sqrt(n)
        out = np.matmul(w, short.reshape(u, lmax, -1))
        return out.reshape((u,) + cir.shape)
    seg = np.zeros((u,) + cir.shape, dtype=np.complex128)
    seg[:, :lmax] = short
    return dft(seg, axis=1) / np.sqrt(n)


def full_band_segments(received, pilots, plan: PilotPlan) -> np.ndarray:
    """Delay-domain estimates ``(U, L_max, ...)`` of the APS / PS UEs.

    Segment ``u`` is moved to delay 0 and zeroed past ``L_u``; the scaling
    is that of ``composite_cir``, so ``extract_all`` of the same CIR is the
    unitary transform of these taps.
    """
    amp = plan.ues[0].amplitude if plan.ues else 1.0
    cir = composite_cir(estimate_composite_cfr(received, np.asarray(pilots) * amp))
    return _gather(cir, plan.offsets, plan.tap_counts)


def separate_full_band(received, pilots, plan: PilotPlan) -> np.ndarray:
    """APS / PS separation: one composite CIR, one segment per UE."""
    amp = plan.ues[0].amplitude if plan.ues else 1.0
    cfr = estimate_composite_cfr(received, np.asarray(pilots) * amp)
    return extract_all(composite_cir(cfr), plan.offsets, plan.tap_counts)


def ci_segments(received, pilots, combs, tap_counts, amplitude: float = 1.0) -> np.ndarray:
    """Per-UE channel taps ``(U, L_max, ...)`` estimated from interleaved pilots.

    Per UE: ZF on the comb, a comb-length inverse transform, keep the first
    ``L_u`` taps and undo the phase of the comb's starting subcarrier. The
    taps are on the scale of the physical gains (the CFR is their plain DFT).
    """
    received = np.asarray(received, dtype=np.complex128)
    pilots = np.asarray(pilots, dtype=np.complex128)
    n = received.shape[0]
    combs = np.asarray(combs)
    taps = np.asarray(tap_counts, dtype=np.int64)
    if combs.ndim != 2:
        raise ValueError("combs must all have the same length")
    q = combs.shape[1]
    for u in np.flatnonzero(taps > q):
        raise AmbiguityError(f"UE {u}: {taps[u]} taps exceed the {q}-sample comb window")
    h_comb = received[combs] / (amplitude * pilots[combs])
    lmax = int(taps.max())
    cir = idft(h_comb, axis=1)[:, :lmax] / q
    l = np.arange(lmax)
    # the comb starts at subcarrier comb[0]; undo that delay-dependent phase
    phase = np.exp(2j * np.pi * np.outer(combs[:, 0], l) / n) * (l[None, :] < taps[:, None])
    return cir * phase.reshape(phase.shape + (1,) * (received.ndim - 1))


def separate_ci(received, pilots, combs, tap_counts, amplitude: float = 1.0) -> np.ndarray:
    """Interleaved-pilot separation: ``ci_segments`` zero-padded to all N subcarriers."""
    received = np.asarray(received)
    taps = ci_segments(received, pilots, combs, tap_counts, amplitude)
    padded = np.zeros((taps.shape[0],) + received.shape, dtype=np.complex128)
    padded[:, : taps.shape[1]] = taps
    return dft(padded, axis=1)


def separate_cb(received, pilots, blocks, amplitude: float = 1.0) -> list[np.ndarray]:
    """Contiguous-block separation: ZF on each UE's own block, no extrapolation."""
    received = np.asarray(received, dtype=np.complex128)
    pilots = np.asarray(pilots, dtype=np.complex128)
    return [received[b] / (amplitude * pilots[b]) for b in blocks]


def separate(received, pilots, plan: PilotPlan):
    """Dispatch to the scheme's separation routine.

    Returns an array ``(U, N, ...)`` for APS/PS/CI and a list of per-block
    arrays for CB.
    """
    kind = plan.scheme.kind
    if kind in (Scheme.APS, Scheme.PS):
        return separate_full_band(received, pilots, plan)
    amp = plan.ues[0].amplitude if plan.ues else 1.0
    subsets = [ue.subcarriers for ue in plan.ues]
    if kind is Scheme.CI:
        return separate_ci(received, pilots, subsets, plan.tap_counts, amp)
    return separate_cb(received, pilots, subsets, amp)


@dataclass
class EstimationReport:
    scheme: str
    per_ue_mse: np.ndarray
    snr_db: float | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def mean_mse(self) -> float:
        return float(np.mean(self.per_ue_mse)) if len(self.per_ue_mse) else float("nan")


def mse_report(truths, estimates, scheme: str = "", snr_db: float | None = None,
               **metadata) -> EstimationReport:
    """Per-UE mean ``|H - H_est|^2`` over each estimate's own domain, plus the UE average."""
    per_ue = np.array([
        np.mean(np.abs(np.asarray(h) - np.asarray(e)) ** 2)
        for h, e in zip(truths, estimates, strict=True)
    ])
    return EstimationReport(scheme, per_ue, snr_db, dict(metadata))
