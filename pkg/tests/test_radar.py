import csv

import numpy as np
import pytest

from isac_lab.channel import NOISELESS, RadarScene, RadarTarget, radar_cfr, radar_echo
from isac_lab.link import radar_trial, sensing_map
from isac_lab.metrics import resolution_report
from isac_lab.numerics import RandomStream
from isac_lab.pilots import SchemeParams, SystemParams, apply_phase_shift, generate_pilot_grid
from isac_lab.radar import (DelayDopplerMap, RangeMse, TargetEstimate, bins_to_range_velocity,
                            delay_doppler_map, detect_peaks, local_maxima, range_mse,
                            zf_radar_response)

P = SystemParams(128, 64, 60e3, 32, 24e9)
BIN_M = P.light_speed / (2 * P.n_subcarriers * P.subcarrier_spacing)
SCENE = RadarScene((RadarTarget(200, -40), RadarTarget(400, 0), RadarTarget(600, 40)))


def _map(power):
    return DelayDopplerMap(np.asarray(power, float), 1.0, 1.0, len(power), P)


def test_zf_noiseless_and_occupancy():
    x = generate_pilot_grid(P, RandomStream(0, ()))
    g = radar_cfr(SCENE, P)
    assert np.allclose(zf_radar_response(g * x, x, np.arange(128)), g)
    occ = np.arange(1, 128, 4)
    out = zf_radar_response(g * x, x, occ)
    zero_rows = np.all(out == 0, axis=1)
    assert zero_rows.sum() == 96
    assert np.allclose(out[occ], g[occ])


def test_phase_shift_transparency():
    x = generate_pilot_grid(P, RandomStream(1, ()))
    maps = []
    for offset in (0, 37):
        tx = apply_phase_shift(x, offset)
        echo = radar_echo(tx, SCENE, P, NOISELESS, None)
        g = zf_radar_response(echo, tx, np.arange(128))
        maps.append(delay_doppler_map(g, P).power)
    assert np.max(np.abs(maps[0] - maps[1])) <= 1e-12 * maps[0].max()


def test_on_grid_target_peak_value():
    g = radar_cfr(RadarScene((RadarTarget(10 * BIN_M),)), P)
    ddm = delay_doppler_map(g, P)
    assert np.all(ddm.power >= 0)
    col0 = 32
    assert ddm.doppler_index(col0) == 0
    assert np.isclose(ddm.power[10, col0], 128 * 64)
    rest = ddm.power.copy()
    rest[10, col0] = 0
    assert rest.max() < 1e-10 * 128 * 64


def test_flat_response_peaks_at_origin():
    ddm = delay_doppler_map(np.ones((128, 64)), P)
    d, c = np.unravel_index(np.argmax(ddm.power), ddm.shape)
    assert d == 0 and ddm.doppler_index(c) == 0


def test_ci_grating_images():
    g = radar_cfr(RadarScene((RadarTarget(10 * BIN_M),)), P)
    occ = np.arange(0, 128, 4)
    masked = np.zeros_like(g)
    masked[occ] = g[occ]
    ddm = delay_doppler_map(masked, P, comb=4)
    col = ddm.power[:, 32]
    peaks = [10 + 32 * k for k in range(4)]
    assert np.allclose(col[peaks], col[10])
    others = np.delete(col, peaks)
    assert others.max() < 1e-10 * col[10]
    assert ddm.unambiguous_delay_bins == 32


def test_real_response_map_point_symmetry():
    g = RandomStream(2, ()).normal(size=(128, 64))
    ddm = delay_doppler_map(g, P)
    pw = np.fft.ifftshift(ddm.power, axes=1)
    flipped = np.roll(pw[::-1, ::-1], (1, 1), axis=(0, 1))
    assert np.allclose(pw, flipped)


def test_cb_mainlobe_scales_with_block_ratio():
    def width(band):
        g = radar_cfr(RadarScene((RadarTarget(300.0),)), P)
        ddm = delay_doppler_map(g, P, band=band, delay_oversample=16)
        cut = ddm.power[:, ddm.shape[1] // 2]
        above = np.flatnonzero(cut >= cut.max() / 2)
        r = ddm.range_axis()
        return r[above.max()] - r[above.min()]
    aps = width((0, 128))
    for ratio in (4, 8):
        assert abs(width((0, 128 // ratio)) / aps / ratio - 1) < 0.1


def test_map_validation():
    with pytest.raises(ValueError):
        delay_doppler_map(np.ones((128, 64)), P, band=(0, 48))
    with pytest.raises(ValueError):
        delay_doppler_map(np.ones((128, 64)), P, delay_oversample=3)


def test_detect_single_and_ranked():
    pw = np.zeros((16, 8))
    pw[5, 3] = 1.0
    assert detect_peaks(_map(pw), top_p=1).bins == [(5, 3)]
    pw = np.zeros((16, 8))
    pw[2, 1], pw[8, 4], pw[13, 6] = 3.0, 2.0, 1.0
    det = detect_peaks(_map(pw), top_p=2)
    assert det.bins == [(2, 1), (8, 4)] and not det.shortfall
    assert detect_peaks(_map(pw), threshold_fraction=0.5).bins == [(2, 1), (8, 4)]
    det = detect_peaks(_map(pw), top_p=5)
    assert det.shortfall and len(det.bins) == 3


def test_detect_tie_break_and_plateau():
    pw = np.zeros((16, 8))
    pw[6, 4] = pw[3, 1] = 2.0
    pw[10, 4] = 2.0
    assert detect_peaks(_map(pw), top_p=1).bins == [(3, 1)]
    plateau = np.zeros((8, 8))
    plateau[3, 3] = plateau[3, 4] = 1.0
    assert local_maxima(plateau).sum() == 1


def test_detect_argument_errors():
    m = _map(np.ones((4, 4)))
    for kw in (dict(), dict(top_p=1, threshold_fraction=0.5), dict(top_p=0),
               dict(threshold_fraction=1.5)):
        with pytest.raises(ValueError):
            detect_peaks(m, **kw)


def test_bins_to_range_velocity():
    ddm = delay_doppler_map(np.ones((128, 64)), P)
    est = bins_to_range_velocity(ddm, 10, 32)
    assert round(est.range_m, 1) == 195.2 and est.velocity_mps == 0
    low = bins_to_range_velocity(ddm, 0, 0)
    assert np.isclose(low.velocity_mps, -P.light_speed / (4 * P.carrier_freq * P.symbol_duration))
    assert abs(low.velocity_mps + 187.5) < 0.2
    fine = delay_doppler_map(np.ones((128, 64)), P, delay_oversample=4)
    assert np.isclose(bins_to_range_velocity(fine, 40, 32).range_m, est.range_m)
    with pytest.raises(IndexError):
        bins_to_range_velocity(ddm, 128, 0)


def _est(r, power=1.0):
    return TargetEstimate(r, 0.0, power, 0, 0)


def test_range_mse_matching():
    assert range_mse(SCENE, [_est(200), _est(400), _est(600)]).mse == 0
    rep = range_mse(SCENE, [_est(210, 3), _est(390, 2), _est(605, 1)])
    assert np.isclose(rep.mse, (100 + 100 + 25) / 3)
    # strongest estimate claims its nearest target first
    rep = range_mse(SCENE, [_est(320, 2), _est(330, 1), _est(600, 0.5)])
    assert sorted(rep.pairs) == [(0, 1), (1, 0), (2, 2)]
    gated = range_mse(SCENE, [_est(200), _est(1500), _est(600)], gate=20.0)
    assert gated.mse == 0 and gated.misses == 1 and gated.false_alarms == 1 and gated.partial
    short = range_mse(SCENE, [_est(200)])
    assert short.misses == 2 and short.mse == 0
    assert np.isnan(range_mse(SCENE, []).mse)
    assert isinstance(short, RangeMse)


def test_aliasing_law_on_grid():
    sch = SchemeParams("CI", pilot_ratio="1/4")
    rua = resolution_report(sch, P).unambiguous_range
    for d in (36, 40, 50):
        scene = RadarScene((RadarTarget(d * BIN_M),))
        ddm = sensing_map(sch, P, scene, NOISELESS, RandomStream(3, ()))
        det = detect_peaks(ddm, top_p=1)
        est = bins_to_range_velocity(ddm, *det.bins[0])
        assert abs(est.range_m - (d * BIN_M) % rua) < 1e-6


def test_default_scene_top3_within_one_bin():
    sch = SchemeParams("APS", power_mode="NonPC")
    t = radar_trial(sch, P, SCENE, 10.0, RandomStream(4, ()), random_reflections=False)
    true_bins = sorted(t_.range_m / BIN_M for t_ in SCENE.targets)
    found = sorted(e.delay_bin for e in t.estimates)
    assert len(found) == 3
    assert all(abs(f - tb) <= 1 for f, tb in zip(found, true_bins))
    vel = sorted(e.velocity_mps for e in t.estimates)
    vbin = P.light_speed / (2 * P.carrier_freq * 64 * P.symbol_duration)
    assert all(abs(v - tv) <= vbin for v, tv in zip(vel, [-40, 0, 40]))


def test_map_csv(tmp_path):
    ddm = delay_doppler_map(radar_cfr(SCENE, P), P)
    path = tmp_path / "map.csv"
    ddm.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0][0] == "delay_bin" and rows[0][1] == "-32" and rows[0][-1] == "31"
    assert len(rows) == 129 and len(rows[1]) == 65
    assert max(float(v) for r in rows[1:] for v in r[1:]) == 0.0
