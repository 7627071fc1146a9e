"""Built-in experiment catalog.

Each entry carries a complete default parameter tree (the reference
simulation setup where one exists) and a ``run(cfg)`` function returning an
``ExperimentOutput``. Parameter trees are documented in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import partial
from importlib import resources

import numpy as np

from ..channel import RadarScene, RadarTarget, TapCountDistribution
from ..link import (estimation_trial, pilot_spectrum, radar_trial, spectrum_axis,
                    supported_aps_ues)
from ..numerics import RandomStream
from ..metrics import (ambiguity, load_mask, psd_mask_check,
                       resolution_report, formula_discrepancy, reference_table)
from ..pilots import PowerMode, Scheme, SchemeParams, SystemParams, as_fraction
from . import plots
from .config import ConfigError, ExperimentConfig
from .runner import ExperimentOutput, Table, aggregate, monte_carlo


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    defaults: dict
    default_trials: int
    run: object


_CATALOG: dict[str, Experiment] = {}


def register(name, description, defaults, default_trials):
    def wrap(fn):
        _CATALOG[name] = Experiment(name, description, defaults, default_trials, fn)
        return fn
    return wrap


def builtin_experiments() -> dict[str, Experiment]:
    return dict(_CATALOG)


def get_experiment(name: str) -> Experiment:
    try:
        return _CATALOG[name]
    except KeyError:
        known = ", ".join(sorted(_CATALOG))
        raise ConfigError(f"experiment: unknown {name!r} (known: {known})") from None


# ---------------------------------------------------------------- helpers

TAPS_DEFAULT = {
    "kind": "truncated_normal",
    "mean_factor": 0.5,     # mean = mean_factor * cp_len
    "std_factor": 0.25,     # std = std_factor * cp_len
    "shape": 2.0,
    "scale": 2.0,
    "value": 1,
}


def tap_distribution(d: dict, cp_len: int, where: str = "taps") -> TapCountDistribution:
    try:
        if d["kind"] == "truncated_normal":
            return TapCountDistribution("truncated_normal", cp_len,
                                        mean=d["mean_factor"] * cp_len,
                                        std=d["std_factor"] * cp_len)
        return TapCountDistribution(d["kind"], cp_len, shape=d["shape"],
                                    scale=d["scale"], value=d["value"])
    except ValueError as exc:
        raise ConfigError(f"{where}: {exc}") from None


def system(d: dict, where: str = "system", **override) -> SystemParams:
    args = {**d, **override}
    try:
        return SystemParams(**args)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def scheme(d: dict, where: str) -> SchemeParams:
    try:
        return SchemeParams(d["kind"], pilot_ratio=as_fraction(d.get("pilot_ratio", "1")),
                            cp_ratio=as_fraction(d.get("cp_ratio", "1/4")),
                            block_ratio=as_fraction(d.get("block_ratio", "1")),
                            power_mode=d.get("power_mode", "PC"))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _check_positive_list(values, where):
    if not values:
        raise ConfigError(f"{where}: must not be empty")
    for i, v in enumerate(values):
        if v <= 0:
            raise ConfigError(f"{where}[{i}]: must be positive, got {v}")


# ---------------------------------------------------------- spectral efficiency

def _se_trial(dist, n, stream):
    return supported_aps_ues(dist, n, stream)


def _se_sweep(cfg: ExperimentConfig, points, tag: str):
    """Mean APS UE count at each ``(N, cp_len, dist)`` point."""
    samples = []
    for key, n, dist in points:
        fn = partial(_se_trial, dist, n)
        samples.append(monte_carlo(fn, cfg.trials, cfg.seed, (cfg.experiment, tag, key),
                                   cfg.workers))
    return np.array(samples, dtype=float).T


SE_CP_DEFAULTS = {
    "n_subcarriers": 1024,
    "cp_lens": [8, 16, 32, 64, 128, 256],
    "taps": dict(TAPS_DEFAULT),
}


@register("se-vs-cp", "Supported UEs versus CP length at fixed N",
          SE_CP_DEFAULTS, 1000)
def run_se_vs_cp(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.params
    n = p["n_subcarriers"]
    cps = p["cp_lens"]
    _check_positive_list(cps, "params.cp_lens")
    points = []
    for cp in cps:
        system({"n_subcarriers": n, "cp_len": cp}, "params")
        points.append((f"cp={cp}", n, tap_distribution(p["taps"], cp, "params.taps")))
    u = _se_sweep(cfg, points, "aps")
    res = aggregate("aps_ues", u, cps, "cp_len", "supported UEs", "UEs")
    rows = []
    for i, cp in enumerate(cps):
        base = Fraction(n, cp)
        rows.append([cp, res.mean[i], 2 * n / cp, float(base), float(base), n,
                     res.mean[i] / float(base)])
    table = Table("se_vs_cp", ["cp_len", "aps_mean", "aps_expected_2N_over_Ncp",
                               "ps_ues", "ci_ues", "aps_upper_bound", "gain_over_ci"], rows)
    return ExperimentOutput([res], [table], plots.line_plot(
        "se_vs_cp.csv", "cp_len", ["aps_mean", "aps_expected_2N_over_Ncp", "ps_ues",
                                   "aps_upper_bound"], logx=True, logy=True,
        ylabel="supported UEs"))


SE_N_DEFAULTS = {
    "cp_len": 16,
    "n_values": [64, 128, 256, 512, 1024, 2048, 4096],
    "taps": dict(TAPS_DEFAULT),
}


@register("se-vs-n", "Supported UEs versus N at fixed CP length",
          SE_N_DEFAULTS, 1000)
def run_se_vs_n(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.params
    cp = p["cp_len"]
    ns = p["n_values"]
    _check_positive_list(ns, "params.n_values")
    dist = tap_distribution(p["taps"], cp, "params.taps")
    points = []
    for n in ns:
        system({"n_subcarriers": n, "cp_len": cp}, "params")
        points.append((f"n={n}", n, dist))
    u = _se_sweep(cfg, points, "aps")
    res = aggregate("aps_ues", u, ns, "n_subcarriers", "supported UEs", "UEs")
    rows = [[n, res.mean[i], n / cp, n, res.mean[i] / (n / cp)] for i, n in enumerate(ns)]
    table = Table("se_vs_n", ["n_subcarriers", "aps_mean", "baseline_ues",
                              "aps_upper_bound", "gain_over_baseline"], rows)
    return ExperimentOutput([res], [table], plots.line_plot(
        "se_vs_n.csv", "n_subcarriers", ["aps_mean", "baseline_ues", "aps_upper_bound"],
        logx=True, logy=True, ylabel="supported UEs"))


SE_DIST_DEFAULTS = {
    "cp_len": 16,
    "n_values": [256, 512, 1024, 2048, 4096],
    "distributions": [
        {"name": "gamma", "kind": "gamma", "mean_factor": 0.5, "std_factor": 0.25,
         "shape": 2.0, "scale": 2.0, "value": 1},
        {"name": "normal", "kind": "truncated_normal", "mean_factor": 0.5,
         "std_factor": 2.1 / 16, "shape": 2.0, "scale": 2.0, "value": 1},
        {"name": "mirrored_gamma", "kind": "mirrored_gamma", "mean_factor": 0.5,
         "std_factor": 0.25, "shape": 2.0, "scale": 2.0, "value": 1},
    ],
}


@register("se-distributions", "Supported UEs versus N for three tap-count laws",
          SE_DIST_DEFAULTS, 1000)
def run_se_distributions(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.params
    cp = p["cp_len"]
    ns = p["n_values"]
    _check_positive_list(ns, "params.n_values")
    results, rows = [], []
    for j, d in enumerate(p["distributions"]):
        dist = tap_distribution(d, cp, f"params.distributions[{j}]")
        pts = []
        for n in ns:
            system({"n_subcarriers": n, "cp_len": cp}, "params")
            pts.append((f"n={n}", n, dist))
        u = _se_sweep(cfg, pts, d["name"])
        res = aggregate(f"aps_ues_{d['name']}", u, ns, "n_subcarriers", "supported UEs", "UEs")
        results.append(res)
        for i, n in enumerate(ns):
            rows.append([d["name"], n, res.mean[i], n // cp])
    table = Table("se_distributions", ["distribution", "n_subcarriers", "aps_mean",
                                       "baseline_ues"], rows)
    return ExperimentOutput(results, [table], plots.grouped_plot(
        "se_distributions.csv", "n_subcarriers", "aps_mean", "distribution",
        logx=True, ylabel="supported UEs"))


# ------------------------------------------------------------------- spectrum

PSD_DEFAULTS = {
    "system": {"n_subcarriers": 256, "n_symbols": 16, "subcarrier_spacing": 60e3,
               "cp_len": 64, "carrier_freq": 24e9},
    "time_oversample": 4,
    "fft_oversample": 2,
    "schemes": [
        {"kind": "APS", "pilot_ratio": "1", "block_ratio": "1", "cp_ratio": "1/4",
         "power_mode": "PC"},
        {"kind": "CI", "pilot_ratio": "1/4", "power_mode": "PC"},
        {"kind": "CI", "pilot_ratio": "1/4", "power_mode": "NonPC"},
        {"kind": "CI", "pilot_ratio": "1/8", "power_mode": "PC"},
        {"kind": "CI", "pilot_ratio": "1/8", "power_mode": "NonPC"},
    ],
    "mask": "",
    "in_band": 0.45,
}


def default_mask_path():
    return resources.files("isac_lab") / "data" / "emission_mask.txt"


def _psd_trial(sch, params, time_os, fft_os, stream):
    f, p = pilot_spectrum(sch, params, stream, time_os, fft_os, reference=1.0)
    return 10.0 ** (p / 10.0)


def psd_spectra(cfg: ExperimentConfig):
    """Trial-averaged linear spectra, all on the APS-PC in-band reference.

    The reference level is the mean over ``|f| < in_band`` of a full-band
    PC pilot spectrum, so 0 dB is the in-band level of a unit-power
    full-band pilot.
    """
    p = cfg.params
    params = system(p["system"], "params.system")
    tos, fos = p["time_oversample"], p["fft_oversample"]
    labels, spectra = [], []
    freqs = spectrum_axis(params, tos, fos)
    for j, d in enumerate(p["schemes"]):
        sch = scheme(d, f"params.schemes[{j}]")
        fn = partial(_psd_trial, sch, params, tos, fos)
        tag = f"{sch.label()}-{sch.power_mode.value}"
        lin = np.mean(monte_carlo(fn, cfg.trials, cfg.seed, (cfg.experiment, tag),
                                  cfg.workers), axis=0)
        labels.append(tag)
        spectra.append(lin)
    ref_sch = SchemeParams(Scheme.APS)
    fn = partial(_psd_trial, ref_sch, params, tos, fos)
    ref = np.mean(monte_carlo(fn, cfg.trials, cfg.seed, (cfg.experiment, "reference"),
                              cfg.workers), axis=0)
    level = float(np.mean(ref[np.abs(freqs) < p["in_band"]]))
    return freqs, labels, [10 * np.log10(s / level) for s in spectra]


@register("psd", "Pilot power spectra and emission-mask margins",
          PSD_DEFAULTS, 50)
def run_psd(cfg: ExperimentConfig) -> ExperimentOutput:
    freqs, labels, spectra = psd_spectra(cfg)
    mask_path = cfg.params["mask"] or default_mask_path()
    try:
        mask = load_mask(mask_path)
    except OSError as exc:
        raise ConfigError(f"params.mask: cannot read {mask_path} ({exc.strerror})") from None
    rows = [[f] + [s[i] for s in spectra] + [float(mask(f)) if mask.freqs[0] <= f <= mask.freqs[-1]
                                            else None]
            for i, f in enumerate(freqs)]
    psd_table = Table("psd", ["freq_normalized"] + labels + ["mask_db"], rows)
    margin_rows, notes = [], []
    for label, s in zip(labels, spectra):
        try:
            rep = psd_mask_check(freqs, s, mask)
        except ValueError as exc:
            raise ConfigError(f"params.mask: {exc}") from None
        margin_rows.append([label, rep.min_margin_db, rep.worst_freq, len(rep.violations),
                            rep.compliant])
        notes.append(f"{label}: min mask margin {rep.min_margin_db:.2f} dB "
                     f"({'compliant' if rep.compliant else 'violates mask'})")
    margins = Table("psd_mask_margins", ["scheme", "min_margin_db", "worst_freq",
                                         "violations", "compliant"], margin_rows)
    return ExperimentOutput([], [psd_table, margins], plots.psd_plot("psd.csv"), notes)


# ----------------------------------------------------------------- channel MSE

MSE_DEFAULTS = {
    "system": {"n_subcarriers": 256, "n_symbols": 1, "subcarrier_spacing": 60e3,
               "carrier_freq": 24e9},
    "cp_lens": [16, 32, 64],
    "channels": ["flat", "selective"],
    "schemes": ["APS", "PS", "CI"],
    "snr_db": [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0],
    "taps": dict(TAPS_DEFAULT),
}


def _mse_trial(sch, params, dist, snrs, stream):
    return estimation_trial(sch, params, dist, snrs, stream)


def mse_sweep(params: dict, modes, trials: int, seed: int, workers: int = 1) -> dict:
    """Per-SNR mean MSE for every (mode, channel, cp_len, scheme) point.

    PS and CI use ``pilot_ratio = cp_ratio = cp_len / N``. Full-band
    schemes radiate the same grid under PC and NonPC, so their trials are
    run once and shared between modes; a flat-channel APS run is also
    shared across CP lengths, since the CP never enters it. Returns
    ``{(mode, channel, cp_len, scheme): samples}`` with each samples array
    shaped ``(trials, n_snr)``.
    """
    base = params["system"]
    n = base["n_subcarriers"]
    snrs = np.asarray(params["snr_db"], dtype=float)
    _check_positive_list(params["cp_lens"], "params.cp_lens")
    cache, out = {}, {}
    for mode in modes:
        for channel in params["channels"]:
            if channel not in ("flat", "selective"):
                raise ConfigError(f"params.channels: unknown channel {channel!r} "
                                  "(use flat or selective)")
            for cp in params["cp_lens"]:
                sp = system(base, "params.system", cp_len=cp)
                ratio = Fraction(cp, n)
                if ratio.numerator != 1:
                    raise ConfigError(f"params.cp_lens: N/cp_len must be an integer, got {cp}")
                if channel == "flat":
                    dist = TapCountDistribution("fixed", cp, value=1)
                else:
                    dist = tap_distribution(params["taps"], cp, "params.taps")
                for kind in params["schemes"]:
                    if kind not in ("APS", "PS", "CI"):
                        raise ConfigError(f"params.schemes: {kind!r} has no MSE model "
                                          "(use APS, PS or CI)")
                    sch = SchemeParams(kind, pilot_ratio=ratio if kind == "CI" else 1,
                                       cp_ratio=ratio, power_mode=mode)
                    shared = kind != "CI"
                    key = (channel, kind,
                           None if (kind == "APS" and channel == "flat") else cp,
                           None if shared else mode)
                    if key not in cache:
                        fn = partial(_mse_trial, sch, sp, dist, snrs)
                        lane = ("mse",) + tuple("-" if k is None else str(k) for k in key)
                        cache[key] = np.array(monte_carlo(fn, trials, seed, lane, workers))
                    out[(mode, channel, cp, kind)] = cache[key]
    return out


def _run_mse(cfg: ExperimentConfig, mode: str) -> ExperimentOutput:
    p = cfg.params
    curves = mse_sweep(p, [mode], cfg.trials, cfg.seed, cfg.workers)
    results, rows = [], []
    for (m, channel, cp, kind), samples in curves.items():
        name = f"mse_{channel}_cp{cp}_{kind}"
        res = aggregate(name, samples, p["snr_db"], "snr_db", "channel MSE", "linear")
        results.append(res)
        for i, s in enumerate(p["snr_db"]):
            rows.append([channel, cp, kind, s, res.mean[i], 10 * math.log10(res.mean[i])])
    table = Table(f"mse_{mode.lower()}", ["channel", "cp_len", "scheme", "snr_db", "mse",
                                          "mse_db"], rows)
    return ExperimentOutput(results, [table], plots.mse_plot(f"mse_{mode.lower()}.csv"))


@register("mse-pc", "Channel-estimation MSE under per-subcarrier power constraint",
          MSE_DEFAULTS, 10_000)
def run_mse_pc(cfg: ExperimentConfig) -> ExperimentOutput:
    return _run_mse(cfg, PowerMode.PC.value)


@register("mse-nopc", "Channel-estimation MSE with equal total pilot power",
          MSE_DEFAULTS, 10_000)
def run_mse_nopc(cfg: ExperimentConfig) -> ExperimentOutput:
    return _run_mse(cfg, PowerMode.NON_PC.value)


# ------------------------------------------------------------- closed forms

TABLE_DEFAULTS = {"n_subcarriers": 256}


def complexity_tables(n: int) -> list[Table]:
    rows = []
    for r in reference_table(n):
        c = r.complexity
        rows.append([r.scheme, str(r.pilot_ratio), str(r.cp_ratio), c.n_ues,
                     c.ue_additions, c.ue_additions_per_ue,
                     c.ue_multiplications, c.ue_multiplications_per_ue,
                     c.bs_additions, c.bs_additions_per_ue,
                     c.bs_multiplications, c.bs_multiplications_per_ue])
    header = ["scheme", "pilot_ratio", "cp_ratio", "ues",
              "ue_additions", "ue_additions_per_ue", "ue_multiplications",
              "ue_multiplications_per_ue", "bs_additions", "bs_additions_per_ue",
              "bs_multiplications", "bs_multiplications_per_ue"]
    formulas = Table("complexity_formulas", ["scheme", "side", "additions", "multiplications"], [
        ["APS/PS", "UE", "U*(3N log2 N - 3N + 4)", "U*(N log2 N - 3N + 4 + 2N)"],
        ["APS/PS", "BS", "(U+2)*(3N log2 N - 3N + 4)", "(U+2)*(N log2 N - 3N + 4) + 2N"],
        ["CI", "UE", "U*(3N log2 N - 3N + 4)", "U*(N log2 N - 3N + 4)"],
        ["CI", "BS", "(2U+1)*(3N log2 N - 3N + 4)", "(2U+1)*(N log2 N - 3N + 4) + 2N"],
    ])
    return [formulas, Table("complexity", header, rows)]


def signaling_table(n: int) -> Table:
    rows = [[r.scheme, str(r.pilot_ratio), str(r.cp_ratio), r.signaling.n_ues,
             r.signaling.total_bits, r.signaling.bits_per_ue] for r in reference_table(n)]
    return Table("signaling", ["scheme", "pilot_ratio", "cp_ratio", "ues", "q_bits",
                               "bits_per_ue"], rows)


@register("complexity-tables", "FFT operation counts per scheme",
          TABLE_DEFAULTS, 1)
def run_complexity(cfg: ExperimentConfig) -> ExperimentOutput:
    n = cfg.params["n_subcarriers"]
    try:
        tables = complexity_tables(n)
    except ValueError as exc:
        raise ConfigError(f"params.n_subcarriers: {exc}") from None
    notes = ["BS additions follow the tabulated convention "
             "(transform count times FFT additions, no 2N term)"]
    notes += formula_discrepancy(n)
    return ExperimentOutput([], tables, None, notes)


@register("signaling-table", "Control-signaling overhead per scheme",
          TABLE_DEFAULTS, 1)
def run_signaling(cfg: ExperimentConfig) -> ExperimentOutput:
    n = cfg.params["n_subcarriers"]
    if n < 2 or n & (n - 1):
        raise ConfigError(f"params.n_subcarriers: must be a power of two, got {n}")
    return ExperimentOutput([], [signaling_table(n)], None, [])


AMBIGUITY_DEFAULTS = {
    "n_subcarriers": 32,
    "subcarrier_spacing": 60e3,
    "pilot_ratio": "1/4",
    "block_ratio": "1/4",
    "points": 2048,
    "span_symbols": 1.0,
}


@register("ambiguity", "Delay ambiguity function of APS, CI and CB pilots",
          AMBIGUITY_DEFAULTS, 1)
def run_ambiguity(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.params
    n, df = p["n_subcarriers"], p["subcarrier_spacing"]
    try:
        rho_p, rho_n = as_fraction(p["pilot_ratio"]), as_fraction(p["block_ratio"])
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"params: {exc}") from None
    if p["points"] < 2:
        raise ConfigError("params.points: need at least 2 points")
    tau = np.linspace(0.0, p["span_symbols"] / df, p["points"])
    cases = [("APS", 1, n), ("CI", rho_p, int(n * rho_p)), ("CB", 1, int(n * rho_n))]
    cols = [ambiguity(tau, r, n_p, df) for _, r, n_p in cases]
    rows = [[t * 1e6] + [c[i] for c in cols] for i, t in enumerate(tau)]
    curve = Table("ambiguity", ["delay_us", "APS", f"CI({rho_p})", f"CB({rho_n})"], rows)
    params = SystemParams(n, 1, df, max(1, n // 4))
    res_rows = []
    for sch in (SchemeParams("APS"), SchemeParams("CI", pilot_ratio=rho_p),
                SchemeParams("CB", block_ratio=rho_n)):
        r = resolution_report(sch, params)
        res_rows.append([r.scheme, r.n_pilots, r.delay_resolution * 1e6, r.range_resolution,
                         r.unambiguous_delay * 1e6, r.unambiguous_range])
    res = Table("resolution", ["scheme", "n_pilots", "delay_resolution_us",
                               "range_resolution_m", "unambiguous_delay_us",
                               "unambiguous_range_m"], res_rows)
    return ExperimentOutput([], [curve, res], plots.line_plot(
        "ambiguity.csv", "delay_us", curve.header[1:], ylabel="|ambiguity|"))


# ------------------------------------------------------------------- sensing

RADAR_DEFAULTS = {
    "system": {"n_subcarriers": 128, "n_symbols": 64, "subcarrier_spacing": 60e3,
               "cp_len": 32, "carrier_freq": 24e9},
    "targets": [
        {"range_m": 200.0, "velocity_mps": -40.0},
        {"range_m": 400.0, "velocity_mps": 0.0},
        {"range_m": 600.0, "velocity_mps": 40.0},
    ],
    "snr_db": 10.0,
    "schemes": [
        {"kind": "APS", "pilot_ratio": "1", "block_ratio": "1", "cp_ratio": "1/4",
         "power_mode": "NonPC"},
        {"kind": "CI", "pilot_ratio": "1/4", "power_mode": "NonPC"},
        {"kind": "CI", "pilot_ratio": "1/8", "power_mode": "NonPC"},
        {"kind": "CB", "block_ratio": "1/4", "power_mode": "NonPC"},
        {"kind": "CB", "block_ratio": "1/8", "power_mode": "NonPC"},
    ],
    # detection grid; oversampled maps turn sinc sidelobes into local maxima
    # that outrank weak Rayleigh targets, so MSE is scored on the native grid
    "delay_oversample": 1,
    "doppler_oversample": 1,
    "random_reflections": True,
    "export_maps": True,
    "map_oversample": 4,
    # association gate in range-resolution cells; 0 disables it
    "gate_cells": 1.0,
}


def radar_scene(p: dict) -> RadarScene:
    if not p["targets"]:
        raise ConfigError("params.targets: need at least one target")
    return RadarScene(tuple(RadarTarget(t["range_m"], t["velocity_mps"]) for t in p["targets"]))


def _radar_trial(sch, params, scene, snr, rr, dos, vos, gate, stream):
    t = radar_trial(sch, params, scene, snr, stream, rr, dos, vos, gate)
    return t.mse.mse, t.mse.misses, t.mse.false_alarms, t.ungated.mse


@register("range-velocity", "UE-side delay-Doppler maps and range MSE", RADAR_DEFAULTS, 100)
def run_range_velocity(cfg: ExperimentConfig) -> ExperimentOutput:
    p = cfg.params
    params = system(p["system"], "params.system")
    scene = radar_scene(p)
    try:
        scene.validate(params)
    except ValueError as exc:
        raise ConfigError(f"params.targets: {exc}") from None
    gate = p["gate_cells"] if p["gate_cells"] > 0 else None
    results, rows, maps = [], [], []
    for j, d in enumerate(p["schemes"]):
        sch = scheme(d, f"params.schemes[{j}]")
        if sch.kind is Scheme.PS and sch.cp_ratio != params.cp_ratio:
            raise ConfigError(f"params.schemes[{j}]: PS cp_ratio must equal cp_len/N")
        fn = partial(_radar_trial, sch, params, scene, p["snr_db"], p["random_reflections"],
                     p["delay_oversample"], p["doppler_oversample"], gate)
        tag = sch.label()
        out = np.array(monte_carlo(fn, cfg.trials, cfg.seed, (cfg.experiment, tag),
                                   cfg.workers), dtype=float)
        misses, false_alarms = int(out[:, 1].sum()), int(out[:, 2].sum())
        stem = tag.replace("(", "_").replace(")", "").replace("/", "_")
        res = aggregate("range_mse_" + stem, out[:, 0], [p["snr_db"]], "snr_db",
                        "range MSE", "m^2")
        raw = aggregate("range_mse_ungated_" + stem, out[:, 3], [p["snr_db"]], "snr_db",
                        "range MSE without association gate", "m^2")
        results += [res, raw]
        rep = resolution_report(sch, params)
        rows.append([tag, res.mean[0], None if res.stderr is None else res.stderr[0],
                     misses, false_alarms, raw.mean[0], rep.range_resolution,
                     rep.unambiguous_range])
        if p["export_maps"]:
            maps.append((stem, sch))
    table = Table("range_mse", ["scheme", "range_mse_m2", "stderr", "missed_targets",
                                "false_alarms", "range_mse_ungated_m2",
                                "range_resolution_m", "unambiguous_range_m"], rows)
    output = ExperimentOutput(results, [table], plots.map_plot([m[0] for m in maps]))
    output.maps = [("map_" + stem, first_trial_map(cfg, sch)) for stem, sch in maps]
    output.notes = [f"{r[0]}: range MSE {r[1]:.1f} m^2, {r[3]} missed targets, "
                    f"{r[4]} false alarms over {cfg.trials} trials" for r in rows]
    return output


def first_trial_map(cfg: ExperimentConfig, sch: SchemeParams):
    """Delay-Doppler map of trial 0, replayed from its lane at display oversampling."""
    p = cfg.params
    params = system(p["system"], "params.system")
    stream = RandomStream(cfg.seed, (cfg.experiment, sch.label(), 0))
    os_ = p["map_oversample"]
    return radar_trial(sch, params, radar_scene(p), p["snr_db"], stream,
                       p["random_reflections"], os_, os_, None).ddmap
