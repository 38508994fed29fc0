"""Experiment engine: drops, scheme comparison, granularity sweeps, output.

A drop is one independently generated deployment and channel realization.
Within a drop every scheme, granularity and quantization setting sees the
identical channels (paired comparison), and pilot noise is shared across
granularities so flat-channel results cannot differ. Drops run in parallel
with per-drop random streams keyed on (seed, drop), so results are
bit-identical regardless of worker count.
"""

import csv
import io
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import beamforming as bf
from . import feedback as fb
from . import link_adapt as la
from . import phy
from .scenario import (
    PRESET_NAMES,
    PresetParams,
    ScenarioConfig,
    generate_channels,
    preset_scenario,
)

log = logging.getLogger(__name__)

OUTPUT_DIR_ENV = "BEAMLINK_OUT"

RESULTS_HEADER = ("drop", "scheme", "ng", "quantized", "rms_ds_ns", "stream_mcs", "sum_tput", "fb_bits")
SUMMARY_HEADER = (
    "scheme",
    "ng",
    "quantized",
    "rms_ds_ns",
    "n_drops",
    "mean_tput",
    "stderr_tput",
    "gain_vs_tdma_mimo",
)


@dataclass
class ExperimentSpec:
    """Everything one sweep needs; mirrors the JSON config schema."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    preset: str | None = "mixed"
    preset_params: PresetParams = field(default_factory=PresetParams)
    schemes: tuple = bf.SCHEMES
    n_g_list: tuple = (1, 2, 4, 8, 16, 38)
    quantization: tuple = (True,)
    rms_ds_list: tuple | None = None  # seconds; None -> scenario value
    n_drops: int = 100
    seed: int = 1
    out_dir: str | None = None
    b_psi: int = 7
    b_phi: int = 9
    mu: float = bf.DEFAULT_MU
    max_iters: int = bf.DEFAULT_MAX_ITERS
    tol: float = bf.DEFAULT_TOL
    gap_db: float = la.DEFAULT_GAP_DB
    mcs_rule: str = "mean_capacity"
    mcs_table_rows: tuple | None = None
    workers: int = 1

    def __post_init__(self):
        if self.n_drops < 1:
            raise ValueError("n_drops must be >= 1")
        if not self.schemes or not self.n_g_list or not self.quantization:
            raise ValueError("schemes, n_g_list and quantization must be nonempty")
        for s in self.schemes:
            if s not in bf.SCHEMES:
                raise ValueError(f"unknown scheme {s!r}")
        for ng in self.n_g_list:
            if ng not in fb.ALLOWED_N_G:
                raise ValueError(f"n_g {ng} not in {fb.ALLOWED_N_G}")
        if self.preset is not None and self.preset not in PRESET_NAMES:
            raise ValueError(f"unknown preset {self.preset!r}; use one of {PRESET_NAMES} or null")
        if self.rms_ds_list is None:
            self.rms_ds_list = (self.scenario.rms_delay_spread,)
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def mcs_table(self):
        if self.mcs_table_rows is not None:
            return la.table_from_spec(self.mcs_table_rows, self.gap_db, self.mcs_rule)
        return la.default_mcs_table(self.gap_db, self.mcs_rule)

    def codec_params(self, n_g, ia_block_reduction):
        return fb.CodecParams(
            b_psi=self.b_psi,
            b_phi=self.b_phi,
            n_g=n_g,
            ia_block_reduction=ia_block_reduction,
            m=2 * self.scenario.n_bs,
            n=self.scenario.n_rx_ant,
            n_sc=self.scenario.n_sc,
        )


@dataclass
class ResultRow:
    drop: int
    scheme: str
    n_g: int
    quantized: bool
    rms_ds: float  # seconds
    stream_mcs: tuple
    sum_tput: float
    fb_bits: int


def _drop_path_gain(spec, drop):
    rng = np.random.default_rng([spec.seed, drop, 0])
    if spec.preset is None:
        return np.asarray(spec.scenario.path_gain_db, dtype=float)
    return preset_scenario(spec.preset, rng, spec.preset_params)


def _breve_channels(big, params, sigma_sq, quantized):
    """Reconstructed (n_reported, 2, 6) channels for one user.

    Quantized: full codec roundtrip. Unquantized: exact diag(s) V^H at the
    reported subcarriers (the granularity still applies).
    """
    v_idx, _ = fb.reported_subcarrier_indices(params.n_g, params.n_sc)
    if quantized:
        report = fb.encode_channel(big, params, sigma_sq)
        return fb.reconstruct_channels(report, sigma_sq), v_idx
    _, s, vh = np.linalg.svd(big[v_idx], full_matrices=False)
    return s[:, :, None] * vh, v_idx


def _precoders_for_scheme(spec, scheme, breve, v_idx):
    """Compute one scheme's stream layouts on the full subcarrier grid.

    breve is (3, n_reported, 2, 6): reconstructed channel per user. Returns
    a list of StreamLayout (tdma_mimo yields one per active cell)."""
    scen = spec.scenario
    n_sc = scen.n_sc
    blocks = np.stack([bf.split_blocks(breve[k]) for k in range(3)], axis=1)
    # blocks: (n_reported, k_user, j_bs, 2, 2)

    if scheme == "ia":
        init, _fallback = bf.ia_closed_form(blocks)
        g = bf.ia_gain_matrices(blocks)
        sig = np.stack(
            [bf.regularized_noise(blocks[:, k], scen.sigma_nominal_sq, spec.mu) for k in range(3)],
            axis=1,
        )
        res = bf.max_sinr(g, (0, 1, 2), init, sig, "ia", spec.max_iters, spec.tol)
        tx = bf.assign_precoders_to_subcarriers(res.precoders, v_idx, n_sc)
        return [phy.StreamLayout(tx=tx, owner_rx=(0, 1, 2), owner_bs=(0, 1, 2))]

    if scheme == "comp":
        big = breve.transpose(1, 0, 2, 3)  # (n_reported, 3, 2, 6)
        init = bf.comp_init(big)
        g = bf.comp_gain_matrices(big)
        sig = np.stack(
            [bf.regularized_noise(blocks[:, k], scen.sigma_nominal_sq, spec.mu) for k in range(3)],
            axis=1,
        )
        res = bf.max_sinr(g, (0, 1, 2), init, sig, "comp", spec.max_iters, spec.tol)
        tx = bf.assign_precoders_to_subcarriers(res.precoders, v_idx, n_sc)
        return [phy.StreamLayout(tx=tx, owner_rx=(0, 1, 2), owner_bs=None)]

    own = np.stack([blocks[:, k, k] for k in range(3)], axis=1)  # (n_rep, 3, 2, 2)
    if scheme == "fr_simo":
        v, _, _ = bf.eigen_precoder(own.reshape(-1, 2, 2), 1)
        v = v.reshape(len(v_idx), 3, 2, 1)[..., 0]
        tx = bf.assign_precoders_to_subcarriers(bf.power_normalize(v, scheme), v_idx, n_sc)
        return [phy.StreamLayout(tx=tx, owner_rx=(0, 1, 2), owner_bs=(0, 1, 2))]

    v, _, _ = bf.eigen_precoder(own.reshape(-1, 2, 2), 2)
    v = v.reshape(len(v_idx), 3, 2, 2)  # (n_rep, cell, antenna, stream)
    if scheme == "fr_mimo":
        streams = []
        for k in range(3):
            for st in range(2):
                streams.append(v[:, k, :, st])
        txv = bf.power_normalize(np.stack(streams, axis=1), scheme)
        tx = bf.assign_precoders_to_subcarriers(txv, v_idx, n_sc)
        return [
            phy.StreamLayout(tx=tx, owner_rx=(0, 0, 1, 1, 2, 2), owner_bs=(0, 0, 1, 1, 2, 2))
        ]

    if scheme == "tdma_mimo":
        layouts = []
        for k in range(3):
            txv = bf.power_normalize(np.stack([v[:, k, :, 0], v[:, k, :, 1]], axis=1), scheme)
            tx = bf.assign_precoders_to_subcarriers(txv, v_idx, n_sc)
            layouts.append(phy.StreamLayout(tx=tx, owner_rx=(k, k), owner_bs=(k, k)))
        return layouts

    raise ValueError(f"unknown scheme {scheme!r}")


def _pilot_noise_shapes(scheme, n_sc):
    n_streams = {"ia": 3, "comp": 3, "fr_simo": 3, "fr_mimo": 6}.get(scheme)
    if scheme == "tdma_mimo":
        return [(3, 2, n_sc, 2)] * 3
    return [(3, n_streams, n_sc, 2)]


def run_drop(spec, drop_index):
    """All result rows of one drop.

    One channel realization per (drop, delay spread); every
    (scheme, n_g, quantized) cell reuses it. A cell that fails numerically
    is recorded as full outage rather than aborting the sweep.
    """
    table = spec.mcs_table()
    scen = spec.scenario
    pg = _drop_path_gain(spec, drop_index)
    rows = []
    for ri, rms in enumerate(spec.rms_ds_list):
        cfg = replace(scen, rms_delay_spread=rms, path_gain_db=tuple(map(tuple, pg)))
        channels = generate_channels(cfg, np.random.default_rng([spec.seed, drop_index, 1, ri]))
        pilot_noise = {}
        for si, scheme in enumerate(spec.schemes):
            rng = np.random.default_rng([spec.seed, drop_index, 2, ri, si])
            pilot_noise[scheme] = [
                (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)
                for shape in _pilot_noise_shapes(scheme, scen.n_sc)
            ]
        for n_g in spec.n_g_list:
            for quantized in spec.quantization:
                breve_cache = {}
                for scheme in spec.schemes:
                    reduction = scheme == "ia"
                    params = spec.codec_params(n_g, reduction)
                    try:
                        if reduction not in breve_cache:
                            breve, v_idx = zip(
                                *(
                                    _breve_channels(
                                        channels.big_h_all(k), params, scen.sigma_nominal_sq, quantized
                                    )
                                    for k in range(3)
                                )
                            )
                            breve_cache[reduction] = (np.stack(breve), v_idx[0])
                        breve, v_idx = breve_cache[reduction]
                        layouts = _precoders_for_scheme(spec, scheme, breve, v_idx)
                        selections = []
                        for layout, noise in zip(layouts, pilot_noise[scheme]):
                            sinr, _ = phy.evaluate_streams(
                                channels,
                                layout,
                                scen.sigma_nominal_sq,
                                evm_db=scen.evm_db,
                                pilot_noise=noise,
                            )
                            selections.extend(la.select_mcs(sinr[i], table) for i in range(sinr.shape[0]))
                        result = la.scheme_throughput(selections, scheme, table, n_g, quantized)
                        mcs = result.mcs_indices
                        tput = result.sum_throughput
                    except Exception:
                        log.exception(
                            "cell failed (drop=%d scheme=%s ng=%d quantized=%s); recording outage",
                            drop_index, scheme, n_g, quantized,
                        )
                        n_streams = sum(s[1] for s in _pilot_noise_shapes(scheme, scen.n_sc))
                        mcs = (la.OUTAGE,) * n_streams
                        tput = 0.0
                    rows.append(
                        ResultRow(
                            drop=drop_index,
                            scheme=scheme,
                            n_g=n_g,
                            quantized=quantized,
                            rms_ds=rms,
                            stream_mcs=mcs,
                            sum_tput=tput,
                            fb_bits=fb.bit_count(spec.codec_params(n_g, scheme == "ia")),
                        )
                    )
    return rows


def _row_sort_key(spec):
    scheme_pos = {s: i for i, s in enumerate(spec.schemes)}
    rms_pos = {r: i for i, r in enumerate(spec.rms_ds_list)}

    def key(row):
        return (row.drop, rms_pos[row.rms_ds], scheme_pos[row.scheme], row.n_g, not row.quantized)

    return key


def run_all_drops(spec):
    """Execute every drop, deterministically ordered."""
    if spec.workers == 1:
        rows = []
        for d in range(spec.n_drops):
            rows.extend(run_drop(spec, d))
    else:
        rows = []
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            for chunk in pool.map(_run_drop_star, [(spec, d) for d in range(spec.n_drops)]):
                rows.extend(chunk)
    rows.sort(key=_row_sort_key(spec))
    return rows


def _run_drop_star(args):
    return run_drop(*args)


def aggregate(rows, spec):
    """Mean and standard error per cell, with paired gains vs tdma_mimo."""
    cells = {}
    for row in rows:
        cells.setdefault((row.scheme, row.n_g, row.quantized, row.rms_ds), []).append(row.sum_tput)
    out = []
    for (scheme, n_g, quantized, rms), vals in cells.items():
        arr = np.asarray(vals)
        mean = float(arr.mean())
        stderr = float(arr.std(ddof=1) / np.sqrt(len(arr))) if len(arr) > 1 else 0.0
        out.append(
            {
                "scheme": scheme,
                "ng": n_g,
                "quantized": quantized,
                "rms_ds_ns": rms * 1e9,
                "n_drops": len(arr),
                "mean_tput": mean,
                "stderr_tput": stderr,
            }
        )
    by_cell = {(r["scheme"], r["ng"], r["quantized"], r["rms_ds_ns"]): r for r in out}
    for r in out:
        ref = by_cell.get(("tdma_mimo", r["ng"], r["quantized"], r["rms_ds_ns"]))
        if ref is not None and ref["mean_tput"] > 0:
            r["gain_vs_tdma_mimo"] = r["mean_tput"] / ref["mean_tput"] - 1.0
        else:
            r["gain_vs_tdma_mimo"] = None

    def cell_key(r):
        scheme_pos = {s: i for i, s in enumerate(spec.schemes)}
        rms_pos = {round(x * 1e9, 9): i for i, x in enumerate(spec.rms_ds_list)}
        return (rms_pos[round(r["rms_ds_ns"], 9)], scheme_pos[r["scheme"]], r["ng"], not r["quantized"])

    out.sort(key=cell_key)
    return out


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.10g}"
    return str(x)


def rows_to_csv(rows):
    """Raw result rows in the documented fixed schema."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULTS_HEADER)
    for r in rows:
        mcs = ";".join("-" if m is la.OUTAGE else str(m) for m in r.stream_mcs)
        w.writerow(
            [
                r.drop,
                r.scheme,
                r.n_g,
                int(r.quantized),
                _fmt(r.rms_ds * 1e9),
                mcs,
                _fmt(r.sum_tput),
                r.fb_bits,
            ]
        )
    return buf.getvalue()


def summary_to_csv(summary):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_HEADER)
    for r in summary:
        gain = "" if r["gain_vs_tdma_mimo"] is None else _fmt(r["gain_vs_tdma_mimo"])
        w.writerow(
            [
                r["scheme"],
                r["ng"],
                int(r["quantized"]),
                _fmt(r["rms_ds_ns"]),
                r["n_drops"],
                _fmt(r["mean_tput"]),
                _fmt(r["stderr_tput"]),
                gain,
            ]
        )
    return buf.getvalue()


def resolve_out_dir(spec):
    return spec.out_dir or os.environ.get(OUTPUT_DIR_ENV) or "."


def sweep(spec):
    """Run the full experiment and write results.csv / summary.csv /
    summary.json into the output directory. Returns (rows, summary)."""
    rows = run_all_drops(spec)
    summary = aggregate(rows, spec)
    out_dir = resolve_out_dir(spec)
    os.makedirs(out_dir, exist_ok=True)
    try:
        with open(os.path.join(out_dir, "results.csv"), "w") as f:
            f.write(rows_to_csv(rows))
        with open(os.path.join(out_dir, "summary.csv"), "w") as f:
            f.write(summary_to_csv(summary))
        with open(os.path.join(out_dir, "summary.json"), "w") as f:
            json.dump(
                {
                    "seed": spec.seed,
                    "n_drops": spec.n_drops,
                    "preset": spec.preset,
                    "cells": summary,
                },
                f,
                indent=2,
            )
            f.write("\n")
    except OSError as e:
        raise OSError(f"cannot write results to {out_dir!r}: {e}") from e
    return rows, summary


def load_config(path):
    """Parse the JSON experiment config into an ExperimentSpec."""
    with open(path) as f:
        raw = json.load(f)
    return spec_from_dict(raw)


_SPEC_KEYS = {
    "preset", "schemes", "n_g_list", "quantization", "rms_ds_list_ns", "n_drops",
    "seed", "out_dir", "b_psi", "b_phi", "mu", "max_iters", "tol", "gap_db",
    "mcs_rule", "mcs_table", "workers", "scenario", "preset_params",
}


def spec_from_dict(raw):
    unknown = set(raw) - _SPEC_KEYS
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    kwargs = {}
    if "scenario" in raw:
        scen = dict(raw["scenario"])
        if "path_gain_db" in scen:
            scen["path_gain_db"] = tuple(map(tuple, scen["path_gain_db"]))
        kwargs["scenario"] = ScenarioConfig(**scen)
    if "preset_params" in raw:
        pp = {k: tuple(v) for k, v in raw["preset_params"].items()}
        kwargs["preset_params"] = PresetParams(**pp)
    for k in ("preset", "n_drops", "seed", "out_dir", "b_psi", "b_phi", "mu",
              "max_iters", "tol", "gap_db", "mcs_rule", "workers"):
        if k in raw:
            kwargs[k] = raw[k]
    if "schemes" in raw:
        kwargs["schemes"] = tuple(raw["schemes"])
    if "n_g_list" in raw:
        kwargs["n_g_list"] = tuple(raw["n_g_list"])
    if "quantization" in raw:
        q = raw["quantization"]
        if isinstance(q, str):
            q = [q]
        kwargs["quantization"] = tuple(_parse_quant(x) for x in q)
    if "rms_ds_list_ns" in raw:
        kwargs["rms_ds_list"] = tuple(float(x) / 1e9 for x in raw["rms_ds_list_ns"])
    if "mcs_table" in raw:
        kwargs["mcs_table_rows"] = tuple(tuple(r) for r in raw["mcs_table"])
    return ExperimentSpec(**kwargs)


def _parse_quant(x):
    if isinstance(x, bool):
        return x
    if x in ("on", "true", "1"):
        return True
    if x in ("off", "false", "0"):
        return False
    raise ValueError(f"quantization entries must be on/off, got {x!r}")


def convergence_diagnostics(spec, drop_index=0, n_g=1, quantized=True):
    """Per-iteration max-SINR diagnostics for one drop.

    Runs the coordinated schemes with history recording and returns CSV rows
    (scheme, iteration, stream, mean leakage, mean predicted SINR in dB),
    averaged over the reported subcarriers.
    """
    scen = spec.scenario
    pg = _drop_path_gain(spec, drop_index)
    cfg = replace(scen, path_gain_db=tuple(map(tuple, pg)))
    channels = generate_channels(cfg, np.random.default_rng([spec.seed, drop_index, 1, 0]))
    out = []
    for scheme in ("ia", "comp"):
        if scheme not in spec.schemes:
            continue
        params = spec.codec_params(n_g, scheme == "ia")
        breve = np.stack(
            [
                _breve_channels(channels.big_h_all(k), params, scen.sigma_nominal_sq, quantized)[0]
                for k in range(3)
            ]
        )
        v_idx, _ = fb.reported_subcarrier_indices(n_g, scen.n_sc)
        blocks = np.stack([bf.split_blocks(breve[k]) for k in range(3)], axis=1)
        sig = np.stack(
            [bf.regularized_noise(blocks[:, k], scen.sigma_nominal_sq, spec.mu) for k in range(3)],
            axis=1,
        )
        if scheme == "ia":
            init, _ = bf.ia_closed_form(blocks)
            g = bf.ia_gain_matrices(blocks)
        else:
            big = breve.transpose(1, 0, 2, 3)
            init = bf.comp_init(big)
            g = bf.comp_gain_matrices(big)
        res = bf.max_sinr(
            g, (0, 1, 2), init, sig, scheme, spec.max_iters, spec.tol, record_history=True
        )
        for it, (sinr, leak) in enumerate(res.history):
            for stream in range(sinr.shape[1]):
                out.append(
                    {
                        "scheme": scheme,
                        "iteration": it,
                        "stream": stream,
                        "mean_leakage": float(leak[:, stream].mean()),
                        "mean_predicted_sinr_db": float(
                            10.0 * np.log10(np.maximum(sinr[:, stream], 1e-300)).mean()
                        ),
                    }
                )
    return out


def diagnostics_to_csv(diag_rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("scheme", "iteration", "stream", "mean_leakage", "mean_predicted_sinr_db"))
    for r in diag_rows:
        w.writerow(
            [
                r["scheme"],
                r["iteration"],
                r["stream"],
                _fmt(r["mean_leakage"]),
                _fmt(r["mean_predicted_sinr_db"]),
            ]
        )
    return buf.getvalue()
