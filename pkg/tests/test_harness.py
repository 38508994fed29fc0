import json

import numpy as np
import pytest

from beamlink import feedback as fb
from beamlink import harness
from beamlink.harness import ExperimentSpec, aggregate, run_drop, rows_to_csv, run_all_drops
from beamlink.scenario import ScenarioConfig


def small_spec(**kw):
    base = dict(
        scenario=ScenarioConfig(sigma_nominal_sq=1e-4),
        preset="nlos",
        schemes=("ia", "tdma_mimo"),
        n_g_list=(1, 8),
        quantization=(True,),
        n_drops=2,
        seed=11,
    )
    base.update(kw)
    return ExperimentSpec(**base)


def test_unquantized_breve_is_exact_svd():
    cfg = ScenarioConfig(seed=4)
    from beamlink.scenario import generate_channels

    ch = generate_channels(cfg)
    params = fb.CodecParams(m=6, n=2, n_g=1, n_sc=38)
    breve, v_idx = harness._breve_channels(ch.big_h_all(0), params, cfg.sigma_nominal_sq, False)
    assert np.array_equal(v_idx, np.arange(38))
    for s in (0, 9, 37):
        u, sv, vh = np.linalg.svd(ch.big_h(0, s), full_matrices=False)
        assert np.abs(breve[s] - sv[:, None] * vh).max() < 1e-12


def test_ia_hits_dof_limit_with_ideal_feedback():
    # lossless feedback, no distortion, 60 dB SNR: alignment delivers all
    # three streams at the top rate while time sharing tops out at 12
    spec = small_spec(
        scenario=ScenarioConfig(sigma_nominal_sq=1e-6),
        schemes=("ia", "tdma_mimo"),
        n_g_list=(1,),
        quantization=(False,),
        mu=0.0,
        n_drops=3,
        seed=5,
    )
    rows = run_all_drops(spec)
    ia = [r for r in rows if r.scheme == "ia"]
    tdma = [r for r in rows if r.scheme == "tdma_mimo"]
    assert sum(r.sum_tput == 18.0 for r in ia) >= 2
    assert all(r.sum_tput == 12.0 for r in tdma)


def test_run_drop_deterministic():
    spec = small_spec()
    a = run_drop(spec, 1)
    b = run_drop(spec, 1)
    assert len(a) == len(b)
    for ra, rb in zip(a, b):
        assert ra == rb


def test_tdma_rows_identical_across_ng_on_flat_channel():
    spec = small_spec(
        scenario=ScenarioConfig(rms_delay_spread=0.0),
        rms_ds_list=(0.0,),
        schemes=("tdma_mimo",),
        n_g_list=(1, 2, 8, 38),
    )
    rows = run_drop(spec, 0)
    by_ng = {r.n_g: r for r in rows}
    ref = by_ng[1]
    for ng in (2, 8, 38):
        assert by_ng[ng].stream_mcs == ref.stream_mcs
        assert by_ng[ng].sum_tput == ref.sum_tput


def test_fb_bits_column_matches_codec():
    spec = small_spec()
    rows = run_drop(spec, 0)
    for r in rows:
        params = spec.codec_params(r.n_g, r.scheme == "ia")
        assert r.fb_bits == fb.bit_count(params)


def test_paired_design_rows_stable_under_scheme_subset():
    # dropping schemes from the list must not change the remaining rows:
    # channels depend only on (seed, drop), pilots only on (seed, drop, scheme)
    full = small_spec(schemes=("ia", "comp", "tdma_mimo"))
    sub = small_spec(schemes=("ia", "tdma_mimo"))
    rows_full = {(r.scheme, r.n_g): r for r in run_drop(full, 0) if r.scheme != "comp"}
    rows_sub = {(r.scheme, r.n_g): r for r in run_drop(sub, 0)}
    assert set(rows_full) == set(rows_sub)
    for key in rows_full:
        rf, rs = rows_full[key], rows_sub[key]
        assert rf.stream_mcs == rs.stream_mcs and rf.sum_tput == rs.sum_tput


def test_aggregate_single_drop_equals_row():
    spec = small_spec(n_drops=1)
    rows = run_all_drops(spec)
    summary = aggregate(rows, spec)
    for cell in summary:
        matching = [
            r
            for r in rows
            if r.scheme == cell["scheme"]
            and r.n_g == cell["ng"]
            and r.quantized == cell["quantized"]
        ]
        assert len(matching) == 1
        assert cell["mean_tput"] == matching[0].sum_tput
        assert cell["stderr_tput"] == 0.0
        assert cell["n_drops"] == 1


def test_aggregate_matches_bruteforce_fold_over_csv():
    spec = small_spec(n_drops=3)
    rows = run_all_drops(spec)
    summary = aggregate(rows, spec)
    # independent fold over the serialized CSV
    text = rows_to_csv(rows).splitlines()
    header = text[0].split(",")
    acc = {}
    for line in text[1:]:
        d = dict(zip(header, line.split(",")))
        key = (d["scheme"], int(d["ng"]), bool(int(d["quantized"])), float(d["rms_ds_ns"]))
        acc.setdefault(key, []).append(float(d["sum_tput"]))
    for cell in summary:
        key = (cell["scheme"], cell["ng"], cell["quantized"], cell["rms_ds_ns"])
        vals = acc[key]
        assert cell["mean_tput"] == pytest.approx(np.mean(vals), abs=1e-12)
        if len(vals) > 1:
            ref = np.std(vals, ddof=1) / np.sqrt(len(vals))
            assert cell["stderr_tput"] == pytest.approx(ref, abs=1e-12)


def test_gain_is_pairwise_vs_tdma():
    spec = small_spec(schemes=("ia", "tdma_mimo"), n_drops=2)
    rows = run_all_drops(spec)
    summary = aggregate(rows, spec)
    cells = {(c["scheme"], c["ng"]): c for c in summary}
    for ng in spec.n_g_list:
        ia, td = cells[("ia", ng)], cells[("tdma_mimo", ng)]
        assert ia["gain_vs_tdma_mimo"] == pytest.approx(
            ia["mean_tput"] / td["mean_tput"] - 1.0
        )
        assert td["gain_vs_tdma_mimo"] == pytest.approx(0.0)


def test_worker_count_does_not_change_results():
    spec1 = small_spec(n_drops=3, workers=1)
    spec2 = small_spec(n_drops=3, workers=2)
    rows1 = run_all_drops(spec1)
    rows2 = run_all_drops(spec2)
    assert rows_to_csv(rows1) == rows_to_csv(rows2)


def test_failed_cell_records_outage(monkeypatch):
    from beamlink import beamforming as bf

    def boom(*a, **k):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(bf, "ia_closed_form", boom)
    spec = small_spec(schemes=("ia", "tdma_mimo"), n_g_list=(1,))
    rows = run_drop(spec, 0)
    ia = [r for r in rows if r.scheme == "ia"]
    tdma = [r for r in rows if r.scheme == "tdma_mimo"]
    assert all(r.sum_tput == 0.0 and all(m is None for m in r.stream_mcs) for r in ia)
    assert all(r.sum_tput > 0 for r in tdma)  # the sweep went on


def test_sweep_writes_outputs(tmp_path):
    spec = small_spec(n_drops=1, out_dir=str(tmp_path))
    rows, summary = harness.sweep(spec)
    assert (tmp_path / "results.csv").exists()
    assert (tmp_path / "summary.csv").exists()
    data = json.loads((tmp_path / "summary.json").read_text())
    assert data["seed"] == spec.seed
    assert len(data["cells"]) == len(summary)
    text = (tmp_path / "results.csv").read_text()
    assert text.splitlines()[0] == "drop,scheme,ng,quantized,rms_ds_ns,stream_mcs,sum_tput,fb_bits"
    assert text == rows_to_csv(rows)


def test_output_dir_env_fallback(tmp_path, monkeypatch):
    monkeypatch.setenv(harness.OUTPUT_DIR_ENV, str(tmp_path / "envout"))
    spec = small_spec(n_drops=1)
    harness.sweep(spec)
    assert (tmp_path / "envout" / "results.csv").exists()


def test_spec_validation():
    with pytest.raises(ValueError):
        small_spec(n_drops=0)
    with pytest.raises(ValueError):
        small_spec(schemes=())
    with pytest.raises(ValueError):
        small_spec(schemes=("ia", "dirty_paper"))
    with pytest.raises(ValueError):
        small_spec(n_g_list=(3,))
    with pytest.raises(ValueError):
        small_spec(preset="urban")


def test_config_loading(tmp_path):
    cfg = {
        "scenario": {"sigma_nominal_sq": 1e-5, "rms_delay_spread": 100e-9},
        "preset": "los",
        "schemes": ["ia", "comp"],
        "n_g_list": [1, 4],
        "quantization": ["on", "off"],
        "rms_ds_list_ns": [0, 100],
        "n_drops": 7,
        "seed": 99,
        "gap_db": 4.0,
    }
    path = tmp_path / "exp.json"
    path.write_text(json.dumps(cfg))
    spec = harness.load_config(str(path))
    assert spec.scenario.sigma_nominal_sq == 1e-5
    assert spec.preset == "los"
    assert spec.schemes == ("ia", "comp")
    assert spec.quantization == (True, False)
    assert spec.rms_ds_list == (0.0, 100e-9)
    assert spec.n_drops == 7 and spec.seed == 99
    bad = dict(cfg, radio="5g")
    path.write_text(json.dumps(bad))
    with pytest.raises(ValueError):
        harness.load_config(str(path))


def test_convergence_diagnostics_rows():
    spec = small_spec(schemes=("ia", "comp"), n_g_list=(1,))
    diag = harness.convergence_diagnostics(spec, drop_index=0)
    schemes = {d["scheme"] for d in diag}
    assert schemes == {"ia", "comp"}
    for d in diag:
        assert np.isfinite(d["mean_leakage"]) and np.isfinite(d["mean_predicted_sinr_db"])
    text = harness.diagnostics_to_csv(diag)
    assert text.splitlines()[0] == "scheme,iteration,stream,mean_leakage,mean_predicted_sinr_db"
