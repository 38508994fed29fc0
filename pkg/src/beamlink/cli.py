"""Command-line front end.

Subcommands: run (full sweep from a JSON config), codec-selftest (golden
vectors and roundtrip fuzzing), codec encode/decode (file-level access to
the feedback bitstream), convergence (beamformer iteration diagnostics),
presets (available deployment presets).
"""

import argparse
import json
import os
import sys

import numpy as np

from . import feedback as fb
from . import golden, harness
from .scenario import PRESET_NAMES, PresetParams


def _add_run_flags(p):
    p.add_argument("--config", help="JSON experiment config")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--drops", type=int, help="override the number of drops")
    p.add_argument("--out", help="output directory (default $BEAMLINK_OUT or '.')")
    p.add_argument("--quantization", choices=("on", "off"), help="override quantization mode")
    p.add_argument("--workers", type=int, help="parallel drop workers")


def _spec_from_args(args):
    if args.config is not None:
        if not os.path.exists(args.config):
            raise FileNotFoundError(f"config file not found: {args.config}")
        spec = harness.load_config(args.config)
    else:
        spec = harness.ExperimentSpec()
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.drops is not None:
        updates["n_drops"] = args.drops
    if args.out is not None:
        updates["out_dir"] = args.out
    if args.quantization is not None:
        updates["quantization"] = (args.quantization == "on",)
    if getattr(args, "workers", None) is not None:
        updates["workers"] = args.workers
    if updates:
        from dataclasses import replace

        spec = replace(spec, **updates)
    return spec


def cmd_run(args):
    spec = _spec_from_args(args)
    rows, summary = harness.sweep(spec)
    out_dir = harness.resolve_out_dir(spec)
    print(f"{len(rows)} rows over {spec.n_drops} drops -> {out_dir}/results.csv")
    for cell in summary:
        q = "on" if cell["quantized"] else "off"
        print(
            f"  {cell['scheme']:>10} ng={cell['ng']:<2} quant={q:<3} "
            f"rms={cell['rms_ds_ns']:g}ns  mean={cell['mean_tput']:.3f} "
            f"+-{cell['stderr_tput']:.3f}"
        )
    return 0


def cmd_codec_selftest(args):
    n_records, n_fuzz = golden.selftest()
    print(f"codec selftest ok: {n_records} golden records, {n_fuzz} roundtrip fuzz cases")
    return 0


def cmd_codec_encode(args):
    with open(args.infile) as f:
        payload = json.load(f)
    params = golden.params_from_token(payload["params"])
    big = np.array(payload["big_h_re"]) + 1j * np.array(payload["big_h_im"])
    report = fb.encode_channel(big, params, payload.get("sigma_nominal_sq", 1.0))
    blob = fb.pack_report(report).hex()
    if args.out:
        with open(args.out, "w") as f:
            f.write(blob + "\n")
    else:
        print(blob)
    return 0


def cmd_codec_decode(args):
    params = golden.params_from_token(args.params)
    if os.path.exists(args.hex_or_file):
        with open(args.hex_or_file) as f:
            blob = f.read().strip()
    else:
        blob = args.hex_or_file
    report = fb.unpack_report(bytes.fromhex(blob), params)
    sigma_sq = args.sigma_nominal_sq
    breve = fb.reconstruct_channels(report, sigma_sq)
    v_idx, snr_idx = fb.reported_subcarrier_indices(params.n_g, params.n_sc)
    snr_db = fb.reconstruct_snr(report.snr, v_idx, snr_idx)
    out = {
        "v_indices": [int(x) for x in v_idx],
        "snr_db": snr_db.tolist(),
        "breve_re": breve.real.tolist(),
        "breve_im": breve.imag.tolist(),
    }
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w") as f:
            f.write(text + "\n")
    else:
        print(text)
    return 0


def cmd_convergence(args):
    spec = _spec_from_args(args)
    diag = harness.convergence_diagnostics(spec, drop_index=args.drop)
    text = harness.diagnostics_to_csv(diag)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, "convergence.csv")
        with open(path, "w") as f:
            f.write(text)
        print(f"wrote {path}")
    else:
        print(text, end="")
    return 0


def cmd_presets(args):
    defaults = PresetParams()
    print("available presets:")
    print(f"  los    one interferer much stronger: C/I_min ~ U{defaults.los_ci_min_range} dB, "
          f"gap ~ U{defaults.los_ci_gap_range} dB")
    print(f"  nlos   symmetric interference: both C/I ~ U{defaults.nlos_ci_range} dB")
    print("  mixed  per drop, los or nlos with probability 1/2")
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="beamlink", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a full experiment sweep")
    _add_run_flags(run)
    run.set_defaults(func=cmd_run)

    st = sub.add_parser("codec-selftest", help="golden vectors + roundtrip fuzz")
    st.set_defaults(func=cmd_codec_selftest)

    codec = sub.add_parser("codec", help="feedback bitstream tools")
    csub = codec.add_subparsers(dest="codec_command", required=True)
    enc = csub.add_parser("encode", help="channel JSON -> hex bitstream")
    enc.add_argument("infile", help="JSON with params token and big_h_re/big_h_im arrays")
    enc.add_argument("--out")
    enc.set_defaults(func=cmd_codec_encode)
    dec = csub.add_parser("decode", help="hex bitstream -> reconstructed channels JSON")
    dec.add_argument("hex_or_file", help="hex string or path to a file holding one")
    dec.add_argument("--params", required=True, help="m,n,b_psi,b_phi,n_g,ia,n_sc")
    dec.add_argument("--sigma-nominal-sq", type=float, default=1.0, dest="sigma_nominal_sq")
    dec.add_argument("--out")
    dec.set_defaults(func=cmd_codec_decode)
    cst = csub.add_parser("selftest", help="same as codec-selftest")
    cst.set_defaults(func=cmd_codec_selftest)

    conv = sub.add_parser("convergence", help="dump per-iteration beamformer diagnostics")
    _add_run_flags(conv)
    conv.add_argument("--drop", type=int, default=0)
    conv.set_defaults(func=cmd_convergence)

    pres = sub.add_parser("presets", help="list scenario presets")
    pres.set_defaults(func=cmd_presets)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, AssertionError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
