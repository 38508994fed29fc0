"""Regenerate the frozen codec vectors.

Output must be bit-identical to src/beamlink/data/golden_codec_vectors.txt;
a diff means the wire format or the angle conventions changed, which breaks
deployed decoders. Records cover every supported (m, n) shape, both bit-width
pairs, the granularity extremes, the block-reduction variant, and the
all-zero-indices report that pins the reconstruction arithmetic.
"""

import sys
from pathlib import Path

import numpy as np

from beamlink import feedback as fb
from beamlink import golden
from beamlink.util import crandn


def random_semiunitary(rng, m, n):
    q, _ = np.linalg.qr(crandn(rng, (m, n)))
    return q[:, :n]


def channel_report(params, rng, sigma_sq=1.0):
    big = crandn(rng, (params.n_sc, params.n, params.m)) * 2.0
    return fb.encode_channel(big, params, sigma_sq)


def zero_report(params):
    v_idx, snr_idx = fb.reported_subcarrier_indices(params.n_g, params.n_sc)
    n_phi, n_psi = fb.angle_counts(params)
    return fb.CsiReport(
        params=params,
        angles=fb.AngleSet(
            phi_idx=np.zeros((len(v_idx), n_phi), dtype=int),
            psi_idx=np.zeros((len(v_idx), n_psi), dtype=int),
        ),
        snr=fb.SnrReport(
            avg_idx=np.zeros(params.n, dtype=int),
            delta_db=np.zeros((params.n, len(snr_idx)), dtype=int),
        ),
    )


def main(out_path):
    rng = np.random.default_rng(20240917)
    cases = [
        fb.CodecParams(m=2, n=2, b_psi=7, b_phi=9, n_g=38),
        fb.CodecParams(m=2, n=2, b_psi=5, b_phi=7, n_g=16),
        fb.CodecParams(m=4, n=2, b_psi=7, b_phi=9, n_g=16),
        fb.CodecParams(m=4, n=2, b_psi=5, b_phi=7, n_g=8),
        fb.CodecParams(m=6, n=2, b_psi=7, b_phi=9, n_g=8),
        fb.CodecParams(m=6, n=2, b_psi=7, b_phi=9, n_g=8, ia_block_reduction=True),
        fb.CodecParams(m=6, n=2, b_psi=5, b_phi=7, n_g=16),
        fb.CodecParams(m=6, n=2, b_psi=5, b_phi=7, n_g=38, ia_block_reduction=True),
        fb.CodecParams(m=6, n=2, b_psi=7, b_phi=9, n_g=1),
    ]
    lines = [
        "# frozen codec vectors: hex_bitstream params(m,n,b_psi,b_phi,n_g,ia,n_sc) "
        "v_hat entries (12 significant digits, row-major, ';' between subcarriers)",
    ]
    for params in cases:
        lines.append(golden.format_record(channel_report(params, rng)))
    # all-zero indices: pins the deterministic reconstruction matrix
    lines.append(golden.format_record(zero_report(fb.CodecParams(m=6, n=2, n_g=38))))
    Path(out_path).write_text("\n".join(lines) + "\n")
    print(f"wrote {len(lines) - 1} records to {out_path}")


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "src/beamlink/data/golden_codec_vectors.txt")
