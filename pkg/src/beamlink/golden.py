"""Frozen codec test vectors and the self-test that checks them.

The vector file pins the bitstream layout and the angle conventions: one
record per line holding the hex bitstream, the codec parameter tuple, and
the reconstructed V matrices at every reported subcarrier to 12 significant
digits. Regenerating the file must reproduce it bit for bit; any diff means
the wire format changed.
"""

import importlib.resources

import numpy as np

from . import feedback as fb

VECTOR_RESOURCE = "golden_codec_vectors.txt"


def params_to_token(params):
    return ",".join(
        str(int(x))
        for x in (
            params.m,
            params.n,
            params.b_psi,
            params.b_phi,
            params.n_g,
            params.ia_block_reduction,
            params.n_sc,
        )
    )


def params_from_token(token):
    m, n, b_psi, b_phi, n_g, ia, n_sc = (int(x) for x in token.split(","))
    return fb.CodecParams(
        b_psi=b_psi, b_phi=b_phi, n_g=n_g, ia_block_reduction=bool(ia), m=m, n=n, n_sc=n_sc
    )


def _fmt_entry(z):
    return f"{z.real:.12g}{z.imag:+.12g}j"


def format_record(report):
    """One line: hex bitstream, params, reconstructed V per subcarrier.

    The V matrices come from decompress_v (row-major entries, subcarriers
    joined with ';'), so the record freezes both the bit layout and the
    reconstruction arithmetic.
    """
    params = report.params
    blob = fb.pack_report(report).hex()
    mats = []
    for r in range(report.angles.phi_idx.shape[0]):
        v = fb.decompress_v(report.angles.phi_idx[r], report.angles.psi_idx[r], params)
        mats.append(",".join(_fmt_entry(z) for z in v.ravel()))
    return f"{blob} {params_to_token(params)} {';'.join(mats)}"


def parse_record(line):
    blob, token, mats = line.strip().split(" ")
    params = params_from_token(token)
    v_list = []
    for mat in mats.split(";"):
        entries = np.array([complex(e) for e in mat.split(",")])
        v_list.append(entries.reshape(params.m, params.n))
    return bytes.fromhex(blob), params, v_list


def load_vector_lines():
    text = (
        importlib.resources.files("beamlink.data").joinpath(VECTOR_RESOURCE).read_text()
    )
    return [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]


def check_record(line, tol=1e-9):
    """Verify one record: unpack, rebuild V, repack; raises on mismatch."""
    blob, params, v_ref = parse_record(line)
    report = fb.unpack_report(blob, params)
    for r, ref in enumerate(v_ref):
        v = fb.decompress_v(report.angles.phi_idx[r], report.angles.psi_idx[r], params)
        err = np.abs(v - ref).max()
        if err > tol:
            raise AssertionError(f"record V mismatch ({err:.3g}) for params {params}")
    if fb.pack_report(report) != blob:
        raise AssertionError(f"repacked bitstream differs for params {params}")


def random_report(params, rng):
    """Uniformly random well-formed report (for roundtrip fuzzing)."""
    v_idx, snr_idx = fb.reported_subcarrier_indices(params.n_g, params.n_sc)
    n_phi, n_psi = fb.angle_counts(params)
    angles = fb.AngleSet(
        phi_idx=rng.integers(0, 2**params.b_phi, size=(len(v_idx), n_phi)),
        psi_idx=rng.integers(0, 2**params.b_psi, size=(len(v_idx), n_psi)),
    )
    snr = fb.SnrReport(
        avg_idx=rng.integers(0, 256, size=params.n),
        delta_db=rng.integers(-8, 8, size=(params.n, len(snr_idx))),
    )
    return fb.CsiReport(params=params, angles=angles, snr=snr)


def selftest(n_fuzz=200, seed=0):
    """Golden vectors plus pack/unpack roundtrip fuzzing.

    Returns (n_records, n_fuzz) on success; raises AssertionError on any
    mismatch.
    """
    lines = load_vector_lines()
    for line in lines:
        check_record(line)
    rng = np.random.default_rng(seed)
    cases = [
        fb.CodecParams(m=6, n=2, n_g=1),
        fb.CodecParams(m=6, n=2, n_g=8, ia_block_reduction=True),
        fb.CodecParams(m=4, n=2, n_g=16, b_psi=5, b_phi=7),
        fb.CodecParams(m=2, n=2, n_g=38),
    ]
    for i in range(n_fuzz):
        params = cases[i % len(cases)]
        report = random_report(params, rng)
        back = fb.unpack_report(fb.pack_report(report), params)
        if not (
            np.array_equal(back.angles.phi_idx, report.angles.phi_idx)
            and np.array_equal(back.angles.psi_idx, report.angles.psi_idx)
            and np.array_equal(back.snr.avg_idx, report.snr.avg_idx)
            and np.array_equal(back.snr.delta_db, report.snr.delta_db)
        ):
            raise AssertionError("pack/unpack roundtrip mismatch")
    return len(lines), n_fuzz
