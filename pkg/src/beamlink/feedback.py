"""Compressed CSI feedback: SVD, Givens-angle compression, SNR reporting,
frequency granularity, and bit-exact packing.

The mobile decomposes the singular-vector matrix V of the concatenated
(2x6) channel into column phases (phi) and real Givens rotations (psi),
quantizes the angles uniformly, and reports stream SNRs as a coarse band
average plus per-subcarrier deltas. The base stations rebuild
breve_H = diag(s) V^H from the report. All angle bookkeeping is exact: with
quantization bypassed the parametrization is lossless up to the per-column
phases that are never sent.
"""

from dataclasses import dataclass

import numpy as np

ALLOWED_BIT_PAIRS = ((5, 7), (7, 9))
ALLOWED_N_G = (1, 2, 4, 8, 16, 38)

SNR_AVG_MIN_DB = -10.0
SNR_AVG_STEP_DB = 0.25
SNR_AVG_BITS = 8
SNR_DELTA_MIN = -8
SNR_DELTA_MAX = 7
SNR_DELTA_BITS = 4

#: Rows (0-based) of column 0 whose phase angles become zero by construction
#: when the per-base-station block rotation is applied, and are therefore
#: not transmitted.
IA_OMITTED_ROWS = (0, 2)

_ORTHONORMALITY_TOL = 1e-8


@dataclass(frozen=True)
class CodecParams:
    """Feedback configuration: angle bit widths, granularity, matrix shape."""

    b_psi: int = 7
    b_phi: int = 9
    n_g: int = 1
    ia_block_reduction: bool = False
    m: int = 6
    n: int = 2
    n_sc: int = 38

    def __post_init__(self):
        if (self.b_psi, self.b_phi) not in ALLOWED_BIT_PAIRS:
            raise ValueError(
                f"(b_psi, b_phi) must be one of {ALLOWED_BIT_PAIRS}, "
                f"got {(self.b_psi, self.b_phi)}"
            )
        if self.n_g not in ALLOWED_N_G:
            raise ValueError(f"n_g must be one of {ALLOWED_N_G}, got {self.n_g}")
        if self.n > self.m:
            raise ValueError("n must be <= m")
        if self.ia_block_reduction and self.m != 6:
            raise ValueError("the block rotation bit saving needs three 2-row blocks (m=6)")
        if self.n_sc < 1:
            raise ValueError("n_sc must be >= 1")


def angle_layout(params):
    """Canonical (column, row) positions of the phi and psi angles.

    phi positions are the rows whose phase is removed per column, top-down;
    psi positions the rows zeroed by Givens rotations. With the block
    reduction the column-0 phi entries at IA_OMITTED_ROWS are dropped.
    """
    m, n = params.m, params.n
    omitted = set()
    if params.ia_block_reduction:
        omitted = {(r, 0) for r in IA_OMITTED_ROWS}
    phi_pos, psi_pos = [], []
    for col in range(min(n, m - 1)):
        for row in range(col, m - 1):
            if (row, col) not in omitted:
                phi_pos.append((row, col))
        for row in range(col + 1, m):
            psi_pos.append((row, col))
    return phi_pos, psi_pos


def angle_counts(params):
    """(number of phi angles, number of psi angles) per reported subcarrier."""
    phi_pos, psi_pos = angle_layout(params)
    return len(phi_pos), len(psi_pos)


def phi_codebook(b_phi):
    """Mid-rise codepoints k*2pi/2^b + pi/2^b over [0, 2pi)."""
    step = 2.0 * np.pi / 2**b_phi
    return np.arange(2**b_phi) * step + step / 2.0


def psi_codebook(b_psi):
    """Mid-rise codepoints k*pi/2^(b+1) + pi/2^(b+2) over [0, pi/2)."""
    step = np.pi / 2 ** (b_psi + 1)
    return np.arange(2**b_psi) * step + step / 2.0


def quantize_phi(phi, b_phi):
    """Nearest codepoint index with wraparound at 2pi."""
    step = 2.0 * np.pi / 2**b_phi
    return np.floor(np.asarray(phi) % (2.0 * np.pi) / step).astype(int) % 2**b_phi


def quantize_psi(psi, b_psi):
    """Nearest codepoint index, clamped to [0, pi/2)."""
    step = np.pi / 2 ** (b_psi + 1)
    k = np.floor(np.asarray(psi) / step).astype(int)
    return np.clip(k, 0, 2**b_psi - 1)


def dequantize_phi(idx, b_phi):
    return phi_codebook(b_phi)[np.asarray(idx)]


def dequantize_psi(idx, b_psi):
    return psi_codebook(b_psi)[np.asarray(idx)]


def svd_big_channel(big_h):
    """Economy SVD of the concatenated channel.

    Returns (s, v): singular values descending and the m x n matrix of right
    singular vectors with orthonormal columns. No sign/phase convention is
    imposed here; compress_v normalizes phases itself.
    """
    big_h = np.asarray(big_h, dtype=complex)
    if not np.all(np.isfinite(big_h)):
        raise ValueError("big_h entries must be finite")
    _, s, vh = np.linalg.svd(big_h, full_matrices=False)
    return s, vh.conj().T


def canonicalize_columns(v):
    """Phase-rotate each column so its last-row entry is real nonnegative.

    This is the representative of the column-phase equivalence class that
    the codec reproduces; the phases themselves are never transmitted
    because downstream processing is invariant to them.
    """
    v = np.asarray(v, dtype=complex)
    return v * np.exp(-1j * np.angle(v[-1, :]))[None, :]


def _givens(m, i, l, psi):
    g = np.eye(m, dtype=complex)
    c, s = np.cos(psi), np.sin(psi)
    g[i, i] = c
    g[i, l] = s
    g[l, i] = -s
    g[l, l] = c
    return g


def extract_angles(v, params):
    """Exact (unquantized) phi and psi angles of V in canonical order.

    The working copy is first column-phase rotated so the last row is real
    nonnegative (these phases are never sent), then, with the block
    reduction, the top two 2-row blocks are each rotated by one phasor so
    their column-0 head entry is real nonnegative, zeroing the omitted phi
    angles. Phases of the remaining column entries give phi; the real Givens
    rotations that zero the below-pivot entries give psi in [0, pi/2).
    """
    v = np.asarray(v, dtype=complex)
    m, n = params.m, params.n
    if v.shape != (m, n):
        raise ValueError(f"expected {(m, n)} matrix, got {v.shape}")
    gram_err = np.linalg.norm(v.conj().T @ v - np.eye(n))
    if gram_err > _ORTHONORMALITY_TOL:
        raise ValueError(f"columns not orthonormal (|V^H V - I| = {gram_err:.3g})")

    w = v.copy()
    for j in range(n):
        w[:, j] *= np.exp(-1j * np.angle(w[m - 1, j]))
    omitted = set()
    if params.ia_block_reduction:
        for block, row in enumerate(IA_OMITTED_ROWS):
            w[2 * block : 2 * block + 2, :] *= np.exp(-1j * np.angle(w[row, 0]))
            omitted.add((row, 0))

    phis, psis = [], []
    for col in range(min(n, m - 1)):
        for row in range(col, m - 1):
            ang = np.angle(w[row, col])
            if (row, col) in omitted:
                # zero by construction; not transmitted
                continue
            phis.append(ang % (2.0 * np.pi))
            w[row, :] *= np.exp(-1j * ang)
        for row in range(col + 1, m):
            psi = np.arctan2(w[row, col].real, w[col, col].real)
            psis.append(psi)
            w = _givens(m, col, row, psi) @ w
    return np.array(phis), np.array(psis)


def rebuild_v(phis, psis, params):
    """Reconstruct v-hat from (possibly dequantized) angles.

    Applies the phase matrices and transposed Givens rotations to the first
    n columns of the m x m identity, so the result always has exactly
    orthonormal columns. Omitted block-reduction phi angles are zero.
    """
    m, n = params.m, params.n
    phi_pos, psi_pos = angle_layout(params)
    phis = np.asarray(phis, dtype=float)
    psis = np.asarray(psis, dtype=float)
    if phis.shape != (len(phi_pos),) or psis.shape != (len(psi_pos),):
        raise ValueError(
            f"expected {len(phi_pos)} phi / {len(psi_pos)} psi angles, "
            f"got {phis.shape} / {psis.shape}"
        )
    phi_of = dict(zip(phi_pos, phis))
    psi_of = dict(zip(psi_pos, psis))

    out = np.eye(m, dtype=complex)[:, :n]
    ops = []
    for col in range(min(n, m - 1)):
        d = np.ones(m, dtype=complex)
        for row in range(col, m - 1):
            d[row] = np.exp(1j * phi_of.get((row, col), 0.0))
        ops.append(np.diag(d))
        for row in range(col + 1, m):
            ops.append(_givens(m, col, row, psi_of[(row, col)]).conj().T)
    for op in reversed(ops):
        out = op @ out
    return out


def compress_v(v, params):
    """Quantized angle indices (phi_idx, psi_idx) for one subcarrier."""
    phis, psis = extract_angles(v, params)
    return quantize_phi(phis, params.b_phi), quantize_psi(psis, params.b_psi)


def decompress_v(phi_idx, psi_idx, params):
    """V-hat from quantized angle indices."""
    phi_idx = np.asarray(phi_idx, dtype=int)
    psi_idx = np.asarray(psi_idx, dtype=int)
    n_phi, n_psi = angle_counts(params)
    if phi_idx.shape != (n_phi,) or psi_idx.shape != (n_psi,):
        raise ValueError(
            f"expected {n_phi} phi / {n_psi} psi indices, "
            f"got {phi_idx.shape} / {psi_idx.shape}"
        )
    if np.any(phi_idx < 0) or np.any(phi_idx >= 2**params.b_phi):
        raise ValueError("phi index out of range")
    if np.any(psi_idx < 0) or np.any(psi_idx >= 2**params.b_psi):
        raise ValueError("psi index out of range")
    return rebuild_v(
        dequantize_phi(phi_idx, params.b_phi),
        dequantize_psi(psi_idx, params.b_psi),
        params,
    )


def roundtrip_unquantized(v, params):
    """compress -> decompress with quantization bypassed (lossless path)."""
    phis, psis = extract_angles(v, params)
    return rebuild_v(phis, psis, params)


def reported_subcarrier_indices(n_g, n_sc):
    """Subcarriers carrying V feedback and the subset carrying SNR deltas.

    V is reported every n_g-th subcarrier with the band edge always
    included; the SNR is reported on every second V-reported subcarrier,
    starting at the first.
    """
    if n_g not in ALLOWED_N_G:
        raise ValueError(f"n_g must be one of {ALLOWED_N_G}, got {n_g}")
    v_idx = sorted(set(range(0, n_sc, n_g)) | {n_sc - 1})
    v_idx = np.array(v_idx, dtype=int)
    return v_idx, v_idx[::2].copy()


@dataclass
class AngleSet:
    """Quantized angle indices per reported subcarrier (canonical order)."""

    phi_idx: np.ndarray  # (n_reported, n_phi) int
    psi_idx: np.ndarray  # (n_reported, n_psi) int


@dataclass
class SnrReport:
    """Per-stream band-average SNR index plus per-subcarrier deltas (dB)."""

    avg_idx: np.ndarray  # (n_streams,) int in [0, 255]
    delta_db: np.ndarray  # (n_streams, n_snr_subcarriers) int in [-8, 7]


@dataclass
class CsiReport:
    """One complete feedback message for one mobile."""

    params: CodecParams
    angles: AngleSet
    snr: SnrReport

    def __post_init__(self):
        n_phi, n_psi = angle_counts(self.params)
        v_idx, snr_idx = reported_subcarrier_indices(self.params.n_g, self.params.n_sc)
        if self.angles.phi_idx.shape != (len(v_idx), n_phi):
            raise ValueError("phi index array shape does not match params")
        if self.angles.psi_idx.shape != (len(v_idx), n_psi):
            raise ValueError("psi index array shape does not match params")
        if self.snr.avg_idx.shape != (self.params.n,):
            raise ValueError("snr avg shape does not match stream count")
        if self.snr.delta_db.shape != (self.params.n, len(snr_idx)):
            raise ValueError("snr delta shape does not match params")


def quantize_snr(snr_db):
    """Build the SNR report from per-stream dB values at the SNR subcarriers.

    The band average (mean over the reported subcarriers, per stream) is
    quantized to 8 bits over [-10, 53.75] dB in 0.25 dB steps; the deltas
    against the dequantized average are rounded to whole dB and clamped to
    [-8, +7].
    """
    snr_db = np.atleast_2d(np.asarray(snr_db, dtype=float))
    if not np.all(np.isfinite(snr_db)):
        raise ValueError("snr values must be finite")
    avg = snr_db.mean(axis=1)
    avg_idx = np.clip(
        np.round((avg - SNR_AVG_MIN_DB) / SNR_AVG_STEP_DB), 0, 2**SNR_AVG_BITS - 1
    ).astype(int)
    avg_deq = SNR_AVG_MIN_DB + SNR_AVG_STEP_DB * avg_idx
    delta = np.clip(
        np.round(snr_db - avg_deq[:, None]), SNR_DELTA_MIN, SNR_DELTA_MAX
    ).astype(int)
    return SnrReport(avg_idx=avg_idx, delta_db=delta)


def reconstruct_snr(snr_report, v_indices, snr_indices):
    """Per-stream SNR (dB) at every V-reported subcarrier.

    Exact at the SNR subcarriers (dequantized average plus delta), linearly
    interpolated in dB in between, and held constant beyond the last SNR
    subcarrier.
    """
    avg_deq = SNR_AVG_MIN_DB + SNR_AVG_STEP_DB * np.asarray(snr_report.avg_idx)
    at_snr = avg_deq[:, None] + np.asarray(snr_report.delta_db, dtype=float)
    v_indices = np.asarray(v_indices, dtype=float)
    snr_indices = np.asarray(snr_indices, dtype=float)
    return np.stack(
        [np.interp(v_indices, snr_indices, at_snr[i]) for i in range(at_snr.shape[0])]
    )


def encode_channel(big_h_per_sc, params, sigma_nominal_sq):
    """Compress a (n_sc, 2, 6)-shaped concatenated channel into a CsiReport.

    Stream SNRs are the singular values over the noise standard deviation,
    in dB, taken at the SNR-reported subcarriers.
    """
    big = np.asarray(big_h_per_sc, dtype=complex)
    if big.shape != (params.n_sc, params.n, params.m):
        raise ValueError(
            f"expected ({params.n_sc}, {params.n}, {params.m}) channel, got {big.shape}"
        )
    v_idx, snr_idx = reported_subcarrier_indices(params.n_g, params.n_sc)
    sigma = np.sqrt(sigma_nominal_sq)

    phi_rows, psi_rows = [], []
    snr_db = np.zeros((params.n, len(snr_idx)))
    snr_pos = {int(s): i for i, s in enumerate(snr_idx)}
    for r, s in enumerate(v_idx):
        sv, v = svd_big_channel(big[s])
        pi, qi = compress_v(v, params)
        phi_rows.append(pi)
        psi_rows.append(qi)
        if int(s) in snr_pos:
            snr_db[:, snr_pos[int(s)]] = 20.0 * np.log10(np.maximum(sv, 1e-30) / sigma)
    angles = AngleSet(phi_idx=np.array(phi_rows), psi_idx=np.array(psi_rows))
    return CsiReport(params=params, angles=angles, snr=quantize_snr(snr_db))


def reconstruct_channels(report, sigma_nominal_sq):
    """breve_H = diag(s) V-hat^H at every V-reported subcarrier.

    Returns an (n_reported, n, m) array; amplitudes come from the
    reconstructed SNRs via s_i = sigma_nominal * 10^(snr_db_i / 20).
    """
    params = report.params
    v_idx, snr_idx = reported_subcarrier_indices(params.n_g, params.n_sc)
    snr_db = reconstruct_snr(report.snr, v_idx, snr_idx)
    s = np.sqrt(sigma_nominal_sq) * 10.0 ** (snr_db / 20.0)
    out = np.zeros((len(v_idx), params.n, params.m), dtype=complex)
    for r in range(len(v_idx)):
        vhat = decompress_v(report.angles.phi_idx[r], report.angles.psi_idx[r], params)
        out[r] = s[:, r][:, None] * vhat.conj().T
    return out


def bit_count(params):
    """Total feedback bits: V angles at every reported subcarrier plus the
    per-stream SNR average and delta fields."""
    m, n = params.m, params.n
    per_sc = ((2 * m - 1) * n - n * n) * (params.b_phi + params.b_psi) // 2
    if params.ia_block_reduction:
        per_sc -= 2 * params.b_phi
    v_idx, snr_idx = reported_subcarrier_indices(params.n_g, params.n_sc)
    snr_bits = n * SNR_AVG_BITS + n * len(snr_idx) * SNR_DELTA_BITS
    return per_sc * len(v_idx) + snr_bits


class _BitWriter:
    def __init__(self):
        self._bits = []

    def write(self, value, width):
        value = int(value)
        if value < 0 or value >= 1 << width:
            raise ValueError(f"value {value} does not fit in {width} bits")
        for i in range(width - 1, -1, -1):
            self._bits.append((value >> i) & 1)

    def to_bytes(self):
        bits = self._bits
        out = bytearray()
        for i in range(0, len(bits), 8):
            chunk = bits[i : i + 8]
            chunk = chunk + [0] * (8 - len(chunk))
            byte = 0
            for b in chunk:
                byte = (byte << 1) | b
            out.append(byte)
        return bytes(out)

    def __len__(self):
        return len(self._bits)


class _BitReader:
    def __init__(self, data):
        self._data = data
        self._pos = 0

    def read(self, width):
        if self._pos + width > 8 * len(self._data):
            raise ValueError("truncated buffer")
        value = 0
        for _ in range(width):
            byte = self._data[self._pos // 8]
            bit = (byte >> (7 - self._pos % 8)) & 1
            value = (value << 1) | bit
            self._pos += 1
        return value

    def check_padding(self):
        remaining = 8 * len(self._data) - self._pos
        if remaining >= 8:
            raise ValueError("buffer longer than the report")
        if remaining and self.read(remaining) != 0:
            raise ValueError("nonzero padding bits")


def pack_report(report):
    """Serialize a CsiReport.

    Layout: per-stream 8-bit SNR averages; then the 4-bit deltas with the
    stream as the major axis and the SNR subcarriers ascending within; then,
    for each V-reported subcarrier ascending, the angles in canonical order
    (each column's phi entries then its psi entries). Fields are big-endian;
    the stream is zero-padded to a byte boundary.
    """
    params = report.params
    w = _BitWriter()
    for i in range(params.n):
        w.write(report.snr.avg_idx[i], SNR_AVG_BITS)
    for i in range(params.n):
        for d in report.snr.delta_db[i]:
            w.write(int(d) & 0xF, SNR_DELTA_BITS)
    phi_pos, psi_pos = angle_layout(params)
    order = _canonical_order(params, phi_pos, psi_pos)
    for r in range(report.angles.phi_idx.shape[0]):
        for kind, slot in order:
            if kind == "phi":
                w.write(report.angles.phi_idx[r, slot], params.b_phi)
            else:
                w.write(report.angles.psi_idx[r, slot], params.b_psi)
    if len(w) != bit_count(params):
        raise AssertionError("packed length disagrees with bit_count")
    return w.to_bytes()


def _canonical_order(params, phi_pos, psi_pos):
    """Interleaved per-column field order: column 0 phis, column 0 psis, ..."""
    order = []
    for col in range(min(params.n, params.m - 1)):
        for slot, (_, c) in enumerate(phi_pos):
            if c == col:
                order.append(("phi", slot))
        for slot, (_, c) in enumerate(psi_pos):
            if c == col:
                order.append(("psi", slot))
    return order


def unpack_report(data, params):
    """Parse bytes produced by pack_report; strict inverse.

    Raises ValueError on truncated input, oversized input, or nonzero
    padding bits.
    """
    r = _BitReader(data)
    v_idx, snr_idx = reported_subcarrier_indices(params.n_g, params.n_sc)
    avg_idx = np.array([r.read(SNR_AVG_BITS) for _ in range(params.n)])
    delta = np.zeros((params.n, len(snr_idx)), dtype=int)
    for i in range(params.n):
        for j in range(len(snr_idx)):
            raw = r.read(SNR_DELTA_BITS)
            delta[i, j] = raw - 16 if raw >= 8 else raw
    phi_pos, psi_pos = angle_layout(params)
    order = _canonical_order(params, phi_pos, psi_pos)
    phi = np.zeros((len(v_idx), len(phi_pos)), dtype=int)
    psi = np.zeros((len(v_idx), len(psi_pos)), dtype=int)
    for row in range(len(v_idx)):
        for kind, slot in order:
            if kind == "phi":
                phi[row, slot] = r.read(params.b_phi)
            else:
                psi[row, slot] = r.read(params.b_psi)
    r.check_padding()
    return CsiReport(
        params=params,
        angles=AngleSet(phi_idx=phi, psi_idx=psi),
        snr=SnrReport(avg_idx=avg_idx, delta_db=delta),
    )
