"""Transmit precoder computation for all schemes.

Everything here runs on the reconstructed (fed-back) channels, so feedback
distortion propagates into the beamformers exactly as it would in a real
system. The coordinated schemes start from closed-form initializations
(the three-user alignment solution for per-cell streams, the pseudo-inverse
of the dominant eigenbeamformers for joint transmission) and are refined by
the alternating max-SINR iteration. The baselines use per-link
eigenbeamformers directly.

Array conventions: per-subcarrier batches lead the shape. A precoder batch
is (n_subcarriers, n_streams, d) where d is 2 for per-cell streams and 6
for joint transmission.
"""

from dataclasses import dataclass, field

import numpy as np

SCHEMES = ("ia", "comp", "tdma_mimo", "fr_mimo", "fr_simo")

#: Condition-number gate for the alignment closed form.
CF_COND_LIMIT = 1e8

#: Relative singular-value floor for the joint-transmission pseudo-inverse.
PINV_RCOND = 1e-6

DEFAULT_MAX_ITERS = 50
DEFAULT_TOL = 1e-6
DEFAULT_MU = 1e-3


@dataclass
class PrecoderSet:
    """Per-subcarrier, per-stream transmit vectors.

    vectors is (n_sc, n_streams, d); owner_rx maps stream -> served mobile;
    owner_bs maps stream -> transmitting base station, or None when every
    stream uses all six antennas jointly. Stream powers are carried in the
    vector norms.
    """

    scheme: str
    vectors: np.ndarray
    owner_rx: tuple
    owner_bs: tuple | None
    fallback: np.ndarray = field(default=None)

    def per_bs_power(self):
        """(n_sc, n_bs) transmitted power per base station."""
        v = self.vectors
        if self.owner_bs is None:
            return np.stack(
                [np.sum(np.abs(v[:, :, 2 * b : 2 * b + 2]) ** 2, axis=(1, 2)) for b in range(3)],
                axis=1,
            )
        n_bs = max(self.owner_bs) + 1
        p = np.zeros((v.shape[0], n_bs))
        for i, b in enumerate(self.owner_bs):
            p[:, b] += np.sum(np.abs(v[:, i]) ** 2, axis=1)
        return p


def regularized_noise(blocks, sigma_nominal_sq, mu):
    """Effective noise sigma^2 + mu * sum_j ||H_kj||_F^2 for one user.

    blocks is (..., n_bs, 2, 2); the sum runs over the trailing three axes,
    so a leading subcarrier batch is preserved.
    """
    if mu < 0:
        raise ValueError("mu must be >= 0")
    blocks = np.asarray(blocks)
    return sigma_nominal_sq + mu * np.sum(np.abs(blocks) ** 2, axis=(-3, -2, -1))


def split_blocks(breve):
    """(..., 2, 6) concatenated channels -> (..., n_bs, 2, 2) per-BS blocks."""
    breve = np.asarray(breve)
    return np.stack([breve[..., :, 2 * j : 2 * j + 2] for j in range(3)], axis=-3)


def eigen_precoder(h_kk, n_streams):
    """Right singular vectors of a direct link, strongest first.

    h_kk may carry a leading batch axis. Returns (vectors, s, degenerate):
    vectors is (..., 2, n_streams), s the singular values, and degenerate
    flags channels whose second stream has (numerically) zero gain.
    """
    if n_streams not in (1, 2):
        raise ValueError("n_streams must be 1 or 2")
    h = np.asarray(h_kk, dtype=complex)
    if not np.all(np.isfinite(h)):
        raise ValueError("channel entries must be finite")
    _, s, vh = np.linalg.svd(h)
    v = np.swapaxes(vh.conj(), -1, -2)[..., :n_streams]
    degenerate = s[..., 1] <= 1e-12 * np.maximum(s[..., 0], 1e-300)
    if n_streams == 1:
        degenerate = np.zeros_like(degenerate)
    return v, s[..., :n_streams], degenerate


def ia_closed_form(blocks):
    """Aligned per-cell precoders for the 3-user, 2x2, one-stream case.

    blocks is (n_sc, 3, 3, 2, 2) with blocks[s, k, j] the channel from base
    j to mobile k. Builds E = H31^-1 H32 H12^-1 H13 H23^-1 H21 (1-based
    indices), picks the eigenvector of E with the larger |eigenvalue| (first
    component phase zeroed) as stream 1, and maps it through the cross links
    for streams 2 and 3, which makes the two interference vectors at every
    receiver parallel. Subcarriers where any cross link has condition number
    above CF_COND_LIMIT fall back to dominant eigenbeamformers and are
    flagged.

    Returns (v, fallback): v is (n_sc, 3, 2) unit-norm, fallback a boolean
    mask per subcarrier.
    """
    h = np.asarray(blocks, dtype=complex)
    if h.ndim == 4:
        h = h[None]
    n_sc = h.shape[0]

    cross = [(0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1)]
    cond = np.stack([np.linalg.cond(h[:, k, j]) for k, j in cross], axis=1)
    fallback = ~np.all(np.isfinite(cond) & (cond < CF_COND_LIMIT), axis=1)

    v = np.zeros((n_sc, 3, 2), dtype=complex)
    ok = ~fallback
    if np.any(ok):
        hs = h[ok]
        inv = np.linalg.inv
        e = (
            inv(hs[:, 2, 0])
            @ hs[:, 2, 1]
            @ inv(hs[:, 0, 1])
            @ hs[:, 0, 2]
            @ inv(hs[:, 1, 2])
            @ hs[:, 1, 0]
        )
        eigvals, eigvecs = np.linalg.eig(e)
        pick = np.argmax(np.abs(eigvals), axis=1)
        v1 = np.take_along_axis(eigvecs, pick[:, None, None], axis=2)[:, :, 0]
        ref = np.where(np.abs(v1[:, 0]) > 1e-12, v1[:, 0], v1[:, 1])
        v1 = v1 * np.exp(-1j * np.angle(ref))[:, None]
        v1 /= np.linalg.norm(v1, axis=1, keepdims=True)
        v2 = (inv(hs[:, 2, 1]) @ hs[:, 2, 0] @ v1[:, :, None])[:, :, 0]
        v3 = (inv(hs[:, 1, 2]) @ hs[:, 1, 0] @ v1[:, :, None])[:, :, 0]
        v2 /= np.linalg.norm(v2, axis=1, keepdims=True)
        v3 /= np.linalg.norm(v3, axis=1, keepdims=True)
        v[ok] = np.stack([v1, v2, v3], axis=1)
    if np.any(fallback):
        for k in range(3):
            w, _, _ = eigen_precoder(h[fallback, k, k], 1)
            v[fallback, k] = w[..., 0]
    return v, fallback


def comp_init(breve_big):
    """Joint-transmission start: pseudo-inverse of the eigenbeamformer rows.

    breve_big is (n_sc, 3, 2, 6), the reconstructed concatenated channel per
    user. Row k of the 3x6 stack is s_k1 * v_k1^H (dominant singular pair of
    user k's channel); the precoder matrix is its Moore-Penrose
    pseudo-inverse, computed with a relative singular-value floor so a
    rank-deficient stack degrades gracefully instead of blowing up.

    Returns (n_sc, 3, 6) un-normalized stream vectors.
    """
    big = np.asarray(breve_big, dtype=complex)
    if big.ndim == 3:
        big = big[None]
    n_sc = big.shape[0]
    a = np.zeros((n_sc, 3, 6), dtype=complex)
    for k in range(3):
        _, s, vh = np.linalg.svd(big[:, k], full_matrices=False)
        a[:, k] = s[:, 0, None] * vh[:, 0]
    w = np.linalg.pinv(a, rcond=PINV_RCOND)  # (n_sc, 6, 3)
    return np.swapaxes(w, 1, 2)


def power_normalize(vectors, scheme):
    """Enforce the per-base-station unit power budget.

    ia / fr_simo: each cell's single stream vector gets unit norm.
    tdma_mimo / fr_mimo: a cell's two streams split the budget (norm
    1/sqrt(2) each). comp: one global scale so the most loaded base station
    transmits exactly unit power.
    """
    v = np.asarray(vectors, dtype=complex)
    norms = np.linalg.norm(v, axis=-1, keepdims=True)
    if scheme in ("ia", "fr_simo"):
        if np.any(norms == 0):
            raise ValueError("cannot normalize an all-zero precoder")
        return v / norms
    if scheme in ("tdma_mimo", "fr_mimo"):
        if np.any(norms == 0):
            raise ValueError("cannot normalize an all-zero precoder")
        return v / (norms * np.sqrt(2.0))
    if scheme == "comp":
        p = np.stack(
            [np.sum(np.abs(v[..., :, 2 * b : 2 * b + 2]) ** 2, axis=(-2, -1)) for b in range(3)],
            axis=-1,
        )
        peak = np.max(p, axis=-1)
        if np.any(peak == 0):
            raise ValueError("cannot normalize an all-zero precoder")
        return v / np.sqrt(peak)[..., None, None]
    raise ValueError(f"unknown scheme {scheme!r}")


def assign_precoders_to_subcarriers(values, v_indices, n_sc):
    """Copy per-reported-subcarrier values onto the full grid.

    Each subcarrier uses the value of the nearest reported subcarrier; ties
    go to the lower index. values has the reported subcarrier as its first
    axis.
    """
    v_indices = np.asarray(v_indices)
    if v_indices.size == 0:
        raise ValueError("v_indices must be nonempty")
    dist = np.abs(np.arange(n_sc)[:, None] - v_indices[None, :])
    pick = np.argmin(dist, axis=1)  # argmin takes the first (lower) index on ties
    return np.asarray(values)[pick]


@dataclass
class MaxSinrResult:
    """Outcome of the alternating max-SINR refinement."""

    precoders: np.ndarray  # (n_sc, n_streams, d)
    combiners: np.ndarray  # (n_sc, n_streams, 2), unit norm, predicted
    predicted_sinr: np.ndarray  # (n_sc, n_streams)
    iterations: int
    converged: bool
    history: list = field(default_factory=list)


def _forward_combiners(g, owners, v, sigma_sq):
    """MMSE-style receive filters and predicted SINR/leakage per stream."""
    n_sc, _, n_streams = g.shape[:3]
    eff = np.einsum("rkiab,rib->rkia", g, v)  # (n_sc, n_rx, n_streams, 2)
    u = np.zeros((n_sc, n_streams, 2), dtype=complex)
    sinr = np.zeros((n_sc, n_streams))
    leak = np.zeros((n_sc, n_streams))
    eye2 = np.eye(2)
    for l, k in enumerate(owners):
        b = sigma_sq[:, l, None, None] * eye2
        for i in range(n_streams):
            if i == l:
                continue
            x = eff[:, k, i]
            b = b + x[:, :, None] * x.conj()[:, None, :]
        ul = np.linalg.solve(b, eff[:, k, l][..., None])[..., 0]
        nrm = np.linalg.norm(ul, axis=1, keepdims=True)
        if np.any(nrm == 0):
            raise RuntimeError("max-SINR produced a zero combiner")
        ul = ul / nrm
        u[:, l] = ul
        sig = np.abs(np.sum(ul.conj() * eff[:, k, l], axis=1)) ** 2
        intf = np.zeros(n_sc)
        for i in range(n_streams):
            if i != l:
                intf += np.abs(np.sum(ul.conj() * eff[:, k, i], axis=1)) ** 2
        leak[:, l] = intf
        sinr[:, l] = sig / (intf + sigma_sq[:, l])
    return u, sinr, leak


def max_sinr(
    g,
    owners,
    v_init,
    sigma_sq,
    scheme,
    max_iters=DEFAULT_MAX_ITERS,
    tol=DEFAULT_TOL,
    record_history=False,
):
    """Alternating max-SINR refinement of transmit and receive filters.

    g is (n_sc, n_rx, n_streams, 2, d): g[s, k, i] maps stream i's transmit
    space to receiver k under the reconstructed channels. owners maps each
    stream to its receiver. sigma_sq is the (n_sc, n_streams) regularized
    noise per stream. Each iteration computes per-stream receive filters
    from the interference-plus-noise covariance, then reverses the network
    (conjugate-transposed channels, swapped roles) to update the transmit
    filters, then re-applies the scheme's per-base-station power
    normalization. Stops when the largest filter change (chordal distance)
    drops below tol.

    Returns a MaxSinrResult; history holds one (predicted_sinr, leakage)
    pair per iteration when record_history is set, with entry 0 describing
    the initialization.
    """
    g = np.asarray(g, dtype=complex)
    n_sc, n_rx, n_streams, _, d = g.shape
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    sigma_sq = np.broadcast_to(np.asarray(sigma_sq, dtype=float), (n_sc, n_streams))

    v = power_normalize(np.asarray(v_init, dtype=complex).copy(), scheme)
    u, sinr, leak = _forward_combiners(g, owners, v, sigma_sq)
    history = [(sinr, leak)] if record_history else []

    eye_d = np.eye(d)
    converged = False
    iterations = 0
    for iterations in range(1, max_iters + 1):
        v_new = np.zeros_like(v)
        for l in range(n_streams):
            b = sigma_sq[:, l, None, None] * eye_d
            for i in range(n_streams):
                if i == l:
                    continue
                x = np.einsum("rab,ra->rb", g[:, owners[i], l].conj(), u[:, i])
                b = b + x[:, :, None] * x.conj()[:, None, :]
            rhs = np.einsum("rab,ra->rb", g[:, owners[l], l].conj(), u[:, l])
            v_new[:, l] = np.linalg.solve(b, rhs[..., None])[..., 0]
        v_new = power_normalize(v_new, scheme)
        if not np.all(np.isfinite(v_new)):
            raise RuntimeError("max-SINR iteration produced non-finite precoders")

        u_new, sinr, leak = _forward_combiners(g, owners, v_new, sigma_sq)
        if record_history:
            history.append((sinr, leak))
        delta = max(_chordal_change(v, v_new), _chordal_change(u, u_new))
        v, u = v_new, u_new
        if delta < tol:
            converged = True
            break

    return MaxSinrResult(
        precoders=v,
        combiners=u,
        predicted_sinr=sinr,
        iterations=iterations,
        converged=converged,
        history=history,
    )


def _chordal_change(a, b):
    na = np.linalg.norm(a, axis=-1)
    nb = np.linalg.norm(b, axis=-1)
    ip = np.abs(np.sum(a.conj() * b, axis=-1)) / np.maximum(na * nb, 1e-300)
    return float(np.sqrt(np.maximum(0.0, 1.0 - ip**2)).max())


def ia_gain_matrices(blocks):
    """(n_sc, 3, 3, 2, 2) blocks -> the max-SINR channel tensor for per-cell
    streams: g[s, k, i] = H_{k,i}."""
    return np.asarray(blocks, dtype=complex)


def comp_gain_matrices(breve_big):
    """(n_sc, 3, 2, 6) user channels -> max-SINR tensor for joint streams:
    every stream sees receiver k through the same 2x6 channel."""
    big = np.asarray(breve_big, dtype=complex)
    return np.repeat(big[:, :, None], 3, axis=2)
