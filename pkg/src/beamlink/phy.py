"""Receiver-side evaluation under the true channels.

The simulator composes precoders with the true (not fed-back) channels,
estimates the effective per-stream channels from one precoded pilot symbol
each, forms MMSE combiners from the structured covariance of those
estimates, and evaluates the exact post-combining SINR including residual
interference and (optionally) transmit distortion. Distortion is opaque to
the receiver: the combiner only ever knows sigma_nominal.
"""

from dataclasses import dataclass

import numpy as np

from .util import crandn


@dataclass
class StreamLayout:
    """Which streams exist and who transmits/receives them.

    tx is (n_sc, n_streams, d); owner_rx maps stream -> receiving mobile;
    owner_bs maps stream -> transmitting base (None: all six antennas
    jointly). Stream powers ride in the vector norms.
    """

    tx: np.ndarray
    owner_rx: tuple
    owner_bs: tuple | None


def effective_channels(channels, layout):
    """Effective vector of every stream at every receiver, per subcarrier.

    Returns (n_rx, n_streams, n_sc, 2): entry [k, i, s] is H_{k, bs(i)} v_i
    (or big_H_k w_i for joint transmission) under the true channels.
    """
    h = channels.h
    n_rx = h.shape[0]
    n_streams = layout.tx.shape[1]
    n_sc = h.shape[2]
    eff = np.zeros((n_rx, n_streams, n_sc, 2), dtype=complex)
    for k in range(n_rx):
        if layout.owner_bs is None:
            big = channels.big_h_all(k)  # (n_sc, 2, 6)
            for i in range(n_streams):
                eff[k, i] = np.einsum("sab,sb->sa", big, layout.tx[:, i])
        else:
            for i in range(n_streams):
                eff[k, i] = np.einsum("sab,sb->sa", h[k, layout.owner_bs[i]], layout.tx[:, i])
    return eff


def pilot_estimate(eff, sigma_nominal_sq, rng=None, noiseless=False, noise=None):
    """Single-pilot estimates of the effective vectors.

    Each stream sends one known precoded pilot symbol, so the estimate is
    the true effective vector plus complex Gaussian error of variance
    sigma_nominal_sq per receive antenna, independently per subcarrier (no
    frequency averaging). A pre-drawn unit-variance noise array may be
    passed to share one pilot realization across runs.
    """
    eff = np.asarray(eff)
    if noiseless:
        return eff.copy()
    if noise is None:
        if rng is None:
            raise ValueError("need rng or pre-drawn noise")
        noise = crandn(rng, eff.shape)
    return eff + np.sqrt(sigma_nominal_sq) * noise


def mmse_combiner(est, owners, sigma_nominal_sq):
    """Per-stream MMSE receive filters from estimated effective channels.

    est is (n_rx, n_streams, n_sc, 2). The covariance at each receiver is
    the structured form sum_i h_i h_i^H + sigma^2 I built from the
    estimates of every stream present, and u_i = R^-1 h_i at the owner.
    The filters are scale-free; they are not normalized here.
    """
    est = np.asarray(est)
    n_rx, n_streams, n_sc, _ = est.shape
    eye2 = np.eye(2)
    r = sigma_nominal_sq * np.broadcast_to(eye2, (n_rx, n_sc, 2, 2)).copy()
    r = r + np.einsum("knsa,knsb->ksab", est, est.conj())
    u = np.zeros((n_streams, n_sc, 2), dtype=complex)
    for i, k in enumerate(owners):
        u[i] = np.linalg.solve(r[k], est[k, i][..., None])[..., 0]
    return u


def distortion_noise(evm_db, eff):
    """Added noise variance per receiver from transmit-chain distortion.

    Proportional to the total received signal power from all transmitters:
    10^(evm_db/10) * sum_i ||h_eff_i||^2 per subcarrier. None means no
    distortion. Returns (n_rx, n_sc).
    """
    eff = np.asarray(eff)
    n_rx, _, n_sc, _ = eff.shape
    if evm_db is None:
        return np.zeros((n_rx, n_sc))
    total = np.sum(np.abs(eff) ** 2, axis=(1, 3))
    return 10.0 ** (evm_db / 10.0) * total


def post_sinr(u, eff, owners, sigma_nominal_sq, distortion=None):
    """Exact post-combining SINR per stream per subcarrier.

    SINR_i = |u^H h_i|^2 / (sum_j!=i |u^H h_j|^2 + (sigma^2 + D_k) ||u||^2)
    evaluated at stream i's owner k under the true effective vectors.
    Invariant to rescaling of u.
    """
    eff = np.asarray(eff)
    u = np.asarray(u)
    n_streams = len(owners)
    n_sc = eff.shape[2]
    if distortion is None:
        distortion = np.zeros((eff.shape[0], n_sc))
    sinr = np.zeros((n_streams, n_sc))
    for i, k in enumerate(owners):
        gains = np.abs(np.einsum("sa,nsa->ns", u[i].conj(), eff[k])) ** 2
        sig = gains[i]
        intf = gains.sum(axis=0) - sig
        noise = (sigma_nominal_sq + distortion[k]) * np.sum(np.abs(u[i]) ** 2, axis=1)
        denom = intf + noise
        # a zero combiner receives nothing; keep the SINR finite (zero)
        sinr[i] = np.divide(sig, denom, out=np.zeros_like(sig), where=denom > 0)
    return sinr


def evaluate_streams(channels, layout, sigma_nominal_sq, evm_db=None, rng=None,
                     noiseless_pilots=False, pilot_noise=None):
    """Full receiver chain for one stream layout.

    Composes effective channels, pilot estimation, MMSE combining and SINR
    evaluation. Returns (sinr, eff): sinr is (n_streams, n_sc).
    """
    eff = effective_channels(channels, layout)
    est = pilot_estimate(eff, sigma_nominal_sq, rng=rng, noiseless=noiseless_pilots,
                         noise=pilot_noise)
    u = mmse_combiner(est, layout.owner_rx, sigma_nominal_sq)
    dist = distortion_noise(evm_db, eff)
    return post_sinr(u, eff, layout.owner_rx, sigma_nominal_sq, dist), eff
