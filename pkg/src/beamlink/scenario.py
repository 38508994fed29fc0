"""Indoor multi-cell channel generation and deployment presets.

Channels are frequency selective: every transmit/receive antenna pair of
every base-station/mobile link gets an independent tapped delay line with an
exponential power-delay profile, evaluated on the OFDM subcarrier grid.
Large-scale path gains set the carrier-to-interference operating point and
are either fixed in the config or drawn per drop from a deployment preset.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .util import crandn, db2lin

#: Fraction of the (infinite) exponential profile energy kept when truncating
#: the tap vector.
PDP_ENERGY_FRACTION = 0.999

#: Tap grid. 50 ns resolves WLAN-typical delay spreads while keeping tap
#: counts small on a 38 x 312.5 kHz band.
DEFAULT_TAP_SPACING = 50e-9

#: Delay-spread sweep used by the stock experiment configs. Implementer
#: choice: typical indoor WLAN values, no authoritative table exists for this
#: deployment.
DEFAULT_RMS_DS_SWEEP_NS = (0.0, 25.0, 50.0, 100.0, 200.0)


def _as_gain_matrix(path_gain_db):
    g = np.asarray(path_gain_db, dtype=float)
    if g.shape != (3, 3):
        raise ValueError(f"path_gain_db must be 3x3, got shape {g.shape}")
    if not np.all(np.isfinite(g)):
        raise ValueError("path_gain_db must be finite")
    return g


@dataclass
class ScenarioConfig:
    """Static description of one simulated deployment.

    path_gain_db[k][j] is the large-scale gain from base-station j to mobile
    k in dB; the diagonal carries the serving links. sigma_nominal_sq is the
    receiver noise variance (linear), assumed equal in all receiver chains
    and known system-wide. evm_db, when set, adds transmit distortion noise
    proportional to the total received power.
    """

    n_bs: int = 3
    n_ms: int = 3
    n_tx_ant: int = 2
    n_rx_ant: int = 2
    n_sc: int = 38
    subcarrier_spacing: float = 312.5e3
    rms_delay_spread: float = 50e-9
    tap_spacing: float = DEFAULT_TAP_SPACING
    path_gain_db: tuple = ((0.0, -3.2, -3.2), (-3.2, 0.0, -3.2), (-3.2, -3.2, 0.0))
    sigma_nominal_sq: float = 1e-4
    evm_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        if self.n_sc < 1:
            raise ValueError("n_sc must be >= 1")
        if self.rms_delay_spread < 0:
            raise ValueError("rms_delay_spread must be >= 0")
        if self.tap_spacing <= 0:
            raise ValueError("tap_spacing must be > 0")
        if self.sigma_nominal_sq <= 0:
            raise ValueError("sigma_nominal_sq must be > 0")
        _as_gain_matrix(self.path_gain_db)

    @property
    def path_gain(self):
        """Linear path-gain matrix."""
        return db2lin(_as_gain_matrix(self.path_gain_db))

    def with_path_gain_db(self, g):
        return replace(self, path_gain_db=tuple(map(tuple, np.asarray(g, dtype=float))))


@dataclass
class ChannelRealization:
    """Per-subcarrier 2x2 channel blocks for all mobile/base-station pairs.

    h is indexed [mobile k, base j, subcarrier s] -> 2x2 complex matrix.
    """

    h: np.ndarray  # (n_ms, n_bs, n_sc, 2, 2)

    def __post_init__(self):
        if not np.all(np.isfinite(self.h)):
            raise ValueError("channel entries must be finite")

    @property
    def n_sc(self):
        return self.h.shape[2]

    def big_h(self, k, s):
        """2x6 concatenation [H_k1, H_k2, H_k3] for mobile k at subcarrier s."""
        return np.concatenate([self.h[k, j, s] for j in range(self.h.shape[1])], axis=1)

    def big_h_all(self, k):
        """(n_sc, 2, 6) stack of big_h(k, s) over the whole band."""
        return np.concatenate([self.h[k, j] for j in range(self.h.shape[1])], axis=2)


def pdp_taps(rms_delay_spread, tap_spacing):
    """Normalized exponential power-delay profile, truncated at 99.9% energy.

    Returns the per-tap expected powers (sum exactly 1). A zero delay spread
    degenerates to a single tap.
    """
    if rms_delay_spread < 0:
        raise ValueError("rms_delay_spread must be >= 0")
    if tap_spacing <= 0:
        raise ValueError("tap_spacing must be > 0")
    if rms_delay_spread == 0:
        return np.ones(1)
    q = np.exp(-tap_spacing / rms_delay_spread)
    # smallest L with cumulative energy 1 - q^L >= PDP_ENERGY_FRACTION
    n_taps = max(1, int(np.ceil(np.log(1.0 - PDP_ENERGY_FRACTION) / np.log(q))))
    p = (1.0 - q) * q ** np.arange(n_taps)
    return p / p.sum()


def draw_taps(rms_delay_spread, tap_spacing, rng):
    """Draw one tapped-delay-line realization.

    Taps are independent zero-mean complex Gaussians weighted by the
    exponential profile, then rescaled so the realized energy sum |g_l|^2 is
    exactly 1. The per-realization normalization keeps small-scale frequency
    selectivity separate from the configured large-scale gain.
    """
    p = pdp_taps(rms_delay_spread, tap_spacing)
    g = crandn(rng, p.shape) * np.sqrt(p)
    return g / np.linalg.norm(g)


def taps_to_subcarriers(taps, tap_spacing, n_sc, spacing):
    """Frequency response H(f_s) = sum_l g_l exp(-j 2 pi f_s l T) on the grid
    f_s = s * spacing, s = 0..n_sc-1."""
    if n_sc < 1:
        raise ValueError("n_sc must be >= 1")
    taps = np.asarray(taps)
    f = np.arange(n_sc) * spacing
    phase = np.exp(-2j * np.pi * np.outer(f, np.arange(len(taps))) * tap_spacing)
    return phase @ taps


def generate_channels(config, rng=None):
    """Generate one ChannelRealization for the configured deployment.

    Each of the 9 links gets independent tap draws per antenna pair; entry
    (a, b) of h[k][j][s] is sqrt(path_gain[k][j]) * H_ab(f_s). Deterministic
    given (config, rng state); with rng omitted a fresh generator is seeded
    from config.seed.
    """
    if rng is None:
        rng = np.random.default_rng(config.seed)
    gains = config.path_gain
    p = pdp_taps(config.rms_delay_spread, config.tap_spacing)
    n_taps = len(p)
    shape = (config.n_ms, config.n_bs, config.n_rx_ant, config.n_tx_ant, n_taps)
    g = crandn(rng, shape) * np.sqrt(p)
    g /= np.linalg.norm(g, axis=-1, keepdims=True)
    f = np.arange(config.n_sc) * config.subcarrier_spacing
    phase = np.exp(-2j * np.pi * np.outer(f, np.arange(n_taps)) * config.tap_spacing)
    # (k, j, a, b, l), (s, l) -> (k, j, s, a, b)
    h = np.einsum("kjabl,sl->kjsab", g, phase)
    h *= np.sqrt(gains)[:, :, None, None, None]
    return ChannelRealization(h=h)


@dataclass(frozen=True)
class PresetParams:
    """Carrier-to-interference draw ranges for the deployment presets (dB).

    In the corridor-like (los) preset one interferer tends to be much
    stronger than the other: the smaller C/I is drawn from
    los_ci_min_range and the larger one sits los_ci_gap_range above it. In
    the between-rooms (nlos) preset both interferers draw independently from
    nlos_ci_range. The los_ci_min_range default is calibrated so the
    per-interferer C/I, averaged over an even los/nlos mixture, lands at the
    3.2 dB operating point of the dense-office deployment this simulator
    targets.
    """

    los_ci_min_range: tuple = (-11.0, -1.0)
    los_ci_gap_range: tuple = (5.0, 20.0)
    nlos_ci_range: tuple = (0.0, 12.0)


PRESET_NAMES = ("los", "nlos", "mixed")


def preset_scenario(name, rng, params=PresetParams()):
    """Draw a 3x3 path-gain matrix (dB) for a named deployment preset.

    Serving links are 0 dB; each mobile's two interferer gains are the
    negated C/I draws. "mixed" picks los or nlos with probability 1/2.
    """
    if name == "mixed":
        name = "los" if rng.uniform() < 0.5 else "nlos"
    if name not in ("los", "nlos"):
        raise ValueError(f"unknown preset {name!r}; expected one of {PRESET_NAMES}")
    g = np.zeros((3, 3))
    for k in range(3):
        others = [j for j in range(3) if j != k]
        if name == "nlos":
            ci = rng.uniform(*params.nlos_ci_range, size=2)
        else:
            lo = rng.uniform(*params.los_ci_min_range)
            ci = np.array([lo, lo + rng.uniform(*params.los_ci_gap_range)])
            ci = ci[rng.permutation(2)]
        for j, c in zip(others, ci):
            g[k, j] = -c
    return g
