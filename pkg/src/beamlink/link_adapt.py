"""Adaptive modulation and coding: SINR profiles to throughput.

A ten-entry gearbox of QAM/LDPC combinations is probed per stream; the
selection metric is the mean spectral efficiency over the band with a
configurable dB gap to capacity (a near-minimum SINR rule is available as
an alternative). Throughput is counted in bits/symbol/subcarrier.
"""

from dataclasses import dataclass

import numpy as np

#: (modulation, code rate, bits/symbol/subcarrier). The gearbox combines
#: QPSK/16QAM/64QAM/256QAM with rates 1/2, 5/8, 3/4; the two low-rate
#: high-order combos are dropped so the ten efficiencies stay strictly
#: increasing and distinct.
DEFAULT_COMBOS = (
    ("qpsk", "1/2", 1.0),
    ("qpsk", "5/8", 1.25),
    ("qpsk", "3/4", 1.5),
    ("16qam", "1/2", 2.0),
    ("16qam", "5/8", 2.5),
    ("16qam", "3/4", 3.0),
    ("64qam", "5/8", 3.75),
    ("64qam", "3/4", 4.5),
    ("256qam", "5/8", 5.0),
    ("256qam", "3/4", 6.0),
)

DEFAULT_GAP_DB = 3.5
SELECTION_RULES = ("mean_capacity", "min_sinr")

#: Slack for "SINR exactly at threshold" comparisons; guards the <= against
#: round-off in the dB/linear conversions, far below any efficiency step.
_RATE_EPS = 1e-9

OUTAGE = None

DUTY_FACTOR = {"ia": 1.0, "comp": 1.0, "tdma_mimo": 1.0 / 3.0, "fr_mimo": 1.0, "fr_simo": 1.0}

MAX_SUM_TPUT = {"ia": 18.0, "comp": 18.0, "tdma_mimo": 12.0, "fr_mimo": 36.0, "fr_simo": 18.0}


@dataclass(frozen=True)
class McsEntry:
    modulation: str
    code_rate: str
    efficiency: float
    snr_threshold_db: float


@dataclass(frozen=True)
class McsTable:
    entries: tuple
    gap_db: float
    rule: str = "mean_capacity"

    def __post_init__(self):
        if len(self.entries) != 10:
            raise ValueError("the gearbox has exactly 10 entries")
        effs = [e.efficiency for e in self.entries]
        thr = [e.snr_threshold_db for e in self.entries]
        if not all(a < b for a, b in zip(effs, effs[1:])):
            raise ValueError("efficiencies must be strictly increasing")
        if not all(a < b for a, b in zip(thr, thr[1:])):
            raise ValueError("thresholds must be strictly increasing")
        if self.rule not in SELECTION_RULES:
            raise ValueError(f"rule must be one of {SELECTION_RULES}")

    @property
    def efficiencies(self):
        return np.array([e.efficiency for e in self.entries])


def shannon_threshold_db(efficiency, gap_db):
    """SNR (dB) where capacity equals the entry's rate, plus the gap."""
    return 10.0 * np.log10(2.0**efficiency - 1.0) + gap_db


def default_mcs_table(gap_db=DEFAULT_GAP_DB, rule="mean_capacity"):
    """The standard gearbox with thresholds a fixed gap from capacity."""
    if gap_db < 0:
        raise ValueError("gap_db must be >= 0")
    entries = tuple(
        McsEntry(mod, rate, eff, shannon_threshold_db(eff, gap_db))
        for mod, rate, eff in DEFAULT_COMBOS
    )
    return McsTable(entries=entries, gap_db=gap_db, rule=rule)


def table_from_spec(rows, gap_db=DEFAULT_GAP_DB, rule="mean_capacity"):
    """Build a table from (modulation, code_rate, efficiency, threshold_db)
    rows, e.g. parsed from a config file."""
    entries = tuple(McsEntry(str(m), str(r), float(e), float(t)) for m, r, e, t in rows)
    return McsTable(entries=entries, gap_db=gap_db, rule=rule)


def effective_rate(sinr, table):
    """Spectral efficiency supported by a SINR profile under the table's
    selection rule (gap-degraded capacity, mean or minimum over the band)."""
    sinr = np.asarray(sinr, dtype=float)
    if sinr.size == 0:
        raise ValueError("empty SINR vector")
    gamma = 10.0 ** (table.gap_db / 10.0)
    if table.rule == "mean_capacity":
        return float(np.mean(np.log2(1.0 + sinr / gamma)))
    return float(np.log2(1.0 + sinr.min() / gamma))


def select_mcs(sinr, table):
    """Highest gearbox index whose efficiency the SINR profile supports,
    or OUTAGE (None) when even the lowest entry does not fit."""
    rate = effective_rate(sinr, table)
    effs = table.efficiencies
    ok = np.nonzero(effs <= rate + _RATE_EPS)[0]
    if ok.size == 0:
        return OUTAGE
    return int(ok[-1])


@dataclass
class SchemeResult:
    """Throughput of one scheme in one drop at one feedback setting."""

    scheme: str
    mcs_indices: tuple  # per stream; None marks outage
    sum_throughput: float
    duty_factor: float
    n_g: int = 0
    quantized: bool = True


def scheme_throughput(selections, scheme, table, n_g=0, quantized=True):
    """Aggregate per-stream selections into bits/symbol/subcarrier.

    Time sharing only for tdma_mimo (each cell active a third of the time,
    its six stream selections already evaluated with the other cells
    silent); outage streams contribute zero.
    """
    if scheme not in DUTY_FACTOR:
        raise ValueError(f"unknown scheme {scheme!r}")
    duty = DUTY_FACTOR[scheme]
    effs = table.efficiencies
    total = sum(0.0 if s is OUTAGE else float(effs[s]) for s in selections)
    return SchemeResult(
        scheme=scheme,
        mcs_indices=tuple(selections),
        sum_throughput=duty * total,
        duty_factor=duty,
        n_g=n_g,
        quantized=quantized,
    )
