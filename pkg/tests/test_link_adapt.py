import numpy as np
import pytest

from beamlink import link_adapt as la


def test_default_table_shape_and_efficiencies():
    t = la.default_mcs_table()
    assert [e.efficiency for e in t.entries] == [1, 1.25, 1.5, 2, 2.5, 3, 3.75, 4.5, 5, 6]
    mods = {e.modulation for e in t.entries}
    assert mods == {"qpsk", "16qam", "64qam", "256qam"}
    rates = {e.code_rate for e in t.entries}
    assert rates == {"1/2", "5/8", "3/4"}


def test_threshold_arithmetic():
    t = la.default_mcs_table(gap_db=3.5)
    # rate 1: capacity threshold 0 dB plus the gap
    assert t.entries[0].snr_threshold_db == pytest.approx(3.5)
    # rate 6: 10 log10(63) + 3.5 ~= 21.49 dB, inside the 2..22 dB band
    assert t.entries[-1].snr_threshold_db == pytest.approx(10 * np.log10(63) + 3.5, abs=1e-9)
    assert 2.0 < t.entries[-1].snr_threshold_db < 22.0


def test_zero_gap_gives_shannon_limits():
    t = la.default_mcs_table(gap_db=0.0)
    for e in t.entries:
        assert e.snr_threshold_db == pytest.approx(10 * np.log10(2**e.efficiency - 1))


def test_flat_sinr_at_threshold_selects_that_mcs():
    t = la.default_mcs_table(gap_db=3.5)
    for idx, e in enumerate(t.entries):
        sinr = np.full(38, 10 ** (e.snr_threshold_db / 10))
        assert la.select_mcs(sinr, t) == idx


def test_huge_sinr_selects_top():
    t = la.default_mcs_table()
    assert la.select_mcs(np.full(38, 1e30), t) == 9


def test_low_sinr_is_outage():
    t = la.default_mcs_table()
    assert la.select_mcs(np.full(38, 1e-6), t) is la.OUTAGE


def test_mixed_band_matches_capacity_mean_oracle():
    t = la.default_mcs_table(gap_db=3.5)
    sinr = np.concatenate([np.full(19, 1e3), np.full(19, 0.1)])
    gamma = 10 ** 0.35
    oracle = np.mean([np.log2(1 + s / gamma) for s in sinr])
    effs = t.efficiencies
    expect = effs[effs <= oracle][-1] if np.any(effs <= oracle) else None
    got = la.select_mcs(sinr, t)
    assert t.entries[got].efficiency == expect


def test_select_mcs_monotone():
    t = la.default_mcs_table()
    rng = np.random.default_rng(0)
    for _ in range(200):
        sinr = 10 ** rng.uniform(-1, 3, 38)
        bigger = sinr * 10 ** rng.uniform(0.0, 1.0, 38)
        a = la.select_mcs(sinr, t)
        b = la.select_mcs(bigger, t)
        if a is not la.OUTAGE:
            assert b is not la.OUTAGE and b >= a


def test_min_sinr_rule():
    t = la.default_mcs_table(gap_db=3.5, rule="min_sinr")
    sinr = np.concatenate([np.full(37, 1e4), [10 ** 0.35]])  # min at rate-1 threshold
    assert la.select_mcs(sinr, t) == 0


def test_scheme_throughput_arithmetic():
    t = la.default_mcs_table()
    top = (9, 9, 9)
    assert la.scheme_throughput(top, "ia", t).sum_throughput == pytest.approx(18.0)
    six_top = (9,) * 6
    r = la.scheme_throughput(six_top, "tdma_mimo", t)
    assert r.sum_throughput == pytest.approx(12.0)
    assert r.duty_factor == pytest.approx(1 / 3)
    r = la.scheme_throughput((9, la.OUTAGE, 9), "comp", t)
    assert r.sum_throughput == pytest.approx(12.0)


def test_throughput_bounds():
    t = la.default_mcs_table()
    assert la.scheme_throughput((9,) * 3, "ia", t).sum_throughput <= la.MAX_SUM_TPUT["ia"]
    assert la.scheme_throughput((9,) * 6, "fr_mimo", t).sum_throughput <= la.MAX_SUM_TPUT["fr_mimo"]
    assert la.scheme_throughput((9,) * 6, "tdma_mimo", t).sum_throughput <= la.MAX_SUM_TPUT["tdma_mimo"]


def test_table_validation():
    t = la.default_mcs_table()
    rows = [(e.modulation, e.code_rate, e.efficiency, e.snr_threshold_db) for e in t.entries]
    t2 = la.table_from_spec(rows, gap_db=t.gap_db)
    assert t2.efficiencies.tolist() == t.efficiencies.tolist()
    bad = list(rows)
    bad[3] = ("16qam", "1/2", 0.5, 4.0)  # breaks monotonicity
    with pytest.raises(ValueError):
        la.table_from_spec(bad)
    with pytest.raises(ValueError):
        la.table_from_spec(rows[:9])
    with pytest.raises(ValueError):
        la.default_mcs_table(rule="bler")


def test_gap_in_band_keeps_thresholds_near_shannon():
    for gap in (2.0, 3.5, 5.0):
        t = la.default_mcs_table(gap_db=gap)
        for e in t.entries:
            shannon = 10 * np.log10(2**e.efficiency - 1)
            assert e.snr_threshold_db - shannon == pytest.approx(gap)
