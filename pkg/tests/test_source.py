import logging

import numpy as np
import pytest

from homsim.source import (LONG, SHORT, PhotonInstance, SourceConfig,
                           assemble_pairs, photon_block, route_pbs,
                           sample_trial)
from homsim.streams import FieldStreams


def collect_photons(cfg, streams, n_trials):
    out = []
    for trial in range(n_trials):
        for p in sample_trial(cfg, streams, trial):
            out.append(route_pbs(p, streams))
    return out


def test_certain_click_yields_one_photon():
    cfg = SourceConfig(p_click=1.0, p_two_photon=0.0)
    streams = FieldStreams(7)
    for trial in (0, 5, 123):
        photons = sample_trial(cfg, streams, trial)
        assert len(photons) == 1
        assert photons[0].trial == trial and not photons[0].extra
        assert photons[0].width_scale == 1.0
        assert photons[0].detuning_mhz == 0.0


def test_no_click_yields_empty():
    cfg = SourceConfig(p_click=0.0)
    streams = FieldStreams(7)
    assert all(sample_trial(cfg, streams, t) == [] for t in range(200))


def test_click_counts_binomial():
    cfg = SourceConfig(p_click=0.07)
    streams = FieldStreams(11)
    n = 1_000_000
    block = photon_block(cfg, streams, 0, n)
    count = block["trial"].size
    sigma = np.sqrt(n * 0.07 * 0.93)
    assert abs(count - n * 0.07) < 3 * sigma


def test_two_photon_trials_flag_extras():
    cfg = SourceConfig(p_click=0.5, p_two_photon=0.2)
    streams = FieldStreams(3)
    seen_two = 0
    for trial in range(500):
        photons = sample_trial(cfg, streams, trial)
        if len(photons) == 2:
            seen_two += 1
            assert not photons[0].extra and photons[1].extra
    assert abs(seen_two - 100) < 3 * np.sqrt(500 * 0.2 * 0.8)


def test_sample_trial_reproducible():
    cfg = SourceConfig(p_click=1.0, sigma_nu_mhz=2.0, gamma_nu_mhz=0.5,
                       amp_jitter=0.1)
    a = sample_trial(cfg, FieldStreams(42), trial=17)
    b = sample_trial(cfg, FieldStreams(42), trial=17)
    assert a == b
    c = sample_trial(cfg, FieldStreams(43), trial=17)
    assert a != c


def test_routing_balance_and_delay():
    cfg = SourceConfig(p_click=1.0)
    streams = FieldStreams(5)
    n = 100_000
    block = photon_block(cfg, streams, 0, n)
    short_frac = block["short_path"].mean()
    assert abs(short_frac - 0.5) < 3 * np.sqrt(0.25 / n)
    # delay path shifts the arrival slot by exactly one period
    longs = ~block["short_path"]
    assert np.array_equal(block["slot"][longs], block["trial"][longs] + 1)
    assert np.array_equal(block["slot"][~longs], block["trial"][~longs])


def test_assemble_pairs_groupings():
    def ph(trial, path, index=0):
        return PhotonInstance(trial=trial, index=index, width_scale=1.0,
                              detuning_mhz=0.0, path=path, extra=index == 1)

    # long(i) meets short(i+1) in slot i+1
    groups = assemble_pairs([ph(0, LONG), ph(1, SHORT)])
    assert len(groups) == 1 and len(groups[0]) == 2

    # short, then next-trial short: two singletons one period apart
    groups = assemble_pairs([ph(0, SHORT), ph(1, SHORT)])
    assert [len(g) for g in groups] == [1, 1]
    assert groups[0][0].slot + 1 == groups[1][0].slot

    # short(i) + long(i+1): slots i and i+2, non-interfering
    groups = assemble_pairs([ph(0, SHORT), ph(1, LONG)])
    assert [g[0].slot for g in groups] == [0, 2]


def test_assemble_pairs_truncates_overfull_slot(caplog):
    def ph(trial, path, index=0):
        return PhotonInstance(trial=trial, index=index, width_scale=1.0,
                              detuning_mhz=0.0, path=path, extra=index == 1)

    stream = [ph(0, LONG), ph(0, LONG, index=1), ph(1, SHORT)]
    with caplog.at_level(logging.WARNING):
        groups = assemble_pairs(stream)
    assert len(groups) == 1 and len(groups[0]) == 2
    assert "truncated" in caplog.text


def test_assemble_pairs_requires_order():
    def ph(trial):
        return PhotonInstance(trial=trial, index=0, width_scale=1.0,
                              detuning_mhz=0.0, path=SHORT)

    with pytest.raises(ValueError):
        assemble_pairs([ph(3), ph(1)])


def test_pairing_probability_quarter():
    # adjacent photon pairs meet at the splitter with probability 1/4
    cfg = SourceConfig(p_click=1.0)
    streams = FieldStreams(9)
    n = 200_000
    block = photon_block(cfg, streams, 0, n)
    slot = np.sort(block["slot"], kind="stable")
    pairs = np.count_nonzero(slot[1:] == slot[:-1])
    assert abs(pairs / (n - 1) - 0.25) < 3 * np.sqrt(0.25 * 0.75 / n)


def test_block_matches_per_trial_ops():
    cfg = SourceConfig(p_click=0.3, p_two_photon=0.05, sigma_nu_mhz=1.5,
                       gamma_nu_mhz=0.4, amp_jitter=0.2)
    streams = FieldStreams(1234)
    n = 2000
    loop = collect_photons(cfg, streams, n)
    block = photon_block(cfg, streams, 0, n)
    assert len(loop) == block["trial"].size
    for k, p in enumerate(loop):
        assert p.trial == block["trial"][k]
        assert p.index == block["index"][k]
        assert p.extra == bool(block["extra"][k])
        assert (p.path == SHORT) == bool(block["short_path"][k])
        assert p.slot == block["slot"][k]
        assert p.width_scale == pytest.approx(block["width_scale"][k], abs=0)
        assert p.detuning_mhz == pytest.approx(block["detuning_mhz"][k], abs=0)


def test_block_chunking_invariance():
    cfg = SourceConfig(p_click=0.3, p_two_photon=0.02, sigma_nu_mhz=1.0,
                       gamma_nu_mhz=0.2, amp_jitter=0.15)
    streams = FieldStreams(99)
    whole = photon_block(cfg, streams, 0, 5000)
    parts = [photon_block(cfg, streams, lo, min(lo + 777, 5000))
             for lo in range(0, 5000, 777)]
    merged = {k: np.concatenate([p[k] for p in parts]) for k in whole}
    for k in whole:
        assert np.array_equal(whole[k], merged[k]), k


def test_config_validation():
    with pytest.raises(ValueError):
        SourceConfig(p_click=1.2)
    with pytest.raises(ValueError):
        SourceConfig(p_click=0.05, p_two_photon=0.07)
    with pytest.raises(ValueError):
        SourceConfig(sigma_nu_mhz=-1.0)
    with pytest.raises(ValueError):
        SourceConfig(mode_overlap=1.01)
    cfg = SourceConfig()
    assert cfg.rep_period_ns == pytest.approx(1e6 / 740.0)
