import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tdnn_enhance import dsp
from tdnn_enhance.datagen import mix_at_snr, synth_noise, synth_speechlike
from tdnn_enhance.errors import InvalidArgument, SignalTooShort
from tdnn_enhance.metrics import (
    SDR_CAP_DB,
    ScoreRow,
    aggregate,
    format_aggregate,
    format_scores,
    resample,
    sdr,
    stoi,
    third_octave_bands,
)


@pytest.fixture(scope="module")
def speech():
    return synth_speechlike(8.0, 21)


def noise_at(ref, snr_db, seed):
    """Noise with ||n||^2 = ||x||^2 * 10^(-snr/10) exactly (up to rounding)."""
    n = np.random.default_rng(seed).standard_normal(len(ref))
    x = ref.samples
    return n * np.sqrt(np.sum(x**2) * 10 ** (-snr_db / 10) / np.sum(n**2))


def test_sdr_identity_is_capped(speech):
    assert sdr(speech, speech) == SDR_CAP_DB


def test_sdr_equal_power_noise_is_zero(speech):
    est = speech.samples + noise_at(speech, 0.0, 1)
    assert abs(sdr(speech, est)) < 1e-9


def test_sdr_zero_estimate_is_zero_db(speech):
    assert sdr(speech, np.zeros(len(speech))) == 0.0


def test_sdr_errors(speech):
    with pytest.raises(InvalidArgument):
        sdr(np.zeros(10), np.ones(10))
    with pytest.raises(InvalidArgument):
        sdr(np.ones(10), np.ones(11))


@pytest.mark.parametrize("snr", [-5, 0, 5, 10, 15, 20, 37.5])
def test_sdr_matches_constructed_snr(speech, snr):
    assert abs(sdr(speech, speech.samples + noise_at(speech, snr, 2)) - snr) < 1e-9


def test_sdr_decreases_along_noise_ladder(speech):
    base = noise_at(speech, 0.0, 3)
    values = [sdr(speech, speech.samples + g * base) for g in (0.1, 0.3, 1.0, 3.0)]
    assert all(a > b for a, b in zip(values, values[1:]))


def test_stoi_identity_is_one(speech):
    assert stoi(speech, speech) == 1.0


@pytest.mark.parametrize("scale", [0.01, 0.5, 3.7])
def test_stoi_scale_invariant(speech, scale):
    assert stoi(speech, dsp.Waveform(scale * speech.samples)) == pytest.approx(1.0, abs=1e-9)
    noisy, _ = mix_at_snr(speech, synth_noise("pink", 8.0, 4), 0.0, 5)
    ref = stoi(speech, noisy)
    assert stoi(speech, dsp.Waveform(scale * noisy.samples)) == pytest.approx(ref, abs=1e-9)
    assert stoi(dsp.Waveform(scale * speech.samples), noisy) == pytest.approx(ref, abs=1e-9)


def test_stoi_white_noise_estimate_is_low(speech):
    noise = synth_noise("white", 8.0, 22)
    assert stoi(speech, noise) < 0.35


def test_stoi_monotone_in_snr(speech):
    noise = synth_noise("pink", 10.0, 6)
    values = [stoi(speech, mix_at_snr(speech, noise, s, 7)[0]) for s in (-5, 0, 5, 10, 20)]
    assert all(a < b for a, b in zip(values, values[1:]))


def test_stoi_agrees_with_reference_package_at_10k(speech):
    pystoi = pytest.importorskip("pystoi")
    noise = synth_noise("babble", 8.0, 8)
    for snr in (-5, 5, 15):
        noisy, _ = mix_at_snr(speech, noise, snr, 9)
        # treat the samples as 10 kHz audio so neither side resamples
        ours = stoi(speech.samples, noisy.samples, sample_rate=10000)
        theirs = pystoi.stoi(speech.samples, noisy.samples, 10000)
        assert ours == pytest.approx(theirs, abs=1e-6)


def test_stoi_at_8k_matches_reference_after_our_resampler(speech):
    # the resampling filters differ by design, so resample on our side and
    # hand 10 kHz audio to the reference
    pystoi = pytest.importorskip("pystoi")
    noise = synth_noise("pink", 8.0, 8)
    for snr in (-5, 5, 15):
        noisy, _ = mix_at_snr(speech, noise, snr, 9)
        x10 = resample(speech.samples, 8000, 10000)
        y10 = resample(noisy.samples, 8000, 10000)
        assert stoi(speech, noisy) == pytest.approx(pystoi.stoi(x10, y10, 10000), abs=1e-6)


def test_stoi_too_short():
    x = synth_speechlike(0.2, 1)
    with pytest.raises(SignalTooShort):
        stoi(x, x)


def test_stoi_rejects_other_rates():
    with pytest.raises(InvalidArgument):
        stoi(np.ones(16000), np.ones(16000), sample_rate=16000)


def test_third_octave_bands_shape():
    obm = third_octave_bands()
    assert obm.shape == (15, 257)
    assert np.all(obm.sum(axis=1) >= 1)
    # centre of the top band is 150 * 2^(14/3) ~ 3.8 kHz
    assert np.flatnonzero(obm[-1]).max() * 10000 / 512 < 4400


def test_resample_preserves_tone():
    t = np.arange(8000) / 8000
    y = resample(np.sin(2 * np.pi * 1000 * t), 8000, 10000)
    assert len(y) == 10000
    ref = np.sin(2 * np.pi * 1000 * np.arange(10000) / 10000)
    assert np.max(np.abs(y[200:-200] - ref[200:-200])) < 1e-2


def rows():
    out = []
    for i, (snr, seen) in enumerate(itertools.product([-5, 0, 5, 10, 15, 20], [True, False])):
        out.append(ScoreRow(f"u{i:02d}", float(snr), seen, 0.5 + 0.02 * i, 2.0 * i))
    return out


def test_aggregate_single_row():
    r = ScoreRow("a", 5.0, True, 0.7, 12.0)
    (g,) = aggregate([r])
    assert (g.stoi, g.sdr, g.count) == (0.7, 12.0, 1)


def test_aggregate_two_rows_overall():
    (g,) = aggregate([ScoreRow("a", 0.0, True, 0.5, 10.0), ScoreRow("b", 5.0, False, 0.5, 20.0)])
    assert g.sdr == 15.0 and g.count == 2


def test_aggregate_groupings():
    by_snr = aggregate(rows(), "by_snr")
    assert [g.key for g in by_snr] == ["-5dB", "0dB", "5dB", "10dB", "15dB", "20dB"]
    assert all(g.count == 2 for g in by_snr)
    by_seen = aggregate(rows(), "by_seen_unseen")
    assert [g.key for g in by_seen] == ["seen", "unseen"]


@settings(max_examples=20)
@given(st.permutations(range(12)))
def test_aggregate_permutation_invariant(perm):
    base = rows()
    shuffled = [base[i] for i in perm]
    for grouping in ("by_snr", "by_seen_unseen", "overall"):
        assert aggregate(shuffled, grouping) == aggregate(base, grouping)


def test_aggregate_errors():
    with pytest.raises(InvalidArgument):
        aggregate([])
    with pytest.raises(InvalidArgument):
        aggregate(rows(), "by_speaker")


def test_score_row_bounds():
    with pytest.raises(InvalidArgument):
        ScoreRow("a", 0.0, True, 1.5, 0.0)


def test_table_formats():
    text = format_scores(rows())
    assert "sdr:plain" in text and "pesq: unsupported" in text
    assert len(text.splitlines()) == 2 + 12
    agg = format_aggregate(aggregate(rows(), "by_snr"), "by_snr")
    assert agg.splitlines()[1] == "group\tstoi\tsdr\tpesq\tcount"
