"""Unit tests for zero-forcing beamforming, SINR/rate accounting, and the
sum-rate comparison harness."""

import numpy as np
import pytest

from grasspc import (
    Beamformers,
    CompositeChannel,
    RankDeficientError,
    SumRateConfig,
    SumRateResult,
    complex_gaussian,
    default_gpc_codebook,
    evaluate_sum_rate,
    per_user_sinr,
    rng_stream,
    run_sumrate_experiment,
    sum_rate,
    zf_beamformers,
)


def random_channel(users, n_t, rng):
    return CompositeChannel(complex_gaussian(rng, (users, n_t)))


# ---------------------------------------------------------------------------
# containers


def test_composite_channel_validation():
    rng = rng_stream(1)
    with pytest.raises(ValueError, match="more users"):
        CompositeChannel(complex_gaussian(rng, (5, 4)))
    with pytest.raises(ValueError, match="finite"):
        bad = complex_gaussian(rng, (2, 4))
        bad[0, 0] = np.nan
        CompositeChannel(bad)
    with pytest.raises(ValueError, match="nonzero"):
        bad = complex_gaussian(rng, (2, 4))
        bad[1] = 0.0
        CompositeChannel(bad)
    ch = random_channel(3, 4, rng)
    assert ch.users == 3 and ch.n_t == 4
    assert np.allclose(np.linalg.norm(ch.directions, axis=1), 1.0)
    assert np.allclose(ch.gains, np.linalg.norm(ch.rows, axis=1))


def test_beamformers_validation():
    rng = rng_stream(2)
    cols = complex_gaussian(rng, (4, 2))
    with pytest.raises(ValueError, match="unit norm"):
        Beamformers(cols)
    ok = Beamformers(cols / np.linalg.norm(cols, axis=0, keepdims=True))
    assert ok.users == 2


# ---------------------------------------------------------------------------
# zero forcing


def test_zf_identity_channel_gives_identity_beamformers():
    ch = CompositeChannel(np.eye(4, dtype=np.complex128))
    beams = zf_beamformers(ch)
    assert np.allclose(np.abs(beams.columns), np.eye(4), atol=1e-12)


def test_zf_nulls_cross_terms_for_random_channels():
    rng = rng_stream(3)
    for _ in range(100):
        users = int(rng.integers(2, 5))
        n_t = int(rng.integers(users, 7))
        ch = random_channel(users, n_t, rng)
        beams = zf_beamformers(ch)
        cross = np.abs(ch.rows.conj() @ beams.columns)
        off = cross[~np.eye(users, dtype=bool)]
        assert np.max(off) < 1e-9
        assert np.allclose(np.linalg.norm(beams.columns, axis=0), 1.0, atol=1e-12)


def test_zf_single_user_is_matched_filter():
    rng = rng_stream(4)
    ch = random_channel(1, 4, rng)
    beams = zf_beamformers(ch)
    aligned = np.abs(ch.directions[0].conj() @ beams.columns[:, 0])
    assert abs(aligned - 1.0) < 1e-12


def test_zf_rank_deficient_raises():
    row = complex_gaussian(rng_stream(5), (1, 4))
    stack = np.vstack([row, row])
    with pytest.raises(RankDeficientError, match="singular"):
        zf_beamformers(CompositeChannel(stack))


# ---------------------------------------------------------------------------
# SINR and rate


def test_sinr_identity_channel_pinned():
    ch = CompositeChannel(np.eye(4, dtype=np.complex128))
    beams = zf_beamformers(ch)
    sinr = per_user_sinr(ch, beams, 10.0)
    assert np.allclose(sinr, 2.5, atol=1e-12)  # (10 / 4) * 1 / (1 + 0)
    result = evaluate_sum_rate(ch, beams, 10.0)
    assert abs(result.sum_rate - 4 * np.log2(3.5)) < 1e-12
    assert abs(result.sum_rate - 7.2294) < 1e-3


def test_sinr_zero_when_beamformer_orthogonal_to_channel():
    ch = CompositeChannel(np.eye(2, dtype=np.complex128)[:1])
    beams = Beamformers(np.array([[0.0], [1.0]], dtype=np.complex128))
    sinr = per_user_sinr(ch, beams, 20.0)
    assert sinr[0] == 0.0


def test_quantized_csi_leaves_residual_interference():
    rng = rng_stream(6)
    ch = random_channel(4, 4, rng)
    perturbed = CompositeChannel(
        ch.rows + 0.05 * complex_gaussian(rng, ch.rows.shape)
    )
    beams = zf_beamformers(perturbed)  # steered by imperfect CSI
    _, signal, interference = __import__(
        "grasspc.mumimo", fromlist=["_sinr_terms"]
    )._sinr_terms(ch, beams)
    assert np.all(interference > 0.0)
    true_beams = zf_beamformers(ch)
    sinr_true = per_user_sinr(ch, true_beams, 20.0)
    sinr_quant = per_user_sinr(ch, beams, 20.0)
    assert np.all(sinr_quant <= sinr_true + 1e-9)


def test_sum_rate_pins_and_validation():
    assert sum_rate([0.0, 0.0]) == 0.0
    assert abs(sum_rate([1.0, 3.0]) - (1.0 + 2.0)) < 1e-12
    with pytest.raises(ValueError):
        sum_rate([-0.5])
    with pytest.raises(ValueError):
        sum_rate([np.inf])
    assert sum_rate([1.0, 1.0]) < sum_rate([1.0, 2.0])  # monotone


def test_sum_rate_result_consistency_enforced():
    with pytest.raises(ValueError, match="sum_rate"):
        SumRateResult(
            per_user_sinr=np.array([1.0, 1.0]),
            per_user_rate=np.array([1.0, 1.0]),
            sum_rate=3.0,
            snr_db=10.0,
        )
    with pytest.raises(ValueError, match="1-D"):
        SumRateResult(
            per_user_sinr=np.array([1.0]),
            per_user_rate=np.array([1.0, 1.0]),
            sum_rate=2.0,
            snr_db=10.0,
        )


# ---------------------------------------------------------------------------
# experiment configuration and driver


def test_sumrate_config_validation():
    with pytest.raises(ValueError, match="users"):
        SumRateConfig(n_t=4, users=5)
    with pytest.raises(ValueError, match="direction bit"):
        SumRateConfig(bits=3, magnitude_bits=3)
    with pytest.raises(ValueError, match="schemes"):
        SumRateConfig(schemes=("oracle",))
    with pytest.raises(ValueError, match="fdts"):
        SumRateConfig(fdts_grid=(0.0,))
    with pytest.raises(ValueError, match="trials"):
        SumRateConfig(trials=1)
    with pytest.raises(ValueError, match="steps"):
        SumRateConfig(steps=20, discard=20)
    assert SumRateConfig().window == 40


def test_default_gpc_codebook_split():
    config = SumRateConfig(bits=9, magnitude_bits=3)
    cb = default_gpc_codebook(config)
    assert cb.directions.size == 64
    assert cb.magnitudes.size == 8
    assert cb.n == 4
    assert cb.bits == 9


def test_run_sumrate_experiment_smoke():
    config = SumRateConfig(
        bits=6,
        magnitude_bits=2,
        snr_db_grid=(0.0, 10.0, 30.0),
        fdts_grid=(0.001, 0.04),
        trials=3,
        steps=26,
        discard=20,
    )
    rows = run_sumrate_experiment(config)
    assert len(rows) == (1 + 1 + 2) * 3  # perfect, memoryless, gpc x 2 Dopplers
    by_scheme = {}
    for row in rows:
        by_scheme.setdefault(row.scheme, []).append(row)
        assert row.trial_count == 3
        assert row.sum_rate_mean > 0.0
        assert row.sum_rate_stderr >= 0.0
    assert all(r.bits == 0 and r.fdts == 0.0 for r in by_scheme["perfect_csi"])
    assert all(r.bits == 6 and r.fdts == 0.0 for r in by_scheme["memoryless_random"])
    assert sorted({r.fdts for r in by_scheme["gpc"]}) == [0.001, 0.04]
    perfect_30 = next(
        r for r in by_scheme["perfect_csi"] if r.snr_db == 30.0
    ).sum_rate_mean
    memoryless_30 = next(
        r for r in by_scheme["memoryless_random"] if r.snr_db == 30.0
    ).sum_rate_mean
    assert perfect_30 > memoryless_30  # quantized CSI is interference limited
    again = run_sumrate_experiment(config)
    assert again == rows  # bit-for-bit deterministic


def test_run_sumrate_rejects_mismatched_codebook():
    from grasspc import ShapeGainCodebook, best_packing, uniform_magnitude

    config = SumRateConfig(
        n_t=4,
        bits=6,
        magnitude_bits=2,
        snr_db_grid=(10.0,),
        trials=2,
        steps=24,
        discard=20,
    )
    wrong = ShapeGainCodebook(best_packing(3, 16), uniform_magnitude(4))
    with pytest.raises(ValueError, match="n_t"):
        run_sumrate_experiment(config, wrong)
