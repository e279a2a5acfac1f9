"""Unit tests for the predictive encoder/decoder: quantization, state
management, symmetry, initialization, and index-stream serialization."""

import numpy as np
import pytest

from grasspc import (
    Ar1Params,
    Ar2Params,
    CodewordIndex,
    CutLocusError,
    EncodeResult,
    GpcState,
    GrassmannPoint,
    ShapeGainCodebook,
    TrackingLostError,
    best_packing,
    chordal_distance,
    decode_trace,
    direction_only_quantizer,
    encode_step,
    encode_trace,
    exact_quantizer,
    exp_map,
    gen_ar1,
    gen_ar2,
    initialize,
    log_map,
    memoryless_quantize,
    predict_one_step,
    quantize_tangent,
    random_point,
    read_index_stream,
    reconstruct_codeword,
    rng_stream,
    uniform_magnitude,
    write_index_stream,
)


def small_codebook(n=4, n_d=8, n_m=4, hi=0.6, seed=0):
    return ShapeGainCodebook(
        best_packing(n, n_d, seed=seed, draws=1000), uniform_magnitude(n_m, 0.0, hi)
    )


def basis(n, k):
    return GrassmannPoint(np.eye(n, dtype=np.complex128)[k])


# ---------------------------------------------------------------------------
# indices and state


def test_codeword_index_serialization_round_trip():
    for d in range(4):
        for m in range(8):
            idx = CodewordIndex(d, m)
            assert CodewordIndex.deserialize(idx.serialize(8), 8) == idx
    assert CodewordIndex(3, 5).serialize(8) == 29


def test_codeword_index_validation():
    with pytest.raises(ValueError):
        CodewordIndex(-1, 0)
    with pytest.raises(ValueError):
        CodewordIndex(0, 3).serialize(2)
    with pytest.raises(ValueError):
        CodewordIndex.deserialize(-4, 8)


def test_state_validation():
    x = basis(3, 0)
    with pytest.raises(ValueError, match="time"):
        GpcState(x, x, x, 1)
    with pytest.raises(ValueError, match="dimension"):
        GpcState(x, x, basis(4, 0), 2)


# ---------------------------------------------------------------------------
# quantizers


def test_memoryless_quantize_is_nearest_codeword():
    cb = best_packing(4, 32, draws=1000)
    rng = rng_stream(1)
    for _ in range(50):
        x = random_point(4, rng)
        idx, point = memoryless_quantize(x, cb)
        d = chordal_distance(x, point)
        others = [
            chordal_distance(x, GrassmannPoint.from_vector(row)) for row in cb.entries
        ]
        assert d <= min(others) + 1e-12
    row = GrassmannPoint.from_vector(cb.entries[5])
    idx, point = memoryless_quantize(row, cb)
    assert idx == 5 and chordal_distance(row, point) < 1e-12


def test_quantize_tangent_matches_exhaustive_search():
    # Oracle: reconstruct every codeword, walk the geodesic, take the
    # chordal-nearest endpoint scanning in serialized order.
    rng = rng_stream(2)
    cb = small_codebook()
    for _ in range(100):
        predicted = random_point(4, rng)
        observed = random_point(4, rng)
        if abs(np.vdot(predicted.coords, observed.coords)) < 0.05:
            continue
        fast = quantize_tangent(predicted, observed, cb)
        best = None
        best_d = np.inf
        for d in range(cb.directions.size):
            for m in range(cb.magnitudes.size):
                idx = CodewordIndex(d, m)
                endpoint = exp_map(
                    predicted, reconstruct_codeword(idx, predicted, cb)
                )
                dist = chordal_distance(endpoint, observed)
                if dist < best_d:
                    best, best_d = idx, dist
        fast_d = chordal_distance(
            exp_map(predicted, reconstruct_codeword(fast, predicted, cb)), observed
        )
        assert fast == best or abs(fast_d - best_d) <= 1e-12


def test_quantize_tangent_recovers_exact_codeword():
    rng = rng_stream(3)
    cb = small_codebook()
    predicted = random_point(4, rng)
    idx = CodewordIndex(3, 2)
    observed = exp_map(predicted, reconstruct_codeword(idx, predicted, cb))
    assert quantize_tangent(predicted, observed, cb) == idx
    err = chordal_distance(
        exp_map(predicted, reconstruct_codeword(idx, predicted, cb)), observed
    )
    assert err < 1e-9


def test_quantize_tangent_zero_error_short_circuit():
    cb = small_codebook()
    x = random_point(4, rng_stream(4))
    assert quantize_tangent(x, x, cb) == CodewordIndex(0, 0)


def test_reconstruct_codeword_properties():
    cb = small_codebook()
    base = random_point(4, rng_stream(5))
    with pytest.raises(IndexError):
        reconstruct_codeword(CodewordIndex(8, 0), base, cb)
    with pytest.raises(IndexError):
        reconstruct_codeword(CodewordIndex(0, 4), base, cb)
    for d in range(cb.directions.size):
        for m in range(cb.magnitudes.size):
            t = reconstruct_codeword(CodewordIndex(d, m), base, cb)
            endpoint = exp_map(base, t)
            assert abs(np.linalg.norm(endpoint.coords) - 1.0) < 1e-12
    # a codeword collinear with the base collapses to the zero tangent
    collinear = ShapeGainCodebook(
        best_packing(4, 4, draws=200), uniform_magnitude(2, 0.0, 0.5)
    )
    base = GrassmannPoint.from_vector(collinear.directions.entries[1])
    t = reconstruct_codeword(CodewordIndex(1, 1), base, collinear)
    assert t.is_zero
    # zero magnitude reconstructs to the zero tangent regardless of direction
    zero_mag = ShapeGainCodebook(
        best_packing(4, 4, draws=200),
        uniform_magnitude(2, 0.0, 1.0).__class__(np.array([0.0, 0.3])),
    )
    assert reconstruct_codeword(CodewordIndex(0, 0), base, zero_mag).is_zero


def test_direction_only_quantizer_dominates_joint_search():
    # For a fixed (prediction, observation) pair the continuously optimal
    # magnitude can only improve on any quantized magnitude over the same
    # direction set.  (Across a whole trace the two encoders evolve
    # different states, so only the per-pair comparison is meaningful.)
    rng = rng_stream(6)
    cb = small_codebook(hi=0.4)
    for _ in range(100):
        predicted, observed = random_point(4, rng), random_point(4, rng)
        if abs(np.vdot(predicted.coords, observed.coords)) < 0.05:
            continue
        error = log_map(predicted, observed)
        free_tangent, free_idx = direction_only_quantizer(
            predicted, observed, cb, error
        )
        assert free_idx is None
        joint_idx = quantize_tangent(predicted, observed, cb)
        joint_tangent = reconstruct_codeword(joint_idx, predicted, cb)
        free_d = chordal_distance(exp_map(predicted, free_tangent), observed)
        joint_d = chordal_distance(exp_map(predicted, joint_tangent), observed)
        assert free_d <= joint_d + 1e-12
    trace = gen_ar1(Ar1Params(n=4, beta=0.01, steps=100, seed=6))
    free = encode_trace(trace.points, cb, quantizer=direction_only_quantizer)
    assert all(i is None for i in free.indices)


def test_exact_quantizer_reproduces_observations():
    trace = gen_ar1(Ar1Params(n=4, beta=0.01, steps=200, seed=7))
    cb = small_codebook()
    res = encode_trace(trace.points, cb, quantizer=exact_quantizer)
    assert np.max(res.estimate_errors) < 1e-10
    for est, obs in zip(res.estimates, trace.points[2:]):
        assert chordal_distance(est, obs) < 1e-10


# ---------------------------------------------------------------------------
# initialization


def test_initialize_exact_matches_predictor():
    rng = rng_stream(8)
    x0, x1 = random_point(4, rng), random_point(4, rng)
    state = initialize(x0, x1, None, mode="exact")
    assert state.time == 2
    assert np.array_equal(state.predicted.coords, predict_one_step(x0, x1).coords)


def test_initialize_memoryless_snaps_to_codewords():
    cb = small_codebook()
    x0 = GrassmannPoint.from_vector(cb.directions.entries[3])
    x1 = GrassmannPoint.from_vector(cb.directions.entries[7])
    state = initialize(x0, x1, cb, mode="memoryless")
    assert chordal_distance(state.est_prev, x0) < 1e-12
    assert chordal_distance(state.est_curr, x1) < 1e-12


def test_initialize_memoryless_requires_codebook_and_valid_mode():
    rng = rng_stream(9)
    x0, x1 = random_point(4, rng), random_point(4, rng)
    with pytest.raises(ValueError, match="codebook"):
        initialize(x0, x1, None, mode="memoryless")
    with pytest.raises(ValueError, match="mode"):
        initialize(x0, x1, None, mode="fuzzy")


def test_initialize_memoryless_falls_back_past_cut_locus():
    # The nearest codeword for x1 is orthogonal to the quantized x0; the
    # seeder must fall back to the next-best codeword instead of failing.
    entries = np.eye(2, dtype=np.complex128)
    cb = ShapeGainCodebook(
        best_packing(2, 2, draws=1).__class__(entries), uniform_magnitude(2, 0.0, 0.5)
    )
    x0 = basis(2, 0)
    x1 = GrassmannPoint.from_vector([0.05, 1.0])
    state = initialize(x0, x1, cb, mode="memoryless")
    assert chordal_distance(state.est_curr, basis(2, 0)) < 1e-12
    assert chordal_distance(state.predicted, basis(2, 0)) < 1e-12


def test_initialize_memoryless_transient_decays():
    # Seeding from quantized points costs accuracy for the first few steps;
    # the closed loop then pulls the estimate onto the trace.
    early, late = [], []
    cb = ShapeGainCodebook(best_packing(4, 64), uniform_magnitude(8, 0.0, 0.5))
    for seed in range(100):
        trace = gen_ar1(Ar1Params(n=4, beta=0.001, steps=300, seed=seed))
        res = encode_trace(trace.points, cb, mode="memoryless")
        early.append(np.mean(res.estimate_errors[:4] ** 2))
        late.append(np.mean(res.estimate_errors[100:] ** 2))
    assert np.mean(early) > 1.5 * np.mean(late)


# ---------------------------------------------------------------------------
# encoder/decoder sessions


def test_encoder_decoder_bit_identical():
    cb = small_codebook()
    trace = gen_ar1(Ar1Params(n=4, beta=0.005, steps=500, seed=10))
    enc = encode_trace(trace.points, cb)
    dec_state = initialize(trace.points[0], trace.points[1], cb, mode="exact")
    dec_estimates, dec_final = decode_trace(dec_state, enc.indices, cb)
    assert len(dec_estimates) == len(enc.estimates)
    for a, b in zip(enc.estimates, dec_estimates):
        assert np.array_equal(a.coords, b.coords)
    assert np.array_equal(dec_final.predicted.coords, enc.state.predicted.coords)


def test_encoder_decoder_bit_identical_memoryless_init():
    cb = small_codebook()
    trace = gen_ar1(Ar1Params(n=4, beta=0.005, steps=500, seed=11))
    enc = encode_trace(trace.points, cb, mode="memoryless")
    dec_state = initialize(trace.points[0], trace.points[1], cb, mode="memoryless")
    dec_estimates, _ = decode_trace(dec_state, enc.indices, cb)
    for a, b in zip(enc.estimates, dec_estimates):
        assert np.array_equal(a.coords, b.coords)


def test_empty_stream_leaves_state_unchanged():
    cb = small_codebook()
    rng = rng_stream(12)
    state = initialize(random_point(4, rng), random_point(4, rng), cb)
    estimates, after = decode_trace(state, [], cb)
    assert estimates == ()
    assert after is state


def test_corrupted_index_diverges():
    cb = small_codebook()
    trace = gen_ar1(Ar1Params(n=4, beta=0.005, steps=200, seed=13))
    enc = encode_trace(trace.points, cb)
    k = 50
    bad = list(enc.indices)
    bad[k] = CodewordIndex.deserialize(
        (bad[k].serialize(4) + 1) % cb.size, 4
    )
    state = initialize(trace.points[0], trace.points[1], cb)
    dec, _ = decode_trace(state, bad, cb)
    assert all(
        np.array_equal(a.coords, b.coords)
        for a, b in zip(enc.estimates[:k], dec[:k])
    )
    assert chordal_distance(enc.estimates[k], dec[k]) > 1e-6
    assert chordal_distance(enc.estimates[-1], dec[-1]) > 1e-6


def test_estimate_alignment_and_prediction_errors():
    cb = small_codebook()
    trace = gen_ar1(Ar1Params(n=4, beta=0.01, steps=40, seed=14))
    res = encode_trace(trace.points, cb)
    assert len(res.indices) == len(trace.points) - 2
    assert len(res.estimates) == len(trace.points) - 2
    first_pred = predict_one_step(trace.points[0], trace.points[1])
    assert abs(
        res.prediction_errors[0] - chordal_distance(first_pred, trace.points[2])
    ) < 1e-15
    for est, obs in zip(res.estimates, trace.points[2:]):
        assert abs(np.linalg.norm(est.coords) - 1.0) < 1e-12
        # estimate_errors[j] measures estimate j against observation j+2
    assert np.allclose(
        res.estimate_errors,
        [chordal_distance(e, o) for e, o in zip(res.estimates, trace.points[2:])],
    )


def test_encode_trace_validation():
    cb = small_codebook()
    rng = rng_stream(15)
    pts = [random_point(4, rng) for _ in range(3)]
    with pytest.raises(ValueError, match="at least 3"):
        encode_trace(pts[:2], cb)
    with pytest.raises(ValueError, match="on_track_loss"):
        encode_trace(pts, cb, on_track_loss="ignore")


def test_tracking_loss_raise_and_reinit():
    cb = small_codebook(n=3, n_d=4, n_m=2)
    x0 = basis(3, 0)
    x1 = GrassmannPoint.from_vector([1.0, 1.0, 0.0])
    x2 = basis(3, 0)  # orthogonal to the prediction e2, fine vs x1
    x3 = GrassmannPoint.from_vector([1.0, 0.2, 0.1])
    with pytest.raises(TrackingLostError) as exc:
        encode_trace([x0, x1, x2, x3], cb, on_track_loss="raise")
    assert exc.value.step == 2
    res = encode_trace([x0, x1, x2, x3], cb, on_track_loss="reinit")
    assert res.reinits == 1
    assert res.indices[0] is None
    assert chordal_distance(res.estimates[0], x2) < 1e-12  # reseeded exactly
    assert res.indices[1] is not None  # tracking resumed


def test_small_angle_quantization_consistency():
    # For small error tangents the chordal estimate error matches the
    # Euclidean tangent-space distance between error and codeword.
    cb = ShapeGainCodebook(best_packing(4, 64), uniform_magnitude(8, 0.0, 0.5))
    trace = gen_ar1(Ar1Params(n=4, beta=0.01, steps=2000, seed=16))
    state = initialize(trace.points[0], trace.points[1], cb)
    checked = consistent = 0
    for obs in trace.points[2:]:
        err = log_map(state.predicted, obs)
        idx = quantize_tangent(state.predicted, obs, cb)
        tangent = reconstruct_codeword(idx, state.predicted, cb)
        estimate = exp_map(state.predicted, tangent)
        if err.magnitude < 0.1:
            checked += 1
            euclid = np.linalg.norm(err.as_ambient() - tangent.as_ambient())
            if abs(chordal_distance(estimate, obs) - euclid) < 0.01:
                consistent += 1
        _, state, _ = encode_step(state, obs, cb)
    assert checked > 100
    assert consistent >= 0.99 * checked


def test_more_magnitude_bits_reduce_distortion():
    from grasspc import harvest_open_loop, lloyd_magnitude

    trace = gen_ar2(Ar2Params(n=3, a1=0.9, a2=0.75, noise_std=0.01, steps=3000, seed=17))
    directions = best_packing(3, 16)
    ts = harvest_open_loop(trace.points)
    errors = {}
    for n_m in (4, 32):  # 2 vs 5 magnitude bits
        cb = ShapeGainCodebook(directions, lloyd_magnitude(ts, n_m))
        res = encode_trace(trace.points, cb)
        errors[n_m] = float(np.mean(res.estimate_errors**2))
    assert errors[32] < errors[4]


def test_gpc_beats_memoryless_at_equal_bits_on_correlated_trace():
    trace = gen_ar1(Ar1Params(n=4, beta=0.001, steps=1000, seed=18))
    gpc_cb = ShapeGainCodebook(best_packing(4, 64), uniform_magnitude(8, 0.0, 0.5))
    res = encode_trace(trace.points, gpc_cb)
    gpc_mse = float(np.mean(res.estimate_errors**2))
    one_shot = best_packing(4, 512)
    mem_mse = float(
        np.mean(
            [
                chordal_distance(p, memoryless_quantize(p, one_shot)[1]) ** 2
                for p in trace.points[2:]
            ]
        )
    )
    assert gpc_mse < mem_mse


# ---------------------------------------------------------------------------
# index streams


def test_index_stream_round_trip(tmp_path):
    cb = small_codebook()
    trace = gen_ar1(Ar1Params(n=4, beta=0.01, steps=60, seed=19))
    enc = encode_trace(trace.points, cb)
    path = tmp_path / "stream.txt"
    write_index_stream(path, enc.indices, cb.magnitudes.size)
    back = read_index_stream(path, cb.magnitudes.size)
    assert back == enc.indices
    lines = path.read_text().splitlines()
    assert all(line.isdigit() for line in lines)


def test_index_stream_rejects_reinit_gaps(tmp_path):
    with pytest.raises(ValueError, match="gap"):
        write_index_stream(tmp_path / "s.txt", [CodewordIndex(0, 0), None], 4)
