import numpy as np
import pytest

from flowrag.encoder import (
    EncoderModel,
    NearZeroVector,
    NoKnownTokens,
    build_vocab,
    cosine_similarity,
    deserialize_model,
    encode,
    encode_gradient,
    init_model,
    load_model,
    model_fingerprint,
    save_model,
    serialize_model,
)


def fixture_model():
    vocab = {"alpha": 0, "beta": 1, "gamma": 2}
    table = np.array(
        [
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [0.6, 0.8, 0.0],
        ]
    )
    return EncoderModel(vocab=vocab, embedding_table=table, dim=3)


def test_single_token_is_normalized_row():
    model = fixture_model()
    np.testing.assert_allclose(encode(model, "gamma"), [0.6, 0.8, 0.0], atol=1e-12)


def test_repeated_token_equals_single_occurrence():
    model = fixture_model()
    np.testing.assert_array_equal(encode(model, "alpha alpha"), encode(model, "alpha"))


def test_two_token_mean_checked_against_hand_arithmetic():
    model = fixture_model()
    # mean of (1,0,0) and (0,1,0) is (0.5,0.5,0); its norm is 1/sqrt(2).
    expected = np.array([0.5, 0.5, 0.0]) * np.sqrt(2.0)
    np.testing.assert_allclose(encode(model, "alpha beta"), expected, atol=1e-12)


def test_oov_tokens_skipped_and_all_oov_errors():
    model = fixture_model()
    np.testing.assert_array_equal(encode(model, "alpha unknown"), encode(model, "alpha"))
    with pytest.raises(NoKnownTokens):
        encode(model, "unknown words only")
    with pytest.raises(NoKnownTokens):
        encode(model, "")


def test_near_zero_vector_errors():
    model = EncoderModel(
        vocab={"plus": 0, "minus": 1},
        embedding_table=np.array([[1e-10, 0.0], [-1e-10, 0.0]]),
        dim=2,
    )
    with pytest.raises(NearZeroVector):
        encode(model, "plus minus")


def test_cosine_spot_values():
    v = np.array([1.0, 0.0])
    w = np.array([0.6, 0.8])
    assert cosine_similarity(v, v) == 1.0
    assert cosine_similarity(v, np.array([0.0, 1.0])) == 0.0
    assert cosine_similarity(v, w) == pytest.approx(0.6, abs=1e-12)


def test_cosine_clamped_to_unit_interval():
    rng = np.random.default_rng(3)
    for _ in range(50):
        a = rng.normal(size=8)
        a /= np.linalg.norm(a)
        assert -1.0 <= cosine_similarity(a, a) <= 1.0


def test_norm_is_one_for_valid_texts():
    model = init_model(build_vocab(["send email report now", "create ticket"]), dim=8, seed=4)
    for text in ("send email", "create ticket now", "report"):
        assert np.linalg.norm(encode(model, text)) == pytest.approx(1.0, abs=1e-6)


def test_token_order_invariance():
    model = init_model(build_vocab(["a b c d"]), dim=6, seed=1)
    np.testing.assert_array_equal(encode(model, "a b c"), encode(model, "c a b"))


def test_row_scale_invariance():
    model = fixture_model()
    scaled = EncoderModel(model.vocab, model.embedding_table * 7.5, dim=3)
    np.testing.assert_allclose(encode(scaled, "alpha beta"), encode(model, "alpha beta"), atol=1e-12)


def test_zero_upstream_gives_zero_gradient():
    model = fixture_model()
    grads = encode_gradient(model, "alpha beta", np.zeros(3))
    for grad in grads.values():
        np.testing.assert_array_equal(grad, np.zeros(3))


def test_orthogonal_upstream_passes_through_projection():
    model = fixture_model()
    upstream = np.array([0.0, 0.0, 2.0])  # orthogonal to encode("alpha") = (1,0,0)
    grads = encode_gradient(model, "alpha", upstream)
    np.testing.assert_allclose(grads[0], upstream / 1.0, atol=1e-12)


def finite_difference_gradient(model, text, upstream, h=1e-5):
    rows = sorted(set(model.token_rows(text)))
    out = {}
    for row in rows:
        grad = np.zeros(model.dim)
        for j in range(model.dim):
            for sign in (1.0, -1.0):
                bumped = model.embedding_table.copy()
                bumped[row, j] += sign * h
                value = float(
                    upstream @ encode(EncoderModel(model.vocab, bumped, model.dim), text)
                )
                grad[j] += sign * value
        out[row] = grad / (2.0 * h)
    return out


@pytest.mark.parametrize("seed", range(6))
def test_gradient_matches_central_finite_differences(seed):
    rng = np.random.default_rng(seed)
    vocab = build_vocab(["tok0 tok1 tok2 tok3 tok4"])
    model = init_model(vocab, dim=3, seed=seed)
    words = list(vocab)
    text = " ".join(rng.choice(words, size=rng.integers(1, 5)))
    upstream = rng.normal(size=3)
    analytic = encode_gradient(model, text, upstream)
    numeric = finite_difference_gradient(model, text, upstream)
    assert analytic.keys() == numeric.keys()
    for row in analytic:
        denom = max(np.linalg.norm(numeric[row]), 1e-8)
        assert np.linalg.norm(analytic[row] - numeric[row]) / denom < 1e-4


def test_checkpoint_round_trip_and_stability(tmp_path):
    model = init_model(build_vocab(["send email", "create report"]), dim=5, seed=9)
    path = tmp_path / "model.flrg"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.vocab == model.vocab
    assert loaded.dim == 5
    # float32 on disk: values match to float32 precision, and a second
    # save is byte-identical.
    np.testing.assert_allclose(loaded.embedding_table, model.embedding_table, atol=1e-6)
    assert serialize_model(loaded) == path.read_bytes()


def test_fingerprint_tracks_weights():
    model = init_model(build_vocab(["a b"]), dim=4, seed=0)
    fp = model_fingerprint(model)
    assert len(fp) == 32
    model.embedding_table[0, 0] += 1.0
    assert model_fingerprint(model) != fp


def test_deserialize_rejects_garbage():
    with pytest.raises(Exception):
        deserialize_model(b"NOPE" + b"\x00" * 20)
