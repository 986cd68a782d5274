import math

import numpy as np
import pytest

from helpers import make_structure, random_structure, small_model
from statereg import autodiff as ad
from statereg.graph import FEATURE_DIM, PathStructure
from statereg.model import (
    AdamState,
    CheckpointError,
    GateModel,
    LayerParams,
    NumericalError,
    TrainConfig,
    adam_step,
    attention_logits,
    attention_weights,
    decode,
    embed_register,
    encode,
    encoder_layer,
    init_model,
    load_checkpoint,
    load_model,
    loss_and_gradients,
    prepare_structure,
    reconstruction_loss,
    run_forward,
    save_model,
    train,
)


def _scalar_layer(w, vs, vr):
    return LayerParams(
        W=np.array([[[w]]]), v_s=np.array([[vs]]), v_r=np.array([[vr]])
    )


def _three_node_edges():
    # graph 0 -> 2, 1 -> 2 plus self-loops, messages sorted by (dst, src)
    dst = np.array([0, 1, 2, 2, 2])
    src = np.array([0, 1, 0, 1, 2])
    return src, dst


# ---------------------------------------------------------------- logits

def test_zero_vectors_give_half():
    layer = _scalar_layer(w=0.7, vs=0.0, vr=0.0)
    src, dst = _three_node_edges()
    h = np.array([[1.0], [2.0], [3.0]])
    e = attention_logits(layer, h, src, dst)
    np.testing.assert_allclose(e, 0.5)


def test_logits_in_unit_interval():
    rng = np.random.default_rng(0)
    for _ in range(20):
        heads = int(rng.integers(1, 4))
        d_in, d_out = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        layer = LayerParams(
            W=rng.standard_normal((heads, d_out, d_in)),
            v_s=rng.standard_normal((heads, d_out)),
            v_r=rng.standard_normal((heads, d_out)),
        )
        src, dst = _three_node_edges()
        h = rng.standard_normal((3, d_in))
        e = attention_logits(layer, h, src, dst)
        assert np.all(e > 0.0) and np.all(e < 1.0)
    # under saturation float64 can round to the interval boundary, never past
    hot = _scalar_layer(w=100.0, vs=100.0, vr=100.0)
    src, dst = _three_node_edges()
    e = attention_logits(hot, np.full((3, 1), 100.0), src, dst)
    assert np.all(e >= 0.0) and np.all(e <= 1.0)


def test_logits_match_hand_calculation():
    w, vs, vr = 0.5, 0.8, -0.6
    h = [1.0, -2.0, 3.0]
    layer = _scalar_layer(w, vs, vr)
    src, dst = _three_node_edges()
    e = attention_logits(layer, np.array(h).reshape(3, 1), src, dst)

    def expected(i, j):
        si = max(w * h[i], 0.0)
        sj = max(w * h[j], 0.0)
        return 1.0 / (1.0 + math.exp(-(vs * si + vr * sj)))

    hand = [expected(i, j) for i, j in zip(dst, src)]
    np.testing.assert_allclose(e[:, 0], hand, rtol=1e-12)


# ---------------------------------------------------------------- weights

def test_single_neighbor_weight_is_one():
    alpha = attention_weights(np.array([[0.37]]), np.array([0]), 1)
    np.testing.assert_allclose(alpha, 1.0)


def test_equal_logits_split_evenly():
    alpha = attention_weights(np.array([[0.4], [0.4]]), np.array([0, 0]), 1)
    np.testing.assert_allclose(alpha, 0.5)


def test_softmax_values_and_sum():
    logits = np.array([[0.2], [0.9], [0.9]])
    alpha = attention_weights(logits, np.array([0, 0, 0]), 1)
    direct = np.exp(logits[:, 0]) / np.exp(logits[:, 0]).sum()
    np.testing.assert_allclose(alpha[:, 0], direct, rtol=1e-12)
    assert abs(alpha.sum() - 1.0) < 1e-12


# ---------------------------------------------------------------- layer

def test_isolated_node_identity_weights():
    layer = LayerParams(
        W=np.eye(2)[None, :, :], v_s=np.array([[0.3, -0.2]]), v_r=np.array([[0.1, 0.9]])
    )
    h = np.array([[0.4, 1.7]])              # nonnegative, so relu(W h) == h
    out = encoder_layer(layer, h, np.array([0]), np.array([0]), 1)
    np.testing.assert_allclose(out, h, rtol=1e-12)


def test_zero_features_give_zero_output():
    rng = np.random.default_rng(1)
    layer = LayerParams(
        W=rng.standard_normal((3, 4, 2)),
        v_s=rng.standard_normal((3, 4)),
        v_r=rng.standard_normal((3, 4)),
    )
    src, dst = _three_node_edges()
    out = encoder_layer(layer, np.zeros((3, 2)), src, dst, 3)
    np.testing.assert_array_equal(out, np.zeros((3, 4)))


def test_layer_matches_hand_calculation():
    w, vs, vr = 0.5, 0.8, -0.6
    h = [1.0, -2.0, 3.0]
    layer = _scalar_layer(w, vs, vr)
    src, dst = _three_node_edges()
    out = encoder_layer(layer, np.array(h).reshape(3, 1), src, dst, 3)

    def s(i):
        return max(w * h[i], 0.0)

    def e(i, j):
        return 1.0 / (1.0 + math.exp(-(vs * s(i) + vr * s(j))))

    # node 0 and 1: self loop only
    hand0 = s(0)
    hand1 = s(1)
    # node 2: softmax over neighbors {0, 1, 2}
    ws = [math.exp(e(2, j)) for j in (0, 1, 2)]
    total = sum(ws)
    hand2 = sum(wj / total * s(j) for wj, j in zip(ws, (0, 1, 2)))
    np.testing.assert_allclose(out[:, 0], [hand0, hand1, hand2], rtol=1e-12)


# ---------------------------------------------------------------- encode/decode

def test_encode_shapes_and_determinism():
    rng = np.random.default_rng(2)
    prep = random_structure(rng, 6, FEATURE_DIM)
    model = init_model(seed=0)
    reps = encode(model, prep)
    assert [r.shape for r in reps] == [(6, 17), (6, 64), (6, 64), (6, 1)]
    reps2 = encode(model, prep)
    for a, b in zip(reps, reps2):
        assert np.array_equal(a, b)          # bitwise identical


def test_encode_finite_on_fuzzed_inputs():
    rng = np.random.default_rng(3)
    model = init_model(seed=1)
    for _ in range(200):
        n = int(rng.integers(1, 12))
        prep = random_structure(rng, n, FEATURE_DIM)
        reps = encode(model, prep)
        assert all(np.all(np.isfinite(r)) for r in reps)


def test_decode_shape_and_zero_input():
    rng = np.random.default_rng(4)
    prep = random_structure(rng, 5, FEATURE_DIM)
    model = init_model(seed=2)
    out = decode(model, np.zeros((5, 1)), prep)
    assert out.shape == (5, 17)
    # no bias terms anywhere: zero input propagates to zero output
    np.testing.assert_array_equal(out, np.zeros((5, 17)))
    with pytest.raises(ValueError, match="shape"):
        decode(model, np.zeros((5, 2)), prep)


def test_decode_finite_on_fuzz():
    rng = np.random.default_rng(5)
    model = init_model(seed=3)
    for _ in range(50):
        n = int(rng.integers(1, 10))
        prep = random_structure(rng, n, FEATURE_DIM)
        out = decode(model, rng.standard_normal((n, 1)), prep)
        assert np.all(np.isfinite(out))


# ---------------------------------------------------------------- loss

def test_loss_zero_on_exact_reconstruction():
    x = np.random.default_rng(6).standard_normal((4, 17))
    assert reconstruction_loss(x, x.copy()) == 0.0


def test_loss_single_node_all_ones():
    assert reconstruction_loss(np.zeros((1, 17)), np.ones((1, 17))) == 1.0


def test_loss_matches_independent_computation():
    rng = np.random.default_rng(7)
    x = rng.standard_normal((5, 17))
    y = rng.standard_normal((5, 17))
    expected = sum(
        (x[i, j] - y[i, j]) ** 2 for i in range(5) for j in range(17)
    ) / (5 * 17)
    assert abs(reconstruction_loss(x, y) - expected) < 1e-12


def test_loss_shape_mismatch():
    with pytest.raises(ValueError, match="shape"):
        reconstruction_loss(np.zeros((2, 17)), np.zeros((3, 17)))


# ---------------------------------------------------------------- gradients

def test_gradient_shapes_mirror_parameters():
    rng = np.random.default_rng(8)
    prep = random_structure(rng, 5, FEATURE_DIM)
    model = init_model(seed=4)
    _, grads = loss_and_gradients(model, prep)
    params = model.parameters()
    assert len(grads) == len(params) == 18
    for g, p in zip(grads, params):
        assert g.shape == p.shape


def test_zero_features_zero_loss_zero_gradients():
    rng = np.random.default_rng(9)
    prep = random_structure(rng, 4, FEATURE_DIM)
    prep.features[:] = 0.0
    model = init_model(seed=5)
    loss, grads = loss_and_gradients(model, prep)
    assert loss == 0.0
    assert all(np.all(g == 0.0) for g in grads)


def test_gradients_match_finite_differences():
    from helpers import fd_gradcheck

    rng = np.random.default_rng(10)
    for trial in range(6):
        n = int(rng.integers(3, 9))
        fdim = int(rng.integers(3, 6))
        hdim = int(rng.integers(2, 5))
        heads = int(rng.integers(1, 3))
        prep = random_structure(rng, n, fdim)
        model = small_model(rng, fdim, hdim, heads)
        bad, total = fd_gradcheck(model, prep)
        assert bad == 0, f"trial {trial}: {bad}/{total} gradient entries off"


def test_structure_loss_gradients_match_finite_differences():
    from helpers import fd_gradcheck

    rng = np.random.default_rng(11)
    prep = random_structure(rng, 6, 4)
    model = small_model(rng, 4, 3, 2)
    bad, total = fd_gradcheck(model, prep, structure_loss_weight=0.3)
    assert bad == 0, f"{bad}/{total} entries off with structure loss enabled"


# ---------------------------------------------------------------- attention sums

def test_attention_rows_sum_to_one():
    rng = np.random.default_rng(12)
    checks = 0
    model = init_model(seed=6)
    for _ in range(25):
        n = int(rng.integers(1, 15))
        prep = random_structure(rng, n, FEATURE_DIM)
        with ad.no_grad():
            fwd = run_forward(model, prep)
        for alpha in fwd.alphas:
            sums = np.zeros((n, alpha.shape[1]))
            np.add.at(sums, prep.dst, alpha)
            assert np.max(np.abs(sums - 1.0)) < 1e-9
            checks += sums.size
    assert checks > 1000


# ---------------------------------------------------------------- adam

def test_adam_zero_gradient_no_decay():
    params = [np.array([1.5, -2.0]), np.array([[0.3]])]
    grads = [np.zeros(2), np.zeros((1, 1))]
    state = AdamState.for_params(params)
    config = TrainConfig(weight_decay=0.0)
    before = [p.copy() for p in params]
    adam_step(params, grads, state, config)
    for p, b in zip(params, before):
        np.testing.assert_array_equal(p, b)


def test_adam_clips_to_global_norm():
    params = [np.array([0.0, 0.0])]
    grads = [np.array([30.0, 40.0])]        # norm 50 -> scaled by 0.1
    state = AdamState.for_params(params)
    config = TrainConfig()
    post = adam_step(params, grads, state, config)
    assert abs(post - 5.0) < 1e-12
    np.testing.assert_allclose(state.m[0], 0.1 * np.array([3.0, 4.0]), rtol=1e-12)


def test_adam_hand_computed_first_step():
    lr, b1, b2, eps = 0.01, 0.9, 0.999, 1e-8
    params = [np.array([1.0])]
    grads = [np.array([1.0])]
    state = AdamState.for_params(params)
    config = TrainConfig(learning_rate=lr, weight_decay=0.0)
    adam_step(params, grads, state, config)
    m = (1 - b1) * 1.0
    v = (1 - b2) * 1.0
    m_hat = m / (1 - b1)
    v_hat = v / (1 - b2)
    expected = 1.0 - lr * m_hat / (math.sqrt(v_hat) + eps)
    np.testing.assert_allclose(params[0], [expected], rtol=0, atol=0)


def test_adam_decoupled_weight_decay():
    params = [np.array([2.0])]
    grads = [np.array([0.0])]
    state = AdamState.for_params(params)
    config = TrainConfig(weight_decay=5e-4)
    adam_step(params, grads, state, config)
    np.testing.assert_allclose(params[0], [2.0 - 0.01 * 5e-4 * 2.0], rtol=1e-15)


def test_adam_rejects_non_finite():
    params = [np.array([1.0])]
    grads = [np.array([np.nan])]
    state = AdamState.for_params(params)
    with pytest.raises(NumericalError, match="non-finite"):
        adam_step(params, grads, state, TrainConfig())


# ---------------------------------------------------------------- config

def test_train_config_defaults_match_published_settings():
    config = TrainConfig()
    assert config.learning_rate == 0.01
    assert config.weight_decay == 5e-4
    assert config.epochs == 200
    assert config.gradient_clip == 5.0
    assert config.heads == 4


@pytest.mark.parametrize("kwargs", [
    {"learning_rate": 0.0}, {"epochs": 0}, {"gradient_clip": 0.0},
    {"heads": 0}, {"weight_decay": -1e-3}, {"beta1": 1.0}, {"eps": 0.0},
])
def test_train_config_validation(kwargs):
    with pytest.raises(ValueError):
        TrainConfig(**kwargs)


# ---------------------------------------------------------------- training

def test_train_single_trivial_structure_reduces_loss():
    rng = np.random.default_rng(13)
    prep = make_structure(1, [], 0, FEATURE_DIM, rng)
    result = train([prep], TrainConfig(seed=7, epochs=200))
    assert result.epoch_losses[-1] < result.initial_loss
    assert result.epoch_losses[-1] < result.epoch_losses[0]
    assert len(result.epoch_losses) == 200


def test_train_bitwise_determinism():
    rng = np.random.default_rng(14)
    corpus = [random_structure(rng, int(rng.integers(2, 7)), FEATURE_DIM) for _ in range(4)]
    a = train(corpus, TrainConfig(seed=21, epochs=8))
    b = train(corpus, TrainConfig(seed=21, epochs=8))
    assert a.epoch_losses == b.epoch_losses
    for pa, pb in zip(a.model.parameters(), b.model.parameters()):
        assert np.array_equal(pa, pb)


def test_train_matches_public_adam_step():
    # the vectorized in-training optimizer is the same update rule as the
    # public adam_step surface
    from statereg.model import _init_from_rng, HIDDEN_DIM

    rng = np.random.default_rng(15)
    prep = random_structure(rng, 5, FEATURE_DIM)
    config = TrainConfig(seed=33, epochs=1)

    result = train([prep], config)

    ref_rng = np.random.default_rng(config.seed)
    ref = _init_from_rng(ref_rng, config.heads, FEATURE_DIM, HIDDEN_DIM)
    ref_rng.permutation(1)
    _, grads = loss_and_gradients(ref, prep)
    adam_step(ref.parameters(), grads, AdamState.for_params(ref.parameters()), config)
    for pa, pb in zip(result.model.parameters(), ref.parameters()):
        np.testing.assert_allclose(pa, pb, rtol=1e-12, atol=1e-15)


def test_train_empty_corpus_rejected():
    with pytest.raises(ValueError, match="empty"):
        train([], TrainConfig())


def test_train_divergence_aborts_with_epoch():
    rng = np.random.default_rng(16)
    prep = random_structure(rng, 3, FEATURE_DIM)
    prep.features[:] = 1e160                 # overflows to inf in the forward pass
    with np.errstate(all="ignore"), pytest.raises(NumericalError, match="epoch 0"):
        train([prep], TrainConfig(seed=1, epochs=2))


def test_train_clip_bound_respected():
    rng = np.random.default_rng(17)
    corpus = [random_structure(rng, 6, FEATURE_DIM) for _ in range(3)]
    result = train(corpus, TrainConfig(seed=2, epochs=10))
    assert result.max_clipped_grad_norm <= 5.0 + 1e-12


# ---------------------------------------------------------------- embeddings

def test_identical_structures_identical_embeddings():
    rng = np.random.default_rng(18)
    prep = random_structure(rng, 7, FEATURE_DIM)
    model = init_model(seed=8)
    clone = prepare_structure(
        PathStructure(
            root=6, levels=((6,),), induced_nodes=tuple(range(7)),
            induced_edges=tuple(
                (int(s), int(d)) for s, d in zip(prep.src, prep.dst) if s != d
            ),
            terminated_early=False,
        ),
        prep.features,
    )
    assert embed_register(model, prep) == embed_register(model, clone)


def test_embedding_invariant_under_relabeling():
    # permuting non-root node ids leaves the root embedding unchanged: the
    # embedding is the root's row, not an aggregate, and message passing is
    # order-independent up to float round-off
    rng = np.random.default_rng(19)
    n = 8
    edges = [(i, j) for j in range(1, n) for i in range(j) if rng.random() < 0.4]
    feats = rng.uniform(0, 3, size=(n, FEATURE_DIM))
    ps = PathStructure(root=0, levels=((0,),), induced_nodes=tuple(range(n)),
                       induced_edges=tuple(edges), terminated_early=False)
    prep = prepare_structure(ps, feats)
    model = init_model(seed=9)
    base = embed_register(model, prep)

    for trial in range(10):
        perm = np.concatenate([[0], 1 + rng.permutation(n - 1)])  # keep root id 0
        inv = np.argsort(perm)
        ps2 = PathStructure(
            root=0, levels=((0,),), induced_nodes=tuple(range(n)),
            induced_edges=tuple((int(perm[u]), int(perm[v])) for u, v in edges),
            terminated_early=False,
        )
        feats2 = feats[inv]
        prep2 = prepare_structure(ps2, feats2)
        assert abs(embed_register(model, prep2) - base) < 1e-9


def test_embedding_finite_fuzz():
    rng = np.random.default_rng(20)
    model = init_model(seed=10)
    for _ in range(100):
        prep = random_structure(rng, int(rng.integers(1, 10)), FEATURE_DIM)
        assert math.isfinite(embed_register(model, prep))


# ---------------------------------------------------------------- checkpoints

def test_checkpoint_round_trip(tmp_path):
    model = init_model(seed=11)
    path = tmp_path / "model.ckpt"
    save_model(model, path, extra_meta={"seed": 11})
    again, meta = load_checkpoint(path)
    assert again == model
    assert meta["seed"] == 11
    assert load_model(path) == model


def test_checkpoint_truncated_file(tmp_path):
    model = init_model(seed=12)
    path = tmp_path / "model.ckpt"
    save_model(model, path)
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(CheckpointError, match="corrupt"):
        load_model(path)


def test_checkpoint_bit_flip_fails_checksum(tmp_path):
    import json as json_mod

    model = init_model(seed=13)
    path = tmp_path / "model.ckpt"
    save_model(model, path)
    doc = json_mod.loads(path.read_text())
    blob = doc["params"]["encoder.0.W"]["data"]
    doc["params"]["encoder.0.W"]["data"] = blob[:10] + ("A" if blob[10] != "A" else "B") + blob[11:]
    path.write_text(json_mod.dumps(doc))
    with pytest.raises(CheckpointError, match="checksum"):
        load_model(path)


def test_checkpoint_version_mismatch(tmp_path):
    import json as json_mod

    model = init_model(seed=14)
    path = tmp_path / "model.ckpt"
    save_model(model, path)
    doc = json_mod.loads(path.read_text())
    doc["schema"] = "statereg.checkpoint/99"
    path.write_text(json_mod.dumps(doc))
    with pytest.raises(CheckpointError, match="version mismatch"):
        load_model(path)


def test_checkpoint_reload_reproduces_embeddings(tmp_path):
    rng = np.random.default_rng(21)
    corpus = [random_structure(rng, 5, FEATURE_DIM) for _ in range(3)]
    result = train(corpus, TrainConfig(seed=7, epochs=15))
    path = tmp_path / "model.ckpt"
    save_model(result.model, path)
    reloaded = load_model(path)
    for prep in corpus:
        assert embed_register(result.model, prep) == embed_register(reloaded, prep)
