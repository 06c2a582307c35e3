import numpy as np
import pytest

from duetface.backbone import (
    Backbone,
    BackboneConfig,
    Embedding,
    conv3x3_stride2,
    cosine_similarity,
    embed,
    forward_features,
    init_backbone,
    load_weights,
    save_weights,
    stage_forward,
)
from duetface.color_frequency import ShapeError
from oracles import naive_conv_stride2


def test_seeded_init_is_reproducible():
    cfg = BackboneConfig(input_channels=30, stage_widths=(16, 32, 64, 128), seed=7)
    a, b = init_backbone(cfg), init_backbone(cfg)
    assert all(np.array_equal(x, y) for x, y in zip(a.weights, b.weights))
    other = init_backbone(BackboneConfig(input_channels=30, stage_widths=(16, 32, 64, 128), seed=8))
    assert not np.array_equal(a.weights[0], other.weights[0])


def test_weight_range():
    m = init_backbone(BackboneConfig(input_channels=5, stage_widths=(4, 4, 4, 4)))
    s = np.sqrt(1 / (9 * 5))
    assert np.abs(m.weights[0]).max() <= s


def test_stage_geometry():
    m = init_backbone(BackboneConfig(input_channels=3, stage_widths=(2, 3, 4, 5)))
    feats = forward_features(m, np.random.default_rng(0).normal(size=(3, 112, 112)))
    assert [f.shape[1:] for f in feats] == [(56, 56), (28, 28), (14, 14), (7, 7)]
    assert [f.shape[0] for f in feats] == [2, 3, 4, 5]
    assert all(np.all(f >= 0) for f in feats)


def test_zero_input_gives_zero_activations():
    m = init_backbone(BackboneConfig(input_channels=4))
    assert all(not f.any() for f in forward_features(m, np.zeros((4, 112, 112))))


def test_identity_kernel_subsamples(rng):
    k = np.zeros((1, 1, 3, 3))
    k[0, 0, 1, 1] = 1.0
    m = Backbone(BackboneConfig(input_channels=1, stage_widths=(1, 1, 1, 1)), (k, k.copy(), k.copy(), k.copy()))
    x = rng.uniform(0, 1, (1, 15, 16))
    out = stage_forward(m, 0, x)
    assert out.shape == (1, 8, 8)
    assert np.array_equal(out, x[:, ::2, ::2])


def test_conv_matches_naive_oracle(rng):
    for h, w in [(16, 16), (15, 9)]:
        x = rng.normal(size=(3, h, w))
        k = rng.normal(size=(4, 3, 3, 3))
        np.testing.assert_allclose(conv3x3_stride2(x, k), naive_conv_stride2(x, k), atol=1e-6)


def test_channel_mismatch():
    m = init_backbone(BackboneConfig(input_channels=4))
    with pytest.raises(ShapeError):
        stage_forward(m, 0, np.zeros((5, 8, 8)))


def test_embed():
    f = np.stack([np.full((7, 7), c) for c in (3.0, 4.0)])
    e = embed(f)
    assert e.normalized
    np.testing.assert_allclose(e.vector, [0.6, 0.8])
    z = embed(np.zeros((3, 7, 7)))
    assert not z.normalized and not z.vector.any()


def test_cosine_similarity():
    a = Embedding(np.array([1.0, 0.0]), True)
    b = Embedding(np.array([0.0, 1.0]), True)
    assert cosine_similarity(a, a) == 1.0
    assert cosine_similarity(a, b) == 0.0
    assert cosine_similarity(a, Embedding(-a.vector, True)) == -1.0
    with pytest.raises(ShapeError):
        cosine_similarity(a, np.ones(3))


def test_forward_is_deterministic(rng):
    cfg = BackboneConfig(input_channels=6, stage_widths=(4, 4, 4, 4), seed=3)
    x = rng.normal(size=(6, 32, 32))
    e1 = embed(forward_features(init_backbone(cfg), x)[-1]).vector
    e2 = embed(forward_features(init_backbone(cfg), x)[-1]).vector
    assert e1.tobytes() == e2.tobytes()


def test_weights_round_trip(tmp_path):
    m = init_backbone(BackboneConfig(input_channels=6, stage_widths=(4, 5, 6, 7), seed=11))
    save_weights(m, tmp_path)
    assert (tmp_path / "manifest.txt").read_text().split() == [f"stage{i}.tensor" for i in range(4)]
    loaded = load_weights(tmp_path, (0.5, 1, 1, 2))
    assert loaded.config.stage_widths == (4, 5, 6, 7)
    assert loaded.config.interaction_weights == (0.5, 1, 1, 2)
    for a, b in zip(m.weights, loaded.weights):
        assert np.array_equal(a.astype(np.float32), b)
