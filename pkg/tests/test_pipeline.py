import numpy as np
import pytest

from duetface.backbone import cosine_similarity, embed, forward_features
from duetface.channel_split import spec_for_image
from duetface.color_frequency import bdct, rgb_to_ycbcr, upsample_image
from duetface.facial_roi import convex_hull, rasterize_hull
from duetface.pipeline import (
    ClientConfig,
    ModelMismatchError,
    client_run,
    lift_compact,
    server_backbone,
    server_features,
    server_run,
)
from duetface.protocol import MODE_COMPACT, MODE_FULL, QueryMessage, decode, encode


@pytest.fixture(scope="module")
def model():
    return server_backbone(10)


def test_default_masks_follow_stage_geometry(portrait, corpus):
    msg = client_run(portrait, corpus[1][2])
    assert [m.shape for m in msg.masks] == [(56, 56), (28, 28), (14, 14), (7, 7)]
    assert msg.mode == MODE_COMPACT and msg.x_s.shape == (162, 14, 14)
    for m in msg.masks:
        assert m.min() >= 0 and m.max() <= 1


def test_full_mode_shape(portrait):
    msg = client_run(portrait, config=ClientConfig(mode="full"))
    assert msg.mode == MODE_FULL and msg.x_s.shape == (162, 112, 112)


def test_masks_are_zero_outside_roi(portrait, corpus):
    lm = corpus[1][2]
    hull = convex_hull(lm)
    for m in client_run(portrait, lm).masks:
        roi = rasterize_hull(hull, *m.shape)
        assert np.all(m[~roi] == 0)


def test_no_crucial_channel_transmitted(portrait):
    for k in (1, 10, 32):
        msg = client_run(portrait, config=ClientConfig(k=k))
        assert set(msg.spec.noncrucial).isdisjoint(msg.spec.crucial)
        assert msg.x_s.shape[0] == len(msg.spec.noncrucial)


def test_client_is_deterministic(portrait, corpus):
    lm = corpus[1][2]
    assert encode(client_run(portrait, lm)) == encode(client_run(portrait, lm))


def test_degenerate_landmarks_fall_back(portrait):
    line = np.array([[10.0, 10.0], [20.0, 20.0], [30.0, 30.0]])
    msg = client_run(portrait, line)
    assert msg.roi_fallback
    plain = client_run(portrait, None)
    assert not plain.roi_fallback
    assert all(np.array_equal(a, b) for a, b in zip(msg.masks, plain.masks))


def test_fixed_spec_mode(corpus):
    spec = spec_for_image(corpus[0][1], 10)
    msg = client_run(corpus[3][1], config=ClientConfig(spec=spec))
    assert msg.spec == spec


def test_k_zero_and_k_64(portrait):
    msg0 = client_run(portrait, config=ClientConfig(k=0))
    assert msg0.x_s.shape[0] == 192 and all(not m.any() for m in msg0.masks)
    msg64 = client_run(portrait, config=ClientConfig(k=64))
    assert msg64.x_s.shape[0] == 0


def test_zero_masks_equal_plain_forward(portrait, model):
    msg = client_run(portrait, config=ClientConfig(mode="full"))
    zeroed = QueryMessage(msg.mode, msg.k, 1, msg.spec, msg.x_s, [np.zeros_like(m) for m in msg.masks])
    plain = embed(forward_features(model, msg.x_s.astype(np.float64))[-1]).vector
    np.testing.assert_array_equal(server_run(zeroed, model).embedding, plain.astype(np.float32))


def test_server_echoes_query_id(portrait, model):
    msg = client_run(portrait, config=ClientConfig(query_id=987654321))
    assert server_run(msg, model).query_id == 987654321


def test_replayed_masks_match_in_process(portrait, corpus, model):
    msg = client_run(portrait, corpus[1][2])
    assert np.array_equal(server_features(msg, model), server_features(decode(encode(msg)), model))


def test_model_mismatch(portrait):
    msg = client_run(portrait, config=ClientConfig(k=4))
    with pytest.raises(ModelMismatchError):
        server_run(msg, server_backbone(10))


def test_lift_compact_is_exact_without_crucial_channels(portrait):
    # with nothing removed the inverse DCT recovers the image, so the lift reproduces full mode
    spec = spec_for_image(portrait, 0)
    ycc = rgb_to_ycbcr(portrait)
    lifted = lift_compact(bdct(ycc), spec)
    np.testing.assert_allclose(lifted, bdct(upsample_image(ycc)), atol=1e-9)


def test_full_vs_compact_embeddings(corpus, model):
    for name, img, lm in corpus:
        ef = server_run(client_run(img, lm, ClientConfig(mode="full")), model).embedding
        ec = server_run(client_run(img, lm, ClientConfig(mode="compact")), model).embedding
        assert cosine_similarity(ef, ec) >= 0.99, name


def test_interaction_weights_zero_ignore_masks(portrait):
    model0 = server_backbone(10, interaction_weights=(0, 0, 0, 0))
    msg = client_run(portrait)
    bare = QueryMessage(msg.mode, msg.k, msg.query_id, msg.spec, msg.x_s, [])
    assert np.array_equal(server_run(msg, model0).embedding, server_run(bare, model0).embedding)
