import struct

import numpy as np
import pytest

from conftest import numeric_grad
from conocc import engine as E
from conocc.engine import GradTape, Tensor
from conocc.model import (ArchConfig, ConfigError, build_model, decode, encode, expected_parameter_count, forward,
                          load_checkpoint, read_records, save_checkpoint)


@pytest.fixture(scope="module")
def model32():
    return build_model(ArchConfig(m=32, n=256, seed=0))


def test_default_shapes(model32):
    x = np.random.default_rng(0).random((5, 1, 32, 32)).astype(np.float32)
    z = encode(model32, x)
    assert z.shape == (5, 256)
    assert decode(model32, z).shape == (5, 1, 32, 32)


def test_small_model_range_and_shape():
    model = build_model(ArchConfig(m=16, n=8, seed=1))
    x = np.random.default_rng(1).random((3, 1, 16, 16)).astype(np.float32)
    out = forward(model, x).data
    assert out.shape == (3, 1, 16, 16)
    assert np.all(out > 0) and np.all(out < 1)


def test_parameter_count_closed_form(model32):
    # conv 320 + 18496 + 73856, dense 524544 | dense 526336, deconv 73792 + 18464 + 289
    assert expected_parameter_count(model32.cfg) == 1_236_097
    assert model32.num_parameters() == 1_236_097


def test_same_seed_same_parameters():
    a, b = build_model(ArchConfig(m=16, n=8, seed=4)), build_model(ArchConfig(m=16, n=8, seed=4))
    for (na, pa), (nb, pb) in zip(a.named_parameters().items(), b.named_parameters().items()):
        assert na == nb and pa.data.tobytes() == pb.data.tobytes()
    c = build_model(ArchConfig(m=16, n=8, seed=5))
    assert c.encoder_params["enc.conv0.kernel"].data.tobytes() != a.encoder_params["enc.conv0.kernel"].data.tobytes()


def test_encoder_decoder_params_disjoint(model32):
    enc = {id(p) for p in model32.encoder_params.values()}
    dec = {id(p) for p in model32.decoder_params.values()}
    assert enc and dec and not enc & dec
    assert all(k.startswith("enc.") for k in model32.encoder_params)


@pytest.mark.parametrize("m", [12, 20, 0])
def test_bad_image_size(m):
    with pytest.raises(ConfigError):
        build_model(ArchConfig(m=m, n=4))


def test_wrong_spatial_size_rejected():
    model = build_model(ArchConfig(m=16, n=4))
    with pytest.raises(E.EngineError, match="16"):
        encode(model, np.zeros((1, 1, 8, 8), dtype=np.float32))


def test_encode_deterministic_and_pure(model32):
    x = np.random.default_rng(2).random((4, 1, 32, 32)).astype(np.float32)
    before = {k: v.data.copy() for k, v in model32.named_parameters().items()}
    a, b = encode(model32, x).data, encode(model32, x).data
    assert a.tobytes() == b.tobytes()
    for k, v in model32.named_parameters().items():
        assert v.data.tobytes() == before[k].tobytes()


def test_zero_weight_encoder_outputs_bias():
    model = build_model(ArchConfig(m=16, n=6))
    for p in model.encoder_params.values():
        p.data = np.zeros_like(p.data)
    bias = np.arange(6, dtype=np.float32) - 2.5
    model.encoder_params["enc.dense.bias"].data = bias
    z = encode(model, np.random.default_rng(0).random((4, 1, 16, 16)).astype(np.float32)).data
    np.testing.assert_array_equal(z, np.broadcast_to(bias, (4, 6)))


def test_forward_pixel_gradient_matches_finite_difference():
    with E.default_dtype(np.float64):
        model = build_model(ArchConfig(m=8, n=4, channels=(2, 3, 4), seed=3))
        x = np.random.default_rng(3).random((1, 1, 8, 8))
        proj = np.random.default_rng(4).standard_normal((1, 1, 8, 8))
        xt = Tensor(x, requires_grad=True)
        with GradTape() as tape:
            loss = E.sum_(E.mul(forward(model, xt), Tensor(proj)))
        g = E.backward(tape, loss, [xt])[xt]
        fd = numeric_grad(lambda: float((forward(model, xt.data).data * proj).sum()), xt.data)
    assert np.max(np.abs(g - fd)) < 1e-4


def test_checkpoint_round_trip(tmp_path, model32):
    path = tmp_path / "m.ckpt"
    save_checkpoint(model32, path, {"center.mu": np.arange(256, dtype=np.float32)})
    loaded, extra = load_checkpoint(path)
    assert loaded.cfg == model32.cfg
    np.testing.assert_array_equal(extra["center.mu"], np.arange(256))
    x = np.random.default_rng(9).random((3, 1, 32, 32)).astype(np.float32)
    assert forward(loaded, x).data.tobytes() == forward(model32, x).data.tobytes()


def test_checkpoint_byte_layout(tmp_path):
    model = build_model(ArchConfig(m=8, n=2, channels=(1, 1, 1)))
    path = tmp_path / "m.ckpt"
    save_checkpoint(model, path)
    raw = path.read_bytes()
    assert raw.startswith(b"CONOCC1\n")
    pos = 8
    (ln,) = struct.unpack_from("<Q", raw, pos)
    assert raw[pos + 8:pos + 8 + ln] == b"meta.arch"
    pos += 8 + ln
    (rank,) = struct.unpack_from("<Q", raw, pos)
    assert rank == 1 and struct.unpack_from("<Q", raw, pos + 8) == (6,)
    vals = np.frombuffer(raw, "<f4", 6, pos + 16)
    np.testing.assert_array_equal(vals, [8, 2, 0, 1, 1, 1])
    assert list(read_records(path)) == ["meta.arch", *model.named_parameters()]


def test_not_a_checkpoint(tmp_path):
    p = tmp_path / "x.ckpt"
    p.write_bytes(b"nope")
    with pytest.raises(ValueError, match="CONOCC1"):
        load_checkpoint(p)
