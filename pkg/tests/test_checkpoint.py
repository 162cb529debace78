import numpy as np
import pytest

from voicesep.autodiff import Tensor
from voicesep.checkpoint import load_checkpoint, save_checkpoint
from voicesep.errors import CheckpointError
from voicesep.optim import AdamWConfig, OptimizerState


def sample_params(rng):
    return {
        "layer.w": Tensor(rng.normal(size=(4, 3)), requires_grad=True),
        "layer.b": Tensor(rng.normal(size=(3,)), requires_grad=True),
    }


def test_round_trip_params_and_optimizer(tmp_path):
    rng = np.random.default_rng(0)
    params = sample_params(rng)
    state = OptimizerState.initialize(params, AdamWConfig(lr=0.01))
    state.step = 17
    state.m["layer.w"] += 0.5
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, {"hidden": 3}, optimizer=state, metadata={"note": "test"})

    ckpt = load_checkpoint(path)
    assert ckpt.model_config == {"hidden": 3}
    assert ckpt.metadata == {"note": "test"}
    for name in params:
        assert np.array_equal(ckpt.params[name], params[name].data)
    assert ckpt.optimizer.step == 17
    assert ckpt.optimizer.config.lr == 0.01
    assert np.array_equal(ckpt.optimizer.m["layer.w"], state.m["layer.w"])
    assert np.array_equal(ckpt.optimizer.v["layer.b"], state.v["layer.b"])


def test_round_trip_without_optimizer(tmp_path):
    params = sample_params(np.random.default_rng(1))
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, {})
    ckpt = load_checkpoint(path)
    assert ckpt.optimizer is None
    assert set(ckpt.params) == set(params)


def test_missing_file_is_checkpoint_error(tmp_path):
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "nope.ckpt")


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.ckpt"
    path.write_bytes(b"NOTACKPT" + b"\x00" * 64)
    with pytest.raises(CheckpointError, match="magic"):
        load_checkpoint(path)


def test_truncated_payload_rejected(tmp_path):
    params = sample_params(np.random.default_rng(2))
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, params, {})
    raw = path.read_bytes()
    path.write_bytes(raw[:-8])
    with pytest.raises(CheckpointError, match="payload"):
        load_checkpoint(path)


def test_save_is_byte_deterministic(tmp_path):
    params = sample_params(np.random.default_rng(3))
    a = tmp_path / "a.ckpt"
    b = tmp_path / "b.ckpt"
    save_checkpoint(a, params, {"hidden": 3})
    save_checkpoint(b, params, {"hidden": 3})
    assert a.read_bytes() == b.read_bytes()
