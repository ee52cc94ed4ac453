import math
import struct

import numpy as np
import pytest

from dualgraph.checkpoint import MAGIC, CheckpointError, load_tensors, save_tensors
from dualgraph.optim import AdamState, adam_step, clip_grad_norm
from dualgraph.tensor import Tensor


def adam_reference(x, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Scalar Adam written straight from the update rule."""
    m = v = 0.0
    out = []
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / (math.sqrt(v / (1 - b2**t)) + eps)
        out.append(x)
    return out


class TestAdam:
    def test_zero_gradient(self):
        p = {"w": Tensor(np.array([1.0, -2.0]))}
        state = AdamState()
        adam_step(p, {"w": np.zeros(2)}, state)
        np.testing.assert_array_equal(p["w"].data, [1.0, -2.0])
        assert state.step == 1

    def test_first_step_is_sign(self):
        p = {"w": Tensor(np.array([0.0, 0.0, 0.0]))}
        adam_step(p, {"w": np.array([5.0, -0.01, 300.0])}, AdamState(), lr=0.001)
        np.testing.assert_allclose(p["w"].data, [-0.001, 0.001, -0.001], rtol=1e-5)

    def test_trajectory_matches_reference(self):
        p = {"x": Tensor(np.array([1.0]))}
        state = AdamState()
        got = []
        for _ in range(10):
            adam_step(p, {"x": 2.0 * p["x"].data}, state, lr=0.1)
            got.append(float(p["x"].data[0]))
        want = adam_reference(1.0, lambda x: 2.0 * x, 10, 0.1)
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)

    def test_defaults(self):
        s = AdamState()
        assert (s.beta1, s.beta2, s.epsilon, s.step) == (0.9, 0.999, 1e-8, 0)

    def test_errors(self):
        p = {"w": Tensor(np.zeros(2))}
        with pytest.raises(ValueError, match="shape"):
            adam_step(p, {"w": np.zeros(3)}, AdamState())
        with pytest.raises(ValueError, match="lr"):
            adam_step(p, {"w": np.zeros(2)}, AdamState(), lr=0.0)

    def test_keeps_float32(self):
        p = {"w": Tensor(np.ones(2, dtype=np.float32))}
        adam_step(p, {"w": np.ones(2, dtype=np.float32)}, AdamState())
        assert p["w"].dtype == np.float32


class TestClip:
    def test_scales_to_max_norm(self):
        grads = {"a": np.array([3.0]), "b": np.array([4.0])}
        total = clip_grad_norm(grads, 2.0)
        assert total == 5.0
        norm = math.hypot(grads["a"][0], grads["b"][0])
        assert norm == pytest.approx(2.0, rel=1e-5)

    def test_below_threshold_untouched(self):
        grads = {"a": np.array([0.3, 0.4])}
        clip_grad_norm(grads, 2.0)
        np.testing.assert_array_equal(grads["a"], [0.3, 0.4])


class TestCheckpoint:
    def test_layout_by_hand(self, tmp_path):
        path = tmp_path / "x.ckpt"
        save_tensors(path, {"b": np.array([1.5], dtype=np.float32), "a": np.zeros((2, 1))})
        blob = path.read_bytes()
        want = (MAGIC + struct.pack("<II", 1, 2)
                + struct.pack("<H", 1) + b"a" + struct.pack("<B", 2) + struct.pack("<2I", 2, 1)
                + np.zeros(2, dtype="<f4").tobytes()
                + struct.pack("<H", 1) + b"b" + struct.pack("<B", 1) + struct.pack("<I", 1)
                + np.array([1.5], dtype="<f4").tobytes())
        assert blob == want

    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(0)
        tensors = {"w": rng.normal(size=(3, 4)).astype(np.float32), "s": np.float32(2.5),
                   "ünï": rng.normal(size=5).astype(np.float32)}
        save_tensors(tmp_path / "a", tensors)
        loaded = load_tensors(tmp_path / "a")
        for k, v in tensors.items():
            assert np.array_equal(loaded[k], v)
        save_tensors(tmp_path / "b", loaded)
        assert (tmp_path / "a").read_bytes() == (tmp_path / "b").read_bytes()

    @pytest.mark.parametrize("mangle, message", [
        (lambda b: b"XXXX" + b[4:], "magic"),
        (lambda b: b[:4] + struct.pack("<I", 9) + b[8:], "version"),
        (lambda b: b[:-3], "truncated"),
        (lambda b: b + b"\0", "trailing"),
    ])
    def test_corrupt_files(self, tmp_path, mangle, message):
        path = tmp_path / "c"
        save_tensors(path, {"w": np.ones((2, 2), dtype=np.float32)})
        path.write_bytes(mangle(path.read_bytes()))
        with pytest.raises(CheckpointError, match=message):
            load_tensors(path)
