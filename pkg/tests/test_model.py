import numpy as np
import pytest

from dualign.errors import ShapeError
from dualign.model import Adam, StudentModel
from dualign.seeding import rng_for


@pytest.fixture
def model():
    return StudentModel.init(d_in=8, hidden=16, text_dim=12, shared_dim=6,
                             dropout=0.1, seed=0)


class TestForwardTwoViews:
    def test_no_dropout_views_identical(self):
        m = StudentModel.init(d_in=8, hidden=16, text_dim=12, shared_dim=6,
                              dropout=0.0, seed=0)
        x = rng_for(1, "x").standard_normal((4, 8))
        (a, _), (b, _) = m.forward_two_views(x, "shared", seed=3)
        assert np.array_equal(a, b)

    def test_same_seed_reproducible(self, model):
        x = rng_for(1, "x").standard_normal((4, 8))
        (a1, _), (b1, _) = model.forward_two_views(x, "shared", seed=3)
        (a2, _), (b2, _) = model.forward_two_views(x, "shared", seed=3)
        assert np.array_equal(a1, a2)
        assert np.array_equal(b1, b2)

    def test_views_differ_with_dropout(self, model):
        x = rng_for(1, "x").standard_normal((4, 8))
        differing = 0
        for seed in range(10):
            (a, _), (b, _) = model.forward_two_views(x, "shared", seed=seed)
            if not np.array_equal(a, b):
                differing += 1
        assert differing == 10

    def test_dim_mismatch(self, model):
        with pytest.raises(ShapeError):
            model.forward(np.zeros((2, 5)), "text", None)

    def test_head_shapes(self, model):
        x = np.zeros((3, 8))
        t, _ = model.forward(x, "text", None)
        s, _ = model.forward(x, "shared", None)
        assert t.shape == (3, 12)
        assert s.shape == (3, 6)


class TestBackward:
    def test_parameter_gradients_match_finite_differences(self, model):
        rng = rng_for(2, "x")
        x = rng.standard_normal((5, 8))
        g_out = rng.standard_normal((5, 6))
        mask_rng = rng_for(2, "mask")
        out, cache = model.forward(x, "shared", mask_rng)
        grads = model.backward(cache, g_out)

        def value(params):
            saved = model.params
            model.params = params
            # replay the same dropout masks via the cache
            p = params
            a1 = x @ p["enc.w1"] + p["enc.b1"]
            h1 = np.tanh(a1) * cache["m1"]
            a2 = h1 @ p["enc.w2"] + p["enc.b2"]
            h2 = np.tanh(a2) * cache["m2"]
            out2 = h2 @ p["shared.w"] + p["shared.b"]
            model.params = saved
            return float((out2 * g_out).sum())

        h = 1e-6
        for name in ("enc.w1", "enc.b2", "shared.w", "shared.b"):
            base = model.params[name]
            it = np.nditer(base, flags=["multi_index"])
            checked = 0
            for _ in it:
                idx = it.multi_index
                if checked > 20:
                    break
                checked += 1
                plus = {k: v.copy() for k, v in model.params.items()}
                minus = {k: v.copy() for k, v in model.params.items()}
                plus[name][idx] += h
                minus[name][idx] -= h
                fd = (value(plus) - value(minus)) / (2 * h)
                assert grads[name][idx] == pytest.approx(fd, abs=1e-5, rel=1e-5)


class TestAdam:
    def test_zero_lr_leaves_params_untouched(self):
        params = {"w": np.ones((2, 2))}
        before = params["w"].tobytes()
        opt = Adam(params, lr=0.0)
        opt.step(params, {"w": np.full((2, 2), 3.0)})
        assert params["w"].tobytes() == before

    def test_step_moves_against_gradient(self):
        params = {"w": np.zeros(3)}
        opt = Adam(params, lr=0.1)
        opt.step(params, {"w": np.array([1.0, -1.0, 0.5])})
        assert params["w"][0] < 0 < params["w"][1]
