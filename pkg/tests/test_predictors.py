import numpy as np
import pytest

from ppe.predictors import Biased, Constant, EwmaMean, OnlineLogistic
from ppe.rng import normals, substream, uniforms


class TestOnlineLogistic:
    def test_zero_init_predicts_half(self):
        model = OnlineLogistic(4)
        assert model.predict(np.zeros(4)) == 0.5
        dist = dict(model.predict_dist(np.ones(4)))
        assert dist[1.0] == pytest.approx(0.5)

    def test_separable_data_reaches_high_accuracy(self):
        # linearly separable toy set: accuracy >= 0.95 after 1e4 updates
        rng = substream(50, "sep")
        z, rng = normals(rng, 10_000 * 3)
        x = z.reshape(10_000, 3)
        y = (x @ np.array([1.0, -2.0, 0.5]) > 0).astype(float)
        model = OnlineLogistic(3)
        for xi, yi in zip(x, y):
            model.update(xi, yi)
        preds = np.array([model.predict(xi) > 0.5 for xi in x[:2000]])
        assert np.mean(preds == y[:2000].astype(bool)) >= 0.95

    def test_update_order_changes_weights_but_stays_deterministic(self):
        rng = substream(51, "order")
        z, rng = normals(rng, 50 * 2)
        x = z.reshape(50, 2)
        u, rng = uniforms(rng, 50)
        y = (u < 0.5).astype(float)

        def fit(order):
            model = OnlineLogistic(2)
            for idx in order:
                model.update(x[idx], y[idx])
            return model.weights.copy()

        forward = fit(range(50))
        forward_again = fit(range(50))
        backward = fit(range(49, -1, -1))
        assert np.array_equal(forward, forward_again)
        assert not np.array_equal(forward, backward)

    def test_non_finite_rows_skipped_with_warning(self):
        model = OnlineLogistic(2)
        with pytest.warns(UserWarning):
            model.update(np.array([np.nan, 1.0]), 1.0)
        assert model.skipped == 1 and model.updates == 0

    def test_probability_output_range(self):
        model = OnlineLogistic(2)
        rng = substream(52, "range")
        z, _ = normals(rng, 40)
        for k in range(0, 40, 2):
            model.update(z[k:k + 2], float(k % 2))
        p = model.predict(np.array([100.0, -100.0]))
        assert 0.0 <= p <= 1.0


class TestEwmaMean:
    def test_tracks_constant_stream(self):
        model = EwmaMean(init=0.5, gain=0.3)
        for _ in range(40):
            model.update(None, 1.0)
        assert model.predict(None) > 0.99

    def test_dist_sums_to_one(self):
        model = EwmaMean(init=0.3)
        dist = model.predict_dist(None)
        assert sum(p for _, p in dist) == pytest.approx(1.0)


class TestBiased:
    def test_shifts_and_clips(self):
        assert Biased(Constant(0.4), 0.15).predict(None) == pytest.approx(0.55)
        assert Biased(Constant(0.95), 0.15).predict(None) == 1.0
        assert Biased(Constant(0.05), -0.15).predict(None) == 0.0

    def test_updates_pass_through(self):
        base = EwmaMean(init=0.0, gain=1.0)
        wrapped = Biased(base, 0.1)
        wrapped.update(None, 0.5)
        assert base.value == 0.5
