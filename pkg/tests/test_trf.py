"""Lag grids, Hamming bases, kernel application, and boosting estimation."""

import numpy as np
import pytest

from aadkit import (
    BoostConfig,
    DegenerateBasis,
    DegenerateInput,
    DimensionMismatch,
    FeatureSeries,
    KernelSpec,
    LagGrid,
    MissingValidation,
    RateMismatch,
    TimeSeries,
    TRFKernel,
    expand,
    fit_boosting,
    make_basis,
    make_ground_truth_kernel,
    predict_forward,
    reconstruct_backward,
)

RATE = 50.0


def white_feature(n, seed=0, kind="envelope"):
    rng = np.random.default_rng(seed)
    return FeatureSeries(rng.standard_normal(n), RATE, kind)


def impulse_kernel(grid, lag, amp=1.0, channel=0, n_channels=1,
                   direction="forward"):
    h = np.zeros((n_channels, grid.n_lags))
    h[channel, list(grid.lags).index(lag)] = amp
    return TRFKernel(h, grid, direction)


class TestLagGrid:
    def test_default_span(self):
        grid = LagGrid(-1.0, 1.0, RATE)
        assert (grid.l1, grid.l2, grid.n_lags) == (-50, 50, 101)
        np.testing.assert_array_equal(grid.lags, np.arange(-50, 51))
        np.testing.assert_allclose(grid.times, np.arange(-50, 51) / RATE)

    def test_asymmetric_span(self):
        grid = LagGrid(-0.2, 0.5, RATE)
        assert (grid.l1, grid.l2, grid.n_lags) == (-10, 25, 36)

    def test_ordering_enforced(self):
        with pytest.raises(DimensionMismatch):
            LagGrid(0.5, -0.5, RATE)

    def test_needs_two_lags(self):
        with pytest.raises(DimensionMismatch):
            LagGrid(0.0, 0.004, RATE)  # both endpoints round to lag 0

    def test_equality_is_by_value(self):
        assert LagGrid(0.0, 0.5, RATE) == LagGrid(0.0, 0.5, RATE)
        assert LagGrid(0.0, 0.5, RATE) != LagGrid(0.0, 0.5, 100.0)


class TestMakeBasis:
    def test_one_function_per_lag(self):
        basis = make_basis(LagGrid(-1.0, 1.0, RATE))
        assert basis.functions.shape == (101, 101)

    def test_three_sample_window(self):
        # 50 ms at 50 Hz spans 2.5 samples, rounded up to the odd 3;
        # hamming(n) = 0.54 - 0.46 cos(2 pi n / (N-1))
        basis = make_basis(LagGrid(-0.2, 0.2, RATE), width=0.05)
        mid = 10  # center lag of 21
        row = basis.functions[mid]
        np.testing.assert_allclose(row[mid - 1: mid + 2],
                                   [0.08, 1.0, 0.08], atol=1e-15)
        assert np.all(row[: mid - 1] == 0.0)
        assert np.all(row[mid + 2:] == 0.0)

    def test_truncation_at_edges(self):
        basis = make_basis(LagGrid(-0.2, 0.2, RATE), width=0.05)
        first, last = basis.functions[0], basis.functions[-1]
        np.testing.assert_allclose(first[:2], [1.0, 0.08], atol=1e-15)
        assert np.all(first[2:] == 0.0)
        np.testing.assert_allclose(last[-2:], [0.08, 1.0], atol=1e-15)
        assert np.all(last[:-2] == 0.0)

    def test_minimum_support_is_three(self):
        basis = make_basis(LagGrid(-0.2, 0.2, RATE), width=0.021)
        center = basis.functions[10]
        assert np.count_nonzero(center) == 3

    def test_degenerate_width(self):
        with pytest.raises(DegenerateBasis):
            make_basis(LagGrid(-0.2, 0.2, RATE), width=0.01)

    def test_one_hot_expansion_identity(self):
        basis = make_basis(LagGrid(-0.1, 0.1, RATE))
        for p in (0, 3, 10):
            w = np.zeros(basis.n_functions)
            w[p] = 1.0
            k = expand(w, basis)
            np.testing.assert_array_equal(k.h[0], basis.functions[p])


class TestExpand:
    BASIS = make_basis(LagGrid(-0.04, 0.04, RATE))  # P = 5

    def test_zero_weights_zero_kernel(self):
        k = expand(np.zeros(5), self.BASIS)
        np.testing.assert_array_equal(k.h, 0.0)

    def test_linearity(self):
        rng = np.random.default_rng(0)
        w1, w2 = rng.standard_normal((2, 5))
        lhs = expand(w1 + w2, self.BASIS).h
        rhs = expand(w1, self.BASIS).h + expand(w2, self.BASIS).h
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_matches_explicit_sum(self):
        rng = np.random.default_rng(1)
        w = rng.standard_normal(5)
        manual = sum(w[p] * self.BASIS.functions[p] for p in range(5))
        np.testing.assert_allclose(expand(w, self.BASIS).h[0], manual,
                                   atol=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(DimensionMismatch):
            expand(np.zeros(4), self.BASIS)

    def test_expansion_invariant_enforced(self):
        basis = self.BASIS
        w = np.ones((1, 5))
        good = w @ basis.functions
        with pytest.raises(DimensionMismatch):
            TRFKernel(good + 1.0, basis.grid, "forward", weights=w,
                      basis=basis)


class TestPredictForward:
    GRID = LagGrid(-0.06, 0.06, RATE)  # lags -3 .. 3

    def test_identity_kernel(self):
        x = white_feature(40)
        k = impulse_kernel(self.GRID, lag=0)
        np.testing.assert_allclose(predict_forward(k, x).data[0], x.values,
                                   atol=1e-15)

    def test_shift_kernel(self):
        x = white_feature(40, seed=2)
        k = impulse_kernel(self.GRID, lag=2, amp=1.5)
        y = predict_forward(k, x).data[0]
        np.testing.assert_allclose(y[2:], 1.5 * x.values[:-2], atol=1e-15)
        np.testing.assert_array_equal(y[:2], 0.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(3)
        h = rng.standard_normal((3, 7))
        k = TRFKernel(h, self.GRID, "forward")
        x = white_feature(50, seed=4)
        y = predict_forward(k, x)
        brute = np.zeros((3, 50))
        for i in range(3):
            for t in range(50):
                for j, lag in enumerate(self.GRID.lags):
                    if 0 <= t - lag < 50:
                        brute[i, t] += h[i, j] * x.values[t - lag]
        np.testing.assert_allclose(y.data, brute, atol=1e-12)

    def test_rate_mismatch(self):
        x = FeatureSeries(np.zeros(10), 100.0, "envelope")
        with pytest.raises(RateMismatch):
            predict_forward(impulse_kernel(self.GRID, 0), x)

    def test_backward_kernel_rejected(self):
        x = white_feature(10)
        k = impulse_kernel(self.GRID, 0, direction="backward")
        with pytest.raises(DimensionMismatch):
            predict_forward(k, x)

    def test_linear_in_signal(self):
        rng = np.random.default_rng(5)
        k = TRFKernel(rng.standard_normal((2, 7)), self.GRID, "forward")
        a = white_feature(60, seed=6)
        b = white_feature(60, seed=7)
        mixed = FeatureSeries(2.0 * a.values - 0.5 * b.values, RATE,
                              "envelope")
        lhs = predict_forward(k, mixed).data
        rhs = 2.0 * predict_forward(k, a).data - 0.5 * predict_forward(k, b).data
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)


class TestReconstructBackward:
    GRID = LagGrid(-0.2, 0.2, RATE)  # lags -10 .. 10

    def test_identity_kernel(self):
        rng = np.random.default_rng(8)
        eeg = TimeSeries(rng.standard_normal((1, 40)), RATE, ("c0",))
        k = impulse_kernel(self.GRID, 0, direction="backward")
        np.testing.assert_allclose(reconstruct_backward(k, eeg).values,
                                   eeg.data[0], atol=1e-15)

    def test_anticausal_shift(self):
        rng = np.random.default_rng(9)
        eeg = TimeSeries(rng.standard_normal((3, 40)), RATE,
                         ("c0", "c1", "c2"))
        k = impulse_kernel(self.GRID, lag=4, channel=1, n_channels=3,
                           direction="backward")
        xh = reconstruct_backward(k, eeg).values
        np.testing.assert_allclose(xh[:-4], eeg.data[1][4:], atol=1e-15)
        np.testing.assert_array_equal(xh[-4:], 0.0)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(10)
        h = rng.standard_normal((4, self.GRID.n_lags))
        k = TRFKernel(h, self.GRID, "backward")
        eeg = TimeSeries(rng.standard_normal((4, 60)), RATE,
                         tuple(f"c{i}" for i in range(4)))
        xh = reconstruct_backward(k, eeg).values
        brute = np.zeros(60)
        for t in range(60):
            for i in range(4):
                for j, lag in enumerate(self.GRID.lags):
                    if 0 <= t + lag < 60:
                        brute[t] += h[i, j] * eeg.data[i, t + lag]
        np.testing.assert_allclose(xh, brute, atol=1e-12)

    def test_channel_mismatch(self):
        eeg = TimeSeries(np.zeros((2, 30)), RATE, ("a", "b"))
        k = impulse_kernel(self.GRID, 0, direction="backward")
        with pytest.raises(DimensionMismatch):
            reconstruct_backward(k, eeg)

    def test_forward_backward_link(self):
        # The forward kernel reused anti-causally is a matched filter for
        # its own output and must beat the zero-kernel baseline of r = 0.
        grid = LagGrid(0.0, 0.2, RATE)
        rng = np.random.default_rng(11)
        h = rng.standard_normal((1, grid.n_lags))
        x = white_feature(2000, seed=12)
        y = predict_forward(TRFKernel(h, grid, "forward"), x)
        kb = TRFKernel(h, grid, "backward")
        xh = reconstruct_backward(kb, y).values
        r = np.corrcoef(xh[50:-50], x.values[50:-50])[0, 1]
        assert r > 0.3


def shift_fixture(n=1000, grid_span=(-0.2, 0.2), seed=0):
    """Noiseless y = 2 x(t-1) regression problem."""
    grid = LagGrid(*grid_span, RATE)
    x = white_feature(n, seed=seed)
    k_true = impulse_kernel(grid, lag=1, amp=2.0)
    y = predict_forward(k_true, x)
    return x, y, grid


class TestFitBoosting:
    def test_shift_example_bounds(self):
        x, y, grid = shift_fixture()
        k = fit_boosting(x, y, grid, make_basis(grid), BoostConfig())
        at_one = list(grid.lags).index(1)
        assert abs(k.h[0, at_one] - 2.0) < 0.1
        others = np.delete(k.h[0], at_one)
        assert np.sum(np.abs(others)) < 0.2

    def test_shift_example_solution_structure(self):
        # Deconvolving a pure delay through the 3-sample Hamming basis gives
        # exactly five active coordinates: the center, its two correcting
        # neighbors, and two single-step shoulders of one delta each.
        x, y, grid = shift_fixture()
        k = fit_boosting(x, y, grid, make_basis(grid), BoostConfig())
        w = k.weights[0]
        nonzero = grid.lags[np.flatnonzero(w)]
        np.testing.assert_array_equal(nonzero, [-1, 0, 1, 2, 3])
        np.testing.assert_allclose(w[np.flatnonzero(w)][[0, 4]],
                                   w[np.flatnonzero(w)][[4, 0]])
        # step size comes from the training portion, the first 80% here
        delta = 0.005 * np.std(y.data[0, :800]) / np.std(x.values[:800])
        assert w[np.flatnonzero(w)][0] == pytest.approx(delta, abs=1e-12)

    def test_sparsity_with_default_grid(self):
        # On the full default lag span the solution stays >80% exact zeros.
        x, y, _ = shift_fixture()
        grid = LagGrid(-1.0, 1.0, RATE)
        k = fit_boosting(x, y, grid, make_basis(grid), BoostConfig())
        assert np.mean(k.weights[0] == 0.0) > 0.8

    def test_train_mae_non_increasing(self):
        x, y, grid = shift_fixture(seed=3)
        k = fit_boosting(x, y, grid, make_basis(grid), BoostConfig())
        mae = np.asarray(k.fit.train_mae)
        assert np.all(np.diff(mae) <= 0.0)

    def test_validation_never_worse_than_zero_kernel(self):
        x, y, grid = shift_fixture(seed=4)
        k = fit_boosting(x, y, grid, make_basis(grid), BoostConfig())
        assert k.fit.val_mae[k.fit.best_step] <= k.fit.val_mae[0]

    def test_deterministic(self):
        x, y, grid = shift_fixture(seed=5)
        basis = make_basis(grid)
        k1 = fit_boosting(x, y, grid, basis, BoostConfig())
        k2 = fit_boosting(x, y, grid, basis, BoostConfig())
        np.testing.assert_array_equal(k1.h, k2.h)
        assert k1.fit == k2.fit

    def test_noisy_recovery_per_channel(self):
        # 0 dB additive noise, 600 s: fitted kernels stay close to truth.
        grid = LagGrid(0.0, 0.4, RATE)
        spec = KernelSpec(channel_gains=(1.0, 0.7))
        k_true = make_ground_truth_kernel(spec, grid)
        x = white_feature(30000, seed=6)
        clean = predict_forward(k_true, x)
        rng = np.random.default_rng(7)
        noise = rng.standard_normal(clean.data.shape)
        noise *= clean.data.std(axis=1, keepdims=True)
        y = clean.with_data(clean.data + noise)
        k = fit_boosting(x, y, grid, make_basis(grid), BoostConfig())
        for i in range(2):
            r = np.corrcoef(k.h[i], k_true.h[i])[0, 1]
            assert r >= 0.9

    def test_backward_direction(self):
        # EEG channels are lagged copies of the feature, so the feature is
        # exactly reconstructible and the fit should get close.
        x = white_feature(4000, seed=8)
        grid = LagGrid(0.0, 0.2, RATE)
        eeg_data = np.vstack([
            np.roll(x.values, 2),  # x(t) = y0(t + 2)
            np.roll(x.values, 5),
        ])
        eeg = TimeSeries(eeg_data, RATE, ("c0", "c1"))
        k = fit_boosting(eeg, x, grid, make_basis(grid), BoostConfig())
        assert k.direction == "backward"
        xh = reconstruct_backward(k, eeg).values
        assert np.corrcoef(xh[50:-50], x.values[50:-50])[0, 1] > 0.95

    def test_multi_segment_validation(self):
        x1, y1, grid = shift_fixture(seed=9, n=600)
        x2, y2, _ = shift_fixture(seed=10, n=600)
        basis = make_basis(grid)
        cfg = BoostConfig(validation_fraction=None, validation_segments=(1,))
        k = fit_boosting([x1, x2], [y1, y2], grid, basis, cfg)
        at_one = list(grid.lags).index(1)
        assert abs(k.h[0, at_one] - 2.0) < 0.1

    def test_missing_validation(self):
        x, y, grid = shift_fixture()
        cfg = BoostConfig(validation_fraction=None)
        with pytest.raises(MissingValidation):
            fit_boosting(x, y, grid, make_basis(grid), cfg)

    def test_degenerate_input(self):
        _, y, grid = shift_fixture()
        flat = FeatureSeries(np.zeros(1000), RATE, "envelope")
        with pytest.raises(DegenerateInput):
            fit_boosting(flat, y, grid, make_basis(grid), BoostConfig())

    def test_rate_mismatch(self):
        x, y, grid = shift_fixture()
        bad = FeatureSeries(x.values, 100.0, "envelope")
        with pytest.raises(RateMismatch):
            fit_boosting(bad, y, grid, make_basis(grid), BoostConfig())

    def test_step_fraction_bounds(self):
        with pytest.raises(DimensionMismatch):
            BoostConfig(step_fraction=0.0)
        with pytest.raises(DimensionMismatch):
            BoostConfig(patience=0)
