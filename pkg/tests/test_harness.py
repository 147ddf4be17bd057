"""Harness checks: stream generation, comparator optimality against grid
oracles, bound formula arithmetic, feedback policies, and run accounting."""

import numpy as np
import pytest

from streamhedge.channels import bsc, identity_channel
from streamhedge.families import (
    bernoulli_product,
    certify_box,
    log_partition,
    make_box,
)
from streamhedge.filtering import Schedule, run_filter, true_loss
from streamhedge.harness import (
    PiecewiseSpec,
    best_static_tau,
    best_static_theta,
    best_static_theta_from_stats,
    comparator_from_spec,
    dynamic_regret_ledger,
    evaluate_run,
    generate_stream,
    make_experiment_spec,
    on_declared_miss_prob,
    prefix_static_losses,
    static_regret_ledger,
    theorem1_bound,
    theorem2_bound,
    truth_on_query,
)


def small_spec(seed=0, d=1, T=400, jumps=(100, 250), window=10):
    rng = np.random.default_rng(seed)
    starts = [1] + list(jumps)
    segments = tuple((s, rng.uniform(0.2, 0.8, d)) for s in starts)
    return PiecewiseSpec(d=d, T=T, segments=segments, anomaly_window=window, seed=seed)


class TestGenerateStream:
    def test_single_segment_all_nominal(self):
        spec = PiecewiseSpec(
            d=2, T=50, segments=((1, np.array([0.5, 0.5])),), anomaly_window=5, seed=1
        )
        _, y = generate_stream(spec)
        assert np.all(y == -1)

    def test_label_placement(self):
        spec = make_experiment_spec(seed=0, d=4, T=1000)
        _, y = generate_stream(spec)
        pos = np.where(y == 1)[0] + 1  # back to 1-indexed
        expected = np.concatenate(
            [np.arange(100, 125), np.arange(500, 525), np.arange(700, 725)]
        )
        np.testing.assert_array_equal(pos, expected)
        assert int(np.sum(y == 1)) == 75

    def test_empirical_mean(self):
        spec = PiecewiseSpec(
            d=1, T=10_000, segments=((1, np.array([0.5])),), anomaly_window=0, seed=3
        )
        x, _ = generate_stream(spec)
        assert abs(x.mean() - 0.5) < 0.02

    def test_deterministic(self):
        spec = small_spec(seed=9)
        x1, y1 = generate_stream(spec)
        x2, y2 = generate_stream(spec)
        np.testing.assert_array_equal(x1, x2)
        np.testing.assert_array_equal(y1, y2)

    def test_validation(self):
        with pytest.raises(ValueError):
            PiecewiseSpec(d=1, T=10, segments=(), anomaly_window=0, seed=0)
        with pytest.raises(ValueError):
            PiecewiseSpec(
                d=1,
                T=10,
                segments=((2, np.array([0.5])),),
                anomaly_window=0,
                seed=0,
            )

    def test_roundtrip_serialization(self, tmp_path):
        spec = small_spec(seed=4, d=3)
        path = tmp_path / "spec.json"
        spec.dump(path)
        back = PiecewiseSpec.load(path)
        assert back.T == spec.T and back.d == spec.d
        for (s1, b1), (s2, b2) in zip(spec.segments, back.segments):
            assert s1 == s2
            np.testing.assert_array_equal(b1, b2)


class TestPinnedSpec:
    def test_pinned_file_matches_generator(self):
        from streamhedge.harness import load_pinned_spec

        pinned = load_pinned_spec()
        fresh = make_experiment_spec(0)
        assert pinned.T == fresh.T and pinned.d == fresh.d
        for (s1, b1), (s2, b2) in zip(pinned.segments, fresh.segments):
            assert s1 == s2
            np.testing.assert_array_equal(b1, b2)


class TestBestStaticTheta:
    def test_all_ones_hits_boundary(self):
        model = bernoulli_product(1)
        box = make_box(model, -2, 2)
        theta, _ = best_static_theta(model, box, np.ones((20, 1)))
        assert theta[0] == 2.0

    def test_interior_stationarity(self):
        model = bernoulli_product(1)
        box = make_box(model, -2, 2)
        n, k = 1000, 668
        x = np.concatenate([np.ones((k, 1)), np.zeros((n - k, 1))])
        theta, _ = best_static_theta(model, box, x)
        mean = k / n
        assert theta[0] == pytest.approx(np.log(mean / (1 - mean)), abs=1e-12)

    def test_matches_grid_search(self):
        rng = np.random.default_rng(5)
        model = bernoulli_product(2)
        box = make_box(model, [-1.5, -1.0], [1.0, 2.0])
        x = (rng.random((50, 2)) < [0.3, 0.9]).astype(float)
        theta, loss = best_static_theta(model, box, x)
        # brute-force grid oracle
        grid0 = np.linspace(box.lo[0], box.hi[0], 201)
        grid1 = np.linspace(box.lo[1], box.hi[1], 201)
        best = np.inf
        ssum = x.sum(axis=0)
        for a in grid0:
            for b in grid1:
                th = np.array([a, b])
                val = 50 * log_partition(model, th) - float(th @ ssum)
                best = min(best, val)
        assert loss <= best + 1e-9
        step = max(grid0[1] - grid0[0], grid1[1] - grid1[0])
        assert loss >= best - 0.5 * step  # grid resolution slack

    def test_prefix_losses_match_direct(self):
        rng = np.random.default_rng(6)
        model = bernoulli_product(3)
        box = make_box(model, -1.2, 1.2)
        h = rng.normal(0.4, 0.6, (40, 3))
        thetas, losses = prefix_static_losses(model, box, h)
        for t in (1, 7, 40):
            th, loss = best_static_theta_from_stats(
                model, box, h[:t].sum(axis=0), t
            )
            np.testing.assert_allclose(thetas[t - 1], th, atol=1e-12)
            assert losses[t - 1] == pytest.approx(loss, abs=1e-9)


class TestBestStaticTau:
    def test_perfectly_separable(self):
        zetas = np.array([0.1, 0.15, 0.8, 0.9, 0.85])
        ys = np.array([1, 1, -1, -1, -1])
        tau, mistakes = best_static_tau(zetas, ys, 0.0, 1.0)
        assert mistakes == 0
        assert 0.15 < tau <= 0.8

    def test_all_nominal_prefers_smallest_tau(self):
        zetas = np.array([0.5, 0.6, 0.7])
        ys = np.array([-1, -1, -1])
        tau, mistakes = best_static_tau(zetas, ys, 0.0, 1.0)
        assert mistakes == 0
        assert tau == 0.0

    def test_matches_dense_grid(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            T = 200
            zetas = rng.normal(0, 1, T)
            ys = np.where(rng.random(T) < 0.3, 1, -1)
            tau, mistakes = best_static_tau(zetas, ys, -2.0, 2.0)
            grid = np.linspace(-2, 2, 100_001)
            flags = zetas[None, :] < grid[:, None]
            preds = np.where(flags, 1, -1)
            grid_mistakes = np.min(np.sum(preds != ys[None, :], axis=1))
            assert mistakes == grid_mistakes

    def test_never_beaten_by_random_grid(self):
        rng = np.random.default_rng(8)
        for _ in range(1000):
            T = rng.integers(5, 60)
            zetas = rng.normal(0, 1, T)
            ys = np.where(rng.random(T) < 0.5, 1, -1)
            _, mistakes = best_static_tau(zetas, ys, -3.0, 3.0)
            taus = rng.uniform(-3, 3, 50)
            preds = np.where(zetas[None, :] < taus[:, None], 1, -1)
            assert mistakes <= int(np.min(np.sum(preds != ys[None, :], axis=1)))

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            best_static_tau(np.array([]), np.array([]), 0, 1)


class TestBoundFormulas:
    def test_theorem1_degenerate(self):
        assert theorem1_bound(3.0, 0.0, 0.0, 0.5, 1) == pytest.approx(3.0)

    def test_theorem1_concrete(self):
        # (1+1)^2 / 0.05 * (log 1000 + 1)
        want = 4.0 / 0.05 * (np.log(1000.0) + 1.0)
        assert theorem1_bound(0.0, 1.0, 1.0, 0.05, 1000) == pytest.approx(want)
        assert want == pytest.approx(632.6, abs=0.1)

    def test_theorem1_monotonicity(self):
        base = theorem1_bound(1.0, 1.0, 1.0, 0.1, 100)
        assert theorem1_bound(1.0, 2.0, 1.0, 0.1, 100) > base
        assert theorem1_bound(1.0, 1.0, 2.0, 0.1, 100) > base
        assert theorem1_bound(1.0, 1.0, 1.0, 0.2, 100) < base
        assert theorem1_bound(1.0, 1.0, 1.0, 0.1, 200) > base

    def test_theorem2_zero_variation(self):
        got = theorem2_bound(1.0, 2.0, 1.0, 1.0, 0.5, 0.0, 100)
        want = 1.0 + 2.0 * np.sqrt(101.0) + 8.0 * (2 * 10 - 1)
        assert got == pytest.approx(want)

    def test_theorem2_concrete_substitution(self):
        # independent arithmetic for D1 + D sqrt(T+1) + 4 M sqrt(T) V + (K+M)^2/H (2 sqrt(T)-1)
        d1, dmax, k, m, h, v, T = 0.3, 5.0, 1.2, 0.8, 0.04, 2.5, 400
        want = 0.3 + 5.0 * np.sqrt(401) + 4 * 0.8 * 20 * 2.5 + (2.0**2) / 0.04 * 39
        assert theorem2_bound(d1, dmax, k, m, h, v, T) == pytest.approx(want)


class TestLedgers:
    def _run(self, channel, schedule, seed=0, d=3, T=300):
        spec = small_spec(seed=seed, d=d, T=T, jumps=(120, 200), window=8)
        model = bernoulli_product(d)
        box = certify_box(model, make_box(model, -2, 2))
        x, _ = generate_stream(spec)
        rng = np.random.default_rng(seed + 1000)
        from streamhedge.channels import corrupt

        zs = [corrupt(channel, model, xi, rng) for xi in x]
        trace = run_filter(
            model, box, channel, schedule, None, zs, x_stream=x, keep_h=True
        )
        return spec, model, box, trace

    def test_static_ledger_pathwise(self):
        for channel in (identity_channel(), bsc(0.1)):
            spec, model, box, trace = self._run(channel, Schedule.INVERSE_T)
            ledger = static_regret_ledger(model, box, trace, box.midpoint())
            assert ledger.violations() == 0
            assert len(ledger.regret) == spec.T

    def test_dynamic_ledger_pathwise(self):
        for channel in (identity_channel(), bsc(0.1)):
            spec, model, box, trace = self._run(channel, Schedule.INVERSE_SQRT_T)
            comp = comparator_from_spec(spec, model, box)
            ledger = dynamic_regret_ledger(model, box, trace, comp, box.midpoint())
            assert ledger.violations() == 0

    def test_k_series_nondecreasing(self):
        _, _, _, trace = self._run(bsc(0.1), Schedule.INVERSE_T)
        ks = np.asarray(trace.k_series)
        assert np.all(np.diff(ks) >= 0)


class TestOracles:
    def test_truth_on_query(self):
        labels = np.array([1, -1, 1])
        oracle = truth_on_query(labels)
        assert oracle(1, -1) == 1
        assert oracle(2, 1) == -1

    def test_miss_prob_zero_only_on_declared(self):
        labels = np.ones(100, dtype=int)
        provider = on_declared_miss_prob(labels, 0.0, np.random.default_rng(0))
        assert provider(5, 1) == 1
        assert provider(5, -1) is None

    def test_miss_prob_rate(self):
        labels = np.ones(10_000, dtype=int)
        provider = on_declared_miss_prob(labels, 0.2, np.random.default_rng(1))
        got = sum(provider(t, -1) is not None for t in range(1, 10_001))
        assert abs(got / 10_000 - 0.2) < 0.02


class TestStreamAbort:
    def test_oracle_failure_preserves_partial_trace(self):
        from streamhedge.harness import StreamAbort, run_hedge_label_efficient
        from streamhedge.hedging import new_hedge_state

        calls = {"n": 0}

        def flaky(t, y_hat):
            calls["n"] += 1
            if calls["n"] >= 3:
                raise IOError("oracle connection lost")
            return 1

        zetas = np.full(50, 0.5)  # zeta == tau: queries every round
        state = new_hedge_state(0.5, 1.5, eta=0.1, tau_init=0.5)
        with pytest.raises(StreamAbort) as err:
            run_hedge_label_efficient(zetas, state, np.random.default_rng(0), flaky)
        partial = err.value.partial
        assert len(partial.y_hat) == 2
        assert partial.final_state is not None


class TestEvaluateRun:
    def test_perfect_predictions(self):
        y = np.array([1, -1, 1, -1])
        rep = evaluate_run(y, y)
        assert rep["total_errors"] == 0

    def test_inverted_predictions(self):
        y = np.array([1, -1, 1, -1])
        rep = evaluate_run(-y, y)
        assert rep["total_errors"] == 4
        assert rep["false_alarms"] == 2
        assert rep["detection_misses"] == 2

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            evaluate_run(np.array([1]), np.array([1, -1]))


class TestSpikeAndVariance:
    def test_log_loss_spikes_at_jumps(self):
        spec = make_experiment_spec(seed=3, d=200, T=600, jumps=(150, 400))
        model = bernoulli_product(200)
        box = certify_box(model, make_box(model, -2.6, 2.6))
        x, _ = generate_stream(spec)
        trace = run_filter(
            model, box, identity_channel(), Schedule.INVERSE_SQRT_T, None,
            list(x), x_stream=list(x),
        )
        tl = np.array(trace.true_losses)
        for jump in (150, 400):
            after = tl[jump - 1 : jump + 9].mean()
            before = tl[jump - 51 : jump - 1].mean()
            assert after > before

    def test_noisy_variance_exceeds_clean(self):
        spec = make_experiment_spec(seed=4, d=200, T=600, jumps=(150, 400))
        model = bernoulli_product(200)
        box = certify_box(model, make_box(model, -2.6, 2.6))
        x, _ = generate_stream(spec)
        clean = run_filter(
            model, box, identity_channel(), Schedule.INVERSE_SQRT_T, None, list(x)
        )
        rng = np.random.default_rng(99)
        from streamhedge.channels import corrupt

        channel = bsc(0.1)
        zs = [corrupt(channel, model, xi, rng) for xi in x]
        noisy = run_filter(model, box, channel, Schedule.INVERSE_SQRT_T, None, zs)
        assert np.var(noisy.filtering_losses) > np.var(clean.filtering_losses)
