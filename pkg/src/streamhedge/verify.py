"""Reduced-scale invariant battery behind ``streamhedge verify``.

Runs the same families of checks as the full acceptance suite, scaled to
finish in well under a minute: exact identities, duality round-trips,
pathwise regret ceilings, the martingale balance, threshold mistake
bounds, coupling identities, and oracle equivalences.  Each check prints
one PASS/FAIL line; the battery returns the failure count.

Oracles here are self-contained (enumeration, finite differences, golden
section) so a defect in the production path cannot hide inside its own
checker.
"""

from __future__ import annotations

import math
from typing import Callable

import numpy as np

from .channels import bsc, corrupt, identity_channel, unbiased_stat
from .families import (
    bernoulli_product,
    certify_box,
    gaussian_unit_var,
    grad_log_partition,
    ising_exact,
    kl_divergence,
    log_density,
    log_partition,
    make_box,
)
from .filtering import (
    FilterRun,
    Schedule,
    bregman_project,
    filtering_loss,
    loss_gradient,
    run_filter,
)
from .harness import (
    best_static_tau,
    comparator_from_spec,
    dynamic_regret_ledger,
    generate_stream,
    make_experiment_spec,
    static_regret_ledger,
    always_provide,
    run_hedge_arbitrary,
    run_hedge_full,
    run_hedge_label_efficient,
)
from .hedging import hinge_loss, new_hedge_state

__all__ = ["run_battery"]


def _golden_section(f: Callable[[float], float], lo: float, hi: float) -> float:
    phi = (math.sqrt(5) - 1) / 2
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(200):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = f(d)
        if b - a < 1e-12:
            break
    return 0.5 * (a + b)


def _check_strong_convexity(n=2000) -> bool:
    rng = np.random.default_rng(0)
    models = [bernoulli_product(5), gaussian_unit_var(3), ising_exact(3, [(0, 1), (1, 2)])]
    for i in range(n):
        model = models[i % len(models)]
        a = rng.uniform(-2, 2, model.dim)
        b = rng.uniform(-2, 2, model.dim)
        h = rng.normal(size=model.dim) * 2
        lhs = (
            filtering_loss(model, a, h)
            - filtering_loss(model, b, h)
            - float(np.dot(loss_gradient(model, b, h), a - b))
        )
        d = kl_divergence(model, b, a)
        if abs(lhs - d) > 1e-8 * (1 + abs(d)):
            return False
    return True


def _check_duality(n=200) -> bool:
    rng = np.random.default_rng(1)
    from .families import inverse_grad

    models = [bernoulli_product(4), gaussian_unit_var(4), ising_exact(3, [(0, 1)])]
    for model in models:
        for _ in range(n):
            theta = rng.uniform(-2.5, 2.5, model.dim)
            back = inverse_grad(model, grad_log_partition(model, theta))
            if np.max(np.abs(back - theta)) > 1e-8:
                return False
    return True


def _check_gradients(n=30) -> bool:
    rng = np.random.default_rng(2)
    models = [bernoulli_product(4), gaussian_unit_var(4), ising_exact(3, [(0, 1), (1, 2)])]
    for model in models:
        for _ in range(n):
            theta = rng.uniform(-2, 2, model.dim)
            g = grad_log_partition(model, theta)
            eps = 1e-6
            for i in range(model.dim):
                up, dn = theta.copy(), theta.copy()
                up[i] += eps
                dn[i] -= eps
                fd = (log_partition(model, up) - log_partition(model, dn)) / (2 * eps)
                if abs(g[i] - fd) > 1e-6 * max(1.0, abs(fd)):
                    return False
    return True


def _check_pathwise_theorem1(seeds=5) -> bool:
    model = bernoulli_product(5)
    box = certify_box(model, make_box(model, -2, 2))
    for seed in range(seeds):
        spec = make_experiment_spec(seed, d=5, T=800, jumps=(200, 500))
        x, _ = generate_stream(spec)
        for channel in (identity_channel(), bsc(0.1)):
            rng = np.random.default_rng([21, seed])
            zs = [corrupt(channel, model, xi, rng) for xi in x]
            trace = run_filter(
                model, box, channel, Schedule.INVERSE_T, None, zs, keep_h=True
            )
            if static_regret_ledger(model, box, trace, box.midpoint()).violations():
                return False
    return True


def _check_pathwise_theorem2(seeds=5) -> bool:
    model = bernoulli_product(5)
    box = certify_box(model, make_box(model, -2, 2))
    for seed in range(seeds):
        spec = make_experiment_spec(seed, d=5, T=800, jumps=(200, 500))
        x, _ = generate_stream(spec)
        comp = comparator_from_spec(spec, model, box)
        for channel in (identity_channel(), bsc(0.1)):
            rng = np.random.default_rng([22, seed])
            zs = [corrupt(channel, model, xi, rng) for xi in x]
            trace = run_filter(
                model, box, channel, Schedule.INVERSE_SQRT_T, None, zs, keep_h=True
            )
            ledger = dynamic_regret_ledger(model, box, trace, comp, box.midpoint())
            if ledger.violations():
                return False
    return True


def _check_martingale(reps=60) -> bool:
    model = bernoulli_product(5)
    box = certify_box(model, make_box(model, -2, 2))
    spec = make_experiment_spec(0, d=5, T=300, jumps=(150,))
    x, _ = generate_stream(spec)
    channel = bsc(0.1)
    diffs = []
    for rep in range(reps):
        rng = np.random.default_rng([23, rep])
        run = FilterRun(model, box, channel, Schedule.INVERSE_T, None)
        for xi in x:
            run.step(corrupt(channel, model, xi, rng), x_clean=xi)
        diffs.append(
            float(np.sum(run.trace.filtering_losses) - np.sum(run.trace.true_losses))
        )
    diffs = np.array(diffs)
    return abs(diffs.mean()) <= 4 * diffs.std(ddof=1) / math.sqrt(reps)


def _fuzz_sequences(rng, T):
    zetas = rng.normal(0.5, 0.35, T)
    kind = rng.integers(0, 3)
    if kind == 0:
        ys = np.where(rng.random(T) < 0.5, 1, -1)
    elif kind == 1:
        ys = np.ones(T, dtype=int)
    else:
        ys = -np.ones(T, dtype=int)
    return zetas, ys


def _check_theorem4(n_seq=100, T=256) -> bool:
    rng = np.random.default_rng(3)
    grid = np.linspace(0.0, 1.0, 101)
    for _ in range(n_seq):
        zetas, ys = _fuzz_sequences(rng, T)
        run = run_hedge_full(zetas, ys, new_hedge_state(0.0, 1.0, horizon=T))
        mistakes = int(np.sum(run.y_hat != ys))
        for tau in grid:
            hinge = sum(hinge_loss(tau, z, int(y)) for z, y in zip(zetas, ys))
            if mistakes > hinge + math.sqrt(T) + 1e-9:
                return False
    return True


def _check_theorem6(n_seq=100, T=256) -> bool:
    rng = np.random.default_rng(4)
    grid = np.linspace(0.0, 1.0, 101)
    for _ in range(n_seq):
        zetas, ys = _fuzz_sequences(rng, T)
        provided = rng.random(T) < 0.4
        state = new_hedge_state(0.0, 1.0, horizon=T)
        provider = lambda t, y_hat: int(ys[t - 1]) if provided[t - 1] else None
        run = run_hedge_arbitrary(zetas, state, provider)
        m = int(np.sum(provided))
        eps = m / T
        idx = np.where(provided)[0]
        mistakes = int(np.sum(run.y_hat[idx] != ys[idx]))
        for tau in grid:
            hinge = sum(hinge_loss(tau, zetas[i], int(ys[i])) for i in idx)
            if mistakes > hinge + (1 + eps) / 2 * math.sqrt(T) + 1e-9:
                return False
    return True


def _check_coupling() -> bool:
    rng = np.random.default_rng(5)
    zetas = rng.normal(0.5, 0.4, 400)
    ys = np.where(rng.random(400) < 0.4, 1, -1)

    class _Zero:
        def random(self):
            return 0.0

    full = run_hedge_full(zetas, ys, new_hedge_state(0.0, 1.0, horizon=400))
    le = run_hedge_label_efficient(
        zetas,
        new_hedge_state(0.0, 1.0, horizon=400),
        _Zero(),
        lambda t, yh: int(ys[t - 1]),
    )
    arb = run_hedge_arbitrary(
        zetas, new_hedge_state(0.0, 1.0, horizon=400), always_provide(ys)
    )
    return (
        np.array_equal(full.y_hat, le.y_hat)
        and np.array_equal(full.taus, le.taus)
        and np.array_equal(full.y_hat, arb.y_hat)
        and np.array_equal(full.taus, arb.taus)
    )


def _check_oracle_equivalences() -> bool:
    rng = np.random.default_rng(6)
    # kl against brute-force enumeration
    import itertools

    for model in (bernoulli_product(3), ising_exact(3, [(0, 1), (1, 2)])):
        for _ in range(20):
            t1 = rng.uniform(-2, 2, model.dim)
            t2 = rng.uniform(-2, 2, model.dim)
            if model.kind.value == "bernoulli_product":
                space = itertools.product((0.0, 1.0), repeat=model.dim)
            else:
                space = itertools.product((-1.0, 1.0), repeat=model.n_vertices)
            brute = 0.0
            for x in space:
                lp1 = log_density(model, t1, np.array(x))
                lp2 = log_density(model, t2, np.array(x))
                brute += math.exp(lp1) * (lp1 - lp2)
            if abs(kl_divergence(model, t1, t2) - brute) > 1e-10:
                return False
    # best static threshold against a dense grid
    for _ in range(50):
        T = int(rng.integers(10, 120))
        zetas = rng.normal(0, 1, T)
        ys = np.where(rng.random(T) < 0.4, 1, -1)
        _, mist = best_static_tau(zetas, ys, -2, 2)
        grid = np.linspace(-2, 2, 20_001)
        best_grid = min(
            int(np.sum(np.where(zetas < tau, 1, -1) != ys)) for tau in grid
        )
        if mist != best_grid:
            return False
    # projection against golden section
    model = bernoulli_product(1)
    box = certify_box(model, make_box(model, -1.5, 1.5))
    for _ in range(30):
        tilde = np.array([rng.uniform(-4, 4)])
        got = bregman_project(model, tilde, box)[0]
        want = _golden_section(
            lambda t: kl_divergence(model, tilde, np.array([t])), -1.5, 1.5
        )
        if abs(got - want) > 1e-6:
            return False
    return True


def _check_unbiasedness(n=4000) -> bool:
    model = bernoulli_product(4)
    channel = bsc(0.1)
    rng = np.random.default_rng(7)
    x = (rng.random(4) < 0.5).astype(float)
    from .families import sufficient_stat

    hs = np.array(
        [unbiased_stat(channel, model, corrupt(channel, model, x, rng)) for _ in range(n)]
    )
    se = hs.std(axis=0, ddof=1) / math.sqrt(n)
    return bool(np.all(np.abs(hs.mean(axis=0) - sufficient_stat(model, x)) <= 5 * se))


CHECKS = [
    ("strong-convexity identity", _check_strong_convexity),
    ("duality round-trip", _check_duality),
    ("gradient vs finite differences", _check_gradients),
    ("estimator unbiasedness", _check_unbiasedness),
    ("pathwise log-regret ceiling", _check_pathwise_theorem1),
    ("pathwise sqrt-regret ceiling", _check_pathwise_theorem2),
    ("filtering/true loss martingale", _check_martingale),
    ("threshold mistake bound (full feedback)", _check_theorem4),
    ("threshold mistake bound (arbitrary feedback)", _check_theorem6),
    ("feedback-regime coupling identities", _check_coupling),
    ("oracle equivalences", _check_oracle_equivalences),
]


def run_battery(print_fn=print) -> int:
    """Run every check; returns the number of failures."""
    failures = 0
    for name, check in CHECKS:
        ok = check()
        print_fn(f"{'PASS' if ok else 'FAIL'}  {name}")
        failures += not ok
    return failures
