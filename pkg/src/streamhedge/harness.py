"""Experiment generation and evaluation at desk scale.

Streams are piecewise-constant Bernoulli products: the mean vector beta*
holds within a segment and jumps at declared change points; the steps right
after each jump are the planted anomalies.  On top of the generated data
this module provides

* offline comparators -- the best single natural parameter in the box for a
  realized sequence (closed form, coordinatewise, for product families) and
  the best static threshold in hindsight (exact over candidate cuts);
* regret ledgers -- per-round cumulative-regret series paired with the
  theoretical bound series they must stay under, both against the best
  static parameter (1/t steps, logarithmic bound) and against a drifting
  piecewise comparator (1/sqrt(t) steps, sqrt bound with a variation term);
* synthetic feedback oracles for driving the threshold forecasters without
  a human: answer-every-query, answer-everything, and the asymmetric policy
  that always reviews declared anomalies but only sometimes reports a miss;
* run evaluation (error/false-alarm/miss/query counts).

The canonical experiment recipe draws each segment's beta* i.i.d. uniform
on a band 0.5 +- width, with per-segment widths chosen so that segment
entropy levels zigzag by tens of nats; redrawing the whole vector at each
jump produces pronounced log-loss spikes while the level zigzag denies any
single threshold a safe operating point.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .channels import ChannelKind, NoisyChannel, unbiased_stat
from .families import (
    FamilyKind,
    FamilyModel,
    FeasibleBox,
    grad_log_partition,
    kl_divergence,
    log_partition,
    logit,
    sigmoid,
    softplus,
)
from .filtering import FilterTrace, _box_newton_minimize, max_mean_norm
from .hedging import (
    FeedbackEvent,
    HedgeState,
    step_arbitrary,
    step_full,
    step_label_efficient,
)

__all__ = [
    "PiecewiseSpec",
    "generate_stream",
    "make_experiment_spec",
    "default_experiment_widths",
    "best_static_theta",
    "best_static_theta_from_stats",
    "prefix_static_losses",
    "best_static_tau",
    "theorem1_bound",
    "theorem2_bound",
    "RegretLedger",
    "static_regret_ledger",
    "dynamic_regret_ledger",
    "comparator_from_spec",
    "truth_on_query",
    "always_provide",
    "on_declared_miss_prob",
    "HedgeRun",
    "run_hedge_full",
    "run_hedge_label_efficient",
    "run_hedge_arbitrary",
    "evaluate_run",
]


# ----------------------------------------------------------------------
# piecewise Bernoulli streams
# ----------------------------------------------------------------------


@dataclass(frozen=True)
class PiecewiseSpec:
    """A piecewise-constant Bernoulli product stream with planted anomalies.

    ``segments`` maps 1-indexed start times to mean vectors; the first
    segment must start at t=1.  Steps [start, start + anomaly_window) of
    every later segment carry the label +1.
    """

    d: int
    T: int
    segments: tuple[tuple[int, np.ndarray], ...]
    anomaly_window: int
    seed: int

    def __post_init__(self) -> None:
        if self.d < 1 or self.T < 1:
            raise ValueError("need d >= 1 and T >= 1")
        if self.anomaly_window < 0:
            raise ValueError("anomaly_window must be >= 0")
        if not self.segments:
            raise ValueError("need at least one segment")
        segs = []
        prev = 0
        for start, beta in self.segments:
            beta = np.asarray(beta, dtype=np.float64)
            if beta.shape != (self.d,):
                raise ValueError(f"segment mean must have shape ({self.d},)")
            if np.any(beta <= 0.0) or np.any(beta >= 1.0):
                raise ValueError("segment means must lie strictly inside (0,1)")
            if start <= prev:
                raise ValueError("segment starts must be strictly increasing")
            prev = start
            segs.append((int(start), beta))
        if segs[0][0] != 1:
            raise ValueError("first segment must start at t=1")
        object.__setattr__(self, "segments", tuple(segs))

    @property
    def jump_times(self) -> list[int]:
        return [start for start, _ in self.segments[1:]]

    def mean_at(self, t: int) -> np.ndarray:
        beta = self.segments[0][1]
        for start, b in self.segments:
            if start <= t:
                beta = b
            else:
                break
        return beta

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "T": self.T,
            "anomaly_window": self.anomaly_window,
            "seed": self.seed,
            "segments": [[start, beta.tolist()] for start, beta in self.segments],
        }

    @staticmethod
    def from_dict(data: dict) -> "PiecewiseSpec":
        return PiecewiseSpec(
            d=int(data["d"]),
            T=int(data["T"]),
            anomaly_window=int(data["anomaly_window"]),
            seed=int(data["seed"]),
            segments=tuple(
                (int(start), np.asarray(beta, dtype=np.float64))
                for start, beta in data["segments"]
            ),
        )

    def dump(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)
            fh.write("\n")

    @staticmethod
    def load(path) -> "PiecewiseSpec":
        with open(path) as fh:
            return PiecewiseSpec.from_dict(json.load(fh))


def generate_stream(spec: PiecewiseSpec) -> tuple[np.ndarray, np.ndarray]:
    """Draw the clean stream and its truth labels.

    Returns (X, y) with X of shape (T, d) in {0,1} and y in {-1,+1}^T,
    deterministic given ``spec.seed``.
    """
    rng = np.random.default_rng(spec.seed)
    means = np.empty((spec.T, spec.d))
    starts = [start for start, _ in spec.segments] + [spec.T + 1]
    for i, (start, beta) in enumerate(spec.segments):
        stop = min(starts[i + 1], spec.T + 1)
        if start > spec.T:
            break
        means[start - 1 : stop - 1] = beta
    x = (rng.random((spec.T, spec.d)) < means).astype(np.float64)
    y = -np.ones(spec.T, dtype=np.int64)
    for start in spec.jump_times:
        lo = start - 1
        hi = min(lo + spec.anomaly_window, spec.T)
        y[lo:hi] = 1
    return x, y


def load_pinned_spec() -> PiecewiseSpec:
    """The published seed-0 instance of the canonical experiment spec.

    ``make_experiment_spec(0)`` regenerates it bit-for-bit; the pinned file
    exists so the exact segment means used by the default preset are
    inspectable without running any code.
    """
    from importlib import resources

    ref = resources.files("streamhedge").joinpath("presets/exp1_segments.json")
    with resources.as_file(ref) as path:
        return PiecewiseSpec.load(path)


def make_uniform_spec(
    seed: int,
    d: int,
    T: int,
    jumps: Sequence[int] = (),
    anomaly_window: int = 25,
    lo: float = 0.05,
    hi: float = 0.95,
) -> PiecewiseSpec:
    """Plain generator: every segment's mean vector drawn i.i.d. uniform."""
    rng = np.random.default_rng([7, seed])
    starts = [1] + [int(j) for j in jumps]
    segments = tuple((s, rng.uniform(lo, hi, d)) for s in starts)
    return PiecewiseSpec(
        d=d, T=T, segments=segments, anomaly_window=anomaly_window, seed=seed
    )


def make_experiment_spec(
    seed: int,
    d: int = 500,
    T: int = 1000,
    jumps: Sequence[int] = (100, 500, 700),
    anomaly_window: int = 25,
    base_width: float = 0.40,
    shrink: float = 0.45,
    flip_fraction: float = 0.26,
) -> PiecewiseSpec:
    """Canonical experiment spec with alternating jump mechanics.

    The first segment's means are uniform on 0.5 +- base_width.  Jumps then
    alternate between two transformations of the previous segment:

    * shrink -- every coordinate moves toward 0.5 by the ``shrink``
      fraction.  Entropy rises by tens of nats while the KL from the old
      model stays small, so the post-jump dip never reaches below the new
      segment's own nominal log-loss band: a threshold anchored to the old
      (lower-loss) segment sees the whole window, but any single threshold
      that must also tolerate the new segment's nominal level sees nothing.
    * push+flip -- coordinates move away from 0.5 (undoing the shrink,
      clipped to 0.5 +- 0.44) and a ``flip_fraction`` share of the most
      extreme coordinates is mirrored (beta -> 1-beta).  Entropy falls back
      while the mirror flips supply enough KL for a pronounced spike.

    A +-0.015 jitter decorrelates coordinates across jumps.  Everything is
    reproducible from ``seed``.
    """
    if not 0.0 < base_width < 0.5:
        raise ValueError("base_width must lie in (0, 0.5)")
    if not 0.0 < shrink < 1.0:
        raise ValueError("shrink must lie in (0, 1)")
    if not 0.0 <= flip_fraction <= 1.0:
        raise ValueError("flip_fraction must lie in [0,1]")
    rng = np.random.default_rng([7, seed])
    starts = [1] + [int(j) for j in jumps]
    beta = 0.5 + base_width * (2.0 * rng.random(d) - 1.0)
    segments = [(starts[0], beta.copy())]
    for i, start in enumerate(starts[1:]):
        jitter = rng.uniform(-0.015, 0.015, d)
        if i % 2 == 0:
            beta = 0.5 + (beta - 0.5) * (1.0 - shrink) + jitter
        else:
            beta = 0.5 + (beta - 0.5) / (1.0 - shrink) + jitter
            beta = np.clip(beta, 0.5 - 0.44, 0.5 + 0.44)
            n_flip = int(round(flip_fraction * d))
            if n_flip > 0:
                pool = np.argsort(-np.abs(beta - 0.5))[: max(n_flip, int(0.4 * d))]
                flip = rng.choice(pool, size=n_flip, replace=False)
                beta[flip] = 1.0 - beta[flip]
        beta = np.clip(beta, 1e-3, 1.0 - 1e-3)
        segments.append((start, beta.copy()))
    return PiecewiseSpec(
        d=d,
        T=T,
        segments=tuple(segments),
        anomaly_window=anomaly_window,
        seed=seed,
    )


# ----------------------------------------------------------------------
# offline parameter comparator
# ----------------------------------------------------------------------


def _product_argmin(
    model: FamilyModel, box: FeasibleBox, mean_stat: np.ndarray
) -> np.ndarray:
    """Coordinatewise argmin of Phi(theta) - <theta, mean_stat> over the box.

    The objective is separable and convex; its unconstrained stationary
    point solves grad Phi(theta) = mean_stat, so the box solution is the
    clamp, with the out-of-range means pinned to the matching face.
    """
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        theta = np.where(
            mean_stat <= sigmoid(box.lo),
            box.lo,
            np.where(
                mean_stat >= sigmoid(box.hi),
                box.hi,
                logit(np.clip(mean_stat, 1e-300, 1.0 - 1e-16)),
            ),
        )
        return np.clip(theta, box.lo, box.hi)
    return np.clip(mean_stat, box.lo, box.hi)


def best_static_theta_from_stats(
    model: FamilyModel, box: FeasibleBox, stat_sum: np.ndarray, n: int
) -> tuple[np.ndarray, float]:
    """Minimizer over the box of sum_t [Phi(theta) - <theta, s_t>] given
    the statistic total; works for clean phi(x) sums and debiased h sums."""
    if n < 1:
        raise ValueError("need a nonempty sequence")
    mean_stat = np.asarray(stat_sum, dtype=np.float64) / n
    if model.is_product:
        theta = _product_argmin(model, box, mean_stat)
    else:
        theta = _box_newton_minimize(model, box, mean_stat, box.midpoint())
    loss = n * log_partition(model, theta) - float(np.dot(theta, stat_sum))
    return theta, loss


def best_static_theta(
    model: FamilyModel, box: FeasibleBox, x_rows: np.ndarray
) -> tuple[np.ndarray, float]:
    """Best single parameter in hindsight for a realized clean sequence."""
    x_rows = np.asarray(x_rows, dtype=np.float64)
    if x_rows.ndim != 2 or x_rows.shape[0] == 0:
        raise ValueError("x_rows must be a nonempty (T, dim) array")
    if model.is_product:
        stat_sum = x_rows.sum(axis=0)
    else:
        from .families import sufficient_stat

        stat_sum = np.sum([sufficient_stat(model, x) for x in x_rows], axis=0)
    return best_static_theta_from_stats(model, box, stat_sum, x_rows.shape[0])


def prefix_static_losses(
    model: FamilyModel, box: FeasibleBox, h_rows: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """For every prefix length t, the best static parameter and its
    cumulative loss on that prefix.  Vectorized; product families only.

    Returns (theta_star, loss_star) with shapes (T, d) and (T,).
    """
    if not model.is_product:
        raise NotImplementedError("prefix comparator is closed-form only for "
                                  "product families")
    h_rows = np.asarray(h_rows, dtype=np.float64)
    T = h_rows.shape[0]
    csum = np.cumsum(h_rows, axis=0)
    counts = np.arange(1, T + 1, dtype=np.float64)[:, None]
    means = csum / counts
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        lo_mu, hi_mu = sigmoid(box.lo), sigmoid(box.hi)
        inner = np.clip(means, 1e-300, 1.0 - 1e-16)
        theta = np.where(
            means <= lo_mu, box.lo, np.where(means >= hi_mu, box.hi, logit(inner))
        )
        theta = np.clip(theta, box.lo, box.hi)
        phis = softplus(theta).sum(axis=1)
    else:
        theta = np.clip(means, box.lo, box.hi)
        phis = 0.5 * np.sum(theta * theta, axis=1)
    losses = counts[:, 0] * phis - np.sum(theta * csum, axis=1)
    return theta, losses


# ----------------------------------------------------------------------
# offline threshold comparator
# ----------------------------------------------------------------------


def best_static_tau(
    zetas: np.ndarray, ys: np.ndarray, tau_min: float, tau_max: float
) -> tuple[float, int]:
    """Exact minimizer of the 0/1 mistake count over tau in [tau_min, tau_max].

    A threshold flags zeta < tau, so the mistake count only changes just
    above each distinct zeta value; it suffices to scan tau_min, tau_max
    and the float successor of every in-range zeta.  Ties break toward the
    smallest tau.
    """
    zetas = np.asarray(zetas, dtype=np.float64)
    ys = np.asarray(ys)
    if zetas.size == 0 or zetas.shape != ys.shape:
        raise ValueError("need matching nonempty zeta/label sequences")
    if not np.all(np.isin(ys, (-1, 1))):
        raise ValueError("labels are -1 or +1")
    if not tau_min < tau_max:
        raise ValueError("need tau_min < tau_max")

    order = np.argsort(zetas, kind="stable")
    zs = zetas[order]
    pos = (ys[order] == 1).astype(np.int64)
    neg = 1 - pos
    cum_neg = np.concatenate([[0], np.cumsum(neg)])  # false alarms among k smallest
    cum_pos = np.concatenate([[0], np.cumsum(pos)])
    total_pos = int(cum_pos[-1])

    candidates = [tau_min, tau_max]
    distinct = np.unique(zs)
    for v in distinct:
        if tau_min <= v < tau_max:
            nxt = np.nextafter(v, np.inf)
            if nxt <= tau_max:
                candidates.append(float(nxt))
    best_tau, best_mistakes = tau_min, None
    for tau in sorted(set(candidates)):
        k = int(np.searchsorted(zs, tau, side="left"))  # how many zeta < tau
        mistakes = int(cum_neg[k]) + (total_pos - int(cum_pos[k]))
        if best_mistakes is None or mistakes < best_mistakes:
            best_tau, best_mistakes = tau, mistakes
    return best_tau, int(best_mistakes)


# ----------------------------------------------------------------------
# regret bounds and ledgers
# ----------------------------------------------------------------------


def theorem1_bound(d_init: float, k: float, m: float, h: float, t: int) -> float:
    """Logarithmic regret ceiling for 1/t steps against one fixed model."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if h <= 0:
        raise ValueError("curvature floor must be positive")
    return d_init + (k + m) ** 2 / h * (np.log(t) + 1.0)


def theorem2_bound(
    d_init: float, d_max: float, k: float, m: float, h: float, v_t: float, t: int
) -> float:
    """Sqrt-regret ceiling for 1/sqrt(t) steps against a drifting comparator
    with variation v_t."""
    if t < 1:
        raise ValueError("t must be >= 1")
    if h <= 0:
        raise ValueError("curvature floor must be positive")
    return (
        d_init
        + d_max * np.sqrt(t + 1.0)
        + 4.0 * m * np.sqrt(t) * v_t
        + (k + m) ** 2 / h * (2.0 * np.sqrt(t) - 1.0)
    )


@dataclass
class RegretLedger:
    """Per-round regret curve with its theoretical ceiling and constants."""

    cumulative_loss: np.ndarray
    comparator_loss: np.ndarray
    regret: np.ndarray
    bound: np.ndarray
    k_final: float
    m: float
    h: float
    d_max: float

    def violations(self) -> int:
        return int(np.sum(self.regret > self.bound))


def _ledger_constants(
    model: FamilyModel, box: FeasibleBox
) -> tuple[float, float, float]:
    if box.H is None or box.Dmax is None:
        raise ValueError("box must be certified first")
    return max_mean_norm(model, box), box.H, box.Dmax


def static_regret_ledger(
    model: FamilyModel,
    box: FeasibleBox,
    trace: FilterTrace,
    theta_init: np.ndarray,
) -> RegretLedger:
    """Cumulative filtering-loss regret against the per-prefix best static
    parameter, with the logarithmic ceiling at every round."""
    if not trace.h_rows:
        raise ValueError("trace must be run with keep_h=True")
    m, h_floor, d_max = _ledger_constants(model, box)
    h_rows = np.asarray(trace.h_rows)
    cum_loss = np.cumsum(trace.filtering_losses)
    theta_star, comp_loss = prefix_static_losses(model, box, h_rows)
    # kl(theta_init, theta_star_t) rowwise
    phi1 = log_partition(model, theta_init)
    mu1 = grad_log_partition(model, theta_init)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        phis = softplus(theta_star).sum(axis=1)
    else:
        phis = 0.5 * np.sum(theta_star * theta_star, axis=1)
    d_init = phis - phi1 - (theta_star - theta_init) @ mu1
    ks = np.asarray(trace.k_series)
    ts = np.arange(1, len(trace) + 1, dtype=np.float64)
    bound = d_init + (ks + m) ** 2 / h_floor * (np.log(ts) + 1.0)
    return RegretLedger(
        cumulative_loss=cum_loss,
        comparator_loss=comp_loss,
        regret=cum_loss - comp_loss,
        bound=bound,
        k_final=float(ks[-1]),
        m=m,
        h=h_floor,
        d_max=d_max,
    )


def comparator_from_spec(
    spec: PiecewiseSpec, model: FamilyModel, box: FeasibleBox
) -> np.ndarray:
    """Piecewise comparator sequence: the box clamp of each segment's
    natural parameter, one row per round."""
    rows = np.empty((spec.T, model.dim))
    for t in range(1, spec.T + 1):
        rows[t - 1] = np.clip(logit(spec.mean_at(t)), box.lo, box.hi)
    return rows


def dynamic_regret_ledger(
    model: FamilyModel,
    box: FeasibleBox,
    trace: FilterTrace,
    comparator: np.ndarray,
    theta_init: np.ndarray,
) -> RegretLedger:
    """Cumulative filtering-loss regret against a time-varying comparator,
    with the sqrt ceiling (including the variation term) at every round."""
    if not trace.h_rows:
        raise ValueError("trace must be run with keep_h=True")
    m, h_floor, d_max = _ledger_constants(model, box)
    h_rows = np.asarray(trace.h_rows)
    T = h_rows.shape[0]
    comparator = np.asarray(comparator, dtype=np.float64)
    if comparator.shape != (T, model.dim):
        raise ValueError("comparator must have one row per round")
    cum_loss = np.cumsum(trace.filtering_losses)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        phis = softplus(comparator).sum(axis=1)
    elif model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        phis = 0.5 * np.sum(comparator * comparator, axis=1)
    else:
        phis = np.array([log_partition(model, row) for row in comparator])
    comp_loss = np.cumsum(phis - np.sum(comparator * h_rows, axis=1))
    # variation of the comparator within each prefix (tail extended flat)
    diffs = np.zeros(T)
    if T > 1:
        diffs[: T - 1] = np.linalg.norm(np.diff(comparator, axis=0), axis=1)
    v_t = np.cumsum(diffs)
    d1 = kl_divergence(model, theta_init, comparator[0])
    ks = np.asarray(trace.k_series)
    ts = np.arange(1, T + 1, dtype=np.float64)
    bound = (
        d1
        + d_max * np.sqrt(ts + 1.0)
        + 4.0 * m * np.sqrt(ts) * v_t
        + (ks + m) ** 2 / h_floor * (2.0 * np.sqrt(ts) - 1.0)
    )
    return RegretLedger(
        cumulative_loss=cum_loss,
        comparator_loss=comp_loss,
        regret=cum_loss - comp_loss,
        bound=bound,
        k_final=float(ks[-1]),
        m=m,
        h=h_floor,
        d_max=d_max,
    )


# ----------------------------------------------------------------------
# synthetic feedback oracles
# ----------------------------------------------------------------------


def truth_on_query(labels: np.ndarray) -> Callable[[int, int], int]:
    """Answer every forecaster query with the ground-truth label."""
    labels = np.asarray(labels)

    def oracle(t: int, y_hat: int) -> int:
        return int(labels[t - 1])

    return oracle


def always_provide(labels: np.ndarray) -> Callable[[int, int], Optional[int]]:
    """Volunteer the true label every round (full-feedback driver)."""
    labels = np.asarray(labels)

    def provider(t: int, y_hat: int) -> Optional[int]:
        return int(labels[t - 1])

    return provider


def on_declared_miss_prob(
    labels: np.ndarray, miss_prob: float, rng: np.random.Generator
) -> Callable[[int, int], Optional[int]]:
    """Feedback policy of the arbitrary-times experiment: every declared
    anomaly is reviewed; a missed anomaly is reported with ``miss_prob``;
    quiet rounds stay quiet."""
    labels = np.asarray(labels)
    if not 0.0 <= miss_prob <= 1.0:
        raise ValueError("miss_prob must lie in [0,1]")

    def provider(t: int, y_hat: int) -> Optional[int]:
        y = int(labels[t - 1])
        if y_hat == 1:
            return y
        if y == 1 and rng.random() < miss_prob:
            return y
        return None

    return provider


# ----------------------------------------------------------------------
# hedge drivers
# ----------------------------------------------------------------------


@dataclass
class HedgeRun:
    y_hat: np.ndarray
    taus: np.ndarray  # threshold in force at each round
    queried: np.ndarray
    feedback: list[Optional[int]] = field(default_factory=list)
    final_state: Optional[HedgeState] = None

    @property
    def feedback_times(self) -> np.ndarray:
        return np.array([i + 1 for i, y in enumerate(self.feedback) if y is not None])


class StreamAbort(RuntimeError):
    """A feedback source failed mid-stream; the rounds completed so far are
    preserved on ``partial``."""

    def __init__(self, cause: Exception, partial: HedgeRun):
        super().__init__(f"feedback source failed: {cause}")
        self.cause = cause
        self.partial = partial


def run_hedge_full(
    zetas: np.ndarray, labels: np.ndarray, state: HedgeState
) -> HedgeRun:
    y_hats, taus, fb = [], [], []
    for z, y in zip(zetas, labels):
        taus.append(state.tau)
        y_hat, state = step_full(state, float(z), int(y))
        y_hats.append(y_hat)
        fb.append(int(y))
    return HedgeRun(
        y_hat=np.array(y_hats),
        taus=np.array(taus),
        queried=np.ones(len(y_hats), dtype=bool),
        feedback=fb,
        final_state=state,
    )


def run_hedge_label_efficient(
    zetas: np.ndarray,
    state: HedgeState,
    rng: np.random.Generator,
    oracle: Callable[[int, int], int],
) -> HedgeRun:
    y_hats, taus, queried, fb = [], [], [], []
    for z in zetas:
        try:
            tau_t = state.tau
            y_hat, event, state = step_label_efficient(state, float(z), rng, oracle)
        except Exception as exc:
            partial = HedgeRun(
                y_hat=np.array(y_hats),
                taus=np.array(taus),
                queried=np.array(queried, dtype=bool),
                feedback=fb,
                final_state=state,
            )
            raise StreamAbort(exc, partial) from exc
        taus.append(tau_t)
        y_hats.append(y_hat)
        queried.append(event is not None)
        fb.append(event.y if event is not None else None)
    return HedgeRun(
        y_hat=np.array(y_hats),
        taus=np.array(taus),
        queried=np.array(queried, dtype=bool),
        feedback=fb,
        final_state=state,
    )


def run_hedge_arbitrary(
    zetas: np.ndarray,
    state: HedgeState,
    provider: Callable[[int, int], Optional[int]],
) -> HedgeRun:
    y_hats, taus, fb = [], [], []
    for z in zetas:
        taus.append(state.tau)
        y_hat = 1 if float(z) < state.tau else -1
        feedback = provider(state.t, y_hat)
        y_hat2, state = step_arbitrary(state, float(z), feedback)
        assert y_hat2 == y_hat
        y_hats.append(y_hat)
        fb.append(feedback)
    return HedgeRun(
        y_hat=np.array(y_hats),
        taus=np.array(taus),
        queried=np.array([y is not None for y in fb]),
        feedback=fb,
        final_state=state,
    )


# ----------------------------------------------------------------------
# run evaluation
# ----------------------------------------------------------------------


def evaluate_run(
    y_hat: np.ndarray, y_true: np.ndarray, queried: Optional[np.ndarray] = None
) -> dict:
    """Error accounting: false alarm = flagged nominal, miss = unflagged
    anomaly; total errors is their sum."""
    y_hat = np.asarray(y_hat)
    y_true = np.asarray(y_true)
    if y_hat.shape != y_true.shape:
        raise ValueError("prediction/label length mismatch")
    false_alarms = int(np.sum((y_hat == 1) & (y_true == -1)))
    misses = int(np.sum((y_hat == -1) & (y_true == 1)))
    return {
        "total_errors": false_alarms + misses,
        "false_alarms": false_alarms,
        "detection_misses": misses,
        "query_count": int(np.sum(queried)) if queried is not None else 0,
    }
