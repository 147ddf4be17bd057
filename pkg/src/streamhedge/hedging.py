"""Threshold forecasters driven by end-user feedback.

Beliefs arrive as log values; a monotone transform zeta maps them onto the
scale the threshold lives on, either linearly (zeta = C * p_hat, applied in
log space so enormous C values stay finite) or logarithmically
(zeta = C * log p_hat).  The decision each round is

    y_hat = +1 (anomalous)  iff  zeta_t < tau_t,

with ties going to -1.  On a confirmed mistake the threshold moves by eta
in the direction of the true label and is clamped back into
[tau_min, tau_max]: a missed anomaly raises it, a false alarm lowers it.

Three feedback regimes share that update:

* full feedback          -- a label arrives every round;
* label-efficient        -- the forecaster itself queries with probability
                            1 / (1 + |zeta_t - tau_t|) and updates only on
                            answered rounds;
* arbitrarily spaced     -- the environment volunteers labels whenever it
                            pleases; unanswered rounds leave tau alone.

The mistake guarantees for these schemes are driven by the hinge surrogate
(1 - (tau - zeta) y)_+, which dominates the 0/1 mistake indicator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable, Optional

import numpy as np

__all__ = [
    "ZetaKind",
    "ZetaTransform",
    "HedgeState",
    "FeedbackEvent",
    "zeta",
    "zeta_from_log",
    "calibrate",
    "decide",
    "update_full",
    "query_probability",
    "step_full",
    "step_label_efficient",
    "step_arbitrary",
    "hinge_loss",
]


class ZetaKind(Enum):
    LINEAR = "linear"
    LOG = "log"


@dataclass(frozen=True)
class ZetaTransform:
    """Monotone belief transform.

    Linear keeps the scale constant in log space (``log_c`` stores log C so
    C = exp(220) style constants never overflow); log multiplies the
    log-belief by ``c``.
    """

    kind: ZetaKind
    c: float = 1.0
    log_c: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is ZetaKind.LOG and self.c <= 0.0:
            raise ValueError("log transform needs c > 0")


def zeta_from_log(transform: ZetaTransform, log_p_hat: float) -> float:
    """Transform a log-belief.  Underflow in the linear kind maps to 0.0."""
    if not math.isfinite(log_p_hat):
        raise ValueError("log-belief must be finite")
    if transform.kind is ZetaKind.LINEAR:
        v = transform.log_c + log_p_hat
        if v < -745.0:  # below the smallest positive double
            return 0.0
        return math.exp(v)
    return transform.c * log_p_hat


def zeta(transform: ZetaTransform, p_hat: float) -> float:
    """Transform a raw belief value."""
    if transform.kind is ZetaKind.LOG:
        if p_hat <= 0.0:
            raise ValueError("log transform needs p_hat > 0")
        return transform.c * math.log(p_hat)
    if p_hat < 0.0:
        raise ValueError("belief must be nonnegative")
    if p_hat == 0.0:
        return 0.0
    return zeta_from_log(transform, math.log(p_hat))


def calibrate(kind: ZetaKind, warmup_log_beliefs) -> ZetaTransform:
    """Choose C so the median |zeta| over a warmup window equals 1.

    Keeps the threshold's unit step size eta commensurate with the spread
    of the transformed beliefs regardless of the model's entropy scale.
    """
    logs = np.asarray(list(warmup_log_beliefs), dtype=np.float64)
    if logs.size == 0:
        raise ValueError("warmup window is empty")
    med = float(np.median(logs))
    if kind is ZetaKind.LINEAR:
        return ZetaTransform(ZetaKind.LINEAR, log_c=-med)
    scale = abs(med)
    if scale == 0.0:
        return ZetaTransform(ZetaKind.LOG, c=1.0)
    return ZetaTransform(ZetaKind.LOG, c=1.0 / scale)


@dataclass(frozen=True)
class HedgeState:
    """Threshold state: current tau, its bounds, step size and clock.

    ``eta`` fixed up front wins; otherwise 1/sqrt(horizon) when the horizon
    is known and the anytime 1/sqrt(t) when it is not.
    """

    tau: float
    tau_min: float
    tau_max: float
    t: int = 1
    eta: Optional[float] = None
    horizon: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.tau_min < self.tau_max:
            raise ValueError("need tau_min < tau_max")
        if not self.tau_min <= self.tau <= self.tau_max:
            raise ValueError("tau must start inside its bounds")
        if self.eta is not None and self.eta <= 0.0:
            raise ValueError("eta must be positive")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.t < 1:
            raise ValueError("timestep starts at 1")

    def eta_at(self, t: int) -> float:
        if self.eta is not None:
            return self.eta
        if self.horizon is not None:
            return 1.0 / math.sqrt(self.horizon)
        return 1.0 / math.sqrt(t)


def new_hedge_state(
    tau_min: float,
    tau_max: float,
    eta: Optional[float] = None,
    horizon: Optional[int] = None,
    tau_init: Optional[float] = None,
) -> HedgeState:
    """Fresh threshold at tau_min, or clamped at ``tau_init`` if given."""
    tau = tau_min if tau_init is None else min(max(tau_init, tau_min), tau_max)
    return HedgeState(
        tau=tau, tau_min=tau_min, tau_max=tau_max, eta=eta, horizon=horizon
    )


@dataclass(frozen=True)
class FeedbackEvent:
    t: int
    y: int
    requested: bool = False
    provided: bool = True

    def __post_init__(self) -> None:
        if self.y not in (-1, 1):
            raise ValueError("labels are -1 or +1")


def decide(state: HedgeState, zeta_t: float) -> int:
    """+1 iff the transformed belief falls strictly below the threshold."""
    if not (math.isfinite(zeta_t) and math.isfinite(state.tau)):
        raise ValueError("decide needs finite inputs")
    return 1 if zeta_t < state.tau else -1


def _clamp(state: HedgeState, tau: float) -> float:
    return min(max(tau, state.tau_min), state.tau_max)


def update_full(state: HedgeState, y_hat: int, y: int) -> HedgeState:
    """Full-feedback round update: move tau by eta * y on a mistake, clamp,
    then advance the clock."""
    if y_hat not in (-1, 1) or y not in (-1, 1):
        raise ValueError("labels are -1 or +1")
    tau = state.tau
    if y_hat != y:
        tau = _clamp(state, tau + state.eta_at(state.t) * y)
    return replace(state, tau=tau, t=state.t + 1)


def _advance(state: HedgeState) -> HedgeState:
    return replace(state, t=state.t + 1)


def query_probability(zeta_t: float, tau: float) -> float:
    """Bernoulli query rate 1 / (1 + |zeta - tau|)."""
    if not (math.isfinite(zeta_t) and math.isfinite(tau)):
        raise ValueError("query probability needs finite inputs")
    return 1.0 / (1.0 + abs(zeta_t - tau))


def step_full(state: HedgeState, zeta_t: float, y: int) -> tuple[int, HedgeState]:
    """One round with feedback always available."""
    y_hat = decide(state, zeta_t)
    return y_hat, update_full(state, y_hat, y)


def step_label_efficient(
    state: HedgeState,
    zeta_t: float,
    rng: np.random.Generator,
    oracle: Callable[[int, int], int],
) -> tuple[int, Optional[FeedbackEvent], HedgeState]:
    """One round where the forecaster itself decides whether to ask.

    ``oracle(t, y_hat)`` supplies the label when queried.  Oracle failures
    propagate to the caller; the stream driver aborts and keeps the partial
    trace.
    """
    y_hat = decide(state, zeta_t)
    prob = query_probability(zeta_t, state.tau)
    if rng.random() < prob:
        y = int(oracle(state.t, y_hat))
        event = FeedbackEvent(t=state.t, y=y, requested=True)
        return y_hat, event, update_full(state, y_hat, y)
    return y_hat, None, _advance(state)


def step_arbitrary(
    state: HedgeState, zeta_t: float, feedback: Optional[int]
) -> tuple[int, HedgeState]:
    """One round where the environment may or may not volunteer a label."""
    y_hat = decide(state, zeta_t)
    if feedback is None:
        return y_hat, _advance(state)
    return y_hat, update_full(state, y_hat, int(feedback))


def hinge_loss(tau: float, zeta_t: float, y: int) -> float:
    """(1 - (tau - zeta) y)_+, the convex surrogate for the 0/1 mistake."""
    if y not in (-1, 1):
        raise ValueError("labels are -1 or +1")
    return max(0.0, 1.0 - (tau - zeta_t) * y)
