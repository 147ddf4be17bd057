"""Sequential belief assignment by noisy mirror descent.

Each round the filter holds a natural parameter ``theta_hat`` inside a
certified box.  After observing the debiased statistic h of the next noisy
symbol it pays the filtering loss

    loss_hat(theta, h) = -<theta, h> + Phi(theta),

an unbiased estimate of the log loss on the unseen clean symbol, and then
performs the primal-dual update

    mu  = grad Phi(theta_hat)
    mu' = mu - eta_t * (mu - h)
    theta_tilde = (grad Phi)^{-1}(mu')          # dual step, mirrored back
    theta_hat'  = argmin_{theta in box} kl(theta_tilde, theta)

with step sizes eta_t = 1/t (to compete with one fixed model) or 1/sqrt(t)
(to compete with slowly drifting models).

For the product families the dual step may leave the valid mean range when
h does (debiased statistics can exceed the clean alphabet's hull), so mu'
is clamped into the open range with margin 1e-6 before inverting; the box
projection afterwards makes the overshoot immaterial.  For the Ising family
the same round is solved in one shot as the box-constrained proximal
problem  argmin_theta <theta, mu - h> + (1/eta) kl(theta_hat, theta),
which is well-defined for any h and coincides with the two-step form
whenever mu' stays in the dual range.

The belief handed to the hedging stage is p_hat = exp(-loss_hat), reported
in log space; with a noiseless channel this is exactly the model density at
the observed symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional

import numpy as np

from .channels import NoisyChannel, StatNormTracker, unbiased_stat
from .families import (
    FamilyKind,
    FamilyModel,
    FeasibleBox,
    grad_log_partition,
    hessian_log_partition,
    inverse_grad,
    kl_divergence,
    log_partition,
    sigmoid,
    sufficient_stat,
)

__all__ = [
    "Schedule",
    "FilterState",
    "FilterTrace",
    "filtering_loss",
    "true_loss",
    "loss_gradient",
    "bregman_project",
    "md_step",
    "run_filter",
    "FilterRun",
    "max_mean_norm",
]

_MEAN_CLAMP_EPS = 1e-6
_PROJECT_TOL = 1e-9
_PROJECT_MAX_ITER = 500


class Schedule(Enum):
    """Step-size schedule: eta_t = 1/t or 1/sqrt(t)."""

    INVERSE_T = "inverse_t"
    INVERSE_SQRT_T = "inverse_sqrt_t"

    def eta(self, t: int) -> float:
        if t < 1:
            raise ValueError(f"timestep must be >= 1, got {t}")
        if self is Schedule.INVERSE_T:
            return 1.0 / t
        return 1.0 / np.sqrt(t)


@dataclass(frozen=True)
class FilterState:
    t: int
    theta_hat: np.ndarray
    model: FamilyModel
    box: FeasibleBox
    schedule: Schedule

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError("timestep starts at 1")
        theta = np.asarray(self.theta_hat, dtype=np.float64)
        object.__setattr__(self, "theta_hat", theta)
        if not self.box.contains(theta, atol=1e-12):
            raise ValueError("theta_hat must lie inside the box")


@dataclass
class FilterTrace:
    """Per-step record of one filtering run.

    ``log_beliefs[t-1]`` is the log of the belief reported to hedging at
    step t; it equals minus the filtering loss and is causal (it depends
    only on observations before t).
    """

    filtering_losses: list[float] = field(default_factory=list)
    log_beliefs: list[float] = field(default_factory=list)
    true_losses: list[float] = field(default_factory=list)
    k_series: list[float] = field(default_factory=list)
    h_rows: list[np.ndarray] = field(default_factory=list)
    theta_rows: list[np.ndarray] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.filtering_losses)


def filtering_loss(model: FamilyModel, theta: np.ndarray, h: np.ndarray) -> float:
    """-<theta, h> + Phi(theta)."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (model.dim,):
        raise ValueError(f"h must have shape ({model.dim},), got {h.shape}")
    return -float(np.dot(theta, h)) + log_partition(model, theta)


def true_loss(model: FamilyModel, theta: np.ndarray, x: np.ndarray) -> float:
    """Log loss -log p_theta(x), i.e. the filtering loss at h = phi(x)."""
    return filtering_loss(model, theta, sufficient_stat(model, x))


def loss_gradient(model: FamilyModel, theta: np.ndarray, h: np.ndarray) -> np.ndarray:
    """Gradient of the filtering loss: grad Phi(theta) - h."""
    return grad_log_partition(model, theta) - np.asarray(h, dtype=np.float64)


def _box_newton_minimize(
    model: FamilyModel,
    box: FeasibleBox,
    linear: np.ndarray,
    theta0: np.ndarray,
) -> np.ndarray:
    """Minimize Phi(theta) - <linear, theta> over the box.

    Active-set damped Newton: coordinates whose KKT condition already holds
    at a bound are frozen each iteration and the Newton system is solved on
    the free subspace, so clipping never cancels the step.  The objective
    is smooth and convex; the projected-gradient norm certifies optimality.
    """
    theta = box.clip(np.asarray(theta0, dtype=np.float64))

    def objective(t: np.ndarray) -> float:
        return log_partition(model, t) - float(np.dot(linear, t))

    def grad(t: np.ndarray) -> np.ndarray:
        return grad_log_partition(model, t) - linear

    obj = objective(theta)
    for _ in range(_PROJECT_MAX_ITER):
        g = grad(theta)
        pg = theta - box.clip(theta - g)
        pg_norm = float(np.max(np.abs(pg)))
        if pg_norm <= _PROJECT_TOL:
            return theta
        at_lo = theta <= box.lo + 1e-12
        at_hi = theta >= box.hi - 1e-12
        active = (at_lo & (g > 0)) | (at_hi & (g < 0))
        free = ~active
        step = np.zeros_like(theta)
        if np.any(free):
            hess = hessian_log_partition(model, theta)[np.ix_(free, free)]
            hess = hess + 1e-12 * np.eye(int(np.sum(free)))
            try:
                step[free] = np.linalg.solve(hess, g[free])
            except np.linalg.LinAlgError:
                step[free] = g[free]
        lam = 1.0
        improved = False
        for _ in range(60):
            cand = box.clip(theta - lam * step)
            cand_obj = objective(cand)
            if cand_obj < obj:
                theta, obj = cand, cand_obj
                improved = True
                break
            lam *= 0.5
        if not improved:
            # Newton direction exhausted; probe along the raw gradient
            lam = 1.0
            for _ in range(60):
                cand = box.clip(theta - lam * g)
                cand_obj = objective(cand)
                if cand_obj < obj:
                    theta, obj = cand, cand_obj
                    improved = True
                    break
                lam *= 0.5
        if not improved:
            if pg_norm <= 1e-7:
                return theta
            raise RuntimeError("box-constrained Newton stalled before convergence")
    raise RuntimeError(
        f"box-constrained Newton did not converge in {_PROJECT_MAX_ITER} iterations"
    )


def bregman_project(
    model: FamilyModel, theta_tilde: np.ndarray, box: FeasibleBox
) -> np.ndarray:
    """argmin over the box of theta -> kl(theta_tilde, theta).

    Coordinatewise the objective is convex with unconstrained minimum at
    theta_tilde, so for the product families the projection is the clamp.
    Ising runs projected Newton on the (convex) objective.
    """
    theta_tilde = np.asarray(theta_tilde, dtype=np.float64)
    if theta_tilde.shape != (model.dim,):
        raise ValueError("theta_tilde has the wrong shape")
    if not np.all(np.isfinite(theta_tilde)):
        raise ValueError("theta_tilde must be finite")
    if model.is_product:
        return box.clip(theta_tilde)
    # kl(tilde, theta) = Phi(theta) - <grad Phi(tilde), theta> + const
    mu_tilde = grad_log_partition(model, theta_tilde)
    return _box_newton_minimize(model, box, mu_tilde, theta_tilde)


def md_step(state: FilterState, h: np.ndarray) -> FilterState:
    """One mirror-descent round: dual step on h, mirror back, project."""
    h = np.asarray(h, dtype=np.float64)
    if h.shape != (state.model.dim,) or not np.all(np.isfinite(h)):
        raise ValueError("h must be a finite vector of the model dimension")
    model, box = state.model, state.box
    eta = state.schedule.eta(state.t)
    mu = grad_log_partition(model, state.theta_hat)
    mu_next = mu - eta * (mu - h)

    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        mu_next = np.clip(mu_next, _MEAN_CLAMP_EPS, 1.0 - _MEAN_CLAMP_EPS)
        theta_next = box.clip(inverse_grad(model, mu_next))
    elif model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        theta_next = box.clip(mu_next)
    else:
        # One-shot proximal form of the same round (see module docstring):
        # the objective <theta, mu-h> + (1/eta) kl(theta_hat, theta) reduces
        # to Phi(theta) - <mu', theta> up to constants.
        theta_next = _box_newton_minimize(model, box, mu_next, state.theta_hat)
    return FilterState(
        t=state.t + 1,
        theta_hat=theta_next,
        model=model,
        box=box,
        schedule=state.schedule,
    )


class FilterRun:
    """Incremental driver around ``md_step`` for streaming use.

    Feeding one noisy symbol advances the state by one round and returns
    the quantities recorded for that round (losses, log-belief, running K).
    """

    def __init__(
        self,
        model: FamilyModel,
        box: FeasibleBox,
        channel: NoisyChannel,
        schedule: Schedule,
        theta_init: Optional[np.ndarray] = None,
        keep_h: bool = False,
        keep_theta: bool = False,
    ) -> None:
        if theta_init is None:
            theta_init = box.midpoint()
        theta_init = np.asarray(theta_init, dtype=np.float64)
        if not box.contains(theta_init, atol=1e-12):
            raise ValueError("theta_init must lie inside the box")
        self.model = model
        self.box = box
        self.channel = channel
        self.state = FilterState(
            t=1, theta_hat=theta_init, model=model, box=box, schedule=schedule
        )
        self.tracker = StatNormTracker()
        self.trace = FilterTrace()
        self.keep_h = keep_h
        self.keep_theta = keep_theta

    def step(self, z: np.ndarray, x_clean: Optional[np.ndarray] = None) -> dict:
        theta = self.state.theta_hat
        h = unbiased_stat(self.channel, self.model, z)
        loss = filtering_loss(self.model, theta, h)
        log_belief = -loss
        k = self.tracker.update(h)
        record = {
            "t": self.state.t,
            "h": h,
            "filtering_loss": loss,
            "log_belief": log_belief,
            "k": k,
        }
        self.trace.filtering_losses.append(loss)
        self.trace.log_beliefs.append(log_belief)
        self.trace.k_series.append(k)
        if self.keep_h:
            self.trace.h_rows.append(h)
        if self.keep_theta:
            self.trace.theta_rows.append(theta.copy())
        if x_clean is not None:
            tl = true_loss(self.model, theta, x_clean)
            self.trace.true_losses.append(tl)
            record["true_loss"] = tl
        self.state = md_step(self.state, h)
        return record


def run_filter(
    model: FamilyModel,
    box: FeasibleBox,
    channel: NoisyChannel,
    schedule: Schedule,
    theta_init: Optional[np.ndarray],
    z_stream: Iterable[np.ndarray],
    x_stream: Optional[Iterable[np.ndarray]] = None,
    keep_h: bool = False,
    keep_theta: bool = False,
) -> FilterTrace:
    """Run the filter over a whole stream and return its trace."""
    run = FilterRun(
        model, box, channel, schedule, theta_init, keep_h=keep_h, keep_theta=keep_theta
    )
    if x_stream is None:
        for z in z_stream:
            run.step(z)
    else:
        for z, x in zip(z_stream, x_stream):
            run.step(z, x_clean=x)
    return run.trace


def max_mean_norm(model: FamilyModel, box: FeasibleBox, grid_points: int = 5) -> float:
    """M = max over the box of ||grad Phi(theta)|| / 2.

    Exact corner evaluation for the product families (the mean map is
    coordinatewise monotone there); heuristic scan for Ising.
    """
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        # sigmoid is positive and increasing, so the norm peaks at hi
        return 0.5 * float(np.linalg.norm(sigmoid(box.hi)))
    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        worst = np.maximum(np.abs(box.lo), np.abs(box.hi))
        return 0.5 * float(np.linalg.norm(worst))
    from .families import _ising_scan_points  # heuristic, shared with certify

    pts = _ising_scan_points(box, grid_points)
    return 0.5 * max(
        float(np.linalg.norm(grad_log_partition(model, p))) for p in pts
    )
