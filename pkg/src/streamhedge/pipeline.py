"""End-to-end runs: generate/ingest, corrupt, filter, hedge, evaluate.

``simulate`` drives a whole run from a ``RunConfig`` and returns everything
the CLI writes out: per-step records, the error report, and the per-round
regret/bound ledger.  ``DetectSession`` is the incremental variant used for
line-at-a-time detection over external data; it owns the filter state, the
belief transform and the threshold state, and exposes a single ``step``.

Randomness discipline: every stochastic stage draws from its own seeded
stream (data, channel noise, query coin flips, synthetic feedback), so a
(config, seed) pair reproduces byte-identical outputs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .channels import corrupt
from .config import RunConfig
from .families import certify_box
from .filtering import FilterRun, Schedule
from .harness import (
    HedgeRun,
    PiecewiseSpec,
    best_static_tau,
    comparator_from_spec,
    dynamic_regret_ledger,
    evaluate_run,
    generate_stream,
    make_experiment_spec,
    on_declared_miss_prob,
    run_hedge_arbitrary,
    run_hedge_full,
    run_hedge_label_efficient,
    static_regret_ledger,
    truth_on_query,
    RegretLedger,
)

from .hedging import (
    HedgeState,
    ZetaKind,
    ZetaTransform,
    calibrate,
    decide,
    new_hedge_state,
    query_probability,
    step_arbitrary,
    update_full,
    zeta_from_log,
)
from .records import StreamRecord

__all__ = ["SimulationResult", "simulate", "DetectSession", "build_transform"]


def build_transform(cfg: RunConfig, warmup_log_beliefs=None) -> ZetaTransform:
    """The belief transform a run uses: calibrated on a warmup window when
    requested, otherwise from the configured constants."""
    if cfg.calibrate > 0:
        if warmup_log_beliefs is None:
            raise ValueError("calibration requested but no warmup beliefs given")
        return calibrate(cfg.zeta_kind, warmup_log_beliefs)
    if cfg.zeta_kind is ZetaKind.LINEAR:
        return ZetaTransform(ZetaKind.LINEAR, log_c=cfg.zeta_log_c)
    return ZetaTransform(ZetaKind.LOG, c=cfg.zeta_c)


def _initial_hedge_state(cfg: RunConfig, horizon: Optional[int], first_zeta: float) -> HedgeState:
    tau_init = None
    if cfg.tau_init_mode == "first_belief":
        tau_init = first_zeta
    return new_hedge_state(
        cfg.tau_min,
        cfg.tau_max,
        eta=cfg.eta,
        horizon=cfg.horizon if cfg.horizon is not None else horizon,
        tau_init=tau_init,
    )


@dataclass
class SimulationResult:
    records: list[StreamRecord]
    report: dict
    ledger: Optional[RegretLedger]
    spec: Optional[PiecewiseSpec]
    zetas: np.ndarray
    y_true: Optional[np.ndarray]
    hedge: HedgeRun


def _load_jsonl_stream(path: str, dim: int):
    zs, ys = [], []
    with open(path) as fh:
        for i, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            data = json.loads(line)
            z = np.asarray(data["z"], dtype=np.float64)
            if z.shape != (dim,):
                raise ValueError(f"line {i}: z has dimension {z.shape}, want ({dim},)")
            zs.append(z)
            ys.append(int(data["y"]) if "y" in data else None)
    return zs, ys


def simulate(cfg: RunConfig) -> SimulationResult:
    """Run the full pipeline for a config whose data source is a preset,
    a spec file, or a JSONL file of observations."""
    if cfg.mode == "service":
        raise ValueError("service mode is driven by the server, not simulate")

    spec: Optional[PiecewiseSpec] = None
    x_rows = None
    y_true: Optional[np.ndarray] = None

    if cfg.source.startswith("preset:"):
        name = cfg.source.split(":", 1)[1]
        if cfg.data_t is not None:
            spec = make_experiment_spec(
                cfg.seed,
                T=cfg.data_t,
                jumps=tuple(j for j in (100, 500, 700) if j <= cfg.data_t),
            )
        else:
            spec = make_experiment_spec(cfg.seed)
        x_rows, y_true = generate_stream(spec)
    elif cfg.source.startswith("spec:"):
        spec = PiecewiseSpec.load(cfg.source.split(":", 1)[1])
        x_rows, y_true = generate_stream(spec)
    elif cfg.source.startswith("jsonl:"):
        zs, ys = _load_jsonl_stream(cfg.source.split(":", 1)[1], cfg.model.dim)
        if any(y is None for y in ys) and cfg.mode in ("full",):
            raise ValueError("full-feedback simulation needs a 'y' on every line")
        y_true = (
            np.array([y if y is not None else -1 for y in ys])
            if any(y is not None for y in ys)
            else None
        )
    else:
        raise ValueError(f"simulate cannot run from source '{cfg.source}'")

    box = certify_box(cfg.model, cfg.box, user_H=cfg.user_h)
    run = FilterRun(
        cfg.model, box, cfg.channel, cfg.schedule, cfg.theta_init, keep_h=True
    )

    if x_rows is not None:
        noise_rng = np.random.default_rng([11, cfg.seed])
        zs = []
        for x in x_rows:
            z = corrupt(cfg.channel, cfg.model, x, noise_rng)
            zs.append(z)
            run.step(z, x_clean=x)
    else:
        for z in zs:
            run.step(z)

    T = len(run.trace)
    logb = np.array(run.trace.log_beliefs)
    warmup = logb[: cfg.calibrate] if cfg.calibrate > 0 else None
    transform = build_transform(cfg, warmup)
    zetas = np.array([zeta_from_log(transform, v) for v in logb])

    state = _initial_hedge_state(
        cfg, horizon=T, first_zeta=float(zetas[0]) if T else cfg.tau_min
    )

    if cfg.mode == "full":
        if y_true is None:
            raise ValueError("full-feedback simulation needs labels")
        hedge = run_hedge_full(zetas, y_true, state)
    elif cfg.mode == "label":
        if y_true is None:
            raise ValueError("label-efficient simulation needs a truth oracle")
        hedge = run_hedge_label_efficient(
            zetas, state, np.random.default_rng([13, cfg.seed]), truth_on_query(y_true)
        )
    elif cfg.mode == "arbitrary":
        if y_true is None:
            raise ValueError("arbitrary-feedback simulation needs labels")
        provider = on_declared_miss_prob(
            y_true, cfg.miss_prob, np.random.default_rng([17, cfg.seed])
        )
        hedge = run_hedge_arbitrary(zetas, state, provider)
    else:
        raise ValueError(f"unsupported mode '{cfg.mode}'")

    theta1 = cfg.theta_init if cfg.theta_init is not None else box.midpoint()
    if cfg.schedule is Schedule.INVERSE_T or spec is None:
        ledger = static_regret_ledger(cfg.model, box, run.trace, theta1)
    else:
        comp = comparator_from_spec(spec, cfg.model, box)
        ledger = dynamic_regret_ledger(cfg.model, box, run.trace, comp, theta1)

    report: dict = {
        "mode": cfg.mode,
        "T": T,
        "dim": cfg.model.dim,
        "seed": cfg.seed,
        "K": ledger.k_final,
        "M": ledger.m,
        "H": ledger.h,
        "Dmax": ledger.d_max,
        "bound_violations": ledger.violations(),
    }
    if y_true is not None:
        counts = evaluate_run(hedge.y_hat, y_true, hedge.queried)
        tau_star, static_mistakes = best_static_tau(
            zetas, y_true, cfg.tau_min, cfg.tau_max
        )
        report.update(counts)
        report["static_tau"] = tau_star
        report["static_total_errors"] = static_mistakes

    records = []
    for i in range(T):
        records.append(
            StreamRecord(
                t=i + 1,
                filtering_loss=float(run.trace.filtering_losses[i]),
                log_belief=float(logb[i]),
                zeta=float(zetas[i]),
                tau=float(hedge.taus[i]),
                y_hat=int(hedge.y_hat[i]),
                queried=bool(hedge.queried[i]),
                feedback=hedge.feedback[i],
                z=(list(map(float, zs[i])) if cfg.store_observations else None),
                h=(
                    list(map(float, run.trace.h_rows[i]))
                    if cfg.store_observations
                    else None
                ),
                true_loss=(
                    float(run.trace.true_losses[i]) if run.trace.true_losses else None
                ),
                y_true=(int(y_true[i]) if y_true is not None else None),
            )
        )
    return SimulationResult(
        records=records,
        report=report,
        ledger=ledger,
        spec=spec,
        zetas=zetas,
        y_true=y_true,
        hedge=hedge,
    )


class DetectSession:
    """Incremental detection over externally supplied observations.

    Each ``step`` consumes one observation (plus optional feedback label),
    advances the filter and the threshold, and returns the StreamRecord.
    Calibration warmups are not supported here; the transform must be fixed
    up front so the output is causal line by line.
    """

    def __init__(self, cfg: RunConfig):
        if cfg.calibrate > 0:
            raise ValueError(
                "streaming detection needs a fixed transform (hedge.calibrate = 0)"
            )
        self.cfg = cfg
        self.box = certify_box(cfg.model, cfg.box, user_H=cfg.user_h)
        self.run = FilterRun(
            cfg.model, self.box, cfg.channel, cfg.schedule, cfg.theta_init
        )
        self.transform = build_transform(cfg)
        self.state: Optional[HedgeState] = None
        self.rng = np.random.default_rng([13, cfg.seed])

    @property
    def t(self) -> int:
        return self.run.state.t

    def step(self, z: np.ndarray, y_feedback: Optional[int] = None) -> StreamRecord:
        cfg = self.cfg
        rec = self.run.step(z)
        zeta_t = zeta_from_log(self.transform, rec["log_belief"])
        if self.state is None:
            self.state = _initial_hedge_state(cfg, horizon=None, first_zeta=zeta_t)
        tau_t = self.state.tau
        queried = False
        feedback = None
        if cfg.mode == "label":
            # forecaster-driven queries; an unanswered query leaves tau alone
            y_hat = decide(self.state, zeta_t)
            queried = self.rng.random() < query_probability(zeta_t, tau_t)
            if queried and y_feedback is not None:
                feedback = int(y_feedback)
                self.state = update_full(self.state, y_hat, feedback)
            else:
                self.state = replace(self.state, t=self.state.t + 1)
        else:
            y_hat, self.state = step_arbitrary(self.state, zeta_t, y_feedback)
            feedback = y_feedback
        return StreamRecord(
            t=rec["t"],
            filtering_loss=rec["filtering_loss"],
            log_belief=rec["log_belief"],
            zeta=zeta_t,
            tau=tau_t,
            y_hat=int(y_hat),
            queried=queried,
            feedback=feedback,
            z=list(map(float, z)) if cfg.store_observations else None,
            h=list(map(float, rec["h"])) if cfg.store_observations else None,
        )
