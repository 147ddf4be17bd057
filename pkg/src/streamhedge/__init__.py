"""Streaming anomaly detection with exponential-family belief filtering
and feedback-hedged thresholds."""

from .channels import ChannelKind, NoisyChannel, awgn, bsc, identity_channel
from .families import (
    FamilyKind,
    FamilyModel,
    FeasibleBox,
    bernoulli_product,
    certify_box,
    gaussian_unit_var,
    grad_log_partition,
    inverse_grad,
    ising_exact,
    kl_divergence,
    log_density,
    log_partition,
    make_box,
    sample,
    sufficient_stat,
)
from .filtering import (
    FilterRun,
    FilterState,
    FilterTrace,
    Schedule,
    bregman_project,
    filtering_loss,
    md_step,
    run_filter,
    true_loss,
)
from .hedging import (
    HedgeState,
    ZetaKind,
    ZetaTransform,
    calibrate,
    decide,
    hinge_loss,
    new_hedge_state,
    query_probability,
    step_arbitrary,
    step_full,
    step_label_efficient,
    update_full,
    zeta,
    zeta_from_log,
)

__version__ = "0.1.0"
