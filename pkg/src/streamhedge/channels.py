"""Observation noise channels and unbiased sufficient-statistic estimators.

A channel corrupts the clean symbol x into z = N(x, r) with i.i.d. noise r.
For filtering we only need an estimator h with E[h(z) | x] = phi(x); the
mirror-descent updates then run on h exactly as they would on phi(x) in the
noiseless case.

Supported channels and their estimators:

* ``IDENTITY`` -- z = x, h(z) = phi(z).  Compatible with every family.
* ``BSC(p)``   -- each binary coordinate flipped independently with
  probability p < 1/2.  For the Bernoulli product (0/1 alphabet),
  h_i(z) = (z_i - p) / (1 - 2p).  For the spin model (+-1 alphabet, flip =
  sign change), h_a(z) = z_a / (1 - 2p) on vertices and
  h_ab(z) = z_a z_b / (1 - 2p)^2 on edges.
* ``AWGN(sigma2)`` -- z = x + Normal(0, sigma2 I) for the unit-variance
  Gaussian family, h(z) = z.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .families import FamilyKind, FamilyModel, sufficient_stat

__all__ = [
    "ChannelKind",
    "NoisyChannel",
    "identity_channel",
    "bsc",
    "awgn",
    "corrupt",
    "unbiased_stat",
    "StatNormTracker",
]


class ChannelKind(Enum):
    IDENTITY = "identity"
    BSC = "bsc"
    AWGN = "awgn"


_COMPATIBLE = {
    ChannelKind.IDENTITY: {
        FamilyKind.BERNOULLI_PRODUCT,
        FamilyKind.GAUSSIAN_UNIT_VAR,
        FamilyKind.ISING_EXACT,
    },
    ChannelKind.BSC: {FamilyKind.BERNOULLI_PRODUCT, FamilyKind.ISING_EXACT},
    ChannelKind.AWGN: {FamilyKind.GAUSSIAN_UNIT_VAR},
}


@dataclass(frozen=True)
class NoisyChannel:
    kind: ChannelKind
    p: float = 0.0
    sigma2: float = 0.0

    def __post_init__(self) -> None:
        if self.kind is ChannelKind.BSC and not (0.0 <= self.p < 0.5):
            raise ValueError(f"BSC crossover must satisfy 0 <= p < 1/2, got {self.p}")
        if self.kind is ChannelKind.AWGN and self.sigma2 <= 0.0:
            raise ValueError(f"AWGN variance must be positive, got {self.sigma2}")

    def compatible_with(self, model: FamilyModel) -> bool:
        return model.kind in _COMPATIBLE[self.kind]


def identity_channel() -> NoisyChannel:
    return NoisyChannel(ChannelKind.IDENTITY)


def bsc(p: float) -> NoisyChannel:
    return NoisyChannel(ChannelKind.BSC, p=p)


def awgn(sigma2: float) -> NoisyChannel:
    return NoisyChannel(ChannelKind.AWGN, sigma2=sigma2)


def _require_compatible(channel: NoisyChannel, model: FamilyModel) -> None:
    if not channel.compatible_with(model):
        raise ValueError(
            f"channel {channel.kind.value} is incompatible with family "
            f"{model.kind.value}"
        )


def corrupt(
    channel: NoisyChannel, model: FamilyModel, x: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """Pass one clean symbol through the channel."""
    _require_compatible(channel, model)
    x = np.asarray(x, dtype=np.float64)
    if channel.kind is ChannelKind.IDENTITY:
        return x.copy()
    if channel.kind is ChannelKind.BSC:
        flips = rng.random(x.shape[0]) < channel.p
        if model.kind is FamilyKind.BERNOULLI_PRODUCT:
            return np.where(flips, 1.0 - x, x)
        return np.where(flips, -x, x)
    return x + np.sqrt(channel.sigma2) * rng.standard_normal(x.shape[0])


def unbiased_stat(
    channel: NoisyChannel, model: FamilyModel, z: np.ndarray
) -> np.ndarray:
    """Estimator h(z) with E[h(z) | x] = phi(x)."""
    _require_compatible(channel, model)
    if channel.kind is ChannelKind.IDENTITY:
        return sufficient_stat(model, z)
    if channel.kind is ChannelKind.BSC:
        z = np.asarray(z, dtype=np.float64)
        denom = 1.0 - 2.0 * channel.p
        if model.kind is FamilyKind.BERNOULLI_PRODUCT:
            return (z - channel.p) / denom
        vertex = z / denom
        parts = [vertex]
        for a, b in model.edges:
            parts.append(np.array([vertex[a] * vertex[b]]))
        return np.concatenate(parts)
    return np.asarray(z, dtype=np.float64).copy()


class StatNormTracker:
    """Running max of ||h(z_t)|| / 2 over a stream.

    This is the K(z^T) constant in the filtering regret bounds, accumulated
    once per stream alongside the updates.
    """

    def __init__(self) -> None:
        self.k = 0.0

    def update(self, h: np.ndarray) -> float:
        self.k = max(self.k, 0.5 * float(np.linalg.norm(h)))
        return self.k
