"""Exponential-family models and their Legendre/Bregman machinery.

Three concrete families are supported:

* ``BERNOULLI_PRODUCT`` -- product of d Bernoulli coordinates over {0,1}^d,
  natural parameter theta in R^d, normalizer sum_i log(1 + e^{theta_i}).
* ``GAUSSIAN_UNIT_VAR`` -- unit-variance Gaussian with the standard Gaussian
  as dominating measure, so the normalizer is ||theta||^2 / 2 and the
  log-density of theta = 0 is identically zero.
* ``ISING_EXACT`` -- pairwise spin model on a small undirected graph
  (|V| <= 20), normalized by exact enumeration of all 2^|V| configurations.

Every operation works in the natural-parameter coordinates.  The dual
(mean) coordinates are reached through ``grad_log_partition`` and inverted
by ``inverse_grad``; the Kullback-Leibler divergence in natural coordinates

    kl(theta1, theta2) = Phi(theta2) - Phi(theta1) - <grad Phi(theta1), theta2 - theta1>

is the Bregman divergence used by the mirror-descent filter.

``FeasibleBox`` describes the box constraint the filter projects onto,
together with two certified constants: a curvature floor ``H`` (half the
smallest Fisher-information eigenvalue over the box) and ``Dmax`` (the KL
diameter of the box).  ``certify_box`` fills both.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Optional

import numpy as np

__all__ = [
    "FamilyKind",
    "FamilyModel",
    "FeasibleBox",
    "bernoulli_product",
    "gaussian_unit_var",
    "ising_exact",
    "log_partition",
    "grad_log_partition",
    "hessian_log_partition",
    "inverse_grad",
    "kl_divergence",
    "sufficient_stat",
    "log_density",
    "sample",
    "certify_box",
    "make_box",
    "sigmoid",
    "logit",
    "softplus",
]

# Softplus switches to the asymptotic form above this threshold to avoid
# overflow in exp(t) while keeping full double precision.
_SOFTPLUS_CUTOFF = 30.0

# Ising certification refuses to guess a curvature floor past this dimension
# unless the caller supplies one explicitly.
_ISING_CERTIFY_MAX_DIM = 12

_NEWTON_MAX_ITER = 200
_NEWTON_MAX_HALVINGS = 50
# contractual residual tolerance, and the tighter target Newton aims for so
# that theta-space error stays below 1e-8 even under flat curvature
_NEWTON_TOL = 1e-10
_NEWTON_TARGET = 1e-13


class FamilyKind(Enum):
    BERNOULLI_PRODUCT = "bernoulli_product"
    GAUSSIAN_UNIT_VAR = "gaussian_unit_var"
    ISING_EXACT = "ising_exact"


@dataclass(frozen=True)
class FamilyModel:
    """An exponential family instance.

    ``dim`` is the natural-parameter dimension: d for the product families,
    |V| + |E| for the Ising model.  ``n_vertices``/``edges`` are only set
    for the Ising kind.
    """

    kind: FamilyKind
    dim: int
    n_vertices: int = 0
    edges: tuple[tuple[int, int], ...] = ()

    def __post_init__(self) -> None:
        if self.dim <= 0:
            raise ValueError(f"model dimension must be positive, got {self.dim}")
        if self.kind is FamilyKind.ISING_EXACT:
            n = self.n_vertices
            if n <= 0 or n > 20:
                raise ValueError(f"ising model needs 1 <= |V| <= 20, got {n}")
            seen = set()
            for a, b in self.edges:
                if not (0 <= a < n and 0 <= b < n) or a == b:
                    raise ValueError(f"bad edge ({a},{b}) for {n} vertices")
                key = (min(a, b), max(a, b))
                if key in seen:
                    raise ValueError(f"duplicate edge ({a},{b})")
                seen.add(key)
            if self.dim != n + len(self.edges):
                raise ValueError(
                    f"ising dim must be |V|+|E| = {n + len(self.edges)}, got {self.dim}"
                )
        elif self.n_vertices or self.edges:
            raise ValueError("graph fields are only valid for the ising kind")

    @property
    def is_product(self) -> bool:
        return self.kind is not FamilyKind.ISING_EXACT


def bernoulli_product(dim: int) -> FamilyModel:
    return FamilyModel(FamilyKind.BERNOULLI_PRODUCT, dim)


def gaussian_unit_var(dim: int) -> FamilyModel:
    return FamilyModel(FamilyKind.GAUSSIAN_UNIT_VAR, dim)


def ising_exact(n_vertices: int, edges) -> FamilyModel:
    edges = tuple((int(a), int(b)) for a, b in edges)
    return FamilyModel(
        FamilyKind.ISING_EXACT,
        dim=n_vertices + len(edges),
        n_vertices=n_vertices,
        edges=edges,
    )


@dataclass(frozen=True)
class FeasibleBox:
    """Box constraint on the natural parameter, with certified constants.

    ``H`` is the curvature floor: the smallest eigenvalue of the Fisher
    information over the box is at least 2H.  ``Dmax`` bounds the KL
    divergence between any two box points.  Both are ``None`` until
    ``certify_box`` fills them.
    """

    lo: np.ndarray
    hi: np.ndarray
    H: Optional[float] = None
    Dmax: Optional[float] = None

    def __post_init__(self) -> None:
        lo = np.asarray(self.lo, dtype=np.float64)
        hi = np.asarray(self.hi, dtype=np.float64)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        if lo.shape != hi.shape or lo.ndim != 1:
            raise ValueError("box bounds must be 1-d vectors of equal length")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("degenerate box: lo > hi in some coordinate")

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, theta: np.ndarray, atol: float = 0.0) -> bool:
        return bool(
            np.all(theta >= self.lo - atol) and np.all(theta <= self.hi + atol)
        )

    def clip(self, theta: np.ndarray) -> np.ndarray:
        return np.clip(theta, self.lo, self.hi)

    def midpoint(self) -> np.ndarray:
        return 0.5 * (self.lo + self.hi)


def make_box(model: FamilyModel, lo, hi) -> FeasibleBox:
    """Build a box for ``model``, broadcasting scalar bounds to its dimension."""
    lo = np.broadcast_to(np.asarray(lo, dtype=np.float64), (model.dim,)).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=np.float64), (model.dim,)).copy()
    return FeasibleBox(lo=lo, hi=hi)


# ----------------------------------------------------------------------
# scalar helpers
# ----------------------------------------------------------------------


def softplus(t: np.ndarray) -> np.ndarray:
    """log(1 + e^t), switching to t + log1p(e^-t) for large t."""
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    big = t > _SOFTPLUS_CUTOFF
    out[big] = t[big] + np.log1p(np.exp(-t[big]))
    out[~big] = np.log1p(np.exp(t[~big]))
    return out


def sigmoid(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64)
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def logit(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=np.float64)
    return np.log(p) - np.log1p(-p)


# ----------------------------------------------------------------------
# Ising enumeration cache
# ----------------------------------------------------------------------

_ISING_CACHE: dict[tuple[int, tuple[tuple[int, int], ...]], np.ndarray] = {}


def _ising_stats(model: FamilyModel) -> np.ndarray:
    """The 2^|V| x dim matrix of sufficient statistics, one row per spin config.

    Cached per (n_vertices, edges); stored as int8 since entries are +-1.
    """
    key = (model.n_vertices, model.edges)
    stats = _ISING_CACHE.get(key)
    if stats is None:
        n = model.n_vertices
        bits = (np.arange(2**n, dtype=np.uint32)[:, None] >> np.arange(n)) & 1
        spins = (2 * bits - 1).astype(np.int8)
        cols = [spins]
        for a, b in model.edges:
            cols.append((spins[:, a] * spins[:, b])[:, None])
        stats = np.concatenate(cols, axis=1)
        _ISING_CACHE[key] = stats
    return stats


def _ising_energies(model: FamilyModel, theta: np.ndarray) -> np.ndarray:
    stats = _ising_stats(model)
    if stats.size <= 4_000_000:
        return stats.astype(np.float64) @ theta
    # large graphs: accumulate column-wise to avoid a huge float64 temp
    energies = np.zeros(stats.shape[0], dtype=np.float64)
    for j in range(stats.shape[1]):
        energies += theta[j] * stats[:, j]
    return energies


def _logsumexp(a: np.ndarray) -> float:
    m = float(np.max(a))
    return m + float(np.log(np.sum(np.exp(a - m))))


# ----------------------------------------------------------------------
# validation
# ----------------------------------------------------------------------


def _check_theta(model: FamilyModel, theta) -> np.ndarray:
    theta = np.asarray(theta, dtype=np.float64)
    if theta.shape != (model.dim,):
        raise ValueError(f"theta must have shape ({model.dim},), got {theta.shape}")
    if not np.all(np.isfinite(theta)):
        raise ValueError("theta must be finite")
    return theta


def _check_observation(model: FamilyModel, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        if x.shape != (model.dim,):
            raise ValueError(f"observation must have shape ({model.dim},)")
        if not np.all((x == 0.0) | (x == 1.0)):
            raise ValueError("bernoulli observations must be 0/1 valued")
    elif model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        if x.shape != (model.dim,):
            raise ValueError(f"observation must have shape ({model.dim},)")
        if not np.all(np.isfinite(x)):
            raise ValueError("observation must be finite")
    else:
        if x.shape != (model.n_vertices,):
            raise ValueError(f"spin observation must have shape ({model.n_vertices},)")
        if not np.all((x == -1.0) | (x == 1.0)):
            raise ValueError("spin observations must be +-1 valued")
    return x


# ----------------------------------------------------------------------
# core operations
# ----------------------------------------------------------------------


def log_partition(model: FamilyModel, theta) -> float:
    """Normalizer Phi(theta) of the family."""
    theta = _check_theta(model, theta)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        return float(np.sum(softplus(theta)))
    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        return float(0.5 * np.dot(theta, theta))
    return _logsumexp(_ising_energies(model, theta))


def grad_log_partition(model: FamilyModel, theta) -> np.ndarray:
    """Mean parameter mu = grad Phi(theta) = E_theta[phi(X)]."""
    theta = _check_theta(model, theta)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        return sigmoid(theta)
    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        return theta.copy()
    energies = _ising_energies(model, theta)
    w = np.exp(energies - _logsumexp(energies))
    return w @ _ising_stats(model).astype(np.float64)


def hessian_log_partition(model: FamilyModel, theta) -> np.ndarray:
    """Fisher information grad^2 Phi(theta) = Cov_theta[phi(X)]."""
    theta = _check_theta(model, theta)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        s = sigmoid(theta)
        return np.diag(s * (1.0 - s))
    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        return np.eye(model.dim)
    stats = _ising_stats(model).astype(np.float64)
    energies = _ising_energies(model, theta)
    w = np.exp(energies - _logsumexp(energies))
    mu = w @ stats
    second = (stats * w[:, None]).T @ stats
    return second - np.outer(mu, mu)


def inverse_grad(model: FamilyModel, mu) -> np.ndarray:
    """Invert the mean map: return theta with grad Phi(theta) = mu.

    Closed form for the product families; damped Newton for Ising, with
    max-norm tolerance 1e-10 on the residual.
    """
    mu = np.asarray(mu, dtype=np.float64)
    if mu.shape != (model.dim,):
        raise ValueError(f"mu must have shape ({model.dim},), got {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise ValueError("mu must be finite")

    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        if np.any(mu <= 0.0) or np.any(mu >= 1.0):
            raise ValueError("bernoulli mean coordinates must lie in (0,1)")
        return logit(mu)
    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        return mu.copy()

    if np.any(np.abs(mu) >= 1.0):
        raise ValueError("ising mean coordinates must lie in (-1,1)")
    theta = np.zeros(model.dim)
    resid = grad_log_partition(model, theta) - mu
    norm = float(np.max(np.abs(resid)))
    for _ in range(_NEWTON_MAX_ITER):
        if norm <= _NEWTON_TARGET:
            return theta
        hess = hessian_log_partition(model, theta)
        try:
            step = np.linalg.solve(hess, resid)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hess, resid, rcond=None)[0]
        scale = 1.0
        for _ in range(_NEWTON_MAX_HALVINGS):
            cand = theta - scale * step
            cand_resid = grad_log_partition(model, cand) - mu
            cand_norm = float(np.max(np.abs(cand_resid)))
            if cand_norm < norm:
                theta, resid, norm = cand, cand_resid, cand_norm
                break
            scale *= 0.5
        else:
            # stalled at machine precision; the contract tolerance may
            # already hold even though the tighter target does not
            if norm <= _NEWTON_TOL:
                return theta
            raise RuntimeError("inverse_grad: damped Newton stalled")
    if norm <= _NEWTON_TOL:
        return theta
    raise RuntimeError(
        f"inverse_grad: Newton did not converge after {_NEWTON_MAX_ITER} iterations"
    )


def kl_divergence(model: FamilyModel, theta1, theta2) -> float:
    """KL divergence D(p_theta1 || p_theta2) in natural coordinates."""
    theta1 = _check_theta(model, theta1)
    theta2 = _check_theta(model, theta2)
    mu1 = grad_log_partition(model, theta1)
    return (
        log_partition(model, theta2)
        - log_partition(model, theta1)
        - float(np.dot(mu1, theta2 - theta1))
    )


def sufficient_stat(model: FamilyModel, x) -> np.ndarray:
    """Feature map phi(x): identity for product families, vertex values
    followed by edge products (in declared edge order) for Ising."""
    x = _check_observation(model, x)
    if model.is_product:
        return x.copy()
    parts = [x]
    for a, b in model.edges:
        parts.append(np.array([x[a] * x[b]]))
    return np.concatenate(parts)


def log_density(model: FamilyModel, theta, x) -> float:
    theta = _check_theta(model, theta)
    phi = sufficient_stat(model, x)
    return float(np.dot(theta, phi)) - log_partition(model, theta)


def sample(model: FamilyModel, theta, rng: np.random.Generator) -> np.ndarray:
    """One draw from p_theta, deterministic given the generator state."""
    theta = _check_theta(model, theta)
    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        return (rng.random(model.dim) < sigmoid(theta)).astype(np.float64)
    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        return theta + rng.standard_normal(model.dim)
    energies = _ising_energies(model, theta)
    w = np.exp(energies - _logsumexp(energies))
    cdf = np.cumsum(w)
    cdf[-1] = 1.0
    idx = int(np.searchsorted(cdf, rng.random(), side="right"))
    idx = min(idx, cdf.shape[0] - 1)
    spins = _ising_stats(model)[idx, : model.n_vertices]
    return spins.astype(np.float64)


# ----------------------------------------------------------------------
# box certification
# ----------------------------------------------------------------------


def _bernoulli_scalar_kl(t1: float, t2: float) -> float:
    a = np.array([t1])
    b = np.array([t2])
    return float((softplus(b) - softplus(a) - sigmoid(a) * (b - a))[0])


def _ising_scan_points(
    box: FeasibleBox, grid_points: int, rng_seed: int = 0
) -> np.ndarray:
    """Corner + grid/sampled scan points for the heuristic Ising certification."""
    dim = box.dim
    pts = []
    if grid_points**dim <= 100_000:
        axes = [np.linspace(box.lo[i], box.hi[i], grid_points) for i in range(dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts.append(np.stack([m.ravel() for m in mesh], axis=1))
    else:
        if 2**dim <= 4096:
            bits = (np.arange(2**dim, dtype=np.uint32)[:, None] >> np.arange(dim)) & 1
            corners = np.where(bits == 1, box.hi, box.lo)
            pts.append(corners)
        rng = np.random.default_rng(rng_seed)
        pts.append(box.lo + rng.random((2000, dim)) * (box.hi - box.lo))
        pts.append(box.midpoint()[None, :])
    return np.unique(np.concatenate(pts, axis=0), axis=0)


def certify_box(
    model: FamilyModel,
    box: FeasibleBox,
    user_H: Optional[float] = None,
    grid_points: int = 5,
) -> FeasibleBox:
    """Fill the curvature floor H and KL diameter Dmax of a box.

    Product families are certified analytically (the per-coordinate scans
    are exact because both the Fisher diagonal and the scalar KL attain
    their extremes at interval endpoints).  Ising uses a heuristic
    corner/grid scan and refuses to guess H above dimension 12 unless
    ``user_H`` is supplied.
    """
    if box.dim != model.dim:
        raise ValueError("box dimension does not match the model")

    if model.kind is FamilyKind.BERNOULLI_PRODUCT:
        b = np.maximum(np.abs(box.lo), np.abs(box.hi))
        s = sigmoid(b)
        H = float(np.min(s * (1.0 - s)) / 2.0)
        dmax = 0.0
        for i in range(model.dim):
            cands = [
                _bernoulli_scalar_kl(a, c)
                for a in (box.lo[i], box.hi[i])
                for c in (box.lo[i], box.hi[i])
            ]
            dmax += max(cands)
        if user_H is not None:
            H = float(user_H)
        return replace(box, H=H, Dmax=dmax)

    if model.kind is FamilyKind.GAUSSIAN_UNIT_VAR:
        H = 0.5 if user_H is None else float(user_H)
        dmax = float(0.5 * np.sum((box.hi - box.lo) ** 2))
        return replace(box, H=H, Dmax=dmax)

    if user_H is None and model.dim > _ISING_CERTIFY_MAX_DIM:
        raise ValueError(
            f"refusing heuristic H certification for ising dim {model.dim} > "
            f"{_ISING_CERTIFY_MAX_DIM}; supply user_H"
        )
    pts = _ising_scan_points(box, grid_points)
    if user_H is not None:
        H = float(user_H)
    else:
        min_eig = np.inf
        for p in pts:
            eig = float(np.linalg.eigvalsh(hessian_log_partition(model, p))[0])
            min_eig = min(min_eig, eig)
        H = min_eig / 2.0
    # KL diameter over scan-point pairs, from cached (Phi, grad) per point
    if pts.shape[0] > 256:
        keep = np.linspace(0, pts.shape[0] - 1, 256).astype(int)
        pts = pts[keep]
    phis = np.array([log_partition(model, p) for p in pts])
    grads = np.stack([grad_log_partition(model, p) for p in pts])
    dmax = 0.0
    for i in range(pts.shape[0]):
        vals = phis - phis[i] - (pts - pts[i]) @ grads[i]
        dmax = max(dmax, float(np.max(vals)))
    return replace(box, H=H, Dmax=dmax)
