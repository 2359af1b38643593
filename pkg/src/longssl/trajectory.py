"""Trajectory-vector algebra and the pretext loss functions.

A latent trajectory vector is the difference of the two latent codes of a
consecutive image pair, ``dz = z_s - z_t``, optionally divided by the time
interval ``dt`` between the acquisitions (the "speed" version). The two
alignment objectives share one structure::

    lambda_rec * (mse(x_t, x_t_rec) + mse(x_s, x_s_rec)) - lambda_dir * cos(dz, target)

where the target is either a single learned global direction (shared across
the batch) or a per-sample pooled neighborhood direction. Everything here is
a pure function of torch tensors and is differentiable end to end.

Conventions (see tests for the frozen numeric examples):

* reconstruction is MEAN squared error per image, so the default weight
  ``lambda_rec = 5.0`` behaves comparably across image resolutions;
* batch reduction is the arithmetic mean, reading the expectation over
  pairs as the empirical minibatch average;
* a trajectory whose norm is at or below ``EPS_VEC`` contributes no
  alignment term (its cosine is taken as 0) instead of producing NaNs.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import math

import torch
from torch import Tensor

EPS_VEC = 1e-12


class DegenerateVectorError(ValueError):
    """A vector with (numerically) zero norm was passed where a direction is required."""


@dataclass(frozen=True)
class TrajectoryVector:
    """A flattened latent difference, optionally time-normalized.

    ``dt`` is present (in years) exactly when ``normalized`` is true.
    """

    values: Tensor
    normalized: bool = False
    dt: Optional[float] = None

    def __post_init__(self) -> None:
        if self.values.dim() != 1:
            object.__setattr__(self, "values", self.values.reshape(-1))
        if self.normalized:
            if self.dt is None or not self.dt > 0:
                raise ValueError("normalized trajectory requires dt > 0")
        elif self.dt is not None:
            raise ValueError("dt is only meaningful for a normalized trajectory")

    @property
    def dim(self) -> int:
        return self.values.numel()


@dataclass(frozen=True)
class LossWeights:
    """Weights of the reconstruction and direction-alignment terms."""

    lambda_rec: float = 5.0
    lambda_dir: float = 1.0

    def __post_init__(self) -> None:
        for name in ("lambda_rec", "lambda_dir"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if self.lambda_rec == 0 and self.lambda_dir == 0:
            raise ValueError("lambda_rec and lambda_dir cannot both be zero")


VectorLike = Union[Tensor, TrajectoryVector]


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else torch.as_tensor(x, dtype=torch.get_default_dtype())


def trajectory_vector(z_t, z_s) -> TrajectoryVector:
    """Difference of two latent codes, ``z_s - z_t``, flattened."""
    z_t, z_s = _as_tensor(z_t), _as_tensor(z_s)
    if z_t.shape != z_s.shape:
        raise ValueError(f"latent shapes differ: {tuple(z_t.shape)} vs {tuple(z_s.shape)}")
    return TrajectoryVector(values=(z_s - z_t).reshape(-1))


def normalized_trajectory(z_t, z_s, dt: float) -> TrajectoryVector:
    """Time-normalized trajectory ``(z_s - z_t) / dt`` with ``dt`` in years."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    plain = trajectory_vector(z_t, z_s)
    return TrajectoryVector(values=plain.values / dt, normalized=True, dt=float(dt))


def cosine_alignment(a, b) -> Tensor:
    """Cosine of the angle between two nonzero vectors, in [-1, 1].

    Raises :class:`DegenerateVectorError` if either norm is at or below
    ``EPS_VEC``; batched training code uses :func:`batch_cosine` instead,
    which masks degenerate rows.
    """
    a = _vector_values(a).reshape(-1)
    b = _vector_values(b).reshape(-1)
    if a.numel() != b.numel():
        raise ValueError(f"vector lengths differ: {a.numel()} vs {b.numel()}")
    na, nb = a.norm(), b.norm()
    if na <= EPS_VEC or nb <= EPS_VEC:
        raise DegenerateVectorError("cosine of a (numerically) zero vector is undefined")
    return (a * b).sum() / (na * nb)


def _vector_values(v: VectorLike) -> Tensor:
    return v.values if isinstance(v, TrajectoryVector) else _as_tensor(v)


def _as_matrix(v: VectorLike) -> Tensor:
    """Coerce a vector-like argument to shape (B, D)."""
    t = _vector_values(v)
    if t.dim() == 1:
        return t.unsqueeze(0)
    return t.reshape(t.shape[0], -1)


def batch_cosine(dz: VectorLike, target: VectorLike) -> tuple[Tensor, Tensor]:
    """Per-row cosine between trajectories and their alignment target.

    ``dz`` has shape (B, D); ``target`` is either a single global direction
    (D,) broadcast over the batch or per-row directions (B, D). Rows where
    either vector is degenerate get cosine 0 and ``valid`` False, so they
    drop out of the alignment term without poisoning gradients.
    """
    dz_m = _as_matrix(dz)
    t_m = _vector_values(target)
    t_m = t_m.unsqueeze(0) if t_m.dim() == 1 else t_m.reshape(t_m.shape[0], -1)
    if t_m.shape[-1] != dz_m.shape[-1]:
        raise ValueError(
            f"target dimension {t_m.shape[-1]} does not match trajectory dimension {dz_m.shape[-1]}"
        )
    if t_m.shape[0] not in (1, dz_m.shape[0]):
        raise ValueError(f"target batch {t_m.shape[0]} incompatible with trajectories {dz_m.shape[0]}")

    dz_norm = dz_m.norm(dim=1)
    t_norm = t_m.norm(dim=1).expand_as(dz_norm)
    valid = (dz_norm > EPS_VEC) & (t_norm > EPS_VEC)
    dots = (dz_m * t_m).sum(dim=1)
    # where() keeps gradients away from the degenerate rows (their branch is
    # constant 0 and the denominator is replaced by 1 before dividing)
    denom = torch.where(valid, dz_norm * t_norm, torch.ones_like(dz_norm))
    cos = torch.where(valid, dots / denom, torch.zeros_like(dots))
    return cos, valid


def reconstruction_loss(x, x_rec) -> Tensor:
    """Mean squared reconstruction error over all elements."""
    x, x_rec = _as_tensor(x), _as_tensor(x_rec)
    if x.shape != x_rec.shape:
        raise ValueError(f"image shapes differ: {tuple(x.shape)} vs {tuple(x_rec.shape)}")
    return ((x - x_rec) ** 2).mean()


def siamese_time_loss(predicted_dt, true_dt) -> Tensor:
    """Squared error between predicted and true time interval (batch mean)."""
    pred = _as_tensor(predicted_dt).reshape(-1)
    true = _as_tensor(true_dt).reshape(-1)
    if pred.shape != true.shape:
        raise ValueError(f"shape mismatch: {tuple(pred.shape)} vs {tuple(true.shape)}")
    if bool((true <= 0).any()):
        raise ValueError("true time intervals must be positive")
    return ((pred - true) ** 2).mean()


def _alignment_objective(x_t, x_s, x_t_rec, x_s_rec, dz, target, weights: LossWeights) -> Tensor:
    rec = reconstruction_loss(x_t, x_t_rec) + reconstruction_loss(x_s, x_s_rec)
    cos, _ = batch_cosine(dz, target)
    return weights.lambda_rec * rec - weights.lambda_dir * cos.mean()


def lssl_objective(x_t, x_s, x_t_rec, x_s_rec, dz: VectorLike, tau, w: LossWeights) -> Tensor:
    """Reconstruction plus alignment of trajectories with a global direction.

    ``tau`` is one learned direction of the flattened latent dimension,
    shared by every pair in the batch. Returns the batch-mean objective.
    """
    tau_t = _vector_values(tau).reshape(-1)
    return _alignment_objective(x_t, x_s, x_t_rec, x_s_rec, dz, tau_t, w)


def lne_objective(x_t, x_s, x_t_rec, x_s_rec, dz: VectorLike, dh, w: LossWeights) -> Tensor:
    """Reconstruction plus alignment with per-sample pooled neighborhood directions.

    Identical structure to :func:`lssl_objective` with the global direction
    replaced by each node's pooled neighborhood trajectory ``dh``.
    """
    dz_m = _as_matrix(dz)
    dh_m = _as_matrix(dh)
    if dh_m.shape != dz_m.shape:
        raise ValueError(f"dh shape {tuple(dh_m.shape)} does not match dz {tuple(dz_m.shape)}")
    return _alignment_objective(x_t, x_s, x_t_rec, x_s_rec, dz_m, dh_m, w)
