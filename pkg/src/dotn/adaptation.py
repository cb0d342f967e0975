"""Joint-distribution alignment losses for regression domain adaptation.

The pieces here are pure array functions: the pairwise joint cost that the
transport solver consumes, the supervised source loss, the transported
alignment loss, and the critic/generator pair used for the adversarial
distance estimate. Each loss returns its value together with the gradient
with respect to the network outputs it touches; backpropagation into
parameters is the caller's job via ``Network.backward``.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ShapeError
from .ot import CostMatrix, Coupling

__all__ = [
    "JointCostParams",
    "BatchPair",
    "joint_cost",
    "loss_l1",
    "loss_l2",
    "loss_critic",
    "loss_generator",
    "wgan_value",
]


@dataclass(frozen=True)
class JointCostParams:
    """Weights for the two terms of the joint cost (both must be > 0)."""

    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError("alpha and beta must be positive")


class BatchPair:
    """One training batch: m labeled source rows plus m unlabeled target rows."""

    def __init__(self, source_inputs, source_labels, target_inputs):
        xs = np.asarray(source_inputs, dtype=np.float64)
        ys = np.asarray(source_labels, dtype=np.float64)
        xt = np.asarray(target_inputs, dtype=np.float64)
        if xs.ndim != 2 or ys.ndim != 2 or xt.ndim != 2:
            raise ShapeError("batch arrays must be 2-d (rows are samples)")
        if not (xs.shape[0] == ys.shape[0] == xt.shape[0]):
            raise ShapeError(
                f"batch row counts differ: {xs.shape[0]}, {ys.shape[0]}, {xt.shape[0]}"
            )
        if xs.shape[1] != xt.shape[1]:
            raise ShapeError("source and target inputs must share feature dim")
        for name, a in (("source_inputs", xs), ("source_labels", ys), ("target_inputs", xt)):
            if not np.all(np.isfinite(a)):
                raise ValueError(f"{name} contains non-finite values")
        self.source_inputs = xs
        self.source_labels = ys
        self.target_inputs = xt

    @property
    def size(self) -> int:
        return self.source_inputs.shape[0]


def _pairwise_sq_dists(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # ||a_i - b_j||^2 expanded; clipped at 0 against cancellation.
    sq = (a * a).sum(axis=1)[:, None] + (b * b).sum(axis=1)[None, :] - 2.0 * (a @ b.T)
    return np.maximum(sq, 0.0)


def joint_cost(bp: BatchPair, f_target_outputs: np.ndarray, p: JointCostParams) -> CostMatrix:
    """Pairwise cost alpha*||x^s_i - x^t_j||^2 + beta*||y^s_i - f(x^t_j)||^2."""
    ft = np.asarray(f_target_outputs, dtype=np.float64)
    if ft.shape != (bp.size, bp.source_labels.shape[1]):
        raise ShapeError(
            f"f outputs shape {ft.shape} does not match "
            f"({bp.size}, {bp.source_labels.shape[1]})"
        )
    c = p.alpha * _pairwise_sq_dists(bp.source_inputs, bp.target_inputs)
    c += p.beta * _pairwise_sq_dists(bp.source_labels, ft)
    return CostMatrix(c)


def loss_l1(source_outputs: np.ndarray, source_labels: np.ndarray):
    """Mean squared error on labeled source data, kept during adaptation so
    source knowledge is not forgotten.

    Returns (value, gradient w.r.t. source_outputs).
    """
    out = np.asarray(source_outputs, dtype=np.float64)
    lab = np.asarray(source_labels, dtype=np.float64)
    if out.shape != lab.shape:
        raise ShapeError(f"output shape {out.shape} != label shape {lab.shape}")
    n = out.shape[0]
    diff = out - lab
    value = float((diff * diff).sum() / n)
    grad = (2.0 / n) * diff
    return value, grad


def loss_l2(gamma: Coupling, bp: BatchPair, f_target_outputs: np.ndarray, p: JointCostParams):
    """Transport-weighted joint cost sum_ij gamma_ij * C_ij.

    Returns (value, gradient w.r.t. f_target_outputs). Only the label term
    carries gradient; the input-distance term is constant in f and serves to
    steer the plan.
    """
    ft = np.asarray(f_target_outputs, dtype=np.float64)
    if gamma.plan.shape != (bp.size, bp.size):
        raise ShapeError(
            f"coupling shape {gamma.plan.shape} does not match batch size {bp.size}"
        )
    cost = joint_cost(bp, ft, p)
    value = float(np.sum(gamma.plan * cost.values))
    # d/d f_j of sum_i g_ij * beta * ||y_i - f_j||^2 = 2 beta sum_i g_ij (f_j - y_i)
    col_mass = gamma.plan.sum(axis=0)
    grad = 2.0 * p.beta * (col_mass[:, None] * ft - gamma.plan.T @ bp.source_labels)
    return value, grad


def _as_scores(v, name):
    a = np.asarray(v, dtype=np.float64).reshape(-1)
    if a.size == 0:
        raise ShapeError(f"{name} is empty")
    return a


def loss_critic(critic_on_source_labels, critic_on_f_target_outputs):
    """Critic objective mean h(y^s) - mean h(f(x^t)).

    The training loop ASCENDS this in h (the dual is a maximum over critics);
    written as stated so the logged value is directly the dual estimate.
    Returns (value, grad w.r.t. real scores, grad w.r.t. fake scores).
    """
    real = _as_scores(critic_on_source_labels, "critic_on_source_labels")
    fake = _as_scores(critic_on_f_target_outputs, "critic_on_f_target_outputs")
    if real.size != fake.size:
        raise ShapeError(f"score lengths differ: {real.size} vs {fake.size}")
    m = real.size
    value = float(real.mean() - fake.mean())
    grad_real = np.full(m, 1.0 / m)
    grad_fake = np.full(m, -1.0 / m)
    return value, grad_real, grad_fake


def loss_generator(critic_on_f_target_outputs):
    """Generator objective -mean h(f(x^t)); descending it pushes f's outputs
    toward regions the critic scores as real.

    Returns (value, grad w.r.t. the critic outputs).
    """
    fake = _as_scores(critic_on_f_target_outputs, "critic_on_f_target_outputs")
    m = fake.size
    value = float(-fake.mean())
    grad = np.full(m, -1.0 / m)
    return value, grad


def wgan_value(critic_on_source_labels, critic_on_f_target_outputs) -> float:
    """Current dual estimate of the distance; numerically equal to the critic
    loss value, exposed separately for monitoring."""
    value, _, _ = loss_critic(critic_on_source_labels, critic_on_f_target_outputs)
    return value
