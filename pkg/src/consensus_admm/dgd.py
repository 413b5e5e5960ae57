"""Distributed gradient descent baseline.

Consensus averaging against Metropolis-Hastings weights plus a local
gradient step with the diminishing stepsize 1/k^(1/3).  Serves as the
sublinear comparator for the linearly convergent ADMM engine.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rates
from .admm import Trajectory
from .objectives import ObjectiveSet, centralized_solve
from .topology import Topology


@dataclass(frozen=True)
class MixingMatrix:
    """Symmetric doubly stochastic matrix conforming to the graph."""

    W_mix: np.ndarray


def metropolis_weights(t: Topology) -> MixingMatrix:
    """w_ij = 1/(1 + max(d_i, d_j)) on edges, diagonal fills the row to 1."""
    d = t.degrees()
    W = np.zeros((t.L, t.L))
    for i, j in t.edges:
        w = 1.0 / (1.0 + max(d[i], d[j]))
        W[i, j] = w
        W[j, i] = w
    np.fill_diagonal(W, 1.0 - W.sum(axis=1))
    return MixingMatrix(W_mix=W)


def run_dgd(
    t: Topology,
    s: ObjectiveSet,
    iters: int,
    x_star: np.ndarray | None = None,
) -> Trajectory:
    """Run DGD from zero initial conditions for a fixed iteration count.

    Emits the same trajectory record as the ADMM engine (no dual
    tracking).  The stepsize index starts at 1 to keep the first step
    finite.
    """
    if iters < 1:
        raise ValueError(f"need at least one iteration, got {iters}")
    if x_star is None:
        _, x_star = centralized_solve(s)
    W = metropolis_weights(t).W_mix
    L, N = t.L, s.N
    Xs = x_star.reshape(L, N)
    X = np.zeros((L, N))
    err = [float(np.linalg.norm(X - Xs))]
    for k in range(iters):
        if s.is_quadratic:
            G = np.einsum("lij,lj->li", s.gram_stack, X) - s.Utv_stack
        else:
            G = np.stack([f.gradient(X[i]) for i, f in enumerate(s.locals)])
        X = W @ X - G / (k + 1) ** (1.0 / 3.0)
        err.append(float(np.linalg.norm(X - Xs)))
    report = rates.empirical_rates(np.array(err))
    return Trajectory(
        err_x=np.array(err),
        err_u_G2=None,
        rho=report.rho,
        rho_bar=report.rho_bar,
        identity_gap_rel=None,
        converged=False,
        final_state=None,
    )
