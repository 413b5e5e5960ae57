"""Incidence and Laplacian matrices of a topology, and their spectra.

All matrices are stored at base dimension (one row per agent, one column
per arc).  The block-extended operators obtained by replacing each entry
with a multiple of the N x N identity share the base spectra with
multiplicity N, so eigendecompositions are only ever taken at base size.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .topology import Topology

# eigenvalues at or below ZERO_REL * (largest eigenvalue) count as zero
ZERO_REL = 1e-9


@dataclass(frozen=True)
class IncidenceSet:
    """Incidence and Laplacian matrices of one graph.

    Mplus:  unoriented incidence, +1 at both endpoint rows of each arc.
    Mminus: oriented incidence, +1 at the tail row, -1 at the head row.
    Lplus = Mplus Mplus^T / 2 (signless Laplacian, degrees + adjacency),
    Lminus = Mminus Mminus^T / 2 (signed Laplacian, degrees - adjacency),
    W = (Lplus + Lminus) / 2 (diagonal degree matrix); all exact integers.
    N is the per-agent block dimension of the extended operators.
    """

    Mplus: np.ndarray
    Mminus: np.ndarray
    Lplus: np.ndarray
    Lminus: np.ndarray
    W: np.ndarray
    N: int


@dataclass(frozen=True)
class GraphSpectra:
    """Spectral scalars driving both the penalty choice and the rate bound."""

    lam_max_Lplus: float
    lam_tmin_Lminus: float   # algebraic connectivity
    sigma_max_Mplus: float
    sigma_tmin_Mminus: float
    kappa_G: float


def build_incidence(t: Topology, N: int = 1) -> IncidenceSet:
    """Assemble the incidence set of a connected topology.

    Arc columns follow the topology's canonical arc order.
    """
    if N < 1:
        raise ValueError(f"block dimension must be positive, got {N}")
    arcs = t.arcs
    Mp = np.zeros((t.L, len(arcs)), dtype=np.int64)
    Mm = np.zeros((t.L, len(arcs)), dtype=np.int64)
    for q, (i, j) in enumerate(arcs):
        Mp[i, q] += 1
        Mp[j, q] += 1
        Mm[i, q] += 1
        Mm[j, q] -= 1
    # degrees +/- adjacency equals half the incidence Gram products exactly,
    # without the O(L^2 E) integer matmul
    adj = t.adjacency().astype(np.int64)
    W = np.diag(t.degrees())
    Lp = W + adj
    Lm = W - adj
    return IncidenceSet(Mplus=Mp, Mminus=Mm, Lplus=Lp, Lminus=Lm, W=W, N=N)


def spectra(inc: IncidenceSet) -> GraphSpectra:
    """Largest signless-Laplacian eigenvalue, algebraic connectivity, and
    the graph condition number kappa_G derived from them.

    Singular values of the incidence matrices follow from
    M M^T = 2 * Laplacian, hence sigma = sqrt(2 * lambda).
    """
    wp = np.linalg.eigvalsh(inc.Lplus.astype(float))
    wm = np.linalg.eigvalsh(inc.Lminus.astype(float))
    lam_max_Lp = float(wp[-1])
    thr = ZERO_REL * float(wm[-1])
    n_zero = int(np.sum(wm <= thr))
    if n_zero != 1:
        raise ValueError(
            f"signed Laplacian has {n_zero} zero eigenvalues; graph must be connected"
        )
    lam_tmin_Lm = float(wm[wm > thr][0])
    smax = math.sqrt(2.0 * lam_max_Lp)
    stmin = math.sqrt(2.0 * lam_tmin_Lm)
    return GraphSpectra(
        lam_max_Lplus=lam_max_Lp,
        lam_tmin_Lminus=lam_tmin_Lm,
        sigma_max_Mplus=smax,
        sigma_tmin_Mminus=stmin,
        kappa_G=smax / stmin,
    )


def pinv_apply_Lminus(inc: IncidenceSet, b: np.ndarray) -> np.ndarray:
    """Apply (2 Lminus)^+ blockwise to a stacked L*N vector (or (L, N) array).

    The component of b in the Laplacian null space is annihilated; the
    zero threshold matches spectra().
    """
    w, V = np.linalg.eigh(inc.Lminus.astype(float))
    thr = ZERO_REL * float(w[-1])
    inv = np.where(w > thr, 1.0 / (2.0 * np.where(w > thr, w, 1.0)), 0.0)
    flat = b.ndim == 1
    B = b.reshape(inc.Lminus.shape[0], -1)
    out = V @ (inv[:, None] * (V.T @ B))
    return out.reshape(-1) if flat else out
