"""Per-agent strongly convex losses and their global curvature constants.

The stock instance is a least-squares fit: agent i holds a square
measurement matrix U_i and a measurement vector v_i and minimizes
0.5 * ||v_i - U_i x||^2.  A callback-based local objective is accepted
everywhere the engine only needs gradients, declared curvature bounds,
and (for the exact per-agent updates) a Hessian.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

NOISE_STD = math.sqrt(0.1)  # measurement noise ~ N(0, 0.1), 0.1 read as variance
MIN_GRAM_EIG = 1e-8         # resample threshold on lambda_min(U^T U)


@dataclass(frozen=True)
class QuadraticLocal:
    """Local loss 0.5 * ||v - U x||^2 with positive definite U^T U."""

    U: np.ndarray
    v: np.ndarray

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.U.T @ (self.U @ x - self.v)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.U.T @ self.U


@dataclass(frozen=True)
class CustomLocal:
    """Callback-based local objective with declared curvature constants.

    grad must be the gradient of a strongly convex function with
    convexity constant at least m and gradient Lipschitz constant at
    most M; hess is required by the exact per-agent minimization step.
    """

    grad: Callable[[np.ndarray], np.ndarray]
    hess: Callable[[np.ndarray], np.ndarray]
    m: float
    M: float

    def gradient(self, x: np.ndarray) -> np.ndarray:
        return self.grad(x)

    def hessian(self, x: np.ndarray) -> np.ndarray:
        return self.hess(x)


@dataclass(frozen=True)
class ObjectiveSet:
    """The L local objectives of one problem instance."""

    locals: tuple
    N: int
    x_true: np.ndarray | None = None

    def __post_init__(self):
        if len(self.locals) < 1:
            raise ValueError("need at least one local objective")

    @property
    def L(self) -> int:
        return len(self.locals)

    @property
    def is_quadratic(self) -> bool:
        return all(isinstance(f, QuadraticLocal) for f in self.locals)

    @cached_property
    def U_stack(self) -> np.ndarray:
        """(L, N, N) array of measurement matrices; quadratic sets only."""
        return np.array([f.U for f in self.locals])

    @cached_property
    def v_stack(self) -> np.ndarray:
        return np.array([f.v for f in self.locals])

    @cached_property
    def gram_stack(self) -> np.ndarray:
        U = self.U_stack
        return np.einsum("lki,lkj->lij", U, U)

    @cached_property
    def Utv_stack(self) -> np.ndarray:
        return np.einsum("lki,lk->li", self.U_stack, self.v_stack)


@dataclass(frozen=True)
class ObjectiveProfile:
    """Global strong-convexity and Lipschitz constants and their ratio."""

    m_f: float
    M_f: float
    kappa_f: float


def generate(L: int, N: int, seed) -> ObjectiveSet:
    """Random least-squares instance.

    The ground truth and each U_i have standard normal entries;
    measurements are v_i = U_i x_true + noise.  Any draw whose Gram
    matrix is near singular is resampled so that every local objective
    is strongly convex.  x_true, U, and noise come from independent
    substreams of the seed, so altering one generator leaves the others
    untouched.
    """
    if L < 1 or N < 1:
        raise ValueError(f"need positive L and N, got L={L}, N={N}")
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    rng_x, rng_u, rng_n = (np.random.default_rng(s) for s in ss.spawn(3))
    x_true = rng_x.standard_normal(N)
    locs = []
    for _ in range(L):
        while True:
            U = rng_u.standard_normal((N, N))
            if np.linalg.eigvalsh(U.T @ U)[0] >= MIN_GRAM_EIG:
                break
        v = U @ x_true + rng_n.standard_normal(N) * NOISE_STD
        locs.append(QuadraticLocal(U=U, v=v))
    return ObjectiveSet(locals=tuple(locs), N=N, x_true=x_true)


def shape_condition(s: ObjectiveSet, kappa_f_target: float) -> ObjectiveSet:
    """Rescale every U_i so the global condition number hits the target.

    Per agent the singular values are mapped affinely onto
    [sqrt(1/kappa), 1] (endpoints attained), then U_i is rebuilt from its
    singular factors.  Agents whose singular values are all equal map to
    1.  Measurements are kept as generated.
    """
    if kappa_f_target < 1.0:
        raise ValueError(f"condition target must be >= 1, got {kappa_f_target}")
    if not s.is_quadratic:
        raise ValueError("condition shaping applies to quadratic objectives only")
    lo, hi = math.sqrt(1.0 / kappa_f_target), 1.0
    locs = []
    for f in s.locals:
        P, sv, Qt = np.linalg.svd(f.U)
        s_min, s_max = sv[-1], sv[0]
        if s_max - s_min <= 1e-14 * s_max:
            sv_new = np.ones_like(sv)
        else:
            sv_new = lo + (sv - s_min) * (hi - lo) / (s_max - s_min)
        locs.append(QuadraticLocal(U=(P * sv_new) @ Qt, v=f.v))
    return ObjectiveSet(locals=tuple(locs), N=s.N, x_true=s.x_true)


def gradient(s: ObjectiveSet, x: np.ndarray) -> np.ndarray:
    """Stacked gradient; block i is the local gradient at x_i."""
    if x.shape != (s.L * s.N,):
        raise ValueError(f"expected stacked shape ({s.L * s.N},), got {x.shape}")
    X = x.reshape(s.L, s.N)
    if s.is_quadratic:
        G = np.einsum("lij,lj->li", s.gram_stack, X) - s.Utv_stack
        return G.reshape(-1)
    return np.concatenate([f.gradient(X[i]) for i, f in enumerate(s.locals)])


def profile(s: ObjectiveSet) -> ObjectiveProfile:
    """Global constants: worst strong convexity, worst Lipschitz gradient."""
    ms, Ms = [], []
    for f in s.locals:
        if isinstance(f, QuadraticLocal):
            w = np.linalg.eigvalsh(f.U.T @ f.U)
            if w[0] <= 0:
                raise ValueError("local Gram matrix is not positive definite")
            ms.append(float(w[0]))
            Ms.append(float(w[-1]))
        else:
            ms.append(float(f.m))
            Ms.append(float(f.M))
    m_f, M_f = min(ms), max(Ms)
    return ObjectiveProfile(m_f=m_f, M_f=M_f, kappa_f=M_f / m_f)


def _newton_minimize(grad, hess, x0, tol=1e-12, max_steps=100):
    """Damped Newton descent on the gradient norm."""
    x = x0.copy()
    g = grad(x)
    for _ in range(max_steps):
        gn = np.linalg.norm(g)
        if gn <= tol:
            return x
        step = np.linalg.solve(hess(x), g)
        t = 1.0
        while t > 1e-12:
            x_new = x - t * step
            g_new = grad(x_new)
            if np.linalg.norm(g_new) < gn:
                x, g = x_new, g_new
                break
            t /= 2.0
        else:
            raise RuntimeError("Newton line search stalled")
    raise RuntimeError(f"Newton did not reach gradient norm {tol} in {max_steps} steps")


def centralized_solve(s: ObjectiveSet) -> tuple[np.ndarray, np.ndarray]:
    """Minimizer of the summed objective, and its L-fold consensus stacking."""
    if s.is_quadratic:
        H = s.gram_stack.sum(axis=0)
        rhs = s.Utv_stack.sum(axis=0)
        x_tilde = np.linalg.solve(H, rhs)
        resid = np.linalg.norm(H @ x_tilde - rhs)
        if resid > 1e-10 * (1.0 + np.linalg.norm(rhs)):
            raise ValueError(f"centralized solve residual {resid:.3e} too large")
    else:
        def g(x):
            return np.sum([f.gradient(x) for f in s.locals], axis=0)

        def h(x):
            return np.sum([f.hessian(x) for f in s.locals], axis=0)

        x_tilde = _newton_minimize(g, h, np.zeros(s.N))
    return x_tilde, np.tile(x_tilde, s.L)


# -- CSV block: one header line "L,N", then per agent N rows of U and one of v --

def to_csv(s: ObjectiveSet) -> str:
    """Serialize a quadratic objective set for reproducible re-runs."""
    if not s.is_quadratic:
        raise ValueError("only quadratic objectives serialize to CSV")
    buf = io.StringIO()
    buf.write(f"{s.L},{s.N}\n")
    for f in s.locals:
        for row in f.U:
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        buf.write(",".join(repr(float(x)) for x in f.v) + "\n")
    return buf.getvalue()


def from_csv(text: str) -> ObjectiveSet:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    L, N = (int(tok) for tok in lines[0].split(","))
    if len(lines) != 1 + L * (N + 1):
        raise ValueError(f"expected {1 + L * (N + 1)} lines, got {len(lines)}")
    locs = []
    pos = 1
    for _ in range(L):
        U = np.array(
            [[float(tok) for tok in lines[pos + r].split(",")] for r in range(N)]
        )
        v = np.array([float(tok) for tok in lines[pos + N].split(",")])
        locs.append(QuadraticLocal(U=U, v=v))
        pos += N + 1
    return ObjectiveSet(locals=tuple(locs), N=N, x_true=None)
