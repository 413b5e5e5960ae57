"""Decentralized consensus ADMM engines.

Two interchangeable forms of the same iteration:

* the per-agent simplified form (production engine): each agent solves a
  small regularized local problem against its neighbors' last iterates
  and then takes a multiplier ascent step;
* the full three-block form over (x, z, lambda) (equivalence oracle):
  with multipliers initialized as opposite halves and the auxiliary
  variable as the arc average of the primal, its (x, z, beta) trajectory
  coincides with the simplified form.

Optional dual tracking maintains the arc variables (z, beta) alongside
the per-agent state so the weighted G-distance to the optimum can be
checked for geometric decrease at every iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import rates
from .objectives import ObjectiveSet, centralized_solve, gradient, profile
from .spectral import IncidenceSet, build_incidence, pinv_apply_Lminus, spectra
from .topology import Topology


class InvariantViolation(RuntimeError):
    """A runtime check certified by the convergence theory failed."""


class ContractionError(InvariantViolation):
    def __init__(self, k, g2_prev, g2_next, delta):
        super().__init__(
            f"G-norm contraction violated at k={k}: "
            f"{g2_next:.17g} > {g2_prev:.17g} / (1 + {delta:.17g})"
        )
        self.k = k
        self.g2_prev = g2_prev
        self.g2_next = g2_next
        self.delta = delta


class KktResidualError(InvariantViolation):
    pass


@dataclass(frozen=True)
class AdmmConfig:
    """Penalty, stopping rule, and diagnostic switches for one run."""

    c: float
    max_iter: int = 4000
    tol: float = 1e-15
    track_duals: bool = False
    check_contraction: bool = False

    def __post_init__(self):
        if self.c <= 0.0:
            raise ValueError(f"penalty must be positive, got {self.c}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")
        if self.tol < 0.0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")


@dataclass(frozen=True)
class AdmmState:
    """Iteration counter, stacked primal x and multiplier alpha, and the
    optional arc-space bookkeeping (beta, z) kept when duals are tracked."""

    k: int
    x: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray | None = None
    z: np.ndarray | None = None


@dataclass(frozen=True)
class ReferenceSolution:
    """Consensus optimum with its arc average and the unique multiplier
    in the row space of the oriented incidence operator."""

    x_tilde: np.ndarray
    x_star: np.ndarray
    z_star: np.ndarray
    beta_star: np.ndarray


class GNorm:
    """Weighted squared norm c*||z||^2 + (1/c)*||beta||^2 on arc pairs."""

    def __init__(self, c: float):
        if c <= 0.0:
            raise ValueError(f"penalty must be positive, got {c}")
        self.c = c

    def squared(self, dz: np.ndarray, dbeta: np.ndarray) -> float:
        return float(self.c * np.sum(dz * dz) + (1.0 / self.c) * np.sum(dbeta * dbeta))


@dataclass(frozen=True)
class Trajectory:
    """Per-iteration record of one run.

    err_x[k] is the distance to the consensus optimum; err_u_G2 (tracked
    runs only) is the squared G-distance of the arc pair to its optimum;
    identity_gap_rel is the relative defect of the inner-product identity
    linking consecutive G-distances.
    """

    err_x: np.ndarray
    err_u_G2: np.ndarray | None
    rho: np.ndarray
    rho_bar: np.ndarray
    identity_gap_rel: np.ndarray | None
    converged: bool
    final_state: AdmmState | None
    delta_check: float | None = None

    @property
    def iterations(self) -> int:
        return self.err_x.size - 1

    @property
    def rho_bar_terminal(self) -> float:
        return float(self.rho_bar[-1]) if self.iterations >= 1 else float("nan")

    def to_csv_text(self) -> str:
        def fmt(v) -> str:
            if v is None or (isinstance(v, float) and not np.isfinite(v)):
                return ""
            return repr(float(v))

        lines = ["k,err_x,err_u_G2,rho_k,rho_bar_k"]
        for k in range(self.err_x.size):
            g2 = self.err_u_G2[k] if self.err_u_G2 is not None else None
            rho = self.rho[k] if k >= 1 else None
            rb = self.rho_bar[k] if k >= 1 else None
            lines.append(
                f"{k},{fmt(self.err_x[k])},{fmt(g2)},{fmt(rho)},{fmt(rb)}"
            )
        return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# engines


class _QuadraticEngine:
    """Vectorized per-agent updates for quadratic locals at fixed penalty."""

    def __init__(self, t: Topology, s: ObjectiveSet, c: float):
        self.c = c
        self.deg = t.degrees().astype(float)[:, None]
        self.adj = t.adjacency()
        self.Utv = s.Utv_stack
        K = s.gram_stack + 2.0 * c * self.deg[:, :, None] * np.eye(s.N)
        self.Kinv = np.linalg.inv(K)

    def x_update(self, X, Alpha):
        rhs = self.Utv - Alpha + self.c * (self.deg * X + self.adj @ X)
        return np.einsum("lij,lj->li", self.Kinv, rhs)

    def alpha_update(self, Alpha, X_new):
        return Alpha + self.c * (self.deg * X_new - self.adj @ X_new)


class _NewtonEngine:
    """Per-agent updates for callback locals; exact minimization by damped
    Newton on the regularized local problem (gradient norm 1e-12, <= 50 steps)."""

    def __init__(self, t: Topology, s: ObjectiveSet, c: float):
        self.c = c
        self.locals = s.locals
        self.N = s.N
        self.deg = t.degrees().astype(float)[:, None]
        self.adj = t.adjacency()

    def x_update(self, X, Alpha):
        c = self.c
        pull = self.deg * X + self.adj @ X
        eye = np.eye(self.N)
        X_new = np.empty_like(X)
        for i, f in enumerate(self.locals):
            d_i = self.deg[i, 0]

            def g(xi, i=i, f=f, d_i=d_i):
                return f.gradient(xi) + Alpha[i] + 2.0 * c * d_i * xi - c * pull[i]

            def h(xi, f=f, d_i=d_i):
                return f.hessian(xi) + 2.0 * c * d_i * eye

            X_new[i] = _damped_newton(g, h, X[i])
        return X_new

    def alpha_update(self, Alpha, X_new):
        return Alpha + self.c * (self.deg * X_new - self.adj @ X_new)


def _damped_newton(g, h, x0, tol=1e-12, max_steps=50):
    x = x0.copy()
    gx = g(x)
    for _ in range(max_steps):
        gn = np.linalg.norm(gx)
        if gn <= tol:
            return x
        step = np.linalg.solve(h(x), gx)
        t = 1.0
        while t > 1e-12:
            x_try = x - t * step
            g_try = g(x_try)
            if np.linalg.norm(g_try) < gn:
                x, gx = x_try, g_try
                break
            t /= 2.0
        else:
            raise InvariantViolation("inner Newton line search stalled")
    raise InvariantViolation(f"inner Newton did not converge in {max_steps} steps")


def _make_engine(t: Topology, s: ObjectiveSet, c: float):
    return _QuadraticEngine(t, s, c) if s.is_quadratic else _NewtonEngine(t, s, c)


def step_simplified(
    state: AdmmState, t: Topology, s: ObjectiveSet, c: float
) -> AdmmState:
    """One synchronous round of the per-agent iteration.

    Each agent's new primal depends only on its own state and its
    neighbors' iterates from round k; the multiplier step then reads the
    neighbors' new primals.  When the state carries (beta, z) they are
    advanced consistently with the arc-space form of the same iteration.
    """
    engine = _make_engine(t, s, c)
    X = state.x.reshape(t.L, s.N)
    Alpha = state.alpha.reshape(t.L, s.N)
    X_new = engine.x_update(X, Alpha)
    Alpha_new = engine.alpha_update(Alpha, X_new)
    beta_new = z_new = None
    if state.beta is not None:
        inc = build_incidence(t, s.N)
        Mm = inc.Mminus.astype(float)
        Mp = inc.Mplus.astype(float)
        beta_new = (
            state.beta.reshape(-1, s.N) + (c / 2.0) * (Mm.T @ X_new)
        ).reshape(-1)
        z_new = (0.5 * (Mp.T @ X_new)).reshape(-1)
    return AdmmState(
        k=state.k + 1,
        x=X_new.reshape(-1),
        alpha=Alpha_new.reshape(-1),
        beta=beta_new,
        z=z_new,
    )


# ---------------------------------------------------------------------------
# full three-block oracle


def full_constraint_matrices(inc: IncidenceSet) -> tuple[np.ndarray, np.ndarray]:
    """Extended constraint pair (A, B) with A = [A1; A2], B = [-I; -I].

    A1 and A2 select the tail and head agent of each arc; they are
    recovered from the stored incidence matrices and lifted to block
    dimension N by a Kronecker product with the identity.
    """
    A1b = ((inc.Mplus + inc.Mminus) // 2).T.astype(float)
    A2b = ((inc.Mplus - inc.Mminus) // 2).T.astype(float)
    eye = np.eye(inc.N)
    A = np.vstack([np.kron(A1b, eye), np.kron(A2b, eye)])
    arcs_n = A1b.shape[0] * inc.N
    B = np.vstack([-np.eye(arcs_n), -np.eye(arcs_n)])
    return A, B


def step_full(
    state: tuple[np.ndarray, np.ndarray, np.ndarray],
    A: np.ndarray,
    B: np.ndarray,
    s: ObjectiveSet,
    c: float,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One round of the three-block ADMM on (x, z, lambda).

    Minimizes the augmented Lagrangian in x, then in z (closed form), then
    ascends lambda.  Quadratic locals only; this is the reference oracle
    for the simplified engine.
    """
    if not s.is_quadratic:
        raise ValueError("the three-block oracle supports quadratic locals only")
    x, z, lam = state
    n = s.L * s.N
    H = np.zeros((n, n))
    for i, f in enumerate(s.locals):
        H[i * s.N : (i + 1) * s.N, i * s.N : (i + 1) * s.N] = f.U.T @ f.U
    b = s.Utv_stack.reshape(-1)
    x_new = np.linalg.solve(H + c * (A.T @ A), b - A.T @ lam - c * (A.T @ (B @ z)))
    m = z.size
    # stationarity of the z-block: B^T lam + c B^T (A x + B z) = 0 with B^T B = 2I
    z_new = (lam[:m] + lam[m:] + c * ((A[:m] + A[m:]) @ x_new)) / (2.0 * c)
    lam_new = lam + c * (A @ x_new + B @ z_new)
    return x_new, z_new, lam_new


# ---------------------------------------------------------------------------
# reference solution and runs


def reference_solution(s: ObjectiveSet, inc: IncidenceSet) -> ReferenceSolution:
    """Consensus optimum, its arc average, and the minimum-norm multiplier.

    The multiplier solves the stationarity condition through the
    pseudo-inverse of the signed Laplacian, which lands it in the row
    space of the oriented incidence operator; the stationarity and
    consensus residuals are verified before returning.
    """
    x_tilde, x_star = centralized_solve(s)
    L = inc.Lminus.shape[0]
    Mp = inc.Mplus.astype(float)
    Mm = inc.Mminus.astype(float)
    X = x_star.reshape(L, s.N)
    Z = 0.5 * (Mp.T @ X)
    G = gradient(s, x_star).reshape(L, s.N)
    Y = pinv_apply_Lminus(inc, G)
    Beta = -(Mm.T @ Y)
    kkt_grad = float(np.linalg.norm(G + Mm @ Beta))
    if kkt_grad > 1e-8:
        raise KktResidualError(
            f"stationarity residual {kkt_grad:.3e} exceeds 1e-8"
        )
    kkt_cons = float(np.linalg.norm(Mm.T @ X))
    if kkt_cons > 1e-12:
        raise KktResidualError(
            f"consensus residual {kkt_cons:.3e} exceeds 1e-12"
        )
    return ReferenceSolution(
        x_tilde=x_tilde,
        x_star=x_star,
        z_star=Z.reshape(-1),
        beta_star=Beta.reshape(-1),
    )


def run(
    t: Topology,
    s: ObjectiveSet,
    config: AdmmConfig,
    inc: IncidenceSet | None = None,
    reference: ReferenceSolution | None = None,
) -> Trajectory:
    """Run the per-agent iteration from zero initial conditions.

    Stops once the primal distance to the optimum reaches config.tol or
    after config.max_iter rounds.  With track_duals the arc variables are
    maintained and the squared G-distance recorded; with check_contraction
    every round additionally asserts the certified geometric decrease of
    the G-distance, the curvature bound tying the primal error to the
    previous G-distance, the inner-product identity between consecutive
    G-distances (above the double-precision floor), and the arc-space
    stationarity residual.
    """
    track = config.track_duals or config.check_contraction
    if track and inc is None:
        inc = build_incidence(t, s.N)
    if reference is None:
        if track:
            reference = reference_solution(s, inc)
        else:
            x_tilde, x_star = centralized_solve(s)
            reference = ReferenceSolution(
                x_tilde=x_tilde,
                x_star=x_star,
                z_star=np.empty(0),
                beta_star=np.empty(0),
            )

    engine = _make_engine(t, s, config.c)
    L, N = t.L, s.N
    X = np.zeros((L, N))
    Alpha = np.zeros((L, N))
    Xs = reference.x_star.reshape(L, N)

    delta_check = None
    if track:
        Mp = inc.Mplus.astype(float)
        Mm = inc.Mminus.astype(float)
        Zs = reference.z_star.reshape(-1, N)
        Bs = reference.beta_star.reshape(-1, N)
        Z = 0.5 * (Mp.T @ X)
        Beta = np.zeros_like(Zs)
        gnorm = GNorm(config.c)
        g2 = [gnorm.squared(Z - Zs, Beta - Bs)]
        Gs = gradient(s, reference.x_star).reshape(L, N)
        id_gap = [np.nan]
    if config.check_contraction:
        sp = spectra(inc)
        pf = profile(s)
        mu = rates.mu_star(pf.kappa_f, sp.kappa_G)
        delta_check = rates.delta(mu, config.c, sp, pf)

    err = [float(np.linalg.norm(X - Xs))]
    converged = err[0] <= config.tol
    k = 0
    while not converged and k < config.max_iter:
        X_new = engine.x_update(X, Alpha)
        Alpha = engine.alpha_update(Alpha, X_new)
        if track:
            Z_new = 0.5 * (Mp.T @ X_new)
            Beta_new = Beta + (config.c / 2.0) * (Mm.T @ X_new)
            g2_new = gnorm.squared(Z_new - Zs, Beta_new - Bs)
            Gx = gradient(s, X_new.reshape(-1)).reshape(L, N)
            lhs = float(np.sum((X_new - Xs) * (Gx - Gs)))
            rhs = g2[-1] - g2_new - gnorm.squared(Z_new - Z, Beta_new - Beta)
            gap = abs(lhs - rhs)
            id_gap.append(gap / max(abs(lhs), abs(rhs), 1e-300))
            if config.check_contraction:
                if g2_new > (1.0 + 1e-8) / (1.0 + delta_check) * g2[-1]:
                    raise ContractionError(k + 1, g2[-1], g2_new, delta_check)
                e2 = float(np.sum((X_new - Xs) ** 2))
                if e2 > g2[-1] / pf.m_f + 1e-12:
                    raise InvariantViolation(
                        f"primal error bound violated at k={k + 1}: "
                        f"{e2:.17g} > {g2[-1]:.17g} / {pf.m_f:.17g} + 1e-12"
                    )
                # identity defect beyond the double-precision floor is a bug
                if gap > 1e-8 * max(abs(lhs), abs(rhs)) + 1e-12:
                    raise InvariantViolation(
                        f"inner-product identity gap {gap:.3e} at k={k + 1}"
                    )
                feas = float(
                    np.linalg.norm(Gx + Mm @ Beta_new - config.c * (Mp @ (Z - Z_new)))
                )
                if feas > 1e-9 * (1.0 + float(np.linalg.norm(Gx))):
                    raise InvariantViolation(
                        f"arc-space stationarity residual {feas:.3e} at k={k + 1}"
                    )
            g2.append(g2_new)
            Z, Beta = Z_new, Beta_new
        X = X_new
        k += 1
        err.append(float(np.linalg.norm(X - Xs)))
        converged = err[-1] <= config.tol

    report = rates.empirical_rates(np.array(err))
    final = AdmmState(
        k=k,
        x=X.reshape(-1),
        alpha=Alpha.reshape(-1),
        beta=Beta.reshape(-1) if track else None,
        z=Z.reshape(-1) if track else None,
    )
    return Trajectory(
        err_x=np.array(err),
        err_u_G2=np.array(g2) if track else None,
        rho=report.rho,
        rho_bar=report.rho_bar,
        identity_gap_rel=np.array(id_gap) if track else None,
        converged=converged,
        final_state=final,
        delta_check=delta_check,
    )
