import numpy as np
import pytest

import consensus_admm.rates as rates
from consensus_admm.admm import (
    AdmmConfig,
    AdmmState,
    ContractionError,
    GNorm,
    full_constraint_matrices,
    reference_solution,
    run,
    step_full,
    step_simplified,
)
from consensus_admm.objectives import (
    CustomLocal,
    ObjectiveSet,
    QuadraticLocal,
    generate,
    gradient,
    profile,
    shape_condition,
)
from consensus_admm.spectral import build_incidence, spectra
from consensus_admm.topology import Topology, random_connected, special


def zero_state(L, N, tracked=False, E=0):
    return AdmmState(
        k=0,
        x=np.zeros(L * N),
        alpha=np.zeros(L * N),
        beta=np.zeros(2 * E * N) if tracked else None,
        z=np.zeros(2 * E * N) if tracked else None,
    )


def shaped_instance(L, p, seed, kappa_f=None):
    t = random_connected(L, p, seed)
    s = generate(L, 3, seed + 1000)
    if kappa_f is not None:
        s = shape_condition(s, kappa_f)
    return t, s


class TestStepSimplified:
    def test_consensus_fixed_point(self):
        t, s = shaped_instance(6, 0.6, 0)
        inc = build_incidence(t, 3)
        ref = reference_solution(s, inc)
        alpha = -gradient(s, ref.x_star)
        state = AdmmState(k=0, x=ref.x_star.copy(), alpha=alpha.copy())
        nxt = step_simplified(state, t, s, c=0.8)
        np.testing.assert_allclose(nxt.x, ref.x_star, atol=1e-12)
        np.testing.assert_allclose(nxt.alpha, alpha, atol=1e-12)

    def test_two_agent_scalar_hand_algebra(self):
        # f_i = 0.5 (x - v_i)^2, c = 1, zero start:
        # x1_i = v_i / 3 and alpha1_1 = (v1 - v2)/3 = -alpha1_2
        v1, v2 = 2.4, -0.9
        locs = (
            QuadraticLocal(U=np.eye(1), v=np.array([v1])),
            QuadraticLocal(U=np.eye(1), v=np.array([v2])),
        )
        s = ObjectiveSet(locals=locs, N=1)
        t = Topology(2, ((0, 1),), "line")
        nxt = step_simplified(zero_state(2, 1), t, s, c=1.0)
        np.testing.assert_allclose(nxt.x, [v1 / 3, v2 / 3], atol=1e-15)
        np.testing.assert_allclose(nxt.alpha, [(v1 - v2) / 3, (v2 - v1) / 3], atol=1e-15)

    def test_neighbor_only_information_flow(self):
        # perturbing a non-neighbor's iterate must not change an agent's update
        t = special("line", 5)  # agent 0 talks to 1 only
        s = generate(5, 2, 3)
        rng = np.random.default_rng(0)
        state = AdmmState(k=0, x=rng.standard_normal(10), alpha=rng.standard_normal(10))
        base = step_simplified(state, t, s, c=0.5)
        x_mod = state.x.copy()
        x_mod[4 * 2 :] += 10.0  # agent 4 is 4 hops away from agent 0
        mod = step_simplified(
            AdmmState(k=0, x=x_mod, alpha=state.alpha), t, s, c=0.5
        )
        np.testing.assert_array_equal(base.x[:2], mod.x[:2])
        assert not np.allclose(base.x[8:], mod.x[8:])

    def test_tracked_state_advances_arc_variables(self):
        t, s = shaped_instance(5, 0.6, 1)
        inc = build_incidence(t, 3)
        state = zero_state(5, 3, tracked=True, E=t.E)
        nxt = step_simplified(state, t, s, c=0.7)
        Mp = inc.Mplus.astype(float)
        Mm = inc.Mminus.astype(float)
        X = nxt.x.reshape(5, 3)
        np.testing.assert_allclose(nxt.z, (0.5 * Mp.T @ X).reshape(-1), atol=1e-14)
        np.testing.assert_allclose(
            nxt.beta, (0.35 * Mm.T @ X).reshape(-1), atol=1e-14
        )


class TestStepFullEquivalence:
    def run_both(self, t, s, c, iters):
        inc = build_incidence(t, s.N)
        A, B = full_constraint_matrices(inc)
        n_arc = 2 * t.E * s.N
        x = np.zeros(t.L * s.N)
        z = np.zeros(n_arc)           # z0 = (1/2) Mplus^T x0
        lam = np.zeros(2 * n_arc)     # beta0 = -gamma0 = 0
        state = zero_state(t.L, s.N, tracked=True, E=t.E)
        full_traj, simp_traj = [], []
        for _ in range(iters):
            x, z, lam = step_full((x, z, lam), A, B, s, c)
            state = step_simplified(state, t, s, c)
            full_traj.append(np.concatenate([x, z, lam[:n_arc]]))
            simp_traj.append(np.concatenate([state.x, state.z, state.beta]))
        return np.array(full_traj), np.array(simp_traj), lam

    def test_first_step_exact_on_two_agents(self):
        t = Topology(2, ((0, 1),), "line")
        s = generate(2, 3, 5)
        full, simp, _ = self.run_both(t, s, c=1.3, iters=1)
        np.testing.assert_allclose(full, simp, atol=1e-12)

    @pytest.mark.parametrize("L,p,seed,c", [(5, 0.5, 2, 0.7), (6, 0.6, 7, 1.1)])
    def test_trajectories_agree_100_iters(self, L, p, seed, c):
        t = random_connected(L, p, seed)
        s = generate(L, 3, seed)
        full, simp, _ = self.run_both(t, s, c, iters=100)
        scale = np.max(np.abs(full))
        assert np.max(np.abs(full - simp)) <= 1e-8 * scale

    def test_beta_equals_minus_gamma_throughout(self):
        t = random_connected(5, 0.6, 9)
        s = generate(5, 3, 9)
        inc = build_incidence(t, 3)
        A, B = full_constraint_matrices(inc)
        n_arc = 2 * t.E * 3
        x, z, lam = np.zeros(5 * 3), np.zeros(n_arc), np.zeros(2 * n_arc)
        for _ in range(100):
            x, z, lam = step_full((x, z, lam), A, B, s, c=0.9)
            assert np.max(np.abs(lam[:n_arc] + lam[n_arc:])) <= 1e-12

    def test_x_minimizer_stationarity(self):
        t = random_connected(4, 0.8, 3)
        s = generate(4, 2, 3)
        inc = build_incidence(t, 2)
        A, B = full_constraint_matrices(inc)
        n_arc = 2 * t.E * 2
        rng = np.random.default_rng(1)
        z = rng.standard_normal(n_arc)
        lam = rng.standard_normal(2 * n_arc)
        x_new, _, _ = step_full((np.zeros(8), z, lam), A, B, s, c=0.6)
        resid = gradient(s, x_new) + A.T @ lam + 0.6 * A.T @ (A @ x_new + B @ z)
        assert np.linalg.norm(resid) <= 1e-10


class TestReferenceSolution:
    def test_identical_agents_have_zero_multiplier(self):
        U = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
        v = np.array([1.0, -2.0, 0.5])
        locs = tuple(QuadraticLocal(U=U.copy(), v=v.copy()) for _ in range(5))
        s = ObjectiveSet(locals=locs, N=3)
        t = random_connected(5, 0.7, 4)
        ref = reference_solution(s, build_incidence(t, 3))
        np.testing.assert_allclose(ref.beta_star, 0.0, atol=1e-12)

    def test_two_agent_scalar_closed_form(self):
        # KKT by hand: beta* = [(v1-v2)/4, (v2-v1)/4] in arc order (0,1),(1,0)
        v1, v2 = 3.0, 1.0
        locs = (
            QuadraticLocal(U=np.eye(1), v=np.array([v1])),
            QuadraticLocal(U=np.eye(1), v=np.array([v2])),
        )
        s = ObjectiveSet(locals=locs, N=1)
        t = Topology(2, ((0, 1),), "line")
        ref = reference_solution(s, build_incidence(t, 1))
        np.testing.assert_allclose(ref.x_tilde, [(v1 + v2) / 2], atol=1e-14)
        np.testing.assert_allclose(
            ref.beta_star, [(v1 - v2) / 4, (v2 - v1) / 4], atol=1e-12
        )

    @pytest.mark.parametrize("seed", range(3))
    def test_kkt_residuals(self, seed):
        t, s = shaped_instance(8, 0.5, seed)
        inc = build_incidence(t, 3)
        ref = reference_solution(s, inc)
        g = gradient(s, ref.x_star).reshape(8, 3)
        Mm = inc.Mminus.astype(float)
        assert np.linalg.norm(g + Mm @ ref.beta_star.reshape(-1, 3)) <= 1e-8
        assert np.linalg.norm(Mm.T @ ref.x_star.reshape(8, 3)) <= 1e-12
        np.testing.assert_allclose(
            ref.z_star.reshape(-1, 3),
            0.5 * inc.Mplus.astype(float).T @ ref.x_star.reshape(8, 3),
            atol=1e-14,
        )

    def test_beta_star_in_row_space(self):
        t, s = shaped_instance(7, 0.5, 11)
        inc = build_incidence(t, 3)
        ref = reference_solution(s, inc)
        Mm = inc.Mminus.astype(float)
        B = ref.beta_star.reshape(-1, 3)
        # projection onto col(Mminus^T) leaves beta* unchanged
        proj = Mm.T @ np.linalg.pinv(Mm @ Mm.T) @ (Mm @ B)
        resid = np.linalg.norm(B - proj) / np.linalg.norm(B)
        assert resid <= 1e-10


class TestRun:
    def test_symmetric_agents_stay_identical(self):
        v = np.array([1.0, -0.5, 2.0])
        locs = tuple(QuadraticLocal(U=np.eye(3), v=v.copy()) for _ in range(4))
        s = ObjectiveSet(locals=locs, N=3)
        t = special("complete", 4)
        state = zero_state(4, 3)
        for _ in range(20):
            state = step_simplified(state, t, s, c=0.5)
            X = state.x.reshape(4, 3)
            np.testing.assert_allclose(X - X[0], 0.0, atol=1e-14)

    def test_converges_and_respects_rate_bound(self):
        t, s = shaped_instance(20, 0.5, 0, kappa_f=10.0)
        inc = build_incidence(t, 3)
        bundle = rates.rate_bundle(spectra(inc), profile(s))
        cfg = AdmmConfig(c=bundle.c_t, tol=1e-10)
        traj = run(t, s, cfg, inc=inc)
        assert traj.converged
        assert traj.rho_bar_terminal <= bundle.rho_t + 1e-6

    def test_half_c_t_converges_faster_most_of_the_time(self):
        wins = 0
        for seed in range(10):
            t, s = shaped_instance(20, 0.4, 50 + seed)
            inc = build_incidence(t, 3)
            bundle = rates.rate_bundle(spectra(inc), profile(s))
            k_full = run(t, s, AdmmConfig(c=bundle.c_t, tol=1e-10), inc=inc).iterations
            k_half = run(t, s, AdmmConfig(c=0.5 * bundle.c_t, tol=1e-10), inc=inc).iterations
            wins += k_half < k_full
        assert wins >= 7

    def test_tracked_state_invariants(self):
        t, s = shaped_instance(8, 0.5, 2, kappa_f=5.0)
        inc = build_incidence(t, 3)
        bundle = rates.rate_bundle(spectra(inc), profile(s))
        cfg = AdmmConfig(c=bundle.c_t, tol=1e-8, track_duals=True)
        traj = run(t, s, cfg, inc=inc)
        st = traj.final_state
        X = st.x.reshape(8, 3)
        Mp = inc.Mplus.astype(float)
        Mm = inc.Mminus.astype(float)
        # z-x coupling
        z_expect = (0.5 * Mp.T @ X).reshape(-1)
        assert np.linalg.norm(st.z - z_expect) <= 1e-12 * (1 + np.linalg.norm(z_expect))
        # alpha = Mminus beta
        alpha_expect = (Mm @ st.beta.reshape(-1, 3)).reshape(-1)
        assert np.linalg.norm(st.alpha - alpha_expect) <= 1e-12 * (
            1 + np.linalg.norm(alpha_expect)
        )
        # beta stays in the row space of the oriented incidence
        B = st.beta.reshape(-1, 3)
        proj = Mm.T @ np.linalg.pinv(Mm @ Mm.T) @ (Mm @ B)
        assert np.linalg.norm(B - proj) <= 1e-10 * (1 + np.linalg.norm(B))

    def test_monotone_g_distance(self):
        t, s = shaped_instance(10, 0.4, 6, kappa_f=10.0)
        inc = build_incidence(t, 3)
        bundle = rates.rate_bundle(spectra(inc), profile(s))
        traj = run(t, s, AdmmConfig(c=bundle.c_t, tol=1e-10, track_duals=True), inc=inc)
        g2 = traj.err_u_G2
        assert (np.diff(g2) < 0).all()

    def test_contraction_checks_pass_on_healthy_run(self):
        t, s = shaped_instance(12, 0.5, 7, kappa_f=10.0)
        inc = build_incidence(t, 3)
        bundle = rates.rate_bundle(spectra(inc), profile(s))
        cfg = AdmmConfig(c=bundle.c_t, tol=1e-12, check_contraction=True)
        traj = run(t, s, cfg, inc=inc)
        assert traj.converged
        assert traj.delta_check == pytest.approx(bundle.delta_t, rel=1e-10)

    def test_contraction_error_raised_on_impossible_delta(self, monkeypatch):
        t, s = shaped_instance(8, 0.5, 8, kappa_f=10.0)
        monkeypatch.setattr(rates, "delta", lambda mu, c, sp, pf: 1e6)
        cfg = AdmmConfig(c=0.3, tol=1e-10, check_contraction=True)
        with pytest.raises(ContractionError) as exc_info:
            run(t, s, cfg)
        err = exc_info.value
        assert err.k >= 1 and err.g2_prev > 0 and err.delta == 1e6

    def test_dual_feasibility_residual_series(self):
        # arc-space stationarity of every tracked iterate, checked directly
        t, s = shaped_instance(9, 0.5, 3, kappa_f=5.0)
        inc = build_incidence(t, 3)
        Mp, Mm = inc.Mplus.astype(float), inc.Mminus.astype(float)
        state = zero_state(9, 3, tracked=True, E=t.E)
        c = 0.4
        z_prev = state.z.reshape(-1, 3)
        for _ in range(60):
            state = step_simplified(state, t, s, c)
            g = gradient(s, state.x).reshape(9, 3)
            z_new = state.z.reshape(-1, 3)
            resid = np.linalg.norm(
                g + Mm @ state.beta.reshape(-1, 3) - c * Mp @ (z_prev - z_new)
            )
            assert resid <= 1e-9 * (1 + np.linalg.norm(g))
            z_prev = z_new

    def test_identity_gap_small_on_moderate_tolerance_run(self):
        t, s = shaped_instance(10, 0.6, 12, kappa_f=5.0)
        inc = build_incidence(t, 3)
        bundle = rates.rate_bundle(spectra(inc), profile(s))
        cfg = AdmmConfig(c=bundle.c_t, tol=1e-5, track_duals=True)
        traj = run(t, s, cfg, inc=inc)
        assert traj.converged
        assert np.nanmax(traj.identity_gap_rel) <= 1e-8

    def test_csv_schema(self):
        t, s = shaped_instance(5, 0.7, 1)
        traj = run(t, s, AdmmConfig(c=0.5, max_iter=5, tol=0.0, track_duals=True))
        lines = traj.to_csv_text().splitlines()
        assert lines[0] == "k,err_x,err_u_G2,rho_k,rho_bar_k"
        first = lines[1].split(",")
        assert first[0] == "0" and first[3] == "" and first[4] == ""
        assert len(lines) == 7
        untracked = run(t, s, AdmmConfig(c=0.5, max_iter=3, tol=0.0))
        row = untracked.to_csv_text().splitlines()[2].split(",")
        assert row[2] == ""  # no G-norm column without dual tracking

    def test_custom_locals_match_quadratic_engine(self):
        t = random_connected(4, 0.8, 21)
        s = generate(4, 2, 21)
        customs = tuple(
            CustomLocal(
                grad=lambda x, f=f: f.U.T @ (f.U @ x - f.v),
                hess=lambda x, f=f: f.U.T @ f.U,
                m=float(np.linalg.eigvalsh(f.U.T @ f.U)[0]),
                M=float(np.linalg.eigvalsh(f.U.T @ f.U)[-1]),
            )
            for f in s.locals
        )
        s_custom = ObjectiveSet(locals=customs, N=2)
        state_q = zero_state(4, 2)
        state_c = zero_state(4, 2)
        for _ in range(10):
            state_q = step_simplified(state_q, t, s, c=0.9)
            state_c = step_simplified(state_c, t, s_custom, c=0.9)
        np.testing.assert_allclose(state_c.x, state_q.x, atol=1e-9)
        np.testing.assert_allclose(state_c.alpha, state_q.alpha, atol=1e-9)

    def test_gnorm(self):
        g = GNorm(2.0)
        assert g.squared(np.array([1.0, 1.0]), np.array([2.0])) == pytest.approx(6.0)
        assert g.squared(np.zeros(3), np.zeros(3)) == 0.0
        with pytest.raises(ValueError):
            GNorm(0.0)

    def test_config_validation(self):
        with pytest.raises(ValueError):
            AdmmConfig(c=-1.0)
        with pytest.raises(ValueError):
            AdmmConfig(c=1.0, max_iter=0)
        with pytest.raises(ValueError):
            AdmmConfig(c=1.0, tol=-1.0)
