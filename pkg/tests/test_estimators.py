import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import SMALL_GAMES, deterministic_profile, random_profile
from vrpo.estimators import (GAE, QBOOST, CentralizedQCritic, CentralizedVCritic, gae_advantages,
                             gae_batch, policy_values, qboost_advantages, qboost_batch,
                             qboost_targets, recompute_with_policy, v_from_q)
from vrpo.games import enumerate_paths, load_game, make_trajectory, rollout_batch
from vrpo.oracle import exact_policy_gradient, exact_values

LAMBDAS = [0.0, 0.5, 0.95, 1.0]


def ht(game):
    return make_trajectory(game, [0, int(game.children[0, 0])], [0, 1])


def hh(game):
    return make_trajectory(game, [0, int(game.children[0, 0])], [0, 0])


class TestPenniesTree:
    def test_gae_stochastic(self, mp):
        ev = exact_values(mp, mp.uniform_profile())
        rec = gae_advantages(mp, ht(mp), CentralizedVCritic(ev.v), 1.0, 1.0, 0)
        assert len(rec) == 1 and rec[0].advantage == -1.0 and rec[0].target is None
        assert gae_advantages(mp, hh(mp), CentralizedVCritic(ev.v), 1.0, 1.0, 0)[0].advantage == 1.0

    def test_gae_deterministic_second_player(self, mp_perfect):
        g = mp_perfect
        h, t = int(g.children[0, 0]), int(g.children[0, 1])
        prof = deterministic_profile(g, {int(g.infoset[h]): 1, int(g.infoset[t]): 0})
        ev = exact_values(g, prof)
        assert gae_advantages(g, ht(g), CentralizedVCritic(ev.v), 1.0, 1.0, 0)[0].advantage == 0.0

    def test_qboost(self, mp):
        u = mp.uniform_profile()
        q = CentralizedQCritic(exact_values(mp, u).q)
        for traj in (ht(mp), hh(mp)):
            rec = qboost_advantages(mp, traj, q, u, 1.0, 1.0, 0)
            assert rec[0].advantage == 0.0 and rec[0].estimator == QBOOST

    def test_zero_critic_targets(self, mp):
        t = qboost_targets(mp, ht(mp), CentralizedQCritic.zeros(mp), mp.uniform_profile(), 1.0, 1.0)
        assert t[:, 0].tolist() == [-1.0, -1.0]
        assert t[:, 1].tolist() == [1.0, 1.0]

    def test_recompute_under_shifted_second_player(self, mp):
        u = mp.uniform_profile()
        q = CentralizedQCritic(exact_values(mp, u).q)
        traj = ht(mp)
        rec = qboost_advantages(mp, traj, q, u, 1.0, 1.0, 0)
        shifted = u.copy()
        shifted[1] = (0.75, 0.25)
        new = recompute_with_policy(mp, rec, traj, q, shifted, 1.0, 1.0)
        # Q(0,h) - Vbar(0) + [Vbar(h) - Q(0,h)] + [r - Q(h,t)] with Vbar(h) = .75 - .25
        h = int(mp.children[0, 0])
        direct = q.q[0, 0, 0] - 0.0 + (0.5 - q.q[0, 0, 0]) + (-1.0 - q.q[h, 1, 0])
        assert new[0].advantage == pytest.approx(direct, abs=1e-15)
        assert new[0].advantage == 0.5
        assert recompute_with_policy(mp, rec, traj, q, u, 1.0, 1.0) == rec

    def test_recompute_leaves_gae(self, mp):
        ev = exact_values(mp, mp.uniform_profile())
        rec = gae_advantages(mp, ht(mp), CentralizedVCritic(ev.v), 1.0, 1.0, 0)
        other = random_profile(mp, np.random.default_rng(0))
        assert recompute_with_policy(mp, rec, ht(mp), CentralizedQCritic(ev.q), other, 1.0, 1.0) == rec
        assert rec[0].estimator == GAE


class TestVFromQ:
    def test_uniform_mixer(self, mp):
        h = int(mp.children[0, 0])
        q = CentralizedQCritic(exact_values(mp, mp.uniform_profile()).q)
        assert v_from_q(mp, q, mp.uniform_profile(), h)[0] == 0.0

    def test_deterministic_policy(self, kuhn):
        rng = np.random.default_rng(0)
        q = CentralizedQCritic(rng.normal(size=(kuhn.n_states, kuhn.max_actions, 2)))
        s = int(np.flatnonzero(kuhn.player == 1)[0])
        prof = deterministic_profile(kuhn, {int(kuhn.infoset[s]): 1})
        assert np.array_equal(v_from_q(kuhn, q, prof, s), q.q[s, 1])

    @pytest.mark.parametrize("name", SMALL_GAMES)
    def test_exact_critic_gives_oracle_v(self, name):
        g = load_game(name)
        prof = random_profile(g, np.random.default_rng(3))
        ev = exact_values(g, prof)
        vbar = policy_values(g, CentralizedQCritic(ev.q), prof)
        assert np.abs(vbar - ev.v).max() <= 1e-10


def _paths(game, prof):
    return enumerate_paths(game, game.state_policy(prof))


class TestPathwise:
    @pytest.mark.parametrize("name", ["kuhn", "matching_pennies_imperfect", "liars_dice:1x3"])
    @pytest.mark.parametrize("lam", LAMBDAS)
    def test_exact_q_gives_true_advantage(self, name, lam):
        g = load_game(name)
        prof = random_profile(g, np.random.default_rng(5))
        ev = exact_values(g, prof)
        q = CentralizedQCritic(ev.q)
        worst = 0.0
        for _, tr in _paths(g, prof)[:400]:
            for i in range(g.n_players):
                for r in qboost_advantages(g, tr, q, prof, lam, 1.0, i):
                    s, a = tr.states[r.timestep], tr.actions[r.timestep]
                    worst = max(worst, abs(r.advantage - ev.advantage[s, a, i]))
                t = qboost_targets(g, tr, q, prof, lam, 1.0)
                assert np.abs(t - ev.q[tr.states, tr.actions]).max() <= 1e-10
        assert worst <= 1e-10

    @given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.3, 1.0))
    def test_telescoping_identity(self, seed, gamma):
        g = load_game("kuhn")
        rng = np.random.default_rng(seed)
        prof = random_profile(g, rng)
        q = CentralizedQCritic(rng.uniform(-5, 5, size=(g.n_states, g.max_actions, 2)))
        vbar = policy_values(g, q, prof)
        vbar[g.terminal] = 0.0
        tr = rollout_batch(g, prof, rng, 1).trajectory(g, 0)
        nxt = tr.next_states()
        T = tr.horizon
        for i in range(2):
            for rec in qboost_advantages(g, tr, q, prof, 1.0, gamma, i):
                tau = rec.timestep
                u = np.arange(tau, T)
                d = gamma ** (u - tau)
                expanded = (np.sum(d * tr.rewards[tau:, i]) - vbar[tr.states[tau], i]
                            + np.sum(gamma * d * vbar[nxt[tau:], i])
                            - np.sum(d[1:] * q.q[tr.states[tau + 1:], tr.actions[tau + 1:], i]))
                assert rec.advantage == pytest.approx(expanded, abs=1e-12)

    @pytest.mark.parametrize("name", ["kuhn", "matching_pennies_imperfect"])
    def test_gae_exact_v_residuals_are_advantages(self, name):
        g = load_game(name)
        prof = random_profile(g, np.random.default_rng(8))
        ev = exact_values(g, prof)
        for _, tr in _paths(g, prof):
            v = np.where(g.terminal[tr.next_states()][:, None], 0.0, ev.v[tr.next_states()])
            delta = tr.rewards + v - ev.v[tr.states]
            assert np.abs(delta - ev.advantage[tr.states, tr.actions]).max() <= 1e-10

    def test_gae_lambda_zero_is_one_step(self, kuhn):
        rng = np.random.default_rng(2)
        v = CentralizedVCritic(rng.normal(size=(kuhn.n_states, 2)))
        tr = rollout_batch(kuhn, kuhn.uniform_profile(), rng, 1).trajectory(kuhn, 0)
        for rec in gae_advantages(kuhn, tr, v, 0.0, 1.0, 1):
            t = rec.timestep
            nxt = tr.next_states()[t]
            vn = 0.0 if kuhn.terminal[nxt] else v.v[nxt, 1]
            assert rec.advantage == pytest.approx(tr.rewards[t, 1] + vn - v.v[tr.states[t], 1])

    def test_qboost_lambda_zero_is_leading_term(self, kuhn):
        rng = np.random.default_rng(3)
        prof = random_profile(kuhn, rng)
        q = CentralizedQCritic(rng.normal(size=(kuhn.n_states, kuhn.max_actions, 2)))
        vbar = policy_values(kuhn, q, prof)
        tr = rollout_batch(kuhn, prof, rng, 1).trajectory(kuhn, 0)
        nxt = tr.next_states()
        for rec in qboost_advantages(kuhn, tr, q, prof, 0.0, 1.0, 0):
            t = rec.timestep
            s, a = tr.states[t], tr.actions[t]
            vn = 0.0 if kuhn.terminal[nxt[t]] else vbar[nxt[t], 0]
            assert rec.advantage == pytest.approx(q.q[s, a, 0] - vbar[s, 0] + tr.rewards[t, 0] + vn - q.q[s, a, 0])

    def test_zero_critic_targets_are_returns(self, kuhn):
        rng = np.random.default_rng(4)
        for _ in range(10):
            tr = rollout_batch(kuhn, kuhn.uniform_profile(), rng, 1).trajectory(kuhn, 0)
            t = qboost_targets(kuhn, tr, CentralizedQCritic.zeros(kuhn), kuhn.uniform_profile(), 1.0, 1.0)
            assert np.array_equal(t, np.repeat(tr.returns()[None], tr.horizon, axis=0))


class TestUnbiasedness:
    @pytest.mark.parametrize("name", ["kuhn", "matching_pennies_imperfect", "matching_pennies_perfect"])
    @given(seed=st.integers(0, 2**32 - 1))
    def test_any_critic_at_lambda_one(self, name, seed):
        g = load_game(name)
        rng = np.random.default_rng(seed)
        prof = random_profile(g, rng)
        q = exact_values(g, prof).q + rng.uniform(-5, 5, size=(g.n_states, g.max_actions, g.n_players))
        critic = CentralizedQCritic(q)
        policy = g.state_policy(prof)
        for i in range(g.n_players):
            est = np.zeros_like(exact_policy_gradient(g, prof, i))
            for p, tr in enumerate_paths(g, policy):
                for rec in qboost_advantages(g, tr, critic, prof, 1.0, 1.0, i):
                    s, a = tr.states[rec.timestep], tr.actions[rec.timestep]
                    row = g.infoset_local[g.infoset[s]]
                    score = -policy[s].copy()
                    score[a] += 1.0
                    est[row] += p * rec.advantage * score
            assert np.abs(est - exact_policy_gradient(g, prof, i)).max() <= 1e-9


class TestRecords:
    @given(seed=st.integers(0, 2**32 - 1), name=st.sampled_from(SMALL_GAMES))
    def test_one_record_per_decision(self, seed, name):
        g = load_game(name)
        rng = np.random.default_rng(seed)
        tr = rollout_batch(g, g.uniform_profile(), rng, 1).trajectory(g, 0)
        q = CentralizedQCritic.zeros(g)
        for i in range(g.n_players):
            want = [t for t in range(tr.horizon) if g.player[tr.states[t]] == i]
            boost = qboost_advantages(g, tr, q, g.uniform_profile(), 0.9, 1.0, i)
            gae = gae_advantages(g, tr, CentralizedVCritic.zeros(g), 0.9, 1.0, i)
            assert [r.timestep for r in boost] == want == [r.timestep for r in gae]
            assert all(r.target is not None for r in boost)
            assert all(r.target is None for r in gae)


class TestBatched:
    @given(seed=st.integers(0, 2**32 - 1), lam=st.sampled_from(LAMBDAS),
           gamma=st.sampled_from([1.0, 0.9]))
    def test_batch_matches_single(self, seed, lam, gamma):
        g = load_game("kuhn")
        rng = np.random.default_rng(seed)
        prof = random_profile(g, rng)
        q = CentralizedQCritic(rng.normal(size=(g.n_states, g.max_actions, 2)))
        v = CentralizedVCritic(rng.normal(size=(g.n_states, 2)))
        batch = rollout_batch(g, prof, rng, 8)
        adv, tgt = qboost_batch(g, batch, q.q, g.state_policy(prof), lam, gamma)
        gadv, _ = gae_batch(g, batch, v.v, lam, gamma)
        for b in range(len(batch)):
            tr = batch.trajectory(g, b)
            n = tr.horizon
            assert np.allclose(tgt[b, :n], qboost_targets(g, tr, q, prof, lam, gamma), atol=1e-12)
            for i in range(2):
                for rec in qboost_advantages(g, tr, q, prof, lam, gamma, i):
                    assert adv[b, rec.timestep, i] == pytest.approx(rec.advantage, abs=1e-12)
                for rec in gae_advantages(g, tr, v, lam, gamma, i):
                    assert gadv[b, rec.timestep, i] == pytest.approx(rec.advantage, abs=1e-12)
