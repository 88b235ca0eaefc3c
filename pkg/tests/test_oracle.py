import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import ALL_GAMES, SMALL_GAMES, deterministic_profile, random_profile
from vrpo.games import enumerate_paths, load_game, pure_strategies
from vrpo.oracle import (DegenerateVariance, bellman_residual, best_response, estimator_mse,
                         exact_policy_gradient, exact_values, expected_return, exploitability,
                         noise_level, xi_threshold)
from vrpo.estimators import CentralizedQCritic


def path_value(game, profile, start=0, first_action=None):
    """Expected per-player return by explicit path enumeration (no backups)."""
    total = np.zeros(game.n_players)
    for p, tr in enumerate_paths(game, game.state_policy(profile), start, first_action):
        total += p * tr.returns(game.gamma)
    return total


def with_player(game, profile, player, strategy):
    prof = profile.copy()
    for info, a in strategy.items():
        prof[info] = np.eye(game.max_actions)[a]
    return prof


def kuhn_info(game, key: bytes, player: int) -> int:
    return game.infoset_keys.index((player, key))


class TestExactValues:
    def test_figure_values_imperfect(self, mp):
        ev = exact_values(mp, mp.uniform_profile())
        h = int(mp.children[0, 0])
        assert ev.q[h, 1, 0] == -1.0
        assert ev.v[h, 0] == 0.0
        assert ev.advantage[0, 0, 0] == 0.0

    def test_figure_values_perfect(self, mp_perfect):
        g = mp_perfect
        h, t = int(g.children[0, 0]), int(g.children[0, 1])
        prof = deterministic_profile(g, {int(g.infoset[h]): 1, int(g.infoset[t]): 0})
        assert exact_values(g, prof).v[h, 0] == -1.0

    @pytest.mark.parametrize("name", SMALL_GAMES)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_matches_path_enumeration(self, name, seed):
        g = load_game(name)
        prof = random_profile(g, np.random.default_rng(seed))
        ev = exact_values(g, prof)
        assert np.allclose(ev.v[0], path_value(g, prof), atol=1e-12)
        s = int(np.random.default_rng(seed).choice(np.flatnonzero(~g.terminal)))
        a = int(np.random.default_rng(seed + 1).integers(g.num_actions[s]))
        assert np.allclose(ev.q[s, a], path_value(g, prof, s, a), atol=1e-12)

    @pytest.mark.parametrize("name", ALL_GAMES)
    def test_bellman_residual(self, name):
        g = load_game(name)
        rng = np.random.default_rng(1)
        for _ in range(5):
            prof = random_profile(g, rng, temperature=2.0)
            assert bellman_residual(g, prof, exact_values(g, prof)) <= 1e-10

    def test_zero_sum_values(self, kuhn):
        ev = exact_values(kuhn, random_profile(kuhn, np.random.default_rng(2)))
        assert np.abs(ev.v.sum(axis=1)).max() <= 1e-12

    def test_discount_applies_per_step(self, mp):
        ev = exact_values(mp, mp.uniform_profile(), gamma=0.5)
        h = int(mp.children[0, 0])
        # reward arrives on the second step
        assert ev.q[0, 0, 0] == pytest.approx(0.5 * ev.v[h, 0])


class TestPolicyGradient:
    def test_zero_at_uniform_matching_pennies(self, mp):
        assert np.all(exact_policy_gradient(mp, mp.uniform_profile(), 0) == 0)

    def test_perfect_second_player_nonzero(self, mp_perfect):
        g = exact_policy_gradient(mp_perfect, mp_perfect.uniform_profile(), 1)
        assert np.abs(g).max() > 0.1

    @pytest.mark.parametrize("name", ["kuhn", "matching_pennies_imperfect", "matching_pennies_perfect"])
    @pytest.mark.parametrize("player", [0, 1])
    def test_finite_differences(self, name, player):
        g = load_game(name)
        rng = np.random.default_rng(7)
        legal = g.infoset_legal()
        logits = np.where(legal, rng.normal(size=legal.shape), 0.0)

        def profile(z):
            e = np.where(legal, np.exp(z - z.max(axis=1, keepdims=True)), 0.0)
            return e / e.sum(axis=1, keepdims=True)

        grad = exact_policy_gradient(g, profile(logits), player)
        rows = g.player_infosets[player]
        h = 1e-5
        for r_local, r in enumerate(rows):
            for a in range(g.infoset_num_actions[r]):
                zp, zm = logits.copy(), logits.copy()
                zp[r, a] += h
                zm[r, a] -= h
                fd = (path_value(g, profile(zp))[player] - path_value(g, profile(zm))[player]) / (2 * h)
                assert grad[r_local, a] == pytest.approx(fd, rel=1e-6, abs=1e-9)

    def test_softmax_baseline_identity(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            z = rng.normal(size=5)
            p = np.exp(z) / np.exp(z).sum()
            score = np.eye(5) - p  # row a: d log p_a / d z
            assert np.abs(p @ score).max() <= 1e-15


class TestBestResponse:
    def test_uniform_matching_pennies(self, mp):
        for p in (0, 1):
            assert best_response(mp, mp.uniform_profile(), p).value == pytest.approx(0.0, abs=1e-15)

    def test_against_always_h(self, mp):
        prof = deterministic_profile(mp, {1: 0})
        br = best_response(mp, prof, 0)
        assert br.value == 1.0 and br.strategy == {0: 0}

    def test_ties_take_lowest_action(self, mp):
        assert best_response(mp, mp.uniform_profile(), 0).strategy == {0: 0}

    @pytest.mark.parametrize("player", [0, 1])
    @pytest.mark.parametrize("seed", [None, 0, 1, 2])
    def test_kuhn_brute_force(self, kuhn, player, seed):
        prof = (kuhn.uniform_profile() if seed is None
                else random_profile(kuhn, np.random.default_rng(seed)))
        brute = max(path_value(kuhn, with_player(kuhn, prof, player, s))[player]
                    for s in pure_strategies(kuhn, player))
        br = best_response(kuhn, prof, player)
        assert br.value == pytest.approx(brute, abs=1e-12)
        achieved = path_value(kuhn, with_player(kuhn, prof, player, br.strategy))[player]
        assert achieved == pytest.approx(brute, abs=1e-12)
        assert len(br.strategy) == 6

    @pytest.mark.parametrize("name", SMALL_GAMES)
    @given(seed=st.integers(0, 2**32 - 1))
    def test_dominates_on_policy(self, name, seed):
        g = load_game(name)
        prof = random_profile(g, np.random.default_rng(seed), temperature=3.0)
        rep = exploitability(g, prof)
        assert np.all(rep.gains >= -1e-10)
        assert rep.exploitability == pytest.approx(rep.gains.mean())


class TestExploitability:
    def test_uniform_matching_pennies_is_zero(self, mp):
        assert exploitability(mp, mp.uniform_profile()).exploitability == 0.0

    def test_always_h_first_player(self, mp):
        rep = exploitability(mp, deterministic_profile(mp, {0: 0}))
        assert rep.gains.tolist() == [0.0, 1.0]
        assert rep.exploitability == 0.5

    def test_closed_form_matching_pennies(self, mp):
        for p, q in [(0.3, 0.9), (0.5, 0.2), (0.75, 0.75)]:
            prof = np.array([[p, 1 - p], [q, 1 - q]])
            want = (abs(2 * q - 1) + abs(2 * p - 1)) / 2
            assert exploitability(mp, prof).exploitability == pytest.approx(want, abs=1e-12)

    def test_kuhn_uniform_reference(self, kuhn):
        assert exploitability(kuhn, kuhn.uniform_profile()).exploitability == pytest.approx(11 / 24, abs=1e-12)

    def test_leduc_uniform_reference(self, leduc):
        assert exploitability(leduc, leduc.uniform_profile()).exploitability == pytest.approx(2.3736, abs=1e-4)

    def test_kuhn_equilibrium_family(self, kuhn):
        # first player's bluff frequency alpha parametrises a continuum of equilibria
        for alpha in (0.0, 1 / 6, 1 / 3):
            bet = {b"J|": alpha, b"Q|": 0.0, b"K|": 3 * alpha}
            call0 = {b"J|pb": 0.0, b"Q|pb": alpha + 1 / 3, b"K|pb": 1.0}
            call1 = {b"J|b": 0.0, b"Q|b": 1 / 3, b"K|b": 1.0}
            bet1 = {b"J|p": 1 / 3, b"Q|p": 0.0, b"K|p": 1.0}
            prof = np.zeros((kuhn.n_infosets, kuhn.max_actions))
            for player, table in ((0, bet), (0, call0), (1, call1), (1, bet1)):
                for key, pb in table.items():
                    prof[kuhn_info(kuhn, key, player), :2] = (1 - pb, pb)
            rep = exploitability(kuhn, prof)
            assert rep.exploitability == pytest.approx(0.0, abs=1e-12)
            assert rep.on_policy[0] == pytest.approx(-1 / 18, abs=1e-12)

    def test_report_row(self, mp):
        row = exploitability(mp, deterministic_profile(mp, {0: 0})).to_row()
        assert row == {"exploitability": 0.5, "gain_p1": 0.0, "gain_p2": 1.0}


class TestEstimatorError:
    def test_reference_values(self, mp):
        u = mp.uniform_profile()
        assert estimator_mse(mp, u, "gae", 0, 0, 1.0) == 1.0
        assert estimator_mse(mp, u, "qboost", 0, 0, 1.0) == 0.0
        assert estimator_mse(mp, u, "gae", 0, 0, 0.0) == 0.0
        assert xi_threshold(mp, u, 0, 0, 1.0) == 0.25

    def test_degenerate_at_lambda_zero(self, mp, kuhn):
        with pytest.raises(DegenerateVariance):
            xi_threshold(mp, mp.uniform_profile(), 0, 0, 0.0)
        s = int(np.flatnonzero(kuhn.player == 0)[0])
        with pytest.raises(DegenerateVariance):
            xi_threshold(kuhn, kuhn.uniform_profile(), s, 0, 0.0)

    def test_unknown_estimator(self, mp):
        with pytest.raises(ValueError):
            estimator_mse(mp, mp.uniform_profile(), "td", 0, 0, 1.0)

    @given(seed=st.integers(0, 2**32 - 1), lam=st.sampled_from([0.0, 0.5, 0.95, 1.0]))
    def test_gae_error_equals_noise_level(self, seed, lam):
        g = load_game("kuhn")
        prof = random_profile(g, np.random.default_rng(seed))
        states = np.flatnonzero(g.player >= 0)
        s = int(states[seed % len(states)])
        a = seed % int(g.num_actions[s])
        assert estimator_mse(g, prof, "gae", s, a, lam) == pytest.approx(
            noise_level(g, prof, s, a, lam), abs=1e-10)

    @pytest.mark.parametrize("name", ["kuhn", "matching_pennies_imperfect"])
    def test_martingale_cancellation(self, name):
        g = load_game(name)
        prof = random_profile(g, np.random.default_rng(4))
        adv = exact_values(g, prof).advantage
        for i in range(g.n_players):
            cross = {}
            for p, tr in enumerate_paths(g, g.state_policy(prof)):
                a = adv[tr.states, tr.actions, i]
                for u in range(tr.horizon):
                    for v in range(u + 1, tr.horizon):
                        cross[u, v] = cross.get((u, v), 0.0) + p * a[u] * a[v]
            assert max(abs(x) for x in cross.values()) <= 1e-10

    @pytest.mark.parametrize("lam", [0.5, 0.95, 1.0])
    def test_dominance_below_threshold(self, mp, lam):
        u = mp.uniform_profile()
        xi = xi_threshold(mp, u, 0, 0, lam)
        gae = estimator_mse(mp, u, "gae", 0, 0, lam)
        exact = exact_values(mp, u).q
        rng = np.random.default_rng(0)
        for _ in range(25):
            off = rng.uniform(-1, 1, exact.shape)
            off *= 0.999 * xi / np.abs(off).max()
            mse = estimator_mse(mp, u, "qboost", 0, 0, lam, critic=CentralizedQCritic(exact + off))
            assert mse < gae
