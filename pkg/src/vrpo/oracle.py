"""Exact, enumeration-based ground truth.

Everything here works on the full game table in double precision: backward
induction for Q/V, reach-weighted policy gradients, best responses by
infoset-level traversal, and exact conditional MSE of advantage estimators
by enumerating every continuation below a (state, action) pair.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass

import numpy as np

from .games import GameStateTable, SizeGuardExceeded, enumerate_paths

__all__ = [
    "DegenerateVariance", "DeviationReport", "ExactValues", "best_response",
    "bellman_residual", "estimator_mse", "exact_policy_gradient", "exact_values",
    "expected_return", "exploitability", "noise_level", "reach_probabilities",
    "xi_threshold",
]


class DegenerateVariance(ValueError):
    """The future-action noise level is zero, so no threshold exists."""


@dataclass
class ExactValues:
    q: np.ndarray  # (S, A, n)
    v: np.ndarray  # (S, n)

    @property
    def advantage(self) -> np.ndarray:
        return self.q - self.v[:, None, :]


def exact_values(game: GameStateTable, profile: np.ndarray, gamma: float | None = None) -> ExactValues:
    """Q and V of every player under ``profile`` via Expected-SARSA backups.

    States are swept deepest level first, so each backup sees finished
    successor values; cost is O(|S| |A|).
    """
    gamma = game.gamma if gamma is None else gamma
    policy = game.state_policy(profile)
    S, A, n = game.rewards.shape
    q = np.zeros((S, A, n))
    v = np.zeros((S, n))
    legal = game.legal
    for level in reversed(game.levels):
        level = level[~game.terminal[level]]
        if len(level) == 0:
            continue
        kids = game.children[level]
        nxt = np.where(kids >= 0, kids, 0)
        q[level] = game.rewards[level] + gamma * v[nxt] * legal[level][..., None]
        v[level] = np.einsum("sa,san->sn", policy[level], q[level])
    return ExactValues(q, v)


def bellman_residual(game: GameStateTable, profile: np.ndarray, values: ExactValues,
                     gamma: float | None = None) -> float:
    """Largest violation of Q(s,a) = r(s,a) + gamma * sum_a' pi(a'|s') Q(s',a')."""
    gamma = game.gamma if gamma is None else gamma
    policy = game.state_policy(profile)
    legal = game.legal & ~game.terminal[:, None]
    s, a = np.nonzero(legal)
    nxt = game.children[s, a]
    backup = game.rewards[s, a] + gamma * np.einsum("ka,kan->kn", policy[nxt], values.q[nxt])
    res = np.abs(values.q[s, a] - backup).max(initial=0.0)
    cons = np.abs(values.v - np.einsum("sa,san->sn", policy, values.q)).max()
    return float(max(res, cons))


def reach_probabilities(game: GameStateTable, policy: np.ndarray,
                        exclude_player: int | None = None) -> np.ndarray:
    """Probability of reaching each state under a joint per-state policy.

    With ``exclude_player`` the actions of that player count as probability
    one (counterfactual reach).
    """
    reach = np.zeros(game.n_states)
    reach[0] = 1.0
    for level in game.levels:
        level = level[~game.terminal[level]]
        if len(level) == 0:
            continue
        p = policy[level]
        if exclude_player is not None:
            own = game.player[level] == exclude_player
            p = np.where(own[:, None], game.legal[level].astype(float), p)
        kids = game.children[level]
        ok = kids >= 0
        reach[kids[ok]] = (reach[level][:, None] * p)[ok]
    return reach


def expected_return(game: GameStateTable, profile: np.ndarray) -> np.ndarray:
    """On-policy expected return of every player from the root."""
    return exact_values(game, profile).v[0]


def exact_policy_gradient(game: GameStateTable, profile: np.ndarray, player: int,
                          max_paths: int = 10**6) -> np.ndarray:
    """Gradient of the player's expected return w.r.t. its softmax logits.

    Returns a table shaped like that player's logits, (n_infosets_i, A).
    Uses E[sum_t A(s_t,a_t) grad log pi(a_t|o_t)] written over states: the
    per-state contribution reach(s) * gamma^depth * pi(.|s) * A(s,.) already
    includes the softmax score since sum_a pi(a|s) A(s,a) = 0.
    """
    n_paths = int(game.terminal.sum())
    if n_paths > max_paths:
        raise SizeGuardExceeded(f"{n_paths} trajectories exceed the limit {max_paths}")
    values = exact_values(game, profile)
    policy = game.state_policy(profile)
    reach = reach_probabilities(game, policy) * game.gamma ** game.depth
    rows = game.player_infosets[player]
    grad = np.zeros((len(rows), game.max_actions))
    states = np.flatnonzero(game.player == player)
    contrib = reach[states, None] * policy[states] * values.advantage[states, :, player]
    np.add.at(grad, game.infoset_local[game.infoset[states]], contrib)
    return grad


# ---------------------------------------------------------------------------
# best response and exploitability


@dataclass
class BestResponse:
    value: float
    strategy: dict[int, int]  # infoset -> action


@dataclass
class DeviationReport:
    gains: np.ndarray  # per-player deviation gain
    exploitability: float
    strategies: list[dict[int, int]]
    on_policy: np.ndarray
    best_values: np.ndarray

    def to_row(self) -> dict[str, float]:
        row = {"exploitability": self.exploitability}
        for i, g in enumerate(self.gains):
            row[f"gain_p{i + 1}"] = float(g)
        return row


def best_response(game: GameStateTable, profile: np.ndarray, player: int,
                  tie_tol: float = 1e-12) -> BestResponse:
    """Best deterministic deviation of ``player`` against the rest of ``profile``.

    Each infoset picks the action maximising the sum over its member states of
    (opponent-and-Nature reach) x (action value below).  Ties go to the
    lowest action index.
    """
    policy = game.state_policy(profile)
    gamma = game.gamma
    weight = reach_probabilities(game, policy, exclude_player=player) * gamma ** game.depth
    members: dict[int, list[int]] = {}
    for s in np.flatnonzero(game.player == player):
        members.setdefault(int(game.infoset[s]), []).append(int(s))
    R = game.rewards[:, :, player]
    kids = game.children
    value = np.full(game.n_states, np.nan)
    choice: dict[int, int] = {}

    def state_value(s: int) -> float:
        if not np.isnan(value[s]):
            return value[s]
        k = game.num_actions[s]
        if k == 0:
            out = 0.0
        elif game.player[s] == player:
            a = choose(int(game.infoset[s]))
            out = R[s, a] + gamma * state_value(kids[s, a])
        else:
            out = 0.0
            for a in range(k):
                if policy[s, a] > 0.0:
                    out += policy[s, a] * (R[s, a] + gamma * state_value(kids[s, a]))
        value[s] = out
        return out

    def choose(info: int) -> int:
        if info in choice:
            return choice[info]
        k = game.infoset_num_actions[info]
        vals = np.zeros(k)
        for s in members[info]:
            for a in range(k):
                vals[a] += weight[s] * (R[s, a] + gamma * state_value(kids[s, a]))
        best = int(np.flatnonzero(vals >= vals.max() - tie_tol * max(1.0, abs(vals.max())))[0])
        choice[info] = best
        return best

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, 4 * game.max_depth + 1000))
    try:
        root = state_value(0)
        for info in members:  # infosets unreachable by the opponents still get an action
            choose(info)
    finally:
        sys.setrecursionlimit(limit)
    return BestResponse(float(root), dict(sorted(choice.items())))


def exploitability(game: GameStateTable, profile: np.ndarray) -> DeviationReport:
    on_policy = expected_return(game, profile)
    brs = [best_response(game, profile, p) for p in range(game.n_players)]
    best = np.array([b.value for b in brs])
    gains = best - on_policy
    return DeviationReport(gains, float(gains.mean()), [b.strategy for b in brs], on_policy, best)


# ---------------------------------------------------------------------------
# estimator error at a fixed (state, action)


def _continuations(game, profile, state, action, max_paths):
    if game.player[state] < 0:
        raise ValueError("estimator error is defined at agent decision states")
    policy = game.state_policy(profile)
    return policy, enumerate_paths(game, policy, start=state, first_action=action,
                                   max_paths=max_paths)


def estimator_mse(game: GameStateTable, profile: np.ndarray, estimator: str, state: int,
                  action: int, lam: float, gamma: float | None = None, critic=None,
                  max_paths: int = 10**6) -> float:
    """Exact E[(A_hat - A(s,a))^2 | s, a] over every continuation.

    ``estimator`` is ``"gae"`` or ``"qboost"``.  Without ``critic`` the exact
    V (for GAE) or exact Q (for Q-boosting) of ``profile`` is used.
    """
    from .estimators import CentralizedQCritic, CentralizedVCritic, gae_advantages, qboost_advantages

    gamma = game.gamma if gamma is None else gamma
    exact = exact_values(game, profile, gamma)
    i = int(game.player[state])
    truth = exact.advantage[state, action, i]
    _, paths = _continuations(game, profile, state, action, max_paths)
    if estimator == "gae":
        critic = critic or CentralizedVCritic(exact.v.copy())
        est = lambda tr: gae_advantages(game, tr, critic, lam, gamma, i)[0].advantage
    elif estimator == "qboost":
        critic = critic or CentralizedQCritic(exact.q.copy())
        est = lambda tr: qboost_advantages(game, tr, critic, profile, lam, gamma, i)[0].advantage
    else:
        raise ValueError(f"unknown estimator {estimator!r}")
    return float(sum(p * (est(tr) - truth) ** 2 for p, tr in paths))


def noise_level(game: GameStateTable, profile: np.ndarray, state: int, action: int,
                lam: float, gamma: float | None = None, max_paths: int = 10**6) -> float:
    """Future-action noise sum_{u>t} rho^(2(u-t)) E[A(s_u,a_u)^2 | s,a], rho = lam*gamma.

    Computed from squared true advantages only; equals the exact-V GAE error
    because future advantages are martingale differences.
    """
    gamma = game.gamma if gamma is None else gamma
    rho = lam * gamma
    adv = exact_values(game, profile, gamma).advantage
    i = int(game.player[state])
    _, paths = _continuations(game, profile, state, action, max_paths)
    total = 0.0
    for p, tr in paths:
        u = np.arange(1, tr.horizon)
        total += p * np.sum(rho ** (2 * u) * adv[tr.states[1:], tr.actions[1:], i] ** 2)
    return float(total)


def xi_threshold(game: GameStateTable, profile: np.ndarray, state: int, action: int,
                 lam: float, gamma: float | None = None, max_paths: int = 10**6) -> float:
    """Critic accuracy below which Q-boosting beats exact-V GAE in MSE.

    sqrt(Gamma) / ((1 + gamma) * sum_{k<L} (lam*gamma)^k) with L the number of
    remaining action steps (longest continuation).
    """
    gamma = game.gamma if gamma is None else gamma
    noise = estimator_mse(game, profile, "gae", state, action, lam, gamma, max_paths=max_paths)
    if noise <= 1e-24:
        raise DegenerateVariance(f"no future-action noise at state {state}, action {action}")
    _, paths = _continuations(game, profile, state, action, max_paths)
    L = max(tr.horizon for _, tr in paths)
    rho = lam * gamma
    return float(np.sqrt(noise) / ((1.0 + gamma) * np.sum(rho ** np.arange(L))))
