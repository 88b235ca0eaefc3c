"""Advantage estimators over trajectories: GAE and Q-boosting.

Both traces run over every step of a trajectory (other players' and Nature's
moves included) using player i's rewards, and are accumulated in a single
backward pass.  Terminal states have value zero.

The single-trajectory functions return :class:`AdvantageRecord` lists and are
the readable reference; the ``*_batch`` variants do the same arithmetic on a
padded :class:`~vrpo.games.TrajectoryBatch` for all players at once and are
what the trainer uses.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .games import GameStateTable, Trajectory, TrajectoryBatch

GAE = "gae"
QBOOST = "qboost"


@dataclass
class CentralizedVCritic:
    v: np.ndarray  # (S, n)

    @classmethod
    def zeros(cls, game: GameStateTable) -> CentralizedVCritic:
        return cls(np.zeros((game.n_states, game.n_players)))


@dataclass
class CentralizedQCritic:
    q: np.ndarray  # (S, A, n)

    @classmethod
    def zeros(cls, game: GameStateTable) -> CentralizedQCritic:
        return cls(np.zeros((game.n_states, game.max_actions, game.n_players)))


@dataclass
class AdvantageRecord:
    trajectory: int
    timestep: int
    player: int
    advantage: float
    estimator: str
    target: float | None = None


def _trace(deltas: np.ndarray, rho: float, axis: int = 0) -> np.ndarray:
    """sum_{t' >= t} rho^(t'-t) delta_t' along ``axis``."""
    d = np.moveaxis(deltas, axis, 0)
    out = np.empty_like(d)
    acc = np.zeros_like(d[0])
    for t in range(len(d) - 1, -1, -1):
        acc = d[t] + rho * acc
        out[t] = acc
    return np.moveaxis(out, 0, axis)


def policy_values(game: GameStateTable, critic: CentralizedQCritic, profile: np.ndarray) -> np.ndarray:
    """V_bar(s) = sum_a pi(a|s) Q(s,a) for every state and player, shape (S, n)."""
    return np.einsum("sa,san->sn", game.state_policy(profile), critic.q)


def v_from_q(game: GameStateTable, critic: CentralizedQCritic, profile: np.ndarray, state: int) -> np.ndarray:
    policy = game.state_policy(profile)[state]
    return policy @ critic.q[state]


def gae_advantages(game: GameStateTable, traj: Trajectory, critic: CentralizedVCritic,
                   lam: float, gamma: float, player: int, index: int = 0) -> list[AdvantageRecord]:
    v = critic.v[:, player]
    nxt = traj.next_states()
    v_next = np.where(game.terminal[nxt], 0.0, v[nxt])
    delta = traj.rewards[:, player] + gamma * v_next - v[traj.states]
    adv = _trace(delta, lam * gamma)
    return [AdvantageRecord(index, t, player, float(adv[t]), GAE)
            for t in range(traj.horizon) if game.player[traj.states[t]] == player]


def _qboost_trace(game, traj, critic, profile, lam, gamma):
    vbar = policy_values(game, critic, profile)
    s, a = traj.states, traj.actions
    q_sa = critic.q[s, a]  # (T, n)
    delta = traj.rewards + gamma * vbar[traj.next_states()] - q_sa
    return q_sa, vbar[s], _trace(delta, lam * gamma)


def qboost_advantages(game: GameStateTable, traj: Trajectory, critic: CentralizedQCritic,
                      profile: np.ndarray, lam: float, gamma: float, player: int,
                      index: int = 0) -> list[AdvantageRecord]:
    q_sa, vbar, trace = _qboost_trace(game, traj, critic, profile, lam, gamma)
    adv = q_sa[:, player] - vbar[:, player] + trace[:, player]
    target = q_sa[:, player] + trace[:, player]
    return [AdvantageRecord(index, t, player, float(adv[t]), QBOOST, float(target[t]))
            for t in range(traj.horizon) if game.player[traj.states[t]] == player]


def qboost_targets(game: GameStateTable, traj: Trajectory, critic: CentralizedQCritic,
                   profile: np.ndarray, lam: float, gamma: float) -> np.ndarray:
    """Q-critic regression targets for every step and player, shape (T, n)."""
    q_sa, _, trace = _qboost_trace(game, traj, critic, profile, lam, gamma)
    return q_sa + trace


def recompute_with_policy(game: GameStateTable, records: list[AdvantageRecord], traj: Trajectory,
                          critic: CentralizedQCritic, profile: np.ndarray, lam: float,
                          gamma: float) -> list[AdvantageRecord]:
    """Refresh the policy-expectation terms of Q-boost records under ``profile``.

    Critic entries are untouched.  GAE records have no such terms and are
    returned as they are.
    """
    if not records or records[0].estimator == GAE:
        return list(records)
    q_sa, vbar, trace = _qboost_trace(game, traj, critic, profile, lam, gamma)
    out = []
    for rec in records:
        t, i = rec.timestep, rec.player
        out.append(replace(rec, advantage=float(q_sa[t, i] - vbar[t, i] + trace[t, i]),
                           target=float(q_sa[t, i] + trace[t, i])))
    return out


# ---------------------------------------------------------------------------
# batched variants


def qboost_batch(game: GameStateTable, batch: TrajectoryBatch, q: np.ndarray, policy: np.ndarray,
                 lam: float, gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """Q-boost advantages and Q-targets for all steps and players, each (B, H, n).

    ``policy`` is the joint per-state policy (S, A).  Entries at padded steps
    are meaningless and must be masked with ``batch.valid``.
    """
    vbar = np.einsum("sa,san->sn", policy, q)
    valid = batch.valid[..., None]
    q_sa = q[batch.states, batch.actions]
    delta = (batch.rewards(game) + gamma * vbar[batch.next_states(game)] - q_sa) * valid
    trace = _trace(delta, lam * gamma, axis=1)
    return q_sa - vbar[batch.states] + trace, q_sa + trace


def gae_batch(game: GameStateTable, batch: TrajectoryBatch, v: np.ndarray, lam: float,
              gamma: float) -> tuple[np.ndarray, np.ndarray]:
    """GAE advantages and lambda-return targets, each (B, H, n).

    ``v`` is a per-state value table (S, n); terminal entries are ignored.
    """
    valid = batch.valid[..., None]
    nxt = batch.next_states(game)
    v_s = v[batch.states]
    v_next = np.where(game.terminal[nxt][..., None], 0.0, v[nxt])
    delta = (batch.rewards(game) + gamma * v_next - v_s) * valid
    adv = _trace(delta, lam * gamma, axis=1)
    return adv, v_s + adv
