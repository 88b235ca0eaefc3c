"""Tabular VRPO trainer and its GAE baselines (MAPPO, IPPO).

One softmax actor per seat, trained by self-play on a shared rollout batch.
VRPO uses a centralized Q-critic with Q-boosting advantages; MAPPO uses a
centralized V-critic keyed by state and IPPO a V-critic keyed by each
player's own observation, both with GAE.  All three share the schedule:
freeze reference policies, roll out, actor epochs over the fresh batch,
push to the replay buffer, critic epochs starting from the fresh batch and
resampling from replay.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .estimators import gae_batch, qboost_batch
from .games import GameStateTable, TrajectoryBatch, load_game, rollout_batch
from .oracle import exact_values, exploitability, reach_probabilities

ALGORITHMS = ("vrpo", "mappo", "ippo")
CHECKPOINT_VERSION = 1
REPLAY = -1  # iteration tag of batches drawn from the replay buffer


@dataclass
class TrainerConfig:
    batch_size: int = 256
    minibatches: int = 4
    actor_epochs: int = 4
    critic_epochs: int = 4
    clip_base: float = 0.02
    reg_base: float = 0.1
    lr_base: float = 0.001
    lam: float = 0.95
    gamma: float = 1.0
    total_iterations: int = 500
    lr_horizon: int = 125
    reg_horizon: int = 125
    replay_ratio: int = 64
    ema_decay: float = 0.999
    momentum: float = 0.9
    seed: int = 0
    critic_init: str = "zero"  # or "oracle": exact values of the initial profile
    workers: int = 1

    def validate(self) -> None:
        ints = ("batch_size", "minibatches", "actor_epochs", "critic_epochs", "total_iterations",
                "lr_horizon", "reg_horizon", "replay_ratio", "workers")
        for name in ints:
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.batch_size % self.minibatches:
            raise ValueError("batch_size must be divisible by minibatches")
        for name in ("clip_base", "reg_base", "lr_base"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lam must lie in [0, 1]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if not 0.0 <= self.ema_decay < 1.0:
            raise ValueError("ema_decay must lie in [0, 1)")
        if not 0.0 <= self.momentum < 1.0:
            raise ValueError("momentum must lie in [0, 1)")
        if self.critic_init not in ("zero", "oracle"):
            raise ValueError("critic_init must be 'zero' or 'oracle'")


# ---------------------------------------------------------------------------
# actors


@dataclass
class SoftmaxActor:
    player: int
    logits: np.ndarray  # (n_infosets of player, A); illegal entries stay 0
    legal: np.ndarray

    @classmethod
    def uniform(cls, game: GameStateTable, player: int) -> SoftmaxActor:
        rows = game.player_infosets[player]
        legal = game.infoset_legal()[rows]
        return cls(player, np.zeros(legal.shape), legal)

    def probs(self, rows=None) -> np.ndarray:
        z = self.logits if rows is None else self.logits[rows]
        legal = self.legal if rows is None else self.legal[rows]
        z = np.where(legal, z, -np.inf)
        z = np.exp(z - z.max(axis=1, keepdims=True))
        return z / z.sum(axis=1, keepdims=True)


def joint_profile(game: GameStateTable, actors: list[SoftmaxActor],
                  logits: list[np.ndarray] | None = None) -> np.ndarray:
    """Infoset profile (I, A) of all seats; ``logits`` overrides the actors' tables."""
    out = np.zeros((game.n_infosets, game.max_actions))
    for p, actor in enumerate(actors):
        if logits is not None:
            actor = SoftmaxActor(actor.player, logits[p], actor.legal)
        out[game.player_infosets[p]] = actor.probs()
    return out


# ---------------------------------------------------------------------------
# losses


def surrogate_loss(actor: SoftmaxActor, rows: np.ndarray, actions: np.ndarray,
                   ref_probs: np.ndarray, advantages: np.ndarray, eps: float,
                   scale: float = 1.0) -> tuple[float, np.ndarray, float]:
    """Clipped policy-ratio surrogate; returns (loss, d loss / d logits, clip fraction).

    Advantages are constants.  Records whose min picks the clamped term get
    no gradient.
    """
    p = actor.probs(rows)
    k = np.arange(len(rows))
    ratio = p[k, actions] / ref_probs
    clamped = np.clip(ratio, 1.0 - eps, 1.0 + eps)
    raw, cut = ratio * advantages, clamped * advantages
    loss = -scale * float(np.minimum(raw, cut).sum())
    active = raw <= cut
    score = -p
    score[k, actions] += 1.0
    coef = np.where(active, -scale * advantages * ratio, 0.0)
    grad = np.zeros_like(actor.logits)
    np.add.at(grad, rows, coef[:, None] * score)
    clip_fraction = float(np.mean(np.abs(ratio - 1.0) > eps)) if len(rows) else 0.0
    return loss, grad, clip_fraction


def _kl_terms(p: np.ndarray, legal: np.ndarray):
    logp = np.log(np.where(p > 0, p, 1.0))
    neg_entropy = (p * logp).sum(axis=1)
    return neg_entropy + np.log(legal.sum(axis=1)), logp, neg_entropy


def kl_uniform(actor: SoftmaxActor, rows: np.ndarray, scale: float = 1.0) -> tuple[float, np.ndarray]:
    """Sum over visited decision points of KL(pi(.|o) || uniform over legal actions)."""
    p = actor.probs(rows)
    kl, logp, neg_entropy = _kl_terms(p, actor.legal[rows])
    g = p * (logp - neg_entropy[:, None])
    grad = np.zeros_like(actor.logits)
    np.add.at(grad, rows, scale * g)
    return scale * float(kl.sum()), grad


def kl_divergence(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Row-wise KL(p || q); zero-probability entries of p contribute nothing."""
    ok = p > 0
    return np.where(ok, p * (np.log(np.where(ok, p, 1.0)) - np.log(np.where(ok, q, 1.0))), 0.0).sum(axis=1)


def critic_loss(values: np.ndarray, index, targets: np.ndarray,
                scale: float = 1.0) -> tuple[float, np.ndarray]:
    """Half squared error between ``values[index]`` and ``targets``; gradient over the table."""
    diff = values[index] - targets
    grad = np.zeros_like(values)
    np.add.at(grad, index, scale * diff)
    return 0.5 * scale * float((diff**2).sum()), grad


# ---------------------------------------------------------------------------
# schedules and optimisation


class Schedule(NamedTuple):
    lr_actor: float
    lr_critic: float
    eps: float
    alpha: float


def schedules(T: int, config: TrainerConfig) -> Schedule:
    if T < 1:
        raise ValueError("iterations are counted from 1")
    decay = min(1.0, config.lr_horizon / T)
    reg_decay = min(1.0, config.reg_horizon / T)
    return Schedule(
        lr_actor=config.lr_base * decay,
        lr_critic=config.lr_base * decay**0.5,
        eps=config.clip_base * decay,
        alpha=config.reg_base * reg_decay**0.5,
    )


def optimizer_step(param: np.ndarray, grad: np.ndarray, rate: float,
                   velocity: np.ndarray, momentum: float = 0.9) -> np.ndarray:
    """Classical momentum descent, in place on ``param`` and ``velocity``."""
    velocity *= momentum
    velocity += grad
    param -= rate * velocity
    return param


def ema_update(eval_logits: np.ndarray, actor_logits: np.ndarray, beta: float) -> np.ndarray:
    return beta * eval_logits + (1.0 - beta) * actor_logits


# ---------------------------------------------------------------------------
# replay


class ReplayBuffer:
    """Fixed-capacity ring of padded trajectories; the oldest are overwritten first."""

    def __init__(self, capacity: int, horizon: int):
        self.capacity = capacity
        self.states = np.zeros((capacity, horizon), dtype=np.int64)
        self.actions = np.zeros((capacity, horizon), dtype=np.int64)
        self.lengths = np.zeros(capacity, dtype=np.int64)
        self.terminals = np.zeros(capacity, dtype=np.int64)
        self.head = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def add(self, batch: TrajectoryBatch) -> None:
        n = len(batch)
        src = np.arange(max(0, n - self.capacity), n)
        dst = (self.head + np.arange(n))[src] % self.capacity
        self.states[dst] = batch.states[src]
        self.actions[dst] = batch.actions[src]
        self.lengths[dst] = batch.lengths[src]
        self.terminals[dst] = batch.terminals[src]
        self.head = (self.head + n) % self.capacity
        self.size = min(self.capacity, self.size + n)

    def ordered(self) -> np.ndarray:
        """Slot indices from oldest to newest."""
        if self.size < self.capacity:
            return np.arange(self.size)
        return (self.head + np.arange(self.capacity)) % self.capacity

    def get(self, slots: np.ndarray) -> TrajectoryBatch:
        return TrajectoryBatch(self.states[slots], self.actions[slots], self.lengths[slots],
                               self.terminals[slots], REPLAY)


# ---------------------------------------------------------------------------
# trainer state


@dataclass
class IterationMetrics:
    iteration: int
    adv_std: float
    clip_fraction: float
    kl_ref: float
    kl_uniform: float
    mean_return_p1: float
    mean_traj_len: float
    schedule: Schedule
    exploitability: float | None = None
    adv_std_by_player: tuple[float, ...] = ()


@dataclass
class TrainerState:
    game: GameStateTable
    config: TrainerConfig
    algo: str
    actors: list[SoftmaxActor]
    critic: np.ndarray
    actor_velocity: list[np.ndarray]
    critic_velocity: np.ndarray
    replay: ReplayBuffer
    ema_logits: list[np.ndarray]
    rng: np.random.Generator
    iteration: int = 0
    consumed: list[int] = field(default_factory=list)  # provenance of actor batches


def _obs_value_seed(game: GameStateTable, profile: np.ndarray) -> np.ndarray:
    """Reach-weighted exact value of each player observation (IPPO critic seed)."""
    v = exact_values(game, profile).v
    reach = reach_probabilities(game, game.state_policy(profile))
    num = np.zeros(len(game.obs_keys))
    den = np.zeros(len(game.obs_keys))
    for i in range(game.n_players):
        ok = game.obs[:, i] >= 0
        np.add.at(num, game.obs[ok, i], reach[ok] * v[ok, i])
        np.add.at(den, game.obs[ok, i], reach[ok])
    return np.divide(num, den, out=np.zeros_like(num), where=den > 0)


def init_state(game: GameStateTable, config: TrainerConfig, algo: str = "vrpo") -> TrainerState:
    config.validate()
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}")
    actors = [SoftmaxActor.uniform(game, p) for p in range(game.n_players)]
    profile = joint_profile(game, actors)
    S, A, n = game.rewards.shape
    if algo == "vrpo":
        critic = np.zeros((S, A, n))
    elif algo == "mappo":
        critic = np.zeros((S, n))
    else:
        critic = np.zeros(len(game.obs_keys))
    if config.critic_init == "oracle":
        if algo == "vrpo":
            critic = exact_values(game, profile, config.gamma).q
        elif algo == "mappo":
            critic = exact_values(game, profile, config.gamma).v
        else:
            critic = _obs_value_seed(game, profile)
    return TrainerState(
        game=game,
        config=config,
        algo=algo,
        actors=actors,
        critic=critic,
        actor_velocity=[np.zeros_like(a.logits) for a in actors],
        critic_velocity=np.zeros_like(critic),
        replay=ReplayBuffer(config.replay_ratio * config.batch_size, max(game.max_depth, 1)),
        ema_logits=[a.logits.copy() for a in actors],
        rng=np.random.default_rng(config.seed),
    )


def ippo_state_values(game: GameStateTable, critic: np.ndarray) -> np.ndarray:
    """Per-state value table (S, n) read through each player's observation."""
    return np.where(game.obs >= 0, critic[np.maximum(game.obs, 0)], 0.0)


def _advantages(state: TrainerState, mb: TrajectoryBatch) -> np.ndarray:
    game, cfg = state.game, state.config
    if state.algo == "vrpo":
        policy = game.state_policy(joint_profile(game, state.actors))
        return qboost_batch(game, mb, state.critic, policy, cfg.lam, cfg.gamma)[0]
    v = state.critic if state.algo == "mappo" else ippo_state_values(game, state.critic)
    return gae_batch(game, mb, v, cfg.lam, cfg.gamma)[0]


def _actor_phase(state: TrainerState, batch: TrajectoryBatch, ref_policy: np.ndarray,
                 sched: Schedule) -> tuple[list[tuple[int, np.ndarray]], int, int]:
    game, cfg = state.game, state.config
    if batch.iteration != state.iteration:
        raise RuntimeError("actor updates must use the current iteration's rollout")
    state.consumed.append(batch.iteration)
    used, n_clipped, n_records = [], 0, 0
    for _ in range(cfg.actor_epochs):
        perm = state.rng.permutation(len(batch))
        for block in np.split(perm, cfg.minibatches):
            mb = batch.subset(block)
            scale = 1.0 / len(mb)
            valid = mb.valid
            adv = None
            for i, actor in enumerate(state.actors):
                mask = valid & (game.player[mb.states] == i)
                if not mask.any():
                    continue
                if adv is None or state.algo == "vrpo":
                    # Q-boost coefficients track the current actors; GAE ones do not
                    adv = _advantages(state, mb)
                s, a = mb.states[mask], mb.actions[mask]
                rows = game.infoset_local[game.infoset[s]]
                a_hat = adv[..., i][mask]
                _, g_pg, clip = surrogate_loss(actor, rows, a, ref_policy[s, a], a_hat,
                                               sched.eps, scale)
                _, g_reg = kl_uniform(actor, rows, scale)
                optimizer_step(actor.logits, g_pg + sched.alpha * g_reg, sched.lr_actor,
                               state.actor_velocity[i], cfg.momentum)
                used.append((i, a_hat))
                n_clipped += int(round(clip * len(rows)))
                n_records += len(rows)
    return used, n_clipped, n_records


def _critic_targets(state: TrainerState, mb: TrajectoryBatch, policy: np.ndarray):
    game, cfg = state.game, state.config
    valid = mb.valid
    s, a = mb.states[valid], mb.actions[valid]
    if state.algo == "vrpo":
        targets = qboost_batch(game, mb, state.critic, policy, cfg.lam, cfg.gamma)[1]
        return (s, a), targets[valid]
    if state.algo == "mappo":
        targets = gae_batch(game, mb, state.critic, cfg.lam, cfg.gamma)[1]
        return s, targets[valid]
    v = ippo_state_values(game, state.critic)
    targets = gae_batch(game, mb, v, cfg.lam, cfg.gamma)[1][valid]
    return game.obs[s].ravel(), targets.ravel()


def _critic_phase(state: TrainerState, batch: TrajectoryBatch, sched: Schedule) -> None:
    game, cfg = state.game, state.config
    policy = game.state_policy(joint_profile(game, state.actors))
    size = len(batch) // cfg.minibatches
    for epoch in range(cfg.critic_epochs):
        k = min(len(state.replay), size * cfg.minibatches)
        draws = state.rng.choice(len(state.replay), size=k, replace=False)
        for m, block in enumerate(np.array_split(draws, cfg.minibatches)):
            if epoch == 0 and m == 0:
                mb = batch
            else:
                mb = state.replay.get(state.replay.ordered()[block])
            index, targets = _critic_targets(state, mb, policy)
            _, grad = critic_loss(state.critic, index, targets, 1.0 / len(mb))
            optimizer_step(state.critic, grad, sched.lr_critic, state.critic_velocity, cfg.momentum)


def train_iteration(state: TrainerState) -> IterationMetrics:
    """One full iteration of the configured algorithm."""
    game, cfg = state.game, state.config
    state.iteration += 1
    sched = schedules(state.iteration, cfg)
    ref_profile = joint_profile(game, state.actors)
    ref_policy = game.state_policy(ref_profile)
    batch = rollout_batch(game, ref_profile, state.rng, cfg.batch_size, cfg.workers,
                          iteration=state.iteration)

    used, n_clipped, n_records = _actor_phase(state, batch, ref_policy, sched)
    state.replay.add(batch)
    _critic_phase(state, batch, sched)
    for p, actor in enumerate(state.actors):
        state.ema_logits[p] = ema_update(state.ema_logits[p], actor.logits, cfg.ema_decay)

    valid = batch.valid
    agent = valid & (game.player[batch.states] >= 0)
    s = batch.states[agent]
    info = game.infoset[s]
    now = joint_profile(game, state.actors)[info]
    ref = ref_profile[info]
    legal = game.infoset_legal()[info]
    rewards = batch.rewards(game)[..., 0]
    disc = cfg.gamma ** np.arange(rewards.shape[1])
    adv = np.concatenate([a for _, a in used]) if used else np.zeros(0)
    by_player = []
    for i in range(game.n_players):
        own = [a for p, a in used if p == i]
        by_player.append(float(np.concatenate(own).std()) if own else 0.0)
    return IterationMetrics(
        iteration=state.iteration,
        adv_std=float(adv.std()) if len(adv) else 0.0,
        clip_fraction=n_clipped / n_records if n_records else 0.0,
        kl_ref=float(kl_divergence(now, ref).mean()) if len(s) else 0.0,
        kl_uniform=float(_kl_terms(now, legal)[0].mean()) if len(s) else 0.0,
        mean_return_p1=float((rewards * disc).sum(axis=1).mean()),
        mean_traj_len=float(batch.lengths.mean()),
        schedule=sched,
        adv_std_by_player=tuple(by_player),
    )


def vrpo_iteration(state: TrainerState) -> IterationMetrics:
    if state.algo != "vrpo":
        raise ValueError("state was initialised for a baseline")
    return train_iteration(state)


def baseline_iteration(variant: str, state: TrainerState) -> IterationMetrics:
    if variant not in ("mappo", "ippo") or state.algo != variant:
        raise ValueError(f"state is {state.algo!r}, asked for {variant!r}")
    return train_iteration(state)


def current_profile(state: TrainerState, ema: bool = False) -> np.ndarray:
    return joint_profile(state.game, state.actors, state.ema_logits if ema else None)


def evaluate(state: TrainerState, ema: bool = False):
    return exploitability(state.game, current_profile(state, ema))


# ---------------------------------------------------------------------------
# checkpoints


def save_checkpoint(state: TrainerState, path: str | Path) -> None:
    arrays = {
        "critic": state.critic,
        "critic_velocity": state.critic_velocity,
        "replay_states": state.replay.states,
        "replay_actions": state.replay.actions,
        "replay_lengths": state.replay.lengths,
        "replay_terminals": state.replay.terminals,
    }
    for p, actor in enumerate(state.actors):
        arrays[f"logits_{p}"] = actor.logits
        arrays[f"actor_velocity_{p}"] = state.actor_velocity[p]
        arrays[f"ema_logits_{p}"] = state.ema_logits[p]
    meta = {
        "version": CHECKPOINT_VERSION,
        "game": state.game.name,
        "algo": state.algo,
        "config": asdict(state.config),
        "iteration": state.iteration,
        "replay_head": state.replay.head,
        "replay_size": state.replay.size,
        "rng": state.rng.bit_generator.state,
        "consumed": state.consumed,
    }
    with open(path, "wb") as fh:
        np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path: str | Path, game: GameStateTable | None = None) -> TrainerState:
    with np.load(path) as data:
        meta = json.loads(str(data["meta"]))
        if meta["version"] != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta['version']}")
        game = game or load_game(meta["game"])
        known = {f.name for f in fields(TrainerConfig)}
        config = TrainerConfig(**{k: v for k, v in meta["config"].items() if k in known})
        state = init_state(game, TrainerConfig(**{**asdict(config), "critic_init": "zero"}),
                           meta["algo"])
        state.config = config
        state.critic = data["critic"].copy()
        state.critic_velocity = data["critic_velocity"].copy()
        for p, actor in enumerate(state.actors):
            actor.logits = data[f"logits_{p}"].copy()
            state.actor_velocity[p] = data[f"actor_velocity_{p}"].copy()
            state.ema_logits[p] = data[f"ema_logits_{p}"].copy()
        state.replay.states[:] = data["replay_states"]
        state.replay.actions[:] = data["replay_actions"]
        state.replay.lengths[:] = data["replay_lengths"]
        state.replay.terminals[:] = data["replay_terminals"]
    state.replay.head = meta["replay_head"]
    state.replay.size = meta["replay_size"]
    state.iteration = meta["iteration"]
    state.consumed = list(meta["consumed"])
    state.rng.bit_generator.state = meta["rng"]
    return state
