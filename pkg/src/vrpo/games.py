"""Enumerated extensive-form games with an explicit Nature player.

Every game is expanded eagerly into a :class:`GameStateTable`: a flat, indexed
tree where state 0 is the root, children always carry larger indices than
their parent, and every transition is deterministic.  Randomness (card deals,
dice) lives in Nature states with a fixed distribution over their actions.

Players are indexed from 0.  ``player[s]`` is ``NATURE`` (-1) for Nature
states and ``TERMINAL`` (-2) for terminal states.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

NATURE = -1
TERMINAL = -2

DEFAULT_MAX_STATES = 10**7


class SizeGuardExceeded(RuntimeError):
    """Raised when an enumeration would exceed its configured size limit."""


InfoKey = tuple[int, bytes]


@dataclass(eq=False)
class GameStateTable:
    name: str
    n_players: int
    gamma: float
    player: np.ndarray  # (S,)
    num_actions: np.ndarray  # (S,)
    children: np.ndarray  # (S, A), -1 where illegal
    rewards: np.ndarray  # (S, A, n)
    nature_probs: np.ndarray  # (S, A)
    depth: np.ndarray  # (S,)
    infoset: np.ndarray  # (S,), -1 for Nature and terminal states
    infoset_keys: list[InfoKey]
    infoset_player: np.ndarray  # (I,)
    infoset_num_actions: np.ndarray  # (I,)
    infoset_labels: list[tuple[str, ...]]
    obs: np.ndarray  # (S, n) observation id of player i at s, -1 at terminals
    obs_keys: list[InfoKey]
    zero_sum: bool = True
    # derived
    infoset_local: np.ndarray = field(init=False)
    player_infosets: list[np.ndarray] = field(init=False)
    levels: list[np.ndarray] = field(init=False)

    def __post_init__(self):
        self.infoset_local = np.zeros(self.n_infosets, dtype=np.int64)
        self.player_infosets = []
        for p in range(self.n_players):
            rows = np.flatnonzero(self.infoset_player == p)
            self.infoset_local[rows] = np.arange(len(rows))
            self.player_infosets.append(rows)
        order = np.argsort(self.depth, kind="stable")
        bounds = np.searchsorted(self.depth[order], np.arange(self.depth.max() + 2))
        self.levels = [order[bounds[d]:bounds[d + 1]] for d in range(self.depth.max() + 1)]
        for arr in (self.player, self.num_actions, self.children, self.rewards,
                    self.nature_probs, self.depth, self.infoset, self.obs):
            arr.setflags(write=False)

    @property
    def n_states(self) -> int:
        return len(self.player)

    @property
    def n_infosets(self) -> int:
        return len(self.infoset_keys)

    @property
    def max_actions(self) -> int:
        return self.children.shape[1]

    @property
    def max_depth(self) -> int:
        """Longest root-to-terminal path, counted in actions."""
        return int(self.depth.max())

    @property
    def terminal(self) -> np.ndarray:
        return self.player == TERMINAL

    @property
    def legal(self) -> np.ndarray:
        return np.arange(self.max_actions)[None, :] < self.num_actions[:, None]

    def infoset_legal(self) -> np.ndarray:
        return np.arange(self.max_actions)[None, :] < self.infoset_num_actions[:, None]

    def members(self, infoset: int) -> np.ndarray:
        return np.flatnonzero(self.infoset == infoset)

    def uniform_profile(self) -> np.ndarray:
        """Uniform behaviour over legal actions at every infoset, shape (I, A)."""
        legal = self.infoset_legal()
        return legal / legal.sum(axis=1, keepdims=True)

    def state_policy(self, profile: np.ndarray) -> np.ndarray:
        """Expand an infoset profile (I, A) into the joint policy per state (S, A).

        Nature rows carry the fixed chance distribution; terminal rows are zero.
        """
        out = self.nature_probs.copy()
        agent = self.infoset >= 0
        out[agent] = profile[self.infoset[agent]]
        return out

    def validate(self, tol: float = 1e-12) -> None:
        """Check the structural invariants; raises ``ValueError`` on violation."""
        nonterm = ~self.terminal
        legal = self.legal
        if np.any(self.children[nonterm][legal[nonterm]] < 0):
            raise ValueError("legal action without successor")
        if np.any(self.children[~legal] >= 0) or np.any(self.children[self.terminal] >= 0):
            raise ValueError("successor on illegal action")
        kids = self.children[legal & nonterm[:, None]]
        parents = np.repeat(np.arange(self.n_states), legal.sum(axis=1) * nonterm)
        if np.any(kids <= parents):
            raise ValueError("children must follow their parent in index order")
        if len(np.unique(kids)) != len(kids) or len(kids) != self.n_states - 1:
            raise ValueError("table is not a tree rooted at state 0")
        nat = self.player == NATURE
        if np.any(self.nature_probs < 0) or np.any(
                np.abs(self.nature_probs[nat].sum(axis=1) - 1.0) > tol):
            raise ValueError("Nature distribution is not a probability vector")
        if self.zero_sum and np.any(np.abs(self.rewards.sum(axis=2)) > tol):
            raise ValueError("reward vector does not sum to zero")
        agent = self.infoset >= 0
        if np.any(self.infoset_player[self.infoset[agent]] != self.player[agent]):
            raise ValueError("infoset owned by a different player")
        if np.any(self.infoset_num_actions[self.infoset[agent]] != self.num_actions[agent]):
            raise ValueError("infoset members disagree on legal actions")


# ---------------------------------------------------------------------------
# generic tree expansion


@dataclass
class Node:
    """What a ruleset reports about one history."""

    player: int  # NATURE, TERMINAL or agent index
    labels: tuple[str, ...] = ()
    probs: tuple[float, ...] = ()  # Nature only
    payoff: tuple[float, ...] = ()  # terminal only


class Rules:
    """Minimal ruleset protocol consumed by :func:`expand`."""

    name: str
    n_players: int
    gamma: float = 1.0

    def root(self):
        raise NotImplementedError

    def node(self, h) -> Node:
        raise NotImplementedError

    def child(self, h, action: int):
        raise NotImplementedError

    def observation(self, h, player: int) -> bytes:
        """Canonical private view of ``player`` at history ``h``."""
        raise NotImplementedError


def expand(rules: Rules, max_states: int = DEFAULT_MAX_STATES) -> GameStateTable:
    n = rules.n_players
    player, nacts, depth, kids, rew, nprob = [], [], [], [], [], []
    infoset, obs_ids = [], []
    info_index: dict[InfoKey, int] = {}
    info_labels: list[tuple[str, ...]] = []
    obs_index: dict[InfoKey, int] = {}

    def intern(table, key):
        idx = table.get(key)
        if idx is None:
            idx = table[key] = len(table)
        return idx

    stack = [(rules.root(), -1, -1, 0)]
    while stack:
        h, parent, pa, d = stack.pop()
        s = len(player)
        if s >= max_states:
            raise SizeGuardExceeded(f"{rules.name}: more than {max_states} states")
        if parent >= 0:
            kids[parent][pa] = s
        node = rules.node(h)
        player.append(node.player)
        depth.append(d)
        k = len(node.labels)
        nacts.append(k)
        kids.append([-1] * k)
        rew.append([[0.0] * n for _ in range(k)])
        nprob.append(list(node.probs) if node.player == NATURE else [0.0] * k)
        if node.player == TERMINAL:
            infoset.append(-1)
            obs_ids.append([-1] * n)
            continue
        obs_ids.append([intern(obs_index, (p, rules.observation(h, p))) for p in range(n)])
        if node.player >= 0:
            key = (node.player, rules.observation(h, node.player))
            if key not in info_index:
                info_index[key] = len(info_index)
                info_labels.append(node.labels)
            infoset.append(info_index[key])
        else:
            infoset.append(-1)
        # push in reverse so children are numbered in action order (preorder)
        for a in reversed(range(k)):
            child = rules.child(h, a)
            cnode_payoff = rules.node(child)
            if cnode_payoff.player == TERMINAL:
                rew[s][a] = list(cnode_payoff.payoff)
            stack.append((child, s, a, d + 1))

    A = max(max(nacts), 1)
    S = len(player)
    children = np.full((S, A), -1, dtype=np.int64)
    rewards = np.zeros((S, A, n))
    nature_probs = np.zeros((S, A))
    for s in range(S):
        k = nacts[s]
        children[s, :k] = kids[s]
        if k:
            rewards[s, :k] = rew[s]
            nature_probs[s, :k] = nprob[s]
    keys = list(info_index)
    game = GameStateTable(
        name=rules.name,
        n_players=n,
        gamma=rules.gamma,
        player=np.asarray(player, dtype=np.int64),
        num_actions=np.asarray(nacts, dtype=np.int64),
        children=children,
        rewards=rewards,
        nature_probs=nature_probs,
        depth=np.asarray(depth, dtype=np.int64),
        infoset=np.asarray(infoset, dtype=np.int64),
        infoset_keys=keys,
        infoset_player=np.asarray([k[0] for k in keys], dtype=np.int64),
        infoset_num_actions=np.asarray([len(lb) for lb in info_labels], dtype=np.int64),
        infoset_labels=info_labels,
        obs=np.asarray(obs_ids, dtype=np.int64).reshape(S, n),
        obs_keys=list(obs_index),
    )
    game.validate()
    return game


# ---------------------------------------------------------------------------
# built-in rulesets


class MatchingPennies(Rules):
    n_players = 2

    def __init__(self, imperfect: bool):
        self.imperfect = imperfect
        self.name = "matching_pennies_imperfect" if imperfect else "matching_pennies_perfect"

    def root(self):
        return ""

    def node(self, h):
        if len(h) < 2:
            return Node(len(h), ("h", "t"))
        win = 1.0 if h[0] == h[1] else -1.0
        return Node(TERMINAL, payoff=(win, -win))

    def child(self, h, a):
        return h + "ht"[a]

    def observation(self, h, p):
        if p == 0 or not self.imperfect:
            return h.encode()
        return h[1:].encode()


class KuhnPoker(Rules):
    """3-card Kuhn poker; ante 1, single bet of 1.  Actions: pass, bet."""

    name = "kuhn"
    n_players = 2
    CARDS = "JQK"

    def root(self):
        return ((), "")

    def node(self, h):
        cards, hist = h
        if len(cards) < 2:
            rest = [c for c in range(3) if c not in cards]
            return Node(NATURE, tuple(self.CARDS[c] for c in rest),
                        probs=(1.0 / len(rest),) * len(rest))
        if hist in ("pp", "bb", "pbb"):
            stake = 1.0 if hist == "pp" else 2.0
            win = stake if cards[0] > cards[1] else -stake
            return Node(TERMINAL, payoff=(win, -win))
        if hist == "bp":
            return Node(TERMINAL, payoff=(1.0, -1.0))
        if hist == "pbp":
            return Node(TERMINAL, payoff=(-1.0, 1.0))
        return Node(len(hist) % 2, ("p", "b"))

    def child(self, h, a):
        cards, hist = h
        if len(cards) < 2:
            rest = [c for c in range(3) if c not in cards]
            return (cards + (rest[a],), hist)
        return (cards, hist + "pb"[a])

    def observation(self, h, p):
        cards, hist = h
        own = self.CARDS[cards[p]] if len(cards) > p else "?"
        return f"{own}|{hist}".encode()


class LeducHoldem(Rules):
    """Leduc hold'em with a 6-card deck (J, Q, K in two suits).

    Ante 1, raise sizes 2 and 4, at most two raises per round, player 0 opens
    both rounds.  Folding is only legal when facing a bet.  Private and public
    cards keep their suit in the observation, so infosets separate suits.
    """

    name = "leduc"
    n_players = 2
    RANKS = "JQK"

    def root(self):
        # (cards dealt, betting history per round)
        return ((), ("",))

    @staticmethod
    def _round_state(hist: str, raise_size: int, contrib: list[int]):
        """Replay one round; returns (to_act, bets_facing, raises, finished, folded_by)."""
        to_act, raises, facing = 0, 0, False
        for ch in hist:
            if ch == "r":
                other = 1 - to_act
                contrib[to_act] = contrib[other] + raise_size
                raises += 1
                facing = True
            elif ch == "c":
                contrib[to_act] = contrib[1 - to_act]
                if facing or to_act == 1:
                    return to_act, False, raises, True, None
            elif ch == "f":
                return to_act, False, raises, True, to_act
            to_act = 1 - to_act
        return to_act, facing, raises, False, None

    def _replay(self, rounds):
        contrib = [1, 1]
        status = None
        for rnd, hist in enumerate(rounds):
            status = self._round_state(hist, 2 if rnd == 0 else 4, contrib)
            if status[4] is not None:
                break
        return contrib, status

    def node(self, h):
        cards, rounds = h
        if len(cards) < 2 or (len(rounds) == 2 and len(cards) < 3):
            rest = [c for c in range(6) if c not in cards]
            return Node(NATURE, tuple(self._card(c) for c in rest),
                        probs=(1.0 / len(rest),) * len(rest))
        contrib, (to_act, facing, raises, finished, folded) = self._replay(rounds)
        if folded is not None:
            loss = float(contrib[folded])
            pay = [loss, loss]
            pay[folded] = -loss
            return Node(TERMINAL, payoff=tuple(pay))
        if finished:
            # child() opens round two as soon as round one closes
            assert len(rounds) == 2
            s0, s1 = self._strength(cards[0], cards[2]), self._strength(cards[1], cards[2])
            win = float(contrib[0]) if s0 > s1 else -float(contrib[0]) if s0 < s1 else 0.0
            return Node(TERMINAL, payoff=(win, -win))
        if not facing:
            return Node(to_act, ("c", "r"))
        if raises < 2:
            return Node(to_act, ("f", "c", "r"))
        return Node(to_act, ("f", "c"))

    def _card(self, c):
        return self.RANKS[c // 2] + "sh"[c % 2]

    @staticmethod
    def _strength(private, public):
        return (1 if private // 2 == public // 2 else 0, private // 2)

    def child(self, h, a):
        cards, rounds = h
        node = self.node(h)
        if node.player == NATURE:
            rest = [c for c in range(6) if c not in cards]
            return (cards + (rest[a],), rounds)
        new = rounds[:-1] + (rounds[-1] + node.labels[a],)
        contrib, (_, _, _, finished, folded) = self._replay(new)
        if finished and folded is None and len(new) == 1:
            new = new + ("",)
        return (cards, new)

    def observation(self, h, p):
        cards, rounds = h
        own = self._card(cards[p]) if len(cards) > p else "??"
        pub = self._card(cards[2]) if len(cards) > 2 else "??"
        return f"{own}|{pub}|{'/'.join(rounds)}".encode()


class LiarsDice(Rules):
    """Two-player Liar's Dice; bids are ordered by (quantity, face).

    A bid must raise the quantity, or raise the face without lowering the
    quantity.  Calling liar reveals the dice: the bidder wins iff at least
    ``quantity`` dice show ``face``.  No face is wild.
    """

    n_players = 2

    def __init__(self, dice: int, faces: int):
        if dice < 1 or faces < 2:
            raise ValueError("need dice >= 1 and faces >= 2")
        self.dice, self.faces = dice, faces
        self.n_bids = 2 * dice * faces
        self.name = f"liars_dice:{dice}x{faces}"

    def root(self):
        return ((), ())

    def node(self, h):
        rolls, bids = h
        if len(rolls) < 2 * self.dice:
            return Node(NATURE, tuple(str(f + 1) for f in range(self.faces)),
                        probs=(1.0 / self.faces,) * self.faces)
        if bids and bids[-1] == self.n_bids:  # liar called
            claim = bids[-2]
            qty, face = claim // self.faces + 1, claim % self.faces
            bidder = (len(bids) - 2) % 2
            bidder_wins = sum(1 for r in rolls if r == face) >= qty
            winner = bidder if bidder_wins else 1 - bidder
            return Node(TERMINAL, payoff=(1.0, -1.0) if winner == 0 else (-1.0, 1.0))
        last = bids[-1] if bids else -1
        labels = tuple(f"{b // self.faces + 1}x{b % self.faces + 1}"
                       for b in range(last + 1, self.n_bids))
        if bids:
            labels += ("liar",)
        return Node(len(bids) % 2, labels)

    def child(self, h, a):
        rolls, bids = h
        if len(rolls) < 2 * self.dice:
            return (rolls + (a,), bids)
        last = bids[-1] if bids else -1
        nxt = last + 1 + a
        return (rolls, bids + (min(nxt, self.n_bids),))

    def observation(self, h, p):
        rolls, bids = h
        own = rolls[p * self.dice:(p + 1) * self.dice]
        return (bytes(own) + b"|" + bytes(bids)).hex().encode()


def liars_dice_state_count(dice: int, faces: int) -> int:
    """Closed-form number of states of :class:`LiarsDice` (no enumeration)."""
    rolls = 2 * dice
    nature = sum(faces**k for k in range(rolls))
    bids = 2 * dice * faces
    per_deal = 2**bids + (2**bids - 1)  # bidding histories + liar calls
    return nature + faces**rolls * per_deal


def build_matching_pennies(imperfect: bool = True) -> GameStateTable:
    return expand(MatchingPennies(imperfect))


def build_kuhn_poker() -> GameStateTable:
    return expand(KuhnPoker())


def build_leduc_holdem() -> GameStateTable:
    return expand(LeducHoldem())


def build_liars_dice(dice_per_player: int = 1, faces: int = 3,
                     max_states: int = DEFAULT_MAX_STATES) -> GameStateTable:
    expected = liars_dice_state_count(dice_per_player, faces)
    if expected > max_states:
        raise SizeGuardExceeded(
            f"liars_dice:{dice_per_player}x{faces} has {expected} states (limit {max_states})")
    return expand(LiarsDice(dice_per_player, faces), max_states=max_states)


_BUILDERS: dict[str, Callable[[], GameStateTable]] = {
    "matching_pennies_imperfect": lambda: build_matching_pennies(True),
    "matching_pennies_perfect": lambda: build_matching_pennies(False),
    "kuhn": build_kuhn_poker,
    "leduc": build_leduc_holdem,
}
_CACHE: dict[str, GameStateTable] = {}


def game_names() -> list[str]:
    return [*_BUILDERS, "liars_dice:<dice>x<faces>"]


def load_game(name: str) -> GameStateTable:
    """Build (or fetch from cache) a game by its registry name."""
    if name in _CACHE:
        return _CACHE[name]
    if name in _BUILDERS:
        game = _BUILDERS[name]()
    elif name.startswith("liars_dice:"):
        try:
            dice, faces = (int(x) for x in name.split(":", 1)[1].split("x"))
        except ValueError:
            raise KeyError(name) from None
        game = build_liars_dice(dice, faces)
    else:
        raise KeyError(name)
    _CACHE[name] = game
    return game


# ---------------------------------------------------------------------------
# enumeration


@dataclass
class Enumeration:
    n_states: int
    infosets_per_player: tuple[int, ...]
    index: dict[InfoKey, list[int]]

    @property
    def n_infosets(self) -> int:
        return sum(self.infosets_per_player)


def enumerate_game(game: GameStateTable) -> Enumeration:
    index: dict[InfoKey, list[int]] = {k: [] for k in game.infoset_keys}
    for s in np.flatnonzero(game.infoset >= 0):
        index[game.infoset_keys[game.infoset[s]]].append(int(s))
    per_player = tuple(int(np.sum(game.infoset_player == p)) for p in range(game.n_players))
    return Enumeration(game.n_states, per_player, index)


# ---------------------------------------------------------------------------
# trajectories


@dataclass
class Trajectory:
    """One played game: ``states[t]`` acted on with ``actions[t]``.

    ``rewards[t]`` is the per-player reward of step t.  The path ends in
    ``terminal``; anything past it is an absorbing zero-reward state.
    """

    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    terminal: int

    @property
    def horizon(self) -> int:
        return len(self.states)

    def next_states(self) -> np.ndarray:
        return np.append(self.states[1:], self.terminal)

    def steps(self, game: GameStateTable):
        for s, a, r in zip(self.states, self.actions, self.rewards):
            yield int(s), int(game.player[s]), int(a), r

    def returns(self, gamma: float = 1.0) -> np.ndarray:
        disc = gamma ** np.arange(self.horizon)
        return (disc[:, None] * self.rewards).sum(axis=0)


def make_trajectory(game: GameStateTable, states: Sequence[int], actions: Sequence[int]) -> Trajectory:
    states = np.asarray(states, dtype=np.int64)
    actions = np.asarray(actions, dtype=np.int64)
    nxt = game.children[states, actions]
    if np.any(nxt < 0) or np.any(nxt[:-1] != states[1:]):
        raise ValueError("steps are inconsistent with the transition table")
    if not game.terminal[nxt[-1]]:
        raise ValueError("trajectory does not end in a terminal state")
    return Trajectory(states, actions, game.rewards[states, actions], int(nxt[-1]))


@dataclass
class TrajectoryBatch:
    """Padded batch of trajectories; padding has ``valid == False``.

    ``iteration`` records the training iteration that produced the batch.
    """

    states: np.ndarray  # (B, H)
    actions: np.ndarray  # (B, H)
    lengths: np.ndarray  # (B,)
    terminals: np.ndarray  # (B,)
    iteration: int = -1

    def __len__(self) -> int:
        return len(self.lengths)

    @property
    def valid(self) -> np.ndarray:
        return np.arange(self.states.shape[1])[None, :] < self.lengths[:, None]

    def subset(self, idx) -> TrajectoryBatch:
        return TrajectoryBatch(self.states[idx], self.actions[idx], self.lengths[idx],
                               self.terminals[idx], self.iteration)

    def trajectory(self, game: GameStateTable, b: int) -> Trajectory:
        n = self.lengths[b]
        return make_trajectory(game, self.states[b, :n], self.actions[b, :n])

    def rewards(self, game: GameStateTable) -> np.ndarray:
        r = game.rewards[self.states, self.actions]
        r[~self.valid] = 0.0
        return r

    def next_states(self, game: GameStateTable) -> np.ndarray:
        """Successor of each step; padding maps to the final terminal state."""
        nxt = game.children[self.states, self.actions]
        return np.where(self.valid, nxt, self.terminals[:, None])

    @staticmethod
    def concat(batches: Sequence[TrajectoryBatch]) -> TrajectoryBatch:
        return TrajectoryBatch(
            np.concatenate([b.states for b in batches]),
            np.concatenate([b.actions for b in batches]),
            np.concatenate([b.lengths for b in batches]),
            np.concatenate([b.terminals for b in batches]),
            batches[0].iteration,
        )


def _sample_paths(game: GameStateTable, policy: np.ndarray, uniforms: np.ndarray) -> TrajectoryBatch:
    B, H = uniforms.shape
    states = np.zeros((B, H), dtype=np.int64)
    actions = np.zeros((B, H), dtype=np.int64)
    lengths = np.zeros(B, dtype=np.int64)
    cur = np.zeros(B, dtype=np.int64)
    cdf = np.cumsum(policy, axis=1)
    for t in range(H):
        live = np.flatnonzero(~game.terminal[cur])
        if len(live) == 0:
            break
        s = cur[live]
        a = (uniforms[live, t, None] >= cdf[s]).sum(axis=1)
        a = np.minimum(a, game.num_actions[s] - 1)
        states[live, t] = s
        actions[live, t] = a
        lengths[live] += 1
        cur[live] = game.children[s, a]
    return TrajectoryBatch(states, actions, lengths, cur)


def rollout_batch(game: GameStateTable, profile: np.ndarray, rng: np.random.Generator,
                  size: int, workers: int = 1, iteration: int = -1) -> TrajectoryBatch:
    """Sample ``size`` trajectories under an infoset profile (I, A).

    All randomness is drawn up front as one (size, H) block of uniforms, one
    row per trajectory, so splitting the rows over ``workers`` threads gives
    the same batch as a single worker.
    """
    policy = game.state_policy(profile)
    uniforms = rng.random((size, max(game.max_depth, 1)))
    if workers <= 1 or size < 2:
        batch = _sample_paths(game, policy, uniforms)
    else:
        chunks = np.array_split(np.arange(size), workers)
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(lambda c: _sample_paths(game, policy, uniforms[c]), chunks))
        batch = TrajectoryBatch.concat(parts)
    batch.iteration = iteration
    return batch


def rollout(game: GameStateTable, profile: np.ndarray, rng: np.random.Generator) -> Trajectory:
    return rollout_batch(game, profile, rng, 1).trajectory(game, 0)


def enumerate_paths(game: GameStateTable, policy: np.ndarray, start: int = 0,
                    first_action: int | None = None, max_paths: int = 10**6):
    """All continuations from ``start`` with their probabilities.

    ``policy`` is a joint per-state policy (S, A).  If ``first_action`` is
    given the first step is fixed and contributes probability 1.  Yields
    ``(prob, Trajectory)``; zero-probability continuations are skipped.
    """
    first = [first_action] if first_action is not None else range(game.num_actions[start])
    out = []
    stack = [([start], [a], 1.0 if first_action is not None else policy[start, a])
             for a in reversed(list(first))]
    while stack:
        states, actions, prob = stack.pop()
        if prob == 0.0:
            continue
        nxt = game.children[states[-1], actions[-1]]
        if game.terminal[nxt]:
            if len(out) >= max_paths:
                raise SizeGuardExceeded(f"more than {max_paths} paths")
            st, ac = np.asarray(states), np.asarray(actions)
            out.append((prob, Trajectory(st, ac, game.rewards[st, ac], int(nxt))))
            continue
        for a in reversed(range(game.num_actions[nxt])):
            stack.append((states + [nxt], actions + [a], prob * policy[nxt, a]))
    return out


def pure_strategies(game: GameStateTable, player: int):
    """Every deterministic strategy of ``player`` as a dict infoset -> action."""
    rows = game.player_infosets[player]
    for choice in itertools.product(*(range(game.infoset_num_actions[i]) for i in rows)):
        yield dict(zip(rows.tolist(), choice))
