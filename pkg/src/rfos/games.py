"""Inner matrix games, rollouts and reward normalization."""

from __future__ import annotations

import itertools
from functools import cached_property
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

HEADS, TAILS = 0, 1

JointAction = tuple[int, ...]
# A policy maps (state, rng) to an action index.
InnerPolicy = Callable[[int, np.random.Generator], int]


class ContractError(ValueError):
    """Raised when an argument violates an operation's preconditions."""


@dataclass(frozen=True)
class MatrixGame:
    """A small stochastic game stored as lookup tables.

    ``payoff`` has shape ``(n_states, A_1, ..., A_n, n_players)`` and holds raw
    rewards. ``transitions`` has shape ``(n_states, A_1, ..., A_n)`` and gives the
    deterministic next state; ``None`` means every state is absorbing.
    """

    payoff: np.ndarray
    h_inner: int = 1
    transitions: np.ndarray | None = None
    name: str = "custom"

    def __post_init__(self):
        payoff = np.asarray(self.payoff, dtype=float)
        if payoff.ndim < 3:
            raise ContractError("payoff needs shape (n_states, A_1, ..., A_n, n_players)")
        if payoff.shape[-1] != payoff.ndim - 2:
            raise ContractError("last payoff axis must have one entry per player")
        if not np.all(np.isfinite(payoff)):
            raise ContractError("payoff must be finite everywhere")
        if self.h_inner < 1:
            raise ContractError("h_inner must be positive")
        object.__setattr__(self, "payoff", payoff)
        if self.transitions is not None:
            trans = np.asarray(self.transitions, dtype=int)
            if trans.shape != payoff.shape[:-1]:
                raise ContractError("transitions shape must match payoff without the player axis")
            if trans.min() < 0 or trans.max() >= payoff.shape[0]:
                raise ContractError("transition target out of range")
            object.__setattr__(self, "transitions", trans)

    @cached_property
    def n_players(self) -> int:
        return self.payoff.shape[-1]

    @cached_property
    def n_states(self) -> int:
        return self.payoff.shape[0]

    @cached_property
    def actions_per_player(self) -> tuple[int, ...]:
        return tuple(self.payoff.shape[1:-1])

    @cached_property
    def n_joint_actions(self) -> int:
        return int(np.prod(self.actions_per_player))

    @cached_property
    def reward_range(self) -> tuple[float, float]:
        return float(self.payoff.min()), float(self.payoff.max())

    def joint_actions(self):
        return itertools.product(*(range(k) for k in self.actions_per_player))

    def encode_joint(self, a: Sequence[int]) -> int:
        code = 0
        for ai, k in zip(a, self.actions_per_player):
            if not 0 <= ai < k:
                raise ContractError(f"action {ai} out of range [0, {k})")
            code = code * k + int(ai)
        return code

    def decode_joint(self, code: int) -> JointAction:
        return tuple(int(x) for x in np.unravel_index(code, self.actions_per_player))


def matching_pennies(h_inner: int = 1) -> MatrixGame:
    """Matching Pennies: player 0 wins on a match, player 1 on a mismatch."""
    payoff = np.array(
        [
            [[+1.0, -1.0], [-1.0, +1.0]],
            [[-1.0, +1.0], [+1.0, -1.0]],
        ]
    )[None]
    return MatrixGame(payoff=payoff, h_inner=h_inner, name="matching_pennies")


PRESETS: dict[str, Callable[..., MatrixGame]] = {
    "matching_pennies": matching_pennies,
}


def make_game(preset: str, h_inner: int = 1) -> MatrixGame:
    try:
        return PRESETS[preset](h_inner=h_inner)
    except KeyError:
        raise ContractError(f"unknown game preset {preset!r}; known: {sorted(PRESETS)}") from None


def random_game(rng: np.random.Generator, n_players=2, n_actions=2, n_states=1, h_inner=1) -> MatrixGame:
    shape = (n_states,) + (n_actions,) * n_players
    payoff = rng.uniform(-1.0, 1.0, size=shape + (n_players,))
    transitions = rng.integers(0, n_states, size=shape) if n_states > 1 else None
    return MatrixGame(payoff=payoff, h_inner=h_inner, transitions=transitions, name="random")


def step(game: MatrixGame, state: int, a: Sequence[int]) -> tuple[np.ndarray, int]:
    """Return the raw rewards and next state for joint action ``a`` in ``state``."""
    if not 0 <= state < game.n_states:
        raise ContractError(f"state {state} out of range [0, {game.n_states})")
    if len(a) != game.n_players:
        raise ContractError(f"joint action needs {game.n_players} entries, got {len(a)}")
    for i, (ai, k) in enumerate(zip(a, game.actions_per_player)):
        if not 0 <= ai < k:
            raise ContractError(f"action {ai} of player {i} out of range [0, {k})")
    idx = (state,) + tuple(a)
    rewards = game.payoff[idx].copy()
    next_state = state if game.transitions is None else int(game.transitions[idx])
    return rewards, next_state


def normalize_reward(r_raw: float, r_min: float, r_max_raw: float, h_inner: int) -> float:
    """Affinely map a raw reward from [r_min, r_max_raw] onto [0, 1/h_inner]."""
    if not r_max_raw > r_min:
        raise ContractError("degenerate reward range: r_min must be below r_max_raw")
    if h_inner < 1:
        raise ContractError("h_inner must be positive")
    if not r_min <= r_raw <= r_max_raw:
        raise ContractError(f"raw reward {r_raw} outside [{r_min}, {r_max_raw}]")
    return (r_raw - r_min) / (r_max_raw - r_min) / h_inner


@dataclass
class InnerTrajectory:
    steps: list[tuple[int, JointAction]] = field(default_factory=list)
    next_states: list[int] = field(default_factory=list)
    step_rewards: list[np.ndarray] = field(default_factory=list)
    raw_returns: np.ndarray | None = None
    norm_returns: np.ndarray | None = None

    def __len__(self):
        return len(self.steps)


def rollout(
    game: MatrixGame,
    policies: Sequence[InnerPolicy],
    rng: np.random.Generator | int | None = None,
    h_inner: int | None = None,
    start_state: int = 0,
) -> InnerTrajectory:
    """Play one inner episode of ``h_inner`` steps with undiscounted returns."""
    if len(policies) != game.n_players:
        raise ContractError(f"need one policy per player ({game.n_players}), got {len(policies)}")
    h = game.h_inner if h_inner is None else h_inner
    if h < 1:
        raise ContractError("h_inner must be positive")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    lo, hi = game.reward_range
    if hi == lo:
        hi = lo + 1.0  # constant-payoff games normalize everything to 0
    traj = InnerTrajectory(raw_returns=np.zeros(game.n_players), norm_returns=np.zeros(game.n_players))
    s = start_state
    for _ in range(h):
        a = tuple(int(pi(s, rng)) for pi in policies)
        r, s_next = step(game, s, a)
        traj.steps.append((s, a))
        traj.next_states.append(s_next)
        traj.step_rewards.append(r)
        traj.raw_returns += r
        traj.norm_returns += (r - lo) / (hi - lo) / h
        s = s_next
    return traj
