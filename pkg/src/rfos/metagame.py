"""The meta-MDP built on top of an inner game.

Player 0 is the shaper controlled by the meta-agent; every other player is a
naive Q-learning opponent. Three meta-state representations are supported:

* ``I``: the snapped Q-tables of all players,
* ``II``: a window of the last ``h`` inner (state, joint action) pairs,
* ``simplified_II``: a window of the last ``h`` joint actions, with the meta
  action being player 0's inner action itself.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .epsnet import EpsNet
from .games import ContractError, InnerTrajectory, MatrixGame, rollout
from .learners import GREEDY, ActionRule, QTable, select_action

CASES = ("I", "II", "simplified_II")
WINDOW_MODES = ("joint", "opponent_only")
BLANK = None


class WindowSpace:
    """Windows of length ``h`` over ``n_symbols`` symbols, BLANK-padded on the left.

    A window with ``k`` filled slots is coded as ``offset(k) + digits`` where
    ``offset(k) = sum_{j<k} n^j`` and ``digits`` is the base-n value of the filled
    symbols. The all-BLANK window is 0 and the codes are dense in [0, size).
    """

    def __init__(self, n_symbols: int, h: int):
        if n_symbols < 1 or h < 0:
            raise ContractError("need n_symbols >= 1 and h >= 0")
        self.n_symbols = n_symbols
        self.h = h
        self._offsets = [sum(n_symbols**j for j in range(k)) for k in range(h + 2)]

    @property
    def size(self) -> int:
        return self._offsets[self.h + 1]

    @property
    def n_full(self) -> int:
        return self.n_symbols**self.h

    def initial(self) -> tuple:
        return (BLANK,) * self.h

    def push(self, window: tuple, symbol: int) -> tuple:
        if self.h == 0:
            return ()
        return window[1:] + (symbol,)

    def is_full(self, window: tuple) -> bool:
        return BLANK not in window

    def is_full_code(self, code: int) -> bool:
        return code >= self._offsets[self.h]

    def encode(self, window: Sequence) -> int:
        window = tuple(window)
        if len(window) != self.h:
            raise ContractError(f"window must have length {self.h}")
        filled = [x for x in window if x is not BLANK]
        k = len(filled)
        if any(x is not BLANK for x in window[: self.h - k]):
            raise ContractError("BLANK may only appear as a prefix")
        code = 0
        for x in filled:
            if not 0 <= x < self.n_symbols:
                raise ContractError(f"symbol {x} out of range")
            code = code * self.n_symbols + int(x)
        return self._offsets[k] + code

    def decode(self, code: int) -> tuple:
        if not 0 <= code < self.size:
            raise ContractError(f"window code {code} out of range [0, {self.size})")
        k = max(j for j in range(self.h + 1) if self._offsets[j] <= code)
        rest = code - self._offsets[k]
        digits = []
        for _ in range(k):
            rest, d = divmod(rest, self.n_symbols)
            digits.append(d)
        return (BLANK,) * (self.h - k) + tuple(digits[::-1])


@dataclass
class MetaStepResult:
    reward: float
    reward_raw: float
    next_state: object
    trajectories: list[InnerTrajectory] = field(default_factory=list)


class MetaGame:
    """One shaper, naive opponents, and the meta-state they induce."""

    def __init__(
        self,
        game: MatrixGame,
        case: str = "simplified_II",
        h: int = 2,
        K: int = 1,
        lam: float = 0.5,
        window: str = "joint",
        opponent_lr: float = 0.1,
        opponent_init: float = 0.5,
        opponent_rule: ActionRule = GREEDY,
        inner_rule: ActionRule = GREEDY,
        shaper_init: float = 0.5,
    ):
        if case not in CASES:
            raise ContractError(f"unknown case {case!r}; expected one of {CASES}")
        if window not in WINDOW_MODES:
            raise ContractError(f"unknown window mode {window!r}")
        if K < 1:
            raise ContractError("K must be positive")
        if game.n_players < 2:
            raise ContractError("need at least one opponent")
        self.game = game
        self.case = case
        self.h = h
        self.K = K
        self.lam = lam
        self.window = window
        self.opponent_lr = opponent_lr
        self.opponent_init = opponent_init
        self.opponent_rule = opponent_rule
        self.inner_rule = inner_rule
        self.shaper_init = shaper_init
        self._lo, self._hi = game.reward_range
        if self._hi == self._lo:
            self._hi = self._lo + 1.0

        nS = game.n_states
        acts = game.actions_per_player
        if case == "I":
            self.state_net = EpsNet(dim=nS * sum(acts), lam=lam)
        elif case == "II":
            self.windows = WindowSpace(nS * game.n_joint_actions, h)
        else:
            n_sym = game.n_joint_actions if window == "joint" else int(np.prod(acts[1:]))
            self.windows = WindowSpace(n_sym, h)
        if case in ("I", "II"):
            self.action_net = EpsNet(dim=nS * acts[0], lam=lam)
        self.reset()

    # spaces ----------------------------------------------------------------

    @property
    def n_actions(self) -> int:
        """|A_d|: number of meta-actions."""
        if self.case == "simplified_II":
            return self.game.actions_per_player[0]
        return self.action_net.size

    @property
    def n_states(self) -> int:
        """Size of the meta-state code range."""
        if self.case == "I":
            return self.state_net.size
        return self.windows.size

    @property
    def n_steady_states(self) -> int:
        """|S_d| without BLANK-padded start-up windows (equals n_states for Case I)."""
        if self.case == "I":
            return self.state_net.size
        return self.windows.n_full

    def is_steady(self, code: int) -> bool:
        return self.case == "I" or self.windows.is_full_code(code)

    def encode(self, meta_state) -> int:
        if self.case == "I":
            return self.state_net.encode(meta_state)
        return self.windows.encode(meta_state)

    def decode(self, code: int):
        if self.case == "I":
            return tuple(self.state_net.decode(code).tolist())
        return self.windows.decode(code)

    def action_table(self, action: int) -> QTable:
        """Shaper Q-table addressed by a FullPolicy meta-action code."""
        if self.case == "simplified_II":
            raise ContractError("simplified_II meta-actions are inner actions, not Q-tables")
        if not 0 <= action < self.n_actions:
            raise ContractError(f"meta-action {action} out of range")
        values = self.action_net.point(self.action_net.decode(action))
        return QTable(self.game.n_states, self.game.actions_per_player[0], learning_rate=0.0, values=values.reshape(self.game.n_states, -1))

    # dynamics --------------------------------------------------------------

    def new_opponents(self) -> list[QTable]:
        g = self.game
        return [
            QTable(g.n_states, k, learning_rate=self.opponent_lr, init=self.opponent_init)
            for k in g.actions_per_player[1:]
        ]

    def reset(self, reset_opponents: bool = True) -> None:
        if reset_opponents or not hasattr(self, "opponents"):
            self.opponents = self.new_opponents()
        if self.case == "I":
            shaper = np.full(self.game.n_states * self.game.actions_per_player[0], self.shaper_init)
            self.state = self._snap_tables(shaper)
        else:
            self.state = self.windows.initial()

    def _snap_tables(self, shaper_flat: np.ndarray, opponents: list[QTable] | None = None) -> tuple:
        opponents = self.opponents if opponents is None else opponents
        x = np.concatenate([shaper_flat] + [q.flat() for q in opponents])
        idx, _ = self.state_net.snap(x)
        return tuple(idx.tolist())

    @property
    def state_code(self) -> int:
        return self.encode(self.state)

    def step(self, action: int, rng: np.random.Generator) -> MetaStepResult:
        res = meta_step(self, self.state, action, self.opponents, self.K, rng)
        self.state = res.next_state
        return res

    def _symbol(self, s: int, a: tuple) -> int:
        g = self.game
        if self.case == "II":
            return s * g.n_joint_actions + g.encode_joint(a)
        if self.window == "joint":
            return g.encode_joint(a)
        return int(np.ravel_multi_index(a[1:], g.actions_per_player[1:]))


def meta_step(
    meta: MetaGame,
    meta_state,
    meta_action: int,
    opponents: list[QTable],
    K: int,
    rng: np.random.Generator,
) -> MetaStepResult:
    """Play K inner episodes under ``meta_action`` and let the opponents learn.

    ``opponents`` are updated in place after all K rollouts. The reward is the
    shaper's normalized return averaged over the K episodes, so it lies in [0, 1].
    """
    g = meta.game
    if not 0 <= meta_action < meta.n_actions:
        raise ContractError(f"meta-action {meta_action} out of range [0, {meta.n_actions})")
    if len(opponents) != g.n_players - 1:
        raise ContractError("need one Q-table per opponent")

    if meta.case == "simplified_II":
        fixed = int(meta_action)

        def shaper(s, _rng):
            return fixed
    else:
        table = meta.action_table(meta_action)
        rule = meta.inner_rule

        def shaper(s, r):
            return select_action(table, s, rule, r)

    def opponent(j):
        q = opponents[j]
        rule = meta.opponent_rule
        return lambda s, r: select_action(q, s, rule, r)

    policies = [shaper] + [opponent(j) for j in range(len(opponents))]
    trajs = [rollout(g, policies, rng) for _ in range(K)]

    lo, hi = meta._lo, meta._hi
    for traj in trajs:
        last = len(traj) - 1
        for t, ((s, a), s_next, r) in enumerate(zip(traj.steps, traj.next_states, traj.step_rewards)):
            for j, q in enumerate(opponents):
                r_norm = (r[j + 1] - lo) / (hi - lo) / g.h_inner
                q.update(s, a[j + 1], r_norm, None if t == last else s_next)

    reward = sum(float(tr.norm_returns[0]) for tr in trajs) / K
    reward_raw = sum(float(tr.raw_returns[0]) for tr in trajs) / K

    if meta.case == "I":
        if meta_state is not None and len(meta_state) != meta.state_net.dim:
            raise ContractError("Case I meta-state has the wrong dimension")
        next_state = meta._snap_tables(meta.action_table(meta_action).flat(), opponents)
    else:
        next_state = tuple(meta_state)
        if len(next_state) != meta.h:
            raise ContractError(f"window meta-state must have length {meta.h}")
        for traj in trajs:
            for s, a in traj.steps:
                next_state = meta.windows.push(next_state, meta._symbol(s, a))
    return MetaStepResult(reward=reward, reward_raw=reward_raw, next_state=next_state, trajectories=trajs)
