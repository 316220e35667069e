"""Brute-force references used to check the learner and the bounds.

Nothing here imports the meta-game dynamics: the best-response search keeps its
own copy of the naive opponent so that it can serve as an independent check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .bounds import simulation_gap
from .epsnet import EpsNet
from .games import ContractError, MatrixGame
from .learners import GREEDY, ActionRule
from .rmax import RmaxModel

ROW_TOL = 1e-12


@dataclass
class ExplicitMdp:
    """Dense tabular MDP with rewards in [0, 1]."""

    T: np.ndarray  # (S, A, S)
    R: np.ndarray  # (S, A)
    gamma: float

    def __post_init__(self):
        self.T = np.asarray(self.T, dtype=float)
        self.R = np.asarray(self.R, dtype=float)
        if self.T.ndim != 3 or self.T.shape[0] != self.T.shape[2]:
            raise ContractError("T must have shape (S, A, S)")
        if self.R.shape != self.T.shape[:2]:
            raise ContractError("R must have shape (S, A)")
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError("gamma must lie in [0, 1)")
        if self.T.min() < 0 or np.abs(self.T.sum(axis=2) - 1.0).max() > ROW_TOL:
            raise ContractError("every T(.|s,a) must be a distribution")
        if self.R.min() < 0 or self.R.max() > 1:
            raise ContractError("rewards must lie in [0, 1]")

    @property
    def n_states(self) -> int:
        return self.T.shape[0]

    @property
    def n_actions(self) -> int:
        return self.T.shape[1]

    @property
    def v_max(self) -> float:
        return 1.0 / (1.0 - self.gamma)

    def sample(self, s: int, a: int, rng: np.random.Generator) -> int:
        if not hasattr(self, "_cdf"):
            self._cdf = np.cumsum(self.T, axis=2)
        return min(int(np.searchsorted(self._cdf[s, a], rng.random(), side="right")), self.n_states - 1)


def random_explicit_mdp(rng: np.random.Generator, n_states: int, n_actions: int, gamma: float = 0.8, concentration: float = 1.0) -> ExplicitMdp:
    T = rng.dirichlet(np.full(n_states, concentration), size=(n_states, n_actions))
    T /= T.sum(axis=2, keepdims=True)
    return ExplicitMdp(T, rng.uniform(0.0, 1.0, size=(n_states, n_actions)), gamma)


def perturb(mdp: ExplicitMdp, rng: np.random.Generator, scale: float) -> ExplicitMdp:
    """Random nearby MDP: rewards jittered, transitions mixed with random rows."""
    R = np.clip(mdp.R + rng.uniform(-scale, scale, size=mdp.R.shape), 0.0, 1.0)
    noise = rng.dirichlet(np.ones(mdp.n_states), size=mdp.T.shape[:2])
    mix = rng.uniform(0.0, scale)
    T = (1.0 - mix) * mdp.T + mix * noise
    T /= T.sum(axis=2, keepdims=True)
    return ExplicitMdp(T, R, mdp.gamma)


# exact solvers -----------------------------------------------------------------


def bellman_q(mdp: ExplicitMdp, V: np.ndarray) -> np.ndarray:
    return mdp.R + mdp.gamma * mdp.T @ V


def exact_vi(mdp: ExplicitMdp, tol: float = 1e-12, max_iter: int = 1_000_000) -> tuple[np.ndarray, np.ndarray]:
    """Value iteration until the Bellman residual is at most ``tol``.

    The returned V is then within tol * gamma / (1 - gamma) of V* in max-norm.
    """
    if not 0.0 <= mdp.gamma < 1.0:
        raise ContractError("gamma must lie in [0, 1)")
    if not tol > 0:
        raise ContractError("tol must be positive")
    V = np.zeros(mdp.n_states)
    for _ in range(max_iter):
        V_new = bellman_q(mdp, V).max(axis=1)
        done = np.abs(V_new - V).max() <= tol
        V = V_new
        if done:
            break
    else:
        raise RuntimeError("value iteration did not reach the tolerance")
    return V, bellman_q(mdp, V).argmax(axis=1)


def policy_value(mdp: ExplicitMdp, policy) -> np.ndarray:
    """Exact V^pi from the linear system (I - gamma P_pi) V = R_pi."""
    pi = np.asarray(policy, dtype=int)
    if pi.shape != (mdp.n_states,):
        raise ContractError("policy needs one action per state")
    idx = np.arange(mdp.n_states)
    P = mdp.T[idx, pi]
    return np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * P, mdp.R[idx, pi])


def run_rmax(
    mdp: ExplicitMdp,
    m: int,
    steps: int,
    rng: np.random.Generator,
    epsilon: float = 0.1,
    rule: ActionRule = GREEDY,
    start_state: int = 0,
) -> RmaxModel:
    """Drive an R_MAX learner through one long trajectory of ``mdp``."""
    model = RmaxModel(mdp.n_actions, m, mdp.gamma, epsilon)
    s = start_state
    for _ in range(steps):
        a = model.choose_action(s, rule, rng)
        s_next = mdp.sample(s, a, rng)
        model.record(s, a, float(mdp.R[s, a]), s_next)
        s = s_next
    return model


# continuous MDP and its discretisation -------------------------------------------


def _tri_mass(c: np.ndarray, w: float) -> np.ndarray:
    """Mass of the unit-area triangle of half-width w centred at c inside [0, 1]."""

    def cdf(x):
        z = np.clip((x - c) / w, -1.0, 1.0)
        return np.where(z < 0, 0.5 * (1 + z) ** 2, 1 - 0.5 * (1 - z) ** 2)

    return cdf(1.0) - cdf(0.0)


@dataclass
class SyntheticContinuousMdp:
    """States in [0, 1], a few actions, truncated triangular transition densities.

    Action a moves the density centre to ``clip(slope[a] * s + shift[a], 0, 1)``
    with half-width ``width``. Rewards are ``(1 + cos(2 pi freq[a] s + phase[a])) / 2``.
    Since at least half of each triangle lies inside [0, 1] when width <= 1/2,
    the density is Lipschitz in s' with constant at most 2 / width**2.
    """

    slope: np.ndarray
    shift: np.ndarray
    freq: np.ndarray
    phase: np.ndarray
    width: float = 0.25
    gamma: float = 0.8

    def __post_init__(self):
        self.slope, self.shift, self.freq, self.phase = (np.asarray(x, dtype=float) for x in (self.slope, self.shift, self.freq, self.phase))
        n = len(self.slope)
        if not 1 <= n <= 4 or any(len(x) != n for x in (self.shift, self.freq, self.phase)):
            raise ContractError("need between 1 and 4 actions with one parameter each")
        if not 0 < self.width <= 0.5:
            raise ContractError("width must lie in (0, 1/2]")
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError("gamma must lie in [0, 1)")

    @classmethod
    def random(cls, rng: np.random.Generator, n_actions: int = 2, width: float = 0.25, gamma: float = 0.8):
        return cls(
            slope=rng.uniform(-1.0, 1.0, n_actions),
            shift=rng.uniform(0.0, 1.0, n_actions),
            freq=rng.uniform(0.2, 1.0, n_actions),
            phase=rng.uniform(0.0, 2 * math.pi, n_actions),
            width=width,
            gamma=gamma,
        )

    @property
    def n_actions(self) -> int:
        return len(self.slope)

    @property
    def lipschitz_density(self) -> float:
        return 2.0 / self.width**2

    @property
    def lipschitz_reward(self) -> float:
        return float(math.pi * np.abs(self.freq).max())

    def centre(self, s, a: int):
        return np.clip(self.slope[a] * np.asarray(s, dtype=float) + self.shift[a], 0.0, 1.0)

    def density(self, s_next, s, a: int):
        """T(s'|s, a); broadcasts over ``s_next`` and ``s``."""
        s_next = np.asarray(s_next, dtype=float)
        c = self.centre(s, a)
        tri = np.maximum(0.0, 1.0 - np.abs(s_next - c) / self.width) / self.width
        return np.where((s_next >= 0) & (s_next <= 1), tri / _tri_mass(c, self.width), 0.0)

    def reward(self, s, a: int):
        return 0.5 * (1.0 + np.cos(2 * math.pi * self.freq[a] * np.asarray(s, dtype=float) + self.phase[a]))

    def check_density(self, n_points: int = 10_000, tol: float = 1e-6, n_states: int = 33) -> float:
        """Largest deviation of the midpoint-rule integral of T(.|s,a) from 1."""
        mids = (np.arange(n_points) + 0.5) / n_points
        worst = 0.0
        for a in range(self.n_actions):
            for s in np.linspace(0.0, 1.0, n_states):
                worst = max(worst, abs(float(self.density(mids, s, a).sum()) / n_points - 1.0))
        if worst > tol:
            raise ContractError(f"density integrates to 1 only within {worst:.3g} > {tol}")
        return worst


def grid(lam: float) -> np.ndarray:
    return EpsNet(1, lam).axis_points()


def discretise_explicit(mdp: SyntheticContinuousMdp, lam: float) -> ExplicitMdp:
    """Tabular MDP on the lam-grid of [0, 1] with normalized sampled densities."""
    if not 0 < lam <= 0.5:
        raise ContractError("lam must lie in (0, 1/2]")
    g = grid(lam)
    n = len(g)
    T = np.empty((n, mdp.n_actions, n))
    R = np.empty((n, mdp.n_actions))
    for a in range(mdp.n_actions):
        dens = mdp.density(g[None, :], g[:, None], a)  # rows: current grid point
        mass = lam * dens.sum(axis=1, keepdims=True)
        if np.any(mass <= 0):
            raise ContractError("a grid row has zero transition mass")
        T[:, a, :] = dens / mass * lam
        R[:, a] = mdp.reward(g, a)
    T /= T.sum(axis=2, keepdims=True)
    return ExplicitMdp(T, R, mdp.gamma)


@dataclass
class TransitionGapReport:
    lam: float
    alpha: float
    max_gap: float
    k_p: float


def transition_gap(mdp: SyntheticContinuousMdp, lam: float, n_probe: int = 257) -> TransitionGapReport:
    """Largest |T_d(snap s'|snap s, a)/lam - T(s'|s, a)| over a probe grid; K_p = gap / alpha."""
    net = EpsNet(1, lam)
    disc = discretise_explicit(mdp, lam)
    probe = np.linspace(0.0, 1.0, n_probe)
    idx = np.array([int(net.snap([x])[0][0]) for x in probe])
    worst = 0.0
    for a in range(mdp.n_actions):
        approx = disc.T[idx[:, None], a, idx[None, :]] / lam
        exact = mdp.density(probe[None, :], probe[:, None], a)
        worst = max(worst, float(np.abs(approx - exact).max()))
    return TransitionGapReport(lam, net.alpha, worst, worst / net.alpha)


# simulation lemma ----------------------------------------------------------------


@dataclass
class SimulationCheck:
    lhs: float
    rhs: float
    holds: bool
    eps_r: float
    eps_p: float


def check_simulation_lemma(M: ExplicitMdp, M_hat: ExplicitMdp, policy, p_scale: float = 1.0) -> SimulationCheck:
    """Compare ||V^pi_M - V^pi_M_hat||_inf with the simulation-lemma bound.

    eps_P is the largest L1 distance between transition rows. ``p_scale`` shrinks
    the eps_P term (0.5 gives the halved variant used in the adversarial search).
    """
    if M.T.shape != M_hat.T.shape or M.gamma != M_hat.gamma:
        raise ContractError("MDPs must share spaces and discount")
    lhs = float(np.abs(policy_value(M, policy) - policy_value(M_hat, policy)).max())
    eps_r = float(np.abs(M.R - M_hat.R).max())
    eps_p = float(np.abs(M.T - M_hat.T).sum(axis=2).max())
    rhs = simulation_gap(eps_r, p_scale * eps_p, M.gamma, M.v_max)
    # a relative slack absorbs the linear-solve rounding on exactly tight pairs
    return SimulationCheck(lhs, rhs, lhs <= rhs * (1 + 1e-9) + 1e-12, eps_r, eps_p)


def adversarial_pair(gamma: float) -> tuple[ExplicitMdp, ExplicitMdp]:
    """Two-state pair on which the halved eps_P bound fails for gamma < 1/2.

    State 0 pays 1 and state 1 pays 0. M always moves to state 0 and M_hat
    always to state 1, so eps_P = 2 and the value gap is gamma / (1 - gamma).
    """
    R = np.array([[1.0], [0.0]])
    T = np.zeros((2, 1, 2))
    T[:, 0, 0] = 1.0
    T_hat = np.zeros((2, 1, 2))
    T_hat[:, 0, 1] = 1.0
    return ExplicitMdp(T, R, gamma), ExplicitMdp(T_hat, R, gamma)


def search_halved_violation(rng: np.random.Generator, trials: int = 2000, n_states: int = 3, gamma: float = 0.3):
    """Random search over deterministic pairs for a violation of the halved bound."""
    for _ in range(trials):
        R = rng.integers(0, 2, size=(n_states, 1)).astype(float)
        T = np.eye(n_states)[rng.integers(0, n_states, size=(n_states, 1))]
        T_hat = np.eye(n_states)[rng.integers(0, n_states, size=(n_states, 1))]
        M, M_hat = ExplicitMdp(T, R, gamma), ExplicitMdp(T_hat, R, gamma)
        res = check_simulation_lemma(M, M_hat, np.zeros(n_states, dtype=int), p_scale=0.5)
        if not res.holds:
            return M, M_hat, res
    return None


# best response against a greedy naive learner --------------------------------------

MAX_WINDOWS = 100
DEFAULT_NODE_BUDGET = 2_000_000


@dataclass
class BestResponse:
    value: float
    policy: dict = field(default_factory=dict)
    nodes: int = 0


def _opponent_sim(game: MatrixGame, lr: float, init: float):
    lo, hi = float(game.payoff.min()), float(game.payoff.max())
    span = hi - lo if hi > lo else 1.0
    pay = game.payoff[0]
    n0, n1 = game.actions_per_player

    def play(q: tuple, a0: int):
        # greedy with lowest-index tie-break, then a one-step Q update (no bootstrap)
        o = max(range(n1), key=lambda j: (q[j], -j))
        r0 = (pay[a0, o, 0] - lo) / span
        r1 = (pay[a0, o, 1] - lo) / span
        new = (1.0 - lr) * q[o] + lr * r1
        q2 = q[:o] + (min(1.0, max(0.0, new)),) + q[o + 1 :]
        return o, float(r0), q2

    return play, (float(init),) * n1 if np.isscalar(init) else tuple(float(x) for x in init), n0, n1


def best_response_search(
    game: MatrixGame,
    h: int,
    horizon: int,
    opponent_lr: float = 0.1,
    opponent_init=0.5,
    opponent_rule: ActionRule = GREEDY,
    episode_length: int | None = None,
    window: str = "joint",
    node_budget: int = DEFAULT_NODE_BUDGET,
) -> BestResponse:
    """Best deterministic window -> action policy over ``horizon`` meta-steps.

    The opponent is a greedy Q-learner over a single inner state, so each policy
    yields one deterministic trajectory. Depth-first search assigns an action the
    first time a window is seen and prunes with the bound "win every remaining
    step". With ``episode_length`` the window and opponent are reset that often
    while the policy is kept.
    """
    if opponent_rule.variant != "greedy":
        raise ContractError("exhaustive search needs a deterministic (greedy) opponent")
    if game.n_players != 2 or game.n_states != 1 or game.h_inner != 1:
        raise ContractError("best response search supports two-player one-shot single-state games")
    if horizon < 1 or h < 0:
        raise ContractError("need horizon >= 1 and h >= 0")
    play, q0, n0, n1 = _opponent_sim(game, opponent_lr, opponent_init)
    n_sym = n0 * n1 if window == "joint" else n1
    n_windows = sum(n_sym**k for k in range(h + 1))
    if n_windows > MAX_WINDOWS:
        raise ContractError(
            f"problem too large: {n_windows} windows, {n0}^{n_windows} policies (limit {MAX_WINDOWS} windows)"
        )
    ep_len = episode_length or horizon
    start = (None,) * h

    best = BestResponse(value=-1.0)
    policy: dict = {}
    nodes = 0

    def dfs(t: int, w: tuple, q: tuple, total: float):
        nonlocal nodes
        nodes += 1
        if nodes > node_budget:
            raise ContractError(f"problem too large: node budget {node_budget} exhausted at depth {t}")
        if total + (horizon - t) <= best.value * horizon + 1e-12:
            return
        if t == horizon:
            best.value = total / horizon
            best.policy = dict(policy)
            return
        if t % ep_len == 0:
            w, q = start, q0
        if w in policy:
            actions = [policy[w]]
        else:
            # try the action with the best immediate payoff first
            actions = sorted(range(n0), key=lambda a: -play(q, a)[1])
        for a in actions:
            fresh = w not in policy
            if fresh:
                policy[w] = a
            o, r, q2 = play(q, a)
            sym = a * n1 + o if window == "joint" else o
            w2 = (w[1:] + (sym,)) if h else ()
            dfs(t + 1, w2, q2, total + r)
            if fresh:
                del policy[w]

    import sys

    limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(limit, horizon + 100))
    try:
        dfs(0, start, q0, 0.0)
    finally:
        sys.setrecursionlimit(limit)
    best.nodes = nodes
    return best


def best_response_return(game: MatrixGame, h: int, horizon: int, **kwargs) -> float:
    return best_response_search(game, h, horizon, **kwargs).value
