"""R_MAX meta-agent over integer-coded discrete states and actions.

States are arbitrary non-negative integers and only the ones actually observed
are stored, so the same model serves tiny test MDPs and the very large Case I
meta-state spaces alike.
"""

from __future__ import annotations

import csv
import math
from collections import defaultdict
from pathlib import Path

import numpy as np
from scipy import sparse

from .games import ContractError
from .learners import GREEDY, ActionRule, sample_action

R_MAX = 1.0


def vi_sweep_count(epsilon: float, gamma: float) -> int:
    """ceil(ln(1/(eps(1-gamma))) / (1-gamma)), floored at one sweep."""
    return max(1, math.ceil(math.log(1.0 / (epsilon * (1.0 - gamma))) / (1.0 - gamma)))


class RmaxModel:
    """Counts, reward sums and optimistic Q-values of an R_MAX learner.

    With ``optimistic_init`` (the default) every Q-value starts at V_max and
    unknown pairs stay there. ``optimistic_init=False`` starts from zero instead.
    """

    def __init__(self, n_actions: int, m: int, gamma: float, epsilon: float = 0.1, optimistic_init: bool = True):
        if n_actions < 1:
            raise ContractError("n_actions must be positive")
        if m < 1:
            raise ContractError("m must be a positive integer")
        if not 0.0 <= gamma < 1.0:
            raise ContractError("gamma must lie in [0, 1)")
        v_max = R_MAX / (1.0 - gamma)
        if not 0.0 < epsilon < v_max:
            raise ContractError("epsilon must lie in (0, 1/(1-gamma))")
        self.n_actions = n_actions
        self.m = m
        self.gamma = gamma
        self.epsilon = epsilon
        self.v_max = v_max
        self.optimistic_init = optimistic_init
        self.q_init = v_max if optimistic_init else 0.0
        self.sweeps = vi_sweep_count(epsilon, gamma)

        self.n_sa: dict[tuple[int, int], int] = defaultdict(int)
        self.n_sas: dict[tuple[int, int], dict[int, int]] = defaultdict(lambda: defaultdict(int))
        self.r_sum: dict[tuple[int, int], float] = defaultdict(float)
        self.known: set[tuple[int, int]] = set()
        self._q: dict[int, np.ndarray] = {}
        self.vi_calls = 0
        self.sweep_log: list[int] = []  # sweeps run by each VI call

    def q_values(self, s: int) -> np.ndarray:
        q = self._q.get(s)
        if q is None:
            return np.full(self.n_actions, self.q_init)
        return q

    def q(self, s: int, a: int) -> float:
        return float(self.q_values(s)[a])

    def set_q(self, s: int, a: int, value: float) -> None:
        if s not in self._q:
            self._q[s] = np.full(self.n_actions, self.q_init)
        self._q[s][a] = value

    def is_known(self, s: int, a: int) -> bool:
        return (s, a) in self.known

    @property
    def n_known(self) -> int:
        return len(self.known)

    def choose_action(self, s: int, rule: ActionRule = GREEDY, rng: np.random.Generator | int | None = None) -> int:
        if s < 0:
            raise ContractError("state codes are non-negative")
        if rule.variant == "greedy":
            return int(np.argmax(self.q_values(s)))
        if not isinstance(rng, np.random.Generator):
            rng = np.random.default_rng(rng)
        return sample_action(self.q_values(s), rule, rng)

    def greedy_policy(self, states) -> np.ndarray:
        return np.array([int(np.argmax(self.q_values(s))) for s in states], dtype=int)

    def record(self, s: int, a: int, r: float, s_next: int) -> bool:
        """Add one transition; returns True when it made (s, a) known and VI ran."""
        if not 0.0 <= r <= R_MAX:
            raise ContractError(f"reward {r} outside [0, {R_MAX}]")
        if not 0 <= a < self.n_actions:
            raise ContractError(f"action {a} out of range")
        key = (s, a)
        if self.n_sa[key] >= self.m:
            return False
        self.r_sum[key] += r
        self.n_sa[key] += 1
        self.n_sas[key][s_next] += 1
        if self.n_sa[key] == self.m:
            self.known.add(key)
            self.value_iteration()
            return True
        return False

    def empirical_model(self, s: int, a: int) -> tuple[float, dict[int, float]]:
        """(R_hat, T_hat) of the empirical m-known MDP at (s, a)."""
        key = (s, a)
        if key not in self.known:
            return R_MAX, {s: 1.0}
        n = self.n_sa[key]
        return self.r_sum[key] / n, {sp: c / n for sp, c in self.n_sas[key].items()}

    def value_iteration(self, sweeps: int | None = None) -> None:
        """Synchronous Bellman sweeps over the known pairs; unknown pairs are left alone."""
        self.vi_calls += 1
        sweeps = self.sweeps if sweeps is None else sweeps
        pairs = sorted(self.known)
        if not pairs:
            self.sweep_log.append(0)
            return
        states = sorted({s for s, _ in pairs} | {sp for p in pairs for sp in self.n_sas[p]})
        index = {s: i for i, s in enumerate(states)}
        q = np.stack([self.q_values(s) for s in states]).astype(float)

        rows, cols, vals = [], [], []
        reward = np.empty(len(pairs))
        for k, p in enumerate(pairs):
            n = self.n_sa[p]
            reward[k] = self.r_sum[p] / n
            for sp, c in self.n_sas[p].items():
                rows.append(k)
                cols.append(index[sp])
                vals.append(c / n)
        trans = sparse.csr_matrix((vals, (rows, cols)), shape=(len(pairs), len(states)))
        ps = np.array([index[s] for s, _ in pairs])
        pa = np.array([a for _, a in pairs])
        for _ in range(sweeps):
            q[ps, pa] = reward + self.gamma * (trans @ q.max(axis=1))
        self.sweep_log.append(sweeps)
        for s, i in index.items():
            self._q[s] = q[i]

    def bellman_residual(self) -> float:
        """max over known pairs of |Q - (R_hat + gamma T_hat max Q)|."""
        worst = 0.0
        for s, a in self.known:
            r, t = self.empirical_model(s, a)
            target = r + self.gamma * sum(p * float(self.q_values(sp).max()) for sp, p in t.items())
            worst = max(worst, abs(self.q(s, a) - target))
        return worst

    # checkpointing -------------------------------------------------------

    def save(self, path: str | Path) -> None:
        """Flat CSV dump: one ``pair`` row per visited (s, a), one ``trans`` row per (s, a, s')."""
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["kind", "s", "a", "s_next", "count", "r_sum", "q"])
            w.writerow(["meta", self.n_actions, self.m, repr(self.gamma), repr(self.epsilon), int(self.optimistic_init), ""])
            for s in sorted(self._q):
                for a in range(self.n_actions):
                    key = (s, a)
                    w.writerow(["pair", s, a, "", self.n_sa.get(key, 0), repr(self.r_sum.get(key, 0.0)), repr(float(self._q[s][a]))])
            for (s, a) in sorted(self.n_sa):
                if (s not in self._q):
                    w.writerow(["pair", s, a, "", self.n_sa[(s, a)], repr(self.r_sum[(s, a)]), repr(self.q_init)])
                for sp, c in sorted(self.n_sas[(s, a)].items()):
                    w.writerow(["trans", s, a, sp, c, "", ""])

    @classmethod
    def load(cls, path: str | Path) -> "RmaxModel":
        with Path(path).open(newline="") as fh:
            rows = list(csv.reader(fh))
        meta = rows[1]
        model = cls(int(meta[1]), int(meta[2]), float(meta[3]), float(meta[4]), bool(int(meta[5])))
        for kind, s, a, sp, count, r_sum, q in rows[2:]:
            s, a, count = int(s), int(a), int(count)
            if kind == "pair":
                model.set_q(s, a, float(q))
                if count:
                    model.n_sa[(s, a)] = count
                    model.r_sum[(s, a)] = float(r_sum)
                    if count >= model.m:
                        model.known.add((s, a))
            elif kind == "trans":
                model.n_sas[(s, a)][int(sp)] = count
        return model
