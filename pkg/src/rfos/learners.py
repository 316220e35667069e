"""Naive tabular Q-learning opponents and inner action-selection rules."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .games import ContractError


@dataclass(frozen=True)
class ActionRule:
    """``greedy`` (lowest-index tie-break) or ``boltzmann`` with a temperature."""

    variant: str = "greedy"
    temperature: float = 1.0

    def __post_init__(self):
        if self.variant not in ("greedy", "boltzmann"):
            raise ContractError(f"unknown action rule {self.variant!r}")
        if not self.temperature > 0:
            raise ContractError("temperature must be positive")

    @classmethod
    def parse(cls, text: str, temperature: float = 1.0) -> "ActionRule":
        # accepts "greedy", "boltzmann" or "boltzmann:0.1"
        name, _, temp = text.strip().partition(":")
        return cls(name.strip(), float(temp) if temp else temperature)


GREEDY = ActionRule("greedy")


def greedy_index(values: np.ndarray) -> int:
    # np.argmax returns the first maximum, which is the lowest-index tie-break
    return int(np.argmax(values))


def boltzmann_probs(values: np.ndarray, temperature: float) -> np.ndarray:
    z = (np.asarray(values, dtype=float) - np.max(values)) / temperature
    p = np.exp(z)
    return p / p.sum()


def sample_action(values: np.ndarray, rule: ActionRule, rng: np.random.Generator) -> int:
    if rule.variant == "greedy":
        return greedy_index(values)
    # inverse-CDF draw with one uniform per call; plain floats are much faster
    # than numpy for the handful of actions involved
    vals = [float(v) for v in values]
    top = max(vals)
    w = [math.exp((v - top) / rule.temperature) for v in vals]
    u = rng.random() * sum(w)
    acc = 0.0
    for i, wi in enumerate(w):
        acc += wi
        if u < acc:
            return i
    return len(w) - 1


class QTable:
    """Tabular Q-values in [0, 1] with a fixed learning rate."""

    def __init__(self, n_states: int, n_actions: int, learning_rate: float = 0.1, init: float = 0.5, values=None):
        if not 0.0 <= learning_rate <= 1.0:
            raise ContractError("learning_rate must lie in [0, 1]")
        self.learning_rate = float(learning_rate)
        if values is None:
            if not 0.0 <= init <= 1.0:
                raise ContractError("init must lie in [0, 1]")
            values = np.full((n_states, n_actions), float(init))
        values = np.array(values, dtype=float)
        if values.shape != (n_states, n_actions):
            raise ContractError(f"values shape {values.shape} != {(n_states, n_actions)}")
        if values.min() < 0.0 or values.max() > 1.0:
            raise ContractError("Q-values must lie in [0, 1]")
        self.values = values

    @property
    def dims(self) -> tuple[int, int]:
        return self.values.shape

    def copy(self) -> "QTable":
        out = object.__new__(QTable)
        out.learning_rate = self.learning_rate
        out.values = self.values.copy()
        return out

    def update(self, s: int, a: int, r: float, s_next: int | None) -> None:
        """In-place Q-learning step; ``s_next=None`` ends the episode (no bootstrap)."""
        lr = self.learning_rate
        target = r if s_next is None else r + float(self.values[s_next].max())
        new = (1.0 - lr) * float(self.values[s, a]) + lr * target
        self.values[s, a] = min(1.0, max(0.0, new))

    def flat(self) -> np.ndarray:
        return self.values.ravel()

    def __eq__(self, other):
        return (
            isinstance(other, QTable)
            and self.learning_rate == other.learning_rate
            and np.array_equal(self.values, other.values)
        )

    def __repr__(self):
        return f"QTable(lr={self.learning_rate}, values={self.values.tolist()})"


def naive_update(q: QTable, s: int, a: int, r: float, s_next: int | None) -> QTable:
    """One Q-learning step on a copy of ``q``.

    ``s_next=None`` marks the end of the inner episode, in which case nothing is
    bootstrapped.
    """
    out = q.copy()
    out.update(s, a, r, s_next)
    return out


def select_action(q: QTable, s: int, rule: ActionRule, rng: np.random.Generator | int | None = None) -> int:
    if not 0 <= s < q.dims[0]:
        raise ContractError(f"state {s} out of range")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    return sample_action(q.values[s], rule, rng)


def naive_q_learner(n_states: int, n_actions: int, lr: float = 0.1, init: float = 0.5) -> QTable:
    return QTable(n_states, n_actions, learning_rate=lr, init=init)
