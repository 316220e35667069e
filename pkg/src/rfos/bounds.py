"""Leading-order evaluation of the R-FOS sample-complexity and value-gap bounds.

Every count returned here is a *leading-order estimate*: logarithmic factors
and absolute constants hidden in the O-tilde notation are dropped. Integer
powers are computed exactly and the epsilon/gamma denominators with rational
arithmetic, so ratios such as the x16 growth per window step come out exact.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from fractions import Fraction

from .epsnet import _as_fraction, grid_base
from .games import ContractError


@dataclass(frozen=True)
class BoundInputs:
    epsilon: float = 0.1
    delta: float = 0.1
    gamma: float = 0.8
    lam: float = 0.5
    n: int = 2
    card_s: int = 1
    card_a: int = 2
    h: int = 2
    lipschitz_r: float = 1.0
    lipschitz_t: float = 1.0
    lipschitz: float = 1.0
    k_disc: float = 1.0
    k_p: float = 1.0
    check_coarseness: bool = False

    def __post_init__(self):
        if not 0.0 <= self.gamma < 1.0:
            raise ContractError("gamma must lie in [0, 1)")
        if not 0.0 < self.epsilon < 1.0 / (1.0 - self.gamma):
            raise ContractError("epsilon must lie in (0, 1/(1-gamma))")
        if not 0.0 < self.delta < 1.0:
            raise ContractError("delta must lie in (0, 1)")
        if self.lam < 0:
            raise ContractError("lambda must be non-negative")
        if min(self.n, self.card_s, self.card_a) < 1 or self.h < 0:
            raise ContractError("n, |S|, |A| must be positive and h non-negative")
        for name in ("lipschitz_r", "lipschitz_t", "lipschitz", "k_disc", "k_p"):
            if getattr(self, name) < 0:
                raise ContractError(f"{name} must be non-negative")
        if self.check_coarseness and not 0 < self.lam <= self.lipschitz / 2:
            raise ContractError("discretisation gap needs lambda in (0, L/2]")

    @property
    def card_sa(self) -> int:
        return self.card_s * self.card_a

    @property
    def alpha(self) -> float:
        """Covering radius of the meta-action net, lam * sqrt(|S||A|) / 2."""
        return self.lam * math.sqrt(self.card_sa) / 2.0

    @property
    def v_max(self) -> float:
        return 1.0 / (1.0 - self.gamma)


def _ceil(x: Fraction) -> int:
    return -((-x.numerator) // x.denominator)


def _denominator(inputs: BoundInputs, eps_pow: int, gamma_pow: int) -> Fraction:
    eps = _as_fraction(inputs.epsilon)
    one_minus_gamma = 1 - _as_fraction(inputs.gamma)
    return eps**eps_pow * one_minus_gamma**gamma_pow


def _net_power(radius_sq: int, lam: float, dim: int) -> Fraction:
    if lam <= 0:
        raise ContractError("lambda must be positive for grid counts")
    return grid_base(math.sqrt(radius_sq), lam) ** dim


def state_count_case1(inputs: BoundInputs) -> Fraction:
    d = inputs.n * inputs.card_sa
    return _net_power(d, inputs.lam, d)


def action_count(inputs: BoundInputs) -> Fraction:
    d = inputs.card_sa
    return _net_power(d, inputs.lam, d)


def state_count_case2(inputs: BoundInputs) -> int:
    return inputs.card_sa ** (inputs.n * inputs.h)


def m_case1_value(inputs: BoundInputs) -> Fraction:
    """(2 sqrt(n|S||A|)/lam + 1)^(n|S||A|) / (eps^2 (1-gamma)^4), before rounding."""
    return state_count_case1(inputs) / _denominator(inputs, 2, 4)


def m_case2_value(inputs: BoundInputs) -> Fraction:
    """(|S||A|)^(n h) / (eps^2 (1-gamma)^4), before rounding."""
    return Fraction(state_count_case2(inputs)) / _denominator(inputs, 2, 4)


def sample_complexity_case1_value(inputs: BoundInputs) -> Fraction:
    s = state_count_case1(inputs)
    return s * s * action_count(inputs) / _denominator(inputs, 3, 6)


def sample_complexity_case2_value(inputs: BoundInputs) -> Fraction:
    s = state_count_case2(inputs)
    return Fraction(s * s) * action_count(inputs) / _denominator(inputs, 3, 6)


# The integer versions round the leading term up. Their ratios are exact only
# when the term is already an integer; use the *_value forms for exact ratios.


def m_case1(inputs: BoundInputs) -> int:
    return _ceil(m_case1_value(inputs))


def m_case2(inputs: BoundInputs) -> int:
    return _ceil(m_case2_value(inputs))


def sample_complexity_case1(inputs: BoundInputs) -> int:
    return _ceil(sample_complexity_case1_value(inputs))


def sample_complexity_case2(inputs: BoundInputs) -> int:
    return _ceil(sample_complexity_case2_value(inputs))


def m_generic(n_states: int, n_actions: int, epsilon: float, delta: float, gamma: float) -> int:
    """(S + ln(SA/delta)) V_max^2 / (eps^2 (1-gamma)^2) for a plain tabular MDP."""
    v_max = 1.0 / (1.0 - gamma)
    val = (n_states + math.log(n_states * n_actions / delta)) * v_max**2 / (epsilon**2 * (1.0 - gamma) ** 2)
    return math.ceil(val - 1e-9)


def sample_complexity_generic(n_states: int, n_actions: int, epsilon: float, gamma: float) -> int:
    eps = _as_fraction(epsilon)
    g = _as_fraction(gamma)
    return _ceil(Fraction(n_states * n_states * n_actions) / (eps**3 * (1 - g) ** 6))


def discretisation_gap(inputs: BoundInputs) -> float:
    """K lam / (1-gamma)^2."""
    return inputs.k_disc * inputs.lam / (1.0 - inputs.gamma) ** 2


def simulation_gap(eps_r: float, eps_p: float, gamma: float, v_max: float | None = None) -> float:
    """eps_R/(1-gamma) + gamma eps_P V_max / (2(1-gamma))."""
    if eps_r < 0 or eps_p < 0:
        raise ContractError("perturbation sizes must be non-negative")
    if not 0.0 <= gamma < 1.0:
        raise ContractError("gamma must lie in [0, 1)")
    v_max = 1.0 / (1.0 - gamma) if v_max is None else v_max
    return eps_r / (1.0 - gamma) + gamma * eps_p * v_max / (2.0 * (1.0 - gamma))


def discretised_value_gap(inputs: BoundInputs, alpha: float | None = None, halve: bool = False) -> float:
    """L_R alpha/(1-gamma) + gamma K_p alpha/(1-gamma)^2; ``halve`` gives the 2(1-gamma)^2 form."""
    a = inputs.alpha if alpha is None else alpha
    g = inputs.gamma
    last = g * inputs.k_p * a / (1.0 - g) ** 2
    return inputs.lipschitz_r * a / (1.0 - g) + (last / 2.0 if halve else last)


@dataclass
class BoundReport:
    inputs: dict
    m_case1: int
    m_case2: int
    sample_complexity_case1: int
    sample_complexity_case2: int
    discretisation_gap: float
    simulation_gap_case1: float
    simulation_gap_case2: float
    total_suboptimality_case1: float
    total_suboptimality_case2: float
    label: str = "leading-order estimate (log factors and constants dropped)"

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=str)

    def to_text(self) -> str:
        rows = [(k, v) for k, v in asdict(self).items() if k not in ("inputs", "label")]
        width = max(len(k) for k, _ in rows)
        lines = [self.label]
        lines += [f"  {k:<{width}} = {v}" for k, v in self.inputs.items()]
        lines += [f"{k:<{width + 2}} {v:.6g}" if isinstance(v, float) else f"{k:<{width + 2}} {v}" for k, v in rows]
        return "\n".join(lines)


def total_bound(inputs: BoundInputs) -> BoundReport:
    disc = discretisation_gap(inputs)
    sim1 = discretised_value_gap(inputs)
    sim2 = discretised_value_gap(inputs, halve=True)
    return BoundReport(
        inputs=asdict(inputs) | {"alpha": inputs.alpha},
        m_case1=m_case1(inputs),
        m_case2=m_case2(inputs),
        sample_complexity_case1=sample_complexity_case1(inputs),
        sample_complexity_case2=sample_complexity_case2(inputs),
        discretisation_gap=disc,
        simulation_gap_case1=sim1,
        simulation_gap_case2=sim2,
        total_suboptimality_case1=inputs.epsilon + disc + sim1,
        total_suboptimality_case2=inputs.epsilon + disc + sim2,
    )
