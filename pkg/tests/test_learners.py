import numpy as np
import pytest
from hypothesis import given, strategies as st

from rfos.games import ContractError
from rfos.learners import (
    GREEDY,
    ActionRule,
    QTable,
    boltzmann_probs,
    naive_update,
    sample_action,
    select_action,
)

unit = st.floats(0.0, 1.0)


def test_full_overwrite():
    q = QTable(1, 2, learning_rate=1.0, init=0.0)
    assert naive_update(q, 0, 1, 1.0, None).values[0, 1] == 1.0


def test_zero_learning_rate_leaves_table():
    q = QTable(2, 2, learning_rate=0.0, init=0.3)
    assert naive_update(q, 1, 0, 1.0, 0) == q


def test_hand_update():
    # 0.5 * 0.4 + 0.5 * (0.2 + 0.6)
    q = QTable(2, 2, learning_rate=0.5, values=[[0.4, 0.0], [0.6, 0.1]])
    assert naive_update(q, 0, 0, 0.2, 1).values[0, 0] == pytest.approx(0.6)


def test_update_is_pure():
    q = QTable(1, 2)
    before = q.copy()
    naive_update(q, 0, 0, 1.0, None)
    assert q == before


def test_clamped_to_unit_interval():
    q = QTable(1, 2, learning_rate=1.0, init=1.0)
    q.update(0, 0, 1.0, 0)  # target 2 would leave [0, 1]
    assert q.values[0, 0] == 1.0


@given(unit, unit, unit, st.floats(0.0, 1.0), st.booleans())
def test_values_stay_in_unit_interval(v0, v1, r, lr, terminal):
    q = QTable(1, 2, learning_rate=lr, values=[[v0, v1]])
    out = naive_update(q, 0, 0, r, None if terminal else 0)
    assert 0.0 <= out.values.min() and out.values.max() <= 1.0


def test_greedy_examples():
    assert select_action(QTable(1, 2, values=[[0.2, 0.8]]), 0, GREEDY, 0) == 1
    assert select_action(QTable(1, 2, values=[[0.5, 0.5]]), 0, GREEDY, 0) == 0


def test_cold_boltzmann_is_nearly_greedy():
    rng = np.random.default_rng(0)
    rule = ActionRule("boltzmann", 0.01)
    picks = [sample_action(np.array([0.2, 0.8]), rule, rng) for _ in range(10_000)]
    assert np.mean(picks) >= 0.99


def test_hot_boltzmann_is_nearly_uniform():
    rng = np.random.default_rng(1)
    rule = ActionRule("boltzmann", 1e6)
    picks = [sample_action(np.array([0.0, 5.0, 2.0]), rule, rng) for _ in range(10_000)]
    freq = np.bincount(picks, minlength=3) / len(picks)
    assert np.all(np.abs(freq - 1 / 3) < 0.02)


def test_boltzmann_matches_probabilities():
    rng = np.random.default_rng(2)
    values = np.array([0.1, 0.4, 0.3])
    rule = ActionRule("boltzmann", 0.2)
    picks = [sample_action(values, rule, rng) for _ in range(20_000)]
    freq = np.bincount(picks, minlength=3) / len(picks)
    assert np.allclose(freq, boltzmann_probs(values, 0.2), atol=0.015)


@given(st.lists(st.floats(-5, 5), min_size=1, max_size=6), st.floats(0.01, 100))
def test_boltzmann_probs_are_a_distribution(values, temp):
    p = boltzmann_probs(np.array(values), temp)
    assert p.sum() == pytest.approx(1.0)
    assert np.all(p >= 0)


def test_rule_parsing_and_errors():
    assert ActionRule.parse("boltzmann:0.25") == ActionRule("boltzmann", 0.25)
    assert ActionRule.parse("greedy").variant == "greedy"
    with pytest.raises(ContractError):
        ActionRule("softmax")
    with pytest.raises(ContractError):
        ActionRule("boltzmann", 0.0)


def test_qtable_validation():
    with pytest.raises(ContractError):
        QTable(1, 2, learning_rate=1.5)
    with pytest.raises(ContractError):
        QTable(1, 2, values=[[0.0, 2.0]])
    with pytest.raises(ContractError):
        QTable(1, 2, values=[[0.0, 0.5, 1.0]])
    with pytest.raises(ContractError):
        select_action(QTable(1, 2), 3, GREEDY)
