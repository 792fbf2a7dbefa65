import pytest
from hypothesis import given, strategies as st

from unload_rl.env import OutcomeKind, StepOutcome
from unload_rl.errors import ConfigError
from unload_rl.reward import RewardConfig, RewardKind, reward

VERT = RewardConfig(RewardKind.VERTICALITY, 2.0)
BASE = RewardConfig(RewardKind.BASELINE, 2.0)


def success(z):
    return StepOutcome(OutcomeKind.PICK_SUCCESS, (0, 0), z, 0, 1, False)


FAIL = StepOutcome(OutcomeKind.PICK_OUT_OF_WORKSPACE, None, 0.0, 0, 1, False)
EMPTY = StepOutcome(OutcomeKind.PICK_EMPTY_CELL, None, 0.0, 0, 1, False)


def test_top_row_verticality():
    assert reward(success(1.375), VERT) == pytest.approx(3.75)


def test_bottom_row_verticality():
    assert reward(success(0.125), VERT) == pytest.approx(1.25)


@pytest.mark.parametrize("outcome", [FAIL, EMPTY])
def test_failures_pay_nothing(outcome):
    assert reward(outcome, VERT) == 0.0
    assert reward(outcome, BASE) == 0.0


def test_baseline_is_constant():
    assert reward(success(0.125), BASE) == reward(success(1.375), BASE) == 1.0


def test_negative_lambda_rejected():
    with pytest.raises(ConfigError):
        RewardConfig(RewardKind.VERTICALITY, -1.0)


@given(z1=st.floats(0, 10), z2=st.floats(0, 10), lam=st.floats(0.01, 10))
def test_verticality_orders_by_height(z1, z2, lam):
    cfg = RewardConfig(RewardKind.VERTICALITY, lam)
    r1, r2 = reward(success(z1), cfg), reward(success(z2), cfg)
    assert r1 >= reward(success(z1), BASE)
    if z1 < z2:
        assert r1 <= r2


@given(z=st.floats(0, 10))
def test_lambda_zero_matches_baseline(z):
    cfg = RewardConfig(RewardKind.VERTICALITY, 0.0)
    assert reward(success(z), cfg) == reward(success(z), BASE)
