import pytest
from pytest import approx
import numpy as np
from skpathfinder.behavior import FlightDecisionParams
from skpathfinder.behavior import StakeholderWeights
from skpathfinder.behavior import flight_utility
from skpathfinder.behavior import acceptance_probability
from skpathfinder.behavior import rejection_probability
from skpathfinder.behavior import atc_utility
from skpathfinder.behavior import dispatcher_utility
from skpathfinder.behavior import acceptance_curve
from skpathfinder.exceptions import DomainError


# Test flight_utility
#-------------------------------------------------------------------------------
def test_flight_utility_when_accepting():

    params = FlightDecisionParams(reward_T=10, cost_c=2, failure_cost_d=5, p_success=0.8)
    assert flight_utility(1, params) == approx(10 - 2 - 0.2 * 5)


def test_flight_utility_is_zero_when_declining():

    params = FlightDecisionParams(reward_T=10, cost_c=2, failure_cost_d=5, p_success=0.8)
    assert flight_utility(0, params) == 0.0


def test_flight_utility_equals_reward_without_costs():

    params = FlightDecisionParams(reward_T=3.5, p_success=0.1)
    assert flight_utility(1, params) == 3.5


def test_flight_utility_exception_when_decision_is_not_binary():

    with pytest.raises(DomainError):
        flight_utility(2, FlightDecisionParams(reward_T=1))


def test_decision_params_exception_when_p_success_out_of_range():

    with pytest.raises(DomainError):
        FlightDecisionParams(reward_T=1, p_success=1.5)


# Test acceptance_probability
#-------------------------------------------------------------------------------
def test_acceptance_probability_is_half_when_beta_is_zero():

    assert acceptance_probability(7.0, 0.0) == 0.5
    assert (acceptance_probability(np.array([-3.0, 0.0, 3.0]), 0.0) == 0.5).all()


def test_acceptance_probability_logistic_value():

    assert acceptance_probability(2.0, 1.0) == approx(1 / (1 + np.exp(-2.0)))


def test_acceptance_probability_does_not_overflow():

    assert acceptance_probability(1000.0, 5.0) == approx(1.0)
    assert acceptance_probability(-1000.0, 5.0) == approx(0.0)
    assert np.isfinite(rejection_probability(-1000.0, 5.0))


def test_acceptance_and_rejection_are_complementary():

    utilities = np.linspace(-5, 5, 21)
    total = acceptance_probability(utilities, 1.3) + rejection_probability(utilities, 1.3)
    assert total == approx(np.ones(21), abs=1e-15)


def test_acceptance_probability_is_monotone_in_utility():

    p = acceptance_probability(np.linspace(-5, 5, 101), 2.0)
    assert (np.diff(p) >= 0).all()


def test_acceptance_probability_monotone_in_beta_by_sign_of_utility():

    betas = np.linspace(0, 5, 11)
    rising = np.array([acceptance_probability(0.7, beta) for beta in betas])
    falling = np.array([acceptance_probability(-0.7, beta) for beta in betas])
    assert (np.diff(rising) > 0).all()
    assert (np.diff(falling) < 0).all()


def test_acceptance_probability_exception_when_beta_negative():

    with pytest.raises(DomainError):
        acceptance_probability(1.0, -1.0)


# Test stakeholder utilities
#-------------------------------------------------------------------------------
def test_atc_utility_without_penalty():

    weights = StakeholderWeights(lambda_atc=0.0)
    assert atc_utility(0.4, 10.0, 3.0, weights) == approx(4.0)


def test_atc_utility_can_be_negative():

    weights = StakeholderWeights(lambda_atc=2.0)
    assert atc_utility(0.5, 1.0, 3.0, weights) == approx(-2.5)


def test_dispatcher_utility_uses_dispatcher_weight():

    weights = StakeholderWeights(lambda_atc=10.0, lambda_disp=0.5)
    assert dispatcher_utility(0.8, 5.0, 2.0, weights) == approx(0.8 * 4.0)


def test_stakeholder_utilities_are_linear_in_lambda():

    lambdas = np.linspace(0, 2, 9)
    step = lambdas[1] - lambdas[0]
    atc = np.array([atc_utility(0.6, 5.0, 2.5, StakeholderWeights(lambda_atc=lam)) for lam in lambdas])
    disp = np.array([dispatcher_utility(0.3, 4.0, 1.5, StakeholderWeights(lambda_disp=lam)) for lam in lambdas])
    assert np.diff(atc) / step == approx(np.full(8, -0.6 * 2.5), abs=1e-12)
    assert np.diff(disp) / step == approx(np.full(8, -0.3 * 1.5), abs=1e-12)


def test_stakeholder_utility_exception_when_probability_out_of_range():

    with pytest.raises(DomainError):
        atc_utility(1.2, 1.0, 1.0, StakeholderWeights())


def test_stakeholder_weights_exception_when_negative():

    with pytest.raises(DomainError):
        StakeholderWeights(lambda_disp=-0.1)


# Test acceptance_curve
#-------------------------------------------------------------------------------
def test_acceptance_curve_shape_and_order():

    curve = acceptance_curve([-1, 0, 1], [0, 2])
    assert curve.columns.tolist() == ['beta', 'utility', 'p_accept']
    assert curve['beta'].tolist() == [0, 0, 0, 2, 2, 2]
    assert curve['p_accept'].iloc[:3].tolist() == [0.5, 0.5, 0.5]
    assert curve['p_accept'].iloc[4] == 0.5
