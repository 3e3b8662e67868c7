################################################################################
#                           skpathfinder.behavior                              #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Union
from dataclasses import dataclass
import logging
import numpy as np
import pandas as pd
from scipy.special import expit

from .exceptions import DomainError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

ArrayLike = Union[float, np.ndarray]


################################################################################
#                            FlightDecisionParams                              #
################################################################################

@dataclass(frozen=True)
class FlightDecisionParams():
    '''
    Payoff parameters of a single flight facing a pathfinder offer.

    Parameters
    ----------
    reward_T : float
        Reward obtained when the pathfinder departs (utility units).

    cost_c : float, default `0`
        Participation cost of accepting.

    failure_cost_d : float, default `0`
        Cost paid when the pathfinding attempt fails.

    p_success : float, default `0.9`
        Probability that the pathfinding attempt succeeds.

    beta : float, default `1`
        Sensitivity of the logistic acceptance rule. `beta = 0` is accepted
        so that zero-sensitivity grid points can be evaluated.

    '''

    reward_T: float
    cost_c: float = 0.0
    failure_cost_d: float = 0.0
    p_success: float = 0.9
    beta: float = 1.0

    def __post_init__(self) -> None:

        for field in ('reward_T', 'cost_c', 'failure_cost_d', 'beta'):
            if getattr(self, field) < 0:
                raise DomainError(
                    f"`{field}` must be greater or equal to 0. Got {getattr(self, field)}."
                )
        _check_probability(self.p_success, 'p_success')


@dataclass(frozen=True)
class StakeholderWeights():
    '''
    Penalty weights applied by ATC and by the dispatcher to the cost of
    moving a flight ahead in the queue.
    '''

    lambda_atc: float = 0.0
    lambda_disp: float = 0.0

    def __post_init__(self) -> None:

        for field in ('lambda_atc', 'lambda_disp'):
            if getattr(self, field) < 0:
                raise DomainError(
                    f"`{field}` must be greater or equal to 0. Got {getattr(self, field)}."
                )


def _check_probability(value: ArrayLike, name: str) -> None:

    value = np.asarray(value, dtype=float)
    if np.any(np.isnan(value)) or np.any(value < 0) or np.any(value > 1):
        raise DomainError(f"`{name}` must be in [0, 1]. Got {value}.")


def flight_utility(accept: int, params: FlightDecisionParams) -> float:
    '''
    Expected payoff of a flight for its decision on a pathfinder offer.

    Parameters
    ----------
    accept : {0, 1}
        1 if the offer is accepted, 0 if it is declined.

    params : FlightDecisionParams
        Payoff parameters of the flight.

    Returns
    -------
    utility : float
        `T - c - (1 - p_success) * d` when accepting. Declining is worth exactly 0.

    '''

    if accept not in (0, 1):
        raise DomainError(f"`accept` must be 0 or 1. Got {accept}.")

    if accept == 0:
        return 0.0

    return (
        params.reward_T
        - params.cost_c
        - (1 - params.p_success) * params.failure_cost_d
    )


def acceptance_probability(utility: ArrayLike, beta: float) -> ArrayLike:
    '''
    Logistic acceptance probability `1 / (1 + exp(-beta * utility))`.

    `scipy.special.expit` is used so the exponential never overflows, even for
    `|beta * utility|` of several hundreds. Works elementwise on arrays.

    Parameters
    ----------
    utility : float, np.ndarray
        Utility of accepting.

    beta : float
        Sensitivity, `beta >= 0`.

    Returns
    -------
    p_accept : float, np.ndarray

    '''

    if beta < 0:
        raise DomainError(f"`beta` must be greater or equal to 0. Got {beta}.")

    p = expit(beta * np.asarray(utility, dtype=float))

    return float(p) if np.ndim(p) == 0 else p


def rejection_probability(utility: ArrayLike, beta: float) -> ArrayLike:
    '''
    Complement of `acceptance_probability`, evaluated directly as
    `expit(-beta * utility)` to avoid cancellation.
    '''

    if beta < 0:
        raise DomainError(f"`beta` must be greater or equal to 0. Got {beta}.")

    p = expit(-beta * np.asarray(utility, dtype=float))

    return float(p) if np.ndim(p) == 0 else p


def atc_utility(p_accept: ArrayLike, delta_d_sys: ArrayLike, g_atc: ArrayLike,
                weights: StakeholderWeights) -> ArrayLike:
    '''
    Expected net gain for ATC of offering the pathfinder role to a flight:
    `p_accept * (delta_d_sys - lambda_atc * g_atc)`. May be negative.
    '''

    _check_probability(p_accept, 'p_accept')

    return p_accept * (delta_d_sys - weights.lambda_atc * g_atc)


def dispatcher_utility(p_accept: ArrayLike, b_dep: ArrayLike, g_disp: ArrayLike,
                       weights: StakeholderWeights) -> ArrayLike:
    '''
    Expected net gain for the airline dispatcher:
    `p_accept * (b_dep - lambda_disp * g_disp)`. May be negative.
    '''

    _check_probability(p_accept, 'p_accept')

    return p_accept * (b_dep - weights.lambda_disp * g_disp)


def acceptance_curve(utilities: Union[list, np.ndarray],
                     betas: Union[list, np.ndarray]) -> pd.DataFrame:
    '''
    Acceptance probability over a range of utilities for several sensitivities.

    Returns
    -------
    curve : pandas.DataFrame
        Columns `beta`, `utility`, `p_accept`; one row per (beta, utility)
        pair, betas outermost.

    '''

    utilities = np.asarray(utilities, dtype=float)
    rows = []
    for beta in betas:
        rows.append(pd.DataFrame({
                        'beta'    : float(beta),
                        'utility' : utilities,
                        'p_accept': acceptance_probability(utilities, float(beta))
                    }))

    if not rows:
        return pd.DataFrame(columns=['beta', 'utility', 'p_accept'])

    return pd.concat(rows, ignore_index=True)
