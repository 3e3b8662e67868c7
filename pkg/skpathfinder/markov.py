################################################################################
#                            skpathfinder.markov                               #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Union, Dict, List, Optional
from dataclasses import dataclass
import itertools
import logging
import numpy as np
import pandas as pd
from scipy import linalg
from joblib import Parallel, delayed

from .exceptions import DomainError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

# Fix states, in matrix order.
GATE_CLOSED = 0
PATHFINDER_SELECTION = 1
PATHFINDING = 2
GATE_OPENED = 3
STATE_NAMES = ['gate_closed', 'pathfinder_selection', 'pathfinding', 'gate_opened']

UNBOUNDED = 'unbounded'

TransitionMatrix = np.ndarray


################################################################################
#                                MarkovParams                                  #
################################################################################

@dataclass(frozen=True)
class MarkovParams():
    '''
    Transition probabilities of the departure fix availability chain.

    Parameters
    ----------
    p_good : float
        Probability that weather becomes favourable while the fix is closed
        (and stays favourable while it is open).

    p_accept : float
        Probability that a flight accepts the pathfinder role.

    p_success : float
        Probability that the pathfinder flight successfully crosses the fix.

    Notes
    -----
    Endpoint values 0 and 1 are accepted. The chain is then not ergodic in
    general and `ergodic` is `False`; `stationary` returns the long-run
    distribution reached from the closed state.

    '''

    p_good: float
    p_accept: float
    p_success: float

    def __post_init__(self) -> None:

        for field in ('p_good', 'p_accept', 'p_success'):
            value = getattr(self, field)
            if not 0 <= value <= 1:
                raise DomainError(f"`{field}` must be in [0, 1]. Got {value}.")

    @property
    def ergodic(self) -> bool:
        return all(0 < getattr(self, f) < 1 for f in ('p_good', 'p_accept', 'p_success'))


@dataclass(frozen=True)
class StationaryDistribution():
    '''
    Long-run probability of each fix state.

    Attributes
    ----------
    pi : np.ndarray
        Probabilities of (gate closed, pathfinder selection, pathfinding,
        gate opened).

    ergodic : bool
        `False` when the chain is reducible or periodic. `pi` is then the
        distribution reached starting from the closed state.

    '''

    pi: np.ndarray
    ergodic: bool = True

    @property
    def pi0(self) -> float:
        return float(self.pi[0])

    @property
    def pi1(self) -> float:
        return float(self.pi[1])

    @property
    def pi2(self) -> float:
        return float(self.pi[2])

    @property
    def pi3(self) -> float:
        return float(self.pi[3])

    def residual(self, matrix: TransitionMatrix) -> float:
        '''
        Infinity norm of `pi @ P - pi`.
        '''
        return float(np.max(np.abs(self.pi @ matrix - self.pi)))


@dataclass(frozen=True)
class QueueModel():
    '''
    M/M/1 approximation of the departure queue behind the fix.

    Parameters
    ----------
    c : float
        Departures per decision period when the fix is open.

    lambda_dep : float, default `0`
        Arrival rate of ready-to-depart flights (flights per period).

    '''

    c: float
    lambda_dep: float = 0.0

    def __post_init__(self) -> None:

        if not self.c > 0:
            raise DomainError(f"`c` must be greater than 0. Got {self.c}.")
        if self.lambda_dep < 0:
            raise DomainError(
                f"`lambda_dep` must be greater or equal to 0. Got {self.lambda_dep}."
            )


@dataclass(frozen=True)
class QueueMetrics():
    '''
    Stability flag, mean time in system `W` and mean number in system `L`.
    When the queue is not stable `W` and `L` are `UNBOUNDED`.
    '''

    stable: bool
    W: Union[float, str]
    L: Union[float, str]


def build_transition(params: MarkovParams) -> TransitionMatrix:
    '''
    Transition matrix of the four state fix chain.

    Parameters
    ----------
    params : MarkovParams

    Returns
    -------
    matrix : np.ndarray shape (4, 4)
        Row-stochastic matrix, rows and columns ordered gate closed,
        pathfinder selection, pathfinding, gate opened.

    '''

    g = params.p_good
    a = params.p_accept
    s = params.p_success

    matrix = np.array([
                 [1 - g, g,     0.0, 0.0],
                 [0.0,   1 - a, a,   0.0],
                 [1 - s, 0.0,   0.0, s  ],
                 [1 - g, 0.0,   0.0, g  ],
             ])

    return matrix


def _check_matrix(matrix: TransitionMatrix) -> np.ndarray:

    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise DomainError(f"`matrix` must be square. Got shape {matrix.shape}.")
    if np.any(matrix < 0) or np.any(matrix > 1):
        raise DomainError('`matrix` entries must be in [0, 1].')
    if not np.allclose(matrix.sum(axis=1), 1.0, rtol=0, atol=1e-12):
        raise DomainError('`matrix` rows must sum to 1.')

    return matrix


def _solve_irreducible(matrix: np.ndarray) -> np.ndarray:
    '''
    Solve (P^T - I) pi = 0 with the last balance equation replaced by sum(pi) = 1.
    '''

    n = matrix.shape[0]
    A = matrix.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    pi = linalg.solve(A, b)
    # Round-off can leave -1e-17 on structurally zero states.
    pi = np.clip(pi, 0.0, None)

    return pi / pi.sum()


def _reachability(matrix: np.ndarray) -> np.ndarray:

    n = matrix.shape[0]
    reach = (matrix > 0) | np.eye(n, dtype=bool)
    for k in range(n):
        reach = reach | (reach[:, [k]] & reach[[k], :])

    return reach


def stationary(matrix: TransitionMatrix) -> StationaryDistribution:
    '''
    Stationary distribution of a row-stochastic matrix.

    Irreducible chains are solved directly. For reducible chains the closed
    classes reachable from state 0 are solved separately and mixed with the
    absorption probabilities from state 0.

    Parameters
    ----------
    matrix : np.ndarray
        Row-stochastic transition matrix.

    Returns
    -------
    distribution : StationaryDistribution

    '''

    matrix = _check_matrix(matrix)
    n = matrix.shape[0]
    reach = _reachability(matrix)
    mutual = reach & reach.T

    if mutual.all():
        primitive = np.all(
                        np.linalg.matrix_power((matrix > 0).astype(np.int64), (n - 1)**2 + 1) > 0
                    )
        return StationaryDistribution(pi=_solve_irreducible(matrix), ergodic=bool(primitive))

    recurrent = np.array([np.all(mutual[i, reach[i]]) for i in range(n)])
    transient = np.flatnonzero(~recurrent)

    classes = []
    for i in np.flatnonzero(recurrent & reach[0]):
        members = tuple(np.flatnonzero(mutual[i]))
        if members not in classes:
            classes.append(members)

    if recurrent[0]:
        weights = [1.0 if 0 in members else 0.0 for members in classes]
    else:
        # Absorption probabilities of state 0 into each closed class.
        Q = matrix[np.ix_(transient, transient)]
        fundamental = np.eye(len(transient)) - Q
        start = int(np.flatnonzero(transient == 0)[0])
        weights = []
        for members in classes:
            R = matrix[np.ix_(transient, list(members))].sum(axis=1)
            weights.append(float(linalg.solve(fundamental, R)[start]))

    pi = np.zeros(n)
    for weight, members in zip(weights, classes):
        idx = list(members)
        pi[idx] += weight * _solve_irreducible(matrix[np.ix_(idx, idx)])

    logging.warning(
        f"Reducible chain, closed classes reachable from state 0: {classes}. "
        f"Returned distribution is the long-run limit from state 0."
    )

    return StationaryDistribution(pi=pi / pi.sum(), ergodic=False)


def effective_service_rate(pi: StationaryDistribution, queue: QueueModel) -> float:
    '''
    Effective service rate `c * pi3`: departures per period once the share of
    time the fix is open is accounted for.
    '''

    return queue.c * pi.pi3


def stability_and_delay(queue: QueueModel, mu_eff: float) -> QueueMetrics:
    '''
    M/M/1 stability check and mean delay.

    Parameters
    ----------
    queue : QueueModel
        Only `lambda_dep` is used.

    mu_eff : float
        Effective service rate.

    Returns
    -------
    metrics : QueueMetrics
        If `lambda_dep < mu_eff`, `W = 1 / (mu_eff - lambda_dep)` and
        `L = lambda_dep * W` (Little's law). Otherwise both are `UNBOUNDED`.

    Notes
    -----
    Arrival rates within 1e-12 (relative) of `mu_eff` are on the stability
    boundary and reported as unstable, so `c * pi3` products carrying
    round-off behave as the exact rate.

    '''

    if mu_eff < 0:
        raise DomainError(f"`mu_eff` must be greater or equal to 0. Got {mu_eff}.")

    lambda_dep = queue.lambda_dep
    if mu_eff - lambda_dep <= 1e-12 * max(1.0, mu_eff):
        return QueueMetrics(stable=False, W=UNBOUNDED, L=UNBOUNDED)

    W = 1 / (mu_eff - lambda_dep)

    return QueueMetrics(stable=True, W=W, L=lambda_dep * W)


def _stationary_row(p_good: float, p_accept: float, p_success: float) -> list:

    params = MarkovParams(p_good=p_good, p_accept=p_accept, p_success=p_success)
    pi = stationary(build_transition(params)).pi

    return [p_good, p_accept, p_success, *pi.tolist()]


def sweep_stationary(grid: Dict[str, List[float]], n_jobs: int=1) -> pd.DataFrame:
    '''
    Stationary distribution over a grid of chain parameters.

    Parameters
    ----------
    grid : dict
        Keys `p_good`, `p_accept` and `p_success`, each a list of values in
        [0, 1].

    n_jobs : int, default `1`
        Number of parallel jobs (joblib).

    Returns
    -------
    results : pandas.DataFrame
        Columns `p_good, p_accept, p_success, pi0, pi1, pi2, pi3`. Rows in
        lexicographic order of the grid indices (`p_good` outermost).

    '''

    columns = ['p_good', 'p_accept', 'p_success', 'pi0', 'pi1', 'pi2', 'pi3']

    missing = {'p_good', 'p_accept', 'p_success'} - set(grid)
    if missing:
        raise DomainError(f"`grid` is missing keys: {sorted(missing)}.")

    for key in ('p_good', 'p_accept', 'p_success'):
        for value in grid[key]:
            if not 0 <= value <= 1:
                raise DomainError(f"`{key}` grid values must be in [0, 1]. Got {value}.")

    points = list(itertools.product(grid['p_good'], grid['p_accept'], grid['p_success']))
    if not points:
        return pd.DataFrame(columns=columns)

    logging.info(f"Number of parameter triples evaluated: {len(points)}")

    rows = Parallel(n_jobs=n_jobs)(
               delayed(_stationary_row)(float(g), float(a), float(s)) for g, a, s in points
           )

    return pd.DataFrame(rows, columns=columns)


def simulate_chain(params: MarkovParams, steps: int, seed: Optional[int]=None,
                   start: int=GATE_CLOSED) -> np.ndarray:
    '''
    Empirical share of periods spent in each state along one simulated path.

    Parameters
    ----------
    params : MarkovParams

    steps : int
        Number of transitions simulated.

    seed : int, default `None`
        Seed of `np.random.default_rng`.

    start : int, default `0`
        Initial state.

    Returns
    -------
    occupancy : np.ndarray shape (4,)

    '''

    if steps < 1:
        raise DomainError(f"`steps` must be greater than 0. Got {steps}.")

    matrix = build_transition(params)
    cumulative = np.cumsum(matrix, axis=1)
    rng = np.random.default_rng(seed)
    draws = rng.random(steps)
    counts = np.zeros(4, dtype=np.int64)
    state = start
    for u in draws:
        state = min(int(np.searchsorted(cumulative[state], u, side='right')), 3)
        counts[state] += 1

    return counts / steps


def operational_table(p_good_values: Union[list, np.ndarray], p_accept: float,
                      p_success: float, c: float) -> pd.DataFrame:
    '''
    Gate opened probability and effective service rate as the weather
    probability `p_good` varies.

    Returns
    -------
    table : pandas.DataFrame
        Columns `p_good`, `pi3`, `mu_eff`.

    '''

    queue = QueueModel(c=c)
    rows = []
    for g in p_good_values:
        pi = stationary(build_transition(MarkovParams(float(g), p_accept, p_success)))
        rows.append([float(g), pi.pi3, effective_service_rate(pi, queue)])

    return pd.DataFrame(rows, columns=['p_good', 'pi3', 'mu_eff'])


def stability_map(p_good_values: Union[list, np.ndarray],
                  p_accept_values: Union[list, np.ndarray], p_success: float,
                  c: float, lambda_dep: float) -> pd.DataFrame:
    '''
    Stability of the departure queue over a (`p_good`, `p_accept`) grid.

    Returns
    -------
    table : pandas.DataFrame
        Columns `p_good`, `p_accept`, `pi3`, `mu_eff`, `stable`.

    '''

    queue = QueueModel(c=c, lambda_dep=lambda_dep)
    rows = []
    for g, a in itertools.product(p_good_values, p_accept_values):
        pi = stationary(build_transition(MarkovParams(float(g), float(a), p_success)))
        mu_eff = effective_service_rate(pi, queue)
        rows.append([float(g), float(a), pi.pi3, mu_eff,
                     stability_and_delay(queue, mu_eff).stable])

    return pd.DataFrame(rows, columns=['p_good', 'p_accept', 'pi3', 'mu_eff', 'stable'])


def delay_table(c: float, pi3: float,
                lambda_values: Union[list, np.ndarray]) -> pd.DataFrame:
    '''
    Mean time and number in system as demand grows, for a fixed fix
    availability `pi3`. Unstable rows carry `UNBOUNDED`.

    Returns
    -------
    table : pandas.DataFrame
        Columns `lambda_dep`, `mu_eff`, `stable`, `W`, `L`.

    '''

    if not 0 <= pi3 <= 1:
        raise DomainError(f"`pi3` must be in [0, 1]. Got {pi3}.")

    mu_eff = c * pi3
    rows = []
    for lam in lambda_values:
        metrics = stability_and_delay(QueueModel(c=c, lambda_dep=float(lam)), mu_eff)
        rows.append([float(lam), mu_eff, metrics.stable, metrics.W, metrics.L])

    return pd.DataFrame(rows, columns=['lambda_dep', 'mu_eff', 'stable', 'W', 'L'])
