################################################################################
#                          skpathfinder.sequencer                              #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Union, Dict, List, Tuple, Optional
from dataclasses import dataclass, field
import re
import time
import itertools
import logging
import numpy as np
import pandas as pd
import tqdm
from joblib import Parallel, delayed
from sklearn.model_selection import ParameterGrid

from .behavior import StakeholderWeights, acceptance_probability
from .depsim import ParamMatrices
from .exceptions import DomainError, InfeasibleSequenceError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

SIDES = ('atc', 'dispatcher')
P_CLIP = 1e-12
MAX_DP_CANDIDATES = 24
MAX_BRUTEFORCE_CANDIDATES = 8
SWEEP_COLUMNS = ['side', 'B', 'lambda', 'beta', 'objective', 'sequence', 'Rp', 'avg_G',
                 'runtime_ms']


################################################################################
#                              SequenceProblem                                 #
################################################################################

@dataclass
class SequenceProblem():
    '''
    Offer sequencing instance: choose which candidate receives the offer at
    each position `1..m` so that the expected net benefit
    `sum_k p[f_k, k] * u[f_k, k] * prod_{j<k} (1 - p[f_j, j])` is maximal,
    subject to `sum_k e[f_k, k] <= budget`.

    Parameters
    ----------
    candidates : list of str
        Row labels (callsigns).

    p : np.ndarray
        (n, K) acceptance probabilities, strictly inside (0, 1).

    u : np.ndarray
        (n, K) net benefit of an accepted offer.

    e : np.ndarray
        (n, K) non-negative coordination cost of issuing an offer.

    budget : float
        Coordination budget `B > 0`.

    side : {'atc', 'dispatcher'}

    raw_G : np.ndarray, default `None`
        (n, K) un-normalized queue-jump cost of the side, for reporting.

    '''

    candidates: List[str]
    p: np.ndarray
    u: np.ndarray
    e: np.ndarray
    budget: float
    side: str = 'atc'
    raw_G: Optional[np.ndarray] = None

    def __post_init__(self) -> None:

        self.candidates = list(self.candidates)
        self.p = np.asarray(self.p, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        self.e = np.asarray(self.e, dtype=float)
        if self.p.ndim != 2:
            raise DomainError(f"`p` must be a 2 dimensional array. Got {self.p.ndim} dimensions.")
        n, K = self.p.shape
        if len(self.candidates) != n:
            raise DomainError(
                f"`candidates` has {len(self.candidates)} labels but `p` has {n} rows."
            )
        for name in ('u', 'e'):
            if getattr(self, name).shape != (n, K):
                raise DomainError(
                    f"`{name}` must have shape {(n, K)}. Got {getattr(self, name).shape}."
                )
        if self.raw_G is not None:
            self.raw_G = np.asarray(self.raw_G, dtype=float)
            if self.raw_G.shape != (n, K):
                raise DomainError(f"`raw_G` must have shape {(n, K)}. Got {self.raw_G.shape}.")
        if n and K and not (np.all(self.p > 0) and np.all(self.p < 1)):
            raise DomainError('`p` entries must be strictly inside (0, 1).')
        if np.any(self.e < 0) or not np.all(np.isfinite(self.e)):
            raise DomainError('`e` entries must be finite and >= 0.')
        if not self.budget > 0:
            raise DomainError(f"`budget` must be > 0. Got {self.budget}.")
        if self.side not in SIDES:
            raise DomainError(f"`side` must be one of {SIDES}. Got '{self.side}'.")

    @property
    def n_candidates(self) -> int:
        return self.p.shape[0]

    @property
    def n_positions(self) -> int:
        return self.p.shape[1]


@dataclass(frozen=True)
class OfferSequence():
    '''
    Ordered offers: `callsigns[k]` receives the offer at position `k + 1`.
    `reach[k]` is the probability that position `k + 1` is reached.
    '''

    callsigns: Tuple[str, ...] = ()
    rows: Tuple[int, ...] = ()
    reach: Tuple[float, ...] = ()
    objective: float = 0.0

    def __len__(self) -> int:
        return len(self.rows)


@dataclass
class SolveResult():
    sequence: OfferSequence
    method: str
    runtime_ms: float = 0.0

    @property
    def objective(self) -> float:
        return self.sequence.objective

    @property
    def rows(self) -> Tuple[int, ...]:
        return self.sequence.rows

    @property
    def callsigns(self) -> Tuple[str, ...]:
        return self.sequence.callsigns


@dataclass
class SweepGrid():
    '''
    Grid of coordination budgets, penalty weights and acceptance
    sensitivities explored by `sweep`.
    '''

    B_values: List[float]
    lambda_values: List[float]
    beta_values: List[float]
    p_success: float = 0.9

    def __post_init__(self) -> None:

        for name in ('B_values', 'lambda_values', 'beta_values'):
            if len(getattr(self, name)) == 0:
                raise DomainError(f"`{name}` must not be empty.")
        if not 0 <= self.p_success <= 1:
            raise DomainError(f"`p_success` must be in [0, 1]. Got {self.p_success}.")

    @classmethod
    def standard(cls) -> 'SweepGrid':
        '''
        B = 3..12, lambda = 0, 0.1, ..., 1 and beta = 0..5: 660 instances.
        '''
        return cls(
                   B_values      = list(range(3, 13)),
                   lambda_values = [round(0.1 * i, 1) for i in range(11)],
                   beta_values   = list(range(0, 6)),
                   p_success     = 0.9
               )

    def __len__(self) -> int:
        return len(self.B_values) * len(self.lambda_values) * len(self.beta_values)


def airline_of(callsign: str) -> str:
    '''
    Airline designator: the leading letters of the callsign.
    '''
    match = re.match(r'[A-Za-z]+', callsign)
    return match.group(0).upper() if match else ''


def normalize(matrix: Union[np.ndarray, pd.DataFrame]) -> np.ndarray:
    '''
    Min-max scaling of all entries to [0, 1]. A constant matrix maps to zeros.
    '''

    matrix = np.asarray(matrix, dtype=float)
    if matrix.size == 0:
        return matrix.copy()
    low, high = matrix.min(), matrix.max()
    if high == low:
        return np.zeros_like(matrix)

    return (matrix - low) / (high - low)


def build_problem(matrices: ParamMatrices, lam: float, beta: float, p_success: float=0.9,
                  side: str='atc', budget: float=3, costs: Optional[np.ndarray]=None,
                  airline: Optional[str]=None) -> SequenceProblem:
    '''
    Sequencing instance from simulated parameter matrices.

    Every matrix is min-max normalized over its own entries. With zero
    participation and failure costs the acceptance utility is the
    normalized own-delay reduction `T`, independent of `p_success`.

    Parameters
    ----------
    matrices : ParamMatrices

    lam : float
        Penalty weight on the queue-jump cost, `lam >= 0`.

    beta : float
        Acceptance sensitivity, `beta >= 0`.

    p_success : float, default `0.9`
        Success probability of the pathfinding attempt.

    side : {'atc', 'dispatcher'}, default `'atc'`
        `atc`: `u = D_sys - lam * G_ATC`. `dispatcher`: `u = B_dep - lam * G_disp`.

    budget : float, default `3`
        Coordination budget.

    costs : np.ndarray, default `None`
        Offer costs `e`, default all ones.

    airline : str, default `None`
        Restrict the candidates to flights of this airline.

    Returns
    -------
    problem : SequenceProblem

    '''

    if side not in SIDES:
        raise DomainError(f"`side` must be one of {SIDES}. Got '{side}'.")
    if not 0 <= p_success <= 1:
        raise DomainError(f"`p_success` must be in [0, 1]. Got {p_success}.")
    weights = StakeholderWeights(lambda_atc=lam, lambda_disp=lam)

    utility = normalize(matrices.T)
    p = np.clip(acceptance_probability(utility, beta), P_CLIP, 1 - P_CLIP)
    if side == 'atc':
        u = normalize(matrices.D_sys) - weights.lambda_atc * normalize(matrices.G_ATC)
        raw_G = matrices.G_ATC.to_numpy(dtype=float)
    else:
        u = normalize(matrices.B_dep) - weights.lambda_disp * normalize(matrices.G_disp)
        raw_G = matrices.G_disp.to_numpy(dtype=float)

    if costs is None:
        e = np.ones_like(p)
    else:
        e = np.asarray(costs, dtype=float)
        if e.shape != p.shape:
            raise DomainError(f"`costs` must have shape {p.shape}. Got {e.shape}.")

    candidates = matrices.candidates
    if airline is not None:
        keep = [i for i, c in enumerate(candidates) if airline_of(c) == airline.upper()]
        if not keep:
            logging.warning(f"No candidate of airline '{airline}'.")
        candidates = [candidates[i] for i in keep]
        p, u, e, raw_G = p[keep], u[keep], e[keep], raw_G[keep]

    return SequenceProblem(
               candidates = candidates,
               p          = p,
               u          = u,
               e          = e,
               budget     = budget,
               side       = side,
               raw_G      = raw_G
           )


def _sequence_cost(problem: SequenceProblem, rows: Tuple[int, ...]) -> float:
    return sum(float(problem.e[row, k]) for k, row in enumerate(rows))


def _rows_of(problem: SequenceProblem,
             sequence: Union[OfferSequence, List[str], List[int]]) -> Tuple[int, ...]:

    if isinstance(sequence, OfferSequence):
        return tuple(sequence.rows)
    rows = []
    for item in sequence:
        if isinstance(item, str):
            if item not in problem.candidates:
                raise InfeasibleSequenceError(f"'{item}' is not a candidate of the problem.")
            rows.append(problem.candidates.index(item))
        else:
            rows.append(int(item))

    return tuple(rows)


def check_feasible(problem: SequenceProblem, rows: Tuple[int, ...]) -> None:
    '''
    Raise `InfeasibleSequenceError` if the offers repeat a flight, use more
    positions than available or exceed the budget.
    '''

    if any(not 0 <= row < problem.n_candidates for row in rows):
        raise InfeasibleSequenceError(f"Sequence {rows} has out of range rows.")
    if len(set(rows)) != len(rows):
        raise InfeasibleSequenceError(f"Sequence {rows} offers the role twice to a flight.")
    if len(rows) > problem.n_positions:
        raise InfeasibleSequenceError(
            f"Sequence of length {len(rows)} exceeds the {problem.n_positions} positions."
        )
    cost = _sequence_cost(problem, rows)
    if cost > problem.budget:
        raise InfeasibleSequenceError(
            f"Sequence cost {cost} exceeds the budget {problem.budget}."
        )


def _evaluate(problem: SequenceProblem, rows: Tuple[int, ...]) -> OfferSequence:

    reach = []
    survival = 1.0
    objective = 0.0
    for k, row in enumerate(rows):
        reach.append(survival)
        objective += survival * problem.p[row, k] * problem.u[row, k]
        survival *= 1 - problem.p[row, k]

    return OfferSequence(
               callsigns = tuple(problem.candidates[row] for row in rows),
               rows      = tuple(int(row) for row in rows),
               reach     = tuple(reach),
               objective = float(objective)
           )


def objective_value(problem: SequenceProblem,
                    sequence: Union[OfferSequence, List[str], List[int]]) -> float:
    '''
    Expected net benefit of an offer sequence. The empty sequence is worth 0.

    Parameters
    ----------
    problem : SequenceProblem

    sequence : OfferSequence, list of str, list of int
        Offers in position order, as callsigns or row indices.

    Returns
    -------
    value : float

    Raises
    ------
    InfeasibleSequenceError

    '''

    rows = _rows_of(problem, sequence)
    check_feasible(problem, rows)

    return _evaluate(problem, rows).objective


def _uniform_depth(problem: SequenceProblem) -> int:
    '''
    Number of offers affordable with a uniform cost, accumulated the same way
    `check_feasible` does.
    '''

    limit = min(problem.n_candidates, problem.n_positions)
    if limit == 0:
        return 0
    e = float(problem.e.flat[0])
    depth, total = 0, 0.0
    while depth < limit and total + e <= problem.budget:
        total += e
        depth += 1

    return depth


def _solve_subset_dp(problem: SequenceProblem) -> Tuple[int, ...]:
    '''
    Dynamic programming over the set of flights already offered. Position of
    the next offer equals the size of the set. Processed layer by layer.
    '''

    n = problem.n_candidates
    depth = _uniform_depth(problem)
    if depth == 0:
        return ()

    size = 1 << n
    masks = np.arange(size, dtype=np.int32)
    popcount = np.zeros(size, dtype=np.int8)
    for i in range(n):
        popcount += ((masks >> i) & 1).astype(np.int8)

    value = np.zeros(size)
    choice = np.full(size, -1, dtype=np.int8)
    p, u = problem.p, problem.u
    for d in range(depth - 1, -1, -1):
        layer = masks[popcount == d]
        best = np.full(layer.shape, -np.inf)
        arg = np.full(layer.shape, -1, dtype=np.int8)
        for i in range(n):
            free = ((layer >> i) & 1) == 0
            candidate = np.where(
                            free,
                            p[i, d] * u[i, d] + (1 - p[i, d]) * value[layer | (1 << i)],
                            -np.inf
                        )
            better = candidate > best
            best = np.where(better, candidate, best)
            arg = np.where(better, i, arg)
        extend = best > 0
        value[layer] = np.where(extend, best, 0.0)
        choice[layer] = np.where(extend, arg, -1)

    rows = []
    mask = 0
    while choice[mask] >= 0:
        row = int(choice[mask])
        rows.append(row)
        mask |= 1 << row

    return tuple(rows)


def _solve_branch_and_bound(problem: SequenceProblem) -> Tuple[int, ...]:
    '''
    Depth first search over ordered prefixes. A node is pruned when its value
    plus survival times the sum of the best remaining single-offer gains
    cannot beat the incumbent.
    '''

    n, K = problem.n_candidates, problem.n_positions
    gain = np.maximum(problem.p * problem.u, 0.0)
    best_gain = gain.max(axis=1) if K else np.zeros(n)
    best = {'value': 0.0, 'rows': ()}

    def explore(rows: tuple, used: frozenset, survival: float, value: float, cost: float):

        if value > best['value']:
            best['value'], best['rows'] = value, rows
        k = len(rows)
        if k >= K:
            return
        remaining = sorted((best_gain[i] for i in range(n) if i not in used), reverse=True)
        bound = value + survival * sum(remaining[:K - k])
        if bound <= best['value']:
            return
        for i in range(n):
            if i in used or cost + problem.e[i, k] > problem.budget:
                continue
            explore(
                rows + (i,),
                used | {i},
                survival * (1 - problem.p[i, k]),
                value + survival * problem.p[i, k] * problem.u[i, k],
                cost + float(problem.e[i, k])
            )

    explore((), frozenset(), 1.0, 0.0, 0.0)

    return best['rows']


def solve_exact(problem: SequenceProblem) -> SolveResult:
    '''
    Optimal offer sequence. Uniform offer costs with up to 24 candidates use
    dynamic programming over subsets; any other instance uses branch and
    bound. Offering stops as soon as no extension has positive expected
    value. Ties go to the lexicographically smallest (position, row) choice.

    Parameters
    ----------
    problem : SequenceProblem

    Returns
    -------
    result : SolveResult

    '''

    start = time.perf_counter()
    uniform = problem.e.size == 0 or np.all(problem.e == problem.e.flat[0])
    method = 'subset-dp' if uniform and problem.n_candidates <= MAX_DP_CANDIDATES else 'branch-and-bound'
    logging.info(
        f"Solving {problem.n_candidates} candidates x {problem.n_positions} positions "
        f"with '{method}'."
    )
    if method == 'subset-dp':
        rows = _solve_subset_dp(problem)
    else:
        rows = _solve_branch_and_bound(problem)
    sequence = _evaluate(problem, rows)
    runtime_ms = 1000 * (time.perf_counter() - start)

    return SolveResult(sequence=sequence, method=method, runtime_ms=runtime_ms)


def solve_bruteforce(problem: SequenceProblem) -> SolveResult:
    '''
    Exhaustive enumeration of every budget-feasible ordered prefix. Only for
    instances with at most 8 candidates.
    '''

    if problem.n_candidates > MAX_BRUTEFORCE_CANDIDATES:
        raise DomainError(
            f"`solve_bruteforce` handles at most {MAX_BRUTEFORCE_CANDIDATES} candidates. "
            f"Got {problem.n_candidates}."
        )

    start = time.perf_counter()
    best = _evaluate(problem, ())
    limit = min(problem.n_candidates, problem.n_positions)
    for length in range(1, limit + 1):
        for rows in itertools.permutations(range(problem.n_candidates), length):
            if _sequence_cost(problem, rows) > problem.budget:
                continue
            sequence = _evaluate(problem, rows)
            if sequence.objective > best.objective:
                best = sequence
    runtime_ms = 1000 * (time.perf_counter() - start)

    return SolveResult(sequence=best, method='bruteforce', runtime_ms=runtime_ms)


def _selected_cells(result: SolveResult) -> List[Tuple[int, int]]:
    return [(row, k) for k, row in enumerate(result.rows)]


def relative_selection_ratio(problem: SequenceProblem, result: SolveResult) -> Optional[float]:
    '''
    Mean acceptance probability of the selected (flight, position) cells
    divided by the mean over every cell. `None` if nothing was selected.
    '''

    cells = _selected_cells(result)
    if not cells or problem.p.size == 0:
        return None
    selected = np.mean([problem.p[row, k] for row, k in cells])

    return float(selected / problem.p.mean())


def selected_risk_metric(problem: SequenceProblem, result: SolveResult,
                         raw_G: Optional[np.ndarray]=None) -> Optional[float]:
    '''
    Mean un-normalized queue-jump cost of the selected cells. `None` if
    nothing was selected.

    Parameters
    ----------
    problem : SequenceProblem

    result : SolveResult

    raw_G : np.ndarray, default `None`
        Cost matrix. Default `problem.raw_G`.

    '''

    cells = _selected_cells(result)
    if not cells:
        return None
    if raw_G is None:
        raw_G = problem.raw_G
    if raw_G is None:
        raise DomainError('`raw_G` is required when the problem carries no cost matrix.')
    raw_G = np.asarray(raw_G, dtype=float)

    return float(np.mean([raw_G[row, k] for row, k in cells]))


def assignment_matrix(problem: SequenceProblem, result: SolveResult) -> pd.DataFrame:
    '''
    0/1 matrix with a 1 where a candidate (row) receives the offer at a
    position (column).
    '''

    matrix = np.zeros(problem.p.shape, dtype=int)
    for row, k in _selected_cells(result):
        matrix[row, k] = 1
    frame = pd.DataFrame(
                matrix,
                index   = problem.candidates,
                columns = list(range(1, problem.n_positions + 1))
            )
    frame.index.name = 'callsign'

    return frame


def _sweep_point(matrices: ParamMatrices, params: dict, side: str, p_success: float,
                 costs: Optional[np.ndarray], airline: Optional[str]) -> dict:

    problem = build_problem(
                  matrices  = matrices,
                  lam       = params['lambda'],
                  beta      = params['beta'],
                  p_success = p_success,
                  side      = side,
                  budget    = params['B'],
                  costs     = costs,
                  airline   = airline
              )
    result = solve_exact(problem)
    rp = relative_selection_ratio(problem, result)
    avg_g = selected_risk_metric(problem, result)

    return {
        'side'      : side,
        'B'         : params['B'],
        'lambda'    : params['lambda'],
        'beta'      : params['beta'],
        'objective' : result.objective,
        'sequence'  : ';'.join(result.callsigns),
        'Rp'        : np.nan if rp is None else rp,
        'avg_G'     : np.nan if avg_g is None else avg_g,
        'runtime_ms': result.runtime_ms,
    }


def sweep(matrices: ParamMatrices, grid: SweepGrid, side: str='atc',
          costs: Optional[np.ndarray]=None, airline: Optional[str]=None,
          n_jobs: int=1) -> pd.DataFrame:
    '''
    Solve one instance per grid point.

    Parameters
    ----------
    matrices : ParamMatrices

    grid : SweepGrid

    side : {'atc', 'dispatcher'}, default `'atc'`

    costs : np.ndarray, default `None`
        Offer costs, default all ones.

    airline : str, default `None`
        Dispatcher airline filter.

    n_jobs : int, default `1`
        Number of parallel jobs (joblib).

    Returns
    -------
    results : pandas.DataFrame
        Columns `side, B, lambda, beta, objective, sequence, Rp, avg_G,
        runtime_ms`, sorted by (B, lambda, beta). `Rp` and `avg_G` are NaN
        when no offer is made.

    '''

    if side not in SIDES:
        raise DomainError(f"`side` must be one of {SIDES}. Got '{side}'.")

    param_grid = list(ParameterGrid({
                     'B'     : list(grid.B_values),
                     'lambda': list(grid.lambda_values),
                     'beta'  : list(grid.beta_values),
                 }))

    logging.info(f"Number of sequencing instances ({side}): {len(param_grid)}")

    rows = Parallel(n_jobs=n_jobs)(
               delayed(_sweep_point)(matrices, params, side, grid.p_success, costs, airline)
               for params in tqdm.tqdm(param_grid, desc=f"loop {side} grid")
           )

    results = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    results = results.sort_values(by=['B', 'lambda', 'beta'], kind='mergesort')

    return results.reset_index(drop=True)


def lambda_sensitivity(results: pd.DataFrame) -> pd.DataFrame:
    '''
    Mean `avg_G` of the selected flights for each (side, lambda).
    '''
    table = results.groupby(['side', 'lambda'], as_index=False)['avg_G'].mean()
    return table.sort_values(by=['side', 'lambda']).reset_index(drop=True)


def beta_sensitivity(results: pd.DataFrame) -> pd.DataFrame:
    '''
    Mean `Rp` for each (side, beta).
    '''
    table = results.groupby(['side', 'beta'], as_index=False)['Rp'].mean()
    return table.sort_values(by=['side', 'beta']).reset_index(drop=True)
