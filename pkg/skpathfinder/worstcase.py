################################################################################
#                          skpathfinder.worstcase                              #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Union, List, Tuple, Optional
from dataclasses import dataclass, replace
import logging
import numpy as np
import pandas as pd
import tqdm
from scipy.special import expit
from sklearn.model_selection import ParameterGrid
from joblib import Parallel, delayed

from .exceptions import DomainError, DegenerateModelError, NoRootError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

NOISE_KINDS = ('gaussian', 'rademacher')
BISECTION_TOL = 1e-10
NEGATIVE_THRESHOLD = -1e-12


################################################################################
#                               PopulationModel                                #
################################################################################

@dataclass(frozen=True)
class PopulationModel():
    '''
    Population of `n` candidate flights split into two behavioural types.

    Parameters
    ----------
    n : int
        Number of flights receiving an offer.

    alpha : float
        Fraction of rejective flights.

    u_minus : float
        Utility of accepting for a rejective flight (usually negative).

    u_plus : float
        Utility of accepting for a receptive flight (usually positive).

    beta : float, default `1`
        Common logistic sensitivity.

    Notes
    -----
    With `u_minus < 0 < u_plus` a rejective flight declines with probability
    above 0.5 and a receptive one below 0.5. Only `u_minus <= u_plus` is
    enforced so that shifted populations remain valid.

    '''

    n: int
    alpha: float
    u_minus: float
    u_plus: float
    beta: float = 1.0

    def __post_init__(self) -> None:

        if int(self.n) != self.n or self.n < 1:
            raise DomainError(f"`n` must be an integer greater than 0. Got {self.n}.")
        if not 0 <= self.alpha <= 1:
            raise DomainError(f"`alpha` must be in [0, 1]. Got {self.alpha}.")
        if self.u_minus > self.u_plus:
            raise DomainError(
                f"`u_minus` must be lower or equal to `u_plus`. "
                f"Got {self.u_minus} and {self.u_plus}."
            )
        if self.beta < 0:
            raise DomainError(f"`beta` must be greater or equal to 0. Got {self.beta}.")


@dataclass(frozen=True)
class SelflessParams():
    '''
    Selflessness extension: utilities grow by `(1 - s) * gamma * r`.

    Parameters
    ----------
    s : float
        Selfishness, 1 means purely self-interested.

    gamma : float
        Sensitivity to the system rejection risk.

    r : float
        Perceived system rejection risk.

    '''

    s: float
    gamma: float
    r: float

    def __post_init__(self) -> None:

        if not 0 <= self.s <= 1:
            raise DomainError(f"`s` must be in [0, 1]. Got {self.s}.")
        if self.gamma < 0:
            raise DomainError(f"`gamma` must be greater or equal to 0. Got {self.gamma}.")
        if self.r < 0:
            raise DomainError(f"`r` must be greater or equal to 0. Got {self.r}.")

    @property
    def shift(self) -> float:
        return (1 - self.s) * self.gamma * self.r


@dataclass(frozen=True)
class NoiseSpec():
    '''
    Shared environmental noise added to every flight's utility.

    Parameters
    ----------
    kind : {'gaussian', 'rademacher'}
        `gaussian`: zero mean normal with standard deviation `theta`.
        `rademacher`: `+theta` or `-theta` with equal probability.

    theta : float
        Noise intensity.

    n_nodes : int, default `64`
        Gauss-Hermite nodes used for the gaussian expectation.

    '''

    kind: str
    theta: float
    n_nodes: int = 64

    def __post_init__(self) -> None:

        if self.kind not in NOISE_KINDS:
            raise DomainError(f"`kind` must be one of {NOISE_KINDS}. Got '{self.kind}'.")
        if self.theta < 0:
            raise DomainError(f"`theta` must be greater or equal to 0. Got {self.theta}.")
        if self.n_nodes < 1:
            raise DomainError(f"`n_nodes` must be greater than 0. Got {self.n_nodes}.")


@dataclass(frozen=True)
class Tolerance():
    '''
    Maximum tolerable probability `delta` that every flight rejects.
    '''

    delta: float

    def __post_init__(self) -> None:

        if not 0 < self.delta < 1:
            raise DomainError(f"`delta` must be in (0, 1). Got {self.delta}.")


def rejective_probability(pop: PopulationModel) -> float:
    '''
    Probability that a rejective flight declines the offer.
    '''
    return float(expit(-pop.beta * pop.u_minus))


def receptive_probability(pop: PopulationModel) -> float:
    '''
    Probability that a receptive flight declines the offer.
    '''
    return float(expit(-pop.beta * pop.u_plus))


def w_baseline(pop: PopulationModel) -> float:
    '''
    Probability that all `n` flights reject, when each flight is rejective with
    probability `alpha` independently.

    Returns
    -------
    w : float
        `(alpha * P_rej + (1 - alpha) * P_rec) ** n`

    '''

    p_rej = rejective_probability(pop)
    p_rec = receptive_probability(pop)

    return (pop.alpha * p_rej + (1 - pop.alpha) * p_rec) ** pop.n


def alpha_star(pop: PopulationModel, tol: Tolerance) -> Tuple[float, bool]:
    '''
    Largest rejective fraction keeping the collective rejection probability at
    or below `tol.delta`.

    Parameters
    ----------
    pop : PopulationModel
        `pop.alpha` is ignored.

    tol : Tolerance

    Returns
    -------
    alpha : float
        `(delta ** (1 / n) - P_rec) / (P_rej - P_rec)`, clamped to [0, 1].

    clamped : bool
        `True` if the unclamped value was outside [0, 1].

    '''

    p_rej = rejective_probability(pop)
    p_rec = receptive_probability(pop)

    if p_rej == p_rec:
        raise DegenerateModelError(
            'Rejective and receptive flights reject with the same probability, '
            '`alpha_star` is undefined.'
        )

    alpha = (tol.delta ** (1 / pop.n) - p_rec) / (p_rej - p_rec)

    if 0 <= alpha <= 1:
        return float(alpha), False

    logging.warning(f"Tipping point {alpha:.6g} outside [0, 1], clamped.")

    return float(min(max(alpha, 0.0), 1.0)), True


def selfless_population(pop: PopulationModel, selfless: SelflessParams) -> PopulationModel:
    '''
    Population with both utilities shifted by `(1 - s) * gamma * r`.
    '''

    shift = selfless.shift

    return replace(pop, u_minus=pop.u_minus + shift, u_plus=pop.u_plus + shift)


def w_selfless(pop: PopulationModel, selfless: SelflessParams) -> float:
    '''
    Collective rejection probability when flights value system-level risk.
    '''
    return w_baseline(selfless_population(pop, selfless))


def _noise_nodes(noise: NoiseSpec) -> Tuple[np.ndarray, np.ndarray]:
    '''
    Support points and weights of the noise distribution.
    '''

    if noise.kind == 'rademacher':
        return np.array([noise.theta, -noise.theta]), np.array([0.5, 0.5])

    t, w = np.polynomial.hermite.hermgauss(noise.n_nodes)

    return np.sqrt(2.0) * noise.theta * t, w / np.sqrt(np.pi)


def _w_noise_values(alphas: np.ndarray, pop: PopulationModel,
                    xi: np.ndarray, weights: np.ndarray) -> np.ndarray:
    '''
    Expectation over shared noise of the mixture power, vectorised over alpha.
    The noise realization is common to all flights, so the expectation sits
    outside the n-th power.
    '''

    p_rej = expit(-pop.beta * (pop.u_minus + xi))
    p_rec = expit(-pop.beta * (pop.u_plus + xi))
    alphas = np.asarray(alphas, dtype=float)[:, None]
    mixture = alphas * p_rej[None, :] + (1 - alphas) * p_rec[None, :]

    return (mixture ** pop.n) @ weights


def w_noise(pop: PopulationModel, noise: NoiseSpec) -> float:
    '''
    Collective rejection probability under shared environmental noise.

    Parameters
    ----------
    pop : PopulationModel

    noise : NoiseSpec
        Rademacher noise is averaged exactly over its two points. Gaussian
        noise uses Gauss-Hermite quadrature with `noise.n_nodes` nodes.

    Returns
    -------
    w : float

    '''

    if noise.theta == 0:
        return w_baseline(pop)

    xi, weights = _noise_nodes(noise)

    return float(_w_noise_values(np.array([pop.alpha]), pop, xi, weights)[0])


def _theta_step(theta: float) -> float:
    return max(1e-5, 1e-5 * theta)


def _grad_theta_values(alphas: np.ndarray, pop: PopulationModel,
                       noise: NoiseSpec) -> Tuple[np.ndarray, bool]:

    theta = noise.theta
    if theta == 0:
        # Both noise laws are symmetric, W is even in theta: flat start.
        return np.zeros(len(alphas)), True

    h = _theta_step(theta)
    w_up = _w_noise_values(alphas, pop, *_noise_nodes(replace(noise, theta=theta + h)))

    if theta < h:
        w_here = _w_noise_values(alphas, pop, *_noise_nodes(noise))
        return (w_up - w_here) / h, True

    w_down = _w_noise_values(alphas, pop, *_noise_nodes(replace(noise, theta=theta - h)))

    return (w_up - w_down) / (2 * h), False


def grad_w_theta(pop: PopulationModel, noise: NoiseSpec) -> Tuple[float, bool]:
    '''
    Sensitivity of the collective rejection probability to the noise intensity.

    Central finite difference with step `h = max(1e-5, 1e-5 * theta)`. At
    `theta = 0` the derivative is 0 (W is even in theta). For
    `0 < theta < h` a forward difference is used.

    Returns
    -------
    derivative : float

    one_sided : bool
        `True` when the central difference could not be used.

    '''

    values, one_sided = _grad_theta_values(np.array([pop.alpha]), pop, noise)
    if noise.theta == 0:
        logging.warning(
            "`theta` is 0: returning the one-sided derivative 0 (flat start of W in theta)."
        )

    return float(values[0]), one_sided


def _w_at(pop: PopulationModel, noise: NoiseSpec, alpha: float) -> float:
    return w_noise(replace(pop, alpha=alpha), noise)


def alpha_star_noise(pop: PopulationModel, noise: NoiseSpec, tol: Tolerance) -> float:
    '''
    Tipping point under shared noise, found by bisection on alpha (W is
    increasing in alpha) until `|W - delta| <= 1e-10`.

    Raises
    ------
    NoRootError
        If `delta` is not between `W(0, theta)` and `W(1, theta)`.

    '''

    w_low = _w_at(pop, noise, 0.0)
    w_high = _w_at(pop, noise, 1.0)

    if not w_low <= tol.delta <= w_high:
        raise NoRootError(w_low=w_low, w_high=w_high, delta=tol.delta)
    if abs(w_low - tol.delta) <= BISECTION_TOL:
        return 0.0
    if abs(w_high - tol.delta) <= BISECTION_TOL:
        return 1.0

    lo, hi = 0.0, 1.0
    mid = 0.5
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        w_mid = _w_at(pop, noise, mid)
        if abs(w_mid - tol.delta) <= BISECTION_TOL:
            break
        if w_mid < tol.delta:
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16:
            break

    return mid


def d_alpha_d_theta(pop: PopulationModel, noise: NoiseSpec, tol: Tolerance) -> float:
    '''
    Sensitivity of the tipping point to the noise intensity, by the implicit
    function theorem: `-(dW/dtheta) / (dW/dalpha)` at `alpha*(theta)`.
    '''

    alpha = alpha_star_noise(pop, noise, tol)
    at_root = replace(pop, alpha=alpha)

    grad_theta, _ = grad_w_theta(at_root, noise)

    # The mixture power is a polynomial in alpha, so the stencil may leave [0, 1].
    h = max(1e-5, 1e-5 * alpha)
    w_pair = _w_noise_values(np.array([alpha - h, alpha + h]), pop, *_noise_nodes(noise))
    grad_alpha = (w_pair[1] - w_pair[0]) / (2 * h)

    if grad_alpha == 0:
        raise DegenerateModelError('`dW/dalpha` is zero at the tipping point.')

    return -grad_theta / grad_alpha


def gradient_map(pop: PopulationModel, alphas: Union[list, np.ndarray],
                 thetas: Union[list, np.ndarray], kind: str,
                 n_nodes: int=64) -> pd.DataFrame:
    '''
    `dW/dtheta` over an (alpha, theta) grid.

    Parameters
    ----------
    pop : PopulationModel
        `pop.alpha` is ignored.

    alphas, thetas : list, np.ndarray
        Grid values.

    kind : {'gaussian', 'rademacher'}

    n_nodes : int, default `64`

    Returns
    -------
    gradients : pandas.DataFrame
        Columns `alpha`, `theta`, `dW_dtheta`; `theta` outermost.

    '''

    alphas = np.asarray(alphas, dtype=float)
    frames = []
    for theta in thetas:
        values, _ = _grad_theta_values(
                        alphas, pop, NoiseSpec(kind=kind, theta=float(theta), n_nodes=n_nodes)
                    )
        frames.append(pd.DataFrame({
                          'alpha'    : alphas,
                          'theta'    : float(theta),
                          'dW_dtheta': values
                      }))

    if not frames:
        return pd.DataFrame(columns=['alpha', 'theta', 'dW_dtheta'])

    return pd.concat(frames, ignore_index=True)


def negative_gradient_fraction(n: int, abs_u: float, kind: str,
                               alphas: Optional[Union[list, np.ndarray]]=None,
                               thetas: Optional[Union[list, np.ndarray]]=None,
                               beta: float=1.0, n_nodes: int=64) -> float:
    '''
    Fraction of (alpha, theta) cells where more noise lowers the collective
    rejection probability (`dW/dtheta < -1e-12`).

    Parameters
    ----------
    n : int
        Number of flights.

    abs_u : float
        Utilities are `-abs_u` (rejective) and `+abs_u` (receptive).

    kind : {'gaussian', 'rademacher'}

    alphas : list, np.ndarray, default `None`
        Defaults to 101 points over [0, 1].

    thetas : list, np.ndarray, default `None`
        Defaults to 101 points over [0, 10].

    beta : float, default `1`

    n_nodes : int, default `64`

    Returns
    -------
    fraction : float

    '''

    if alphas is None:
        alphas = np.linspace(0, 1, 101)
    if thetas is None:
        thetas = np.linspace(0, 10, 101)
    if len(alphas) == 0 or len(thetas) == 0:
        raise DomainError('`alphas` and `thetas` must be non-empty.')

    pop = PopulationModel(n=n, alpha=0.0, u_minus=-abs_u, u_plus=abs_u, beta=beta)
    gradients = gradient_map(pop, alphas, thetas, kind, n_nodes=n_nodes)

    return float(np.mean(gradients['dW_dtheta'].to_numpy() < NEGATIVE_THRESHOLD))


def gradient_fraction_table(n_values: List[int], abs_u_values: List[float],
                            kinds: List[str]=['gaussian', 'rademacher'],
                            beta: float=1.0,
                            alphas: Optional[Union[list, np.ndarray]]=None,
                            thetas: Optional[Union[list, np.ndarray]]=None,
                            n_jobs: int=1) -> pd.DataFrame:
    '''
    Negative gradient fraction for every combination of population size,
    utility magnitude and noise kind.

    Returns
    -------
    results : pandas.DataFrame
        Columns `n`, `abs_u`, `kind`, `fraction`, sorted by `n`, `abs_u`,
        `kind`.

    '''

    param_grid = list(ParameterGrid({
                     'n'    : list(n_values),
                     'abs_u': list(abs_u_values),
                     'kind' : list(kinds)
                 }))

    logging.info(f"Number of gradient maps computed: {len(param_grid)}")

    fractions = Parallel(n_jobs=n_jobs)(
                    delayed(negative_gradient_fraction)(
                        n      = params['n'],
                        abs_u  = params['abs_u'],
                        kind   = params['kind'],
                        alphas = alphas,
                        thetas = thetas,
                        beta   = beta
                    )
                    for params in tqdm.tqdm(param_grid, desc='loop gradient maps')
                )

    results = pd.DataFrame({
                  'n'       : [params['n'] for params in param_grid],
                  'abs_u'   : [params['abs_u'] for params in param_grid],
                  'kind'    : [params['kind'] for params in param_grid],
                  'fraction': fractions
              }, columns=['n', 'abs_u', 'kind', 'fraction'])

    return results.sort_values(by=['n', 'abs_u', 'kind'], kind='mergesort').reset_index(drop=True)


def w_curve(pop: PopulationModel, alphas: Union[list, np.ndarray],
            selfless: Optional[SelflessParams]=None,
            noise: Optional[NoiseSpec]=None) -> pd.DataFrame:
    '''
    Collective rejection probability as a function of the rejective fraction.

    Returns
    -------
    curve : pandas.DataFrame
        Columns `alpha`, `W`.

    '''

    if selfless is not None:
        pop = selfless_population(pop, selfless)

    alphas = np.asarray(alphas, dtype=float)
    if noise is None or noise.theta == 0:
        values = [w_baseline(replace(pop, alpha=float(a))) for a in alphas]
    else:
        values = _w_noise_values(alphas, pop, *_noise_nodes(noise))

    return pd.DataFrame({'alpha': alphas, 'W': np.asarray(values, dtype=float)})


def alpha_star_curve(pop: PopulationModel, deltas: Union[list, np.ndarray],
                     selfless: Optional[SelflessParams]=None) -> pd.DataFrame:
    '''
    Tipping point as a function of the tolerance `delta`.

    Returns
    -------
    curve : pandas.DataFrame
        Columns `delta`, `alpha_star`, `clamped`.

    '''

    if selfless is not None:
        pop = selfless_population(pop, selfless)

    rows = []
    for delta in deltas:
        alpha, clamped = alpha_star(pop, Tolerance(float(delta)))
        rows.append([float(delta), alpha, clamped])

    return pd.DataFrame(rows, columns=['delta', 'alpha_star', 'clamped'])


def rejection_vs_risk(pop: PopulationModel, s: float, gamma: float,
                      r_values: Union[list, np.ndarray]) -> pd.DataFrame:
    '''
    Rejection probability of each behavioural type as the perceived system
    rejection risk grows.

    Returns
    -------
    curve : pandas.DataFrame
        Columns `r`, `p_reject_rejective`, `p_reject_receptive`.

    '''

    rows = []
    for r in r_values:
        shifted = selfless_population(pop, SelflessParams(s=s, gamma=gamma, r=float(r)))
        rows.append([float(r), rejective_probability(shifted), receptive_probability(shifted)])

    return pd.DataFrame(rows, columns=['r', 'p_reject_rejective', 'p_reject_receptive'])
