################################################################################
#                            skpathfinder.config                               #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Dict, List, Literal, Optional, Union
import os
import json
import hashlib
import logging
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from pydantic import field_validator, model_validator

from .exceptions import ConfigError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

WAKE_CLASSES = ('S', 'M', 'H')
CONFIG_ENV_VAR = 'PATHFINDER_CONFIG'
DEFAULT_CONFIG_PATH = os.path.join(os.path.dirname(__file__), 'data', 'default_config.yaml')


def _default_separation() -> Dict[str, Dict[str, float]]:
    return {
        'S': {'S': 60.0, 'M': 60.0, 'H': 60.0},
        'M': {'S': 90.0, 'M': 60.0, 'H': 60.0},
        'H': {'S': 120.0, 'M': 120.0, 'H': 120.0},
    }


################################################################################
#                                  SimConfig                                   #
################################################################################

class SimConfig(BaseModel):
    '''
    Parameterization of the departure simulator.

    Parameters
    ----------
    runways : list of str
        Runway identifiers. Ties in runway assignment go to the smallest
        identifier.

    fixes : dict
        Fix identifier -> `True` if open at t = 0.

    separation_seconds : dict
        Wake separation `s[lead][trail]` in seconds.

    roll_buffer_r : float
        Seconds added to every wake separation.

    capacity_scale : dict
        Number of open fixes -> headway multiplier `sigma`. Must cover every
        count from 1 to `len(fixes)`, be non-increasing and equal 1 when all
        fixes are open. No open fix blocks departures.

    region_fix : dict
        Destination region -> preferred fix.

    runway_fix : dict
        Runway -> preferred fix, used when the destination fix is closed.

    fix_restrictions : dict
        Destination region -> the only fixes its flights can use. While all of
        them are closed these flights are held in the queue. Regions not
        listed can use any open fix.

    pathfinder_fixes : list of str, default `None`
        Fixes opened by a successful pathfinder. `None` means every fix that
        is closed at t = 0.

    taxi_distribution : {'lognormal', 'fixed'}
        `lognormal`: median `taxi_median`, log-scale `taxi_log_scale`,
        truncated to [`taxi_min`, `taxi_max`]. `fixed`: always `taxi_median`.

    cancel_threshold : float
        Minutes in queue after which a flight cancels.

    wait_cap : float
        Upper limit of each flight's wait in the delay metrics.

    pathfinder_min_spacing : float, default `None`
        Minimum minutes between the previous takeoff and the pathfinder's.

    weather_clear_time : float, default `None`
        Time at which closed fixes reopen without intervention.

    offer_start, decline_overhead, accept_overhead : float
        Offer timing (minutes): an offer accepted at position `k` designates
        the pathfinder at `offer_start + (k - 1) * decline_overhead + accept_overhead`.

    kappa_atc : float
        ATC cost per position jumped by the pathfinder.

    overtake_weight, same_airline_weight : float
        Dispatcher cost of each overtaken flight, the second one applying to
        flights of the pathfinder's airline.

    rng_seed : int
        Root seed of every per-flight random stream.

    '''

    model_config = ConfigDict(extra='forbid', frozen=True)

    runways: List[str] = Field(default_factory=lambda: ['4L', '31L'])
    fixes: Dict[str, bool] = Field(
                                 default_factory=lambda: {'BETTE': False, 'MERIT': False, 'DIXIE': True}
                             )
    separation_seconds: Dict[str, Dict[str, float]] = Field(default_factory=_default_separation)
    roll_buffer_r: float = 10.0
    capacity_scale: Dict[int, float] = Field(default_factory=lambda: {3: 1.0, 2: 1.25, 1: 2.0})
    region_fix: Dict[str, str] = Field(
                                     default_factory=lambda: {
                                         'europe-east': 'BETTE',
                                         'europe-west': 'MERIT',
                                         'domestic'   : 'DIXIE'
                                     }
                                 )
    runway_fix: Dict[str, str] = Field(default_factory=lambda: {'4L': 'MERIT', '31L': 'DIXIE'})
    fix_restrictions: Dict[str, List[str]] = Field(
                                                default_factory=lambda: {'europe-east': ['BETTE', 'MERIT']}
                                            )
    pathfinder_fixes: Optional[List[str]] = None
    taxi_distribution: Literal['lognormal', 'fixed'] = 'lognormal'
    taxi_median: float = 15.0
    taxi_log_scale: float = 0.3
    taxi_min: float = 5.0
    taxi_max: float = 60.0
    cancel_threshold: float = 180.0
    wait_cap: float = 180.0
    pathfinder_min_spacing: Optional[float] = None
    weather_clear_time: Optional[float] = None
    offer_start: float = 25.0
    decline_overhead: float = 1.5
    accept_overhead: float = 2.0
    kappa_atc: float = 1.0
    overtake_weight: float = 1.0
    same_airline_weight: float = 2.0
    rng_seed: int = 2025

    @field_validator('runways')
    @classmethod
    def _check_runways(cls, value: List[str]) -> List[str]:
        if not value:
            raise ValueError('at least one runway is required')
        if len(set(value)) != len(value):
            raise ValueError(f"duplicated runway identifiers: {value}")
        return value

    @field_validator('separation_seconds')
    @classmethod
    def _check_separation(cls, value: Dict[str, Dict[str, float]]) -> Dict[str, Dict[str, float]]:
        for lead, row in value.items():
            for trail, seconds in row.items():
                if lead not in WAKE_CLASSES or trail not in WAKE_CLASSES:
                    raise ValueError(f"unknown wake class in separation table: {lead}->{trail}")
                if not seconds > 0:
                    raise ValueError(f"separation {lead}->{trail} must be > 0, got {seconds}")
        return value

    @field_validator('rng_seed')
    @classmethod
    def _check_seed(cls, value: int) -> int:
        if not 0 <= value < 2**64:
            raise ValueError(f"`rng_seed` must be an unsigned 64-bit integer, got {value}")
        return value

    @model_validator(mode='after')
    def _check_consistency(self) -> 'SimConfig':

        if not self.fixes:
            raise ValueError('at least one fix is required')

        n_fixes = len(self.fixes)
        counts = list(range(1, n_fixes + 1))
        missing = [k for k in counts if k not in self.capacity_scale]
        if missing:
            raise ValueError(f"`capacity_scale` has no entry for open fix counts {missing}")
        scales = [self.capacity_scale[k] for k in counts]
        if any(s < 1 for s in scales):
            raise ValueError('`capacity_scale` values must be >= 1')
        if any(later > earlier for earlier, later in zip(scales, scales[1:])):
            raise ValueError('`capacity_scale` must be non-increasing in the open fix count')
        if self.capacity_scale[n_fixes] != 1:
            raise ValueError('`capacity_scale` must be 1 when every fix is open')

        for region, fix in self.region_fix.items():
            if fix not in self.fixes:
                raise ValueError(f"`region_fix` maps '{region}' to unknown fix '{fix}'")
        for runway, fix in self.runway_fix.items():
            if runway not in self.runways:
                raise ValueError(f"`runway_fix` refers to unknown runway '{runway}'")
            if fix not in self.fixes:
                raise ValueError(f"`runway_fix` maps '{runway}' to unknown fix '{fix}'")
        for region, allowed in self.fix_restrictions.items():
            if not allowed:
                raise ValueError(f"`fix_restrictions` of '{region}' must not be empty")
            unknown = [f for f in allowed if f not in self.fixes]
            if unknown:
                raise ValueError(f"`fix_restrictions` of '{region}' contains unknown fixes {unknown}")
        if self.pathfinder_fixes is not None:
            if not self.pathfinder_fixes:
                raise ValueError('`pathfinder_fixes` must not be empty')
            unknown = [f for f in self.pathfinder_fixes if f not in self.fixes]
            if unknown:
                raise ValueError(f"`pathfinder_fixes` contains unknown fixes {unknown}")

        if not 0 < self.taxi_min <= self.taxi_median <= self.taxi_max:
            raise ValueError('taxi bounds must satisfy 0 < taxi_min <= taxi_median <= taxi_max')
        if self.taxi_log_scale < 0:
            raise ValueError('`taxi_log_scale` must be >= 0')
        for field in ('cancel_threshold', 'wait_cap'):
            if not getattr(self, field) > 0:
                raise ValueError(f"`{field}` must be > 0")
        for field in ('roll_buffer_r', 'offer_start', 'decline_overhead', 'accept_overhead',
                      'kappa_atc', 'overtake_weight', 'same_airline_weight'):
            if getattr(self, field) < 0:
                raise ValueError(f"`{field}` must be >= 0")
        if self.pathfinder_min_spacing is not None and self.pathfinder_min_spacing < 0:
            raise ValueError('`pathfinder_min_spacing` must be >= 0')

        return self

    @property
    def plan_fixes(self) -> List[str]:
        '''
        Fixes opened by a pathfinder when the plan does not name them.
        '''
        if self.pathfinder_fixes is not None:
            return list(self.pathfinder_fixes)
        return [fix for fix, is_open in self.fixes.items() if not is_open]

    def config_hash(self) -> str:
        '''
        sha256 of the canonical JSON form of the configuration.
        '''
        payload = json.dumps(self.model_dump(mode='json'), sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()


def load_config(path: Union[str, os.PathLike, None]=None) -> SimConfig:
    '''
    Read a YAML configuration document.

    Parameters
    ----------
    path : str, default `None`
        Path of the YAML file. If `None`, the `PATHFINDER_CONFIG` environment
        variable is used, and if it is not set the bundled default.

    Returns
    -------
    config : SimConfig

    '''

    if path is None:
        path = os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH

    try:
        with open(path, 'r', encoding='utf-8') as handle:
            document = yaml.safe_load(handle)
    except OSError as exc:
        raise ConfigError(f"Cannot read config file '{path}': {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"Config file '{path}' is not valid YAML: {exc}") from exc

    if document is None:
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"Config file '{path}' must be a key/value mapping.")

    try:
        config = SimConfig(**document)
    except ValidationError as exc:
        raise ConfigError(f"Invalid config file '{path}':\n{exc}") from exc

    logging.info(f"Simulator config loaded from '{path}'.")

    return config
