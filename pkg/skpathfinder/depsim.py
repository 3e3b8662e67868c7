################################################################################
#                            skpathfinder.depsim                               #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Union, Dict, List, Tuple, Optional, NamedTuple
from dataclasses import dataclass, field
import os
import math
import zlib
import logging
import numpy as np
import pandas as pd
import simpy
import tqdm
from joblib import Parallel, delayed

from .config import SimConfig, WAKE_CLASSES
from .exceptions import ConfigError, DomainError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

# Rank of simultaneous events in the log.
EVENT_RANK = {
    'fix-open'  : 0,
    'pathfinder': 1,
    'takeoff'   : 2,
    'cancel'    : 3,
    'join'      : 4,
}
TRIGGERS = ('takeoff', 'accept')
MATRIX_NAMES = ('T', 'B_dep', 'D_sys', 'G_ATC', 'G_disp')


################################################################################
#                                FlightRecord                                  #
################################################################################

@dataclass(frozen=True)
class FlightRecord():
    '''
    One scheduled departure.

    Parameters
    ----------
    callsign : str

    aircraft : str
        ICAO aircraft type.

    destination : str
        Destination airport code.

    region : str
        Destination region tag, used to pick the preferred departure fix.

    sched_dep : float
        Scheduled push time, minutes from t = 0.

    block_minutes : float
        Scheduled block time in minutes.

    wake : {'S', 'M', 'H'}
        Wake category.

    candidate : bool
        Whether the flight can be offered the pathfinder role.

    airline : str

    sched_arr_local : str, default `''`
        Scheduled arrival in destination local time (informational).

    '''

    callsign: str
    aircraft: str
    destination: str
    region: str
    sched_dep: float
    block_minutes: float
    wake: str
    candidate: bool
    airline: str
    sched_arr_local: str = ''

    def __post_init__(self) -> None:

        if self.sched_dep < 0:
            raise DomainError(f"`sched_dep` must be >= 0. Got {self.sched_dep} ({self.callsign}).")
        if not self.block_minutes > 0:
            raise DomainError(
                f"`block_minutes` must be > 0. Got {self.block_minutes} ({self.callsign})."
            )
        if self.wake not in WAKE_CLASSES:
            raise DomainError(
                f"`wake` must be one of {WAKE_CLASSES}. Got '{self.wake}' ({self.callsign})."
            )


@dataclass(frozen=True)
class PathfinderPlan():
    '''
    Pathfinder intervention: the flight that accepts, the offer position at
    which it accepts and the fixes its departure reopens.

    Parameters
    ----------
    flight : str
        Callsign of the accepting flight. Must be a candidate.

    offer_position : int, default `1`
        Position `k` of the accepted offer; `k - 1` offers were declined before.

    decline_overhead : float, default `3`
        Minutes consumed by each declined offer.

    accept_overhead : float, default `2`
        Minutes between the accepted offer and the designation.

    fixes_to_open : tuple of str, default `('BETTE', 'MERIT')`
        Fixes opened by the pathfinder. The first one is the fix it flies.

    trigger : {'takeoff', 'accept'}, default `'takeoff'`
        Event that opens the fixes.

    offer_start : float, default `0`
        Time of the first offer.

    '''

    flight: str
    offer_position: int = 1
    decline_overhead: float = 3.0
    accept_overhead: float = 2.0
    fixes_to_open: Tuple[str, ...] = ('BETTE', 'MERIT')
    trigger: str = 'takeoff'
    offer_start: float = 0.0

    def __post_init__(self) -> None:

        if int(self.offer_position) != self.offer_position or self.offer_position < 1:
            raise DomainError(
                f"`offer_position` must be an integer >= 1. Got {self.offer_position}."
            )
        if not self.fixes_to_open:
            raise DomainError('`fixes_to_open` must not be empty.')
        if self.trigger not in TRIGGERS:
            raise DomainError(f"`trigger` must be one of {TRIGGERS}. Got '{self.trigger}'.")
        for name in ('decline_overhead', 'accept_overhead', 'offer_start'):
            if getattr(self, name) < 0:
                raise DomainError(f"`{name}` must be >= 0. Got {getattr(self, name)}.")

    @classmethod
    def from_config(cls, flight: str, offer_position: int,
                    config: SimConfig) -> 'PathfinderPlan':
        '''
        Plan whose timing and fixes come from the simulator configuration.
        '''
        return cls(
                   flight           = flight,
                   offer_position   = offer_position,
                   decline_overhead = config.decline_overhead,
                   accept_overhead  = config.accept_overhead,
                   fixes_to_open    = tuple(config.plan_fixes),
                   offer_start      = config.offer_start
               )

    @property
    def designation_time(self) -> float:
        return (
            self.offer_start
            + (self.offer_position - 1) * self.decline_overhead
            + self.accept_overhead
        )


class SimEvent(NamedTuple):
    t: float
    kind: str
    subject: str
    detail: str

    def sort_key(self) -> tuple:
        return (self.t, EVENT_RANK[self.kind], self.subject)

    def to_line(self) -> str:
        return f"{self.t:.12g},{self.kind},{self.subject},{self.detail}"


@dataclass
class SimOutcome():
    '''
    Result of one simulation run.

    Attributes
    ----------
    flights : pandas.DataFrame
        Indexed by callsign, in schedule file order. Columns `taxi_time`,
        `join_time`, `takeoff_time` (NaN if cancelled), `cancelled`, `runway`,
        `fix`, `wait` (minutes in queue, capped at `wait_cap`).

    events : list of SimEvent
        Totally ordered by (time, kind rank, subject).

    plan_feasible : bool
        `False` if the plan could not be applied. The run then has no
        intervention.

    pathfinder : str
        Callsign of the designated pathfinder, `None` if there is none.

    '''

    flights: pd.DataFrame
    events: List[SimEvent]
    plan_feasible: bool = True
    pathfinder: Optional[str] = None

    def event_log(self) -> str:
        '''
        Event log as `t,kind,subject,detail` lines.
        '''
        return ''.join(event.to_line() + '\n' for event in self.events)

    def total_wait(self) -> float:
        return float(self.flights['wait'].sum())


@dataclass
class PairedDelta():
    '''
    Metrics of a pathfinder plan against the baseline run.

    Attributes
    ----------
    delta_d_sys : float
        Total capped wait of the baseline minus that of the plan run.

    T : float
        Reduction of the pathfinder's own wait.

    B_dep : float
        Airline benefit, equal to `T`.

    G_ATC : float
        `kappa_atc` times the number of positions jumped.

    G_disp : float
        Weighted number of overtaken flights.

    feasible : bool

    overtaken : list of str

    '''

    delta_d_sys: float
    T: float
    B_dep: float
    G_ATC: float
    G_disp: float
    feasible: bool = True
    overtaken: List[str] = field(default_factory=list)

    @property
    def positions_jumped(self) -> int:
        return len(self.overtaken)


def base_headway(lead: str, trail: str, config: SimConfig) -> float:
    '''
    Minimum spacing in minutes between a takeoff of wake class `lead` and a
    following takeoff of class `trail`: `(s[lead][trail] + r) / 60`.

    Raises
    ------
    ConfigError
        If the separation table has no entry for the pair.

    '''

    for wake in (lead, trail):
        if wake not in WAKE_CLASSES:
            raise DomainError(f"`wake` must be one of {WAKE_CLASSES}. Got '{wake}'.")
    try:
        seconds = config.separation_seconds[lead][trail]
    except KeyError as exc:
        raise ConfigError(f"Separation table has no entry for {lead} -> {trail}.") from exc

    return (seconds + config.roll_buffer_r) / 60


def effective_headway(h_base: float, open_fix_count: int, config: SimConfig) -> float:
    '''
    Headway scaled by the capacity factor of the number of open fixes. With no
    open fix departures are blocked and the headway is infinite.
    '''

    if not 0 <= open_fix_count <= len(config.fixes):
        raise ConfigError(
            f"`open_fix_count` must be in [0, {len(config.fixes)}]. Got {open_fix_count}."
        )
    if open_fix_count == 0:
        return math.inf

    return h_base * config.capacity_scale[open_fix_count]


def taxi_time(callsign: str, config: SimConfig) -> float:
    '''
    Taxi time of a flight, drawn from its own random stream keyed by
    (`rng_seed`, callsign). The stream does not depend on any other flight.
    '''

    if config.taxi_distribution == 'fixed':
        return float(config.taxi_median)

    seed_seq = np.random.SeedSequence(
                   entropy   = config.rng_seed,
                   spawn_key = (zlib.crc32(callsign.encode('utf-8')),)
               )
    rng = np.random.default_rng(seed_seq)
    mu = math.log(config.taxi_median)
    while True:
        draw = float(rng.lognormal(mean=mu, sigma=config.taxi_log_scale))
        if config.taxi_min <= draw <= config.taxi_max:
            return draw


@dataclass(eq=False)
class _FlightState():
    record: FlightRecord
    taxi: float
    departed: simpy.Event
    join_time: Optional[float] = None
    takeoff_time: Optional[float] = None
    cancel_time: Optional[float] = None
    runway: Optional[str] = None
    fix: Optional[str] = None
    pathfinder: bool = False


@dataclass(eq=False)
class _RunwayState():
    name: str
    queue: list = field(default_factory=list)
    last_takeoff: Optional[float] = None
    last_wake: Optional[str] = None
    wakeup: Optional[simpy.Event] = None


################################################################################
#                             DepartureSimulator                               #
################################################################################

class DepartureSimulator():
    '''
    Process based simulation of departures from a multi-runway airport whose
    departure fixes may be closed by weather.

    Each flight pushes at its scheduled time, taxis, picks a runway (earliest
    predicted departure) and a fix (destination preferred, then runway
    preferred, then round-robin over open fixes) and joins the runway queue.
    Flights of a region listed in `fix_restrictions` only use the listed
    fixes and stay in the queue, held, while all of them are closed. Each
    runway releases its first queued flight that can depart once the wake
    headway, scaled by the number of open fixes, has elapsed since its
    previous takeoff. Flights waiting longer than `cancel_threshold` cancel.

    Parameters
    ----------
    flights : list of FlightRecord

    config : SimConfig

    plan : PathfinderPlan, default `None`
        Optional pathfinder intervention.

    '''

    def __init__(self, flights: List[FlightRecord], config: SimConfig,
                 plan: Optional[PathfinderPlan]=None) -> None:

        if not flights:
            raise DomainError('`flights` must not be empty.')
        callsigns = [f.callsign for f in flights]
        if len(set(callsigns)) != len(callsigns):
            raise DomainError('`flights` contains duplicated callsigns.')
        if plan is not None:
            unknown = [fix for fix in plan.fixes_to_open if fix not in config.fixes]
            if unknown:
                raise ConfigError(f"Plan opens unknown fixes {unknown}.")

        self.flights = list(flights)
        self.config  = config
        self.plan    = plan

    def __repr__(self) -> str:

        info =    "=======================" \
                + "DepartureSimulator" \
                + "=======================" \
                + "\n" \
                + "Flights: " + str(len(self.flights)) \
                + "\n" \
                + "Runways: " + str(self.config.runways) \
                + "\n" \
                + "Fixes: " + str(self.config.fixes) \
                + "\n" \
                + "Plan: " + str(self.plan) \
                + "\n" \
                + "Seed: " + str(self.config.rng_seed) \
                + "\n"

        return info

    def _log(self, kind: str, subject: str, detail: str) -> None:
        self._events.append(SimEvent(float(self._env.now), kind, subject, detail))

    def _open_count(self) -> int:
        return sum(self._open.values())

    def _sigma(self) -> float:
        count = self._open_count()
        if count == 0:
            return max(self.config.capacity_scale[k] for k in range(1, len(self.config.fixes) + 1))
        return self.config.capacity_scale[count]

    def _new_wakeup(self, runway: _RunwayState) -> simpy.Event:
        runway.wakeup = self._env.event()
        return runway.wakeup

    def _poke(self, runway: _RunwayState) -> None:
        if runway.wakeup is not None and not runway.wakeup.triggered:
            runway.wakeup.succeed()

    def _open_fixes(self, fixes: List[str], reason: str) -> None:

        for fix in fixes:
            if not self._open[fix]:
                self._open[fix] = True
                self._log('fix-open', fix, f"open={self._open_count()} reason={reason}")
        for runway in self._runways.values():
            self._poke(runway)

    def _predicted_departure(self, runway: _RunwayState, state: _FlightState,
                             at_head: bool=False) -> float:

        sigma = self._sigma()
        t = runway.last_takeoff
        lead = runway.last_wake
        queue = [] if at_head else [
            q for q in runway.queue if q is not state and self._can_depart(q)
        ]
        for q in queue:
            t = q.join_time if t is None else max(q.join_time, t + base_headway(lead, q.record.wake, self.config) * sigma)
            lead = q.record.wake
        now = self._env.now
        if t is None:
            return now

        return max(now, t + base_headway(lead, state.record.wake, self.config) * sigma)

    def _best_runway(self, state: _FlightState, at_head: bool=False) -> _RunwayState:

        best, best_time = None, None
        for name in sorted(self.config.runways):
            runway = self._runways[name]
            predicted = self._predicted_departure(runway, state, at_head=at_head)
            if best_time is None or predicted < best_time:
                best, best_time = runway, predicted

        return best

    def _usable(self, state: _FlightState, fix: Optional[str]) -> bool:

        if fix is None or not self._open[fix]:
            return False
        allowed = self.config.fix_restrictions.get(state.record.region)

        return allowed is None or fix in allowed

    def _can_depart(self, state: _FlightState) -> bool:
        return state.pathfinder or any(self._usable(state, fix) for fix in self.config.fixes)

    def _round_robin_fix(self, state: _FlightState) -> Optional[str]:

        names = list(self.config.fixes)
        for step in range(len(names)):
            fix = names[(self._rr_pointer + step) % len(names)]
            if self._usable(state, fix):
                self._rr_pointer = (self._rr_pointer + step + 1) % len(names)
                return fix

        return None

    def _choose_fix(self, state: _FlightState, runway: _RunwayState) -> Optional[str]:
        '''
        Destination preferred fix, then runway preferred fix, then round-robin
        over the open fixes the flight may use. `None` holds the flight.
        '''

        preferred = self.config.region_fix.get(state.record.region)
        if self._usable(state, preferred):
            return preferred
        preferred = self.config.runway_fix.get(runway.name)
        if self._usable(state, preferred):
            return preferred

        return self._round_robin_fix(state)

    def _move_to_head(self, state: _FlightState) -> None:

        if state.runway is not None:
            old = self._runways[state.runway]
            old.queue.remove(state)
            self._poke(old)
        runway = self._best_runway(state, at_head=True)
        runway.queue.insert(0, state)
        state.runway = runway.name
        self._poke(runway)

    def _next_departure(self, runway: _RunwayState) -> Optional[_FlightState]:

        for state in runway.queue:
            if self._can_depart(state):
                return state

        return None

    def _release_time(self, runway: _RunwayState, head: _FlightState) -> float:

        release = head.join_time
        if runway.last_takeoff is not None:
            h_eff = base_headway(runway.last_wake, head.record.wake, self.config) * self._sigma()
            release = max(release, runway.last_takeoff + h_eff)
        spacing = self.config.pathfinder_min_spacing
        if head.pathfinder and spacing is not None and self._last_takeoff is not None:
            release = max(release, self._last_takeoff + spacing)

        return release

    def _takeoff(self, runway: _RunwayState, head: _FlightState) -> None:

        runway.queue.remove(head)
        if head.pathfinder:
            if self.plan.trigger == 'takeoff':
                self._open_fixes(list(self.plan.fixes_to_open), reason='pathfinder')
        elif not self._usable(head, head.fix):
            head.fix = self._choose_fix(head, runway)

        now = self._env.now
        head.takeoff_time = now
        runway.last_takeoff = now
        runway.last_wake = head.record.wake
        self._last_takeoff = now
        self._log(
            'takeoff', head.record.callsign,
            f"runway={runway.name} fix={head.fix} open={self._open_count()}"
        )
        head.departed.succeed()

    def _runway_process(self, runway: _RunwayState):

        env = self._env
        while True:
            if not runway.queue:
                yield self._new_wakeup(runway)
                continue
            head = self._next_departure(runway)
            if head is None:
                yield self._new_wakeup(runway)
                continue
            release = self._release_time(runway, head)
            if release > env.now + 1e-9:
                wakeup = self._new_wakeup(runway)
                yield env.timeout(release - env.now) | wakeup
                continue
            self._takeoff(runway, head)

    def _flight_process(self, state: _FlightState):

        env = self._env
        yield env.timeout(state.record.sched_dep + state.taxi)

        state.join_time = env.now
        if state.pathfinder:
            self._move_to_head(state)
        else:
            runway = self._best_runway(state)
            state.fix = self._choose_fix(state, runway)
            state.runway = runway.name
            runway.queue.append(state)
            self._poke(runway)
        self._log('join', state.record.callsign, f"runway={state.runway}")

        yield state.departed | env.timeout(self.config.cancel_threshold)

        if state.takeoff_time is None:
            runway = self._runways[state.runway]
            runway.queue.remove(state)
            state.cancel_time = env.now
            self._log('cancel', state.record.callsign, f"runway={runway.name}")
            self._poke(runway)

    def _pathfinder_process(self):

        plan = self.plan
        yield self._env.timeout(plan.designation_time)

        state = self._states[plan.flight]
        if state.takeoff_time is not None or state.cancel_time is not None:
            reason = 'departed' if state.takeoff_time is not None else 'cancelled'
            self._feasible = False
            self._log('pathfinder', plan.flight, f"infeasible reason={reason}")
            logging.warning(
                f"Pathfinder plan for {plan.flight} at position {plan.offer_position} "
                f"is infeasible: flight already {reason}."
            )
            return

        state.pathfinder = True
        state.fix = plan.fixes_to_open[0]
        self._pathfinder = plan.flight
        self._log('pathfinder', plan.flight, f"designated slot={plan.offer_position}")
        if plan.trigger == 'accept':
            self._open_fixes(list(plan.fixes_to_open), reason='pathfinder')
        if state.join_time is not None:
            self._move_to_head(state)

    def _weather_process(self):

        yield self._env.timeout(self.config.weather_clear_time)
        closed = [fix for fix, is_open in self._open.items() if not is_open]
        self._open_fixes(closed, reason='weather')

    def run(self) -> SimOutcome:
        '''
        Run the simulation until every flight has departed or cancelled.

        Returns
        -------
        outcome : SimOutcome

        '''

        self._env = simpy.Environment()
        self._events = []
        self._open = dict(self.config.fixes)
        self._rr_pointer = 0
        self._last_takeoff = None
        self._feasible = True
        self._pathfinder = None
        self._runways = {name: _RunwayState(name=name) for name in self.config.runways}
        self._states = {
            f.callsign: _FlightState(
                            record   = f,
                            taxi     = taxi_time(f.callsign, self.config),
                            departed = self._env.event()
                        )
            for f in self.flights
        }

        for runway in self._runways.values():
            self._env.process(self._runway_process(runway))
        for state in self._states.values():
            self._env.process(self._flight_process(state))

        if self.plan is not None:
            record = self._states.get(self.plan.flight)
            if record is None or not record.record.candidate:
                reason = 'unknown' if record is None else 'not-candidate'
                self._feasible = False
                self._events.append(SimEvent(
                    float(self.plan.designation_time), 'pathfinder', self.plan.flight,
                    f"infeasible reason={reason}"
                ))
                logging.warning(
                    f"Pathfinder plan for {self.plan.flight} is infeasible: {reason} flight."
                )
            else:
                self._env.process(self._pathfinder_process())

        if self.config.weather_clear_time is not None:
            self._env.process(self._weather_process())

        self._env.run()

        return SimOutcome(
                   flights       = self._outcome_frame(),
                   events        = sorted(self._events, key=SimEvent.sort_key),
                   plan_feasible = self._feasible,
                   pathfinder    = self._pathfinder
               )

    def _outcome_frame(self) -> pd.DataFrame:

        rows = []
        for callsign, state in self._states.items():
            end = state.takeoff_time if state.takeoff_time is not None else state.cancel_time
            rows.append({
                'callsign'    : callsign,
                'taxi_time'   : state.taxi,
                'join_time'   : state.join_time,
                'takeoff_time': np.nan if state.takeoff_time is None else state.takeoff_time,
                'cancelled'   : state.takeoff_time is None,
                'runway'      : state.runway,
                'fix'         : state.fix,
                'wait'        : min(end - state.join_time, self.config.wait_cap),
            })

        return pd.DataFrame(rows).set_index('callsign')


def run(flights: List[FlightRecord], config: SimConfig,
        plan: Optional[PathfinderPlan]=None) -> SimOutcome:
    '''
    Simulate the departure schedule, optionally with a pathfinder plan.
    Deterministic given (flights, config, plan).
    '''
    return DepartureSimulator(flights=flights, config=config, plan=plan).run()


def _overtaken(baseline: SimOutcome, intervention: SimOutcome, pathfinder: str) -> List[str]:
    '''
    Flights that joined the queue before the pathfinder and take off after it
    (or never) in the intervention run. Join times do not depend on the plan.
    '''

    joined = baseline.flights['join_time']
    plan = intervention.flights['takeoff_time'].fillna(np.inf)
    if not np.isfinite(plan[pathfinder]):
        return []

    overtaken = [
        callsign for callsign in joined.index
        if callsign != pathfinder
        and joined[callsign] < joined[pathfinder]
        and plan[callsign] > plan[pathfinder]
    ]

    return overtaken


def _paired_metrics(baseline: SimOutcome, intervention: SimOutcome,
                    plan: Optional[PathfinderPlan], flights: List[FlightRecord],
                    config: SimConfig) -> PairedDelta:

    delta = baseline.total_wait() - intervention.total_wait()
    if plan is None or not intervention.plan_feasible:
        return PairedDelta(
                   delta_d_sys = delta,
                   T           = 0.0,
                   B_dep       = 0.0,
                   G_ATC       = 0.0,
                   G_disp      = 0.0,
                   feasible    = plan is None
               )

    pathfinder = plan.flight
    T = float(baseline.flights.at[pathfinder, 'wait'] - intervention.flights.at[pathfinder, 'wait'])
    overtaken = _overtaken(baseline, intervention, pathfinder)
    airlines = {f.callsign: f.airline for f in flights}
    g_disp = sum(
                 config.same_airline_weight if airlines[c] == airlines[pathfinder]
                 else config.overtake_weight
                 for c in overtaken
             )

    return PairedDelta(
               delta_d_sys = delta,
               T           = T,
               B_dep       = T,
               G_ATC       = config.kappa_atc * len(overtaken),
               G_disp      = float(g_disp),
               feasible    = True,
               overtaken   = overtaken
           )


def paired_delta(flights: List[FlightRecord], config: SimConfig,
                 plan: Optional[PathfinderPlan], seed: Optional[int]=None) -> PairedDelta:
    '''
    Compare a plan run against the baseline run with identical random draws.

    Parameters
    ----------
    flights : list of FlightRecord

    config : SimConfig

    plan : PathfinderPlan, None
        `None` compares the baseline against itself.

    seed : int, default `None`
        Overrides `config.rng_seed` for both runs.

    Returns
    -------
    delta : PairedDelta
        Infeasible plans report `feasible = False` and zero pathfinder
        metrics.

    '''

    if seed is not None:
        config = config.model_copy(update={'rng_seed': seed})

    baseline = run(flights, config)
    intervention = baseline if plan is None else run(flights, config, plan)

    return _paired_metrics(baseline, intervention, plan, flights, config)


################################################################################
#                                ParamMatrices                                 #
################################################################################

@dataclass
class ParamMatrices():
    '''
    The five (candidate x offer position) parameter matrices of the
    sequencing problem. Each is a DataFrame indexed by callsign (scheduled
    departure order) with integer positions `1..K` as columns.
    '''

    T: pd.DataFrame
    B_dep: pd.DataFrame
    D_sys: pd.DataFrame
    G_ATC: pd.DataFrame
    G_disp: pd.DataFrame

    def __post_init__(self) -> None:

        reference = self.T
        for name in MATRIX_NAMES:
            matrix = getattr(self, name)
            if matrix.shape != reference.shape:
                raise DomainError(
                    f"Matrix `{name}` has shape {matrix.shape}, expected {reference.shape}."
                )
            if list(matrix.index) != list(reference.index) or list(matrix.columns) != list(reference.columns):
                raise DomainError(f"Matrix `{name}` labels do not match matrix `T`.")

    @property
    def candidates(self) -> List[str]:
        return list(self.T.index)

    @property
    def positions(self) -> List[int]:
        return list(self.T.columns)

    def to_csv(self, directory: Union[str, os.PathLike]) -> List[str]:
        '''
        Write `<name>_matrix.csv` files with 12 significant digits.

        Returns
        -------
        paths : list of str

        '''

        os.makedirs(directory, exist_ok=True)
        paths = []
        for name in MATRIX_NAMES:
            path = os.path.join(directory, f"{name}_matrix.csv")
            getattr(self, name).to_csv(path, float_format='%.12g', index_label='callsign')
            paths.append(path)

        return paths

    @classmethod
    def from_csv(cls, directory: Union[str, os.PathLike]) -> 'ParamMatrices':
        '''
        Read matrices written by `to_csv`.
        '''

        matrices = {}
        for name in MATRIX_NAMES:
            path = os.path.join(directory, f"{name}_matrix.csv")
            if not os.path.exists(path):
                raise ConfigError(f"Missing matrix file '{path}'.")
            matrix = pd.read_csv(path, index_col=0, dtype={'callsign': str})
            matrix.index = matrix.index.astype(str)
            matrix.index.name = 'callsign'
            matrix.columns = [int(c) for c in matrix.columns]
            matrices[name] = matrix.astype(float)

        return cls(**matrices)


def candidates_in_order(flights: List[FlightRecord]) -> List[str]:
    '''
    Candidate callsigns sorted by scheduled departure (file order on ties).
    '''
    ordered = sorted(enumerate(flights), key=lambda item: (item[1].sched_dep, item[0]))
    return [f.callsign for _, f in ordered if f.candidate]


def _cell(flights: List[FlightRecord], config: SimConfig, baseline: SimOutcome,
          plan: PathfinderPlan) -> PairedDelta:
    return _paired_metrics(baseline, run(flights, config, plan), plan, flights, config)


def compute_param_matrices(flights: List[FlightRecord], config: SimConfig,
                           candidates: Optional[List[str]]=None,
                           positions: Optional[Union[int, List[int]]]=None,
                           offer_overheads: Optional[Tuple[float, float]]=None,
                           n_jobs: int=1) -> ParamMatrices:
    '''
    Parameter matrices from paired simulations: entry (i, k) compares the
    baseline with a run where candidate `i` accepts the offer at position `k`.

    Parameters
    ----------
    flights : list of FlightRecord

    config : SimConfig

    candidates : list of str, default `None`
        Subset of candidate flights. Default: all candidates. Rows always
        follow scheduled departure order.

    positions : int, list of int, default `None`
        Offer positions `1..K`. An int `K` means `range(1, K + 1)`. Default: one
        position per candidate.

    offer_overheads : tuple, default `None`
        (decline overhead, accept overhead) in minutes. Default: config values.

    n_jobs : int, default `1`
        Number of parallel jobs (joblib).

    Returns
    -------
    matrices : ParamMatrices
        Cells where the plan is infeasible (the flight left before the
        designation) are zero. `D_sys` is floored at zero.

    '''

    ordered = candidates_in_order(flights)
    if candidates is None:
        candidates = ordered
    else:
        unknown = [c for c in candidates if c not in ordered]
        if unknown:
            raise DomainError(f"`candidates` contains non-candidate flights: {unknown}.")
        candidates = [c for c in ordered if c in set(candidates)]

    if positions is None:
        positions = list(range(1, len(candidates) + 1))
    elif isinstance(positions, int):
        positions = list(range(1, positions + 1))
    else:
        positions = list(positions)
    if not positions or min(positions) < 1:
        raise DomainError('`positions` must be a non-empty list of integers >= 1.')

    if offer_overheads is None:
        offer_overheads = (config.decline_overhead, config.accept_overhead)
    decline, accept = offer_overheads

    baseline = run(flights, config)
    cells = [(c, k) for c in candidates for k in positions]

    logging.info(f"Number of paired simulations: {len(cells)}")

    results = Parallel(n_jobs=n_jobs)(
                  delayed(_cell)(
                      flights,
                      config,
                      baseline,
                      PathfinderPlan(
                          flight           = c,
                          offer_position   = k,
                          decline_overhead = decline,
                          accept_overhead  = accept,
                          fixes_to_open    = tuple(config.plan_fixes),
                          offer_start      = config.offer_start
                      )
                  )
                  for c, k in tqdm.tqdm(cells, desc='loop paired runs')
              )

    values = {name: np.zeros((len(candidates), len(positions))) for name in MATRIX_NAMES}
    for (c, k), delta in zip(cells, results):
        if not delta.feasible:
            continue
        i = candidates.index(c)
        j = positions.index(k)
        values['T'][i, j] = delta.T
        values['B_dep'][i, j] = delta.B_dep
        values['D_sys'][i, j] = max(0.0, delta.delta_d_sys)
        values['G_ATC'][i, j] = delta.G_ATC
        values['G_disp'][i, j] = delta.G_disp

    frames = {}
    for name in MATRIX_NAMES:
        frame = pd.DataFrame(values[name], index=candidates, columns=positions)
        frame.index.name = 'callsign'
        frames[name] = frame

    return ParamMatrices(**frames)
