################################################################################
#                           skpathfinder.datasets                              #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import Union, List
from dataclasses import asdict, fields
import os
import re
import logging
import numpy as np
import pandas as pd

from .config import WAKE_CLASSES
from .depsim import FlightRecord
from .exceptions import DomainError, ScheduleFormatError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

JFK_SCHEDULE_PATH = os.path.join(os.path.dirname(__file__), 'data', 'jfk_departures.csv')
REQUIRED_COLUMNS = (
    'callsign', 'aircraft', 'destination', 'region', 'sched_dep_min',
    'block_min', 'wake', 'candidate', 'airline'
)
OPTIONAL_COLUMNS = ('sched_arr_local',)
TRUE_VALUES = ('1', 'true', 'yes', 'y')
FALSE_VALUES = ('0', 'false', 'no', 'n')
# Shortest plausible block time (minutes) of a transatlantic departure.
MIN_INTERNATIONAL_BLOCK = 240


def _parse_float(value: str, column: str, line: int) -> float:

    try:
        number = float(value)
    except ValueError:
        raise ScheduleFormatError(f"`{column}` must be numeric. Got '{value}'.", line)
    if not np.isfinite(number):
        raise ScheduleFormatError(f"`{column}` must be finite. Got '{value}'.", line)

    return number


def _parse_bool(value: str, line: int) -> bool:

    value = value.strip().lower()
    if value in TRUE_VALUES:
        return True
    if value in FALSE_VALUES:
        return False

    raise ScheduleFormatError(f"`candidate` must be a boolean flag. Got '{value}'.", line)


def schedule_diagnostics(flights: List[FlightRecord]) -> List[str]:
    '''
    Sanity checks on a parsed schedule. Returns one message per suspicious
    record; nothing is rejected.
    '''

    messages = []
    for flight in flights:
        if flight.region != 'domestic' and flight.block_minutes < MIN_INTERNATIONAL_BLOCK:
            messages.append(
                f"{flight.callsign} to {flight.destination} ({flight.region}) has a block "
                f"time of {flight.block_minutes:g} min, shorter than {MIN_INTERNATIONAL_BLOCK} min."
            )

    return messages


def ingest_schedule(path: Union[str, os.PathLike]) -> List[FlightRecord]:
    '''
    Read a departure schedule CSV.

    Parameters
    ----------
    path : str
        CSV file with header `callsign, aircraft, destination, region,
        sched_dep_min, block_min, wake, candidate, airline` and optional
        `sched_arr_local`.

    Returns
    -------
    flights : list of FlightRecord
        In file order.

    Raises
    ------
    ScheduleFormatError
        Malformed row, with the 1-based line number (the header is line 1).

    '''

    try:
        data = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise ScheduleFormatError('file is empty, a header is required.', 1)
    except pd.errors.ParserError as exc:
        match = re.search(r'line (\d+)', str(exc))
        line = int(match.group(1)) if match else 1
        raise ScheduleFormatError(f"malformed row: {exc}", line)

    data.columns = [c.strip() for c in data.columns]
    missing = [c for c in REQUIRED_COLUMNS if c not in data.columns]
    if missing:
        raise ScheduleFormatError(f"missing columns {missing}.", 1)
    unknown = [c for c in data.columns if c not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS]
    if unknown:
        raise ScheduleFormatError(f"unknown columns {unknown}.", 1)

    flights = []
    seen = set()
    for position, row in enumerate(data.itertuples(index=False)):
        line = position + 2
        row = row._asdict()
        for column in REQUIRED_COLUMNS:
            value = row[column]
            if not isinstance(value, str) or value.strip() == '':
                raise ScheduleFormatError(f"`{column}` is empty.", line)

        callsign = row['callsign'].strip()
        if callsign in seen:
            raise ScheduleFormatError(f"duplicated callsign '{callsign}'.", line)
        seen.add(callsign)

        wake = row['wake'].strip().upper()
        if wake not in WAKE_CLASSES:
            raise ScheduleFormatError(
                f"`wake` must be one of {WAKE_CLASSES}. Got '{row['wake']}'.", line
            )

        arrival = row.get('sched_arr_local', '')
        try:
            flight = FlightRecord(
                         callsign        = callsign,
                         aircraft        = row['aircraft'].strip(),
                         destination     = row['destination'].strip(),
                         region          = row['region'].strip(),
                         sched_dep       = _parse_float(row['sched_dep_min'], 'sched_dep_min', line),
                         block_minutes   = _parse_float(row['block_min'], 'block_min', line),
                         wake            = wake,
                         candidate       = _parse_bool(row['candidate'], line),
                         airline         = row['airline'].strip(),
                         sched_arr_local = arrival.strip() if isinstance(arrival, str) else ''
                     )
        except DomainError as exc:
            raise ScheduleFormatError(str(exc), line)
        flights.append(flight)

    for message in schedule_diagnostics(flights):
        logging.warning(message)

    logging.info(
        f"Schedule '{path}' loaded: {len(flights)} flights, "
        f"{sum(f.candidate for f in flights)} pathfinder candidates."
    )

    return flights


def load_jfk_departures() -> List[FlightRecord]:
    '''
    Bundled evening bank of departures from a two-runway hub with two of
    its three departure fixes closed by convective weather.
    '''
    return ingest_schedule(JFK_SCHEDULE_PATH)


def schedule_to_frame(flights: List[FlightRecord]) -> pd.DataFrame:
    '''
    Flights as a DataFrame indexed by callsign.
    '''
    columns = [field.name for field in fields(FlightRecord)]
    frame = pd.DataFrame([asdict(f) for f in flights], columns=columns)

    return frame.set_index('callsign')
