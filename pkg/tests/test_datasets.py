import logging
import pytest
from skpathfinder.datasets import ingest_schedule
from skpathfinder.datasets import load_jfk_departures
from skpathfinder.datasets import schedule_diagnostics
from skpathfinder.datasets import schedule_to_frame
from skpathfinder.exceptions import ScheduleFormatError

HEADER = 'callsign,aircraft,destination,region,sched_dep_min,block_min,wake,candidate,airline\n'


# Test load_jfk_departures
#-------------------------------------------------------------------------------
def test_load_jfk_departures_counts():

    flights = load_jfk_departures()
    assert len(flights) == 28
    assert sum(f.candidate for f in flights) == 14


def test_load_jfk_departures_first_rows_in_file_order():

    flights = load_jfk_departures()
    assert [f.callsign for f in flights[:4]] == ['DAL1', 'JBU641', 'RPA4535', 'SWR15']
    assert flights[0].wake == 'H'
    assert flights[0].sched_dep == 0
    assert flights[0].block_minutes == 395


def test_load_jfk_departures_flags_ein106_block_time(caplog):

    with caplog.at_level(logging.WARNING):
        flights = load_jfk_departures()
    warnings = [r.getMessage() for r in caplog.records if r.levelno == logging.WARNING]
    assert any('EIN106' in message for message in warnings)
    ein106 = [f for f in flights if f.callsign == 'EIN106'][0]
    assert ein106.block_minutes < 240


def test_schedule_diagnostics_only_flags_ein106():

    messages = schedule_diagnostics(load_jfk_departures())
    assert len(messages) == 1
    assert messages[0].startswith('EIN106')


def test_schedule_to_frame_indexed_by_callsign():

    frame = schedule_to_frame(load_jfk_departures())
    assert frame.index.name == 'callsign'
    assert frame.shape[0] == 28


# Test ingest_schedule
#-------------------------------------------------------------------------------
def test_ingest_schedule_empty_file_with_header(tmp_path):

    path = tmp_path / 'empty.csv'
    path.write_text(HEADER)
    assert ingest_schedule(path) == []


def test_ingest_schedule_exception_names_line_of_unknown_wake(tmp_path):

    path = tmp_path / 'bad.csv'
    path.write_text(
        HEADER
        + 'AAA1,A320,KBOS,domestic,0,60,M,0,AAA\n'
        + 'AAA2,A320,KBOS,domestic,1,60,X,0,AAA\n'
    )
    with pytest.raises(ScheduleFormatError) as exc_info:
        ingest_schedule(path)
    assert exc_info.value.line == 3
    assert 'line 3' in str(exc_info.value)


def test_ingest_schedule_exception_when_value_not_numeric(tmp_path):

    path = tmp_path / 'bad.csv'
    path.write_text(HEADER + 'AAA1,A320,KBOS,domestic,soon,60,M,0,AAA\n')
    with pytest.raises(ScheduleFormatError) as exc_info:
        ingest_schedule(path)
    assert exc_info.value.line == 2


def test_ingest_schedule_exception_when_column_missing(tmp_path):

    path = tmp_path / 'bad.csv'
    path.write_text('callsign,aircraft\nAAA1,A320\n')
    with pytest.raises(ScheduleFormatError) as exc_info:
        ingest_schedule(path)
    assert exc_info.value.line == 1


def test_ingest_schedule_exception_when_callsign_duplicated(tmp_path):

    path = tmp_path / 'bad.csv'
    path.write_text(
        HEADER
        + 'AAA1,A320,KBOS,domestic,0,60,M,0,AAA\n'
        + 'AAA1,A320,KBOS,domestic,1,60,M,0,AAA\n'
    )
    with pytest.raises(ScheduleFormatError):
        ingest_schedule(path)


def test_ingest_schedule_candidate_flag_spellings(tmp_path):

    path = tmp_path / 'ok.csv'
    path.write_text(
        HEADER
        + 'AAA1,A320,KBOS,domestic,0,60,M,true,AAA\n'
        + 'AAA2,A320,KBOS,domestic,1,60,m,no,AAA\n'
    )
    flights = ingest_schedule(path)
    assert [f.candidate for f in flights] == [True, False]
    assert flights[1].wake == 'M'
    assert flights[0].sched_arr_local == ''
