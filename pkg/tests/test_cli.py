import json
import pytest
from pytest import approx
import pandas as pd
from skpathfinder import __version__
from skpathfinder.cli import main
from skpathfinder.cli import build_parser
from skpathfinder.config import CONFIG_ENV_VAR


def read_manifest(directory):
    with open(directory / 'manifest.json', encoding='utf-8') as handle:
        return json.load(handle)


# Test worstcase commands
#-------------------------------------------------------------------------------
def test_worstcase_tipping_prints_anchor_value(tmp_path, capsys):

    status = main([
                 'worstcase', 'tipping', '--n', '10', '--u-minus', '-2', '--u-plus', '2',
                 '--beta', '1', '--delta', '0.1', '--out', str(tmp_path)
             ])
    assert status == 0
    assert capsys.readouterr().out.strip() == '0.886'
    table = pd.read_csv(tmp_path / 'tipping.csv')
    assert table['alpha_star'].iloc[0] == approx(0.886, abs=0.001)


def test_worstcase_noise_json_output(tmp_path):

    status = main([
                 'worstcase', 'noise', '--kind', 'rademacher', '--theta', '0.5',
                 '--format', 'json', '--out', str(tmp_path)
             ])
    assert status == 0
    with open(tmp_path / 'w_noise.json', encoding='utf-8') as handle:
        records = json.load(handle)
    assert records[0]['kind'] == 'rademacher'
    assert set(read_manifest(tmp_path)['outputs']) == {'w_noise.json', 'w_noise_curve.json'}


def test_worstcase_tipping_no_root_exits_with_error(tmp_path):

    status = main([
                 'worstcase', 'tipping', '--theta', '0.5', '--delta', '1e-15',
                 '--out', str(tmp_path)
             ])
    assert status == 1


# Test markov commands
#-------------------------------------------------------------------------------
def test_markov_steady_writes_table_and_manifest(tmp_path):

    status = main([
                 'markov', 'steady', '--p-good', '0.5', '--p-accept', '0.5',
                 '--p-success', '0.5', '--out', str(tmp_path)
             ])
    assert status == 0
    table = pd.read_csv(tmp_path / 'stationary.csv')
    assert table[['pi0', 'pi1', 'pi2', 'pi3']].values[0] == approx([1/3, 1/3, 1/6, 1/6])
    manifest = read_manifest(tmp_path)
    assert manifest['command'] == 'markov steady'
    assert manifest['version'] == __version__
    assert 'stationary.csv' in manifest['outputs']


def test_markov_steady_exception_when_probability_out_of_range(tmp_path):

    status = main([
                 'markov', 'steady', '--p-good', '1.5', '--p-accept', '0.5',
                 '--p-success', '0.5', '--out', str(tmp_path)
             ])
    assert status == 1


def test_markov_sweep_grid_size(tmp_path):

    status = main([
                 'markov', 'sweep', '--p-good', '0.2,0.8', '--p-accept', '0.5',
                 '--p-success', '0.3,0.6,0.9', '--out', str(tmp_path)
             ])
    assert status == 0
    assert len(pd.read_csv(tmp_path / 'stationary_sweep.csv')) == 6


# Test sim commands
#-------------------------------------------------------------------------------
def test_sim_paired_without_plan_is_zero(tmp_path, capsys):

    status = main(['sim', 'paired', '--out', str(tmp_path)])
    assert status == 0
    assert capsys.readouterr().out.strip() == 'delta_d_sys = 0'
    assert pd.read_csv(tmp_path / 'paired.csv')['delta_d_sys'].iloc[0] == 0


def test_sim_run_seed_recorded_in_manifest(tmp_path):

    status = main(['sim', 'run', '--seed', '42', '--pathfinder', 'IBE326', '--out', str(tmp_path)])
    assert status == 0
    manifest = read_manifest(tmp_path)
    assert manifest['seed'] == 42
    assert {'flights.csv', 'events.log'} <= set(manifest['outputs'])
    assert len(pd.read_csv(tmp_path / 'flights.csv')) == 28


def test_sim_run_exception_when_schedule_missing(tmp_path):

    status = main(['sim', 'run', '--schedule', str(tmp_path / 'none.csv'), '--out', str(tmp_path)])
    assert status == 1


def test_sim_matrices_then_seq_solve(tmp_path):

    matrices_dir = tmp_path / 'matrices'
    solve_dir = tmp_path / 'solve'
    assert main(['sim', 'matrices', '--positions', '2', '--out', str(matrices_dir)]) == 0
    assert (matrices_dir / 'D_sys_matrix.csv').exists()
    assert main([
               'seq', 'solve', '--matrices', str(matrices_dir), '--side', 'dispatcher',
               '--out', str(solve_dir)
           ]) == 0
    summary = pd.read_csv(solve_dir / 'solve.csv')
    assert summary['side'].iloc[0] == 'dispatcher'
    assert str(matrices_dir) in read_manifest(solve_dir)['inputs'][-1]

    sweep_dir = tmp_path / 'sweep'
    assert main([
               'seq', 'sweep', '--matrices', str(matrices_dir), '--side', 'atc', '--B', '3',
               '--lambda', '0,0.5', '--beta', '0,1', '--out', str(sweep_dir)
           ]) == 0
    assert len(pd.read_csv(sweep_dir / 'sweep_atc.csv')) == 4


def test_seq_solve_exception_when_matrices_missing(tmp_path):

    status = main(['seq', 'solve', '--matrices', str(tmp_path / 'none'), '--out', str(tmp_path)])
    assert status == 1


# Test argument handling
#-------------------------------------------------------------------------------
def test_main_exit_code_2_when_flag_unknown(tmp_path):

    with pytest.raises(SystemExit) as exc_info:
        main(['markov', 'steady', '--unknown', '--out', str(tmp_path)])
    assert exc_info.value.code == 2


def test_main_config_from_env_var(tmp_path, monkeypatch):

    monkeypatch.setenv(CONFIG_ENV_VAR, str(tmp_path / 'missing.yaml'))
    assert main(['worstcase', 'baseline', '--out', str(tmp_path)]) == 1


def test_build_parser_lists_every_command():

    parser = build_parser()
    for argv in [['markov', 'steady', '--p-good', '0.1', '--p-accept', '0.1', '--p-success', '0.1'],
                 ['markov', 'sweep'], ['worstcase', 'baseline'], ['worstcase', 'selfless'],
                 ['worstcase', 'noise'], ['worstcase', 'tipping'], ['worstcase', 'gradmap'],
                 ['sim', 'run'], ['sim', 'paired'], ['sim', 'matrices'],
                 ['seq', 'solve', '--matrices', 'x'], ['seq', 'sweep', '--matrices', 'x']]:
        args = parser.parse_args(argv)
        assert callable(args.handler)
