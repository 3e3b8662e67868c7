################################################################################
#                              skpathfinder.cli                                #
#                                                                              #
# This work is licensed under a Creative Commons Attribution 4.0               #
# International License.                                                       #
################################################################################
# coding=utf-8

from typing import List, Optional
from dataclasses import dataclass, field, asdict, replace
from datetime import datetime, timezone
import os
import sys
import json
import argparse
import logging
import numpy as np
import pandas as pd

from . import __version__
from . import markov, worstcase, depsim, sequencer
from .config import SimConfig, load_config, CONFIG_ENV_VAR, DEFAULT_CONFIG_PATH
from .datasets import ingest_schedule, JFK_SCHEDULE_PATH
from .exceptions import PathfinderError

logging.basicConfig(
    format = '%(name)-10s %(levelname)-5s %(message)s',
    level  = logging.INFO,
)

FLOAT_FORMAT = '%.12g'
MANIFEST_NAME = 'manifest.json'


@dataclass
class RunManifest():
    '''
    Provenance of one command execution, written as `manifest.json` next to
    the outputs it lists.
    '''

    command: str
    inputs: List[str]
    config_hash: str
    seed: int
    version: str = __version__
    timestamp: str = field(
                         default_factory=lambda: datetime.now(timezone.utc).isoformat(timespec='seconds')
                     )
    outputs: List[str] = field(default_factory=list)

    def write(self, directory: str) -> str:

        path = os.path.join(directory, MANIFEST_NAME)
        with open(path, 'w', encoding='utf-8') as handle:
            json.dump(asdict(self), handle, indent=2)

        return path


class _Run():
    '''
    Output directory, format and manifest of the running command.
    '''

    def __init__(self, args: argparse.Namespace, config: SimConfig) -> None:

        self.args   = args
        self.config = config
        self.out    = args.out
        self.format = args.format
        os.makedirs(self.out, exist_ok=True)
        self.manifest = RunManifest(
                            command     = f"{args.group} {args.command}",
                            inputs      = [os.path.abspath(args.config_path)],
                            config_hash = config.config_hash(),
                            seed        = config.rng_seed
                        )

    def add_input(self, path: str) -> None:
        self.manifest.inputs.append(os.path.abspath(path))

    def add_output(self, path: str) -> None:
        self.manifest.outputs.append(os.path.basename(path))

    def table(self, frame: pd.DataFrame, name: str) -> str:
        '''
        Write a table as CSV or JSON records, floats at 12 significant digits.
        '''

        if self.format == 'json':
            path = os.path.join(self.out, f"{name}.json")
            frame.to_json(path, orient='records', double_precision=12)
        else:
            path = os.path.join(self.out, f"{name}.csv")
            frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
        self.add_output(path)

        return path

    def text(self, content: str, name: str) -> str:

        path = os.path.join(self.out, name)
        with open(path, 'w', encoding='utf-8') as handle:
            handle.write(content)
        self.add_output(path)

        return path

    def close(self) -> None:
        self.manifest.write(self.out)


def _float_list(text: str) -> List[float]:
    try:
        return [float(value) for value in text.split(',') if value.strip() != '']
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma separated numbers, got '{text}'")


def _seed(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError(f"seed must be an unsigned 64-bit integer, got {text}")
    return value


# markov
# ==============================================================================
def _markov_steady(run: _Run) -> None:

    args = run.args
    params = markov.MarkovParams(args.p_good, args.p_accept, args.p_success)
    matrix = markov.build_transition(params)
    pi = markov.stationary(matrix)
    queue = markov.QueueModel(c=args.c, lambda_dep=args.lambda_dep)
    mu_eff = markov.effective_service_rate(pi, queue)
    metrics = markov.stability_and_delay(queue, mu_eff)

    summary = pd.DataFrame([{
                  'p_good'    : params.p_good,
                  'p_accept'  : params.p_accept,
                  'p_success' : params.p_success,
                  'pi0'       : pi.pi0,
                  'pi1'       : pi.pi1,
                  'pi2'       : pi.pi2,
                  'pi3'       : pi.pi3,
                  'ergodic'   : pi.ergodic,
                  'mu_eff'    : mu_eff,
                  'lambda_dep': queue.lambda_dep,
                  'stable'    : metrics.stable,
                  'W'         : metrics.W,
                  'L'         : metrics.L,
              }])
    run.table(summary, 'stationary')
    transition = pd.DataFrame(matrix, columns=markov.STATE_NAMES)
    transition.insert(0, 'state', markov.STATE_NAMES)
    run.table(transition, 'transition')
    print(f"pi = ({pi.pi0:.6g}, {pi.pi1:.6g}, {pi.pi2:.6g}, {pi.pi3:.6g}); "
          f"mu_eff = {mu_eff:.6g}; W = {metrics.W}")


def _markov_sweep(run: _Run) -> None:

    args = run.args
    grid = {
        'p_good'   : args.p_good,
        'p_accept' : args.p_accept,
        'p_success': args.p_success,
    }
    results = markov.sweep_stationary(grid, n_jobs=args.threads)
    run.table(results, 'stationary_sweep')
    print(f"{len(results)} parameter triples")


# worstcase
# ==============================================================================
def _population(args: argparse.Namespace) -> worstcase.PopulationModel:
    return worstcase.PopulationModel(
               n       = args.n,
               alpha   = args.alpha,
               u_minus = args.u_minus,
               u_plus  = args.u_plus,
               beta    = args.beta
           )


def _alpha_grid(args: argparse.Namespace) -> np.ndarray:
    return np.linspace(0, 1, args.alpha_points)


def _worstcase_baseline(run: _Run) -> None:

    pop = _population(run.args)
    w = worstcase.w_baseline(pop)
    run.table(worstcase.w_curve(pop, _alpha_grid(run.args)), 'w_baseline')
    print(f"{w:.12g}")


def _worstcase_selfless(run: _Run) -> None:

    args = run.args
    pop = _population(args)
    selfless = worstcase.SelflessParams(s=args.s, gamma=args.gamma, r=args.r)
    w = worstcase.w_selfless(pop, selfless)
    run.table(worstcase.w_curve(pop, _alpha_grid(args), selfless=selfless), 'w_selfless')
    r_values = np.linspace(0, max(1.0, 2 * args.r), 51)
    run.table(worstcase.rejection_vs_risk(pop, args.s, args.gamma, r_values), 'rejection_vs_risk')
    print(f"{w:.12g}")


def _worstcase_noise(run: _Run) -> None:

    args = run.args
    pop = _population(args)
    noise = worstcase.NoiseSpec(kind=args.kind, theta=args.theta, n_nodes=args.nodes)
    w = worstcase.w_noise(pop, noise)
    gradient, approximate = worstcase.grad_w_theta(pop, noise)
    summary = pd.DataFrame([{
                  'kind'       : noise.kind,
                  'theta'      : noise.theta,
                  'alpha'      : pop.alpha,
                  'W'          : w,
                  'dW_dtheta'  : gradient,
                  'approximate': approximate,
              }])
    run.table(summary, 'w_noise')
    run.table(worstcase.w_curve(pop, _alpha_grid(args), noise=noise), 'w_noise_curve')
    print(f"{w:.12g}")


def _worstcase_tipping(run: _Run) -> None:

    args = run.args
    pop = _population(args)
    tol = worstcase.Tolerance(args.delta)
    row = {'delta': tol.delta}
    if args.theta > 0:
        noise = worstcase.NoiseSpec(kind=args.kind, theta=args.theta, n_nodes=args.nodes)
        alpha = worstcase.alpha_star_noise(pop, noise, tol)
        row.update({
            'kind'        : noise.kind,
            'theta'       : noise.theta,
            'alpha_star'  : alpha,
            'd_alpha_d_theta': worstcase.d_alpha_d_theta(pop, noise, tol),
        })
    else:
        alpha, clamped = worstcase.alpha_star(pop, tol)
        row.update({'alpha_star': alpha, 'clamped': clamped})
    run.table(pd.DataFrame([row]), 'tipping')
    print(f"{alpha:.3f}")


def _worstcase_gradmap(run: _Run) -> None:

    args = run.args
    pop = worstcase.PopulationModel(
              n=args.n, alpha=0.0, u_minus=-args.abs_u, u_plus=args.abs_u, beta=args.beta
          )
    alphas = _alpha_grid(args)
    thetas = np.linspace(0, args.theta_max, args.theta_points)
    gradients = worstcase.gradient_map(pop, alphas, thetas, args.kind, n_nodes=args.nodes)
    run.table(gradients, 'gradmap')
    fraction = float(np.mean(gradients['dW_dtheta'].to_numpy() < worstcase.NEGATIVE_THRESHOLD))
    print(f"negative gradient fraction = {fraction:.6g}")


# sim
# ==============================================================================
def _flights(run: _Run) -> List[depsim.FlightRecord]:

    path = run.args.schedule
    run.add_input(path)
    return ingest_schedule(path)


def _plan(run: _Run) -> Optional[depsim.PathfinderPlan]:

    args = run.args
    if not args.pathfinder:
        return None
    plan = depsim.PathfinderPlan.from_config(args.pathfinder, args.position, run.config)
    if args.trigger != plan.trigger:
        plan = replace(plan, trigger=args.trigger)

    return plan


def _sim_run(run: _Run) -> None:

    flights = _flights(run)
    outcome = depsim.run(flights, run.config, _plan(run))
    run.table(outcome.flights.reset_index(), 'flights')
    run.text(outcome.event_log(), 'events.log')
    departed = int((~outcome.flights['cancelled']).sum())
    print(f"{departed} departed, {len(flights) - departed} cancelled, "
          f"total wait {outcome.total_wait():.6g} min")


def _sim_paired(run: _Run) -> None:

    flights = _flights(run)
    delta = depsim.paired_delta(flights, run.config, _plan(run))
    table = pd.DataFrame([{
                'pathfinder'      : run.args.pathfinder or '',
                'offer_position'  : run.args.position,
                'feasible'        : delta.feasible,
                'delta_d_sys'     : delta.delta_d_sys,
                'T'               : delta.T,
                'B_dep'           : delta.B_dep,
                'G_ATC'           : delta.G_ATC,
                'G_disp'          : delta.G_disp,
                'positions_jumped': delta.positions_jumped,
                'overtaken'       : ';'.join(delta.overtaken),
            }])
    run.table(table, 'paired')
    print(f"delta_d_sys = {delta.delta_d_sys:.12g}")


def _sim_matrices(run: _Run) -> None:

    flights = _flights(run)
    matrices = depsim.compute_param_matrices(
                   flights   = flights,
                   config    = run.config,
                   positions = run.args.positions,
                   n_jobs    = run.args.threads
               )
    for path in matrices.to_csv(run.out):
        run.add_output(path)
    print(f"{len(matrices.candidates)} candidates x {len(matrices.positions)} positions")


# seq
# ==============================================================================
def _matrices(run: _Run) -> depsim.ParamMatrices:

    directory = run.args.matrices
    run.add_input(directory)
    return depsim.ParamMatrices.from_csv(directory)


def _seq_solve(run: _Run) -> None:

    args = run.args
    matrices = _matrices(run)
    problem = sequencer.build_problem(
                  matrices  = matrices,
                  lam       = args.lam,
                  beta      = args.beta,
                  p_success = args.p_success,
                  side      = args.side,
                  budget    = args.budget,
                  airline   = args.airline
              )
    result = sequencer.solve_exact(problem)
    rows = [
        {
            'position' : k + 1,
            'callsign' : problem.candidates[row],
            'reach'    : result.sequence.reach[k],
            'p_accept' : problem.p[row, k],
            'u'        : problem.u[row, k],
        }
        for k, row in enumerate(result.rows)
    ]
    run.table(
        pd.DataFrame(rows, columns=['position', 'callsign', 'reach', 'p_accept', 'u']),
        'sequence'
    )
    run.table(sequencer.assignment_matrix(problem, result).reset_index(), 'assignment')
    rp = sequencer.relative_selection_ratio(problem, result)
    avg_g = sequencer.selected_risk_metric(problem, result)
    summary = pd.DataFrame([{
                  'side'      : args.side,
                  'B'         : args.budget,
                  'lambda'    : args.lam,
                  'beta'      : args.beta,
                  'objective' : result.objective,
                  'sequence'  : ';'.join(result.callsigns),
                  'Rp'        : np.nan if rp is None else rp,
                  'avg_G'     : np.nan if avg_g is None else avg_g,
                  'method'    : result.method,
                  'runtime_ms': result.runtime_ms,
              }])
    run.table(summary, 'solve')
    print(f"objective = {result.objective:.12g}; sequence = {';'.join(result.callsigns)}")


def _seq_sweep(run: _Run) -> None:

    args = run.args
    matrices = _matrices(run)
    if args.B is None and args.lam is None and args.beta is None:
        grid = replace(sequencer.SweepGrid.standard(), p_success=args.p_success)
    else:
        standard = sequencer.SweepGrid.standard()
        grid = sequencer.SweepGrid(
                   B_values      = args.B or standard.B_values,
                   lambda_values = args.lam or standard.lambda_values,
                   beta_values   = args.beta or standard.beta_values,
                   p_success     = args.p_success
               )
    sides = sequencer.SIDES if args.side == 'both' else (args.side,)
    tables = []
    for side in sides:
        results = sequencer.sweep(matrices, grid, side=side, airline=args.airline,
                                  n_jobs=args.threads)
        run.table(results, f"sweep_{side}")
        tables.append(results)
    combined = pd.concat(tables, ignore_index=True)
    run.table(sequencer.lambda_sensitivity(combined), 'lambda_sensitivity')
    run.table(sequencer.beta_sensitivity(combined), 'beta_sensitivity')
    print(f"{len(grid)} instances per side")


def _common_options() -> argparse.ArgumentParser:

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        '--config', default=None,
        help=f"YAML simulator config (default: ${CONFIG_ENV_VAR} or the bundled one)"
    )
    common.add_argument('--out', default='.', help='output directory (default: current)')
    common.add_argument('--seed', type=_seed, default=None, help='overrides `rng_seed`')
    common.add_argument('--format', choices=['csv', 'json'], default='csv')
    common.add_argument('--threads', type=int, default=1, help='parallel jobs for sweeps')

    return common


def _population_options(parser: argparse.ArgumentParser) -> None:

    parser.add_argument('--n', type=int, default=10, help='number of flights')
    parser.add_argument('--alpha', type=float, default=0.5, help='rejective fraction')
    parser.add_argument('--u-minus', type=float, default=-2.0)
    parser.add_argument('--u-plus', type=float, default=2.0)
    parser.add_argument('--beta', type=float, default=1.0)
    parser.add_argument('--alpha-points', type=int, default=101)


def _noise_options(parser: argparse.ArgumentParser, theta: float) -> None:

    parser.add_argument('--kind', choices=list(worstcase.NOISE_KINDS), default='gaussian')
    parser.add_argument('--theta', type=float, default=theta, help='noise intensity')
    parser.add_argument('--nodes', type=int, default=64, help='Gauss-Hermite nodes')


def _sim_options(parser: argparse.ArgumentParser, plan: bool=True) -> None:

    parser.add_argument('--schedule', default=JFK_SCHEDULE_PATH,
                        help='schedule CSV (default: bundled JFK departures)')
    if plan:
        parser.add_argument('--pathfinder', default=None, help='callsign accepting the offer')
        parser.add_argument('--position', type=int, default=1, help='offer position k')
        parser.add_argument('--trigger', choices=list(depsim.TRIGGERS), default='takeoff')


def build_parser() -> argparse.ArgumentParser:
    '''
    Command line parser with one sub-command per analysis.
    '''

    common = _common_options()
    parser = argparse.ArgumentParser(
                 prog        = 'skpathfinder',
                 description = 'Pathfinder operations under convective weather.'
             )
    parser.add_argument('--version', action='version', version=f"skpathfinder {__version__}")
    groups = parser.add_subparsers(dest='group', required=True)

    # markov
    markov_parser = groups.add_parser('markov', help='fix availability chain')
    markov_cmds = markov_parser.add_subparsers(dest='command', required=True)
    cmd = markov_cmds.add_parser('steady', parents=[common], help='stationary distribution')
    cmd.add_argument('--p-good', type=float, required=True)
    cmd.add_argument('--p-accept', type=float, required=True)
    cmd.add_argument('--p-success', type=float, required=True)
    cmd.add_argument('--c', type=float, default=6.0, help='departures per period')
    cmd.add_argument('--lambda-dep', type=float, default=0.0, help='demand per period')
    cmd.set_defaults(handler=_markov_steady)
    cmd = markov_cmds.add_parser('sweep', parents=[common], help='grid of stationary solutions')
    for name in ('--p-good', '--p-accept', '--p-success'):
        cmd.add_argument(name, type=_float_list, default=[0.1, 0.3, 0.5, 0.7, 0.9])
    cmd.set_defaults(handler=_markov_sweep)

    # worstcase
    wc_parser = groups.add_parser('worstcase', help='collective rejection analysis')
    wc_cmds = wc_parser.add_subparsers(dest='command', required=True)
    cmd = wc_cmds.add_parser('baseline', parents=[common])
    _population_options(cmd)
    cmd.set_defaults(handler=_worstcase_baseline)
    cmd = wc_cmds.add_parser('selfless', parents=[common])
    _population_options(cmd)
    cmd.add_argument('--s', type=float, default=1.0, help='selfishness')
    cmd.add_argument('--gamma', type=float, default=1.0)
    cmd.add_argument('--r', type=float, default=0.0, help='perceived rejection risk')
    cmd.set_defaults(handler=_worstcase_selfless)
    cmd = wc_cmds.add_parser('noise', parents=[common])
    _population_options(cmd)
    _noise_options(cmd, theta=1.0)
    cmd.set_defaults(handler=_worstcase_noise)
    cmd = wc_cmds.add_parser('tipping', parents=[common])
    _population_options(cmd)
    _noise_options(cmd, theta=0.0)
    cmd.add_argument('--delta', type=float, default=0.1, help='tolerance')
    cmd.set_defaults(handler=_worstcase_tipping)
    cmd = wc_cmds.add_parser('gradmap', parents=[common])
    cmd.add_argument('--n', type=int, default=10)
    cmd.add_argument('--abs-u', type=float, default=1.0)
    cmd.add_argument('--beta', type=float, default=1.0)
    cmd.add_argument('--alpha-points', type=int, default=101)
    cmd.add_argument('--theta-max', type=float, default=10.0)
    cmd.add_argument('--theta-points', type=int, default=101)
    cmd.add_argument('--kind', choices=list(worstcase.NOISE_KINDS), default='gaussian')
    cmd.add_argument('--nodes', type=int, default=64)
    cmd.set_defaults(handler=_worstcase_gradmap)

    # sim
    sim_parser = groups.add_parser('sim', help='departure simulation')
    sim_cmds = sim_parser.add_subparsers(dest='command', required=True)
    cmd = sim_cmds.add_parser('run', parents=[common])
    _sim_options(cmd)
    cmd.set_defaults(handler=_sim_run)
    cmd = sim_cmds.add_parser('paired', parents=[common])
    _sim_options(cmd)
    cmd.set_defaults(handler=_sim_paired)
    cmd = sim_cmds.add_parser('matrices', parents=[common])
    _sim_options(cmd, plan=False)
    cmd.add_argument('--positions', type=int, default=None,
                     help='number of offer positions (default: one per candidate)')
    cmd.set_defaults(handler=_sim_matrices)

    # seq
    seq_parser = groups.add_parser('seq', help='offer sequencing')
    seq_cmds = seq_parser.add_subparsers(dest='command', required=True)
    cmd = seq_cmds.add_parser('solve', parents=[common])
    cmd.add_argument('--matrices', required=True, help='directory written by `sim matrices`')
    cmd.add_argument('--side', choices=list(sequencer.SIDES), default='atc')
    cmd.add_argument('--lambda', dest='lam', type=float, default=0.5)
    cmd.add_argument('--beta', type=float, default=1.0)
    cmd.add_argument('--budget', type=float, default=3.0)
    cmd.add_argument('--p-success', type=float, default=0.9)
    cmd.add_argument('--airline', default=None, help='dispatcher airline filter')
    cmd.set_defaults(handler=_seq_solve)
    cmd = seq_cmds.add_parser('sweep', parents=[common])
    cmd.add_argument('--matrices', required=True, help='directory written by `sim matrices`')
    cmd.add_argument('--side', choices=list(sequencer.SIDES) + ['both'], default='both')
    cmd.add_argument('--B', type=_float_list, default=None)
    cmd.add_argument('--lambda', dest='lam', type=_float_list, default=None)
    cmd.add_argument('--beta', type=_float_list, default=None)
    cmd.add_argument('--p-success', type=float, default=0.9)
    cmd.add_argument('--airline', default=None)
    cmd.set_defaults(handler=_seq_sweep)

    return parser


def main(argv: Optional[List[str]]=None) -> int:
    '''
    Entry point. Returns 0 on success and 1 on any error; invalid arguments
    exit with status 2.
    '''

    args = build_parser().parse_args(argv)

    try:
        args.config_path = args.config or os.environ.get(CONFIG_ENV_VAR) or DEFAULT_CONFIG_PATH
        config = load_config(args.config_path)
        if args.seed is not None:
            config = config.model_copy(update={'rng_seed': args.seed})
        if args.threads < 1 and args.threads != -1:
            raise PathfinderError(f"`--threads` must be >= 1 or -1. Got {args.threads}.")
        run = _Run(args, config)
        args.handler(run)
        run.close()
    except (PathfinderError, OSError) as exc:
        logging.error(f"{args.group} {args.command}: {exc}")
        return 1

    return 0


if __name__ == '__main__':
    sys.exit(main())
