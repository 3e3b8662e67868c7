import logging
import pytest
from pytest import approx
import numpy as np
import pandas as pd
from skpathfinder.config import SimConfig
from skpathfinder.datasets import load_jfk_departures
from skpathfinder.depsim import ParamMatrices
from skpathfinder.depsim import compute_param_matrices
from skpathfinder.sequencer import SequenceProblem
from skpathfinder.sequencer import SweepGrid
from skpathfinder.sequencer import normalize
from skpathfinder.sequencer import airline_of
from skpathfinder.sequencer import build_problem
from skpathfinder.sequencer import objective_value
from skpathfinder.sequencer import solve_exact
from skpathfinder.sequencer import solve_bruteforce
from skpathfinder.sequencer import relative_selection_ratio
from skpathfinder.sequencer import selected_risk_metric
from skpathfinder.sequencer import assignment_matrix
from skpathfinder.sequencer import sweep
from skpathfinder.sequencer import lambda_sensitivity
from skpathfinder.sequencer import beta_sensitivity
from skpathfinder.exceptions import DomainError, InfeasibleSequenceError


@pytest.fixture(scope='module')
def jfk_matrices():
    return compute_param_matrices(load_jfk_departures(), SimConfig())


def make_problem(p, u, e=None, budget=3, side='atc', raw_G=None):
    p = np.asarray(p, dtype=float)
    return SequenceProblem(
               candidates = [f"F{i}" for i in range(p.shape[0])],
               p          = p,
               u          = np.asarray(u, dtype=float),
               e          = np.ones_like(p) if e is None else np.asarray(e, dtype=float),
               budget     = budget,
               side       = side,
               raw_G      = raw_G
           )


def random_problem(rng, uniform_cost=True):
    n = int(rng.integers(0, 7))
    K = int(rng.integers(1, 7))
    p = rng.uniform(0.01, 0.99, size=(n, K))
    u = rng.uniform(-1, 1, size=(n, K))
    if uniform_cost:
        e = np.ones((n, K))
    else:
        e = rng.integers(1, 3, size=(n, K)).astype(float)
    budget = int(rng.integers(1, 5))
    return make_problem(p, u, e, budget)


def small_matrices():
    index = pd.Index(['AAA1', 'BBB2', 'AAA3'], name='callsign')
    columns = [1, 2]
    frame = lambda values: pd.DataFrame(values, index=index, columns=columns, dtype=float)
    return ParamMatrices(
               T      = frame([[10, 5], [0, 0], [20, 20]]),
               B_dep  = frame([[10, 5], [0, 0], [20, 20]]),
               D_sys  = frame([[30, 10], [0, 0], [15, 15]]),
               G_ATC  = frame([[2, 2], [0, 0], [4, 4]]),
               G_disp = frame([[3, 3], [0, 0], [4, 4]])
           )


def check_feasibility(problem, result):
    rows = result.rows
    assert len(set(rows)) == len(rows)
    assert len(rows) <= problem.n_positions
    assert sum(problem.e[row, k] for k, row in enumerate(rows)) <= problem.budget


# Test normalize and build_problem
#-------------------------------------------------------------------------------
def test_normalize_constant_matrix_is_zero():

    assert (normalize(np.full((2, 3), 7.0)) == 0).all()


def test_normalize_is_idempotent_on_unit_range():

    matrix = np.array([[0.0, 0.25], [1.0, 0.5]])
    assert normalize(matrix) == approx(matrix, abs=1e-12)


def test_build_problem_beta_zero_gives_half_probabilities():

    problem = build_problem(small_matrices(), lam=0.3, beta=0)
    assert (problem.p == 0.5).all()


def test_build_problem_lambda_zero_atc_is_normalized_d_sys():

    matrices = small_matrices()
    problem = build_problem(matrices, lam=0, beta=1, side='atc')
    assert (problem.u == normalize(matrices.D_sys)).all()


def test_build_problem_dispatcher_penalty():

    matrices = small_matrices()
    problem = build_problem(matrices, lam=0.5, beta=1, side='dispatcher')
    expected = normalize(matrices.B_dep) - 0.5 * normalize(matrices.G_disp)
    assert problem.u == approx(expected, abs=1e-15)
    assert (problem.raw_G == matrices.G_disp.values).all()


def test_build_problem_airline_filter():

    problem = build_problem(small_matrices(), lam=0, beta=1, side='dispatcher', airline='AAA')
    assert problem.candidates == ['AAA1', 'AAA3']
    assert problem.p.shape == (2, 2)


def test_build_problem_clips_saturated_probabilities():

    problem = build_problem(small_matrices(), lam=0, beta=1e6)
    assert (problem.p < 1).all() and (problem.p > 0).all()


def test_build_problem_exception_when_side_unknown():

    with pytest.raises(DomainError):
        build_problem(small_matrices(), lam=0, beta=1, side='pilot')


def test_airline_of_callsign():

    assert airline_of('DAL1') == 'DAL'
    assert airline_of('RPA4535') == 'RPA'


def test_sequence_problem_exception_when_shapes_mismatch():

    with pytest.raises(DomainError):
        make_problem(np.full((2, 2), 0.5), np.zeros((2, 3)))


def test_sequence_problem_exception_when_budget_not_positive():

    with pytest.raises(DomainError):
        make_problem(np.full((2, 2), 0.5), np.zeros((2, 2)), budget=0)


# Test objective_value
#-------------------------------------------------------------------------------
def test_objective_value_single_offer():

    problem = make_problem([[0.3, 0.2]], [[2.0, 1.0]])
    assert objective_value(problem, ['F0']) == approx(0.6)


def test_objective_value_survival_sum():

    problem = make_problem(np.full((3, 3), 0.5), np.ones((3, 3)))
    assert objective_value(problem, [0, 1, 2]) == approx(0.875)


def test_objective_value_certain_first_acceptance():

    p = np.array([[1 - 1e-12, 0.5], [0.5, 0.5]])
    problem = make_problem(p, np.ones((2, 2)))
    assert objective_value(problem, [0, 1]) == approx(objective_value(problem, [0]), abs=1e-11)


def test_objective_value_empty_sequence():

    problem = make_problem(np.full((2, 2), 0.5), np.ones((2, 2)))
    assert objective_value(problem, []) == 0


def test_objective_value_exception_when_flight_repeated():

    problem = make_problem(np.full((2, 2), 0.5), np.ones((2, 2)))
    with pytest.raises(InfeasibleSequenceError):
        objective_value(problem, [0, 0])


def test_objective_value_exception_when_over_budget():

    problem = make_problem(np.full((3, 3), 0.5), np.ones((3, 3)), budget=2)
    with pytest.raises(InfeasibleSequenceError):
        objective_value(problem, [0, 1, 2])


# Test solve_exact
#-------------------------------------------------------------------------------
def test_solve_exact_single_offer_budget():

    p = np.array([[0.2, 0.5], [0.6, 0.5], [0.9, 0.5]])
    u = np.array([[1.0, 1.0], [0.5, 1.0], [0.2, 1.0]])
    result = solve_exact(make_problem(p, u, budget=1))
    assert result.rows == (1,)
    assert result.objective == approx(0.3)


def test_solve_exact_all_negative_is_empty():

    rng = np.random.default_rng(0)
    problem = make_problem(rng.uniform(0.1, 0.9, (4, 4)), -rng.uniform(0.1, 1, (4, 4)))
    result = solve_exact(problem)
    assert result.rows == ()
    assert result.objective == 0


def test_solve_exact_budget_below_every_cost_is_empty():

    problem = make_problem(np.full((3, 3), 0.5), np.ones((3, 3)), e=np.full((3, 3), 2.0), budget=1)
    result = solve_exact(problem)
    assert result.rows == ()
    assert result.method == 'branch-and-bound' or result.method == 'subset-dp'


def test_solve_exact_uses_subset_dp_for_uniform_costs():

    problem = make_problem(np.full((3, 3), 0.5), np.ones((3, 3)))
    assert solve_exact(problem).method == 'subset-dp'


def test_solve_exact_logs_solver_path(caplog):

    uniform = make_problem(np.full((3, 3), 0.5), np.ones((3, 3)))
    mixed = make_problem(np.full((3, 3), 0.5), np.ones((3, 3)), e=np.arange(1, 10).reshape(3, 3) / 9)
    with caplog.at_level(logging.INFO):
        solve_exact(uniform)
        solve_exact(mixed)
    messages = [r.getMessage() for r in caplog.records if r.levelno == logging.INFO]
    assert any("'subset-dp'" in m for m in messages)
    assert any("'branch-and-bound'" in m for m in messages)


def test_solve_exact_matches_bruteforce_on_random_instances():

    rng = np.random.default_rng(2025)
    for i in range(200):
        problem = random_problem(rng, uniform_cost=(i % 2 == 0))
        exact = solve_exact(problem)
        brute = solve_bruteforce(problem)
        assert exact.objective == approx(brute.objective, abs=1e-9)
        check_feasibility(problem, exact)
        assert objective_value(problem, exact.sequence) == approx(exact.objective, abs=1e-12)


def test_solve_exact_reach_is_survival_product():

    rng = np.random.default_rng(5)
    problem = make_problem(rng.uniform(0.1, 0.5, (6, 6)), rng.uniform(0.5, 1, (6, 6)), budget=5)
    result = solve_exact(problem)
    reach = result.sequence.reach
    assert reach[0] == 1.0
    assert all(later <= earlier for earlier, later in zip(reach, reach[1:]))
    survival = 1.0
    for k, row in enumerate(result.rows):
        assert reach[k] == approx(survival, abs=1e-12)
        survival *= 1 - problem.p[row, k]


def test_solve_exact_stopping_is_locally_optimal():

    rng = np.random.default_rng(11)
    for _ in range(50):
        problem = random_problem(rng)
        result = solve_exact(problem)
        rows = list(result.rows)
        k = len(rows)
        if k >= problem.n_positions or sum(problem.e[r, j] for j, r in enumerate(rows)) + 1 > problem.budget:
            continue
        for extra in range(problem.n_candidates):
            if extra in rows:
                continue
            extended = objective_value(problem, rows + [extra])
            assert extended <= result.objective + 1e-9


def test_solve_exact_branch_and_bound_matches_subset_dp():

    rng = np.random.default_rng(3)
    for _ in range(30):
        problem = random_problem(rng)
        dp = solve_exact(problem)
        problem.e = problem.e.copy()
        if problem.e.size:
            # Tiny cost perturbation forces the non-uniform path, same feasible set.
            problem.e[0, 0] = 1.0 - 1e-9
        bb = solve_exact(problem)
        assert bb.objective == approx(dp.objective, abs=1e-9)


# Test solve_bruteforce
#-------------------------------------------------------------------------------
def test_solve_bruteforce_single_candidate():

    problem = make_problem([[0.4]], [[0.5]])
    assert solve_bruteforce(problem).objective == approx(0.2)
    problem = make_problem([[0.4]], [[-0.5]])
    assert solve_bruteforce(problem).objective == 0


def test_solve_bruteforce_empty_candidate_set():

    problem = make_problem(np.zeros((0, 3)), np.zeros((0, 3)))
    assert solve_bruteforce(problem).objective == 0
    assert solve_exact(problem).objective == 0


def test_solve_bruteforce_exception_when_too_many_candidates():

    problem = make_problem(np.full((9, 2), 0.5), np.ones((9, 2)))
    with pytest.raises(DomainError):
        solve_bruteforce(problem)


# Test diagnostics
#-------------------------------------------------------------------------------
def test_relative_selection_ratio_uniform_probabilities():

    problem = make_problem(np.full((3, 3), 0.4), np.ones((3, 3)))
    result = solve_exact(problem)
    assert relative_selection_ratio(problem, result) == approx(1.0)


def test_relative_selection_ratio_single_max_cell():

    p = np.array([[0.8, 0.1], [0.2, 0.1]])
    u = np.array([[1.0, -1.0], [-1.0, -1.0]])
    problem = make_problem(p, u)
    result = solve_exact(problem)
    assert result.rows == (0,)
    assert relative_selection_ratio(problem, result) == approx(0.8 / 0.3)


def test_relative_selection_ratio_undefined_when_empty():

    problem = make_problem(np.full((2, 2), 0.5), -np.ones((2, 2)))
    result = solve_exact(problem)
    assert relative_selection_ratio(problem, result) is None
    assert selected_risk_metric(problem, result, raw_G=np.ones((2, 2))) is None


def test_selected_risk_metric_mean_of_selected_cells():

    p = np.full((2, 2), 0.5)
    raw_G = np.array([[2.0, 9.0], [9.0, 4.0]])
    problem = make_problem(p, np.array([[1.0, 0.1], [0.1, 1.0]]), raw_G=raw_G)
    result = solve_exact(problem)
    assert result.rows == (0, 1)
    assert selected_risk_metric(problem, result) == approx(3.0)


def test_assignment_matrix_marks_selected_cells():

    problem = make_problem(np.full((2, 2), 0.5), np.array([[1.0, 0.1], [0.1, 1.0]]))
    result = solve_exact(problem)
    matrix = assignment_matrix(problem, result)
    assert matrix.values.tolist() == [[1, 0], [0, 1]]
    assert matrix.columns.tolist() == [1, 2]


# Test sweep
#-------------------------------------------------------------------------------
def test_sweep_grid_standard_size():

    assert len(SweepGrid.standard()) == 660


def test_sweep_grid_exception_when_empty():

    with pytest.raises(DomainError):
        SweepGrid(B_values=[], lambda_values=[0], beta_values=[0])


def test_sweep_single_point_equals_solve_exact():

    matrices = small_matrices()
    table = sweep(matrices, SweepGrid([2], [0.5], [1]), side='atc')
    result = solve_exact(build_problem(matrices, lam=0.5, beta=1, side='atc', budget=2))
    assert len(table) == 1
    assert table['objective'].iloc[0] == result.objective
    assert table['sequence'].iloc[0] == ';'.join(result.callsigns)


def test_sweep_is_deterministic_and_sorted():

    matrices = small_matrices()
    grid = SweepGrid([2, 1], [1.0, 0.0], [0, 3])
    first = sweep(matrices, grid, side='dispatcher')
    second = sweep(matrices, grid, side='dispatcher', n_jobs=2)
    columns = ['side', 'B', 'lambda', 'beta', 'objective', 'sequence', 'Rp', 'avg_G']
    pd.testing.assert_frame_equal(first[columns], second[columns])
    assert first[['B', 'lambda', 'beta']].values.tolist() == sorted(
               first[['B', 'lambda', 'beta']].values.tolist()
           )


def test_sweep_standard_grid_on_jfk_instance(jfk_matrices):

    table = sweep(jfk_matrices, SweepGrid.standard(), side='atc')
    assert len(table) == 660
    assert table.columns.tolist() == [
               'side', 'B', 'lambda', 'beta', 'objective', 'sequence', 'Rp', 'avg_G', 'runtime_ms'
           ]
    assert (table['runtime_ms'] < 1000).all()
    assert (lambda_sensitivity(table)['lambda'].nunique()) == 11
    assert (beta_sensitivity(table)['beta'].nunique()) == 6


def test_relative_selection_ratio_non_decreasing_in_beta_on_jfk_instance(jfk_matrices):

    for side in ['atc', 'dispatcher']:
        ratios = []
        for beta in [0, 1, 2, 3, 4, 5]:
            problem = build_problem(jfk_matrices, lam=0.5, beta=beta, side=side, budget=3)
            ratio = relative_selection_ratio(problem, solve_exact(problem))
            assert ratio is not None
            ratios.append(ratio)
        assert all(later >= earlier - 1e-12 for earlier, later in zip(ratios, ratios[1:]))


def test_build_problem_identical_after_csv_round_trip(jfk_matrices, tmp_path):

    jfk_matrices.to_csv(tmp_path)
    first = build_problem(ParamMatrices.from_csv(tmp_path), lam=0.5, beta=1)
    second = build_problem(ParamMatrices.from_csv(tmp_path), lam=0.5, beta=1)
    assert (first.p == second.p).all()
    assert (first.u == second.u).all()
