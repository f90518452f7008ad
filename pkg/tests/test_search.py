import numpy as np
import pytest

from refocus.errors import InvalidArgument, NotConverged
from refocus.pulse import compute_params, phase_profile, shape_from_dict
from refocus.search import (SearchProblem, default_problem, solve,
                            verify_order)


@pytest.fixture(scope='module')
def s_result():
    problem, seed = default_problem(('s',))
    return solve(problem, seed)


@pytest.fixture(scope='module')
def s_alpha_result():
    problem, seed = default_problem(('s', 'alpha'))
    return solve(problem, seed)


def test_s_target_converges(s_result):
    assert s_result.converged
    assert s_result.residuals[0] <= 1e-8
    # alpha is left free and stays away from zero
    assert s_result.residuals[1] > 1e-2


def test_s_alpha_target_converges(s_alpha_result):
    assert s_alpha_result.converged
    assert max(s_alpha_result.residuals) <= 1e-6


def test_compact_branch_selected(s_alpha_result):
    # restarts reaching other, wider solutions must not win over the seed's
    assert 0.2 < s_alpha_result.zeta < 0.3


def test_deterministic(s_result):
    problem, seed = default_problem(('s',))
    again = solve(problem, seed)
    assert again.shape.coefficients == s_result.shape.coefficients


def test_result_passes_pulse_invariants(s_alpha_result):
    shape = s_alpha_result.shape
    assert shape.is_symmetric
    assert phase_profile(shape)(shape.duration) == pytest.approx(np.pi,
                                                                 abs=1e-12)
    a = compute_params(shape, nodes=4096)
    b = compute_params(shape, nodes=8192)
    assert abs(a.s - b.s) <= 1e-12 and abs(a.alpha - b.alpha) <= 1e-12


def test_to_dict_reloads(s_result):
    d = s_result.to_dict()
    shape = shape_from_dict(d['shape'])
    assert compute_params(shape).s == pytest.approx(d['s'], abs=1e-14)
    sampled = shape_from_dict({'kind': 'sampled',
                               'samples': d['shape']['envelope']})
    assert abs(compute_params(sampled).s) < 1e-4


def test_verify_order(cavity, s_result, s_alpha_result):
    first = verify_order(s_result, cavity)
    assert first['Y-X-YX-XY-XY'] >= 1.7
    assert first['YXY-XXY-XY'] == pytest.approx(1, abs=0.3)
    second = verify_order(s_alpha_result, cavity)
    assert min(second.values()) >= 1.7


def test_failure_is_reported():
    problem, seed = default_problem(('s',), max_evaluations=5)
    result = solve(problem, seed)
    assert not result.converged
    with pytest.raises(NotConverged) as e:
        solve(problem, seed, raise_on_failure=True)
    assert e.value.result.residuals[0] > 1e-8


def test_bounds_are_respected():
    problem = SearchProblem(0.2, 3, ('s',),
                            bounds=((1, 1), (-0.6, -0.5), (-0.1, 0.1)))
    result = solve(problem, [1.0, -0.55, 0.0])
    c = result.shape.coefficients
    assert -0.6 <= c[1] <= -0.5 and -0.1 <= c[2] <= 0.1
    assert result.converged


@pytest.mark.parametrize('kw', [
    dict(targets=('zeta',)),
    dict(n_coefficients=1),
    dict(bounds=((0, 1),)),
])
def test_invalid_problems(kw):
    args = dict(width_fraction=0.2, n_coefficients=3, targets=('s',))
    args.update(kw)
    with pytest.raises(InvalidArgument):
        SearchProblem(**args)


def test_seed_length_checked():
    problem, _ = default_problem(('s',))
    with pytest.raises(InvalidArgument):
        solve(problem, [1.0])
