"""
Numerical design of self-refocusing pulses.

The envelope is an even Hermite series about the pulse midpoint (so it is
time-symmetric by construction) whose leading coefficient is held at 1;
the remaining coefficients are tuned by Nelder-Mead simplex descent until
the selected defect parameters vanish.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import InvalidArgument, InvalidShape, NotConverged
from .pulse import PulseShape, compute_params, _raw_params

__all__ = ['SearchProblem', 'SearchResult', 'solve', 'verify_order',
           'DEFAULT_SEEDS', 'default_problem']

log = logging.getLogger(__name__)

TARGETS = ('s', 'alpha')
N_RESTARTS = 8
#: Quadrature nodes used inside the optimizer loop.
SEARCH_NODES = 1024

#: Gaussian-dominant starting points, keyed by target set.
DEFAULT_SEEDS = {
    ('s',): dict(width_fraction=0.2, coefficients=(1.0, -0.57, 0.0)),
    # near the compact (zeta ~ 0.24) branch of s = alpha = 0 solutions
    ('alpha', 's'): dict(width_fraction=0.2,
                         coefficients=(1.0, -0.86, 0.90, 0.0, 0.0)),
}


@dataclass(frozen=True)
class SearchProblem:
    """What to zero and over which envelope family.

    ``bounds`` is either None or one ``(low, high)`` pair per coefficient
    (the first, fixed coefficient's pair is ignored).
    """
    width_fraction: float
    n_coefficients: int
    targets: tuple = ('s',)
    bounds: tuple | None = None
    tolerance: float = 1e-8
    perturbation: float = 0.05
    max_evaluations: int = 1500

    def __post_init__(self):
        targets = tuple(sorted(set(self.targets)))
        if not set(targets) <= set(TARGETS):
            raise InvalidArgument(f'targets must be a subset of {TARGETS}')
        object.__setattr__(self, 'targets', targets)
        if self.n_coefficients < len(targets) + 1:
            raise InvalidArgument('need at least one coefficient per target '
                                  'plus one free direction')
        if self.bounds is not None and len(self.bounds) != self.n_coefficients:
            raise InvalidArgument('one (low, high) pair per coefficient')


@dataclass
class SearchResult:
    shape: PulseShape
    residuals: tuple
    zeta: float
    iterations: int
    converged: bool
    params: object = field(default=None, repr=False)
    restart: int = 0

    def to_dict(self, sample_points=257):
        from .pulse import shape_to_dict
        return {
            'shape': shape_to_dict(self.shape, sample_points),
            'residuals': {'s': self.residuals[0], 'alpha': self.residuals[1]},
            's': self.params.s, 'alpha': self.params.alpha,
            'zeta': self.zeta, 'iterations': self.iterations,
            'converged': self.converged, 'restart': self.restart,
        }


def default_problem(targets=('s',), tolerance=None, **overrides):
    targets = tuple(sorted(set(targets)))
    seed = DEFAULT_SEEDS[targets]
    if tolerance is None:
        tolerance = 1e-8 if targets == ('s',) else 1e-6
    kw = dict(width_fraction=seed['width_fraction'],
              n_coefficients=len(seed['coefficients']),
              targets=targets, tolerance=tolerance)
    kw.update(overrides)
    return SearchProblem(**kw), list(seed['coefficients'])


def _residual_vector(problem, free, lead):
    try:
        shape = PulseShape.hermite(problem.width_fraction, (lead, *free))
        s, alpha, _ = _raw_params(shape, SEARCH_NODES)
    except (InvalidShape, FloatingPointError):
        return None
    values = {'s': s, 'alpha': alpha}
    return np.array([values[t] for t in problem.targets])


def solve(problem: SearchProblem, seed_coefficients, rng_seed: int = 0,
          *, raise_on_failure: bool = False) -> SearchResult:
    """Tune the envelope until the targeted defect parameters vanish.

    Restart 0 starts from ``seed_coefficients``; the other restarts start
    from deterministic perturbations of it drawn from ``rng_seed``. Among
    restarts that reach the tolerance with a 100x margin the one closest
    to the seed wins, which keeps the answer on the seed's solution
    branch; if none do, the smallest residual wins. Ties go to the lower
    index.

    Raises
    ------
    NotConverged
        Only with ``raise_on_failure``; otherwise ``converged`` is False.
    """
    seed = np.asarray(seed_coefficients, dtype=float)
    if seed.shape != (problem.n_coefficients,):
        raise InvalidArgument(f'expected {problem.n_coefficients} seed '
                              f'coefficients, got {seed.size}')
    lead = seed[0]
    if not problem.targets:
        return _finish(problem, seed, 0, 0, raise_on_failure)

    def objective(free):
        r = _residual_vector(problem, free, lead)
        return 1e6 if r is None else float(r @ r)

    bounds = None
    if problem.bounds is not None:
        bounds = [tuple(b) for b in problem.bounds[1:]]
    rng = np.random.default_rng(rng_seed)
    scale = problem.perturbation * np.maximum(np.abs(seed[1:]), 0.1)
    starts = [seed[1:]] + [seed[1:] + scale * rng.standard_normal(seed.size - 1)
                           for _ in range(N_RESTARTS - 1)]
    if bounds is not None:
        lo, hi = np.array(bounds, dtype=float).T
        starts = [np.clip(x, lo, hi) for x in starts]
    runs = []
    total = 0
    for k, x0 in enumerate(starts):
        res = minimize(objective, x0, method='Nelder-Mead', bounds=bounds,
                       options=dict(xatol=1e-13, fatol=1e-30, adaptive=True,
                                    maxfev=problem.max_evaluations))
        total += res.nfev
        log.debug('restart %d: residual %.3e after %d evaluations',
                  k, res.fun, res.nfev)
        runs.append((res.fun, np.linalg.norm(res.x - seed[1:]), k, res.x))
    good = [r for r in runs if np.sqrt(r[0]) <= 0.01 * problem.tolerance]
    if good:
        best = min(good, key=lambda r: (r[1], r[2]))
    else:
        best = min(runs, key=lambda r: (r[0], r[2]))
    coeffs = np.concatenate([[lead], best[3]])
    return _finish(problem, coeffs, total, best[2], raise_on_failure)


def _finish(problem, coeffs, iterations, restart, raise_on_failure):
    shape = PulseShape.hermite(problem.width_fraction, coeffs)
    params = compute_params(shape)
    residuals = (abs(params.s), abs(params.alpha))
    targeted = [r for r, t in zip(residuals, TARGETS) if t in problem.targets]
    converged = all(r <= problem.tolerance for r in targeted)
    result = SearchResult(shape, residuals, params.zeta, iterations,
                          converged, params, restart)
    if not converged and raise_on_failure:
        raise NotConverged(f'residuals {residuals} above tolerance '
                           f'{problem.tolerance}', result)
    return result


def verify_order(result: SearchResult, couplings, taus=None, steps=1024):
    """Fitted deviation slopes of the two eight-pulse catalog sequences
    built from ``result.shape``.

    Returns a dict mapping sequence name to slope; with an s = alpha = 0
    pulse both should be near 2, with s = 0 only the second one.
    """
    from .sequence import parse_sequence, order_scan
    from .model import SIGMA_I
    if taus is None:
        taus = np.geomspace(0.05, 0.0015, 6)
    ref = np.kron(SIGMA_I, couplings.a0)
    out = {}
    for name in ('YXY-XXY-XY', 'Y-X-YX-XY-XY'):
        seq = parse_sequence(name, result.shape)
        out[name] = order_scan(seq, couplings, ref, taus, steps=steps).slope
    return out
