"""
Monte-Carlo coherence under a classical correlated random field.

The field is an Ornstein-Uhlenbeck process with autocovariance
``amplitude**2 * exp(-cutoff |t - t'|)``. It is sampled at the integrator
step midpoints and held constant over each step, and enters the
Hamiltonian as ``x(t) * F`` for a fixed channel operator ``F``
(``sigma_z (x) 1`` by default, i.e. pure qubit dephasing).

Fidelity is the Uhlmann fidelity (squared convention) between the
reduced qubit state of a noisy realization and the noiseless reduced
state at the same time.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, asdict

import numpy as np

from .errors import InvalidArgument
from .model import PAULI, CouplingSet, check_fock_population, qubit_op
from .propagator import FieldStepper
from .sequence import SequenceSpec

__all__ = ['NoiseConfig', 'EnsembleResult', 'RatePoint', 'sample_ou_path',
           'run_ensemble', 'rate_scan', 'channel_operator', 'qubit_fidelity',
           'realization_seeds', 'partial_trace_aux']

CHANNELS = ('sz', 'sx', 'sy', 'number', 'identity')
#: Fewest steps per delta-pulse period slot (the kick sits in the middle).
MIN_DELTA_STEPS = 16


@dataclass(frozen=True)
class NoiseConfig:
    """Field statistics and ensemble settings.

    Parameters
    ----------
    cutoff : float
        Inverse correlation time of the field (angular frequency).
    amplitude : float
        RMS field strength (angular frequency).
    channel : str or ndarray
        One of 'sz', 'sx', 'sy' (qubit Pauli (x) 1), 'number' (1 (x) b^dag b,
        i.e. a fluctuating cavity detuning), 'identity' (a global phase),
        or an explicit full-space Hermitian matrix.
    realizations : int
    seed : int
        Master seed; realization ``k`` draws from ``(seed, k)``.
    time_step : float, optional
        Upper bound on the integrator step, at most ``0.1/cutoff``;
        defaults to ``0.05/cutoff``. Each pulse additionally gets at least
        256 steps (shaped) or 16 (delta), so the step is also well below
        ``0.1 tau_p``.
    """
    cutoff: float
    amplitude: float
    channel: object = 'sz'
    realizations: int = 100
    seed: int = 0
    time_step: float | None = None

    def __post_init__(self):
        if not self.cutoff > 0:
            raise InvalidArgument('cutoff must be positive')
        if self.amplitude < 0:
            raise InvalidArgument('amplitude must be non-negative')
        if self.time_step is None:
            object.__setattr__(self, 'time_step', 0.05 / self.cutoff)
        if not 0 < self.time_step <= 0.1 / self.cutoff * (1 + 1e-12):
            raise InvalidArgument('time_step must lie in (0, 0.1/cutoff]')
        if isinstance(self.channel, str) and self.channel not in CHANNELS:
            raise InvalidArgument(f'channel must be one of {CHANNELS} '
                                  'or a matrix')

    def to_dict(self):
        d = asdict(self)
        if not isinstance(self.channel, str):
            from .model import matrix_to_json
            d['channel'] = matrix_to_json(self.channel)
        return d


@dataclass
class EnsembleResult:
    times: np.ndarray
    mean_fidelity: np.ndarray
    stderr: np.ndarray
    seeds: list
    fidelities: np.ndarray = field(default=None, repr=False)
    steps_per_period: int = 0

    @property
    def final_infidelity(self):
        return float(1 - self.mean_fidelity[-1])

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator='\n')
        w.writerow(['time', 'mean_fidelity', 'stderr'])
        for row in zip(self.times, self.mean_fidelity, self.stderr):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class RatePoint:
    ratio: float
    infidelity: float
    stderr: float
    total_time: float


def channel_operator(channel, dim):
    """Full-space operator multiplied by the field."""
    if not isinstance(channel, str):
        op = np.asarray(channel, dtype=complex)
        if op.shape != (2 * dim, 2 * dim):
            raise InvalidArgument(f'channel matrix must be {2 * dim}x{2 * dim}')
        if not np.allclose(op, op.conj().T, atol=1e-12):
            raise InvalidArgument('channel matrix must be Hermitian')
        return op
    if channel == 'number':
        return np.kron(PAULI['I'], np.diag(np.arange(dim)).astype(complex))
    if channel == 'identity':
        return np.eye(2 * dim, dtype=complex)
    return qubit_op(channel[1].upper(), dim)


def realization_seeds(seed, count):
    """Independent per-realization seeds derived from ``(seed, k)``."""
    return [int(np.random.SeedSequence([int(seed), k]).generate_state(
        1, dtype=np.uint64)[0]) for k in range(count)]


def _ou(n, h, cutoff, amplitude, rng):
    """Exact OU update on a uniform grid, started in the stationary state."""
    decay = math.exp(-cutoff * h)
    kick = amplitude * math.sqrt(-math.expm1(-2 * cutoff * h))
    xi = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = amplitude * xi[0]
    for k in range(1, n):
        x[k] = x[k - 1] * decay + kick * xi[k]
    return x


def sample_ou_path(config: NoiseConfig, duration: float, seed: int):
    """OU path on the step midpoints of ``[0, duration]``.

    The step is ``duration / ceil(duration / config.time_step)``.

    Returns
    -------
    times, values : ndarray
    """
    if not duration > 0:
        raise InvalidArgument('duration must be positive')
    n = max(1, math.ceil(duration / config.time_step - 1e-9))
    h = duration / n
    x = _ou(n, h, config.cutoff, config.amplitude, np.random.default_rng(seed))
    return (np.arange(n) + 0.5) * h, x


def partial_trace_aux(rho, dim):
    """Reduced qubit state of a qubit (x) auxiliary density matrix."""
    return np.einsum('iaja->ij', rho.reshape(2, dim, 2, dim))


def qubit_fidelity(rho, sigma):
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho) sigma sqrt(rho)))**2`` of two
    qubit states, via ``tr(rho sigma) + 2 sqrt(det rho det sigma)``."""
    if np.array_equal(rho, sigma):
        return 1.0
    overlap = np.real(np.trace(rho @ sigma))
    det = max(np.real(np.linalg.det(rho)), 0.0) * max(
        np.real(np.linalg.det(sigma)), 0.0)
    return float(np.clip(overlap + 2 * math.sqrt(det), 0.0, 1.0))


def _initial_state(bloch, thermal, dim):
    r = np.asarray(bloch, dtype=float)
    if r.shape != (3,) or np.linalg.norm(r) > 1 + 1e-12:
        raise InvalidArgument('initial qubit state must be a Bloch vector '
                              'of length <= 1')
    rho_q = 0.5 * (PAULI['I'] + r[0] * PAULI['X'] + r[1] * PAULI['Y']
                   + r[2] * PAULI['Z'])
    if thermal is None:
        pops = np.zeros(dim)
        pops[0] = 1
    else:
        pops = np.asarray(thermal, dtype=float)
        if pops.shape != (dim,) or np.any(pops < 0):
            raise InvalidArgument(f'thermal populations need {dim} '
                                  'non-negative entries')
        pops = pops / pops.sum()
    return np.kron(rho_q, np.diag(pops).astype(complex))


def _plan(seq, couplings, config, period):
    """Steppers for one period, in time order, sharing one step size."""
    op = channel_operator(config.channel, couplings.dim)
    if seq is None:
        if period is None or not period > 0:
            raise InvalidArgument('free evolution needs a positive period')
        steps = max(2, math.ceil(period / config.time_step - 1e-9))
        return [FieldStepper(None, None, couplings, steps, op, period)], steps
    tau_p = seq.shape.duration
    floor = MIN_DELTA_STEPS if seq.shape.kind == 'delta' else 256
    steps = max(floor, math.ceil(tau_p / config.time_step - 1e-9))
    steps += steps % 2
    cache = {}
    plan = []
    for ax in seq.pulses:
        if ax not in cache:
            cache[ax] = FieldStepper(seq.shape, ax, couplings, steps, op)
        plan.append(cache[ax])
    return plan, steps


def _run_path(plan, steps, x, rho0, n_periods):
    """Reduced qubit states after each period along the field ``x``."""
    dim = rho0.shape[0] // 2
    rho = rho0
    out = []
    per = len(plan)
    for p in range(n_periods):
        u = np.eye(rho0.shape[0], dtype=complex)
        for j, stepper in enumerate(plan):
            k = (p * per + j) * steps
            u = stepper(x[k:k + steps]).unitary @ u
        rho = u @ rho @ u.conj().T
        out.append(partial_trace_aux(rho, dim))
    return out, rho


def run_ensemble(seq: SequenceSpec | None, couplings: CouplingSet,
                 config: NoiseConfig, n_periods: int, bloch=(1.0, 0.0, 0.0),
                 *, thermal=None, period=None, workers: int = 1
                 ) -> EnsembleResult:
    """Mean qubit fidelity after each of ``n_periods`` periods of ``seq``.

    Parameters
    ----------
    seq : SequenceSpec or None
        ``None`` runs free evolution, recorded every ``period``.
    couplings : CouplingSet
    config : NoiseConfig
    n_periods : int
    bloch : sequence of 3 floats
        Initial qubit Bloch vector; the auxiliary system starts in its
        ground state, or in the Fock-diagonal mixture ``thermal``.
    workers : int
        Threads over realizations. Results do not depend on it.

    Raises
    ------
    InvalidArgument
        Fewer than two realizations, or inconsistent arguments.
    """
    if config.realizations < 2:
        raise InvalidArgument('need at least two realizations')
    if n_periods < 1:
        raise InvalidArgument('n_periods must be positive')
    plan, steps = _plan(seq, couplings, config, period)
    per = len(plan)
    duration = plan[0].duration
    h = duration / steps
    total = n_periods * per * steps
    rho0 = _initial_state(bloch, thermal, couplings.dim)
    reference, rho_end = _run_path(plan, steps, np.zeros(total), rho0, n_periods)
    if couplings.dim > 2:
        check_fock_population(rho_end, couplings.dim)
    seeds = realization_seeds(config.seed, config.realizations)

    def one(s):
        x = _ou(total, h, config.cutoff, config.amplitude,
                np.random.default_rng(s))
        states, _ = _run_path(plan, steps, x, rho0, n_periods)
        return [qubit_fidelity(a, b) for a, b in zip(states, reference)]

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            fids = np.array(list(pool.map(one, seeds)))
    else:
        fids = np.array([one(s) for s in seeds])
    times = duration * per * np.arange(1, n_periods + 1)
    return EnsembleResult(times, fids.mean(axis=0),
                          fids.std(axis=0, ddof=1) / math.sqrt(len(seeds)),
                          seeds, fids, per * steps)


def rate_scan(seq: SequenceSpec, couplings: CouplingSet, config: NoiseConfig,
              omegas, total_time: float, bloch=(1.0, 0.0, 0.0), *,
              workers: int = 1) -> list:
    """Final infidelity versus ``Omega/cutoff`` at (nearly) fixed total time.

    ``Omega = 2 pi / period`` is varied through the pulse length; each run
    covers ``round(total_time * Omega / 2 pi)`` whole periods.
    """
    out = []
    for omega in omegas:
        if not omega > 0:
            raise InvalidArgument('omegas must be positive')
        period = 2 * np.pi / omega
        s = seq.with_tau(period / len(seq.pulses))
        n = max(1, round(total_time / period))
        res = run_ensemble(s, couplings, config, n, bloch, workers=workers)
        out.append(RatePoint(omega / config.cutoff, res.final_infidelity,
                             float(res.stderr[-1]), n * period))
    return out
