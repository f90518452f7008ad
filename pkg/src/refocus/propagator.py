r"""
Time-ordered propagators for a single pulse acting on a qubit coupled
to an auxiliary system, and Hermitian exponential / logarithm helpers.

The default integrator works in the toggling frame of the pulse. With
:math:`R(t) = e^{-i s\sigma_a\phi(t)/2}` the exact propagator is

.. math::

    U(\tau_p) = R(\tau_p)\,\mathcal{T}\exp\Bigl(-i\int_0^{\tau_p}
        R^\dagger(t) H_S(t) R(t)\,dt\Bigr),

and the time-ordered factor is approximated by the exponential midpoint
rule. Since the drive is one-dimensional the rotation is exact, so the
step error only involves :math:`H_S` and not the (much larger) drive.
A plain lab-frame midpoint rule is available with ``frame='lab'``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import polar, schur

from .errors import BranchCutAmbiguity, InvalidArgument, NotConverged
from .model import PAULI, SIGMA_I, CouplingSet, assemble_hamiltonian, parse_axis
from .pulse import PulseShape, phase_profile

__all__ = [
    'Propagation', 'expm_hermitian', 'hermitian_log_unitary',
    'evolve_pulse', 'evolve_free', 'zeroth_order_propagator',
    'unitarity_defect', 'spectral_norm', 'time_ordered_product',
    'FieldStepper', 'DEFAULT_STEPS', 'UNITARITY_TOL',
]

DEFAULT_STEPS = 512
UNITARITY_TOL = 1e-10
REUNITARIZE_AT = 1e-12
BRANCH_MARGIN = 1e-6


@dataclass(frozen=True)
class Propagation:
    unitary: np.ndarray
    step_count: int
    unitarity_defect: float

    def __matmul__(self, other):
        u = self.unitary @ other.unitary
        return Propagation(u, self.step_count + other.step_count,
                           unitarity_defect(u))


def spectral_norm(a):
    """Largest singular value; the norm used for every deviation."""
    return float(np.linalg.norm(a, 2))


def unitarity_defect(u):
    u = np.asarray(u)
    return float(np.max(np.abs(u.conj().T @ u - np.eye(u.shape[0]))))


def _accept(u, steps):
    defect = unitarity_defect(u)
    if defect > REUNITARIZE_AT:
        u = polar(u)[0]
        defect = unitarity_defect(u)
    return Propagation(u, steps, defect)


def expm_hermitian(h, t=1.0):
    """``exp(-i t h)`` for Hermitian ``h`` (or a stack of them)."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * t * w)[..., None, :]) @ np.swapaxes(v.conj(), -1, -2)


def time_ordered_product(factors):
    """``F[n-1] @ ... @ F[1] @ F[0]`` by pairwise reduction."""
    f = np.asarray(factors)
    if len(f) == 0:
        raise InvalidArgument('no factors to multiply')
    while len(f) > 1:
        if len(f) % 2:
            last = f[-1:]
            f = np.concatenate([f[1:-1:2] @ f[:-1:2], last])
        else:
            f = f[1::2] @ f[::2]
    return f[0]


def _rotation(axis, phi):
    """``exp(-i sign sigma phi/2)`` for an array of angles, shape (n, 2, 2)."""
    phi = np.asarray(phi, dtype=float)
    c = np.cos(phi / 2)[..., None, None]
    s = np.sin(phi / 2)[..., None, None]
    return c * SIGMA_I - 1j * axis.sign * s * PAULI[axis.label]


def zeroth_order_propagator(shape: PulseShape, axis, t: float) -> np.ndarray:
    r"""Control-only evolution :math:`e^{-i\sigma_a\phi(t)/2}` on the qubit."""
    axis = parse_axis(axis)
    if not 0 <= t <= shape.duration * (1 + 1e-14):
        raise InvalidArgument(f't={t!r} outside the pulse window')
    if shape.kind == 'delta' and t >= shape.duration:
        phi = shape.target_angle
    else:
        phi = phase_profile(shape)(min(t, shape.duration))
    return _rotation(axis, phi)


def _midpoints(n, duration):
    h = duration / n
    return h, (np.arange(n) + 0.5) * h


def _field_steps(hs, field, h):
    """Per-step propagators of ``hs + x_k F`` for a step-sampled field.

    ``field`` is a ``(values, operator, method)`` triple. ``'split'`` uses
    the symmetric splitting ``e^{-ihxF/2} e^{-ihH} e^{-ihxF/2}`` (same
    local order as the midpoint rule, one eigendecomposition in total);
    ``'exact'`` exponentiates every step.
    """
    values, op, method = field
    if method == 'exact':
        return expm_hermitian(hs + values[:, None, None] * op, h)
    if method != 'split':
        raise InvalidArgument(f'unknown field method {method!r}')
    w, v = np.linalg.eigh(op)
    half = (v * np.exp(-0.5j * h * values[:, None] * w)[:, None, :]) @ v.conj().T
    return half @ expm_hermitian(hs, h) @ half


def _integrate(shape, axis, hs, steps, frame, field=None):
    """One fixed-step pass, optionally with a step-sampled field (see
    :func:`_field_steps`)."""
    dim = hs.shape[0] // 2
    eye = np.eye(dim)
    h, tm = _midpoints(steps, shape.duration)
    if frame == 'lab':
        drive = shape.envelope(tm) * axis.sign / 2
        ham = hs + drive[:, None, None] * np.kron(axis.sigma, eye)
        if field is not None:
            ham = ham + field[0][:, None, None] * field[1]
        return time_ordered_product(expm_hermitian(ham, h))
    if frame != 'toggling':
        raise InvalidArgument(f'unknown frame {frame!r}')
    prof = phase_profile(shape)
    rot = _rotation(axis, prof(tm))
    rot = np.einsum('kij,ab->kiajb', rot, eye).reshape(steps, 2 * dim, 2 * dim)
    step = expm_hermitian(hs, h) if field is None else _field_steps(hs, field, h)
    factors = np.swapaxes(rot.conj(), -1, -2) @ step @ rot
    end = np.kron(_rotation(axis, shape.target_angle), eye)
    return end @ time_ordered_product(factors)


def _as_hamiltonian(couplings):
    if isinstance(couplings, CouplingSet):
        return assemble_hamiltonian(couplings)
    return np.asarray(couplings, dtype=complex)


def _field(field, field_op, steps, method):
    field = np.asarray(field, dtype=float)
    if field.shape != (steps,):
        raise InvalidArgument(f'field must hold one value per step ({steps})')
    if field_op is None:
        raise InvalidArgument('a field needs the operator it multiplies')
    return field, np.asarray(field_op, dtype=complex), method


def evolve_pulse(shape: PulseShape, axis, couplings, steps: int = DEFAULT_STEPS,
                 *, frame='toggling', tol=None, field=None, field_op=None,
                 field_method='split') -> Propagation:
    r"""Propagator of :math:`\tfrac12 s\sigma_a V(t) + H_S` over one pulse.

    Parameters
    ----------
    shape : PulseShape
    axis : Axis or str
    couplings : CouplingSet or ndarray
        System couplings, or an already assembled ``H_S``.
    steps : int
        Number of midpoint steps; at least 256 for shaped pulses.
    frame : {'toggling', 'lab'}
    tol : float, optional
        When given, the result is compared with a run at ``2*steps`` and
        :class:`NotConverged` is raised if they differ by more than ``tol``
        (spectral norm). The finer result is returned.
    field, field_op : ndarray, optional
        A classical field sampled at the ``steps`` step midpoints and the
        full-space operator it multiplies. Held constant over each step.
        Delta pulses need an even ``steps``; the kick sits between the
        two halves.
    field_method : {'split', 'exact'}
        How a step with the field is exponentiated: symmetric splitting
        of field and ``H_S`` (fast, default) or a full exponential.

    Returns
    -------
    Propagation
    """
    axis = parse_axis(axis)
    hs = _as_hamiltonian(couplings)
    dim = hs.shape[0] // 2
    extra = None
    if field is not None:
        if tol is not None:
            raise InvalidArgument('a sampled field cannot be step-refined')
        extra = _field(field, field_op, steps, field_method)
    if shape.kind == 'delta':
        kick = np.kron(_rotation(axis, shape.target_angle), np.eye(dim))
        if extra is None:
            half = expm_hermitian(hs, shape.duration / 2)
            return _accept(half @ kick @ half, 0)
        if steps % 2:
            raise InvalidArgument('delta pulses need an even step count')
        factors = _field_steps(hs, extra, shape.duration / steps)
        k = steps // 2
        u = (time_ordered_product(factors[k:]) @ kick
             @ time_ordered_product(factors[:k]))
        return _accept(u, steps)
    if steps < 256:
        raise InvalidArgument('at least 256 steps are required for shaped pulses')

    u = _integrate(shape, axis, hs, steps, frame, extra)
    if tol is None:
        return _accept(u, steps)
    fine = _integrate(shape, axis, hs, 2 * steps, frame)
    diff = spectral_norm(fine - u)
    if diff > tol:
        raise NotConverged(f'step refinement {steps}->{2 * steps} changed the '
                           f'propagator by {diff:.2e} > {tol:.2e}',
                           _accept(fine, 2 * steps))
    return _accept(fine, 2 * steps)


def evolve_free(couplings, duration, steps=1, *, field=None, field_op=None,
                field_method='split') -> Propagation:
    """Evolution under H_S (plus an optional step-sampled field) alone."""
    hs = _as_hamiltonian(couplings)
    if field is None:
        return _accept(expm_hermitian(hs, duration), 0)
    factors = _field_steps(hs, _field(field, field_op, steps, field_method),
                           duration / steps)
    return _accept(time_ordered_product(factors), steps)


class FieldStepper:
    """Repeated propagation of one pulse (or a free interval) under
    ``H_S + x_k F`` for many sampled fields ``x``.

    Everything independent of the field is computed once, so each call
    costs only batched matrix products. Uses the split field rule of
    :func:`evolve_pulse`; ``shape=None`` means free evolution for
    ``duration``.
    """

    def __init__(self, shape, axis, couplings, steps, field_op, duration=None):
        hs = _as_hamiltonian(couplings)
        n = hs.shape[0]
        dim = n // 2
        self.steps = int(steps)
        self.shape = shape
        if shape is None:
            if duration is None or duration <= 0:
                raise InvalidArgument('free evolution needs a positive duration')
            total = duration
        else:
            total = shape.duration
            if shape.kind == 'delta':
                if self.steps % 2:
                    raise InvalidArgument('delta pulses need an even step count')
            elif self.steps < 256:
                raise InvalidArgument('at least 256 steps are required for '
                                      'shaped pulses')
        self.duration = total
        self.h = total / self.steps
        self._w, v = np.linalg.eigh(np.asarray(field_op, dtype=complex))
        self._v, self._vh = v, v.conj().T
        step = expm_hermitian(hs, self.h)
        self._kick = None
        self._rot = None
        if shape is not None:
            axis = parse_axis(axis)
            if shape.kind == 'delta':
                self._kick = np.kron(_rotation(axis, shape.target_angle),
                                     np.eye(dim))
            else:
                _, tm = _midpoints(self.steps, total)
                rot = _rotation(axis, phase_profile(shape)(tm))
                rot = np.einsum('kij,ab->kiajb', rot, np.eye(dim)).reshape(
                    self.steps, n, n)
                self._rot = rot
                self._rot_h = np.swapaxes(rot.conj(), -1, -2)
                self._end = np.kron(_rotation(axis, shape.target_angle),
                                    np.eye(dim))
                # fold the field eigenbasis into the toggling rotations
                self._left = self._rot_h @ v
                self._right = self._vh @ rot
                self._mid = self._vh @ step @ v
        self._step = step

    def __call__(self, field) -> Propagation:
        x = np.asarray(field, dtype=float)
        if x.shape != (self.steps,):
            raise InvalidArgument(f'field must hold one value per step '
                                  f'({self.steps})')
        ph = np.exp(-0.5j * self.h * x[:, None] * self._w)
        if self._rot is not None:
            # R^dag V D V^dag S V D V^dag R, with D diagonal
            core = ph[:, :, None] * self._mid * ph[:, None, :]
            factors = self._left @ core @ self._right
            u = self._end @ time_ordered_product(factors)
            return _accept(u, self.steps)
        half = (self._v * ph[:, None, :]) @ self._vh
        factors = half @ self._step @ half
        if self._kick is None:
            return _accept(time_ordered_product(factors), self.steps)
        k = self.steps // 2
        u = (time_ordered_product(factors[k:]) @ self._kick
             @ time_ordered_product(factors[:k]))
        return _accept(u, self.steps)


def hermitian_log_unitary(u, period: float, h_guess=None) -> np.ndarray:
    r"""Effective Hamiltonian ``H`` with ``u = exp(-i period H)``.

    Eigenphases are placed on the branch closest to ``-period * E`` where
    ``E`` is the expectation of ``h_guess`` in the matching eigenvector;
    with no guess this is the principal branch.

    Raises
    ------
    BranchCutAmbiguity
        If an eigenphase, measured from its guessed value, lies within
        1e-6 of +-pi.
    InvalidArgument
        If ``u`` is not unitary to 1e-10.
    """
    u = np.asarray(u, dtype=complex)
    if unitarity_defect(u) > UNITARITY_TOL:
        raise InvalidArgument('matrix is not unitary')
    # complex Schur form of a unitary is diagonal up to roundoff
    t, z = schur(u, output='complex')
    lam = np.diag(t)
    theta = np.angle(lam)
    if h_guess is not None:
        guess = np.real(np.einsum('ij,jk,ki->i', z.conj().T, h_guess, z))
        ref = -period * guess
    else:
        ref = np.zeros_like(theta)
    rel = np.angle(np.exp(1j * (theta - ref)))
    if np.any(np.pi - np.abs(rel) < BRANCH_MARGIN):
        raise BranchCutAmbiguity('eigenphase on the branch cut; shrink the '
                                 'period or supply a better guess')
    theta = ref + rel
    heff = (z * (-theta / period)) @ z.conj().T
    return (heff + heff.conj().T) / 2
