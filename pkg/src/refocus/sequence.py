r"""
Pulse sequences: parsing, exact and perturbative composition, the
catalog of effective Hamiltonians and numerical order measurement.

Sequences are written as operator products, so the rightmost pulse acts
first. An overline is written as a trailing ``-``: ``"X-X"`` is
:math:`\bar X X`, an X pulse followed by an X-bar pulse.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import (BranchCutAmbiguity, NotInCatalog, ParseError,
                     PreconditionViolated, InvalidArgument)
from .model import (PAULI, SIGMA_I, Axis, CouplingSet, assemble_hamiltonian,
                    parse_axis)
from .propagator import (DEFAULT_STEPS, Propagation, evolve_pulse,
                         hermitian_log_unitary, spectral_norm, unitarity_defect,
                         _rotation)
from .pulse import PulseParams, PulseShape, compute_params

__all__ = [
    'SequenceSpec', 'ExpansionPrediction', 'ScanResult', 'CATALOG',
    'parse_sequence', 'format_sequence', 'expansion_x2', 'compose',
    'predicted_heff', 'effective_hamiltonian', 'order_scan', 'fit_slope',
    'fit_first_order', 'qubit_offdiagonal_block', 'one_d_no_go_check',
    'S_TOLERANCE',
]

#: |s| below this counts as a self-refocusing pulse.
S_TOLERANCE = 1e-8

_TOKEN = re.compile(r'([XY])(-|̄)?')


@dataclass(frozen=True)
class SequenceSpec:
    pulses: tuple
    shape: PulseShape
    name: str | None = None

    def __post_init__(self):
        if not self.pulses:
            raise InvalidArgument('a sequence needs at least one pulse')
        object.__setattr__(self, 'pulses',
                           tuple(parse_axis(p) for p in self.pulses))

    @property
    def period(self):
        return len(self.pulses) * self.shape.duration

    @property
    def omega(self):
        return 2 * np.pi / self.period

    @property
    def is_one_dimensional(self):
        return len({p.label for p in self.pulses}) == 1

    def with_shape(self, shape):
        return SequenceSpec(self.pulses, shape, self.name)

    def with_tau(self, tau_p):
        return self.with_shape(self.shape.with_duration(tau_p))

    def __add__(self, other):
        """Concatenation in time: ``self`` first, then ``other``."""
        if other.shape is not self.shape:
            raise InvalidArgument('sequences must share the pulse shape')
        return SequenceSpec(self.pulses + other.pulses, self.shape)

    def __str__(self):
        return self.name or format_sequence(self.pulses)


def parse_sequence(text: str, shape: PulseShape | None = None) -> SequenceSpec:
    """Parse an operator-product string into a sequence in time order.

    >>> [str(p) for p in parse_sequence('XY-XY').pulses]
    ['Y', 'X', 'Y-', 'X']
    """
    compact = ''.join(str(text).split()).upper()
    tokens, pos = [], 0
    while pos < len(compact):
        m = _TOKEN.match(compact, pos)
        if m is None:
            raise ParseError(f'unknown token at position {pos} in {text!r}')
        tokens.append(Axis(m.group(1), -1 if m.group(2) else 1))
        pos = m.end()
    if not tokens:
        raise ParseError('empty sequence')
    if shape is None:
        shape = PulseShape.delta()
    return SequenceSpec(tuple(reversed(tokens)), shape,
                        format_sequence(tuple(reversed(tokens))))


def format_sequence(pulses) -> str:
    """Inverse of :func:`parse_sequence` for a time-ordered pulse list."""
    return ''.join(str(parse_axis(p)) for p in reversed(tuple(pulses)))


# -- single-pulse expansion ------------------------------------------------

def _ops(couplings, label):
    """Full-space operators (a0, ax, ay, az, sx, sy, sz) in the frame where
    the pulse axis plays the role of x."""
    c = couplings.relabeled(label)
    eye = np.eye(c.dim)
    sig = ('X', 'Y', 'Z') if label == 'X' else ('Y', 'Z', 'X')
    return ([np.kron(SIGMA_I, a) for a in c.matrices]
            + [np.kron(PAULI[k], eye) for k in sig])


def _comm(a, b):
    return a @ b - b @ a


def _acomm(a, b):
    return a @ b + b @ a


def expansion_x2(params: PulseParams, couplings: CouplingSet, axis,
                 tau_p: float = 1.0, *, allow_nonzero_s: bool = False
                 ) -> np.ndarray:
    r"""Single-pulse propagator expanded to second order in ``tau_p * H_S``.

    For a +X pulse

    .. math::

        X^{(2)} = -i\sigma_x - \tau_p(A_x + \sigma_x A_0)
          + \tfrac{i}{2}\tau_p^2\{A_0, A_x\}
          + \tfrac{i}{2}\tau_p^2\sigma_x(A_0^2 + A_x^2)
          - \tau_p^2\alpha\,(A_y^2 + A_z^2 + i\sigma_x[A_y, A_z])
          + \tau_p^2\zeta\,([A_0, \sigma_y A_z - \sigma_z A_y]
              + i\{A_x, \sigma_y A_y + \sigma_z A_z\}),

    with ``alpha`` the positive double average of
    :math:`\sin[\phi(t) - \phi(t')]` for ``t > t'``. An X-bar pulse is
    ``-X^(2)`` with ``alpha -> -alpha``; Y pulses follow from the cyclic
    relabeling x -> y -> z -> x.
    """
    axis = parse_axis(axis)
    if abs(params.s) > S_TOLERANCE and not allow_nonzero_s:
        raise PreconditionViolated(
            f'expansion assumes s = 0 but s = {params.s:.3g}')
    a0, ax, ay, az, sx, sy, sz = _ops(couplings, axis.label)
    t = tau_p
    alpha = params.alpha * axis.sign
    x2 = (-1j * sx - t * (ax + sx @ a0)
          + 0.5j * t**2 * _acomm(a0, ax)
          + 0.5j * t**2 * sx @ (a0 @ a0 + ax @ ax)
          - t**2 * alpha * (ay @ ay + az @ az + 1j * sx @ _comm(ay, az))
          + t**2 * params.zeta * (_comm(a0, sy @ az - sz @ ay)
                                  + 1j * _acomm(ax, sy @ ay + sz @ az)))
    return axis.sign * x2


# -- composition -----------------------------------------------------------

def compose(seq: SequenceSpec, couplings: CouplingSet, mode: str = 'exact',
            *, params: PulseParams | None = None, steps: int = DEFAULT_STEPS,
            allow_nonzero_s: bool = False) -> Propagation:
    """Propagator over one period of ``seq`` (pulses back to back).

    ``mode='exact'`` multiplies numerically converged single-pulse
    propagators; ``mode='expansion'`` multiplies second-order expansions
    (``params`` defaults to those of the sequence's pulse shape).
    """
    per_axis = {}
    if mode == 'exact':
        hs = assemble_hamiltonian(couplings)
        for ax in set(seq.pulses):
            per_axis[ax] = evolve_pulse(seq.shape, ax, hs, steps).unitary
        count = steps if seq.shape.kind != 'delta' else 0
    elif mode == 'expansion':
        if params is None:
            params = compute_params(seq.shape)
        for ax in set(seq.pulses):
            per_axis[ax] = expansion_x2(params, couplings, ax,
                                        seq.shape.duration,
                                        allow_nonzero_s=allow_nonzero_s)
        count = 0
    else:
        raise InvalidArgument(f'unknown composition mode {mode!r}')
    u = np.eye(2 * couplings.dim, dtype=complex)
    for ax in seq.pulses:
        u = per_axis[ax] @ u
    # expansion products are unitary only to O(tau_p^3)
    return Propagation(u, count * len(seq.pulses), unitarity_defect(u))


def control_product(seq: SequenceSpec) -> np.ndarray:
    """Net qubit rotation of the ideal (decoupled) sequence."""
    u = SIGMA_I.copy()
    for ax in seq.pulses:
        u = _rotation(ax, seq.shape.target_angle) @ u
    return u


def effective_hamiltonian(seq: SequenceSpec, couplings: CouplingSet,
                          h_guess=None, *, steps: int = DEFAULT_STEPS,
                          unitary=None) -> np.ndarray:
    """Hermitian generator of one period, ``U = exp(-i period H_eff)``.

    A net control rotation of -1 (e.g. ``XX``) is a global phase and is
    divided out first.
    """
    ctrl = control_product(seq)
    if np.allclose(ctrl, -SIGMA_I, atol=1e-12):
        sign = -1
    elif np.allclose(ctrl, SIGMA_I, atol=1e-12):
        sign = 1
    else:
        raise InvalidArgument(f'{seq} does not close to the identity')
    if unitary is None:
        unitary = compose(seq, couplings, 'exact', steps=steps).unitary
    try:
        return hermitian_log_unitary(sign * unitary, seq.period, h_guess)
    except BranchCutAmbiguity as e:
        raise BranchCutAmbiguity(str(e), seq.shape.duration) from None


# -- catalog ---------------------------------------------------------------

@dataclass(frozen=True)
class ExpansionPrediction:
    """Predicted ``H_eff = order0 + tau_p * order1`` and the claimed order."""
    order0: np.ndarray
    order1: np.ndarray
    claimed_order: int

    def at(self, tau_p):
        return self.order0 + tau_p * self.order1


def _full_ops(c):
    eye = np.eye(c.dim)
    return ([np.kron(SIGMA_I, m) for m in c.matrices]
            + [np.kron(PAULI[k], eye) for k in 'XYZ'])


# Each entry maps (params, couplings, legacy) -> (order0, order1, K), where
# K is the claimed scaling ||H_eff - order0|| = O(tau_p^K).
# The default forms are the ones confirmed against the exact propagator
# with the conventions of this package (sigma_x sigma_y = i sigma_z,
# U = exp(-iHt), rightmost pulse first, alpha > 0 for monotone phase).
# ``legacy=True`` gives the older textbook forms, which differ by the sign
# of the terms odd in the phase (s and alpha) and, for XY-XY, by an
# overall sign and sigma_y (A_x^2 + A_y^2) in place of
# sigma_y (A_x^2 + A_z^2).

def _pred_xbar_x(p, c, legacy):
    a0, ax, ay, az, sx, sy, sz = _full_ops(c)
    order0 = a0 + sx @ ax
    if abs(p.s) > S_TOLERANCE:
        sign = 1 if legacy else -1
        order0 = order0 + sign * p.s * (sz @ ay - sy @ az)
    return order0, np.zeros_like(order0), 2


def _pred_xbar_x_x_xbar(p, c, legacy):
    # the s-linear term cancels; for s != 0 an uncharted O(tau_p) part is left
    a0, ax, ay, az, sx, sy, sz = _full_ops(c)
    order0 = a0 + sx @ ax
    return order0, np.zeros_like(order0), (2 if abs(p.s) <= S_TOLERANCE else 1)


def _pred_xy4(p, c, legacy):
    a0, ax, ay, az, sx, sy, sz = _full_ops(c)
    al, ze = p.alpha, p.zeta
    if legacy:
        return a0, (1j * al / 2 * _comm(az, ay)
                    - 0.5j * _comm(a0, sx @ ax - sy @ ay)
                    - al / 2 * sy @ (ax @ ax + ay @ ay)
                    + (1 + 4 * ze) / 4 * sz @ _acomm(ax, ay)), 1
    order1 = (0.5j * _comm(a0, sx @ ax - sy @ ay)
              - (1 + 4 * ze) / 4 * sz @ _acomm(ax, ay)
              - 1j * al / 2 * _comm(az, ay)
              + al / 2 * sy @ (ax @ ax + az @ az))
    return a0, order1, 1


def _pred_yxy(p, c, legacy):
    a0, ax, ay, az, sx, sy, sz = _full_ops(c)
    sign = -1 if legacy else 1
    order1 = sign * p.alpha / 2 * (sy @ (ax @ ax + az @ az) + 1j * _comm(ay, az))
    return a0, order1, (2 if abs(p.alpha) <= S_TOLERANCE else 1)


def _pred_eight(p, c, legacy):
    a0 = np.kron(SIGMA_I, c.a0)
    return a0, np.zeros_like(a0), 2


CATALOG = {
    'X-X': _pred_xbar_x,
    'X-XXX-': _pred_xbar_x_x_xbar,
    'XY-XY': _pred_xy4,
    'YXY-XXY-XY': _pred_yxy,
    'Y-X-YX-XY-XY': _pred_eight,
}


def _catalog_key(seq):
    if isinstance(seq, SequenceSpec):
        return format_sequence(seq.pulses)
    return format_sequence(parse_sequence(seq).pulses)


def predicted_heff(seq, params: PulseParams, couplings: CouplingSet,
                   *, legacy: bool = False) -> ExpansionPrediction:
    """Closed-form effective Hamiltonian of a catalog sequence.

    Parameters
    ----------
    seq : str or SequenceSpec
        One of ``X-X``, ``X-XXX-``, ``XY-XY``, ``YXY-XXY-XY``,
        ``Y-X-YX-XY-XY``.
    params : PulseParams
    couplings : CouplingSet
    legacy : bool
        Return the legacy sign convention instead of the numerically
        validated forms (see module source for the differences).

    Raises
    ------
    NotInCatalog
    """
    try:
        key = _catalog_key(seq)
    except ParseError:
        raise NotInCatalog(seq) from None
    if key not in CATALOG:
        raise NotInCatalog(key)
    order0, order1, k = CATALOG[key](params, couplings, legacy)
    return ExpansionPrediction(order0, order1, k)


# -- order measurement -----------------------------------------------------

@dataclass
class ScanResult:
    taus: np.ndarray
    deviations: np.ndarray
    slope: float
    running_slopes: np.ndarray = field(repr=False)
    heffs: list = field(default_factory=list, repr=False)

    def rows(self):
        return list(zip(self.taus, self.deviations, self.running_slopes))


def fit_slope(x, y, floor=0.0):
    """Least-squares slope of log(y) against log(x), ignoring y <= floor."""
    x, y = np.asarray(x, float), np.asarray(y, float)
    keep = y > floor
    if keep.sum() < 2:
        return float('nan')
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


def order_scan(seq: SequenceSpec, couplings: CouplingSet, reference, taus,
               *, steps: int = DEFAULT_STEPS, floor: float = 1e-12
               ) -> ScanResult:
    """Deviation of the measured effective Hamiltonian from ``reference``
    for each pulse length in ``taus``.

    Points whose deviation is within 10x of ``floor`` (the integrator
    noise level) are excluded from the slope fit.
    """
    taus = np.asarray(taus, dtype=float)
    if len(taus) < 2 or np.any(np.diff(taus) >= 0):
        raise InvalidArgument('taus must be strictly decreasing')
    reference = np.asarray(reference, dtype=complex)
    devs, heffs = [], []
    for tau in taus:
        heff = effective_hamiltonian(seq.with_tau(tau), couplings, reference,
                                     steps=steps)
        heffs.append(heff)
        devs.append(spectral_norm(heff - reference))
    devs = np.array(devs)
    running = np.array([np.nan] + [fit_slope(taus[:k + 1], devs[:k + 1],
                                             10 * floor)
                                   for k in range(1, len(taus))])
    return ScanResult(taus, devs, fit_slope(taus, devs, 10 * floor),
                      running, heffs)


def fit_first_order(seq: SequenceSpec, couplings: CouplingSet, order0, taus,
                    *, steps: int = DEFAULT_STEPS) -> np.ndarray:
    """Extrapolated coefficient of ``tau_p`` in ``H_eff - order0``.

    Fits ``(H_eff - order0)/tau_p`` as a polynomial in ``tau_p``
    (degree ``len(taus) - 1``) entrywise and returns its value at 0.
    """
    taus = np.asarray(taus, dtype=float)
    d = [(effective_hamiltonian(seq.with_tau(t), couplings, order0,
                                steps=steps) - order0) / t for t in taus]
    return _extrapolate(taus, d)


def _extrapolate(taus, mats):
    """Entrywise polynomial extrapolation of matrices to tau = 0."""
    mats = np.asarray(mats)
    n = len(taus)
    # Lagrange weights at zero
    w = np.array([np.prod([-taus[j] / (taus[i] - taus[j])
                           for j in range(n) if j != i]) for i in range(n)])
    return np.tensordot(w, mats, axes=1)


def qubit_offdiagonal_block(h):
    """The <0|h|1> qubit block, i.e. ``B_x - i B_y`` for
    ``h = sum_mu sigma_mu (x) B_mu``."""
    n = h.shape[0] // 2
    return h[:n, n:]


def one_d_no_go_check(couplings: CouplingSet, seq: SequenceSpec,
                      taus=(0.1, 0.05, 0.025), *, steps: int = DEFAULT_STEPS
                      ) -> float:
    """Norm of the qubit-off-diagonal block of H_eff extrapolated to
    ``tau_p -> 0``."""
    blocks = [qubit_offdiagonal_block(
        effective_hamiltonian(seq.with_tau(t), couplings, steps=steps))
        for t in taus]
    return spectral_norm(_extrapolate(np.asarray(taus, float), blocks))
