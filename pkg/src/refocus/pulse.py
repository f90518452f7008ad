r"""
Shaped :math:`\pi`-pulses, their accumulated rotation angle and the
shape functionals that control the second-order error of a single pulse.

A pulse drives the qubit with :math:`H_C = \tfrac12 \sigma_a V(t)` on
``0 < t < duration``. Everything here works in the reduced time
``u = t / duration`` so the defect parameters are dimensionless

.. math::

    s = \int_0^1 \sin\phi(u)\,du, \qquad
    \alpha = \int_0^1 du \int_0^u du'\,\sin[\phi(u) - \phi(u')], \qquad
    \zeta = \int_0^1 du \int_0^u du'\,\cos\phi(u').

Envelopes
---------
``delta``
    Hard pulse at the midpoint, treated symbolically.
``gaussian``
    ``exp(-(t - tau/2)**2 / (w*tau)**2)`` hard-truncated to the pulse
    window. ``w`` is ``width_fraction``.
``hermite``
    Even, L2-normalized Hermite functions about the midpoint,
    ``sum_k c_k psi_{2k}(x)`` with ``x = (t - tau/2)/(c*tau)`` and
    ``psi_n = H_n(x) exp(-x**2/2) / sqrt(2**n n! sqrt(pi))``.
``sampled``
    Piecewise-linear interpolation of ``(t, v)`` samples.

All envelopes are rescaled so that :math:`\phi(\tau_p)` equals the
target angle.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from numpy.polynomial.hermite import hermval
from scipy.special import erf, gamma

from .errors import InvalidShape, QuadratureError

__all__ = [
    'PulseShape', 'PhaseProfile', 'PulseParams', 'phase_profile',
    'compute_s', 'compute_alpha', 'compute_zeta', 'compute_params',
    'shape_from_dict', 'shape_to_dict', 'DELTA', 'G001', 'G010',
]

KINDS = ('delta', 'gaussian', 'hermite', 'sampled')

#: Gauss-Legendre order inside every panel.
PANEL_ORDER = 16
DEFAULT_NODES = 4096
MAX_NODES = 2**17
DEFAULT_TOL = 1e-10
#: Floor for quadrature error estimates; below this differences are roundoff.
ERROR_FLOOR = 1e-14

_GL_CACHE = {}
_INT_CACHE = {}


def _gauss_legendre(order):
    """Nodes and weights on [0, 1]."""
    if order not in _GL_CACHE:
        x, w = np.polynomial.legendre.leggauss(order)
        _GL_CACHE[order] = ((x + 1) / 2, w / 2)
    return _GL_CACHE[order]


def _hermite_norms(m):
    """L2 norms of the even Hermite functions H_0, H_2, ..., H_{2m-2}."""
    n = 2 * np.arange(m)
    return np.sqrt(2.0**n * gamma(n + 1) * np.sqrt(np.pi))


def _integration_matrix(order):
    """``Q[i, j] = int_0^{x_i} l_j(x) dx`` for the Lagrange basis on the
    Gauss-Legendre nodes of [0, 1]."""
    if order not in _INT_CACHE:
        leg = np.polynomial.legendre
        x, _ = leg.leggauss(order)
        vander = leg.legvander(x, order - 1)
        # column k: antiderivative of P_k from -1, evaluated at the nodes
        anti = np.column_stack([
            leg.legval(x, leg.legint(np.eye(order)[k], lbnd=-1))
            for k in range(order)])
        _INT_CACHE[order] = anti @ np.linalg.inv(vander) / 2
    return _INT_CACHE[order]


def _cumulative_nodal(values, edges, order=PANEL_ORDER):
    """Running integral from 0 to every node of the composite rule, given
    the integrand at those nodes."""
    h = np.diff(edges)
    f = np.asarray(values).reshape(len(h), order)
    _, w = _gauss_legendre(order)
    full = (f @ w) * h
    acc = np.concatenate([[0.0], np.cumsum(full)[:-1]])
    return (acc[:, None] + (f @ _integration_matrix(order).T) * h[:, None]).ravel()


@dataclass(frozen=True, eq=False)
class PulseShape:
    """Time-domain envelope of a single pulse.

    Use the classmethod constructors rather than calling this directly.
    """
    kind: str
    duration: float = 1.0
    target_angle: float = np.pi
    width_fraction: float | None = None
    coefficients: tuple = ()
    samples: tuple = ()
    _norm: float = field(default=1.0, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidShape(f'unknown pulse kind {self.kind!r}')
        if not np.isfinite(self.duration) or self.duration <= 0:
            raise InvalidShape('duration must be positive')
        if not self.target_angle:
            raise InvalidShape('target angle must be nonzero')
        if self.kind in ('gaussian', 'hermite'):
            if self.width_fraction is None or not self.width_fraction > 0:
                raise InvalidShape('width_fraction must be positive')
        if self.kind == 'hermite' and not len(self.coefficients):
            raise InvalidShape('hermite series needs at least one coefficient')
        if self.kind == 'sampled':
            t, v = self.samples
            if t.ndim != 1 or t.shape != v.shape or len(t) < 2:
                raise InvalidShape('samples must be two equal-length 1d arrays')
            if np.any(np.diff(t) <= 0):
                raise InvalidShape('sample times must be strictly increasing')
            if not (np.isclose(t[0], 0, atol=1e-12)
                    and np.isclose(t[-1], 1, atol=1e-12)):
                raise InvalidShape('samples must cover [0, duration]')

    # -- constructors -----------------------------------------------------

    @classmethod
    def delta(cls, duration=1.0, target_angle=np.pi):
        return cls('delta', float(duration), float(target_angle))

    @classmethod
    def gaussian(cls, width_fraction, duration=1.0, target_angle=np.pi):
        return cls('gaussian', float(duration), float(target_angle),
                   width_fraction=float(width_fraction))._normalized()

    @classmethod
    def hermite(cls, width_fraction, coefficients, duration=1.0,
                target_angle=np.pi):
        coeffs = tuple(float(c) for c in coefficients)
        return cls('hermite', float(duration), float(target_angle),
                   width_fraction=float(width_fraction),
                   coefficients=coeffs)._normalized()

    @classmethod
    def sampled(cls, times, values, duration=None, target_angle=np.pi):
        """Piecewise-linear envelope through ``(times, values)``.

        ``duration`` defaults to the last sample time; times are stored
        as fractions of the duration.
        """
        t = np.asarray(times, dtype=float)
        v = np.asarray(values, dtype=float)
        if duration is None:
            duration = t[-1] if t.size else 0.0
        t = t / duration
        t.flags.writeable = False
        v = v.copy()
        v.flags.writeable = False
        return cls('sampled', float(duration), float(target_angle),
                   samples=(t, v))._normalized()

    def _normalized(self):
        area = self._raw_area()
        if not np.isfinite(area) or abs(area) < 1e-300:
            raise InvalidShape('envelope integrates to zero')
        return dataclasses.replace(self, _norm=self.target_angle / area)

    def with_duration(self, duration):
        """Same shape stretched to a new duration."""
        return dataclasses.replace(self, duration=float(duration))

    def reversed(self):
        """Time-reversed envelope, ``V(tau - t)``."""
        if self.kind == 'sampled':
            t, v = self.samples
            return PulseShape.sampled(1 - t[::-1], v[::-1], 1.0,
                                      self.target_angle).with_duration(
                                          self.duration)
        # delta, gaussian and even hermite envelopes are symmetric
        return self

    # -- envelope ---------------------------------------------------------

    def _raw(self, u):
        """Unnormalized envelope as a function of reduced time."""
        u = np.asarray(u, dtype=float)
        if self.kind == 'gaussian':
            return np.exp(-((u - 0.5) / self.width_fraction)**2)
        if self.kind == 'hermite':
            x = (u - 0.5) / self.width_fraction
            c = np.zeros(2 * len(self.coefficients) - 1)
            c[::2] = np.asarray(self.coefficients) / _hermite_norms(
                len(self.coefficients))
            return np.exp(-x**2 / 2) * hermval(x, c)
        if self.kind == 'sampled':
            return np.interp(u, *self.samples)
        raise InvalidShape('delta envelope cannot be sampled')

    def _raw_area(self):
        if self.kind == 'delta':
            return 1.0
        if self.kind == 'gaussian':
            w = self.width_fraction
            return w * np.sqrt(np.pi) * erf(0.5 / w)
        if self.kind == 'sampled':
            return np.trapezoid(self.samples[1], self.samples[0])
        edges = np.linspace(0, 1, MAX_NODES // PANEL_ORDER // 8 + 1)
        x, w = _gauss_legendre(PANEL_ORDER)
        h = np.diff(edges)
        nodes = edges[:-1, None] + h[:, None] * x
        return float(np.sum(self._raw(nodes) * w * h[:, None]))

    def envelope(self, t):
        """Drive amplitude V(t) in radians per unit time."""
        u = np.asarray(t, dtype=float) / self.duration
        inside = (u >= 0) & (u <= 1)
        return np.where(inside, self._norm * self._raw(np.clip(u, 0, 1)),
                        0.0) / self.duration

    @property
    def is_symmetric(self):
        if self.kind != 'sampled':
            return True
        t, v = self.samples
        return (np.allclose(t, 1 - t[::-1], atol=1e-12)
                and np.allclose(v, v[::-1], rtol=1e-12, atol=0))


DELTA = PulseShape.delta()
#: Gaussian pulses of Table-1 widths 0.01 and 0.1 of the pulse length.
G001 = PulseShape.gaussian(0.01)
G010 = PulseShape.gaussian(0.1)


@dataclass(frozen=True)
class PhaseProfile:
    r"""Accumulated angle :math:`\phi(t)` of a pulse.

    ``nodes``/``weights`` are the composite Gauss-Legendre rule on the
    reduced interval [0, 1] used to build the profile, and ``phi_nodes``
    holds :math:`\phi` at those nodes.
    """
    shape: PulseShape
    evaluator: Callable = field(repr=False)
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    edges: np.ndarray = field(repr=False)
    error_estimate: float = 0.0

    def __call__(self, t):
        return self.evaluator(np.asarray(t, dtype=float) / self.shape.duration)

    def at_fraction(self, u):
        return self.evaluator(np.asarray(u, dtype=float))

    @cached_property
    def phi_nodes(self):
        return self.evaluator(self.nodes)


@dataclass(frozen=True)
class PulseParams:
    """Defect parameters of one pulse shape."""
    s: float
    alpha: float
    zeta: float
    quadrature_error_estimate: float = 0.0

    @property
    def half_alpha(self):
        return self.alpha / 2

    def as_row(self):
        return self.s, self.alpha / 2, self.zeta


def _panel_edges(shape, nodes):
    if shape.kind == 'sampled':
        knots = shape.samples[0]
        per = max(1, int(np.ceil(nodes / PANEL_ORDER / (len(knots) - 1))))
        return np.unique(np.concatenate(
            [np.linspace(a, b, per + 1) for a, b in zip(knots, knots[1:])]))
    n_panels = max(1, int(nodes) // PANEL_ORDER)
    return np.linspace(0.0, 1.0, n_panels + 1)


def _composite_rule(edges, order=PANEL_ORDER):
    x, w = _gauss_legendre(order)
    h = np.diff(edges)
    return ((edges[:-1, None] + h[:, None] * x).ravel(),
            (h[:, None] * w).ravel())


def _cumulative_on_panels(func, edges, points, order=PANEL_ORDER):
    """Integral of ``func`` from 0 to each of ``points``.

    Each point gets the accumulated full-panel sum plus a Gauss-Legendre
    rule on its own partial panel.
    """
    x, w = _gauss_legendre(order)
    h = np.diff(edges)
    full = (func(edges[:-1, None] + h[:, None] * x) * w).sum(axis=1) * h
    acc = np.concatenate([[0.0], np.cumsum(full)])
    points = np.asarray(points, dtype=float)
    idx = np.clip(np.searchsorted(edges, points, side='right') - 1,
                  0, len(h) - 1)
    start = edges[idx]
    span = points - start
    partial = (func(start[..., None] + span[..., None] * x) * w).sum(axis=-1)
    return acc[idx] + partial * span


def _phase_evaluator(shape, edges):
    theta = shape.target_angle
    if shape.kind == 'delta':
        def phi(u):
            u = np.asarray(u, dtype=float)
            return np.where(u < 0.5, 0.0,
                            np.where(u > 0.5, theta, theta / 2))
        return phi, 0.0

    if shape.kind == 'gaussian':
        w = shape.width_fraction
        e0 = erf(0.5 / w)

        def phi(u):
            u = np.clip(np.asarray(u, dtype=float), 0, 1)
            return theta * (erf((u - 0.5) / w) + e0) / (2 * e0)
        return phi, 0.0

    if shape.kind == 'sampled':
        t, v = shape.samples
        dt = np.diff(t)
        slope = np.diff(v) / dt
        acc = np.concatenate([[0.0], np.cumsum((v[:-1] + v[1:]) / 2 * dt)])
        k = shape._norm

        def phi(u):
            u = np.clip(np.asarray(u, dtype=float), 0, 1)
            i = np.clip(np.searchsorted(t, u, side='right') - 1,
                        0, len(dt) - 1)
            d = u - t[i]
            return k * (acc[i] + v[i] * d + slope[i] * d**2 / 2)
        return phi, 0.0

    # hermite: composite Gauss-Legendre cumulative quadrature
    k = shape._norm
    raw = shape._raw

    def phi(u):
        u = np.clip(np.asarray(u, dtype=float), 0, 1)
        return k * _cumulative_on_panels(raw, edges, u)

    coarse = edges[::2] if len(edges) > 2 else np.linspace(0, 1, 2)
    full = k * _cumulative_on_panels(raw, edges, np.array([1.0]))[0]
    half = k * _cumulative_on_panels(raw, coarse, np.array([1.0]))[0]
    return phi, abs(full - half) / abs(theta)


def phase_profile(shape: PulseShape, nodes: int = DEFAULT_NODES) -> PhaseProfile:
    r"""Build :math:`\phi(t) = \int_0^t V(t')\,dt'` for ``shape``.

    Parameters
    ----------
    shape : PulseShape
    nodes : int
        Total number of quadrature nodes on the pulse window (at least 64
        for non-delta shapes).

    Raises
    ------
    InvalidShape
        If ``nodes`` is too small.
    QuadratureError
        If the profile misses the target angle at the pulse end.
    """
    if shape.kind != 'delta' and nodes < 64:
        raise InvalidShape('at least 64 quadrature nodes are required')
    edges = _panel_edges(shape, nodes)
    evaluator, err = _phase_evaluator(shape, edges)
    u, w = _composite_rule(edges)
    end = float(evaluator(np.array(1.0)))
    if abs(end - shape.target_angle) > 1e-9 * abs(shape.target_angle):
        raise QuadratureError(
            f'phase profile ends at {end!r}, not {shape.target_angle!r}')
    return PhaseProfile(shape, evaluator, u, w, edges, float(err))


def _raw_params(shape, nodes):
    if shape.kind == 'delta':
        return 0.0, 0.0, 0.25
    edges = _panel_edges(shape, nodes)
    u, w = _composite_rule(edges)
    if shape.kind == 'hermite':
        phi = shape._norm * _cumulative_nodal(shape._raw(u), edges)
    else:
        phi = _phase_evaluator(shape, edges)[0](u)
    sin, cos = np.sin(phi), np.cos(phi)
    s = float(np.dot(w, sin))
    # zeta: swap the order of the double integral
    zeta = float(np.dot(w, (1 - u) * cos))
    alpha = float(np.dot(w, sin * _cumulative_nodal(cos, edges)
                         - cos * _cumulative_nodal(sin, edges)))
    return s, alpha, zeta


_PARAM_CACHE = {}


def compute_params(shape: PulseShape, nodes: int = DEFAULT_NODES,
                   tol: float = DEFAULT_TOL) -> PulseParams:
    """Defect parameters (s, alpha, zeta) of ``shape``.

    The node count is doubled until halving it changes no parameter by
    more than ``tol``; the final difference is reported as
    ``quadrature_error_estimate``.
    """
    if shape.kind == 'delta':
        return PulseParams(0.0, 0.0, 0.25, 0.0)
    key = _cache_key(shape, nodes, tol)
    if key in _PARAM_CACHE:
        return _PARAM_CACHE[key]
    prev = np.array(_raw_params(shape, max(64, nodes // 2)))
    n = max(64, nodes)
    while True:
        cur = np.array(_raw_params(shape, n))
        err = float(np.max(np.abs(cur - prev)))
        if err <= tol:
            break
        if 2 * n > MAX_NODES:
            raise QuadratureError(
                f'defect parameters not converged at {n} nodes (change {err:.2e})')
        prev, n = cur, 2 * n
    result = PulseParams(*map(float, cur), max(err, ERROR_FLOOR))
    _PARAM_CACHE[key] = result
    return result


def _cache_key(shape, nodes, tol):
    samples = tuple(a.tobytes() for a in shape.samples)
    return (shape.kind, shape.target_angle, shape.width_fraction,
            shape.coefficients, samples, nodes, tol)


def compute_s(shape: PulseShape, nodes: int = DEFAULT_NODES) -> float:
    r"""First-order defect :math:`\langle\sin\phi\rangle_p`."""
    return compute_params(shape, nodes).s


def compute_alpha(shape: PulseShape, nodes: int = DEFAULT_NODES) -> float:
    return compute_params(shape, nodes).alpha


def compute_zeta(shape: PulseShape, nodes: int = DEFAULT_NODES) -> float:
    return compute_params(shape, nodes).zeta


# -- JSON shape specification ---------------------------------------------

def shape_from_dict(spec: dict) -> PulseShape:
    """Build a shape from its JSON description.

    ``{"kind": "delta"|"gaussian"|"hermite"|"sampled", "duration": ...,
    "width_fraction": ..., "coefficients": [...], "samples": [[t, v], ...]}``
    """
    try:
        kind = spec['kind']
    except (KeyError, TypeError):
        raise InvalidShape('shape spec needs a "kind"') from None
    duration = float(spec.get('duration', 1.0))
    if kind == 'delta':
        return PulseShape.delta(duration)
    if kind == 'gaussian':
        return PulseShape.gaussian(_require(spec, 'width_fraction'), duration)
    if kind == 'hermite':
        return PulseShape.hermite(_require(spec, 'width_fraction'),
                                  _require(spec, 'coefficients'), duration)
    if kind == 'sampled':
        samples = np.asarray(_require(spec, 'samples'), dtype=float)
        if samples.ndim != 2 or samples.shape[1] != 2:
            raise InvalidShape('samples must be a list of [t, v] pairs')
        return PulseShape.sampled(samples[:, 0], samples[:, 1],
                                  spec.get('duration'))
    raise InvalidShape(f'unknown pulse kind {kind!r}')


def _require(spec, key):
    if spec.get(key) is None:
        raise InvalidShape(f'shape spec of kind {spec["kind"]!r} needs {key!r}')
    return spec[key]


def shape_to_dict(shape: PulseShape, sample_points: int | None = None) -> dict:
    """JSON description of ``shape``.

    With ``sample_points`` the envelope is additionally tabulated, which
    lets any shape be reloaded as a ``sampled`` one.
    """
    out = {'kind': shape.kind, 'duration': shape.duration}
    if shape.width_fraction is not None:
        out['width_fraction'] = shape.width_fraction
    if shape.kind == 'hermite':
        out['coefficients'] = list(shape.coefficients)
    if shape.kind == 'sampled':
        t, v = shape.samples
        out['samples'] = np.column_stack([t * shape.duration, v]).tolist()
    elif sample_points and shape.kind != 'delta':
        t = np.linspace(0, shape.duration, sample_points)
        out['envelope'] = np.column_stack([t, shape.envelope(t)]).tolist()
    return out
