"""
Qubit-plus-auxiliary Hamiltonians as dense matrices.

The full Hilbert space is always ordered as ``qubit (x) auxiliary``, so a
qubit operator ``s`` and an auxiliary operator ``a`` combine as
``np.kron(s, a)``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import InvalidModel, InvalidArgument

__all__ = [
    'TENSOR_ORDER', 'PAULI', 'SIGMA_I', 'SIGMA_X', 'SIGMA_Y', 'SIGMA_Z',
    'Axis', 'X', 'XBAR', 'Y', 'YBAR', 'parse_axis',
    'CouplingSet', 'CavityModel', 'cavity_couplings', 'lowering_operator',
    'assemble_hamiltonian', 'control_hamiltonian', 'qubit_op', 'aux_op',
    'model_from_dict', 'matrix_to_json', 'matrix_from_json',
    'check_fock_population',
]

TENSOR_ORDER = ('qubit', 'auxiliary')

SIGMA_I = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = {'I': SIGMA_I, 'X': SIGMA_X, 'Y': SIGMA_Y, 'Z': SIGMA_Z}

for _m in PAULI.values():
    _m.flags.writeable = False

HERMITIAN_TOL = 1e-12


class Axis(NamedTuple):
    """Signed rotation axis of a pulse, e.g. ``Axis('X', -1)`` for X-bar."""
    label: str
    sign: int

    @property
    def sigma(self):
        return PAULI[self.label]

    def flipped(self):
        return Axis(self.label, -self.sign)

    def __str__(self):
        return self.label + ('-' if self.sign < 0 else '')


X = Axis('X', 1)
XBAR = Axis('X', -1)
Y = Axis('Y', 1)
YBAR = Axis('Y', -1)


def parse_axis(text):
    """Accept ``X``, ``+X``, ``-X``, ``X-``, ``X̄`` and likewise for Y."""
    if isinstance(text, Axis):
        return text
    t = str(text).strip().upper().replace('̄', '-')
    sign = 1
    if t.startswith(('+', '-')):
        sign, t = (-1 if t[0] == '-' else 1), t[1:]
    elif t.endswith('-'):
        sign, t = -1, t[:-1]
    if t not in ('X', 'Y'):
        raise InvalidArgument(f'unknown axis {text!r}')
    return Axis(t, sign)


def _is_hermitian(a, tol=HERMITIAN_TOL):
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    return np.max(np.abs(a - a.conj().T), initial=0.0) <= tol * scale


@dataclass(frozen=True, eq=False)
class CouplingSet:
    """Auxiliary-space operators (A_0, A_x, A_y, A_z) multiplying
    (1, sigma_x, sigma_y, sigma_z)."""
    a0: np.ndarray
    ax: np.ndarray
    ay: np.ndarray
    az: np.ndarray

    def __post_init__(self):
        mats = []
        for name in ('a0', 'ax', 'ay', 'az'):
            m = np.array(getattr(self, name), dtype=complex)
            if m.ndim != 2 or m.shape[0] != m.shape[1]:
                raise InvalidModel(f'{name} must be a square matrix')
            m.flags.writeable = False
            object.__setattr__(self, name, m)
            mats.append(m)
        if len({m.shape for m in mats}) != 1:
            raise InvalidModel('coupling matrices differ in dimension')
        for name, m in zip(('a0', 'ax', 'ay', 'az'), mats):
            if not _is_hermitian(m):
                raise InvalidModel(f'{name} is not Hermitian')

    @property
    def dim(self):
        return self.a0.shape[0]

    @property
    def matrices(self):
        return self.a0, self.ax, self.ay, self.az

    def scaled(self, factor):
        return CouplingSet(*(factor * m for m in self.matrices))

    def relabeled(self, label):
        """Couplings seen by a pulse about ``label`` under the cyclic map
        x -> y -> z -> x (only 'X' and 'Y' are needed)."""
        if label == 'X':
            return self
        if label == 'Y':
            return CouplingSet(self.a0, self.ay, self.az, self.ax)
        raise InvalidArgument(f'no relabeling for axis {label!r}')

    @classmethod
    def zeros(cls, dim):
        z = np.zeros((dim, dim))
        return cls(z, z, z, z)


@dataclass(frozen=True)
class CavityModel:
    """Single lossless cavity mode coupled to the qubit."""
    n_fock: int
    g: float
    delta: float

    def couplings(self):
        return cavity_couplings(self)


def lowering_operator(n_fock):
    """Truncated bosonic annihilation operator, <n-1|b|n> = sqrt(n)."""
    return np.diag(np.sqrt(np.arange(1, n_fock)), k=1).astype(complex)


def cavity_couplings(model: CavityModel) -> CouplingSet:
    """A_0 = delta b^dag b, A_x = g (b + b^dag), A_y = i g (b - b^dag), A_z = 0."""
    if int(model.n_fock) != model.n_fock or model.n_fock < 2:
        raise InvalidModel('n_fock must be an integer >= 2')
    b = lowering_operator(int(model.n_fock))
    bd = b.conj().T
    return CouplingSet(model.delta * bd @ b,
                       model.g * (b + bd),
                       1j * model.g * (b - bd),
                       np.zeros_like(b))


def qubit_op(sigma, dim):
    return np.kron(PAULI[sigma] if isinstance(sigma, str) else sigma,
                   np.eye(dim))


def aux_op(a):
    return np.kron(SIGMA_I, a)


def assemble_hamiltonian(couplings: CouplingSet) -> np.ndarray:
    """H_S = sx (x) A_x + sy (x) A_y + sz (x) A_z + 1 (x) A_0."""
    if not isinstance(couplings, CouplingSet):
        raise InvalidModel('expected a CouplingSet')
    c = couplings
    return (np.kron(SIGMA_X, c.ax) + np.kron(SIGMA_Y, c.ay)
            + np.kron(SIGMA_Z, c.az) + np.kron(SIGMA_I, c.a0))


def control_hamiltonian(axis, amplitude, dim=1):
    """Drive term ``sign * amplitude/2 * sigma_axis (x) 1``."""
    axis = parse_axis(axis)
    return axis.sign * amplitude / 2 * np.kron(axis.sigma, np.eye(dim))


def check_fock_population(state_or_rho, n_fock, threshold=1e-8, top=2):
    """Warn when the highest ``top`` Fock levels carry more than
    ``threshold`` population; returns that population."""
    rho = np.asarray(state_or_rho)
    if rho.ndim == 1:
        rho = np.outer(rho, rho.conj())
    diag = np.real(np.diagonal(rho)).reshape(-1, n_fock).sum(axis=0)
    pop = float(diag[-top:].sum())
    if pop > threshold:
        warnings.warn(f'Fock truncation: top {top} levels hold population '
                      f'{pop:.2e}', RuntimeWarning, stacklevel=2)
    return pop


# -- JSON ------------------------------------------------------------------

def matrix_to_json(a):
    a = np.asarray(a, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in a]


def matrix_from_json(data):
    arr = np.asarray(data, dtype=float)
    if arr.ndim == 3 and arr.shape[-1] == 2:
        return arr[..., 0] + 1j * arr[..., 1]
    if arr.ndim == 2:
        return arr.astype(complex)
    raise InvalidModel('matrices must be nested lists of [re, im] pairs')


def model_from_dict(spec: dict) -> CouplingSet:
    """Couplings from ``{"type": "cavity", ...}`` or ``{"type": "generic", ...}``."""
    kind = spec.get('type')
    if kind == 'cavity':
        try:
            return cavity_couplings(CavityModel(int(spec['n_fock']),
                                                float(spec['g']),
                                                float(spec['delta'])))
        except KeyError as e:
            raise InvalidModel(f'cavity model needs {e.args[0]!r}') from None
    if kind == 'generic':
        try:
            return CouplingSet(*(matrix_from_json(spec[k])
                                 for k in ('a0', 'ax', 'ay', 'az')))
        except KeyError as e:
            raise InvalidModel(f'generic model needs {e.args[0]!r}') from None
    raise InvalidModel(f'unknown model type {kind!r}')
