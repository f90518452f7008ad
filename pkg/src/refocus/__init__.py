"""
Refocusing of a qubit coupled to an oscillator: shaped pi-pulse defect
parameters, exact and perturbative sequence propagators, self-refocusing
pulse design and colored-noise coherence ensembles.
"""
__version__ = '0.1.0'

from .errors import (RefocusError, InvalidShape, QuadratureError, InvalidModel,
                     InvalidArgument, NotConverged, BranchCutAmbiguity,
                     ParseError, PreconditionViolated, NotInCatalog)
from .pulse import (PulseShape, PulseParams, PhaseProfile, DELTA, G001, G010,
                    phase_profile, compute_params, compute_s, compute_alpha,
                    compute_zeta, shape_from_dict, shape_to_dict)
from .model import (TENSOR_ORDER, Axis, X, XBAR, Y, YBAR, CouplingSet,
                    CavityModel, cavity_couplings, assemble_hamiltonian,
                    parse_axis)
from .propagator import (Propagation, evolve_pulse, evolve_free,
                         zeroth_order_propagator, hermitian_log_unitary)
from .sequence import (SequenceSpec, parse_sequence, format_sequence, compose,
                       expansion_x2, predicted_heff, effective_hamiltonian,
                       order_scan, one_d_no_go_check, CATALOG)
from .search import SearchProblem, SearchResult, default_problem, solve
from .noise import NoiseConfig, EnsembleResult, run_ensemble, rate_scan
