"""Nonadiabatic stimulated-Raman passage in a three-level Lambda system.

Pulse schedules come from a Stokes envelope and the matching rule
omega_p = omega_s sec(theta) / 2 with theta = (1/2) int omega_s.  Times are
dimensionless (tau = nu t) and Rabi frequencies are in units of nu throughout.
"""

from .analysis import (
    closed_form_duration,
    effective_duration,
    occupancy_report,
    predicted_truncation,
    table1_report,
    truncation_population,
)
from .dsl import parse, tokenize, eval_expr, to_source
from .dynamics import evolve, propagate_reference
from .errors import (
    DSLError,
    EvalDomainError,
    IntegrationError,
    NumericalError,
    ParseError,
    RamanPassError,
    SingularityError,
    ThresholdError,
    ValidationError,
)
from .invariant import dressed_state, eigensystem_of, invariant_at, invariant_residual, lr_phase_rate
from .schedule import FAMILIES, ProtocolSpec, builtin_family, sample_schedule, theta_of_t
from .stirsap import build_eta_protocol, decompose, reconstruct_h0, verify_decomposition

__version__ = "0.1.0"
