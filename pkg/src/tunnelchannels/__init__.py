"""Channel-resolved one-dimensional scattering by piecewise-constant barriers."""

from .channels import (
    ChannelDecomposition,
    DecompositionError,
    Scenario,
    SMatrix,
    assemble_smatrix,
    decompose,
    in_asymptotes,
    incident_asymptote,
    make_scenario,
    out_asymptotes,
    reverse_motion,
    scatter_packet,
    sum_rules,
)
from .oracle import DomainError, StepSizeError, ValidationReport, WorkLimitError, propagate, validate
from .packets import MomentSet, Role, Side, SpectralPacket, gaussian_packet, gwp_momentum_shifts, moments
from .potential import Barrier, ScatterCoeffs, build_barrier, load_barrier, parse_barrier, scatter_coeffs, transfer_matrix
from .timing import TimeReport, delay_times, scattering_length, scattering_time, swpa_times, time_report
from .units import DEFAULT_UNITS, Units

__version__ = "0.1.0"

__all__ = [
    "Barrier",
    "ChannelDecomposition",
    "DEFAULT_UNITS",
    "DecompositionError",
    "DomainError",
    "MomentSet",
    "Role",
    "SMatrix",
    "Scenario",
    "ScatterCoeffs",
    "Side",
    "SpectralPacket",
    "StepSizeError",
    "TimeReport",
    "Units",
    "ValidationReport",
    "WorkLimitError",
    "assemble_smatrix",
    "build_barrier",
    "decompose",
    "delay_times",
    "gaussian_packet",
    "gwp_momentum_shifts",
    "in_asymptotes",
    "incident_asymptote",
    "load_barrier",
    "make_scenario",
    "moments",
    "out_asymptotes",
    "parse_barrier",
    "propagate",
    "reverse_motion",
    "scatter_coeffs",
    "scatter_packet",
    "scattering_length",
    "scattering_time",
    "sum_rules",
    "swpa_times",
    "time_report",
    "transfer_matrix",
    "validate",
]
