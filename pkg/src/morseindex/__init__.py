"""Spectral and conjugate indices of Morse–Sturm systems ``J u'' + S(x) u = 0``."""

from .conjugate import ConjugateInstant, ConjugateReport, conjugate_index, find_conjugate_instants
from .core import (ComplexParameter, ConstDiagProfile, MorseSturmSystem, SampledProfile,
                   SignatureMatrix, TrigProfile, load_system, system_from_json, validate)
from .errors import (EndpointConjugateError, MorseIndexError, NumericalFailure,
                     RejectedInputError)
from .presets import preset
from .propagator import propagate, shooting_path
from .specflow import (riesz_form_flow, spectral_flow_inertia, spectral_index_crossing,
                       spectral_index_inertia)
from .verify import IndexReport, RunConfig, emit_trace, random_suite, verify
from .winding import Contour, winding_number

__all__ = [
    "ComplexParameter", "ConjugateInstant", "ConjugateReport", "ConstDiagProfile", "Contour",
    "EndpointConjugateError", "IndexReport", "MorseIndexError", "MorseSturmSystem",
    "NumericalFailure", "RejectedInputError", "RunConfig", "SampledProfile", "SignatureMatrix",
    "TrigProfile", "conjugate_index", "emit_trace", "find_conjugate_instants", "load_system",
    "preset", "propagate", "random_suite", "riesz_form_flow", "shooting_path",
    "spectral_flow_inertia", "spectral_index_crossing", "spectral_index_inertia",
    "system_from_json", "validate", "verify", "winding_number",
]
