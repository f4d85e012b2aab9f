"""Gate-level synthesis, block-encoding and exact verification of diagonal operators."""

from .block_encoding import BlockEncoding, amplification_schedule, encode, success_probability
from .circuit import Circuit, depth, deserialize, dumps, size, unitary
from .functions import FunctionSpec, parse_function
from .parallel import factor_list_for, group_factors, parallel_synth
from .simulator import Statevector, apply, apply_qft, embedded_action, fidelity
from .synth import DiagonalSpec, SynthPlan, cancel_adjacent, synthesize
from .walsh import WalshSeries, fwht, inverse_fwht, sparsify

__version__ = "0.1.0"

__all__ = [
    "BlockEncoding", "Circuit", "DiagonalSpec", "FunctionSpec", "Statevector", "SynthPlan", "WalshSeries",
    "amplification_schedule", "apply", "apply_qft", "cancel_adjacent", "depth", "deserialize", "dumps",
    "embedded_action", "encode", "factor_list_for", "fidelity", "fwht", "group_factors", "inverse_fwht",
    "parallel_synth", "parse_function", "size", "sparsify", "success_probability", "synthesize", "unitary",
]
