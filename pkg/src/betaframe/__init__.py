"""Distributed noise-shaping quantization of finite frames with beta duals."""

from .duals import (
    BetaDualScheme,
    BlockPartition,
    CondensationMap,
    beta_condensation,
    build_scheme,
    decode,
    encode,
    error_bound,
    hsc_condensation_norm,
    make_partition,
    optimal_params,
    v_dual,
)
from .errors import *  # noqa: F401,F403
from .frames import DualFrame, Frame, canonical_dual, gaussian_frame, hsc_frame, is_dual, measure
from .noise_shaping import (
    Alphabet,
    BetaTransfer,
    BlockDiagonal,
    QuantizationRecord,
    Toeplitz,
    admissible,
    greedy_quantize,
    round_to,
)

__version__ = "0.1.0"
