"""Simulator and security analysis for measurement-device-independent quantum dialogue."""

from .adversary import (
    InterceptResendEve,
    LeakageReport,
    UtpStrategy,
    eve_information_bound,
    mdiqd_announcement_entropy,
    nguyen_simulate_and_leak,
)
from .bb84 import (
    Bb84Config,
    Bb84Outcome,
    FiniteKeyParams,
    run_bb84,
    secure_key_length,
    statistical_deviation_mu,
    truncated_binary_entropy,
)
from .dialogue import (
    SecurityParams,
    SessionTranscript,
    correctness_bound_check,
    decode,
    run_dialogue,
    serfling_deviation_nu,
)
from .qubit import (
    BellDistribution,
    BellOutcome,
    PrepBasis,
    QubitState,
    apply_flip_noise,
    bell_probabilities,
    make_rng,
    measure_in_basis,
    prepare,
    sample_bell,
)

__version__ = "0.1.0"
