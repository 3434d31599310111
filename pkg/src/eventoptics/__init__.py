"""Event-by-event simulation of single-photon interference.

Messengers carrying a phase travel one at a time from a source (double
slit, two Gaussian line sources, or a Gaussian source inside a Fresnel
biprism) to a screen of adaptive threshold detectors.  Wave-theory
references and a comparison harness are included.
"""

from .errors import (AbsorbedRayError, ConfigurationError, DegenerateFitError, EventOpticsError,
                     InvalidMessageError, InvalidParameterError, MergeError, NumericalFailureError)
from .harness import (CountsProfile, ExperimentConfig, RunResult, biprism_config, double_slit_config,
                      replica_merge, run, two_beam_config)

__version__ = "0.1.0"

__all__ = [
    "AbsorbedRayError", "ConfigurationError", "DegenerateFitError", "EventOpticsError",
    "InvalidMessageError", "InvalidParameterError", "MergeError", "NumericalFailureError",
    "CountsProfile", "ExperimentConfig", "RunResult", "biprism_config", "double_slit_config",
    "replica_merge", "run", "two_beam_config",
]
