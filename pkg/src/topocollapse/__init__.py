"""Single-photon interferometry with topology-triggered collapse policies.

The simulator propagates a photon through an optical scene, applies one of
three rules when the apparatus topology changes (no collapse, collapse on
strong separation, collapse on weak separation) and samples detector
outcomes.
"""

from .collapse import CollapsePolicy
from .errors import ConfigurationError, SceneSyntaxError, TimingError, VisibilityUndefined
from .qstate import DensityMatrix, Mode, Polarization, PureState

__all__ = [
    "CollapsePolicy",
    "ConfigurationError",
    "DensityMatrix",
    "Mode",
    "Polarization",
    "PureState",
    "SceneSyntaxError",
    "TimingError",
    "VisibilityUndefined",
]
__version__ = "0.1.0"
