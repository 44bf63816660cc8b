"""Cell types of stationary Poisson hyperplane tessellations."""

from .model import (
    AtomicDistribution,
    DensityDistribution,
    Estimate,
    Hyperplane,
    IsotropicDistribution,
    ProcessIntensity,
    distribution_from_spec,
    hitting_mean,
    watson,
)
from .sampler import ProcessSample, general_position_report, sample_process
from .geometry import CellPolytope, DegenerateArrangementError, extract_cells, max_safe_radius
from .combinatorics import TypeFingerprint, canonical_type, is_simple, type_catalog_lookup
from .estimator import census, density_curve, sandwich_check
from .construction import (
    TargetSpec,
    certify_epsilon0,
    classify_event,
    event_probability,
    verify_bullet_on_event,
)

__version__ = "0.1.0"
