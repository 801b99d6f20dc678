"""twistorlab: pointwise verification of curvature and Killing-field identities.

Chart-based numerical Riemannian geometry: exact truncated Taylor
differentiation, curvature tensors, differential-form operators, identity
residual checkers, constructors for the metric families under study, and a
config-driven verification CLI.
"""

__version__ = "0.1.0"

from .taylor import TaylorScalar, jet_space  # noqa: F401
from .chart import (  # noqa: F401
    ChartDomain,
    MetricField,
    FramePoint,
    Geometry,
    christoffel,
    riemann,
    ricci,
    orthonormal_frame,
    sectional_curvature,
)
