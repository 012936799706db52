"""Support-function Gauss curvature flow for the super-critical L_p Minkowski problem.

Submodules
----------
sphere_grid   grids, quadrature and covariant derivatives on S^n
ellipsoid     the Ellipsoid value type
convex_body   support fields, radial function, volume, curvature
john          minimum-volume enclosing ellipsoids
energy        the functional J, dissipation, threshold A0, admissible class
flow          raw and threshold-controlled flow integration
search        shooting search for initial ellipsoids
homology      integer simplicial homology
cli           command line harness
"""

from .convex_body import SupportField, support_of_ellipsoid, volume
from .ellipsoid import Ellipsoid
from .energy import AdmissibleParams, EnergyReport, compute_A0, default_params, functional_J
from .errors import (
    ConvexityLost,
    DegenerateInput,
    InvalidArgument,
    InvalidComplex,
    IterationLimit,
)
from .flow import FlowConfig, FlowState, run_modified, run_raw
from .john import min_ellipsoid_of_body, mvee
from .search import limiting_initial
from .sphere_grid import SphereGrid, make_grid

__version__ = "0.1.0"

__all__ = [
    "AdmissibleParams",
    "ConvexityLost",
    "DegenerateInput",
    "Ellipsoid",
    "EnergyReport",
    "FlowConfig",
    "FlowState",
    "InvalidArgument",
    "InvalidComplex",
    "IterationLimit",
    "SphereGrid",
    "SupportField",
    "compute_A0",
    "default_params",
    "functional_J",
    "limiting_initial",
    "make_grid",
    "min_ellipsoid_of_body",
    "mvee",
    "run_modified",
    "run_raw",
    "support_of_ellipsoid",
    "volume",
]
