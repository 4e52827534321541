"""Dimensions of non-autonomous self-similar sets."""

__version__ = "0.1.0"

from .errors import (BracketFailure, BudgetExceeded, InfeasibleEpsilon, MoranDimError,  # noqa: E402
                     NonContracting, NotInvariant, SpecError, TooFewMaps)
from .ifs_core import (AmbientSet, Cylinders, IFSSpec, LevelSystem, Similarity,  # noqa: E402
                       scale_slice, stratify, validate_spec)
from .pressure import (assouad_symbolic, check_theta_submax, pressure, pressure_derivative,  # noqa: E402
                       pressure_derivative_at_zero, theta, theta_table)
from .geometry import (bnc_verdict, check_osc, coding_point, composite, condition_report,  # noqa: E402
                       cone_constant, max_neighbourhood, neighbourhood_count, render_points)
from .estimators import (covering_number, empirical_assouad, greedy_packing,  # noqa: E402
                         packing_exponent_test, psi)
from .examples import (build_arbitrary_values_example, build_unbounded_example,  # noqa: E402
                       similarity_two_ratio, tangent_witness)

__all__ = [name for name in dir() if not name.startswith("_")]
