"""Wave-like transients in leader-driven flocks with next-nearest-neighbour coupling."""

__version__ = "0.1.0"

from .coupling import (  # noqa: E402
    BoundaryKind,
    CouplingConfig,
    FlockSpec,
    ReducedParams,
    SpecError,
    config_from_reduced,
    load_spec,
    parse_spec,
    serialize_spec,
    validate_config,
)
from .spectrum import eigencurves, low_freq_expansion, signal_velocities  # noqa: E402
from .stability import (  # noqa: E402
    SolutionType,
    circle_spectral_margin,
    classify,
    line_eigen_stability,
    necessary_criteria,
)
from .system import build_matrices, build_system  # noqa: E402
from .simulate import IntegratorOptions, integrate  # noqa: E402
from .characterize import (  # noqa: E402
    measure_type1,
    measure_type2,
    predict_type1,
    predict_type2,
    relative_error,
)
