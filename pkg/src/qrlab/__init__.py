"""Numerical laboratory for normal families of quasiregular and quasimeromorphic maps."""

__version__ = "0.1.0"

from .sphere import (  # noqa: E402
    DimensionError, ExtendedPoint, WeightedBall, chordal, chordal_distance, lambda_n,
    sample_sphere_values, sphere_grid, spherical_diameter,
)
from .zoo import (  # noqa: E402
    Mapping, enumerate_apoints, list_zoo, make_zoo_map, p_rescale, translate,
)
from .hoelder import (  # noqa: E402
    HoelderConfig, alpha_of, limit_inequality_check, normality_constant, p_yosida_indicator,
    quotient_profile, rescale_identity_check, yosida_indicator,
)
from .sequences import (  # noqa: E402
    D_p, PointSequence, both_zero_check, d_p, mp_detect, mu_p_cover_check, separation_statistic,
)
from .counting import (  # noqa: E402
    afr_curve, afr_domain, afr_local, afr_sphere, count_apoints, growth_fit, min_oscillation,
    multiplicity_sum, multiplicity_sweep, oscillation_profile,
)
