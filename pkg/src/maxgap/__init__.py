"""Maximal-spacing and nearest-neighbour tests for uniformity on the unit hypercube."""

__version__ = "0.1.0"

from maxgap.geometry import (  # noqa: E402
    CUBE,
    BallRegion,
    NnResult,
    PointCloud,
    ReferenceShape,
    SpacingResult,
    UnitCube,
    anchored_scale,
    ball_volume_const,
    max_spacing,
    max_spacing_1d_exact,
    nn_statistic,
)
from maxgap.stats import (  # noqa: E402
    TestConfig,
    TestResult,
    critical_value,
    gumbel_cdf,
    gumbel_quantile,
    nn_test,
    run_test,
    standardize,
)
