"""Numerical toolkit for statistical manifolds and statistical biharmonic maps."""
__version__ = "0.1.0"

from .errors import *  # noqa: E402,F401,F403
from .jets import Box, JetFn, fd_jets, fd_lift  # noqa: E402
from .expr import parse_expr  # noqa: E402
from .manifold import (  # noqa: E402
    ChartModel, PointTensor, StructureReport, classify, codazzi_residual, conjugate_connection,
    covariant_derivative, curvature, curvature_interchange, difference_tensor, divergence,
    hessian_curvature, levi_civita, orthonormal_frame, sectional_curvature, tchebychev,
)
from .quadrature import QuadratureRule  # noqa: E402
from .maps import (  # noqa: E402
    GraphImmersion, MapModel, Section, bienergy, bitension, ibp_residual, induce_from_graph,
    laplacian, pushforward, shape_operator, tension,
)
from .variation import (  # noqa: E402
    HMode, VariationFamily, additive_family, bump, characteristic_roots, fd_energy_derivatives,
    first_variation, h_operator, jacobi_term, random_probes, reduction_inequality,
    second_variation, stability_verdict,
)
from . import catalog  # noqa: E402,F401
