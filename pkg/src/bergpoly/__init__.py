"""Bergman orthogonal polynomials of planar domains, Faber polynomials and
checks of their strong asymptotics, at arbitrary precision."""

from .geometry import (CATALOG_NAMES, Corner, DomainError, DomainSpec, area, catalog,
                       from_config, from_series, polygon, to_config)
from .series import LaurentAtInfinity, ReversionError, TruncationError, reversion
from .moments import MomentMatrix, gram_matrix, map_moment, polygon_moment
from .bergman import (CholeskyBreakdown, HessenbergMatrix, OrthonormalBasis, evaluate, hessenberg,
                      kernel, orthonormalize, zeros)
from .faber import FaberFamily, faber_oracle, faber_recurrence, singular_parts
from .conformal import (ExteriorPointValue, capacity_from_ratio, interior_map_bkm,
                        invert_exterior_map, phi_from_ratio)
from .diagnostics import DiagnosticsReport, alpha, beta, build_report, epsilon, xi

__version__ = "0.1.0"
