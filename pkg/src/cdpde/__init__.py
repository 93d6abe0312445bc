"""cdpde: non-commutative integration over Cayley-Dickson algebras.

Dirac-type operators, hypercomplex line integrals, boundary-term recursions
and the integral-operator (dressing) construction of nonlinear PDE solutions
from purely linear data, with a scenario catalog and property suites.
"""

__version__ = "0.1.0"

from .algebra import CDMatrix, CDNumber, associator, cd_conj, cd_inv, cd_mul, cd_norm
from .fields import AnalyticField, DiracSpec, Field, OrderedProduct
from .kernels import BACKEND
from .lineint import QuadratureConfig, RayFoliation
from .symmetry import ArgMap, EOperator

__all__ = [
    "__version__", "BACKEND",
    "CDNumber", "CDMatrix", "cd_mul", "cd_conj", "cd_norm", "cd_inv", "associator",
    "DiracSpec", "Field", "AnalyticField", "OrderedProduct",
    "RayFoliation", "QuadratureConfig",
    "EOperator", "ArgMap",
]
