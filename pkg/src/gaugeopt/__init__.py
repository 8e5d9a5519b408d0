"""Robust PCA and standard-form SDP solved through their gauge duals.

The dual of each problem minimizes a polar function over one halfspace
using only subgradients; a primal solution is then recovered from the dual
optimum and certified by strong gauge duality and the optimality conditions.
"""

from .config import SolverConfig
from .errors import (DegeneratePolar, Diverged, EmptyNullSpace, EssentiallyInfeasibleRegion,
                     GaugeOptError, InvalidInput, InvalidShift, NoConvergence,
                     NoNontrivialSolution, ParseError, PencilUnbounded)
from .gauge import (DualityCertificate, GaugeValue, Verdict, duality_certificate, rpca_gauge,
                    rpca_polar, sdp_gauge, sdp_polar)
from .instances import load_instance, save_instance
from .rpca import RpcaInstance
from .sdp import SdpInstance

__version__ = "0.1.0"

__all__ = [
    "SolverConfig", "RpcaInstance", "SdpInstance", "GaugeValue", "DualityCertificate",
    "Verdict", "duality_certificate", "rpca_gauge", "rpca_polar", "sdp_gauge", "sdp_polar",
    "load_instance", "save_instance", "GaugeOptError", "InvalidInput", "ParseError",
    "InvalidShift", "NoConvergence", "Diverged", "PencilUnbounded", "DegeneratePolar",
    "NoNontrivialSolution", "EmptyNullSpace", "EssentiallyInfeasibleRegion", "__version__",
]
