"""Mixed weak-type inequalities for Orlicz maximal operators, checked on dyadic meshes."""

__version__ = "0.1.0"

from . import catalog, decomposition, experiments, kernels, luxemburg, maximal, mesh, weights, young  # noqa: E402
from .mesh import Box, CubeFamily, DyadicCube, MeshFn  # noqa: E402
from .young import LLogL, Power, Powered, Spliced, YoungFn  # noqa: E402

__all__ = [
    "__version__",
    "catalog",
    "decomposition",
    "experiments",
    "kernels",
    "luxemburg",
    "maximal",
    "mesh",
    "weights",
    "young",
    "Box",
    "CubeFamily",
    "DyadicCube",
    "MeshFn",
    "YoungFn",
    "Power",
    "LLogL",
    "Spliced",
    "Powered",
]
