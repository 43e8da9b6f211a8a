"""Mountain-pass plasma free boundary: solver and verification suite."""

from .config import ProblemConfig, RunConfig, load_config, parse_config
from .errors import PlasmaFBError
from .grid import Grid, build_grid

__all__ = [
    "Grid",
    "build_grid",
    "ProblemConfig",
    "RunConfig",
    "load_config",
    "parse_config",
    "PlasmaFBError",
]
__version__ = "0.1.0"
