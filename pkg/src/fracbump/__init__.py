"""Two-weight bump conditions for fractional integrals and their commutators, on finite grids."""

__version__ = "0.1.0"

from .bump import *  # noqa: E402,F401,F403
from .config import *  # noqa: E402,F401,F403
from .cubes import *  # noqa: E402,F401,F403
from .dyadic import *  # noqa: E402,F401,F403
from .experiments import *  # noqa: E402,F401,F403
from .grid import *  # noqa: E402,F401,F403
from .operators import *  # noqa: E402,F401,F403
from .orlicz import *  # noqa: E402,F401,F403
from .report import *  # noqa: E402,F401,F403
from .weights import *  # noqa: E402,F401,F403
from .verify import *  # noqa: E402,F401,F403
