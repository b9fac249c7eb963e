"""Discrete Schrödinger operators on graphs: Wronskians, scattering, factorization."""

__version__ = "0.1.0"

from .graph import *  # noqa: E402,F401,F403
from .operators import *  # noqa: E402,F401,F403
from .wronskian import *  # noqa: E402,F401,F403
from .scattering import *  # noqa: E402,F401,F403
from .factorization import *  # noqa: E402,F401,F403
from .fermion import *  # noqa: E402,F401,F403
