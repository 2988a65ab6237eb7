"""Path variation, complexity and entropy tools for deep ReLU networks.

``BACKEND`` reports which kernel implementation was loaded: ``"cython"``
when the compiled extension is importable, ``"python"`` otherwise (or when
``RELUPATH_PURE_PYTHON`` is set).
"""

from ._backend import BACKEND
from .network import *  # noqa: F401,F403
from .variation import *  # noqa: F401,F403
from .complexity import *  # noqa: F401,F403
from .entropy import *  # noqa: F401,F403
from .estimation import *  # noqa: F401,F403
from .serialize import *  # noqa: F401,F403
from . import network, variation, complexity, entropy, estimation, serialize

__version__ = "0.1.0"

__all__ = (
    ["BACKEND", "__version__"]
    + network.__all__
    + variation.__all__
    + complexity.__all__
    + entropy.__all__
    + estimation.__all__
    + serialize.__all__
)
