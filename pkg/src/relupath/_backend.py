"""Pick the kernel implementation once, at import.

Set ``RELUPATH_PURE_PYTHON=1`` to force the numpy fallback even when the
compiled extension is importable.
"""

import os

from . import _kernels_py

python_kernels = _kernels_py

if os.environ.get("RELUPATH_PURE_PYTHON", "") not in ("", "0"):
    compiled_kernels = None
else:
    try:
        from . import _kernels as compiled_kernels
    except ImportError:
        compiled_kernels = None

kernels = compiled_kernels if compiled_kernels is not None else python_kernels
BACKEND = "cython" if compiled_kernels is not None else "python"
