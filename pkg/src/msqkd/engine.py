"""Round-engine selection.

Prefers the compiled kernel when the extension built, otherwise falls
back to the pure-Python twin. Both produce bit-identical output; the
choice only affects speed. Set MSQKD_PURE_PYTHON=1 to force the fallback
(the benchmark and the parity tests do).
"""

from __future__ import annotations

import os

from . import _engine_py

if os.environ.get("MSQKD_PURE_PYTHON", "") not in ("", "0"):
    _impl = _engine_py
    BACKEND = "python"
else:
    try:
        from . import _kernel as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _engine_py
        BACKEND = "python"

run_rounds_honest = _impl.run_rounds_honest
run_rounds_attack = _impl.run_rounds_attack


def backend_name() -> str:
    """Name of the active engine: 'cython' or 'python'."""
    return BACKEND
