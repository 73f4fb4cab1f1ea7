"""Accumulation kernels with backend selection at import time.

The compiled extension is used when available; otherwise the numpy
fallback is loaded.  Set ``SPARSEBORN_KERNEL=python`` or
``SPARSEBORN_KERNEL=native`` to force a backend (forcing ``native`` raises
if the extension is missing).
"""
import os

_forced = os.environ.get("SPARSEBORN_KERNEL", "").strip().lower()

if _forced not in ("", "native", "python"):
    raise RuntimeError(
        f"SPARSEBORN_KERNEL must be 'native' or 'python', got {_forced!r}"
    )

if _forced == "python":
    from . import _python as _impl

    BACKEND = "python"
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]

        BACKEND = "native"
    except ImportError:
        if _forced == "native":
            raise
        from . import _python as _impl

        BACKEND = "python"

accum_real = _impl.accum_real
accum_complex = _impl.accum_complex
