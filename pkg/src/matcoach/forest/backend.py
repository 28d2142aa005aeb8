"""Selects the tree kernel at import: compiled extension when available,
pure Python otherwise. MATCOACH_FOREST_BACKEND=py|cy forces a choice."""

from __future__ import annotations

import os

from . import _build_py

_forced = os.environ.get("MATCOACH_FOREST_BACKEND", "").strip().lower()

if _forced == "py":
    _impl = _build_py
elif _forced == "cy":
    from . import _build_cy as _impl  # type: ignore[no-redef]
elif _forced == "":
    try:
        from . import _build_cy as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _build_py
else:
    raise ImportError(f"MATCOACH_FOREST_BACKEND={_forced!r}: expected 'py' or 'cy'")

build_tree = _impl.build_tree
apply_tree = _impl.apply_tree
BACKEND: str = _impl.BACKEND
