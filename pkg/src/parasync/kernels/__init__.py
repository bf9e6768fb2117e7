"""Hot-path mesh kernels: compiled extension with a numpy fallback.

The compiled backend is preferred when present. PARASYNC_KERNELS=python
forces the fallback; PARASYNC_KERNELS=c makes a missing extension an error
instead of a silent downgrade.
"""

import os

_forced = os.environ.get("PARASYNC_KERNELS")
if _forced not in (None, "", "c", "python"):
    raise ImportError(
        f"PARASYNC_KERNELS must be 'c' or 'python', got {_forced!r}")

if _forced == "python":
    from parasync.kernels import _numpy_impl as _impl
else:
    try:
        from parasync.kernels import _core as _impl  # type: ignore[attr-defined]
    except ImportError:
        if _forced == "c":
            raise
        from parasync.kernels import _numpy_impl as _impl

BACKEND = _impl.BACKEND
twist_positions = _impl.twist_positions
rotate_z_positions = _impl.rotate_z_positions
accumulate_vertex_normals = _impl.accumulate_vertex_normals

__all__ = [
    "BACKEND",
    "twist_positions",
    "rotate_z_positions",
    "accumulate_vertex_normals",
]
