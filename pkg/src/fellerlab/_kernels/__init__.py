"""Kernel backend selection.

The compiled extension is preferred when it was built and the plan falls
in its supported class; everything else runs on the numpy backend.  Both
produce identical trajectories for the same (plan, seed, path indices).
Set FELLERLAB_BACKEND=pure (or =compiled) to force a choice.
"""

import os

from ..errors import ArgumentError
from . import pure
from .plan import StepPlan  # noqa: F401  (re-export)

try:
    from . import _core as _compiled
except ImportError:
    _compiled = None

_FORCED = os.environ.get("FELLERLAB_BACKEND", "").strip().lower()
if _FORCED and _FORCED not in ("pure", "compiled"):
    raise ArgumentError(f"FELLERLAB_BACKEND must be 'pure' or 'compiled', got {_FORCED!r}")
if _FORCED == "compiled" and _compiled is None:
    raise ArgumentError("FELLERLAB_BACKEND=compiled but the extension is not built")


def backend_name():
    if _FORCED == "pure" or _compiled is None:
        return "pure"
    return "compiled"


def available_backends():
    return ("pure", "compiled") if _compiled is not None else ("pure",)


def get_backend(name):
    if name == "pure":
        return pure
    if name == "compiled":
        if _compiled is None:
            raise ArgumentError("compiled backend is not available")
        return _compiled
    raise ArgumentError(f"unknown backend {name!r}")


def simulate_chunk(plan, seed, path0, n_paths, n_steps, kill_clock=None):
    """Run a chunk on the active backend (falling back per plan support)."""
    use = backend_name()
    if use == "compiled" and not _compiled.supports(plan):
        use = "pure"
    return get_backend(use).simulate_chunk(plan, seed, path0, n_paths, n_steps, kill_clock)
