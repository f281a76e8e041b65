"""Backend selection for the RK4 inner loop.

The compiled Cython kernel is used when it was built; otherwise the
pure-Python implementation with the identical contract is used.
"""

from . import _rk4_py

try:
    from . import _rk4 as _compiled
except ImportError:  # extension not built
    _compiled = None

_BACKENDS = {"python": _rk4_py.integrate_segment}
if _compiled is not None:
    _BACKENDS["cython"] = _compiled.integrate_segment

BACKEND = "cython" if _compiled is not None else "python"
integrate_segment = _BACKENDS[BACKEND]


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def get_segment_integrator(backend: str | None = None):
    """Segment integrator for ``backend`` (default: the active one)."""
    if backend is None:
        return integrate_segment
    try:
        return _BACKENDS[backend]
    except KeyError:
        raise ValueError(
            f"backend {backend!r} unavailable; choose from {available_backends()}"
        ) from None


def set_backend(backend: str) -> None:
    global BACKEND, integrate_segment
    integrate_segment = get_segment_integrator(backend)
    BACKEND = backend
