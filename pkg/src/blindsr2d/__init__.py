"""Blind two-dimensional super-resolution for MISO linear time-varying systems.

Recovers continuous time-frequency shift pairs, complex amplitudes, and the
per-input signals (up to the inherent scaling ambiguity) from a single
output vector, via a lifted atomic-norm dual semidefinite program or a
grid-based nuclear-norm program.

Submodules are imported lazily so that the command-line entry point can
configure threading environment variables before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = ("model", "sdp", "solver", "localize", "estimate", "gridded", "cli")


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
