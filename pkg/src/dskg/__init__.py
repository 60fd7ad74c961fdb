"""Numerical toolkit for Klein-Gordon fields on De Sitter Kerr backgrounds."""

import importlib

__version__ = "0.1.0"

# Names resolve lazily so the command line can pin BLAS threads before numpy loads.
_EXPORTS = {
    "DskgError": "errors", "NumericalError": "errors", "ValidationError": "errors",
    "SpacetimeParams": "geometry", "HorizonData": "geometry", "RWMap": "geometry",
    "find_horizons": "geometry", "rw_map": "geometry", "ergo_bounds": "geometry",
    "KGSystem": "kg", "State": "kg",
    "ModeGrid": "operators", "assemble_bundle": "operators",
}

__all__ = sorted(_EXPORTS)


def __getattr__(name):
    mod = _EXPORTS.get(name)
    if mod is None:
        raise AttributeError(f"module 'dskg' has no attribute {name!r}")
    return getattr(importlib.import_module(f".{mod}", __name__), name)
