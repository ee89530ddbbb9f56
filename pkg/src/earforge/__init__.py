"""earforge: ear recognition toolkit.

Landmark detection (two-stage CNN cascade), PCA-based geometric
normalization, handcrafted and learned descriptors, score-level fusion and
biometric evaluation protocols.  Submodules import lazily so the CLI can cap
BLAS threads before numpy loads.
"""

__version__ = "0.1.0"

_SUBMODULES = (
    "image", "geometry", "normalization", "augmentation", "nn", "descriptors",
    "matching", "evaluation", "manifest", "synthetic", "pipeline",
    "estimators", "exceptions", "cli",
)


def __getattr__(name):
    if name in _SUBMODULES:
        import importlib

        module = importlib.import_module(f".{name}", __name__)
        globals()[name] = module
        return module
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
