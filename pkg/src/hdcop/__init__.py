"""Rank-based copula inference in high dimensions.

Library + CLI for pairwise association measures, Gumbel-calibrated max-type
independence tests, multiplier-bootstrap stepdown testing with family-wise
error control, Moebius-transform independence statistics, and a seeded Monte
Carlo harness.
"""

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "association",
    "empirical",
    "errors",
    "harness",
    "maxtest",
    "models",
    "moebius",
    "ranks",
    "stepdown",
]


def __getattr__(name):
    # lazy submodule access keeps `import hdcop` light (report pulls in matplotlib)
    if name in __all__:
        import importlib

        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")
