"""Read-only figure builders for picardkit CLI outputs."""

from .figures import (
    FigureSpec,
    SchemaError,
    ValidationError,
    plot_convergence,
    plot_spectrum,
    read_aggregate,
    read_spectrum,
    render,
)

__version__ = "0.1.0"

__all__ = [
    "FigureSpec",
    "SchemaError",
    "ValidationError",
    "plot_convergence",
    "plot_spectrum",
    "read_aggregate",
    "read_spectrum",
    "render",
    "__version__",
]
