"""Statistical machine-learning toolkit for tabular astronomical catalogs."""

__version__ = "0.1.0"

from .errors import (
    AstromlsError,
    ImputationError,
    ParameterError,
    ParseError,
    SchemaError,
)

__all__ = [
    "__version__",
    "AstromlsError",
    "ImputationError",
    "ParameterError",
    "ParseError",
    "SchemaError",
]
