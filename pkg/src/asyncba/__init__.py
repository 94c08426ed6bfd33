"""Sub-quadratic asynchronous Byzantine Agreement with committee sampling."""

from .params import Parameters, ParameterError, derive_params

__version__ = "0.1.0"

__all__ = ["Parameters", "ParameterError", "derive_params", "__version__"]
