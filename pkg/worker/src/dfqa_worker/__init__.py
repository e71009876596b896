"""Restricted Pandas execution worker for the DataFrame QA harness."""

from .policy import SafetyPolicy, vet
from .runtime import canonicalize, materialize, run

__version__ = "0.1.0"

__all__ = ["SafetyPolicy", "vet", "canonicalize", "materialize", "run", "__version__"]
