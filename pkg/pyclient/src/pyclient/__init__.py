"""Reference external evaluator for the optimizer's subprocess protocol."""

from .serve import EXIT_DATA, EXIT_OK, LossModel, SpecError, main, serve

__all__ = ["EXIT_DATA", "EXIT_OK", "LossModel", "SpecError", "main", "serve"]
