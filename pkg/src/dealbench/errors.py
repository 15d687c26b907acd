class DealbenchError(Exception):
    """Base class for all package errors."""
