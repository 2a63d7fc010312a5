"""Console service for centralized console management."""

from rich.console import Console

# Global singleton console instances
_console_instance = None
_error_console_instance = None


def get_console() -> Console:
    """
    Get the global console instance used for tables and results.

    Returns:
        Console: The global Rich console instance
    """
    global _console_instance
    if _console_instance is None:
        _console_instance = Console()
    return _console_instance


def get_error_console() -> Console:
    """Console bound to standard error, for logs, usage text and failures."""
    global _error_console_instance
    if _error_console_instance is None:
        _error_console_instance = Console(stderr=True)
    return _error_console_instance
