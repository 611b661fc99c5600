"""Decorators for MCP tools."""

# Import built-in modules
import functools
import inspect
import time
import traceback
from collections.abc import Callable
from typing import Any, TypeVar

# Import third-party modules
from loguru import logger

# Import local modules
from mfeit.errors import MfeitError

F = TypeVar("F", bound=Callable[..., Any])


def _arguments(func: Callable[..., Any], args: tuple[Any, ...], kwargs: dict[str, Any]) -> dict[str, str]:
    arg_names = inspect.getfullargspec(func).args
    # Skip 'self' if it's a method
    start_idx = 1 if arg_names and arg_names[0] == "self" else 0
    arg_dict = {name: repr(args[i]) for i, name in enumerate(arg_names[start_idx:], start_idx) if i < len(args)}
    arg_dict.update({key: repr(value) for key, value in kwargs.items()})
    return arg_dict


def debug_tool(func: F) -> F:
    """Turn exceptions raised by an MCP tool into an error payload.

    The payload carries the exception type, message, traceback and call
    arguments, plus the ``exit_code`` the command line would have reported
    (1 for errors outside the mfeit hierarchy).

    Args:
        func: The MCP tool function to decorate

    Returns:
        The decorated function

    """

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> dict[str, Any]:
        try:
            return func(*args, **kwargs)
        except Exception as e:
            tb_text = traceback.format_exc()
            logger.error(f"ERROR in {func.__name__}:\n{tb_text}")
            arg_dict = _arguments(func, args, kwargs)
            args_str = ", ".join(f"{k}={v}" for k, v in arg_dict.items())
            return {
                "success": False,
                "error": str(e),
                "detailed_error": f"Error in {func.__name__}: {e!s}\nArguments: {args_str}\n\nTraceback:\n{tb_text}",
                "error_type": type(e).__name__,
                "exit_code": e.exit_code if isinstance(e, MfeitError) else 1,
                "traceback": tb_text,
                "function": func.__name__,
                "arguments": arg_dict,
                "module": func.__module__,
            }

    return wrapper  # type: ignore


def log_tool_call(func: F) -> F:
    """Log MCP tool calls with their arguments, and the wall time and result when they return."""

    @functools.wraps(func)
    def wrapper(*args: Any, **kwargs: Any) -> Any:
        arg_dict = _arguments(func, args, kwargs)
        logger.info(f"TOOL CALL: {func.__name__}({', '.join(f'{k}={v}' for k, v in arg_dict.items())})")
        start = time.perf_counter()
        result = func(*args, **kwargs)
        logger.info(f"TOOL DONE: {func.__name__} in {time.perf_counter() - start:.2f} s")
        logger.debug(f"TOOL RESULT: {func.__name__} -> {result}")
        return result

    return wrapper  # type: ignore
