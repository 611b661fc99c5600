"""Retry helpers built on tenacity."""

from __future__ import annotations

# Import built-in modules
from collections.abc import Iterator, Sequence
from typing import TypeVar

# Import third-party modules
from loguru import logger
from tenacity import AttemptManager, RetryCallState, Retrying, retry_if_exception_type, stop_after_attempt

T = TypeVar("T")


def attempts_over(
    values: Sequence[T],
    exception_types: type[BaseException] | tuple[type[BaseException], ...],
    label: str,
) -> Iterator[tuple[AttemptManager, T]]:
    """Iterate tenacity attempts, handing each attempt the next parameter value.

    A failing attempt (one of ``exception_types``) moves on to the next value; the
    last failure is re-raised once the values are exhausted.

    Args:
        values: Parameter values tried in order.
        exception_types: Exceptions that trigger a retry.
        label: Name used in log messages.

    Yields:
        tuple: The tenacity attempt context manager and the value for that attempt.

    """
    if not values:
        raise ValueError("attempts_over needs at least one value")

    def _log(retry_state: RetryCallState) -> None:
        outcome = retry_state.outcome
        error = outcome.exception() if outcome is not None else None
        logger.warning(
            f"{label} failed with {values[retry_state.attempt_number - 1]!r}: {error}. "
            f"Retrying with {values[retry_state.attempt_number]!r} "
            f"(Attempt {retry_state.attempt_number}/{len(values)})"
        )

    retrying = Retrying(
        stop=stop_after_attempt(len(values)),
        retry=retry_if_exception_type(exception_types),
        before_sleep=_log,
        reraise=True,
    )
    for attempt in retrying:
        yield attempt, values[attempt.retry_state.attempt_number - 1]
