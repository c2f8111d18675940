"""Backoff and retry helpers for the live model backend and report writes."""

import time
import random
import logging
from functools import wraps
from typing import Callable, Any, Optional, Tuple, Type

from utils.errors import BackendError

logger = logging.getLogger(__name__)


class RetryableError(BackendError):
    """A backend failure that is worth another attempt.

    Once retries run out it surfaces as a plain backend failure of the run.
    """

    pass


class APIRateLimitError(RetryableError):
    """The model endpoint refused the call for quota reasons."""

    pass


class NetworkError(RetryableError):
    pass


class TemporaryServiceError(RetryableError):
    pass


_MARKERS = (
    (APIRateLimitError, ("rate limit", "429", "resource exhausted", "quota")),
    (TemporaryServiceError, ("503", "unavailable", "overloaded", "500 internal")),
    (NetworkError, ("network", "connection", "timeout", "timed out")),
)


def classify_backend_error(error: Exception) -> Optional[RetryableError]:
    """Map a client exception to a retryable error, or None if retrying is pointless."""
    text = str(error).lower()
    for error_type, markers in _MARKERS:
        if any(marker in text for marker in markers):
            return error_type(f"{error_type.__name__}: {error}")
    return None


def exponential_backoff(
    attempt: int,
    base_delay: float = 1.0,
    max_delay: float = 60.0,
    rng: Optional[random.Random] = None,
) -> float:
    """Delay before attempt ``attempt + 1``: doubling, capped, plus up to 10% jitter."""
    delay = min(base_delay * (2**attempt), max_delay)
    return delay + (rng or random).uniform(0, delay * 0.1)


def retry_with_backoff(
    max_retries: int = 3,
    base_delay: float = 1.0,
    max_delay: float = 60.0,
    exceptions: Tuple[Type[BaseException], ...] = (RetryableError,),
    sleep: Callable[[float], None] = time.sleep,
):
    """Retry the wrapped call on ``exceptions`` with exponential backoff.

    The final failure is re-raised unchanged. ``sleep`` is injectable so that
    tests do not wait.
    """
    if max_retries < 0:
        raise ValueError("max_retries must be >= 0")

    def decorator(func: Callable) -> Callable:
        @wraps(func)
        def wrapper(*args, **kwargs) -> Any:
            attempt = 0
            while True:
                try:
                    return func(*args, **kwargs)
                except exceptions as e:
                    if attempt >= max_retries:
                        logger.error(f"{func.__name__} gave up after {attempt + 1} attempt(s): {e}")
                        raise
                    delay = exponential_backoff(attempt, base_delay, max_delay)
                    logger.warning(
                        f"{func.__name__} attempt {attempt + 1} failed ({type(e).__name__}), "
                        f"retrying in {delay:.2f}s"
                    )
                    sleep(delay)
                    attempt += 1

        return wrapper

    return decorator


def retry_api_call(max_retries: int = 5, base_delay: float = 2.0):
    """Retry a chat-endpoint call on rate limits, dropped connections and 5xx."""
    return retry_with_backoff(
        max_retries=max_retries,
        base_delay=base_delay,
        max_delay=120.0,
        exceptions=(RetryableError,),
    )


def retry_file_operation(max_retries: int = 3, base_delay: float = 0.5):
    """Retry report, transcript and scene writes on transient OS errors."""
    return retry_with_backoff(
        max_retries=max_retries,
        base_delay=base_delay,
        max_delay=5.0,
        exceptions=(OSError,),
    )
