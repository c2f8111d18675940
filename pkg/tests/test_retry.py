import random

import pytest

from utils.errors import BackendError
from utils.retry import (
    APIRateLimitError,
    NetworkError,
    TemporaryServiceError,
    classify_backend_error,
    exponential_backoff,
    retry_with_backoff,
)


def flaky(failures, error=NetworkError):
    calls = []

    def call():
        calls.append(1)
        if len(calls) <= failures:
            raise error("connection reset")
        return len(calls)

    return call, calls


def test_retries_until_success():
    delays = []
    call, calls = flaky(2)
    wrapped = retry_with_backoff(max_retries=3, base_delay=1.0, sleep=delays.append)(call)
    assert wrapped() == 3
    assert len(calls) == 3
    assert len(delays) == 2
    assert 1.0 <= delays[0] <= 1.1
    assert 2.0 <= delays[1] <= 2.2


def test_gives_up_with_the_last_error():
    delays = []
    call, calls = flaky(10)
    wrapped = retry_with_backoff(max_retries=2, sleep=delays.append)(call)
    with pytest.raises(NetworkError):
        wrapped()
    assert len(calls) == 3
    assert len(delays) == 2


def test_other_errors_are_not_retried():
    delays = []
    call, calls = flaky(1, error=ValueError)
    wrapped = retry_with_backoff(max_retries=3, sleep=delays.append)(call)
    with pytest.raises(ValueError):
        wrapped()
    assert len(calls) == 1
    assert delays == []


def test_backoff_is_capped():
    rng = random.Random(0)
    assert 60.0 <= exponential_backoff(10, base_delay=1.0, max_delay=60.0, rng=rng) <= 66.0


@pytest.mark.parametrize(
    "message, expected",
    [
        ("429 Too Many Requests", APIRateLimitError),
        ("RESOURCE EXHAUSTED for this project", APIRateLimitError),
        ("503 Service Unavailable", TemporaryServiceError),
        ("Read timed out", NetworkError),
        ("Invalid argument: contents", None),
    ],
)
def test_classify_backend_error(message, expected):
    result = classify_backend_error(RuntimeError(message))
    if expected is None:
        assert result is None
    else:
        assert type(result) is expected
        assert isinstance(result, BackendError)
