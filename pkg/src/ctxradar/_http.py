"""Retrying JSON-over-HTTP POST shared by the remote encoder and chat client."""

from __future__ import annotations

import time

import requests

from .errors import TransportHTTPError, TransportResponseError, TransportTimeoutError

RETRYABLE_STATUSES = frozenset({408, 429, 500, 502, 503, 504})


def post_json(
    url: str,
    payload: dict,
    *,
    timeout: float = 30.0,
    max_retries: int = 3,
    api_key: str | None = None,
    backoff_base: float = 0.5,
) -> dict:
    """POST payload as JSON and return the decoded JSON body.

    Transient failures (connection errors, timeouts, retryable statuses) are
    retried with exponential backoff up to max_retries, i.e. at most
    max_retries + 1 attempts. Errors are typed: timeout, HTTP status, and
    malformed body are distinct, and all carry the attempt count.
    """
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"

    attempts = 0
    last_error: Exception | None = None
    while attempts <= max_retries:
        attempts += 1
        try:
            resp = requests.post(url, json=payload, headers=headers, timeout=timeout)
        except requests.Timeout as exc:
            last_error = TransportTimeoutError(
                f"POST {url} timed out after {timeout}s", attempts=attempts
            )
            last_error.__cause__ = exc
        except requests.ConnectionError as exc:
            last_error = TransportHTTPError(f"POST {url}: connection failed", attempts=attempts)
            last_error.__cause__ = exc
        else:
            if resp.status_code == 200:
                try:
                    return resp.json()
                except ValueError as exc:
                    raise TransportResponseError(
                        f"POST {url}: body is not JSON", attempts=attempts
                    ) from exc
            last_error = TransportHTTPError(
                f"POST {url}: HTTP {resp.status_code}",
                attempts=attempts,
                status=resp.status_code,
            )
            if resp.status_code not in RETRYABLE_STATUSES:
                raise last_error
        if attempts <= max_retries and backoff_base > 0.0:
            time.sleep(backoff_base * 2 ** (attempts - 1))

    assert last_error is not None
    raise last_error
