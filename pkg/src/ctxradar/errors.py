"""Exception types shared across the package."""

from __future__ import annotations


class CtxRadarError(Exception):
    """Base class for all package errors."""


class ConfigError(CtxRadarError):
    """Invalid configuration: bad parameters, missing keys, unusable files."""


class TransportError(CtxRadarError):
    """A remote endpoint call failed. Carries retry metadata."""

    def __init__(self, message: str, *, attempts: int = 1, status: int | None = None):
        super().__init__(message)
        self.attempts = attempts
        self.status = status


class TransportTimeoutError(TransportError):
    """The endpoint did not answer within the configured timeout."""


class TransportHTTPError(TransportError):
    """The endpoint answered with a failing HTTP status."""


class TransportResponseError(TransportError):
    """The endpoint answered 200 but the body does not match the contract."""


class SteeringError(CtxRadarError):
    """Anchor spans cannot be placed in the rendered prompt (pool/selection mismatch)."""


class SessionError(CtxRadarError):
    """A session aborted mid-run. The partial transcript and audit log are preserved."""

    def __init__(self, message: str, *, store=None, audit=None):
        super().__init__(message)
        self.store = store
        self.audit = audit if audit is not None else []
