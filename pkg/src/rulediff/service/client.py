"""Clients for the rule service: over HTTP, or in-process for library use."""

from __future__ import annotations

import json
import time
from typing import Any, Mapping, Protocol, Sequence

import httpx

from ..rules import Rule, Schema, rule_key
from .faults import FaultConfig, ServiceResponse, ServiceResult, validate_message
from .server import VALIDATION_PATH


class ServiceTransportError(RuntimeError):
    """The service could not be reached or answered unexpectedly."""


class ServiceClient(Protocol):
    def validate(self, message: Mapping[str, Any]) -> ServiceResponse: ...


class HttpServiceClient:
    def __init__(self, base_url: str, timeout: float = 10.0, retries: int = 3, backoff: float = 0.2):
        self.base_url = base_url.rstrip("/")
        self.retries = retries
        self.backoff = backoff
        self._http = httpx.Client(timeout=timeout)

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> HttpServiceClient:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _post(self, message: Mapping[str, Any]) -> httpx.Response:
        last: Exception | None = None
        for attempt in range(self.retries + 1):
            try:
                return self._http.post(self.base_url + VALIDATION_PATH, json=dict(message))
            except httpx.TransportError as exc:
                last = exc
                if attempt < self.retries:
                    time.sleep(self.backoff * 2**attempt)
        raise ServiceTransportError(f"service unreachable at {self.base_url}: {last}") from last

    def validate(self, message: Mapping[str, Any]) -> ServiceResponse:
        resp = self._post(message)
        if resp.status_code == 500:
            return ServiceResponse(whole=ServiceResult.HTTP_500)
        if resp.status_code != 200:
            raise ServiceTransportError(f"service returned HTTP {resp.status_code}: {resp.text[:200]}")
        if not resp.content.strip():
            return ServiceResponse(whole=ServiceResult.EMPTY)
        try:
            body = json.loads(resp.content)
            results = {rule_key(e["ruleId"], int(e["version"])): ServiceResult(e["result"]) for e in body}
        except (ValueError, KeyError, TypeError) as exc:
            raise ServiceTransportError(f"unparseable service response: {exc}") from exc
        return ServiceResponse(results=results)


class LocalServiceClient:
    """Calls the validation logic directly, without a socket."""

    def __init__(self, rules: Sequence[Rule], schema: Schema, faults: FaultConfig):
        faults.check(rules, schema)
        self.rules, self.schema, self.faults = tuple(rules), dict(schema), faults

    def validate(self, message: Mapping[str, Any]) -> ServiceResponse:
        return validate_message(message, self.rules, self.schema, self.faults)
