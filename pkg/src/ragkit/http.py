"""Swappable HTTP transport plus a retrying request helper.

Steps and clients never talk to the network directly; they go through a
transport object so tests can substitute stubs and count requests. The
default transport wraps httpx.
"""

from __future__ import annotations

import json
import logging
import random
import time
from dataclasses import dataclass
from typing import Any, Protocol

from .errors import EndpointError

logger = logging.getLogger(__name__)


@dataclass
class HttpResponse:
    status: int
    body: bytes

    def json(self) -> Any:
        return json.loads(self.body.decode("utf-8"))


class HttpTransport(Protocol):
    def request(
        self,
        method: str,
        url: str,
        *,
        headers: dict[str, str] | None = None,
        json_body: Any | None = None,
        timeout: float = 30.0,
    ) -> HttpResponse: ...


class HttpxTransport:
    """Real transport backed by httpx."""

    def request(self, method, url, *, headers=None, json_body=None, timeout=30.0):
        import httpx

        resp = httpx.request(
            method,
            url,
            headers=headers,
            json=json_body,
            timeout=timeout,
            follow_redirects=True,
        )
        return HttpResponse(resp.status_code, resp.content)


def default_transport() -> HttpTransport:
    return HttpxTransport()


def request_with_retries(
    transport: HttpTransport,
    method: str,
    url: str,
    *,
    headers: dict[str, str] | None = None,
    json_body: Any | None = None,
    timeout: float = 30.0,
    retries: int = 3,
    backoff: float = 0.25,
    what: str = "request",
) -> HttpResponse:
    """Issue a request with up to ``retries`` retries on 5xx/429/transport errors.

    Retry delays are jittered exponential backoff. Non-retryable statuses
    (4xx other than 429) fail immediately.
    """
    last: str = ""
    for attempt in range(retries + 1):
        try:
            resp = transport.request(
                method, url, headers=headers, json_body=json_body, timeout=timeout
            )
        except Exception as exc:
            last = f"transport error: {exc}"
        else:
            if 200 <= resp.status < 300:
                if attempt:
                    logger.info("%s to %s succeeded after %d retries", what, url, attempt)
                return resp
            if resp.status in (429,) or resp.status >= 500:
                last = f"status {resp.status}"
            else:
                raise EndpointError(f"{what} to {url} failed with status {resp.status}")
        if attempt < retries:
            delay = backoff * (2**attempt) * (0.5 + random.random())
            logger.warning("%s to %s failed (%s); retry %d/%d", what, url, last, attempt + 1, retries)
            if delay > 0:
                time.sleep(delay)
    raise EndpointError(f"{what} to {url} failed after {retries + 1} attempts ({last})")
