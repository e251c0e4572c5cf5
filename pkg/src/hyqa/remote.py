"""HTTP plumbing shared by the remote scorer and generator clients."""

from __future__ import annotations

import requests


class TransportError(Exception):
    """The remote endpoint was unreachable or returned a failure status."""


class ProtocolError(Exception):
    """The remote endpoint answered with a malformed payload."""


def post_json(url: str, payload: dict, timeout: float = 60.0) -> dict:
    try:
        response = requests.post(url, json=payload, timeout=timeout)
        response.raise_for_status()
    except requests.RequestException as exc:
        raise TransportError(f"POST {url} failed: {exc}") from exc
    try:
        body = response.json()
    except ValueError as exc:
        raise ProtocolError(f"POST {url}: response is not JSON") from exc
    if not isinstance(body, dict):
        raise ProtocolError(f"POST {url}: expected a JSON object")
    return body
