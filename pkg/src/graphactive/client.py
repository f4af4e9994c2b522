"""Thin HTTP client for the annotation service, used by the CLI."""

from __future__ import annotations

import httpx

from .errors import GraphActiveError


class ServiceError(GraphActiveError):
    """The service answered with an error payload."""

    def __init__(self, status: int, code: str, message: str):
        super().__init__(f"[{status} {code}] {message}")
        self.status = status
        self.code = code


class SessionClient:
    """Typed wrapper over the session endpoints."""

    def __init__(self, base_url: str = "http://127.0.0.1:8000", timeout: float = 120.0):
        self.base_url = base_url.rstrip("/")
        self._client = httpx.Client(base_url=self.base_url, timeout=timeout)

    def close(self) -> None:
        self._client.close()

    def __enter__(self) -> "SessionClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _unwrap(self, resp: httpx.Response):
        if resp.status_code >= 400:
            try:
                body = resp.json()
            except ValueError:
                body = {"code": "unknown", "message": resp.text}
            raise ServiceError(
                resp.status_code, body.get("code", "unknown"), body.get("message", "")
            )
        return resp

    def create_session(self, payload: dict) -> dict:
        return self._unwrap(self._client.post("/sessions", json=payload)).json()

    def get_state(self, session_id: str) -> dict:
        return self._unwrap(self._client.get(f"/sessions/{session_id}")).json()

    def next_query(self, session_id: str) -> dict:
        return self._unwrap(self._client.post(f"/sessions/{session_id}/query")).json()

    def submit_label(self, session_id: str, index: int, label: int) -> dict:
        return self._unwrap(
            self._client.post(
                f"/sessions/{session_id}/labels", json={"index": index, "label": label}
            )
        ).json()

    def export_csv(self, session_id: str) -> str:
        return self._unwrap(self._client.get(f"/sessions/{session_id}/export")).text
