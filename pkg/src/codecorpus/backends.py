"""Completion backends: a minimal HTTP endpoint client plus offline mocks.

The wire contract is a JSON POST {"prompt", "max_tokens", "temperature"}
returning {"text"}. Mock backends make the evaluation suite runnable with
no model behind it.
"""

from __future__ import annotations

import hashlib

import requests

from .seeding import derive_seed

FLD_LABELS = ("PROVED", "DISPROVED", "UNKNOWN")


class BackendError(RuntimeError):
    """Backend unreachable or returned an unusable response."""


class Backend:
    """Minimal completion interface.

    ``item`` carries the evaluation instance for mocks that need metadata;
    real backends must ignore it — only the prompt crosses the wire.
    """

    def complete(self, prompt: str, max_tokens: int, temperature: float,
                 item=None) -> str:
        raise NotImplementedError


class HttpBackend(Backend):
    def __init__(self, url: str, auth: str | None = None, timeout: float = 60.0):
        self.url = url
        self.auth = auth
        self.timeout = timeout

    def complete(self, prompt: str, max_tokens: int, temperature: float,
                 item=None) -> str:
        headers = {"Content-Type": "application/json"}
        if self.auth:
            headers["Authorization"] = self.auth
        payload = {"prompt": prompt, "max_tokens": max_tokens,
                   "temperature": temperature}
        try:
            resp = requests.post(self.url, json=payload, headers=headers,
                                 timeout=self.timeout)
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise BackendError(f"completion request failed: {exc}") from exc
        if not isinstance(body, dict) or not isinstance(body.get("text"), str):
            raise BackendError(f"completion response lacks a text field: {body!r}")
        return body["text"]


class UniformMockBackend(Backend):
    """Uniform random label per prompt, deterministic and order-independent.

    The draw is keyed by the prompt digest, so any request schedule yields
    the same answers.
    """

    def __init__(self, seed: int = 0, labels: tuple[str, ...] = FLD_LABELS):
        self.seed = seed
        self.labels = labels

    def complete(self, prompt: str, max_tokens: int, temperature: float,
                 item=None) -> str:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        return self.labels[derive_seed(self.seed, digest) % len(self.labels)]


class ConstantMockBackend(Backend):
    def __init__(self, text: str):
        self.text = text

    def complete(self, prompt: str, max_tokens: int, temperature: float,
                 item=None) -> str:
        return self.text


class EchoGoldBackend(Backend):
    """Oracle that answers with the instance's gold label."""

    def complete(self, prompt: str, max_tokens: int, temperature: float,
                 item=None) -> str:
        if item is None:
            raise BackendError("echo-gold backend needs the evaluation item")
        return str(item.gold)


def resolve_backend(spec: str, seed: int = 0, auth: str | None = None,
                    timeout: float = 60.0) -> Backend:
    """Build a backend from a CLI spec: mock:<name> or an endpoint URL."""
    if spec == "mock:uniform":
        return UniformMockBackend(seed=seed)
    if spec == "mock:echo-gold":
        return EchoGoldBackend()
    if spec.startswith("mock:constant:"):
        return ConstantMockBackend(spec[len("mock:constant:"):])
    if spec.startswith("mock:"):
        raise ValueError(f"unknown mock backend: {spec}")
    return HttpBackend(spec, auth=auth, timeout=timeout)
