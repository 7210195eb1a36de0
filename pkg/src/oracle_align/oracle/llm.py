"""LLM-backed oracle speaking the chat-completions HTTP protocol.

The request asks for a structured reply holding a single boolean field. Replies
that do not validate are retried with the identical payload; after
``max_retries`` extra attempts the oracle abstains. HTTP 429 pauses the shared
rate limiter and does not use up a validation retry.
"""

from __future__ import annotations

import json
import logging
import os
import re
import time

import httpx

from ..alignment import Decision, Mapping
from ..prompts import PromptInstance
from .base import OracleConfig, OracleConfigError, OracleVerdict
from .ratelimit import TokenBucket

log = logging.getLogger(__name__)

ANSWER_FIELD = "answer"
RESPONSE_SCHEMA = {
    "type": "object",
    "properties": {ANSWER_FIELD: {"type": "boolean"}},
    "required": [ANSWER_FIELD],
    "additionalProperties": False,
}
# at most this many 429 replies per question before one counts as a failed attempt
MAX_RATE_LIMIT_WAITS = 8

_BARE_BOOLEAN = re.compile(r"^\W*(true|false)\W*$", re.IGNORECASE)


def build_request(prompt: PromptInstance, config: OracleConfig) -> dict:
    messages = []
    if prompt.system_text:
        messages.append({"role": "system", "content": prompt.system_text})
    messages.append({"role": "user", "content": prompt.user_text})
    body = {
        "model": config.model_name,
        "messages": messages,
        "temperature": 0,
        "n": 1,
    }
    if config.structured_output:
        body["response_format"] = {
            "type": "json_schema",
            "json_schema": {"name": "mapping_verdict", "strict": True, "schema": RESPONSE_SCHEMA},
        }
    return body


def parse_answer(content: str | None, structured: bool = True) -> bool | None:
    """Boolean carried by a reply, or None if the reply does not validate."""
    if content is None:
        return None
    if structured:
        try:
            data = json.loads(content)
        except (TypeError, ValueError):
            return None
        if isinstance(data, dict) and set(data) == {ANSWER_FIELD} and isinstance(data[ANSWER_FIELD], bool):
            return data[ANSWER_FIELD]
        return None
    m = _BARE_BOOLEAN.match(content.strip())
    if m is None:
        return None
    return m.group(1).lower() == "true"


def _retry_after(response: httpx.Response, fallback: float) -> float:
    value = response.headers.get("retry-after")
    try:
        return max(0.0, float(value)) if value is not None else fallback
    except ValueError:
        return fallback


class LLMOracle:
    needs_prompt = True

    def __init__(self, config: OracleConfig, limiter: TokenBucket | None = None,
                 client: httpx.Client | None = None, api_key: str | None = None):
        if config.kind != "llm":
            raise OracleConfigError(f"LLMOracle needs an llm config, got kind={config.kind!r}")
        key = api_key if api_key is not None else os.environ.get(config.api_key_env_var)
        if not key:
            raise OracleConfigError(f"environment variable {config.api_key_env_var} is not set")
        self.config = config
        self.identity = config.identity
        self.max_in_flight = config.max_in_flight
        self.limiter = limiter or TokenBucket(config.rpm_limit)
        self.url = config.endpoint_url.rstrip("/") + "/chat/completions"
        self._client = client or httpx.Client(timeout=config.request_timeout)
        self._headers = {"Authorization": f"Bearer {key}", "Content-Type": "application/json"}

    def close(self):
        self._client.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def _post(self, body: dict) -> httpx.Response | None:
        """One logical request; 429s are waited out here. None means a transport failure."""
        backoff = 1.0
        for _ in range(MAX_RATE_LIMIT_WAITS + 1):
            self.limiter.acquire()
            try:
                response = self._client.post(self.url, json=body, headers=self._headers,
                                             timeout=self.config.request_timeout)
            except httpx.HTTPError as exc:
                log.warning("request to %s failed: %s", self.url, exc)
                return None
            if response.status_code != 429:
                return response
            wait = _retry_after(response, backoff)
            backoff = min(backoff * 2, 60.0)
            log.info("rate limited by %s, pausing %.1fs", self.url, wait)
            self.limiter.penalize(wait)
        return response

    def assess(self, mapping: Mapping, prompt: PromptInstance | None = None) -> OracleVerdict:
        if prompt is None:
            raise ValueError("the LLM oracle needs a rendered prompt")
        body = build_request(prompt, self.config)
        started = time.perf_counter()
        raw = None
        in_tokens = out_tokens = None
        attempts = 0
        answer = None
        while attempts <= self.config.max_retries:
            attempts += 1
            response = self._post(body)
            if response is None:
                continue
            if response.status_code in (401, 403):
                raise OracleConfigError(f"{self.url} rejected the credentials (HTTP {response.status_code})")
            if response.status_code == 404:
                raise OracleConfigError(f"{self.url} not found (HTTP 404); check endpoint_url and model_name")
            if response.status_code != 200:
                raw = response.text
                continue
            try:
                payload = response.json()
                raw = payload["choices"][0]["message"]["content"]
                usage = payload.get("usage") or {}
                in_tokens = usage.get("prompt_tokens")
                out_tokens = usage.get("completion_tokens")
            except (ValueError, KeyError, IndexError, TypeError):
                raw = response.text
                continue
            answer = parse_answer(raw, self.config.structured_output)
            if answer is not None:
                break
        if answer is None:
            decision = Decision.ABSTAIN
        else:
            decision = Decision.ACCEPT if answer else Decision.REJECT
        return OracleVerdict(
            mapping_key=mapping.key,
            decision=decision,
            attempts=attempts,
            latency=time.perf_counter() - started,
            raw_response=raw,
            input_tokens=in_tokens,
            output_tokens=out_tokens,
        )


def llm_assess(prompt: PromptInstance, config: OracleConfig, limiter: TokenBucket | None = None) -> OracleVerdict:
    """One-off question to an LLM endpoint."""
    source, target, relation = prompt.mapping_key
    with LLMOracle(config, limiter=limiter) as oracle:
        return oracle.assess(Mapping(source, target, relation), prompt)
