"""HTTP access to target and judge model endpoints.

Normalizes the OpenAI-compatible and Ollama wire formats to plain text and
enforces timeout, retry, and per-provider concurrency policy. Clients are
shareable across threads; each call is independent.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from enum import Enum

import httpx

from .config import Config
from .domain import ModelRef, Provider
from .errors import ConfigError, GatewayTimeout, ProtocolError, TransportError, ValidationFailed


class Purpose(str, Enum):
    TARGET_INFERENCE = "target_inference"
    JUDGING = "judging"


@dataclass(frozen=True)
class CompletionRequest:
    model: ModelRef
    prompt: str
    purpose: Purpose


@dataclass(frozen=True)
class CompletionResult:
    text: str
    latency_ms: int
    attempt_count: int
    provider_meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class HealthStatus:
    reachable: bool
    model_available: bool | None = None
    detail: str | None = None


class InferenceGateway:
    def __init__(self, config: Config | None = None):
        self.config = config or Config()
        self._client = httpx.Client()
        self._semaphores: dict[tuple[str, str], threading.Semaphore] = {}
        self._sem_lock = threading.Lock()

    def close(self) -> None:
        self._client.close()

    def _semaphore(self, model: ModelRef) -> threading.Semaphore:
        key = (model.provider.value, model.base_url)
        with self._sem_lock:
            if key not in self._semaphores:
                self._semaphores[key] = threading.Semaphore(self.config.provider_concurrency)
            return self._semaphores[key]

    def _build_request(self, request: CompletionRequest) -> tuple[str, dict, dict]:
        model = request.model
        params = model.generation_params
        if request.purpose is Purpose.JUDGING:
            # deterministic judging aids regression tracking
            temperature = self.config.judge_temperature
            seed: int | None = self.config.judge_seed
        else:
            temperature = params.temperature
            seed = params.seed

        headers = {}
        api_key = self.config.provider_settings(model.provider).api_key
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"

        if model.provider is Provider.OPENAI_COMPATIBLE:
            url = model.base_url.rstrip("/") + "/v1/chat/completions"
            body: dict = {
                "model": model.model_name,
                "messages": [{"role": "user", "content": request.prompt}],
                "temperature": temperature,
                "max_tokens": params.max_tokens,
            }
            if seed is not None:
                body["seed"] = seed
        else:
            url = model.base_url.rstrip("/") + "/api/generate"
            options: dict = {"temperature": temperature, "num_predict": params.max_tokens}
            if seed is not None:
                options["seed"] = seed
            body = {
                "model": model.model_name,
                "prompt": request.prompt,
                "stream": False,
                "options": options,
            }
        return url, body, headers

    def _extract_text(self, request: CompletionRequest, payload: dict) -> tuple[str, dict]:
        model = request.model
        try:
            if model.provider is Provider.OPENAI_COMPATIBLE:
                text = payload["choices"][0]["message"]["content"]
            else:
                text = payload["response"]
        except (KeyError, IndexError, TypeError):
            raise ProtocolError(
                f"response missing expected fields from {model.identity()}",
                model=model.identity(),
                purpose=request.purpose.value,
            ) from None
        if not isinstance(text, str):
            raise ProtocolError(
                f"generated text is not a string from {model.identity()}",
                model=model.identity(),
                purpose=request.purpose.value,
            )
        meta = {k: payload[k] for k in ("model", "usage", "done_reason") if k in payload}
        return text, meta

    def complete(self, request: CompletionRequest) -> CompletionResult:
        """Send one prompt; retry transport errors and HTTP 5xx, never 4xx."""
        model = request.model
        if not model.base_url:
            raise ConfigError(f"model {model.model_name!r} has no base_url configured")
        if not model.model_name:
            raise ValidationFailed("model_name must be non-empty")
        if model.generation_params.temperature < 0:
            raise ValidationFailed("temperature must be >= 0")
        if request.purpose is Purpose.JUDGING and not request.prompt:
            raise ValidationFailed("judge prompts are never empty")

        url, body, headers = self._build_request(request)
        timeout = self.config.timeout_ms / 1000.0
        semaphore = self._semaphore(model)
        attempts = self.config.retry_limit + 1
        last_error: Exception | None = None
        timed_out = False

        for attempt in range(1, attempts + 1):
            started = time.monotonic()
            try:
                with semaphore:
                    response = self._client.post(url, json=body, headers=headers, timeout=timeout)
            except httpx.TimeoutException as exc:
                last_error, timed_out = exc, True
            except httpx.HTTPError as exc:
                last_error, timed_out = exc, False
            else:
                if response.status_code >= 500:
                    last_error = TransportError(
                        f"HTTP {response.status_code} from {model.identity()} ({request.purpose.value})",
                        model=model.identity(),
                        purpose=request.purpose.value,
                        attempt_count=attempt,
                    )
                    timed_out = False
                elif response.status_code >= 400:
                    raise TransportError(
                        f"HTTP {response.status_code} from {model.identity()} ({request.purpose.value})",
                        model=model.identity(),
                        purpose=request.purpose.value,
                        attempt_count=attempt,
                    )
                else:
                    try:
                        payload = response.json()
                    except ValueError:
                        raise ProtocolError(
                            f"non-JSON response from {model.identity()}",
                            model=model.identity(),
                            purpose=request.purpose.value,
                            attempt_count=attempt,
                        ) from None
                    text, meta = self._extract_text(request, payload)
                    latency_ms = int((time.monotonic() - started) * 1000)
                    return CompletionResult(
                        text=text,
                        latency_ms=latency_ms,
                        attempt_count=attempt,
                        provider_meta=meta,
                    )
            if attempt <= self.config.retry_limit:
                backoff = self.config.backoff_s
                time.sleep(backoff[min(attempt - 1, len(backoff) - 1)] if backoff else 0)

        error_cls = GatewayTimeout if timed_out else TransportError
        raise error_cls(
            f"{model.identity()} unreachable after {attempts} attempts ({request.purpose.value}): {last_error}",
            model=model.identity(),
            purpose=request.purpose.value,
            attempt_count=attempts,
        )

    def probe(self, model: ModelRef) -> HealthStatus:
        """Reachability plus provider-reported model availability; never throws."""
        if not model.base_url:
            return HealthStatus(reachable=False, detail="no base_url configured")
        if model.provider is Provider.OPENAI_COMPATIBLE:
            url = model.base_url.rstrip("/") + "/v1/models"
        else:
            url = model.base_url.rstrip("/") + "/api/tags"
        headers = {}
        api_key = self.config.provider_settings(model.provider).api_key
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        try:
            response = self._client.get(url, headers=headers, timeout=self.config.timeout_ms / 1000.0)
        except httpx.HTTPError as exc:
            return HealthStatus(reachable=False, detail=str(exc))
        if response.status_code != 200:
            return HealthStatus(reachable=True, detail=f"HTTP {response.status_code} from model listing")
        try:
            payload = response.json()
            if model.provider is Provider.OPENAI_COMPATIBLE:
                names = {entry["id"] for entry in payload.get("data", [])}
            else:
                names = {entry["name"] for entry in payload.get("models", [])}
        except (ValueError, KeyError, TypeError):
            return HealthStatus(reachable=True, detail="unparseable model listing")
        if model.model_name in names:
            return HealthStatus(reachable=True, model_available=True)
        return HealthStatus(
            reachable=True, model_available=False, detail=f"model {model.model_name!r} not served"
        )
