"""Runtime configuration: endpoints, keys, timeouts, concurrency caps.

Loaded from a JSON config file; selected values can be overridden through
environment variables (GRADELINE_TIMEOUT_MS, GRADELINE_<PROVIDER>_BASE_URL,
GRADELINE_<PROVIDER>_API_KEY).
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .domain import GenerationParams, ModelRef, Provider
from .errors import ConfigError

ENV_PREFIX = "GRADELINE"


@dataclass
class ProviderSettings:
    base_url: str = ""
    api_key: str = ""


@dataclass
class Config:
    data_dir: str = "gradeline-data"
    host: str = "127.0.0.1"
    port: int = 8321
    timeout_ms: int = 120_000
    retry_limit: int = 2
    backoff_s: tuple[float, ...] = (1.0, 2.0, 4.0)
    provider_concurrency: int = 4
    judge_seed: int = 0
    judge_temperature: float = 0.0
    judge_retry: int = 1
    providers: dict[str, ProviderSettings] = field(default_factory=dict)
    models: dict[str, dict] = field(default_factory=dict)

    def provider_settings(self, provider: Provider) -> ProviderSettings:
        return self.providers.get(provider.value, ProviderSettings())

    def model_ref(self, name: str) -> ModelRef:
        """Resolve a named model from the config's models section."""
        entry = self.models.get(name)
        if entry is None:
            raise ConfigError(f"model {name!r} is not defined in config")
        try:
            provider = Provider(entry.get("provider", "openai_compatible"))
        except ValueError:
            raise ConfigError(f"model {name!r}: unknown provider {entry.get('provider')!r}") from None
        base_url = entry.get("base_url") or self.provider_settings(provider).base_url
        if not base_url:
            raise ConfigError(f"model {name!r}: no base_url configured")
        return ModelRef(
            provider=provider,
            base_url=base_url,
            model_name=entry.get("model_name", name),
            generation_params=GenerationParams(
                temperature=entry.get("temperature", 0.0),
                max_tokens=entry.get("max_tokens", 1024),
                seed=entry.get("seed"),
            ),
        )


def load_config(path: str | Path | None = None, env: dict[str, str] | None = None) -> Config:
    env = dict(os.environ if env is None else env)
    raw: dict = {}
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise ConfigError(f"config file not found: {p}")
        try:
            raw = json.loads(p.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}") from exc

    providers = {
        name: ProviderSettings(
            base_url=settings.get("base_url", ""), api_key=settings.get("api_key", "")
        )
        for name, settings in raw.get("providers", {}).items()
    }
    config = Config(
        data_dir=raw.get("data_dir", "gradeline-data"),
        host=raw.get("host", "127.0.0.1"),
        port=raw.get("port", 8321),
        timeout_ms=raw.get("timeout_ms", 120_000),
        retry_limit=raw.get("retry_limit", 2),
        backoff_s=tuple(raw.get("backoff_s", (1.0, 2.0, 4.0))),
        provider_concurrency=raw.get("provider_concurrency", 4),
        judge_seed=raw.get("judge_seed", 0),
        judge_temperature=raw.get("judge_temperature", 0.0),
        judge_retry=raw.get("judge_retry", 1),
        providers=providers,
        models=raw.get("models", {}),
    )

    if f"{ENV_PREFIX}_TIMEOUT_MS" in env:
        config.timeout_ms = int(env[f"{ENV_PREFIX}_TIMEOUT_MS"])
    for provider in Provider:
        key = provider.value.upper()
        settings = config.providers.setdefault(provider.value, ProviderSettings())
        if f"{ENV_PREFIX}_{key}_BASE_URL" in env:
            settings.base_url = env[f"{ENV_PREFIX}_{key}_BASE_URL"]
        if f"{ENV_PREFIX}_{key}_API_KEY" in env:
            settings.api_key = env[f"{ENV_PREFIX}_{key}_API_KEY"]
    return config
