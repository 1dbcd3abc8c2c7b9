"""Chat-completion access: retries, response cache, mock providers."""

from .base import (
    AuthError,
    ChatRequest,
    ChatResponse,
    ContentError,
    LLMError,
    Provider,
    RateLimitError,
    ScriptExhausted,
    TransportError,
    cache_key,
)
from .client import cache_path, cached_complete, complete, read_cached, write_cached
from .http import (
    BUILTIN_PROVIDERS,
    OpenAICompatibleProvider,
    ProviderSpec,
    credential_env_var,
    load_registry,
)
from .mock import MOCK_KINDS, format_ranking, mock_provider

__all__ = [
    "AuthError",
    "BUILTIN_PROVIDERS",
    "ChatRequest",
    "ChatResponse",
    "ContentError",
    "LLMError",
    "MOCK_KINDS",
    "OpenAICompatibleProvider",
    "Provider",
    "ProviderSpec",
    "RateLimitError",
    "ScriptExhausted",
    "TransportError",
    "cache_key",
    "cache_path",
    "cached_complete",
    "complete",
    "credential_env_var",
    "format_ranking",
    "load_registry",
    "mock_provider",
    "read_cached",
    "write_cached",
]
