"""Live chat-completion port (OpenAI-compatible endpoint)."""
import logging
import os
from typing import List, Optional

from config import Defaults
from core.errors import PortError

from .base import ChatMessage, ChatPort
from .registry import PortRegistry

logger = logging.getLogger("patsim.ports")

# Simulator view: the aid speaks as "user", the patient model answers as "assistant"
ROLE_MAP = {"aid": "user", "patient": "assistant", "user": "user", "assistant": "assistant"}


class OpenAIChat(ChatPort):
    """Chat completions over HTTP.

    Environment Variables:
        PATSIM_CHAT_BASE_URL: endpoint (default: the OpenAI API)
        PATSIM_CHAT_API_KEY: key (falls back to OPENAI_API_KEY)

    Example:
        chat = OpenAIChat(model="gpt-4o")
        if chat.is_configured():
            reply = chat.request(system_prompt, history)
    """

    name = "openai"
    description = "OpenAI-compatible chat-completion endpoint"
    requires_auth = True

    def __init__(
        self,
        model: str = Defaults.LLM_MODEL,
        temperature: float = Defaults.LLM_TEMPERATURE,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: int = Defaults.REQUEST_TIMEOUT,
        json_mode: bool = True,
        seed: Optional[int] = None,
    ):
        self.model = model
        self.temperature = temperature
        self.base_url = base_url or os.environ.get("PATSIM_CHAT_BASE_URL")
        self.api_key = api_key or os.environ.get("PATSIM_CHAT_API_KEY") or os.environ.get("OPENAI_API_KEY")
        self.timeout = timeout
        self.json_mode = json_mode
        self.seed = seed
        self._client = None

    @property
    def client(self):
        """Lazy-load the OpenAI client."""
        if self._client is None:
            import openai
            self._client = openai.OpenAI(base_url=self.base_url, api_key=self.api_key, timeout=self.timeout)
        return self._client

    def is_configured(self) -> bool:
        return bool(self.api_key)

    def request(self, system_prompt: str, messages: List[ChatMessage]) -> str:
        payload = [{"role": "system", "content": system_prompt}]
        payload.extend({"role": ROLE_MAP[m.role], "content": m.content} for m in messages)
        kwargs = {}
        if self.json_mode:
            kwargs["response_format"] = {"type": "json_object"}
        if self.seed is not None:
            kwargs["seed"] = self.seed
        try:
            response = self.client.chat.completions.create(
                model=self.model,
                messages=payload,
                temperature=self.temperature,
                **kwargs,
            )
        except Exception as e:
            raise PortError(f"chat request failed: {e}") from e
        usage = getattr(response, "usage", None)
        if usage is not None:
            logger.debug(f"[Chat] tokens: {usage.prompt_tokens}+{usage.completion_tokens}")
        return response.choices[0].message.content or ""


PortRegistry.register(OpenAIChat)
