"""Decision aid under test reached over HTTP.

Contract (JSON over POST, body {"history": [{"role", "content"}, ...]}):
    {base}/next_question -> {"stage": "<intake stage>", "utterance": "..."}
    {base}/recommend     -> {"recommendation": "<code or NO_RECOMMENDATION>", "utterance": "..."}
    {base}/intake        -> {"extracted": [...], "traces": [...]}
"""
import logging
import os
import threading
from typing import Any, Dict, List, Optional

import requests

from config import Defaults
from core.errors import PortError

from .base import AidQuestion, ChatMessage, IntakeRecord, IntakeStage, Recommendation, SutPort
from .registry import PortRegistry

logger = logging.getLogger("patsim.ports")


class HttpDecisionAid(SutPort):
    """External decision aid.

    Environment Variables:
        PATSIM_SUT_BASE_URL, PATSIM_SUT_API_KEY
    """

    name = "http"
    description = "External decision aid over HTTP"
    requires_auth = False

    def __init__(
        self,
        base_url: Optional[str] = None,
        api_key: Optional[str] = None,
        timeout: int = Defaults.REQUEST_TIMEOUT,
    ):
        self.base_url = (base_url or os.environ.get("PATSIM_SUT_BASE_URL") or "").rstrip("/")
        self.api_key = api_key or os.environ.get("PATSIM_SUT_API_KEY")
        self.timeout = timeout
        self._thread_local = threading.local()

    def is_configured(self) -> bool:
        return bool(self.base_url)

    def _get_session(self) -> requests.Session:
        """Get or create a thread-local session."""
        if not hasattr(self._thread_local, "session"):
            session = requests.Session()
            if self.api_key:
                session.headers["Authorization"] = f"Bearer {self.api_key}"
            self._thread_local.session = session
        return self._thread_local.session

    def _post(self, path: str, history: List[ChatMessage]) -> Dict[str, Any]:
        if not self.base_url:
            raise PortError("decision aid base URL not configured (PATSIM_SUT_BASE_URL)")
        body = {"history": [{"role": m.role, "content": m.content} for m in history]}
        try:
            response = self._get_session().post(f"{self.base_url}/{path}", json=body, timeout=self.timeout)
            response.raise_for_status()
            return response.json()
        except (requests.RequestException, ValueError) as e:
            raise PortError(f"decision aid {path} failed: {e}") from e

    def next_question(self, history: List[ChatMessage]) -> AidQuestion:
        data = self._post("next_question", history)
        try:
            return AidQuestion(stage=IntakeStage(data["stage"]), utterance=str(data["utterance"]))
        except (KeyError, ValueError) as e:
            raise PortError(f"decision aid returned an invalid question: {e}") from e

    def recommend(self, history: List[ChatMessage]) -> Recommendation:
        try:
            return Recommendation.model_validate(self._post("recommend", history))
        except ValueError as e:
            raise PortError(f"decision aid returned an invalid recommendation: {e}") from e

    def intake(self, history: List[ChatMessage]) -> IntakeRecord:
        try:
            return IntakeRecord.model_validate(self._post("intake", history))
        except ValueError as e:
            raise PortError(f"decision aid returned an invalid intake record: {e}") from e


PortRegistry.register(HttpDecisionAid)
