"""
Model Endpoint
Contract between the evaluation harness and a language model, an
OpenAI-compatible HTTP implementation, a deterministic scripted mock, and
bounded concurrent dispatch.
"""

import fnmatch
import json
import logging
import os
import threading
from abc import ABC, abstractmethod
from concurrent.futures import FIRST_EXCEPTION, ThreadPoolExecutor, wait
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import requests
from pydantic import BaseModel, ConfigDict, Field
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from pipeline_errors import ConfigurationError, EndpointError

logger = logging.getLogger(__name__)

CORRECT = "@correct"
WRONG = "@wrong"
REFUSE = "@refuse"
MULTI = "@multi"
POLICIES = (CORRECT, WRONG, REFUSE, MULTI)

CHOICE_LABELS = ("A", "B", "C", "D")


class EndpointConfig(BaseModel):
    """Where and how to reach a model; the token is read from the environment only"""
    model_config = ConfigDict(frozen=True, extra="forbid")

    label: str = "mock"
    kind: Literal["mock", "http"] = "mock"
    base_url: Optional[str] = None
    model: str = ""
    api_key_env: str = "BENCHMARK_API_KEY"
    max_concurrency: int = Field(4, ge=1)
    timeout: float = Field(60.0, gt=0)
    retries: int = Field(3, ge=0)
    backoff_factor: float = Field(0.5, ge=0)
    temperature: float = Field(0.0, ge=0)
    max_tokens: int = Field(512, ge=1)
    script: Optional[str] = None
    default_policy: Literal["@correct", "@wrong", "@refuse", "@multi"] = CORRECT


@dataclass(frozen=True)
class EndpointRequest:
    question_id: str
    prompt: str
    gold_answers: Tuple[str, ...] = ()
    choices: Optional[Tuple[str, ...]] = None
    form: str = ""


class ModelEndpoint(ABC):
    """send(prompt) -> completion text; the extra request fields are hints only mocks use"""

    label: str = "endpoint"
    max_concurrency: int = 1

    @abstractmethod
    def send(self, prompt: str, question_id: str = "", gold_answers: Sequence[str] = (),
             choices: Optional[Sequence[str]] = None, form: str = "") -> str:
        ...

    def send_request(self, request: EndpointRequest) -> str:
        return self.send(request.prompt, request.question_id, request.gold_answers,
                         request.choices, request.form)


class HttpModelEndpoint(ModelEndpoint):
    """Chat-completions endpoint with retry/backoff on transient HTTP failures"""

    RETRY_STATUSES = (429, 500, 502, 503, 504)

    def __init__(self, config: EndpointConfig, session: Optional[requests.Session] = None):
        if not config.base_url:
            raise ConfigurationError(f"Endpoint '{config.label}' needs a base_url")
        self.config = config
        self.label = config.label
        self.max_concurrency = config.max_concurrency
        self.url = config.base_url.rstrip("/") + "/chat/completions"

        if session is None:
            session = requests.Session()
            retry = Retry(total=config.retries, backoff_factor=config.backoff_factor,
                          status_forcelist=self.RETRY_STATUSES, allowed_methods=frozenset({"POST"}))
            adapter = HTTPAdapter(max_retries=retry, pool_maxsize=config.max_concurrency)
            session.mount("http://", adapter)
            session.mount("https://", adapter)
        self.session = session
        self.session.headers.update({"Content-Type": "application/json",
                                     "User-Agent": "synthetic-knowledge-benchmark/1.0"})
        token = os.environ.get(config.api_key_env)
        if token:
            self.session.headers["Authorization"] = f"Bearer {token}"
        else:
            logger.warning("Environment variable %s is not set; calling %s without a token",
                           config.api_key_env, self.url)

    def send(self, prompt: str, question_id: str = "", gold_answers: Sequence[str] = (),
             choices: Optional[Sequence[str]] = None, form: str = "") -> str:
        payload = {
            "model": self.config.model,
            "messages": [{"role": "user", "content": prompt}],
            "temperature": self.config.temperature,
            "max_tokens": self.config.max_tokens,
        }
        try:
            response = self.session.post(self.url, json=payload, timeout=self.config.timeout)
            response.raise_for_status()
            data = response.json()
            return data["choices"][0]["message"]["content"] or ""
        except requests.RequestException as e:
            raise EndpointError(f"{self.label}: request for {question_id or 'prompt'} failed: {e}")
        except (KeyError, IndexError, TypeError, ValueError) as e:
            raise EndpointError(f"{self.label}: unexpected response for {question_id or 'prompt'}: {e}")


class MockModelEndpoint(ModelEndpoint):
    """
    Deterministic endpoint answering from a script

    The script maps question ids (or fnmatch patterns such as "*/KD/*") to
    a literal completion or one of the policies @correct, @wrong, @refuse,
    @multi. Exact ids win over patterns; patterns are tried in script order;
    anything unscripted follows the default policy.
    """

    def __init__(self, script: Optional[Dict[str, str]] = None, default: str = CORRECT,
                 label: str = "mock", max_concurrency: int = 4):
        if default not in POLICIES:
            raise ConfigurationError(f"Unknown mock policy: {default}")
        self.script = dict(script or {})
        self.default = default
        self.label = label
        self.max_concurrency = max_concurrency
        self.calls: List[str] = []
        self._lock = threading.Lock()

    def _entry(self, question_id: str) -> str:
        if question_id in self.script:
            return self.script[question_id]
        for pattern, entry in self.script.items():
            if fnmatch.fnmatchcase(question_id, pattern):
                return entry
        return self.default

    @staticmethod
    def _label_of(choices: Sequence[str], answers: Sequence[str], want_correct: bool) -> str:
        gold = {a.casefold() for a in answers}
        for label, choice in zip(CHOICE_LABELS, choices):
            if (choice.casefold() in gold) == want_correct:
                return label
        return CHOICE_LABELS[0]

    def _render(self, policy: str, gold_answers: Sequence[str], choices: Optional[Sequence[str]],
                form: str) -> str:
        if policy == REFUSE:
            return "I don't know."
        if policy == MULTI:
            correct = self._label_of(choices, gold_answers, True) if choices else "A"
            other = self._label_of(choices, gold_answers, False) if choices else "B"
            return f"ANSWER: {', '.join(sorted({correct, other}))}"
        if choices:
            return f"ANSWER: {self._label_of(choices, gold_answers, policy == CORRECT)}"
        if policy == CORRECT:
            return f"ANSWER: {gold_answers[0]}" if gold_answers else ""
        if form == "boolean" and gold_answers:
            return "ANSWER: No" if gold_answers[0].casefold() == "yes" else "ANSWER: Yes"
        return "ANSWER: none of the above"

    def send(self, prompt: str, question_id: str = "", gold_answers: Sequence[str] = (),
             choices: Optional[Sequence[str]] = None, form: str = "") -> str:
        with self._lock:
            self.calls.append(question_id)
        entry = self._entry(question_id)
        if entry in POLICIES:
            return self._render(entry, list(gold_answers), list(choices) if choices else None, form)
        return entry


def load_mock_script(path: Union[str, Path], label: str = "mock") -> MockModelEndpoint:
    """{"default": "@correct", "responses": {"<id or pattern>": "<text or policy>"}}"""
    try:
        with open(path, encoding="utf-8") as f:
            raw = json.load(f)
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigurationError(f"Cannot read mock script {path}: {e}")
    return MockModelEndpoint(raw.get("responses", {}), raw.get("default", CORRECT), label=label)


def make_endpoint(config: EndpointConfig) -> ModelEndpoint:
    if config.kind == "http":
        return HttpModelEndpoint(config)
    if config.script:
        endpoint = load_mock_script(config.script, label=config.label)
        endpoint.max_concurrency = config.max_concurrency
        return endpoint
    return MockModelEndpoint(default=config.default_policy, label=config.label,
                             max_concurrency=config.max_concurrency)


def dispatch(endpoint: ModelEndpoint, requests_: Sequence[EndpointRequest],
             max_concurrency: Optional[int] = None,
             on_result: Optional[Callable[[EndpointRequest, str], None]] = None) -> Dict[str, str]:
    """
    Send requests with at most max_concurrency in flight

    Returns question id -> completion. on_result runs in the calling thread
    for every completed request, before any endpoint failure is re-raised.
    """
    workers = max(1, max_concurrency or endpoint.max_concurrency)
    outputs: Dict[str, str] = {}
    if not requests_:
        return outputs

    with ThreadPoolExecutor(max_workers=workers) as pool:
        pending = {pool.submit(endpoint.send_request, r): r for r in requests_}
        failure: Optional[BaseException] = None
        while pending and failure is None:
            done, _ = wait(pending, return_when=FIRST_EXCEPTION)
            for future in done:
                request = pending.pop(future)
                error = future.exception()
                if error is not None:
                    failure = failure or error
                    continue
                outputs[request.question_id] = future.result()
                if on_result is not None:
                    on_result(request, outputs[request.question_id])
        for future in pending:
            future.cancel()

    if failure is not None:
        logger.error("%s: %d of %d requests completed before failure", endpoint.label,
                     len(outputs), len(requests_))
        if isinstance(failure, EndpointError):
            raise failure
        raise EndpointError(f"{endpoint.label}: {failure}") from failure
    logger.info("%s: %d requests completed", endpoint.label, len(outputs))
    return outputs
