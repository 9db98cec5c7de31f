"""Prompt assembly and generation backends (live HTTP or recorded replay)."""

import hashlib
import json
import logging
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import requests
import yaml

from .chunker import Chunk
from .model import MedannoError

log = logging.getLogger(__name__)

SCHEMA_IOB = "iob-token"
SCHEMA_DIRECT = "direct-chunk"

PLACEHOLDER = "{chunk}"
DEFAULT_SCAFFOLD = "Question: {chunk}\nAnswer:"

DEFAULT_TEMPERATURE = 0.0
DEFAULT_MAX_DECODE_STEPS = 1024
DEFAULT_MAX_IN_FLIGHT = 4


class TemplateError(MedannoError):
    """A prompt template is structurally unusable."""


class BackendUnavailable(MedannoError):
    """The generation backend could not produce a completion."""


class FixtureMiss(MedannoError):
    """Replay fixtures hold no completion for this fingerprint."""


@dataclass(frozen=True)
class PromptTemplate:
    schema: str  # iob-token | direct-chunk
    version: str
    context: str
    task_description: str
    examples: tuple[tuple[str, str], ...]
    question_scaffold: str = DEFAULT_SCAFFOLD


@dataclass(frozen=True)
class GenParams:
    model_id: str
    temperature: float = DEFAULT_TEMPERATURE
    max_decode_steps: int = DEFAULT_MAX_DECODE_STEPS


@dataclass(frozen=True)
class Completion:
    prompt_fingerprint: str
    text: str
    backend: str
    latency_ms: float
    truncated: bool = False


def build_prompt(template: PromptTemplate, chunk: Chunk) -> str:
    """Render context, task, worked examples, then the chunk as an open question.

    The chunk slot must appear exactly once in the question scaffold.
    """
    if not template.examples:
        raise TemplateError("template has no worked examples")
    slots = template.question_scaffold.count(PLACEHOLDER)
    if slots == 0:
        raise TemplateError("question scaffold is missing the chunk placeholder")
    if slots > 1:
        raise TemplateError("question scaffold repeats the chunk placeholder")
    parts = []
    if template.context:
        parts.append(template.context)
    if template.task_description:
        parts.append(template.task_description)
    for q, a in template.examples:
        parts.append(f"Question: {q}\nAnswer: {a}")
    parts.append(template.question_scaffold.replace(PLACEHOLDER, chunk.text))
    return "\n\n".join(parts)


_MARKER_NAMES = ("CONTEXT", "TASK", "EXAMPLE Q", "EXAMPLE A", "QUESTION")


def parse_template(raw: str) -> PromptTemplate:
    """Parse the on-disk template format: `---` front matter followed by
    ===CONTEXT=== / ===TASK=== / ===EXAMPLE Q=== / ===EXAMPLE A=== sections,
    with an optional ===QUESTION=== scaffold."""
    lines = raw.split("\n")
    if not lines or lines[0].strip() != "---":
        raise TemplateError("template must open with --- front matter")
    try:
        close = next(i for i in range(1, len(lines)) if lines[i].strip() == "---")
    except StopIteration:
        raise TemplateError("front matter is never closed") from None
    try:
        front = yaml.safe_load("\n".join(lines[1:close])) or {}
    except yaml.YAMLError as exc:
        raise TemplateError(f"front matter is not valid YAML: {exc}") from exc
    if not isinstance(front, dict) or "schema" not in front or "version" not in front:
        raise TemplateError("front matter needs schema: and version: keys")
    schema = str(front["schema"])
    if schema not in (SCHEMA_IOB, SCHEMA_DIRECT):
        raise TemplateError(f"unknown template schema {schema!r}")

    sections: list[tuple[str, list[str]]] = []
    for line in lines[close + 1 :]:
        stripped = line.strip()
        name = stripped[3:-3].strip() if stripped.startswith("===") and stripped.endswith("===") else None
        if name in _MARKER_NAMES:
            sections.append((name, []))
        elif sections:
            sections[-1][1].append(line)
        elif stripped:
            raise TemplateError(f"text before the first section marker: {line!r}")

    by_name: dict[str, list[str]] = {}
    examples: list[tuple[str, str]] = []
    pending_q: Optional[str] = None
    for name, body_lines in sections:
        body = "\n".join(body_lines).strip("\n")
        if name == "EXAMPLE Q":
            if pending_q is not None:
                raise TemplateError("EXAMPLE Q without a following EXAMPLE A")
            pending_q = body
        elif name == "EXAMPLE A":
            if pending_q is None:
                raise TemplateError("EXAMPLE A without a preceding EXAMPLE Q")
            examples.append((pending_q, body))
            pending_q = None
        else:
            if name in by_name:
                raise TemplateError(f"duplicate section ==={name}===")
            by_name[name] = [body]
    if pending_q is not None:
        raise TemplateError("EXAMPLE Q without a following EXAMPLE A")
    if "CONTEXT" not in by_name:
        raise TemplateError("template is missing ===CONTEXT===")
    if not examples:
        raise TemplateError("template needs at least one EXAMPLE Q/A pair")
    scaffold = by_name.get("QUESTION", [DEFAULT_SCAFFOLD])[0] or DEFAULT_SCAFFOLD
    return PromptTemplate(
        schema=schema,
        version=str(front["version"]),
        context=by_name["CONTEXT"][0],
        task_description=by_name.get("TASK", [""])[0],
        examples=tuple(examples),
        question_scaffold=scaffold,
    )


def load_template(path) -> PromptTemplate:
    return parse_template(Path(path).read_text(encoding="utf-8"))


def fingerprint(prompt: str, params: GenParams) -> str:
    """Stable identity of one generation request; keys replay fixtures."""
    h = hashlib.sha256()
    for part in (prompt, params.model_id, repr(float(params.temperature)), str(params.max_decode_steps)):
        h.update(part.encode("utf-8"))
        h.update(b"\x1f")
    return h.hexdigest()


@dataclass(frozen=True)
class BackendConfig:
    kind: str  # replay | http
    fixtures_path: Optional[str] = None
    base_url: Optional[str] = None
    auth_token: Optional[str] = None
    timeout_s: float = 30.0
    max_attempts: int = 3
    backoff_s: float = 0.5
    max_in_flight: int = DEFAULT_MAX_IN_FLIGHT


class ReplayBackend:
    """Serves completions recorded as JSONL {"fingerprint", "text"} lines."""

    name = "replay"

    def __init__(self, fixtures_path):
        self.path = Path(fixtures_path)
        self.fixtures: dict[str, str] = {}
        try:
            raw = self.path.read_text(encoding="utf-8")
        except OSError as exc:
            raise BackendUnavailable(f"cannot read fixtures {self.path}: {exc}") from exc
        for lineno, line in enumerate(raw.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                self.fixtures[str(obj["fingerprint"])] = str(obj["text"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise BackendUnavailable(f"{self.path}:{lineno}: bad fixture line: {exc}") from exc

    def complete(self, prompt: str, params: GenParams) -> Completion:
        fp = fingerprint(prompt, params)
        started = time.perf_counter()
        if fp not in self.fixtures:
            raise FixtureMiss(f"no recorded completion for fingerprint {fp}")
        text = self.fixtures[fp]
        return Completion(
            prompt_fingerprint=fp,
            text=text,
            backend=self.name,
            latency_ms=(time.perf_counter() - started) * 1000.0,
        )


class HttpBackend:
    """POSTs to <base_url>/generate and reads {"text": ...} back."""

    name = "http"

    def __init__(
        self,
        base_url: str,
        auth_token: Optional[str] = None,
        timeout_s: float = 30.0,
        max_attempts: int = 3,
        backoff_s: float = 0.5,
        session: Optional[requests.Session] = None,
    ):
        self.base_url = base_url.rstrip("/")
        self.auth_token = auth_token
        self.timeout_s = timeout_s
        self.max_attempts = max_attempts
        self.backoff_s = backoff_s
        self.session = session or requests.Session()

    def complete(self, prompt: str, params: GenParams) -> Completion:
        fp = fingerprint(prompt, params)
        payload = {
            "model_id": params.model_id,
            "prompt": prompt,
            "temperature": params.temperature,
            "max_decode_steps": params.max_decode_steps,
        }
        headers = {}
        if self.auth_token:
            headers["Authorization"] = f"Bearer {self.auth_token}"
        started = time.perf_counter()
        last_error: Optional[str] = None
        for attempt in range(self.max_attempts):
            if attempt:
                time.sleep(self.backoff_s * (2 ** (attempt - 1)))
            try:
                resp = self.session.post(
                    f"{self.base_url}/generate", json=payload, headers=headers, timeout=self.timeout_s
                )
            except requests.RequestException as exc:
                last_error = str(exc)
                continue
            if resp.status_code != 200:
                last_error = f"HTTP {resp.status_code}"
                continue
            try:
                obj = resp.json()
                text = str(obj["text"])
            except (ValueError, KeyError) as exc:
                last_error = f"bad response body: {exc}"
                continue
            truncated = bool(obj.get("truncated", False))
            if truncated:
                log.warning("completion %s hit the decode-step limit", fp[:12])
            return Completion(
                prompt_fingerprint=fp,
                text=text,
                backend=self.name,
                latency_ms=(time.perf_counter() - started) * 1000.0,
                truncated=truncated,
            )
        raise BackendUnavailable(
            f"{self.base_url}/generate failed after {self.max_attempts} attempts: {last_error}"
        )


class Generator:
    """A backend plus an in-flight cap shared across worker threads."""

    def __init__(self, config: BackendConfig):
        self.config = config
        if config.kind == "replay":
            if not config.fixtures_path:
                raise BackendUnavailable("replay backend needs a fixtures path")
            self.backend = ReplayBackend(config.fixtures_path)
        elif config.kind == "http":
            if not config.base_url:
                raise BackendUnavailable("http backend needs a base URL")
            self.backend = HttpBackend(
                config.base_url,
                auth_token=config.auth_token,
                timeout_s=config.timeout_s,
                max_attempts=config.max_attempts,
                backoff_s=config.backoff_s,
            )
        else:
            raise BackendUnavailable(f"unknown backend kind {config.kind!r}")
        self._slots = threading.Semaphore(max(1, config.max_in_flight))

    def generate(self, prompt: str, params: GenParams) -> Completion:
        with self._slots:
            return self.backend.complete(prompt, params)


def generate(prompt: str, params: GenParams, backend) -> Completion:
    """Run one generation request against an already-constructed backend."""
    return backend.complete(prompt, params)
