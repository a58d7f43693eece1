"""Uniform access to text-generation backends.

Three backend kinds share one ``complete`` call: ``live_http`` talks to any
endpoint following the common chat-completions convention, ``cassette``
replays recorded completions keyed by request fingerprint, and ``mock``
serves scripted responses. Cassette and mock never touch the network, which
keeps every test and training replay fully offline.
"""
from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .errors import BackendError, CassetteMiss, PathUnwritable

API_KEY_ENV = "ROPE_LLM_API_KEY"
BASE_URL_ENV = "ROPE_LLM_BASE_URL"

# Temperature policy by purpose; callers override per completion.
TEMPERATURE_EVALUATION = 0.0
TEMPERATURE_CODE_EDIT = 0.3
TEMPERATURE_CHAT = 0.7


@dataclass(frozen=True)
class Message:
    role: str
    content: str


@dataclass(frozen=True)
class Completion:
    request_fingerprint: str
    text: str
    latency: float
    backend_id: str


@dataclass(frozen=True)
class BackendConfig:
    backend_id: str
    kind: str  # live_http | cassette | mock
    model_name: str = "default"
    base_url: str | None = None
    temperature: float = TEMPERATURE_CHAT
    max_retries: int = 3
    timeout: float = 30.0
    max_in_flight: int = 4
    # cassette / recording
    cassette_path: str | None = None
    record_path: str | None = None
    # mock
    mock_script: tuple[tuple[str, str], ...] = ()
    mock_handler: Callable[[Sequence[Message]], str | None] | None = None
    mock_default: str | None = None

    def __post_init__(self):
        if self.kind not in ("live_http", "cassette", "mock"):
            raise ValueError(f"unknown backend kind {self.kind!r}")
        if not 0.0 <= self.temperature <= 2.0:
            raise ValueError("temperature must be within [0, 2]")
        if self.kind == "cassette" and not self.cassette_path:
            raise ValueError("cassette backend needs cassette_path")


def mock_backend(
    backend_id: str = "mock",
    script: dict[str, str] | None = None,
    handler: Callable[[Sequence[Message]], str | None] | None = None,
    default: str | None = None,
    temperature: float = TEMPERATURE_CHAT,
) -> BackendConfig:
    return BackendConfig(
        backend_id=backend_id,
        kind="mock",
        temperature=temperature,
        mock_script=tuple(sorted((script or {}).items())),
        mock_handler=handler,
        mock_default=default,
    )


def cassette_backend(path: str | Path, backend_id: str = "cassette", model_name: str = "default") -> BackendConfig:
    return BackendConfig(
        backend_id=backend_id, kind="cassette", model_name=model_name, cassette_path=str(path)
    )


def live_backend(
    backend_id: str,
    model_name: str,
    base_url: str | None = None,
    temperature: float = TEMPERATURE_CHAT,
    max_retries: int = 3,
    timeout: float = 30.0,
) -> BackendConfig:
    base_url = base_url or os.environ.get(BASE_URL_ENV)
    if not base_url:
        raise ValueError(f"live backend needs a base_url (flag, config, or {BASE_URL_ENV})")
    return BackendConfig(
        backend_id=backend_id,
        kind="live_http",
        model_name=model_name,
        base_url=base_url,
        temperature=temperature,
        max_retries=max_retries,
        timeout=timeout,
    )


# --- fingerprinting -----------------------------------------------------------

_WS_RE = re.compile(r"\s+")


def fingerprint(model_name: str, temperature: float, messages: Sequence[Message]) -> str:
    """Stable hash of the canonicalized request.

    Message text is whitespace-normalized and parameters are serialized with
    sorted keys, so semantically identical requests collide on purpose.
    """
    canonical = {
        "model": model_name,
        "temperature": round(float(temperature), 6),
        "messages": [
            {"role": m.role, "content": _WS_RE.sub(" ", m.content).strip()} for m in messages
        ],
    }
    blob = json.dumps(canonical, sort_keys=True, ensure_ascii=True)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# --- completion ---------------------------------------------------------------

def complete(
    config: BackendConfig,
    messages: Sequence[Message],
    temperature: float | None = None,
) -> Completion:
    temp = config.temperature if temperature is None else temperature
    fp = fingerprint(config.model_name, temp, messages)
    started = time.monotonic()
    if config.kind == "mock":
        text = _mock_text(config, messages)
    elif config.kind == "cassette":
        text = _cassette_lookup(config.cassette_path, fp)
    else:
        text = _live_call(config, messages, temp)
        if config.record_path:
            _cassette_append(config.record_path, fp, config, messages, temp, text)
    return Completion(
        request_fingerprint=fp,
        text=text,
        latency=time.monotonic() - started,
        backend_id=config.backend_id,
    )


def record(config: BackendConfig, cassette_path: str | Path) -> BackendConfig:
    """Wrap a live backend so every completion is appended to a cassette."""
    if config.kind != "live_http":
        raise ValueError("only live backends can record")
    path = Path(cassette_path)
    if not path.parent.is_dir() or not os.access(path.parent, os.W_OK):
        raise PathUnwritable(f"cannot write cassette at {path}")
    return replace(config, record_path=str(path))


# --- mock ----------------------------------------------------------------------

def _mock_text(config: BackendConfig, messages: Sequence[Message]) -> str:
    last = messages[-1].content if messages else ""
    script = dict(config.mock_script)
    if last in script:
        return script[last]
    # Longest scripted key contained anywhere in the request wins.
    joined = "\n".join(m.content for m in messages)
    for key in sorted(script, key=lambda k: (-len(k), k)):
        if key and key in joined:
            return script[key]
    if config.mock_handler is not None:
        handled = config.mock_handler(messages)
        if handled is not None:
            return handled
    if config.mock_default is not None:
        return config.mock_default
    raise BackendError(f"mock backend {config.backend_id!r} has no scripted response")


# --- cassette -------------------------------------------------------------------

_cassette_cache: dict[str, tuple[float, dict[str, str]]] = {}
_cassette_lock = threading.Lock()


def _cassette_index(path: str) -> dict[str, str]:
    file_path = Path(path)
    if not file_path.is_file():
        raise BackendError(f"cassette file {path} not found")
    mtime = file_path.stat().st_mtime_ns
    with _cassette_lock:
        cached = _cassette_cache.get(path)
        if cached and cached[0] == mtime:
            return cached[1]
    index: dict[str, str] = {}
    for line_no, line in enumerate(file_path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            entry = json.loads(line)
            index[entry["fingerprint"]] = entry["response"]["text"]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendError(f"cassette {path} line {line_no} unreadable: {exc}") from exc
    with _cassette_lock:
        _cassette_cache[path] = (mtime, index)
    return index


def _cassette_lookup(path: str, fp: str) -> str:
    index = _cassette_index(path)
    if fp not in index:
        raise CassetteMiss(fp)
    return index[fp]


def _cassette_append(
    path: str,
    fp: str,
    config: BackendConfig,
    messages: Sequence[Message],
    temperature: float,
    text: str,
) -> None:
    file_path = Path(path)
    existing: set[str] = set()
    if file_path.is_file():
        for line in file_path.read_text(encoding="utf-8").splitlines():
            if line.strip():
                try:
                    existing.add(json.loads(line)["fingerprint"])
                except (ValueError, KeyError):
                    continue
    if fp in existing:
        return
    entry = {
        "fingerprint": fp,
        "request": {
            "model": config.model_name,
            "temperature": temperature,
            "messages": [{"role": m.role, "content": m.content} for m in messages],
        },
        "response": {"text": text},
    }
    try:
        with file_path.open("a", encoding="utf-8") as fh:
            fh.write(json.dumps(entry, ensure_ascii=True) + "\n")
    except OSError as exc:
        raise PathUnwritable(f"cannot append cassette at {path}: {exc}") from exc
    with _cassette_lock:
        _cassette_cache.pop(path, None)


# --- live HTTP -------------------------------------------------------------------

_inflight: dict[str, threading.BoundedSemaphore] = {}
_inflight_lock = threading.Lock()


def _semaphore(config: BackendConfig) -> threading.BoundedSemaphore:
    key = f"{config.base_url}:{config.max_in_flight}"
    with _inflight_lock:
        if key not in _inflight:
            _inflight[key] = threading.BoundedSemaphore(config.max_in_flight)
        return _inflight[key]


def _live_call(config: BackendConfig, messages: Sequence[Message], temperature: float) -> str:
    api_key = os.environ.get(API_KEY_ENV)
    if not api_key:
        raise BackendError(f"live backend requires the {API_KEY_ENV} environment variable")
    if not config.base_url:
        raise BackendError("live backend requires a base_url")
    url = config.base_url.rstrip("/") + "/chat/completions"
    body = {
        "model": config.model_name,
        "temperature": temperature,
        "messages": [{"role": m.role, "content": m.content} for m in messages],
    }
    headers = {"Authorization": f"Bearer {api_key}"}
    last_error: Exception | None = None
    for attempt in range(config.max_retries + 1):
        if attempt:
            time.sleep(min(2.0 ** (attempt - 1) * 0.5, 8.0))
        try:
            with _semaphore(config):
                response = httpx.post(url, json=body, headers=headers, timeout=config.timeout)
        except httpx.TimeoutException as exc:
            last_error = exc
            continue
        except httpx.HTTPError as exc:
            last_error = exc
            continue
        if response.status_code == 429 or response.status_code >= 500:
            last_error = BackendError(f"transient status {response.status_code}")
            continue
        if response.status_code != 200:
            raise BackendError(f"backend returned status {response.status_code}: {response.text[:200]}")
        try:
            payload = response.json()
            return payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise BackendError(f"malformed completion payload: {exc}") from exc
    raise BackendError(f"backend {config.backend_id!r} failed after {config.max_retries + 1} attempts: {last_error}")
