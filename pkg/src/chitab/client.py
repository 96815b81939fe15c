"""Collect answers from a vision-chat endpoint into an append-only response file."""

from __future__ import annotations

import base64
import copy
import json
import logging
import mimetypes
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator

import httpx

from .harness import ResponseRecord, parse_answer
from .qa import PromptStyle, QARecord

log = logging.getLogger(__name__)

# Strings equal to a placeholder are replaced by the value, which keeps JSON types intact.
DEFAULT_REQUEST_TEMPLATE = {
    "model": "{model}",
    "messages": [
        {
            "role": "user",
            "content": [
                {"type": "text", "text": "{prompt}"},
                {"type": "image_url", "image_url": {"url": "data:{mime};base64,{image_b64}"}},
            ],
        }
    ],
}
DEFAULT_RESPONSE_PATH = ["choices", 0, "message", "content"]


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    group: str = ""
    token_env: str | None = None
    timeout: float = 60.0
    max_retries: int = 4
    backoff: float = 1.0
    max_concurrency: int = 4
    path: str = "/chat/completions"
    request_template: dict = field(default_factory=lambda: copy.deepcopy(DEFAULT_REQUEST_TEMPLATE))
    response_path: list = field(default_factory=lambda: list(DEFAULT_RESPONSE_PATH))

    @classmethod
    def load(cls, path) -> EndpointConfig:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
        known = set(cls.__dataclass_fields__)
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown endpoint config keys: {sorted(unknown)}")
        return cls(**data)

    def headers(self) -> dict:
        h = {"Content-Type": "application/json"}
        if self.token_env:
            token = os.environ.get(self.token_env)
            if token is None:
                raise RuntimeError(f"environment variable {self.token_env} is not set")
            h["Authorization"] = f"Bearer {token}"
        return h

    def __repr__(self) -> str:
        return f"EndpointConfig(base_url={self.base_url!r}, model={self.model!r}, token_env={self.token_env!r})"


def _fill(template, values: dict):
    if isinstance(template, dict):
        return {k: _fill(v, values) for k, v in template.items()}
    if isinstance(template, list):
        return [_fill(v, values) for v in template]
    if isinstance(template, str):
        out = template
        for k, v in values.items():
            out = out.replace("{" + k + "}", v)
        return out
    return template


def build_request(cfg: EndpointConfig, prompt: str, image: bytes, mime: str = "image/jpeg") -> dict:
    values = {"model": cfg.model, "prompt": prompt, "mime": mime,
              "image_b64": base64.b64encode(image).decode("ascii")}
    return _fill(cfg.request_template, values)


def extract_text(cfg: EndpointConfig, payload) -> str:
    node = payload
    for key in cfg.response_path:
        node = node[key]
    if isinstance(node, list):  # content-parts dialect: first text part
        node = next(p["text"] for p in node if isinstance(p, dict) and "text" in p)
    return str(node)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _ask(client: httpx.Client, cfg: EndpointConfig, body: dict, sleep=time.sleep) -> str:
    delay = cfg.backoff
    last = None
    for attempt in range(cfg.max_retries + 1):
        try:
            resp = client.post(cfg.base_url.rstrip("/") + cfg.path, json=body, headers=cfg.headers(),
                               timeout=cfg.timeout)
            if resp.status_code == 429 or resp.status_code >= 500:
                raise httpx.HTTPStatusError(f"status {resp.status_code}", request=resp.request, response=resp)
            resp.raise_for_status()
            return extract_text(cfg, resp.json())
        except (httpx.TransportError, httpx.HTTPStatusError) as exc:
            last = exc
            if isinstance(exc, httpx.HTTPStatusError) and exc.response.status_code < 500 \
                    and exc.response.status_code != 429:
                break
            if attempt < cfg.max_retries:
                log.warning("request failed (%s); retry %d in %.1fs", exc, attempt + 1, delay)
                sleep(delay)
                delay *= 2
    raise RuntimeError(f"endpoint failed after retries: {last}")


def existing_keys(path) -> set:
    p = Path(path)
    if not p.exists():
        return set()
    keys = set()
    with open(p, encoding="utf-8") as f:
        for line in f:
            if line.strip():
                d = json.loads(line)
                keys.add((d["question_id"], d["group"], int(d["run_index"]), d["prompt_style"]))
    return keys


def collect_responses(cfg: EndpointConfig, records: Iterable[QARecord], style: PromptStyle, runs: int,
                      out_path, images_dir=None, client: httpx.Client | None = None,
                      sleep=time.sleep) -> Iterator[ResponseRecord]:
    """Query every (record, run) pair not already in ``out_path``; append and yield results.

    Requests carry only model, prompt and image; decoding parameters are left
    at the endpoint's defaults. Failures after the retry budget are persisted
    as records with ``error`` set.
    """
    style = PromptStyle.parse(style)
    group = cfg.group or cfg.model
    done = existing_keys(out_path)
    todo = [(r, k) for r in sorted(records, key=lambda r: r.question_id) for k in range(runs)
            if (r.question_id, group, k, style.value) not in done]
    if not todo:
        return
    own_client = client is None
    client = client or httpx.Client()

    def work(item):
        rec, k = item
        image_path = Path(images_dir or ".") / rec.image_name
        mime = mimetypes.guess_type(image_path.name)[0] or "image/jpeg"
        try:
            body = build_request(cfg, rec.prompts[style], image_path.read_bytes(), mime)
            text, err = _ask(client, cfg, body, sleep), None
        except (OSError, RuntimeError, KeyError, ValueError, StopIteration) as exc:
            text, err = "", str(exc)
        return ResponseRecord(rec.question_id, group, k, style, text,
                              parse_answer(text) if err is None else None, _now(), err)

    try:
        Path(out_path).parent.mkdir(parents=True, exist_ok=True)
        with open(out_path, "a", encoding="utf-8") as out, \
                ThreadPoolExecutor(max_workers=max(1, cfg.max_concurrency)) as pool:
            # single writer: results are appended here, in submission order
            for resp in pool.map(work, todo):
                out.write(json.dumps(resp.to_dict(), ensure_ascii=False) + "\n")
                out.flush()
                yield resp
    finally:
        if own_client:
            client.close()
